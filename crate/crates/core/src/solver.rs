//! Galerkin pseudospectral integration of mBO and its mean-shifted variant mBO'.
//!
//! mBO:  u_t = -H u_xx + sigma u^2 u_x
//! mBO': u_t = -H u_xx + 2 sigma P_{!=c}(u^2) u_x
//!
//! Time stepping is Lawson (integrating-factor) RK4: the dispersive part is
//! solved exactly, `u_n(t) = e^{-i t n|n|} u_n(0)`.

use std::io::{BufRead, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{grid_size, SobolevIndex, SpectralError, SpectralField, C64};

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("l2 norm {norm:e} exceeds {factor:e} x initial {initial:e} at t = {t}")]
    BlowupDetected { t: f64, norm: f64, initial: f64, factor: f64 },
    #[error("non-finite state at t = {0}")]
    NonFinite(f64),
    #[error("invalid step configuration: {0}")]
    BadConfig(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
    #[error("trajectory io: {0}")]
    Io(String),
}

/// Sign of the nonlinearity: +1 focusing, -1 defocusing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "i64", into = "i64")]
pub enum Sigma {
    Plus,
    Minus,
}

impl Sigma {
    pub fn value(self) -> f64 {
        match self {
            Sigma::Plus => 1.0,
            Sigma::Minus => -1.0,
        }
    }
}

impl TryFrom<i64> for Sigma {
    type Error = String;
    fn try_from(s: i64) -> Result<Self, String> {
        match s {
            1 => Ok(Sigma::Plus),
            -1 => Ok(Sigma::Minus),
            _ => Err(format!("sigma must be +1 or -1, got {s}")),
        }
    }
}

impl From<Sigma> for i64 {
    fn from(s: Sigma) -> i64 {
        s.value() as i64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Equation {
    Mbo,
    MboPrime,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepConfig {
    pub equation: Equation,
    pub sigma: Sigma,
    pub dt: f64,
    #[serde(default = "default_blowup")]
    pub blowup_factor: f64,
}

fn default_blowup() -> f64 {
    1e6
}

impl StepConfig {
    pub fn new(equation: Equation, sigma: Sigma, dt: f64) -> Self {
        Self {
            equation,
            sigma,
            dt,
            blowup_factor: default_blowup(),
        }
    }

    pub fn scheme_id(&self) -> String {
        let eq = match self.equation {
            Equation::Mbo => "mbo",
            Equation::MboPrime => "mbo_prime",
        };
        format!("ifrk4-{eq}-dt{:e}", self.dt)
    }

    fn validate(&self) -> Result<(), SolverError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(SolverError::BadConfig(format!("dt = {}", self.dt)));
        }
        if !(self.blowup_factor > 1.0) {
            return Err(SolverError::BadConfig(format!("blowup factor {}", self.blowup_factor)));
        }
        Ok(())
    }
}

/// Nonlinear part of the vector field, dealiased so the Galerkin truncation is exact.
pub fn nonlinearity(u: &SpectralField, sigma: Sigma, eq: Equation) -> SpectralField {
    let n = u.n_max();
    // cubic terms have bandwidth 3N; a grid above 4N keeps |n| <= N alias free
    let m = grid_size(4 * n + 1);
    let ug = u.to_grid(m);
    let uxg = u.dx().to_grid(m);
    let s = sigma.value();
    let prod: Vec<C64> = match eq {
        Equation::Mbo => ug.iter().zip(&uxg).map(|(a, b)| a * a * b * s).collect(),
        Equation::MboPrime => {
            let sq: Vec<C64> = ug.iter().map(|a| a * a).collect();
            let mean = sq.iter().sum::<C64>() / m as f64;
            sq.iter().zip(&uxg).map(|(q, b)| (q - mean) * b * (2.0 * s)).collect()
        }
    };
    let out = SpectralField::from_grid(&prod, n);
    if u.is_real() {
        out.assume_real()
    } else {
        out
    }
}

/// Linear symbol: `-H d^2` has Fourier multiplier `-i n|n|`.
pub fn dispersion(n: i64) -> f64 {
    (n * n.abs()) as f64
}

pub fn linear_part(u: &SpectralField) -> SpectralField {
    u.map_modes(u.is_real(), |n, c| c * C64::new(0.0, -dispersion(n)))
}

pub fn rhs(u: &SpectralField, sigma: Sigma, eq: Equation) -> SpectralField {
    let mut r = linear_part(u);
    r += &nonlinearity(u, sigma, eq);
    r
}

pub fn rhs_mbo_prime(u: &SpectralField, sigma: Sigma) -> SpectralField {
    rhs(u, sigma, Equation::MboPrime)
}

pub fn rhs_mbo(u: &SpectralField, sigma: Sigma) -> SpectralField {
    rhs(u, sigma, Equation::Mbo)
}

/// Exact linear flow for time `tau`.
pub fn linear_flow(u: &SpectralField, tau: f64) -> SpectralField {
    u.map_modes(u.is_real(), |n, c| c * C64::from_polar(1.0, -tau * dispersion(n)))
}

/// One Lawson-RK4 step.
pub fn step(u: &SpectralField, cfg: &StepConfig) -> Result<SpectralField, SolverError> {
    cfg.validate()?;
    let out = step_unchecked(u, cfg.dt, cfg.sigma, cfg.equation);
    check_state(&out, u.l2_coeff_norm(), cfg, f64::NAN)?;
    Ok(out)
}

fn step_unchecked(u: &SpectralField, h: f64, sigma: Sigma, eq: Equation) -> SpectralField {
    let nl = |x: &SpectralField| nonlinearity(x, sigma, eq);
    let k1 = nl(u);
    let u_half = linear_flow(u, h / 2.0);
    let k1h = linear_flow(&k1, h / 2.0);
    let mut y = u_half.clone();
    y += &(&k1h * (h / 2.0));
    let k2 = nl(&y);
    let mut y = u_half.clone();
    y += &(&k2 * (h / 2.0));
    let k3 = nl(&y);
    let mut y = linear_flow(u, h);
    y += &linear_flow(&(&k3 * h), h / 2.0);
    let k4 = nl(&y);

    let mut mid = k2;
    mid += &k3;
    let mut acc = linear_flow(&k1, h);
    acc += &linear_flow(&(&mid * 2.0), h / 2.0);
    acc += &k4;
    let mut out = linear_flow(u, h);
    out += &(&acc * (h / 6.0));
    if u.is_real() {
        out.assume_real()
    } else {
        out
    }
}

fn check_state(u: &SpectralField, initial: f64, cfg: &StepConfig, t: f64) -> Result<(), SolverError> {
    let norm = u.l2_coeff_norm();
    if !norm.is_finite() {
        return Err(SolverError::NonFinite(t));
    }
    if norm > cfg.blowup_factor * initial.max(f64::MIN_POSITIVE) {
        return Err(SolverError::BlowupDetected {
            t,
            norm,
            initial,
            factor: cfg.blowup_factor,
        });
    }
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub states: Vec<SpectralField>,
    pub sigma: Sigma,
    pub dt: f64,
    pub scheme_id: String,
    pub equation: Equation,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn final_state(&self) -> &SpectralField {
        self.states.last().expect("nonempty trajectory")
    }

    /// Spacing between stored samples.
    pub fn sample_dt(&self) -> f64 {
        if self.times.len() < 2 {
            self.dt
        } else {
            self.times[1] - self.times[0]
        }
    }

    /// Index of the sample closest to `t`.
    pub fn index_of(&self, t: f64) -> usize {
        let h = self.sample_dt();
        (((t - self.times[0]) / h).round().max(0.0) as usize).min(self.len() - 1)
    }

    pub fn restrict(&self, n_max: usize) -> Trajectory {
        Trajectory {
            states: self.states.iter().map(|u| u.with_n_max(n_max)).collect(),
            ..self.clone()
        }
    }

    /// Every `k`-th sample.
    pub fn subsample(&self, k: usize) -> Trajectory {
        assert!(k >= 1, "subsample stride");
        Trajectory {
            times: self.times.iter().step_by(k).copied().collect(),
            states: self.states.iter().step_by(k).cloned().collect(),
            ..self.clone()
        }
    }

    /// JSON lines: a header object then one `{"t", "field"}` object per sample.
    pub fn write_jsonl(&self, mut w: impl Write) -> Result<(), SolverError> {
        let header = serde_json::json!({
            "sigma": i64::from(self.sigma),
            "dt": self.dt,
            "scheme_id": self.scheme_id,
            "equation": self.equation,
            "samples": self.len(),
        });
        let io = |e: std::io::Error| SolverError::Io(e.to_string());
        writeln!(w, "{header}").map_err(io)?;
        for (t, u) in self.times.iter().zip(&self.states) {
            let line = serde_json::json!({ "t": t, "field": u });
            writeln!(w, "{line}").map_err(io)?;
        }
        Ok(())
    }

    pub fn read_jsonl(r: impl BufRead) -> Result<Trajectory, SolverError> {
        #[derive(Deserialize)]
        struct Header {
            sigma: Sigma,
            dt: f64,
            scheme_id: String,
            equation: Equation,
        }
        #[derive(Deserialize)]
        struct Sample {
            t: f64,
            field: SpectralField,
        }
        let mut lines = r.lines();
        let bad = |e: String| SolverError::Io(e);
        let head = lines.next().ok_or_else(|| bad("empty trajectory file".into()))?;
        let head: Header = serde_json::from_str(&head.map_err(|e| bad(e.to_string()))?)
            .map_err(|e| bad(e.to_string()))?;
        let mut times = Vec::new();
        let mut states = Vec::new();
        for line in lines {
            let line = line.map_err(|e| bad(e.to_string()))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: Sample = serde_json::from_str(&line).map_err(|e| bad(e.to_string()))?;
            times.push(s.t);
            states.push(s.field);
        }
        Ok(Trajectory {
            times,
            states,
            sigma: head.sigma,
            dt: head.dt,
            scheme_id: head.scheme_id,
            equation: head.equation,
        })
    }

    /// CSV of `t, mean, mass_l2, energy, hs_norm`.
    pub fn write_observables_csv(&self, mut w: impl Write, s: f64) -> Result<(), SolverError> {
        let io = |e: std::io::Error| SolverError::Io(e.to_string());
        writeln!(w, "t,mean,mass_l2,energy,hs_norm").map_err(io)?;
        for (t, u) in self.times.iter().zip(&self.states) {
            let c = match self.equation {
                Equation::Mbo => conserved(u, self.sigma),
                Equation::MboPrime => conserved_prime(u, self.sigma),
            };
            writeln!(w, "{t},{},{},{},{}", c.mean, c.mass_l2, c.energy, u.sobolev_norm(s)).map_err(io)?;
        }
        Ok(())
    }
}

/// Integrates to `t_final`, storing every `sample_every`-th step.
pub fn integrate(
    u0: &SpectralField,
    cfg: &StepConfig,
    t_final: f64,
    sample_every: usize,
) -> Result<Trajectory, SolverError> {
    cfg.validate()?;
    if sample_every == 0 {
        return Err(SolverError::BadConfig("sample_every = 0".into()));
    }
    let steps = (t_final / cfg.dt).round() as usize;
    if ((steps as f64) * cfg.dt - t_final).abs() > 1e-9 * t_final.max(1.0) {
        return Err(SolverError::BadConfig(format!(
            "t_final {t_final} is not a multiple of dt {}",
            cfg.dt
        )));
    }
    let initial = u0.l2_coeff_norm();
    let mut times = vec![0.0];
    let mut states = vec![u0.clone()];
    let mut u = u0.clone();
    for k in 1..=steps {
        u = step_unchecked(&u, cfg.dt, cfg.sigma, cfg.equation);
        let t = k as f64 * cfg.dt;
        check_state(&u, initial, cfg, t)?;
        if k % sample_every == 0 {
            times.push(t);
            states.push(u.clone());
        }
    }
    Ok(Trajectory {
        times,
        states,
        sigma: cfg.sigma,
        dt: cfg.dt,
        scheme_id: cfg.scheme_id(),
        equation: cfg.equation,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ConservedTriple {
    /// `P_c u`, the spatial average.
    pub mean: f64,
    /// `int u^2`.
    pub mass_l2: f64,
    pub energy: f64,
}

fn quadratic_and_quartic(u: &SpectralField) -> (f64, f64, f64) {
    use std::f64::consts::PI;
    let two_pi = 2.0 * PI;
    let mass = two_pi * u.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>();
    // int u H u_x = 2 pi sum |n| |u_n|^2
    let kinetic = two_pi
        * u.modes()
            .zip(u.coeffs())
            .map(|(n, c)| n.abs() as f64 * c.norm_sqr())
            .sum::<f64>();
    let sq = u.product_full(u);
    let quartic = two_pi * sq.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>();
    (mass, kinetic, quartic)
}

/// Mean, `int u^2` and `int (u H u_x / 2 - sigma u^4 / 12)` for mBO.
pub fn conserved(u: &SpectralField, sigma: Sigma) -> ConservedTriple {
    let (mass, kinetic, quartic) = quadratic_and_quartic(u);
    ConservedTriple {
        mean: u.mean().re,
        mass_l2: mass,
        energy: 0.5 * kinetic - sigma.value() * quartic / 12.0,
    }
}

/// Mean, `int u^2` and `int (u H u_x - sigma u^4 / 3)` for mBO'.
pub fn conserved_prime(u: &SpectralField, sigma: Sigma) -> ConservedTriple {
    let (mass, kinetic, quartic) = quadratic_and_quartic(u);
    ConservedTriple {
        mean: u.mean().re,
        mass_l2: mass,
        energy: kinetic - sigma.value() * quartic / 3.0,
    }
}

/// `u'(t, x) = 2^{-1/2} w(t, x - sigma int_0^t P_c(w^2))` for an mBO trajectory `w`.
/// The time integral is a cumulative trapezoid over the stored samples.
pub fn mbo_to_mbo_prime(traj: &Trajectory) -> Result<Trajectory, SolverError> {
    if traj.equation != Equation::Mbo {
        return Err(SolverError::BadConfig("expected an mBO trajectory".into()));
    }
    let s = traj.sigma.value();
    let pc: Vec<f64> = traj
        .states
        .iter()
        .map(|w| w.coeffs().iter().map(|c| c.norm_sqr()).sum::<f64>())
        .collect();
    let mut shift = 0.0;
    let mut states = Vec::with_capacity(traj.len());
    for k in 0..traj.len() {
        if k > 0 {
            shift += 0.5 * (pc[k] + pc[k - 1]) * (traj.times[k] - traj.times[k - 1]);
        }
        let a = s * shift;
        let w = &traj.states[k];
        let moved = w.map_modes(w.is_real(), |n, c| c * C64::from_polar(1.0, -(n as f64) * a));
        states.push(&moved * std::f64::consts::FRAC_1_SQRT_2);
    }
    Ok(Trajectory {
        times: traj.times.clone(),
        states,
        sigma: traj.sigma,
        dt: traj.dt,
        scheme_id: format!("{}+shift", traj.scheme_id),
        equation: Equation::MboPrime,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwinReport {
    pub scheme_a: String,
    pub scheme_b: String,
    pub s: f64,
    pub horizon: f64,
    /// `sup_t ||u_a - u_b||_{H^s}` over the common samples.
    pub divergence: f64,
    /// Richardson estimate of the global error of the finer scheme, from a third run at half its step.
    pub fine_error_estimate: f64,
    pub ratio: f64,
    pub times: Vec<f64>,
    pub gaps: Vec<f64>,
}

/// Runs two schemes from one datum and compares them on their common sample times.
/// `b` must have the finer step and `a.dt / b.dt` must be an integer.
pub fn twin_probe(
    u0: &SpectralField,
    a: &StepConfig,
    b: &StepConfig,
    horizon: f64,
    s: impl Into<SobolevIndex>,
    samples: usize,
) -> Result<TwinReport, SolverError> {
    let s = s.into().value();
    let ratio = a.dt / b.dt;
    if ratio < 1.0 || (ratio - ratio.round()).abs() > 1e-9 {
        return Err(SolverError::BadConfig("coarse step must be an integer multiple of the fine step".into()));
    }
    let k = ratio.round() as usize;
    let coarse_steps = (horizon / a.dt).round() as usize;
    let stride = (coarse_steps / samples.max(1)).max(1);
    let ta = integrate(u0, a, horizon, stride)?;
    let tb = integrate(u0, b, horizon, stride * k)?;
    let c = StepConfig { dt: b.dt / 2.0, ..*b };
    let tc = integrate(u0, &c, horizon, stride * k * 2)?;
    let sup_gap = |x: &Trajectory, y: &Trajectory| -> Vec<f64> {
        x.states.iter().zip(&y.states).map(|(p, q)| (p - q).sobolev_norm(s)).collect()
    };
    let gaps = sup_gap(&ta, &tb);
    let divergence = gaps.iter().copied().fold(0.0, f64::max);
    let fine = sup_gap(&tb, &tc).into_iter().fold(0.0, f64::max) * 16.0 / 15.0;
    Ok(TwinReport {
        scheme_a: a.scheme_id(),
        scheme_b: b.scheme_id(),
        s,
        horizon,
        divergence,
        fine_error_estimate: fine,
        ratio: divergence / fine,
        times: ta.times.clone(),
        gaps,
    })
}
