//! Gauge transform `v = e^{-i sigma F[u]} (P_+ u + nu/2)`, `F[u] = d^{-1} P_{!=c}(u^2)`,
//! and three independent evaluations of `(d_t + H d^2) v` along mBO' flows.
//!
//! Internal products run on a work window twice the input window and the
//! results are truncated back, so truncation of intermediate products does not
//! leak into the compared quantities.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::solver::{linear_flow, rhs_mbo_prime, Sigma, Trajectory};
use crate::spectral::{grid_product, grid_size, Projection, SpectralError, SpectralField, C64, I};

#[derive(Debug, Error)]
pub enum GaugeError {
    #[error("gauge transform needs a real field")]
    NotReal,
    #[error("evaluation routes disagree: relative gap {gap:e} > {tol:e}")]
    InconsistentPair { gap: f64, tol: f64 },
    #[error("degenerate probe: {0}")]
    Degenerate(String),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// `F[u] = d^{-1} P_{!=c}(u^2)` on the full window `2N` (no truncation).
pub fn gauge_f(u: &SpectralField) -> SpectralField {
    u.product_full(u).inv_dx_nonmean()
}

/// Fourier coefficients of `e^{i k sigma F[u]}` on `[-n_out, n_out]`.
/// The exponential is taken pointwise on a grid 4x oversampled relative to the output.
pub fn gauge_exp_window(u: &SpectralField, k: i32, sigma: Sigma, n_out: usize) -> SpectralField {
    let f = gauge_f(u);
    let m = grid_size((4 * (2 * n_out + 1)).max(2 * f.n_max() + 1));
    let a = k as f64 * sigma.value();
    let vals: Vec<C64> = f
        .to_grid(m)
        .into_iter()
        .map(|z| C64::from_polar(1.0, a * z.re))
        .collect();
    SpectralField::from_grid(&vals, n_out)
}

pub fn gauge_exp(u: &SpectralField, k: i32, sigma: Sigma) -> SpectralField {
    gauge_exp_window(u, k, sigma, u.n_max())
}

/// The weights `e^{i k sigma F}` for `k = -3, -1, 1, 3` on one window.
#[derive(Debug, Clone)]
pub struct GaugeWeights {
    pub sigma: Sigma,
    pub n_max: usize,
    pub f: SpectralField,
    exps: [SpectralField; 4],
}

impl GaugeWeights {
    pub fn new(u: &SpectralField, sigma: Sigma, n_out: usize) -> Self {
        let f = gauge_f(u);
        let m = grid_size((4 * (2 * n_out + 1)).max(2 * f.n_max() + 1));
        let fg = f.to_real_grid(m);
        let exps = [-3, -1, 1, 3].map(|k| {
            let a = k as f64 * sigma.value();
            let vals: Vec<C64> = fg.iter().map(|x| C64::from_polar(1.0, a * x)).collect();
            SpectralField::from_grid(&vals, n_out)
        });
        Self { sigma, n_max: n_out, f, exps }
    }

    /// `e^{i k sigma F}`, `k` in `{-3, -1, 1, 3}`.
    pub fn get(&self, k: i32) -> &SpectralField {
        let idx = match k {
            -3 => 0,
            -1 => 1,
            1 => 2,
            3 => 3,
            _ => panic!("weight exponent {k} not tabulated"),
        };
        &self.exps[idx]
    }
}

fn check_real(u: &SpectralField) -> Result<(), GaugeError> {
    if u.is_real() {
        Ok(())
    } else {
        Err(GaugeError::NotReal)
    }
}

fn work_window(n: usize) -> usize {
    2 * n
}

/// `v = P_N[e^{-i sigma F} (P_+ u + nu/2)]`.
pub fn gauge_transform(u: &SpectralField, sigma: Sigma) -> Result<SpectralField, GaugeError> {
    check_real(u)?;
    Ok(gauge_transform_window(u, sigma, u.n_max()))
}

pub fn gauge_transform_window(u: &SpectralField, sigma: Sigma, n_out: usize) -> SpectralField {
    let f = gauge_f(u);
    let g = plus_half_mean(u);
    let m = grid_size((4 * (2 * n_out + 1)).max(2 * f.n_max() + 2 * u.n_max() + 1));
    let a = -sigma.value();
    let vals: Vec<C64> = f
        .to_grid(m)
        .into_iter()
        .zip(g.to_grid(m))
        .map(|(z, w)| C64::from_polar(1.0, a * z.re) * w)
        .collect();
    SpectralField::from_grid(&vals, n_out)
}

/// `P_+ u + nu/2`.
pub fn plus_half_mean(u: &SpectralField) -> SpectralField {
    let mut g = u.project(Projection::Plus);
    g.set(0, u.mean() * 0.5);
    g
}

/// `B(f, g) = d^{-1}((P_+ f_x)(P_+ g_x) - (P_- f_x)(P_- g_x))` on the full window.
/// The zero mode of the bracket vanishes identically; it is checked, not projected away.
pub fn bilinear_b(f: &SpectralField, g: &SpectralField) -> Result<SpectralField, GaugeError> {
    let fx = f.dx();
    let gx = g.dx();
    let plus = fx.project(Projection::Plus).product_full(&gx.project(Projection::Plus));
    let minus = fx.project(Projection::Minus).product_full(&gx.project(Projection::Minus));
    Ok(plus.sub_field(&minus)?.inv_dx()?)
}

/// Shared quantities of one field on the work window.
struct Ctx {
    s: f64,
    nw: usize,
    u: SpectralField,
    f: SpectralField,
    q: SpectralField,
    e: GaugeWeights,
}

impl Ctx {
    fn new(u: &SpectralField, sigma: Sigma) -> Self {
        let nw = work_window(u.n_max());
        let uw = u.with_n_max(nw);
        let q = u.product_full(u).project(Projection::NonMean).with_n_max(nw);
        Self {
            s: sigma.value(),
            nw,
            f: plus_half_mean(&uw),
            e: GaugeWeights::new(u, sigma, nw),
            u: uw,
            q,
        }
    }

    fn mul(&self, fs: &[&SpectralField]) -> SpectralField {
        grid_product(fs, self.nw)
    }

    fn em(&self) -> &SpectralField {
        self.e.get(-1)
    }

    fn constant(&self, c: C64) -> SpectralField {
        let mut z = SpectralField::zeros(self.nw);
        z.set(0, c);
        z
    }
}

/// The eight summands of the remainder `R[u]`, in display order.
#[derive(Debug, Clone)]
pub struct RemainderTerms {
    pub terms: Vec<SpectralField>,
    pub total: SpectralField,
}

pub fn remainder_r(u: &SpectralField, sigma: Sigma) -> Result<RemainderTerms, GaugeError> {
    check_real(u)?;
    let c = Ctx::new(u, sigma);
    let terms = remainder_terms(&c);
    let n = u.n_max();
    let terms: Vec<SpectralField> = terms.into_iter().map(|t| t.with_n_max(n)).collect();
    let mut total = SpectralField::zeros(n);
    for t in &terms {
        total += t;
    }
    Ok(RemainderTerms { terms, total })
}

fn remainder_terms(c: &Ctx) -> Vec<SpectralField> {
    let s = c.s;
    let (u, f, q, e) = (&c.u, &c.f, &c.q, c.em());
    let ux = u.dx();
    let ihux = u.dx().hilbert().scale(I);
    let q2 = c.mul(&[q, q]);
    let pc_u2 = c.u.coeffs().iter().map(|z| z.norm_sqr()).sum::<f64>();

    let r1 = c.mul(&[e, &q2.project(Projection::NonMean), f]).scale(-I);
    let r2 = -&c.mul(&[e, &q2, f]).hilbert();
    let s3 = c.mul(&[u, &ihux]).mean();
    let r3 = c.mul(&[e, f]).scale(s3 * (-2.0 * s));
    let r4 = c.constant(c.mul(&[e, u, f, &ihux]).mean() * (2.0 * s));
    let qux = c.mul(&[q, &ux]);
    let r5a = c
        .mul(&[e, &qux.project(Projection::Plus)])
        .project(Projection::Plus);
    let r5a = &c.mul(&[e, &qux.project(Projection::Plus)]) - &r5a;
    let r5b = c
        .mul(&[e, &(&qux - &qux.project(Projection::Plus))])
        .project(Projection::Plus);
    let r5 = &(&r5a - &r5b) * (2.0 * s);
    let r6 = &(&c.mul(&[e, &ux.project(Projection::Minus)]).project(Projection::Plus)
        + &c.mul(&[e, &ux.project(Projection::Plus)]).project(Projection::Minus))
        * (-2.0 * s * pc_u2);
    let uxx_plus = u.dxx().project(Projection::Plus);
    let r7 = c.constant(c.mul(&[e, &uxx_plus]).mean() * I);
    let r8 = &c
        .mul(&[&e.project(Projection::Minus).inv_dx_nonmean(), &uxx_plus])
        .project(Projection::Minus)
        * (-2.0 * s * pc_u2);
    vec![r1, r2, r3, r4, r5, r6, r7, r8]
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RhsForm {
    /// The right side written in `v`, `v-bar` and the weights, plus `R[u]`.
    Substituted,
    /// The same quantity written in `u` and `e^{-i sigma F}` before substitution.
    PreSubstitution,
    /// Direct chain rule on the definition of `v` with the Galerkin `u_t`.
    ChainRule,
}

/// `(d_t + H d^2) v` along the mBO' flow through `u`, truncated to the window of `u`.
pub fn rhs_v(u: &SpectralField, sigma: Sigma, form: RhsForm) -> Result<SpectralField, GaugeError> {
    check_real(u)?;
    let c = Ctx::new(u, sigma);
    let out = match form {
        RhsForm::Substituted => {
            let mut acc = substituted_terms(&c)?;
            for t in remainder_terms(&c) {
                acc += &t;
            }
            acc
        }
        RhsForm::PreSubstitution => {
            let mut acc = presub_terms(&c)?;
            for t in remainder_terms(&c) {
                acc += &t;
            }
            acc
        }
        RhsForm::ChainRule => chain_rule(&c, u, sigma),
    };
    Ok(out.with_n_max(u.n_max()))
}

/// Evaluates two routes and fails if they disagree beyond `tol` (relative, `l^2`).
pub fn rhs_v_checked(
    u: &SpectralField,
    sigma: Sigma,
    a: RhsForm,
    b: RhsForm,
    tol: f64,
) -> Result<SpectralField, GaugeError> {
    let x = rhs_v(u, sigma, a)?;
    let y = rhs_v(u, sigma, b)?;
    let gap = (&x - &y).l2_coeff_norm() / x.l2_coeff_norm().max(f64::MIN_POSITIVE);
    if gap > tol {
        return Err(GaugeError::InconsistentPair { gap, tol });
    }
    Ok(x)
}

fn presub_terms(c: &Ctx) -> Result<SpectralField, GaugeError> {
    let s = c.s;
    let (u, f, e) = (&c.u, &c.f, c.em());
    let uxm = u.dx().project(Projection::Minus);
    let uxp = u.dx().project(Projection::Plus);
    let euf = c.mul(&[e, u, f]);
    let eu2 = c.mul(&[e, u, u]);
    let a1 = &c.mul(&[&euf, &uxm]).project(Projection::Plus) * (-4.0 * s);
    let a2 = &c.mul(&[&euf, &uxp]).project(Projection::Minus) * (4.0 * s);
    let a3 = &c.mul(&[&eu2, &uxm]).project(Projection::Plus) * (2.0 * s);
    let a4 = &c
        .mul(&[&eu2.project(Projection::Minus).inv_dx_nonmean(), &uxp])
        .project(Projection::Minus)
        .dx()
        * (2.0 * s);
    let b = bilinear_b(u, u)?.with_n_max(c.nw);
    let a5 = &c.mul(&[e, f, &b]) * (-2.0 * s);
    let mut acc = a1;
    for t in [a2, a3, a4, a5] {
        acc += &t;
    }
    Ok(acc)
}

fn substituted_terms(c: &Ctx) -> Result<SpectralField, GaugeError> {
    let s = c.s;
    let v = c.mul(&[c.em(), &c.f]);
    let vb = v.conj();
    let (e1, em1, em3) = (c.e.get(1), c.e.get(-1), c.e.get(-3));
    let minus_part = c.mul(&[em1, &vb]).project(Projection::Minus).dx();
    let plus_part = c.mul(&[e1, &v]).project(Projection::Plus).dx();
    let e1v2 = c.mul(&[e1, &v, &v]);
    let em3vb2 = c.mul(&[em3, &vb, &vb]);
    let em1vvb = c.mul(&[em1, &v, &vb]);
    let v1 = &c.mul(&[&e1v2, &minus_part]).project(Projection::Plus) * (-2.0 * s);
    let v2 = &c.mul(&[&em3vb2, &minus_part]).project(Projection::Plus) * (2.0 * s);
    let v3 = &c.mul(&[&e1v2, &plus_part]).project(Projection::Minus) * (4.0 * s);
    let v4 = &c.mul(&[&em1vvb, &plus_part]).project(Projection::Minus) * (4.0 * s);
    let mut inner = e1v2.clone();
    inner += &(&em1vvb * 2.0);
    inner += &em3vb2;
    let v5 = &c
        .mul(&[&inner.project(Projection::Minus).inv_dx_nonmean(), &plus_part])
        .project(Projection::Minus)
        .dx()
        * (2.0 * s);
    let pp = c.mul(&[&plus_part, &plus_part]).inv_dx()?;
    let mm = c.mul(&[&minus_part, &minus_part]).inv_dx()?;
    let v6 = &c.mul(&[&v, &pp]) * (-2.0 * s);
    let v7 = &c.mul(&[&v, &mm]) * (2.0 * s);
    let mut acc = v1;
    for t in [v2, v3, v4, v5, v6, v7] {
        acc += &t;
    }
    Ok(acc)
}

/// `e^{-i sigma F}(-i sigma F_t (P_+u + nu/2) + P_+ u_t) + H v_xx` with
/// `F_t = d^{-1} P_{!=c}(2 u u_t)` and the Galerkin `u_t`.
fn chain_rule(c: &Ctx, u: &SpectralField, sigma: Sigma) -> SpectralField {
    let ut = rhs_mbo_prime(u, sigma).with_n_max(c.nw);
    let ft = (&c.mul(&[&c.u, &ut]) * 2.0).inv_dx_nonmean();
    let lhs = c.mul(&[&ft, &c.f]).scale(C64::new(0.0, -c.s));
    let mut inner = lhs;
    inner += &ut.project(Projection::Plus);
    let dv = c.mul(&[c.em(), &inner]);
    let v = gauge_transform_window(u, sigma, c.nw);
    let hvxx = v.dxx().hilbert();
    &dv + &hvxx
}

/// `d_t F` from the flow, in closed form:
/// `-2 P_{!=c}(u H u_x) - 2i B(u, u) + sigma P_{!=c}[(P_{!=c}(u^2))^2]`, on window `n_out`.
pub fn dt_gauge_f(u: &SpectralField, sigma: Sigma, n_out: usize) -> Result<SpectralField, GaugeError> {
    let nw = n_out.max(2 * u.n_max());
    let q = u.product_full(u).project(Projection::NonMean).with_n_max(nw);
    let uh = u.product_full(&u.dx().hilbert()).with_n_max(nw).project(Projection::NonMean);
    let b = bilinear_b(u, u)?.with_n_max(nw);
    let q2 = q.product_full(&q).with_n_max(nw).project(Projection::NonMean);
    let mut out = &uh * -2.0;
    out += &b.scale(C64::new(0.0, -2.0));
    out += &(&q2 * sigma.value());
    Ok(out.with_n_max(n_out))
}

/// `d_t e^{i k sigma F} = i k sigma F_t e^{i k sigma F}` on window `n_out`.
pub fn dt_gauge_exp(
    u: &SpectralField,
    k: i32,
    sigma: Sigma,
    n_out: usize,
) -> Result<SpectralField, GaugeError> {
    let nw = 2 * n_out.max(u.n_max());
    let ft = dt_gauge_f(u, sigma, nw)?;
    let w = gauge_exp_window(u, k, sigma, nw);
    let prod = grid_product(&[&ft, &w], n_out);
    Ok(prod.scale(C64::new(0.0, k as f64 * sigma.value())))
}

/// Twisted profile `omega = e^{i t n|n|} v_hat`.
pub fn twist(v: &SpectralField, t: f64) -> SpectralField {
    linear_flow(v, -t)
}

/// Central-difference `(d_t + H d^2) v` at sample `k` with stride `stride`, using the
/// twisted profile: `(d_t + H d^2) v = e^{-itn|n|} d_t omega`.
pub fn central_difference_residual_target(
    traj: &Trajectory,
    k: usize,
    stride: usize,
) -> Result<SpectralField, GaugeError> {
    if k < stride || k + stride >= traj.len() {
        return Err(GaugeError::Degenerate("central difference leaves the trajectory".into()));
    }
    let sigma = traj.sigma;
    let (tm, tp, t0) = (traj.times[k - stride], traj.times[k + stride], traj.times[k]);
    let wm = twist(&gauge_transform(&traj.states[k - stride], sigma)?, tm);
    let wp = twist(&gauge_transform(&traj.states[k + stride], sigma)?, tp);
    let dw = &(&wp - &wm) * (1.0 / (tp - tm));
    Ok(linear_flow(&dw, t0))
}

/// `||(d_t + H d^2) v - rhs_v||_{H^{s'}}` at one sample, with the central difference of stride `stride`.
pub fn gauge_residual(
    traj: &Trajectory,
    k: usize,
    stride: usize,
    form: RhsForm,
    s_prime: f64,
) -> Result<f64, GaugeError> {
    let target = central_difference_residual_target(traj, k, stride)?;
    let r = rhs_v(&traj.states[k], traj.sigma, form)?;
    Ok((&target - &r).sobolev_norm(s_prime))
}

/// Central-difference check of `d_t e^{i k sigma F}` against the closed form.
pub fn weight_derivative_residual(
    traj: &Trajectory,
    k: usize,
    stride: usize,
    kexp: i32,
    s_prime: f64,
) -> Result<f64, GaugeError> {
    if k < stride || k + stride >= traj.len() {
        return Err(GaugeError::Degenerate("central difference leaves the trajectory".into()));
    }
    let sigma = traj.sigma;
    let n = traj.states[k].n_max();
    let wm = gauge_exp(&traj.states[k - stride], kexp, sigma);
    let wp = gauge_exp(&traj.states[k + stride], kexp, sigma);
    let h = traj.times[k + stride] - traj.times[k - stride];
    let target = &(&wp - &wm) * (1.0 / h);
    let closed = dt_gauge_exp(&traj.states[k], kexp, sigma, n)?;
    Ok((&target - &closed).sobolev_norm(s_prime))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LipschitzReport {
    pub s: f64,
    pub horizons: Vec<f64>,
    /// `sup_{t<=T} ||u - u~||_{H^s} / (||u(0) - u~(0)||_{H^s} + sup_{t<=T} ||v - v~||_{H^s})`.
    pub ratios: Vec<f64>,
}

/// Two trajectories sampled on the same times.
pub fn lipschitz_probe(
    a: &Trajectory,
    b: &Trajectory,
    s: f64,
    horizons: &[f64],
) -> Result<LipschitzReport, GaugeError> {
    if a.len() != b.len() || a.times.iter().zip(&b.times).any(|(x, y)| (x - y).abs() > 1e-12) {
        return Err(GaugeError::Degenerate("trajectories are not co-sampled".into()));
    }
    let du: Vec<f64> = a
        .states
        .iter()
        .zip(&b.states)
        .map(|(x, y)| (x - y).sobolev_norm(s))
        .collect();
    let mut dv = Vec::with_capacity(a.len());
    for (x, y) in a.states.iter().zip(&b.states) {
        let vx = gauge_transform(x, a.sigma)?;
        let vy = gauge_transform(y, b.sigma)?;
        dv.push((&vx - &vy).sobolev_norm(s));
    }
    let mut ratios = Vec::new();
    for &tt in horizons {
        let kmax = a.times.iter().take_while(|t| **t <= tt + 1e-12).count();
        let sup_u = du[..kmax].iter().copied().fold(0.0, f64::max);
        let sup_v = dv[..kmax].iter().copied().fold(0.0, f64::max);
        let den = du[0] + sup_v;
        if den == 0.0 {
            return Err(GaugeError::Degenerate("identical data".into()));
        }
        ratios.push(sup_u / den);
    }
    Ok(LipschitzReport {
        s,
        horizons: horizons.to_vec(),
        ratios,
    })
}
