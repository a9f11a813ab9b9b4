//! Twisted profiles and per-time lattice snapshots, brute-force quintilinear
//! sums and the factorized full sums used along trajectories.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::multiplier::{kappa, pattern, phi_tuple, shape, Kind, MultiplierId, Tuple};
use super::NormalFormError;
use crate::gauge::{dt_gauge_exp, gauge_exp_window, gauge_transform, remainder_r, twist};
use crate::solver::{Sigma, Trajectory};
use crate::spectral::{SpectralField, C64};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TwistedState {
    pub t: f64,
    pub omega: SpectralField,
    pub omega_star: SpectralField,
}

impl TwistedState {
    pub fn from_v(v: &SpectralField, t: f64) -> Self {
        let omega = twist(v, t);
        let omega_star = omega.conj();
        Self { t, omega, omega_star }
    }

    pub fn get(&self, kind: Kind, n: i64) -> C64 {
        match kind {
            Kind::Omega => self.omega.get(n),
            Kind::OmegaStar => self.omega_star.get(n),
        }
    }
}

/// Everything the Fourier-side sums read at one time, on the lattice `[-N, N]`.
#[derive(Debug, Clone)]
pub struct LatticeFrame {
    pub state: TwistedState,
    pub sigma: Sigma,
    pub n_max: usize,
    w: [SpectralField; 4],
    dw: [SpectralField; 4],
    /// `e^{itn|n|} F(R[u])`.
    pub r_twisted: SpectralField,
}

fn slot_index(k: i32) -> usize {
    match k {
        -3 => 0,
        -1 => 1,
        1 => 2,
        3 => 3,
        _ => panic!("gauge exponent {k}"),
    }
}

impl LatticeFrame {
    /// Builds the snapshot from the solver state `u` (any window at least `n_lattice`).
    pub fn from_u(u: &SpectralField, t: f64, sigma: Sigma, n_lattice: usize) -> Result<Self, NormalFormError> {
        let v = gauge_transform(u, sigma)?;
        let state = TwistedState::from_v(&v.with_n_max(n_lattice), t);
        let ks = [-3, -1, 1, 3];
        let w = ks.map(|k| gauge_exp_window(u, k, sigma, n_lattice));
        let mut dw = Vec::with_capacity(4);
        for k in ks {
            dw.push(dt_gauge_exp(u, k, sigma, n_lattice)?);
        }
        let r = remainder_r(u, sigma)?.total.with_n_max(n_lattice);
        Ok(Self {
            state,
            sigma,
            n_max: n_lattice,
            w,
            dw: dw.try_into().expect("four weights"),
            r_twisted: twist(&r, t),
        })
    }

    /// Snapshot from explicit pieces (tests and synthetic data).
    pub fn from_parts(
        state: TwistedState,
        sigma: Sigma,
        w: [SpectralField; 4],
        dw: [SpectralField; 4],
        r_twisted: SpectralField,
    ) -> Self {
        let n_max = state.omega.n_max();
        Self {
            state,
            sigma,
            n_max,
            w,
            dw,
            r_twisted,
        }
    }

    pub fn t(&self) -> f64 {
        self.state.t
    }

    /// `F(e^{i k sigma F})(n)`.
    pub fn w(&self, k: i32, n: i64) -> C64 {
        self.w[slot_index(k)].get(n)
    }

    pub fn w_field(&self, k: i32) -> &SpectralField {
        &self.w[slot_index(k)]
    }

    pub fn dw(&self, k: i32, n: i64) -> C64 {
        self.dw[slot_index(k)].get(n)
    }

    pub fn leaf(&self, kind: Kind, n: i64) -> C64 {
        self.state.get(kind, n)
    }
}

/// Snapshots at every `stride`-th sample of `traj` in `[0, t_end]`.
pub fn frames_from_trajectory(
    traj: &Trajectory,
    n_lattice: usize,
    t_end: f64,
    stride: usize,
) -> Result<Vec<LatticeFrame>, NormalFormError> {
    let idx: Vec<usize> = (0..traj.len())
        .step_by(stride.max(1))
        .take_while(|&k| traj.times[k] <= t_end + 1e-12)
        .collect();
    idx.par_iter()
        .map(|&k| LatticeFrame::from_u(&traj.states[k], traj.times[k], traj.sigma, n_lattice))
        .collect()
}

/// `Q(weight; slots of Q_i)(n)` by direct summation over `n_1..n_4` with `n_5` closed,
/// in the fixed order `n_1 < n_2 < n_3 < n_4` (each ascending).
/// The weight receives `(n, (n_1..n_5))` and is used as given (no phase is added).
pub fn eval_q(
    id: MultiplierId,
    weight: &(dyn Fn(i64, &Tuple) -> C64 + Sync),
    frame: &LatticeFrame,
) -> SpectralField {
    let n = frame.n_max as i64;
    let kind = if id.starred { Kind::OmegaStar } else { Kind::Omega };
    let p = pattern(id.i, kind);
    let coeffs: Vec<C64> = (-n..=n)
        .into_par_iter()
        .map(|out| {
            let mut acc = C64::new(0.0, 0.0);
            for n1 in -n..=n {
                let a1 = frame.leaf(p.odd[0], n1);
                for n2 in -n..=n {
                    let a2 = a1 * frame.w(p.even[0], n2);
                    for n3 in -n..=n {
                        let a3 = a2 * frame.leaf(p.odd[1], n3);
                        for n4 in -n..=n {
                            let n5 = out - n1 - n2 - n3 - n4;
                            if n5.abs() > n {
                                continue;
                            }
                            let t = [n1, n2, n3, n4, n5];
                            let wgt = weight(out, &t);
                            if wgt == C64::new(0.0, 0.0) {
                                continue;
                            }
                            acc += wgt * a3 * frame.w(p.even[1], n4) * frame.leaf(p.odd[2], n5);
                        }
                    }
                }
            }
            acc
        })
        .collect();
    SpectralField::from_coeffs(frame.n_max, coeffs, false).expect("window length")
}

/// `e^{it Phi}` as a weight factor.
pub fn phase(t: f64, n: i64, tuple: &Tuple) -> C64 {
    C64::from_polar(1.0, t * phi_tuple(n, tuple) as f64)
}

/// Dense sequence on `[lo, lo + len)`.
#[derive(Debug, Clone)]
struct Seq {
    lo: i64,
    v: Vec<C64>,
}

impl Seq {
    fn from_fn(lo: i64, hi: i64, f: impl Fn(i64) -> C64) -> Seq {
        Seq {
            lo,
            v: (lo..=hi).map(f).collect(),
        }
    }

    fn hi(&self) -> i64 {
        self.lo + self.v.len() as i64 - 1
    }

    fn get(&self, n: i64) -> C64 {
        let k = n - self.lo;
        if k < 0 || k >= self.v.len() as i64 {
            C64::new(0.0, 0.0)
        } else {
            self.v[k as usize]
        }
    }

    fn conv(&self, o: &Seq) -> Seq {
        let lo = self.lo + o.lo;
        let mut v = vec![C64::new(0.0, 0.0); self.v.len() + o.v.len() - 1];
        for (i, a) in self.v.iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            for (j, b) in o.v.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        Seq { lo, v }
    }

    fn map(&self, f: impl Fn(i64, C64) -> C64) -> Seq {
        Seq {
            lo: self.lo,
            v: self
                .v
                .iter()
                .enumerate()
                .map(|(k, z)| f(self.lo + k as i64, *z))
                .collect(),
        }
    }
}

/// `Q_i(e^{it Phi} m_i)` over the whole lattice (multiplier without the factor `i`),
/// for an equation of kind `kind` (`Q_i^*` with `m_i^*` for `OmegaStar`).
///
/// The phase factorizes, `e^{it Phi} prod omega_j = e^{itn|n|} prod (untwisted slots)`, and
/// every multiplier depends on `n` and partial sums only, so the sum reduces to convolutions.
pub fn full_q(i: u8, kind: Kind, frame: &LatticeFrame) -> SpectralField {
    let n = frame.n_max as i64;
    let t = frame.t();
    let p = pattern(i, kind);
    let untwist = |k: Kind| {
        Seq::from_fn(-n, n, |m| {
            frame.leaf(k, m) * C64::from_polar(1.0, -t * (m * m.abs()) as f64)
        })
    };
    let a1 = untwist(p.odd[0]);
    let a3 = untwist(p.odd[1]);
    let a5 = untwist(p.odd[2]);
    let w2 = Seq::from_fn(-n, n, |m| frame.w(p.even[0], m));
    let w4 = Seq::from_fn(-n, n, |m| frame.w(p.even[1], m));
    let sgn = if kind == Kind::Omega { 1 } else { -1 };
    // shapes are evaluated at (sgn n, sgn n_vec); partial sums flip with the same sign
    let kap = kappa(i, frame.sigma);
    let out: Vec<C64> = match i {
        1..=5 => {
            let x = a1.conv(&w2).conv(&a3);
            let y = w4.conv(&a5);
            (-n..=n)
                .map(|m| {
                    let mut acc = C64::new(0.0, 0.0);
                    for q in y.lo..=y.hi() {
                        let g = shape_np(i, sgn * m, sgn * q);
                        if g != 0.0 {
                            acc += x.get(m - q) * y.get(q) * g;
                        }
                    }
                    acc * kap
                })
                .collect()
        }
        _ => {
            let pos = |q: i64| if i == 6 { sgn * q > 0 } else { sgn * q < 0 };
            let left = w2.conv(&a3).map(|q, z| if pos(q) { z * (sgn * q) as f64 } else { C64::new(0.0, 0.0) });
            let right = w4.conv(&a5).map(|q, z| if pos(q) { z * (sgn * q) as f64 } else { C64::new(0.0, 0.0) });
            let c = left
                .conv(&right)
                .map(|r, z| if r == 0 { C64::new(0.0, 0.0) } else { z / (sgn * r) as f64 });
            let full = a1.conv(&c);
            (-n..=n).map(|m| full.get(m) * kap).collect()
        }
    };
    let out: Vec<C64> = out
        .into_iter()
        .zip(-n..=n)
        .map(|(z, m)| z * C64::from_polar(1.0, t * (m * m.abs()) as f64))
        .collect();
    SpectralField::from_coeffs(frame.n_max, out, false).expect("window length")
}

/// Shape of `m_1..m_5` as a function of `n` and `p = n_45`.
fn shape_np(i: u8, n: i64, p: i64) -> f64 {
    // shape() reads n_45 from slots 4, 5 and n_123 from slots 1..3
    let t: Tuple = [n - p, 0, 0, 0, p];
    shape(i, n, &t)
}

/// Right side of the lattice equation for `omega`: `i sum_i Q_i(e^{it Phi} m_i) + e^{itn|n|} F(R[u])`.
pub fn lattice_rhs(frame: &LatticeFrame) -> SpectralField {
    let mut acc = SpectralField::zeros(frame.n_max);
    for i in 1..=7u8 {
        acc += &full_q(i, Kind::Omega, frame);
    }
    let mut out = acc.scale(C64::new(0.0, 1.0));
    out += &frame.r_twisted;
    out
}
