//! Ratio campaigns for the gauge-side bounds: exponential weights, the gauge map,
//! the remainder and the two product estimates.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::EstimateError;
use crate::gauge::{bilinear_b, gauge_exp, gauge_transform, remainder_r};
use crate::solver::Sigma;
use crate::spectral::{japanese, ProductMode, SpectralField, C64};

fn normal(rng: &mut ChaCha8Rng) -> f64 {
    rng.sample(StandardNormal)
}

/// Real random field with `|u(n)| ~ amp <n>^{-s-1}` and a random mean.
pub fn colored_real(n_max: usize, s: f64, amp: f64, rng: &mut ChaCha8Rng) -> SpectralField {
    let mut u = SpectralField::zeros(n_max);
    for k in 1..=n_max as i64 {
        let a = amp * japanese(k).powf(-s - 1.0);
        let c = C64::new(normal(rng), normal(rng)) * (a / std::f64::consts::SQRT_2);
        u.set(k, c);
        u.set(-k, c.conj());
    }
    u.set(0, C64::new(amp * normal(rng) * 0.5, 0.0));
    u.assume_real()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BoundId {
    /// `max_k ||e^{ikF}||_{H^s} / (1 + ||u||^2)`
    Xs,
    /// `max_k ||e^{ikF}||_{H^{s+1}} / (1 + ||u||^4)`
    Xs1,
    /// `max_k ||e^{ikF[u]} - e^{ikF[w]}||_{H^s} / ((1 + ||u||^3 + ||w||^3) ||u - w||)`
    Ys,
    /// same in `H^{s+1}` with fifth powers
    Ys1,
    /// `||v||_{H^s} / ((1 + ||u||^2) ||u||)`
    Gauge,
    /// `||v - v~|| / ((1 + ||u||^4 + ||w||^4) ||u - w||)`
    GaugeLipschitz,
    /// `||R[u]||_{H^s} / ((1 + ||u||^6) ||u||)`
    Remainder,
    /// `||R[u] - R[w]|| / ((1 + ||u||^8 + ||w||^8) ||u - w||)`
    RemainderLipschitz,
    /// `||fg||_{H^{s-1}} / (||f||_{H^s} ||g||_{H^{s-1}})`
    Product,
    /// `||B(f, g)||_{H^{s-1}} / (||f||_{H^s} ||g||_{H^s})`
    Bilinear,
}

impl BoundId {
    pub fn all() -> [BoundId; 10] {
        use BoundId::*;
        [Xs, Xs1, Ys, Ys1, Gauge, GaugeLipschitz, Remainder, RemainderLipschitz, Product, Bilinear]
    }
}

const KS: [i32; 4] = [-3, -1, 1, 3];

/// One ratio for the pair `(u, w)` (`w` is ignored by the one-point bounds).
pub fn bound_ratio(id: BoundId, u: &SpectralField, w: &SpectralField, s: f64, sigma: Sigma) -> Result<f64, EstimateError> {
    let nu = u.sobolev_norm(s);
    let nw = w.sobolev_norm(s);
    let d = (u - w).sobolev_norm(s);
    let max_k = |f: &dyn Fn(i32) -> f64| KS.iter().map(|&k| f(k)).fold(0.0, f64::max);
    let r = match id {
        BoundId::Xs => max_k(&|k| gauge_exp(u, k, sigma).sobolev_norm(s)) / (1.0 + nu.powi(2)),
        BoundId::Xs1 => max_k(&|k| gauge_exp(u, k, sigma).sobolev_norm(s + 1.0)) / (1.0 + nu.powi(4)),
        BoundId::Ys => {
            max_k(&|k| (&gauge_exp(u, k, sigma) - &gauge_exp(w, k, sigma)).sobolev_norm(s))
                / ((1.0 + nu.powi(3) + nw.powi(3)) * d)
        }
        BoundId::Ys1 => {
            max_k(&|k| (&gauge_exp(u, k, sigma) - &gauge_exp(w, k, sigma)).sobolev_norm(s + 1.0))
                / ((1.0 + nu.powi(5) + nw.powi(5)) * d)
        }
        BoundId::Gauge => gauge_transform(u, sigma)?.sobolev_norm(s) / ((1.0 + nu.powi(2)) * nu),
        BoundId::GaugeLipschitz => {
            (&gauge_transform(u, sigma)? - &gauge_transform(w, sigma)?).sobolev_norm(s)
                / ((1.0 + nu.powi(4) + nw.powi(4)) * d)
        }
        BoundId::Remainder => remainder_r(u, sigma)?.total.sobolev_norm(s) / ((1.0 + nu.powi(6)) * nu),
        BoundId::RemainderLipschitz => {
            (&remainder_r(u, sigma)?.total - &remainder_r(w, sigma)?.total).sobolev_norm(s)
                / ((1.0 + nu.powi(8) + nw.powi(8)) * d)
        }
        BoundId::Product => {
            let fg = u.product(w, ProductMode::PaddedTransform)?;
            fg.sobolev_norm(s - 1.0) / (nu * w.sobolev_norm(s - 1.0))
        }
        BoundId::Bilinear => bilinear_b(u, w)?.sobolev_norm(s - 1.0) / (nu * nw),
    };
    Ok(if r.is_nan() { 0.0 } else { r })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BoundReport {
    pub bound: BoundId,
    pub s: f64,
    pub lattice_sizes: Vec<usize>,
    pub trials: usize,
    pub worst_ratio: Vec<f64>,
    pub slope: f64,
}

/// Worst ratio over random pairs for each lattice size. Pairs are either independent
/// or a small perturbation of each other (alternating).
pub fn bound_campaign(
    id: BoundId,
    s: f64,
    sigma: Sigma,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<BoundReport, EstimateError> {
    if !(s > 0.5) {
        return Err(EstimateError::InvalidRegularity(s));
    }
    let mut worst = Vec::new();
    for &n in sizes {
        let mut best = 0.0f64;
        for k in 0..trials {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(((n as u64) << 32) | k as u64);
            let amp = 0.1 + 1.4 * rng.gen::<f64>();
            let u = colored_real(n, s, amp, &mut rng);
            let w = if k % 2 == 0 {
                colored_real(n, s, amp, &mut rng)
            } else {
                let e = colored_real(n, s, 1e-3 * amp, &mut rng);
                &u + &e
            };
            best = best.max(bound_ratio(id, &u, &w, s, sigma)?);
        }
        worst.push(best);
    }
    let xs: Vec<f64> = sizes.iter().map(|n| *n as f64).collect();
    let slope = if sizes.len() >= 2 && worst.iter().all(|r| *r > 0.0) {
        crate::normal_form::scans::log_log_slope(&xs, &worst)
    } else {
        f64::NAN
    };
    Ok(BoundReport {
        bound: id,
        s,
        lattice_sizes: sizes.to_vec(),
        trials,
        worst_ratio: worst,
        slope,
    })
}
