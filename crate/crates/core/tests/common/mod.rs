#![allow(dead_code)]

use mbolab::spectral::{japanese, SpectralField, C64};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Complex field with i.i.d. coefficients in the unit square.
pub fn random_complex(n_max: usize, r: &mut ChaCha8Rng) -> SpectralField {
    let c: Vec<C64> = (0..2 * n_max + 1)
        .map(|_| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)))
        .collect();
    SpectralField::from_coeffs(n_max, c, false).expect("window length")
}

/// Real field with coefficients decaying like `<n>^{-decay}`.
pub fn random_real(n_max: usize, decay: f64, amp: f64, r: &mut ChaCha8Rng) -> SpectralField {
    let c: Vec<C64> = (-(n_max as i64)..=n_max as i64)
        .map(|n| C64::new(r.gen_range(-1.0..1.0), r.gen_range(-1.0..1.0)) * (amp * japanese(n).powf(-decay)))
        .collect();
    SpectralField::from_fn(n_max, true, |n| c[(n + n_max as i64) as usize])
}

pub fn max_diff(a: &SpectralField, b: &SpectralField) -> f64 {
    assert_eq!(a.n_max(), b.n_max());
    a.coeffs().iter().zip(b.coeffs()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `a cos x + b cos 2x`, the standard smooth datum.
pub fn two_mode(n_max: usize, a: f64, b: f64) -> SpectralField {
    &SpectralField::trig(n_max, 1, a, 0.0) + &SpectralField::trig(n_max, 2, b, 0.0)
}
