//! Truncated Fourier fields on the circle and the linear and bilinear operators on them.
//!
//! A field on the window `[-N, N]` stores `2N + 1` coefficients, index `n + N`.
//! The physical function is `f(x) = sum_n c_n e^{inx}`.

use std::cell::RefCell;
use std::collections::HashMap;
use std::ops::{Add, AddAssign, Mul, Neg, Sub, SubAssign};
use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub type C64 = Complex64;

pub const I: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("field windows differ: {0} vs {1}")]
    SizeMismatch(usize, usize),
    #[error("zero Fourier mode is {0:e}, expected 0")]
    NonzeroMean(f64),
    #[error("coefficient vector has length {got}, expected {expected}")]
    BadLength { got: usize, expected: usize },
    #[error("coefficients violate the reality condition by {0:e}")]
    NotReal(f64),
    #[error("non-finite Sobolev index")]
    BadIndex,
    #[error("malformed field json: {0}")]
    Json(String),
}

/// Sobolev regularity index. Any finite real.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Serialize, Deserialize)]
pub struct SobolevIndex(f64);

impl SobolevIndex {
    pub fn new(s: f64) -> Result<Self, SpectralError> {
        if s.is_finite() {
            Ok(Self(s))
        } else {
            Err(SpectralError::BadIndex)
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

impl From<f64> for SobolevIndex {
    fn from(s: f64) -> Self {
        assert!(s.is_finite(), "non-finite Sobolev index");
        Self(s)
    }
}

/// `<n> = (1 + n^2)^{1/2}`.
pub fn japanese(n: i64) -> f64 {
    (1.0 + (n as f64) * (n as f64)).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Projection {
    Plus,
    Minus,
    Mean,
    NonMean,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProductMode {
    /// Direct truncated convolution, O(N^2).
    ExactConvolution,
    /// Pointwise product on a zero-padded grid of size > 3N, then truncation.
    #[default]
    PaddedTransform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    n_max: usize,
    coeffs: Vec<C64>,
    is_real: bool,
}

const REAL_TOL: f64 = 1e-10;

impl SpectralField {
    pub fn zeros(n_max: usize) -> Self {
        Self {
            n_max,
            coeffs: vec![C64::new(0.0, 0.0); 2 * n_max + 1],
            is_real: true,
        }
    }

    /// Builds a field from coefficients ordered `n = -N..=N`.
    /// With `is_real`, the reality condition is checked and then enforced exactly.
    pub fn from_coeffs(n_max: usize, coeffs: Vec<C64>, is_real: bool) -> Result<Self, SpectralError> {
        if coeffs.len() != 2 * n_max + 1 {
            return Err(SpectralError::BadLength {
                got: coeffs.len(),
                expected: 2 * n_max + 1,
            });
        }
        let mut f = Self { n_max, coeffs, is_real: false };
        if is_real {
            let scale = f.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
            let defect = f.reality_defect();
            if defect > REAL_TOL * scale {
                return Err(SpectralError::NotReal(defect));
            }
            f.symmetrize();
        }
        Ok(f)
    }

    pub fn from_fn(n_max: usize, is_real: bool, g: impl Fn(i64) -> C64) -> Self {
        let n = n_max as i64;
        let coeffs = (-n..=n).map(&g).collect();
        let mut f = Self { n_max, coeffs, is_real: false };
        if is_real {
            f.symmetrize();
        }
        f
    }

    pub fn constant(n_max: usize, c: f64) -> Self {
        let mut f = Self::zeros(n_max);
        f.coeffs[n_max] = C64::new(c, 0.0);
        f
    }

    /// `a cos(kx) + b sin(kx)` as a real field.
    pub fn trig(n_max: usize, k: usize, a: f64, b: f64) -> Self {
        let mut f = Self::zeros(n_max);
        if k == 0 {
            f.coeffs[n_max] = C64::new(a, 0.0);
            return f;
        }
        assert!(k <= n_max, "mode {k} outside window {n_max}");
        f.coeffs[n_max + k] = C64::new(a / 2.0, -b / 2.0);
        f.coeffs[n_max - k] = C64::new(a / 2.0, b / 2.0);
        f
    }

    pub fn n_max(&self) -> usize {
        self.n_max
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn is_real(&self) -> bool {
        self.is_real
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [C64] {
        self.is_real = false;
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<C64> {
        self.coeffs
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> {
        let n = self.n_max as i64;
        -n..=n
    }

    /// Coefficient of mode `n`, zero outside the window.
    pub fn get(&self, n: i64) -> C64 {
        if n.unsigned_abs() as usize > self.n_max {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(n + self.n_max as i64) as usize]
        }
    }

    pub fn set(&mut self, n: i64, c: C64) {
        let idx = (n + self.n_max as i64) as usize;
        self.coeffs[idx] = c;
        self.is_real = false;
    }

    pub fn mean(&self) -> C64 {
        self.coeffs[self.n_max]
    }

    pub fn reality_defect(&self) -> f64 {
        let n = self.n_max;
        (0..=n)
            .map(|k| (self.coeffs[n + k] - self.coeffs[n - k].conj()).norm())
            .fold(0.0, f64::max)
    }

    fn symmetrize(&mut self) {
        let n = self.n_max;
        for k in 0..=n {
            let a = 0.5 * (self.coeffs[n + k] + self.coeffs[n - k].conj());
            self.coeffs[n + k] = a;
            self.coeffs[n - k] = a.conj();
        }
        self.is_real = true;
    }

    /// Marks the field real if it satisfies the reality condition to rounding.
    pub fn assume_real(mut self) -> Self {
        self.symmetrize();
        self
    }

    /// Truncates or zero-pads to a new window.
    pub fn with_n_max(&self, n_new: usize) -> Self {
        let mut f = Self::zeros(n_new);
        let m = n_new.min(self.n_max) as i64;
        for n in -m..=m {
            f.coeffs[(n + n_new as i64) as usize] = self.get(n);
        }
        f.is_real = self.is_real;
        f
    }

    pub fn map_modes(&self, is_real: bool, g: impl Fn(i64, C64) -> C64) -> Self {
        let n0 = self.n_max as i64;
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(k, c)| g(k as i64 - n0, *c))
            .collect();
        Self {
            n_max: self.n_max,
            coeffs,
            is_real,
        }
    }

    /// Coefficients of the complex-conjugate function: `n -> conj(c_{-n})`.
    pub fn conj(&self) -> Self {
        let coeffs = self.coeffs.iter().rev().map(|c| c.conj()).collect();
        Self {
            n_max: self.n_max,
            coeffs,
            is_real: self.is_real,
        }
    }

    /// `x -> -x`: `n -> c_{-n}`.
    pub fn reflect(&self) -> Self {
        let coeffs = self.coeffs.iter().rev().copied().collect();
        Self {
            n_max: self.n_max,
            coeffs,
            is_real: self.is_real,
        }
    }

    pub fn scale(&self, a: C64) -> Self {
        let real = self.is_real && a.im == 0.0;
        Self {
            n_max: self.n_max,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
            is_real: real,
        }
    }

    pub fn scale_re(&self, a: f64) -> Self {
        Self {
            n_max: self.n_max,
            coeffs: self.coeffs.iter().map(|c| c * a).collect(),
            is_real: self.is_real,
        }
    }

    pub fn add_field(&self, g: &Self) -> Result<Self, SpectralError> {
        self.check_same(g)?;
        Ok(self.zip(g, |a, b| a + b))
    }

    pub fn sub_field(&self, g: &Self) -> Result<Self, SpectralError> {
        self.check_same(g)?;
        Ok(self.zip(g, |a, b| a - b))
    }

    /// Adds `g` after zero-padding both to the larger window.
    pub fn add_padded(&self, g: &Self) -> Self {
        let n = self.n_max.max(g.n_max);
        self.with_n_max(n).zip(&g.with_n_max(n), |a, b| a + b)
    }

    fn zip(&self, g: &Self, op: impl Fn(C64, C64) -> C64) -> Self {
        Self {
            n_max: self.n_max,
            coeffs: self.coeffs.iter().zip(&g.coeffs).map(|(a, b)| op(*a, *b)).collect(),
            is_real: self.is_real && g.is_real,
        }
    }

    fn check_same(&self, g: &Self) -> Result<(), SpectralError> {
        if self.n_max != g.n_max {
            Err(SpectralError::SizeMismatch(self.n_max, g.n_max))
        } else {
            Ok(())
        }
    }

    pub fn dx(&self) -> Self {
        self.map_modes(self.is_real, |n, c| c * C64::new(0.0, n as f64))
    }

    pub fn dxx(&self) -> Self {
        self.map_modes(self.is_real, |n, c| c * (-(n * n) as f64))
    }

    /// Multiplier `-i sgn(n)`.
    pub fn hilbert(&self) -> Self {
        self.map_modes(self.is_real, |n, c| c * C64::new(0.0, -(n.signum() as f64)))
    }

    pub fn project(&self, p: Projection) -> Self {
        let keep = |n: i64| match p {
            Projection::Plus => n > 0,
            Projection::Minus => n < 0,
            Projection::Mean => n == 0,
            Projection::NonMean => n != 0,
        };
        let real = self.is_real && matches!(p, Projection::Mean | Projection::NonMean);
        self.map_modes(real, |n, c| if keep(n) { c } else { C64::new(0.0, 0.0) })
    }

    /// Antiderivative with zero mean. Fails on a nonzero mean.
    pub fn inv_dx(&self) -> Result<Self, SpectralError> {
        let scale = self.coeffs.iter().map(|c| c.norm()).fold(1.0, f64::max);
        if self.mean().norm() > 1e-12 * scale {
            return Err(SpectralError::NonzeroMean(self.mean().norm()));
        }
        Ok(self.inv_dx_nonmean())
    }

    /// `d^{-1} P_{!=c}`: antiderivative of the mean-free part.
    pub fn inv_dx_nonmean(&self) -> Self {
        self.map_modes(self.is_real, |n, c| {
            if n == 0 {
                C64::new(0.0, 0.0)
            } else {
                c / C64::new(0.0, n as f64)
            }
        })
    }

    /// `||f||_{H^s} = (sum <n>^{2s} |c_n|^2)^{1/2}`.
    pub fn sobolev_norm(&self, s: impl Into<SobolevIndex>) -> f64 {
        let s = s.into().value();
        self.modes()
            .zip(&self.coeffs)
            .map(|(n, c)| japanese(n).powf(2.0 * s) * c.norm_sqr())
            .sum::<f64>()
            .sqrt()
    }

    pub fn l2_coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Truncated product `P_N(fg)`.
    pub fn product(&self, g: &Self, mode: ProductMode) -> Result<Self, SpectralError> {
        self.check_same(g)?;
        let n = self.n_max;
        let mut out = match mode {
            ProductMode::ExactConvolution => {
                let ni = n as i64;
                let mut h = Self::zeros(n);
                for k in -ni..=ni {
                    let mut acc = C64::new(0.0, 0.0);
                    let lo = (-ni).max(k - ni);
                    let hi = ni.min(k + ni);
                    for j in lo..=hi {
                        acc += self.get(j) * g.get(k - j);
                    }
                    h.coeffs[(k + ni) as usize] = acc;
                }
                h
            }
            ProductMode::PaddedTransform => {
                let m = grid_size(3 * n + 1);
                let a = self.to_grid(m);
                let b = g.to_grid(m);
                let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
                Self::from_grid(&prod, n)
            }
        };
        out.is_real = false;
        if self.is_real && g.is_real {
            out.symmetrize();
        }
        Ok(out)
    }

    /// Untruncated product on the window `N_f + N_g`.
    pub fn product_full(&self, g: &Self) -> Self {
        let n_out = self.n_max + g.n_max;
        let m = grid_size(2 * n_out + 1);
        let a = self.to_grid(m);
        let b = g.to_grid(m);
        let prod: Vec<C64> = a.iter().zip(&b).map(|(x, y)| x * y).collect();
        let mut out = Self::from_grid(&prod, n_out);
        if self.is_real && g.is_real {
            out.symmetrize();
        }
        out
    }

    /// Values `f(2 pi j / m)`, `j = 0..m`. Requires `m > 2N`.
    pub fn to_grid(&self, m: usize) -> Vec<C64> {
        assert!(m > 2 * self.n_max, "grid of {m} points cannot hold window {}", self.n_max);
        let mut buf = vec![C64::new(0.0, 0.0); m];
        for (n, c) in self.modes().zip(&self.coeffs) {
            buf[n.rem_euclid(m as i64) as usize] = *c;
        }
        fft(&mut buf, false);
        buf
    }

    /// Fourier coefficients on `[-n_max, n_max]` of grid values (aliased).
    pub fn from_grid(values: &[C64], n_max: usize) -> Self {
        let m = values.len();
        let mut buf = values.to_vec();
        fft(&mut buf, true);
        let inv = 1.0 / m as f64;
        let ni = n_max as i64;
        let coeffs = (-ni..=ni)
            .map(|n| buf[n.rem_euclid(m as i64) as usize] * inv)
            .collect();
        Self {
            n_max,
            coeffs,
            is_real: false,
        }
    }

    /// Real-valued grid samples (imaginary parts dropped).
    pub fn to_real_grid(&self, m: usize) -> Vec<f64> {
        self.to_grid(m).into_iter().map(|z| z.re).collect()
    }

    pub fn from_real_grid(values: &[f64], n_max: usize) -> Self {
        let z: Vec<C64> = values.iter().map(|x| C64::new(*x, 0.0)).collect();
        Self::from_grid(&z, n_max).assume_real()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(&FieldJson::from(self)).expect("field serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, SpectralError> {
        let w: FieldJson = serde_json::from_str(s).map_err(|e| SpectralError::Json(e.to_string()))?;
        w.try_into()
    }
}

/// Wire form: `{"n_max", "is_real", "coeffs": [[re, im], ...]}` ordered `n = -N..=N`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FieldJson {
    pub n_max: usize,
    pub is_real: bool,
    pub coeffs: Vec<[f64; 2]>,
}

impl From<&SpectralField> for FieldJson {
    fn from(f: &SpectralField) -> Self {
        Self {
            n_max: f.n_max,
            is_real: f.is_real,
            coeffs: f.coeffs.iter().map(|c| [c.re, c.im]).collect(),
        }
    }
}

impl TryFrom<FieldJson> for SpectralField {
    type Error = SpectralError;

    fn try_from(w: FieldJson) -> Result<Self, SpectralError> {
        let coeffs = w.coeffs.iter().map(|p| C64::new(p[0], p[1])).collect();
        SpectralField::from_coeffs(w.n_max, coeffs, w.is_real)
    }
}

impl Serialize for SpectralField {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        FieldJson::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for SpectralField {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let w = FieldJson::deserialize(d)?;
        w.try_into().map_err(serde::de::Error::custom)
    }
}

impl Add<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn add(self, g: &SpectralField) -> SpectralField {
        self.add_field(g).expect("matching windows")
    }
}

impl Sub<&SpectralField> for &SpectralField {
    type Output = SpectralField;
    fn sub(self, g: &SpectralField) -> SpectralField {
        self.sub_field(g).expect("matching windows")
    }
}

impl AddAssign<&SpectralField> for SpectralField {
    fn add_assign(&mut self, g: &SpectralField) {
        assert_eq!(self.n_max, g.n_max, "matching windows");
        for (a, b) in self.coeffs.iter_mut().zip(&g.coeffs) {
            *a += b;
        }
        self.is_real &= g.is_real;
    }
}

impl SubAssign<&SpectralField> for SpectralField {
    fn sub_assign(&mut self, g: &SpectralField) {
        assert_eq!(self.n_max, g.n_max, "matching windows");
        for (a, b) in self.coeffs.iter_mut().zip(&g.coeffs) {
            *a -= b;
        }
        self.is_real &= g.is_real;
    }
}

impl Mul<f64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: f64) -> SpectralField {
        self.scale_re(a)
    }
}

impl Mul<C64> for &SpectralField {
    type Output = SpectralField;
    fn mul(self, a: C64) -> SpectralField {
        self.scale(a)
    }
}

impl Neg for &SpectralField {
    type Output = SpectralField;
    fn neg(self) -> SpectralField {
        self.scale_re(-1.0)
    }
}

/// Smallest power of two not below `min`.
pub fn grid_size(min: usize) -> usize {
    min.max(2).next_power_of_two()
}

thread_local! {
    static PLANS: RefCell<(FftPlanner<f64>, HashMap<(usize, bool), Arc<dyn Fft<f64>>>)> =
        RefCell::new((FftPlanner::new(), HashMap::new()));
}

/// In-place unnormalized DFT. `forward` uses `e^{-2 pi i jk/m}`.
pub fn fft(buf: &mut [C64], forward: bool) {
    let m = buf.len();
    let plan = PLANS.with(|p| {
        let mut p = p.borrow_mut();
        let (planner, cache) = &mut *p;
        cache
            .entry((m, forward))
            .or_insert_with(|| {
                if forward {
                    planner.plan_fft_forward(m)
                } else {
                    planner.plan_fft_inverse(m)
                }
            })
            .clone()
    });
    plan.process(buf);
}

/// Pointwise evaluation of products of several fields on one grid, returning
/// the truncation of the result to `n_out`. Exact when the grid exceeds the
/// total bandwidth plus `n_out`.
pub fn grid_product(fields: &[&SpectralField], n_out: usize) -> SpectralField {
    let band: usize = fields.iter().map(|f| f.n_max).sum();
    let m = grid_size(band + n_out + 1);
    let mut acc = vec![C64::new(1.0, 0.0); m];
    for f in fields {
        for (a, b) in acc.iter_mut().zip(f.to_grid(m)) {
            *a *= b;
        }
    }
    let mut out = SpectralField::from_grid(&acc, n_out);
    if fields.iter().all(|f| f.is_real) {
        out.symmetrize();
    }
    out
}
