//! Empirical campaigns for the fundamental quintilinear estimates.
//!
//! Every estimate has the shape `|| sum_{n = n_12345} K(n, n_vec) w1 W2 w3 W4 w5 ||_{l^2_r} <~ RHS`
//! with non-negative inputs. `K` is evaluated pointwise by [`kernel`]; [`lhs_brute`] sums it over
//! the whole lattice and [`lhs_fast`] computes the same numbers by splitting each sum into a
//! factorized full part and an enumerated part over the small `(n_2, n_4)` box.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::EstimateError;
use crate::normal_form::multiplier::{hat_region, in_a1, in_a2, multiplier_unchecked, phi_tuple, MultiplierId, Tuple};
use crate::solver::Sigma;
use crate::spectral::japanese;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum EstimateId {
    #[serde(rename = "matome-0")]
    Matome0,
    #[serde(rename = "matome-1")]
    Matome1,
    #[serde(rename = "matome-2")]
    Matome2,
    #[serde(rename = "matome-3")]
    Matome3,
    #[serde(rename = "5linear-0")]
    Five0,
    #[serde(rename = "5linear-1")]
    Five1,
    #[serde(rename = "5linear-2")]
    Five2,
    #[serde(rename = "6linear-0")]
    Six0,
    #[serde(rename = "6linear-1")]
    Six1,
    #[serde(rename = "6linear-2")]
    Six2,
}

use EstimateId::*;

impl EstimateId {
    pub fn all() -> [EstimateId; 10] {
        [Matome0, Matome1, Matome2, Matome3, Five0, Five1, Five2, Six0, Six1, Six2]
    }

    pub fn tag(self) -> &'static str {
        match self {
            Matome0 => "matome-0",
            Matome1 => "matome-1",
            Matome2 => "matome-2",
            Matome3 => "matome-3",
            Five0 => "5linear-0",
            Five1 => "5linear-1",
            Five2 => "5linear-2",
            Six0 => "6linear-0",
            Six1 => "6linear-1",
            Six2 => "6linear-2",
        }
    }

    /// Multiplier choices the estimate ranges over (`None` for the fixed-kernel lemmas).
    pub fn variants(self) -> Vec<Option<MultiplierId>> {
        match self {
            Matome0 => (1..=7).map(|i| Some(MultiplierId { i, starred: false })).collect(),
            Matome1 | Matome2 | Matome3 => MultiplierId::all().map(Some).collect(),
            _ => vec![None],
        }
    }

    /// Index of the output norm: `s - 1` for matome-3, `s` otherwise.
    fn output_shift(self) -> f64 {
        if self == Matome3 {
            -1.0
        } else {
            0.0
        }
    }
}

impl fmt::Display for EstimateId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for EstimateId {
    type Err = EstimateError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        EstimateId::all()
            .into_iter()
            .find(|id| id.tag() == s)
            .ok_or_else(|| EstimateError::UnknownId(s.to_string()))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EstimateParams {
    pub s: f64,
    pub delta: f64,
    pub eta: f64,
    pub sigma: Sigma,
}

impl EstimateParams {
    /// `delta` defaults to `(s - 1/2) / 4`.
    pub fn new(s: f64, delta: Option<f64>, eta: f64) -> Result<Self, EstimateError> {
        if !(s > 0.5) {
            return Err(EstimateError::InvalidRegularity(s));
        }
        let delta = delta.unwrap_or((s - 0.5) / 4.0);
        if !(delta > 0.0 && delta < 0.5) {
            return Err(EstimateError::InvalidDelta(delta));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(EstimateError::InvalidEta(eta));
        }
        Ok(Self {
            s,
            delta,
            eta,
            sigma: Sigma::Minus,
        })
    }
}

/// Non-negative inputs on `[-N, N]`, index `n + N`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuinticInputs {
    pub n_max: usize,
    pub w1: Vec<f64>,
    pub w2: Vec<f64>,
    pub w3: Vec<f64>,
    pub w4: Vec<f64>,
    pub w5: Vec<f64>,
}

impl QuinticInputs {
    pub fn zeros(n_max: usize) -> Self {
        let z = vec![0.0; 2 * n_max + 1];
        Self {
            n_max,
            w1: z.clone(),
            w2: z.clone(),
            w3: z.clone(),
            w4: z.clone(),
            w5: z,
        }
    }

    pub fn scaled(&self, lambda: f64) -> Self {
        let f = |v: &Vec<f64>| v.iter().map(|x| x * lambda).collect();
        Self {
            n_max: self.n_max,
            w1: f(&self.w1),
            w2: f(&self.w2),
            w3: f(&self.w3),
            w4: f(&self.w4),
            w5: f(&self.w5),
        }
    }

    fn slot(&self, k: usize) -> &[f64] {
        match k {
            1 => &self.w1,
            2 => &self.w2,
            3 => &self.w3,
            4 => &self.w4,
            _ => &self.w5,
        }
    }

    fn at(&self, k: usize, n: i64) -> f64 {
        let idx = n + self.n_max as i64;
        if idx < 0 || idx > 2 * self.n_max as i64 {
            0.0
        } else {
            self.slot(k)[idx as usize]
        }
    }
}

pub fn weighted_norm(v: &[f64], n_max: usize, r: f64) -> f64 {
    v.iter()
        .enumerate()
        .map(|(k, x)| japanese(k as i64 - n_max as i64).powf(2.0 * r) * x * x)
        .sum::<f64>()
        .sqrt()
}

fn bracket_phi(n: i64, t: &Tuple) -> f64 {
    japanese(phi_tuple(n, t))
}

/// Pointwise kernel `K(n, n_vec)` of estimate `id` (with multiplier `variant` for the matome family).
pub fn kernel(id: EstimateId, variant: Option<MultiplierId>, p: &EstimateParams, n: i64, t: &Tuple) -> f64 {
    let n45 = t[3] + t[4];
    let n23 = t[1] + t[2];
    match id {
        Matome0 | Matome1 | Matome2 | Matome3 => {
            let mid = variant.expect("matome estimates need a multiplier");
            let m = multiplier_unchecked(mid, p.sigma, n, t).abs();
            if m == 0.0 {
                return 0.0;
            }
            let hat = hat_region(mid.i, n, t, p.eta);
            match id {
                Matome0 => {
                    if hat {
                        0.0
                    } else {
                        m
                    }
                }
                _ if !hat => 0.0,
                Matome1 => m / bracket_phi(n, t).sqrt(),
                Matome2 => m / bracket_phi(n, t),
                _ => m / bracket_phi(n, t).powf(1.0 - p.delta),
            }
        }
        Five0 | Five1 | Five2 => {
            if !(n > 0 && n45 < 0) {
                return 0.0;
            }
            let a = in_a1(t, p.eta);
            let base = n45.unsigned_abs() as f64;
            match id {
                Five0 => {
                    if a {
                        base
                    } else {
                        0.0
                    }
                }
                _ if a => 0.0,
                Five1 => base / bracket_phi(n, t).sqrt(),
                _ => base / bracket_phi(n, t).powf(1.0 - p.delta) * nmax_ratio(n, t),
            }
        }
        Six0 | Six1 | Six2 => {
            if !(n23 > 0 && n45 > 0) {
                return 0.0;
            }
            let a = in_a2(t, p.eta);
            let base = (n23 * n45) as f64 / (n23 + n45) as f64;
            match id {
                Six0 => {
                    if a {
                        base
                    } else {
                        0.0
                    }
                }
                _ if a => 0.0,
                Six1 => base / bracket_phi(n, t).sqrt(),
                _ => base / bracket_phi(n, t).powf(1.0 - p.delta) * nmax_ratio(n, t),
            }
        }
    }
}

fn nmax_ratio(n: i64, t: &Tuple) -> f64 {
    let m = t.iter().map(|x| x.abs()).max().unwrap_or(0);
    japanese(m) / japanese(n)
}

/// Output array by direct summation over `n_1..n_4` with `n_5` closed.
pub fn lhs_brute(id: EstimateId, variant: Option<MultiplierId>, p: &EstimateParams, x: &QuinticInputs) -> Vec<f64> {
    let n = x.n_max as i64;
    (-n..=n)
        .into_par_iter()
        .map(|out| {
            let mut acc = 0.0;
            for n1 in -n..=n {
                for n2 in -n..=n {
                    for n3 in -n..=n {
                        for n4 in -n..=n {
                            let n5 = out - n1 - n2 - n3 - n4;
                            if n5.abs() > n {
                                continue;
                            }
                            let t = [n1, n2, n3, n4, n5];
                            let k = kernel(id, variant, p, out, &t);
                            if k != 0.0 {
                                acc += k * x.at(1, n1) * x.at(2, n2) * x.at(3, n3) * x.at(4, n4) * x.at(5, n5);
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect()
}

/// Half-width of the `(n_2, n_4)` box outside of which the kernel's enumerated part vanishes.
fn box_half_width(id: EstimateId, variant: Option<MultiplierId>, eta: f64, n_max: usize) -> i64 {
    // outside A_1: |n_2| v |n_4| < eta^2 (|n_5| ^ |n|); outside A_2: < eta (|n_3| ^ |n_5|)
    let a2 = match id {
        Six0 | Six1 | Six2 => true,
        Matome0 | Matome1 | Matome2 | Matome3 => variant.map(|m| m.i >= 6).unwrap_or(false),
        _ => false,
    };
    let bound = if a2 { eta } else { eta * eta } * n_max as f64;
    ((bound.ceil() as i64) - 1).clamp(0, n_max as i64)
}

/// One enumerated tuple with its static kernel value.
#[derive(Debug, Clone, Copy)]
struct Term {
    idx: [u32; 5],
    k: f64,
}

/// Precomputed evaluation plan for one `(id, variant, N)`.
#[derive(Debug, Clone)]
pub struct EstimatePlan {
    pub id: EstimateId,
    pub variant: Option<MultiplierId>,
    pub n_max: usize,
    params: EstimateParams,
    /// When set, the value is `full - enumerated` (the A-side estimates).
    full: Option<FullKernel>,
    terms: Vec<Vec<Term>>,
}

#[derive(Debug, Clone, Copy)]
enum FullKernel {
    /// Weight depends on `(n, n_45)` (multipliers 1..5 and their starred versions, 5linear).
    ByN45 { variant: Option<MultiplierId> },
    /// Weight depends on `(n_23, n_45)` (multipliers 6, 7, 6linear).
    ByN23N45 { variant: Option<MultiplierId> },
}

impl EstimatePlan {
    pub fn new(id: EstimateId, variant: Option<MultiplierId>, params: &EstimateParams, n_max: usize) -> Self {
        let full = match id {
            Matome0 => {
                let v = variant.expect("multiplier");
                Some(if v.i <= 5 {
                    FullKernel::ByN45 { variant }
                } else {
                    FullKernel::ByN23N45 { variant }
                })
            }
            Five0 => Some(FullKernel::ByN45 { variant: None }),
            Six0 => Some(FullKernel::ByN23N45 { variant: None }),
            _ => None,
        };
        let n = n_max as i64;
        let b = box_half_width(id, variant, params.eta, n_max);
        let p = *params;
        let terms = (-n..=n)
            .into_par_iter()
            .map(|out| {
                let mut v = Vec::new();
                for n2 in -b..=b {
                    for n4 in -b..=b {
                        for n1 in -n..=n {
                            for n3 in -n..=n {
                                let n5 = out - n1 - n2 - n3 - n4;
                                if n5.abs() > n {
                                    continue;
                                }
                                let t = [n1, n2, n3, n4, n5];
                                // the enumerated part is the complement of the A-side for the full kernels
                                let k = match full {
                                    Some(_) => full_weight(id, variant, &p, out, &t) - kernel(id, variant, &p, out, &t),
                                    None => kernel(id, variant, &p, out, &t),
                                };
                                if k != 0.0 {
                                    v.push(Term {
                                        idx: t.map(|x| (x + n) as u32),
                                        k,
                                    });
                                }
                            }
                        }
                    }
                }
                v
            })
            .collect();
        Self {
            id,
            variant,
            n_max,
            params: p,
            full,
            terms,
        }
    }

    pub fn enumerated_len(&self) -> usize {
        self.terms.iter().map(|v| v.len()).sum()
    }

    pub fn eval(&self, x: &QuinticInputs) -> Vec<f64> {
        assert_eq!(x.n_max, self.n_max, "input window");
        let enumerated: Vec<f64> = self
            .terms
            .par_iter()
            .map(|ts| {
                ts.iter()
                    .map(|t| {
                        let i = t.idx.map(|k| k as usize);
                        t.k * x.w1[i[0]] * x.w2[i[1]] * x.w3[i[2]] * x.w4[i[3]] * x.w5[i[4]]
                    })
                    .sum()
            })
            .collect();
        match self.full {
            None => enumerated,
            Some(fk) => {
                let full = full_sum(fk, &self.params, x);
                // positive summands: the difference is clamped at rounding level
                full.iter().zip(&enumerated).map(|(a, b)| (a - b).max(0.0)).collect()
            }
        }
    }
}

/// Weight of the full (unrestricted) sum that the A-side kernels are cut out of.
fn full_weight(id: EstimateId, variant: Option<MultiplierId>, p: &EstimateParams, n: i64, t: &Tuple) -> f64 {
    let n45 = t[3] + t[4];
    let n23 = t[1] + t[2];
    match id {
        Matome0 => multiplier_unchecked(variant.expect("multiplier"), p.sigma, n, t).abs(),
        Five0 => {
            if n > 0 && n45 < 0 {
                n45.unsigned_abs() as f64
            } else {
                0.0
            }
        }
        Six0 => {
            if n23 > 0 && n45 > 0 {
                (n23 * n45) as f64 / (n23 + n45) as f64
            } else {
                0.0
            }
        }
        _ => 0.0,
    }
}

/// Dense real sequence on `[lo, lo + len)`.
struct RSeq {
    lo: i64,
    v: Vec<f64>,
}

impl RSeq {
    fn from_slice(n_max: usize, v: &[f64]) -> Self {
        Self {
            lo: -(n_max as i64),
            v: v.to_vec(),
        }
    }

    fn get(&self, k: i64) -> f64 {
        let i = k - self.lo;
        if i < 0 || i >= self.v.len() as i64 {
            0.0
        } else {
            self.v[i as usize]
        }
    }

    fn range(&self) -> std::ops::RangeInclusive<i64> {
        self.lo..=self.lo + self.v.len() as i64 - 1
    }

    fn conv(&self, o: &RSeq) -> RSeq {
        let mut v = vec![0.0; self.v.len() + o.v.len() - 1];
        for (i, a) in self.v.iter().enumerate() {
            if *a == 0.0 {
                continue;
            }
            for (j, b) in o.v.iter().enumerate() {
                v[i + j] += a * b;
            }
        }
        RSeq { lo: self.lo + o.lo, v }
    }
}

fn full_sum(fk: FullKernel, p: &EstimateParams, x: &QuinticInputs) -> Vec<f64> {
    let nm = x.n_max;
    let n = nm as i64;
    let s = |k: usize| RSeq::from_slice(nm, x.slot(k));
    match fk {
        FullKernel::ByN45 { variant } => {
            let left = s(1).conv(&s(2)).conv(&s(3));
            let right = s(4).conv(&s(5));
            (-n..=n)
                .into_par_iter()
                .map(|out| {
                    let mut acc = 0.0;
                    for q in right.range() {
                        let l = left.get(out - q);
                        if l == 0.0 {
                            continue;
                        }
                        let t = [out - q, 0, 0, 0, q];
                        let w = match variant {
                            Some(m) => multiplier_unchecked(m, p.sigma, out, &t).abs(),
                            None if out > 0 && q < 0 => q.unsigned_abs() as f64,
                            None => 0.0,
                        };
                        acc += w * l * right.get(q);
                    }
                    acc
                })
                .collect()
        }
        FullKernel::ByN23N45 { variant } => {
            let l = s(2).conv(&s(3));
            let r = s(4).conv(&s(5));
            let w1 = s(1);
            // C(r) = sum_q L(q) R(r - q) w(q, r - q)
            let lo = l.lo + r.lo;
            let hi = *l.range().end() + *r.range().end();
            let c: Vec<f64> = (lo..=hi)
                .into_par_iter()
                .map(|rr| {
                    let mut acc = 0.0;
                    for q in l.range() {
                        let a = l.get(q);
                        let b = r.get(rr - q);
                        if a == 0.0 || b == 0.0 {
                            continue;
                        }
                        let t = [0, 0, q, 0, rr - q];
                        let w = match variant {
                            Some(m) => multiplier_unchecked(m, p.sigma, rr, &t).abs(),
                            None if q > 0 && rr - q > 0 => (q * (rr - q)) as f64 / rr as f64,
                            None => 0.0,
                        };
                        acc += w * a * b;
                    }
                    acc
                })
                .collect();
            let c = RSeq { lo, v: c };
            (-n..=n)
                .map(|out| w1.range().map(|n1| w1.get(n1) * c.get(out - n1)).sum())
                .collect()
        }
    }
}

/// Right-hand side of estimate `id` for inputs `x`.
pub fn rhs(id: EstimateId, p: &EstimateParams, x: &QuinticInputs) -> f64 {
    let nm = x.n_max;
    let s = p.s;
    let nr = |k: usize, r: f64| weighted_norm(x.slot(k), nm, r);
    let odd = nr(1, s) * nr(3, s) * nr(5, s);
    match id {
        Matome0 | Five0 | Six0 => odd * (nr(2, s + 1.0) * nr(4, s) + nr(2, s) * nr(4, s + 1.0)),
        Matome1 | Five1 | Five2 | Six1 | Six2 => odd * nr(2, s) * nr(4, s),
        Matome2 => odd * (nr(2, s - 1.0) * nr(4, s)).min(nr(2, s) * nr(4, s - 1.0)),
        Matome3 => {
            let a = nr(1, s - 1.0) * nr(3, s) * nr(5, s);
            let b = nr(1, s) * nr(3, s - 1.0) * nr(5, s);
            let c = nr(1, s) * nr(3, s) * nr(5, s - 1.0);
            a.min(b).min(c) * nr(2, s) * nr(4, s)
        }
    }
}

/// `LHS / RHS`, defined as 0 when both vanish.
pub fn ratio_from_output(id: EstimateId, p: &EstimateParams, x: &QuinticInputs, out: &[f64]) -> f64 {
    let lhs = weighted_norm(out, x.n_max, p.s + id.output_shift());
    let r = rhs(id, p, x);
    if lhs == 0.0 {
        0.0
    } else if r == 0.0 {
        f64::INFINITY
    } else {
        lhs / r
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Ensemble {
    Uniform,
    Colored,
    Spikes,
}

impl Ensemble {
    pub fn of_trial(k: usize) -> Ensemble {
        [Ensemble::Uniform, Ensemble::Colored, Ensemble::Spikes][k % 3]
    }
}

/// Deterministic random inputs for trial `k`.
pub fn draw_inputs(n_max: usize, s: f64, eta: f64, ensemble: Ensemble, rng: &mut ChaCha8Rng) -> QuinticInputs {
    let n = n_max as i64;
    let len = 2 * n_max + 1;
    let uniform = |rng: &mut ChaCha8Rng| -> Vec<f64> { (0..len).map(|_| rng.gen::<f64>()).collect() };
    match ensemble {
        Ensemble::Uniform => QuinticInputs {
            n_max,
            w1: uniform(rng),
            w2: uniform(rng),
            w3: uniform(rng),
            w4: uniform(rng),
            w5: uniform(rng),
        },
        Ensemble::Colored => {
            let colored = |rng: &mut ChaCha8Rng| -> Vec<f64> {
                (0..len)
                    .map(|k| japanese(k as i64 - n).powf(-s - 0.5) * rng.gen::<f64>())
                    .collect()
            };
            QuinticInputs {
                n_max,
                w1: colored(rng),
                w2: colored(rng),
                w3: colored(rng),
                w4: colored(rng),
                w5: colored(rng),
            }
        }
        Ensemble::Spikes => {
            let mut x = QuinticInputs::zeros(n_max);
            let bg = 1e-3;
            for k in 1..=5 {
                let v = match k {
                    1 => &mut x.w1,
                    2 => &mut x.w2,
                    3 => &mut x.w3,
                    4 => &mut x.w4,
                    _ => &mut x.w5,
                };
                for z in v.iter_mut() {
                    *z = bg * rng.gen::<f64>();
                }
            }
            // spikes near case edges: a small middle frequency against large outer ones,
            // and gauge slots either at the origin or at the A_1 edge |n_2| ~ eta^2 |n_5|
            let big = |rng: &mut ChaCha8Rng| {
                let m = rng.gen_range(n / 2..=n).max(1);
                if rng.gen() {
                    m
                } else {
                    -m
                }
            };
            let n1 = big(rng);
            let n5 = big(rng);
            let edge = ((eta * n1.abs().min(n5.abs()) as f64).round() as i64).min(n);
            let n3 = if rng.gen() { rng.gen_range(-edge..=edge) } else { rng.gen_range(-n..=n) };
            let edge2 = ((eta * eta * n5.abs() as f64).round() as i64).min(n);
            let n2 = rng.gen_range(-edge2..=edge2);
            let n4 = rng.gen_range(-edge2..=edge2);
            let put = |v: &mut Vec<f64>, m: i64| v[(m + n) as usize] = 1.0;
            put(&mut x.w1, n1);
            put(&mut x.w2, n2);
            put(&mut x.w3, n3);
            put(&mut x.w4, n4);
            put(&mut x.w5, n5);
            x
        }
    }
}

fn trial_rng(seed: u64, n_max: usize, trial: usize) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(((n_max as u64) << 32) | trial as u64);
    r
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Witness {
    pub n_max: usize,
    pub trial: usize,
    pub ensemble: Ensemble,
    pub variant: Option<MultiplierId>,
    pub ratio: f64,
    pub inputs: QuinticInputs,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EstimateReport {
    pub estimate_id: EstimateId,
    pub s: f64,
    pub delta: f64,
    pub eta: f64,
    pub seed: u64,
    pub lattice_sizes: Vec<usize>,
    pub trials: usize,
    pub worst_ratio: Vec<f64>,
    pub witness: Vec<Witness>,
    /// Least-squares slope of `log worst_ratio` against `log N`.
    pub slope: f64,
}

/// Worst ratio over `trials` random inputs on one lattice.
pub fn verify_estimate(
    id: EstimateId,
    params: &EstimateParams,
    n_max: usize,
    trials: usize,
    seed: u64,
) -> Result<Witness, EstimateError> {
    if n_max == 0 {
        return Err(EstimateError::BadLattice(n_max));
    }
    let plans: Vec<EstimatePlan> = id
        .variants()
        .into_iter()
        .map(|v| EstimatePlan::new(id, v, params, n_max))
        .collect();
    let mut best: Option<Witness> = None;
    for trial in 0..trials {
        let ensemble = Ensemble::of_trial(trial);
        let mut rng = trial_rng(seed, n_max, trial);
        let x = draw_inputs(n_max, params.s, params.eta, ensemble, &mut rng);
        for plan in &plans {
            let r = ratio_from_output(id, params, &x, &plan.eval(&x));
            if best.as_ref().map(|b| r > b.ratio).unwrap_or(true) {
                best = Some(Witness {
                    n_max,
                    trial,
                    ensemble,
                    variant: plan.variant,
                    ratio: r,
                    inputs: x.clone(),
                });
            }
        }
    }
    best.ok_or(EstimateError::NoTrials)
}

pub fn campaign(
    id: EstimateId,
    params: &EstimateParams,
    sizes: &[usize],
    trials: usize,
    seed: u64,
) -> Result<EstimateReport, EstimateError> {
    let mut worst = Vec::new();
    let mut witness = Vec::new();
    for &n in sizes {
        let w = verify_estimate(id, params, n, trials, seed)?;
        worst.push(w.ratio);
        witness.push(w);
    }
    let slope = if sizes.len() >= 2 && worst.iter().all(|r| *r > 0.0 && r.is_finite()) {
        let xs: Vec<f64> = sizes.iter().map(|n| *n as f64).collect();
        crate::normal_form::scans::log_log_slope(&xs, &worst)
    } else {
        f64::NAN
    };
    Ok(EstimateReport {
        estimate_id: id,
        s: params.s,
        delta: params.delta,
        eta: params.eta,
        seed,
        lattice_sizes: sizes.to_vec(),
        trials,
        worst_ratio: worst,
        witness,
        slope,
    })
}

/// Re-evaluates a witness from its stored inputs.
pub fn replay(id: EstimateId, params: &EstimateParams, w: &Witness) -> f64 {
    let plan = EstimatePlan::new(id, w.variant, params, w.n_max);
    ratio_from_output(id, params, &w.inputs, &plan.eval(&w.inputs))
}
