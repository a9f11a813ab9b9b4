//! Normal-form term families after one, two and three reductions.
//!
//! Conventions: a parent of kind `kappa` carries `gamma = (+-i) * hat m_i^{(kappa)}`
//! (`+i` for `omega`, `-i` for `omega^*`), so the first generation is
//! `N^{(1)} = sum e^{it Phi} gamma (leaves)`. After `J` reductions
//!
//! ```text
//! N_R^{(J)} = (-1)^{J-1} sum_{M_R}  e^{it Phi~_J} prod gamma / prod_{j<J}  (i Phi~_j) leaves
//! N_0^{(J)} = (-1)^{J-1} sum_{M_NR} e^{it Phi~_J} prod gamma / prod_{j<=J} (i Phi~_j) leaves
//! N_1^{(J)}, R^{(J)}: as N_0 with sign (-1)^J and d_t on the weights / R^(0) in one odd leaf
//! N^{(J+1)}: generation J+1 trees, region M_NR^{(J)} on the first J phases, sign (-1)^J
//! ```
//!
//! Conjugation is tracked exactly: odd leaves of kind `omega^*` read `conj(x(-n))`.

use std::collections::HashMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::frame::{lattice_rhs, LatticeFrame};
use super::multiplier::{hat_box, hat_region, multiplier_unchecked, pattern, phi_tuple, Kind, MultiplierId, Tuple};
use super::tree::{enumerate_trees, in_nonresonant, in_resonant, tree_count, Tree};
use super::NormalFormError;
use crate::solver::Sigma;
use crate::spectral::{SpectralField, C64};

const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
const IU: C64 = C64 { re: 0.0, im: 1.0 };

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Family {
    #[serde(rename = "N_R")]
    Resonant,
    #[serde(rename = "N_0")]
    Boundary,
    #[serde(rename = "N_1")]
    WeightDerivative,
    #[serde(rename = "R")]
    Remainder,
    #[serde(rename = "N_next")]
    Next,
}

impl Family {
    pub fn label(self) -> &'static str {
        match self {
            Family::Resonant => "N_R",
            Family::Boundary => "N_0",
            Family::WeightDerivative => "N_1",
            Family::Remainder => "R",
            Family::Next => "N_next",
        }
    }

    pub fn all() -> [Family; 5] {
        [
            Family::Resonant,
            Family::Boundary,
            Family::WeightDerivative,
            Family::Remainder,
            Family::Next,
        ]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TermDescriptor {
    pub family: Family,
    pub j: usize,
    pub m: f64,
    pub eta: f64,
}

impl TermDescriptor {
    pub fn new(family: Family, j: usize, m: f64, eta: f64) -> Result<Self, NormalFormError> {
        if !(m > 1.0) {
            return Err(NormalFormError::BadThreshold(m));
        }
        if !(eta > 0.0 && eta < 1.0) {
            return Err(NormalFormError::BadEta(eta));
        }
        if j == 0 {
            return Err(NormalFormError::GenerationTooLarge(j));
        }
        Ok(Self { family, j, m, eta })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EvalMode {
    Exact,
    MonteCarlo,
}

/// One frequency tuple in the hat support with its hat multipliers.
#[derive(Debug, Clone)]
pub struct HatEntry {
    pub n: i64,
    pub t: Tuple,
    pub phi: i64,
    pub hat: [f64; 7],
    pub hat_star: [f64; 7],
}

impl HatEntry {
    pub fn coef(&self, kind: Kind, i: u8) -> f64 {
        match kind {
            Kind::Omega => self.hat[(i - 1) as usize],
            Kind::OmegaStar => self.hat_star[(i - 1) as usize],
        }
    }
}

/// All tuples of the lattice where some hat multiplier is nonzero, grouped by output.
#[derive(Debug, Clone)]
pub struct HatTable {
    pub n_max: usize,
    pub eta: f64,
    pub sigma: Sigma,
    pub half_box: i64,
    by_out: Vec<Vec<HatEntry>>,
}

impl HatTable {
    pub fn build(n_max: usize, eta: f64, sigma: Sigma) -> Self {
        let n = n_max as i64;
        let b = hat_box(n_max, eta).min(n);
        let by_out = (-n..=n)
            .into_par_iter()
            .map(|out| {
                let mut v = Vec::new();
                for n1 in -n..=n {
                    for n2 in -b..=b {
                        for n3 in -n..=n {
                            for n4 in -b..=b {
                                let n5 = out - n1 - n2 - n3 - n4;
                                if n5.abs() > n {
                                    continue;
                                }
                                let t = [n1, n2, n3, n4, n5];
                                let mut hat = [0.0; 7];
                                let mut hat_star = [0.0; 7];
                                let mut any = false;
                                for i in 1..=7u8 {
                                    if !hat_region(i, out, &t, eta) {
                                        continue;
                                    }
                                    let a = multiplier_unchecked(MultiplierId { i, starred: false }, sigma, out, &t);
                                    let s = multiplier_unchecked(MultiplierId { i, starred: true }, sigma, out, &t);
                                    hat[(i - 1) as usize] = a;
                                    hat_star[(i - 1) as usize] = s;
                                    any |= a != 0.0 || s != 0.0;
                                }
                                if any {
                                    v.push(HatEntry {
                                        n: out,
                                        t,
                                        phi: phi_tuple(out, &t),
                                        hat,
                                        hat_star,
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
            n_max,
            eta,
            sigma,
            half_box: b,
            by_out,
        }
    }

    pub fn entries(&self, n: i64) -> &[HatEntry] {
        &self.by_out[(n + self.n_max as i64) as usize]
    }

    pub fn len(&self) -> usize {
        self.by_out.iter().map(|v| v.len()).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// How the leaves of a term are read.
#[derive(Clone, Copy)]
enum LeafMode<'a> {
    Plain,
    /// Leibniz sum with `d_t` on one weight leaf.
    WeightDerivative,
    /// Leibniz sum with `x` (or `conj(x(-n))` for `omega^*` leaves) in one odd leaf.
    Substitute(&'a SpectralField, &'a SpectralField),
}

fn sub_leaf(x: &SpectralField, xs: &SpectralField, kind: Kind, n: i64) -> C64 {
    match kind {
        Kind::Omega => x.get(n),
        Kind::OmegaStar => xs.get(n),
    }
}

/// Leaves of one parent: odd values, even values, and their modified versions.
struct NodeLeaves {
    odd: [C64; 3],
    even: [C64; 2],
    odd_mod: [C64; 3],
    even_mod: [C64; 2],
}

fn node_leaves(frame: &LatticeFrame, e: &HatEntry, i: u8, kind: Kind, mode: LeafMode) -> NodeLeaves {
    let p = pattern(i, kind);
    let odd_n = [e.t[0], e.t[2], e.t[4]];
    let even_n = [e.t[1], e.t[3]];
    let odd = [0, 1, 2].map(|b| frame.leaf(p.odd[b], odd_n[b]));
    let even = [0, 1].map(|b| frame.w(p.even[b], even_n[b]));
    let (odd_mod, even_mod) = match mode {
        LeafMode::Plain => ([ZERO; 3], [ZERO; 2]),
        LeafMode::WeightDerivative => ([ZERO; 3], [0, 1].map(|b| frame.dw(p.even[b], even_n[b]))),
        LeafMode::Substitute(x, xs) => ([0, 1, 2].map(|b| sub_leaf(x, xs, p.odd[b], odd_n[b])), [ZERO; 2]),
    };
    NodeLeaves {
        odd,
        even,
        odd_mod,
        even_mod,
    }
}

impl NodeLeaves {
    fn plain(&self) -> C64 {
        self.odd[0] * self.odd[1] * self.odd[2] * self.even[0] * self.even[1]
    }

    /// Leibniz sum over the modified leaves, skipping odd slot `skip`.
    fn modified(&self, mode: LeafMode, skip: Option<usize>) -> C64 {
        let odd_prod = |excl: Option<usize>| -> C64 {
            (0..3).filter(|b| Some(*b) != excl && Some(*b) != skip).map(|b| self.odd[b]).product()
        };
        match mode {
            LeafMode::Plain => odd_prod(None) * self.even[0] * self.even[1],
            LeafMode::WeightDerivative => {
                odd_prod(None) * (self.even_mod[0] * self.even[1] + self.even[0] * self.even_mod[1])
            }
            LeafMode::Substitute(..) => {
                let mut acc = ZERO;
                for b in 0..3 {
                    if Some(b) == skip {
                        continue;
                    }
                    acc += self.odd_mod[b] * odd_prod(Some(b));
                }
                acc * self.even[0] * self.even[1]
            }
        }
    }

    /// Product of all leaves except odd slot `skip`.
    fn others(&self, skip: usize) -> C64 {
        (0..3).filter(|b| *b != skip).map(|b| self.odd[b]).product::<C64>() * self.even[0] * self.even[1]
    }
}

fn gamma(kind: Kind, m: f64) -> C64 {
    C64::new(0.0, kind.unit_sign() * m)
}

/// All generation-one quantities at one time.
#[derive(Debug, Clone)]
pub struct FirstGeneration {
    /// `N^{(1)} = i sum Q_i(e^{it Phi} hat m_i)`.
    pub n1_full: SpectralField,
    pub resonant: SpectralField,
    pub boundary: SpectralField,
    pub weight_derivative: SpectralField,
    /// `R^{(0)}`.
    pub r0: SpectralField,
    pub remainder: SpectralField,
    /// `N^{(2)}` by substitution of `N^{(1)}`.
    pub next: SpectralField,
    /// Full lattice right side `i sum Q_i(e^{it Phi} m_i) + R`.
    pub rhs: SpectralField,
}

/// Sum over root parents of `kernel(Phi) * gamma * e^{it Phi} * leaves(mode)`.
fn root_sum(
    frame: &LatticeFrame,
    table: &HatTable,
    mode: LeafMode,
    kernel: &(dyn Fn(i64) -> Option<C64> + Sync),
) -> SpectralField {
    let n = frame.n_max as i64;
    let t = frame.t();
    let coeffs: Vec<C64> = (-n..=n)
        .into_par_iter()
        .map(|out| {
            let mut acc = ZERO;
            for e in table.entries(out) {
                let Some(k) = kernel(e.phi) else { continue };
                let ph = C64::from_polar(1.0, t * e.phi as f64) * k;
                for i in 1..=7u8 {
                    let m = e.coef(Kind::Omega, i);
                    if m == 0.0 {
                        continue;
                    }
                    let l = node_leaves(frame, e, i, Kind::Omega, mode);
                    let val = match mode {
                        LeafMode::Plain => l.plain(),
                        _ => l.modified(mode, None),
                    };
                    acc += gamma(Kind::Omega, m) * ph * val;
                }
            }
            acc
        })
        .collect();
    SpectralField::from_coeffs(frame.n_max, coeffs, false).expect("window")
}

fn check_lattice(frame: &LatticeFrame, table: &HatTable) -> Result<(), NormalFormError> {
    if frame.n_max != table.n_max {
        return Err(NormalFormError::WindowMismatch(frame.n_max, table.n_max));
    }
    Ok(())
}

pub fn first_generation(frame: &LatticeFrame, table: &HatTable, m: f64) -> Result<FirstGeneration, NormalFormError> {
    check_lattice(frame, table)?;
    let all = |_: i64| Some(C64::new(1.0, 0.0));
    let res = |p: i64| ((p.abs() as f64) <= m).then_some(C64::new(1.0, 0.0));
    let bnd = |p: i64| ((p.abs() as f64) > m).then(|| C64::new(1.0, 0.0) / (IU * p as f64));
    let neg_bnd = |p: i64| ((p.abs() as f64) > m).then(|| -C64::new(1.0, 0.0) / (IU * p as f64));

    let n1_full = root_sum(frame, table, LeafMode::Plain, &all);
    let resonant = root_sum(frame, table, LeafMode::Plain, &res);
    let boundary = root_sum(frame, table, LeafMode::Plain, &bnd);
    let weight_derivative = root_sum(frame, table, LeafMode::WeightDerivative, &neg_bnd);
    let rhs = lattice_rhs(frame);
    let r0 = &rhs - &n1_full;
    let r0s = r0.conj();
    let remainder = root_sum(frame, table, LeafMode::Substitute(&r0, &r0s), &neg_bnd);
    let n1s = n1_full.conj();
    let next = root_sum(frame, table, LeafMode::Substitute(&n1_full, &n1s), &neg_bnd);
    Ok(FirstGeneration {
        n1_full,
        resonant,
        boundary,
        weight_derivative,
        r0,
        remainder,
        next,
        rhs,
    })
}

/// Inner generation resolved by its phase: `(phi, sum of e^{it phi} gamma leaves)` sorted by `phi`.
type PhaseList = Vec<(i64, C64)>;

struct InnerObjects {
    /// Indexed `[kind][n + N]`.
    lists: [Vec<PhaseList>; 2],
}

fn kind_index(k: Kind) -> usize {
    match k {
        Kind::Omega => 0,
        Kind::OmegaStar => 1,
    }
}

fn inner_objects(frame: &LatticeFrame, table: &HatTable, mode: LeafMode) -> InnerObjects {
    let n = frame.n_max as i64;
    let t = frame.t();
    let build = |kind: Kind| -> Vec<PhaseList> {
        (-n..=n)
            .into_par_iter()
            .map(|out| {
                let mut raw: Vec<(i64, C64)> = Vec::new();
                for e in table.entries(out) {
                    let ph = C64::from_polar(1.0, t * e.phi as f64);
                    let mut acc = ZERO;
                    for i in 1..=7u8 {
                        let m = e.coef(kind, i);
                        if m == 0.0 {
                            continue;
                        }
                        let l = node_leaves(frame, e, i, kind, mode);
                        let val = match mode {
                            LeafMode::Plain => l.plain(),
                            _ => l.modified(mode, None),
                        };
                        acc += gamma(kind, m) * val;
                    }
                    if acc != ZERO {
                        raw.push((e.phi, acc * ph));
                    }
                }
                raw.sort_by_key(|x| x.0);
                let mut merged: PhaseList = Vec::with_capacity(raw.len());
                for (p, z) in raw {
                    match merged.last_mut() {
                        Some(last) if last.0 == p => last.1 += z,
                        _ => merged.push((p, z)),
                    }
                }
                merged
            })
            .collect()
    };
    InnerObjects {
        lists: [build(Kind::Omega), build(Kind::OmegaStar)],
    }
}

impl InnerObjects {
    fn get(&self, kind: Kind, n: i64, n_max: usize) -> &PhaseList {
        &self.lists[kind_index(kind)][(n + n_max as i64) as usize]
    }
}

/// Second-generation quantities at one time, with the phase coupling resolved exactly.
#[derive(Debug, Clone)]
pub struct SecondGeneration {
    /// `N^{(2)}` as a sum over generation-two trees (equals `FirstGeneration::next`).
    pub total: SpectralField,
    pub resonant: SpectralField,
    pub boundary: SpectralField,
    pub weight_derivative: SpectralField,
    pub remainder: SpectralField,
    /// `N^{(3)}` by substituting `N^{(1)}` into the non-resonant generation-two structure.
    pub next: SpectralField,
}

/// Kernel of the second generation as a function of `(Phi_1, phi_2)`.
type Kernel2 = dyn Fn(i64, i64) -> Option<C64> + Sync;

/// Distinct `(inner kind, inner output, Phi_1)` met by the outer loop.
struct PairKeys {
    keys: Vec<(Kind, i64, i64)>,
    index: HashMap<(Kind, i64, i64), usize>,
}

fn pair_keys(table: &HatTable, m: f64) -> PairKeys {
    let n = table.n_max as i64;
    let mut keys = Vec::new();
    let mut index = HashMap::new();
    for out in -n..=n {
        for e in table.entries(out) {
            if (e.phi.abs() as f64) <= m {
                continue;
            }
            for i in 1..=7u8 {
                if e.coef(Kind::Omega, i) == 0.0 {
                    continue;
                }
                let p = pattern(i, Kind::Omega);
                for b in 0..3 {
                    let key = (p.odd[b], e.t[2 * b], e.phi);
                    index.entry(key).or_insert_with(|| {
                        keys.push(key);
                        keys.len() - 1
                    });
                }
            }
        }
    }
    PairKeys { keys, index }
}

/// `sum_{phi_2} K(Phi_1, phi_2) z` for every key.
fn pair_values(keys: &PairKeys, inner: &InnerObjects, n_max: usize, kernel: &Kernel2) -> Vec<C64> {
    keys.keys
        .par_iter()
        .map(|&(kind, nb, p1)| {
            let mut s = ZERO;
            for (p2, z) in inner.get(kind, nb, n_max) {
                if let Some(k) = kernel(p1, *p2) {
                    s += k * z;
                }
            }
            s
        })
        .collect()
}

/// `sum_{root} sum_b e^{it Phi_1} gamma_1 * [outer leaves] * [paired inner object at n_b]`.
/// With `outer_mode`, the Leibniz sum runs over the outer leaves (paired with `plain`)
/// plus the plain outer leaves paired with `modified`.
fn second_sum(
    frame: &LatticeFrame,
    table: &HatTable,
    m: f64,
    keys: &PairKeys,
    plain: &[C64],
    outer_mode: Option<(LeafMode, &[C64])>,
) -> SpectralField {
    let n = frame.n_max as i64;
    let t = frame.t();
    let mode = outer_mode.map(|x| x.0).unwrap_or(LeafMode::Plain);
    let coeffs: Vec<C64> = (-n..=n)
        .into_par_iter()
        .map(|out| {
            let mut acc = ZERO;
            for e in table.entries(out) {
                if (e.phi.abs() as f64) <= m {
                    continue;
                }
                let ph = C64::from_polar(1.0, t * e.phi as f64);
                for i in 1..=7u8 {
                    let c = e.coef(Kind::Omega, i);
                    if c == 0.0 {
                        continue;
                    }
                    let g = gamma(Kind::Omega, c) * ph;
                    let p = pattern(i, Kind::Omega);
                    let l = node_leaves(frame, e, i, Kind::Omega, mode);
                    for b in 0..3 {
                        let k = keys.index[&(p.odd[b], e.t[2 * b], e.phi)];
                        match outer_mode {
                            None => acc += g * l.others(b) * plain[k],
                            Some((md, modified)) => {
                                acc += g * (l.others(b) * modified[k] + l.modified(md, Some(b)) * plain[k]);
                            }
                        }
                    }
                }
            }
            acc
        })
        .collect();
    SpectralField::from_coeffs(frame.n_max, coeffs, false).expect("window")
}

pub fn second_generation(
    frame: &LatticeFrame,
    table: &HatTable,
    m: f64,
    first: &FirstGeneration,
) -> Result<SecondGeneration, NormalFormError> {
    check_lattice(frame, table)?;
    let one = C64::new(1.0, 0.0);
    let nr = move |p1: i64, p2: i64| (p1 + p2).abs() > 2 * p1.abs();
    let k_total = move |p1: i64, _p2: i64| Some(-one / (IU * p1 as f64));
    let k_res = move |p1: i64, p2: i64| (!nr(p1, p2)).then(move || -one / (IU * p1 as f64));
    let k_bnd = move |p1: i64, p2: i64| nr(p1, p2).then(move || -one / (IU * p1 as f64 * IU * (p1 + p2) as f64));
    let k_pos = move |p1: i64, p2: i64| nr(p1, p2).then(move || one / (IU * p1 as f64 * IU * (p1 + p2) as f64));

    let nm = frame.n_max;
    let keys = pair_keys(table, m);
    let plain = inner_objects(frame, table, LeafMode::Plain);
    let total = second_sum(frame, table, m, &keys, &pair_values(&keys, &plain, nm, &k_total), None);
    let resonant = second_sum(frame, table, m, &keys, &pair_values(&keys, &plain, nm, &k_res), None);
    let boundary = second_sum(frame, table, m, &keys, &pair_values(&keys, &plain, nm, &k_bnd), None);
    let plain_pos = pair_values(&keys, &plain, nm, &k_pos);

    let with_modified = |mode: LeafMode| -> SpectralField {
        let inner = inner_objects(frame, table, mode);
        let modified = pair_values(&keys, &inner, nm, &k_pos);
        second_sum(frame, table, m, &keys, &plain_pos, Some((mode, &modified)))
    };
    let weight_derivative = with_modified(LeafMode::WeightDerivative);
    let r0s = first.r0.conj();
    let remainder = with_modified(LeafMode::Substitute(&first.r0, &r0s));
    let n1s = first.n1_full.conj();
    let next = with_modified(LeafMode::Substitute(&first.n1_full, &n1s));
    Ok(SecondGeneration {
        total,
        resonant,
        boundary,
        weight_derivative,
        remainder,
        next,
    })
}

/// One Monte-Carlo sample with nonzero static weight.
#[derive(Debug, Clone)]
struct McSample {
    coef: C64,
    phase: i64,
    odd: Vec<(Kind, i64)>,
    even: Vec<(i32, i64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct McConfig {
    pub samples_per_mode: usize,
    pub batches: usize,
    pub seed: u64,
}

impl Default for McConfig {
    fn default() -> Self {
        Self {
            samples_per_mode: 200_000,
            batches: 20,
            seed: 0x5eed,
        }
    }
}

/// Monte-Carlo estimate of a field with per-mode standard errors.
#[derive(Debug, Clone)]
pub struct McEstimate {
    pub mean: SpectralField,
    pub stderr: Vec<f64>,
    pub samples_per_mode: usize,
    pub support_samples: usize,
}

impl McEstimate {
    /// `(sum <n>^{2s} stderr_n^2)^{1/2}`, the error scale of `||mean||_{l^2_s}`.
    pub fn stderr_norm(&self, s: f64) -> f64 {
        let n = self.mean.n_max() as i64;
        (-n..=n)
            .zip(&self.stderr)
            .map(|(k, e)| crate::spectral::japanese(k).powf(2.0 * s) * e * e)
            .sum::<f64>()
            .sqrt()
    }
}

/// What a sampled generation-`g` tree contributes.
#[derive(Debug, Clone, Copy)]
struct McShape {
    generation: usize,
    /// Region test on the phases.
    region: McRegion,
    /// Number of cumulative phases in the denominator.
    denominators: usize,
    sign: f64,
}

#[derive(Debug, Clone, Copy)]
enum McRegion {
    Resonant(usize),
    NonResonant(usize),
}

impl McShape {
    fn for_descriptor(desc: &TermDescriptor) -> Result<McShape, NormalFormError> {
        let j = desc.j;
        let sgn = |k: usize| if k % 2 == 0 { 1.0 } else { -1.0 };
        let shape = match desc.family {
            Family::Resonant => McShape {
                generation: j,
                region: McRegion::Resonant(j),
                denominators: j - 1,
                sign: sgn(j - 1),
            },
            Family::Boundary => McShape {
                generation: j,
                region: McRegion::NonResonant(j),
                denominators: j,
                sign: sgn(j - 1),
            },
            Family::WeightDerivative | Family::Remainder => McShape {
                generation: j,
                region: McRegion::NonResonant(j),
                denominators: j,
                sign: sgn(j),
            },
            Family::Next => McShape {
                generation: j + 1,
                region: McRegion::NonResonant(j),
                denominators: j,
                sign: sgn(j),
            },
        };
        if shape.generation > super::tree::J_MAX {
            return Err(NormalFormError::GenerationTooLarge(shape.generation));
        }
        Ok(shape)
    }
}

/// Importance distribution over `(entry, i)` per parent kind and output, proportional to
/// `|hat m| * prod (|leaf| + floor)` on a reference frame.
struct Proposal {
    /// Indexed `[kind][n + N]`: candidates, cumulative weights.
    lists: [Vec<(Vec<(usize, u8)>, Vec<f64>)>; 2],
}

const PROPOSAL_FLOOR: f64 = 1e-4;

fn build_proposal(table: &HatTable, frame: &LatticeFrame) -> Proposal {
    let n = table.n_max as i64;
    let peak = frame.state.omega.max_abs().max(f64::MIN_POSITIVE);
    let wpeak = [-3, -1, 1, 3]
        .iter()
        .map(|&k| frame.w_field(k).max_abs())
        .fold(f64::MIN_POSITIVE, f64::max);
    let build = |kind: Kind| -> Vec<(Vec<(usize, u8)>, Vec<f64>)> {
        (-n..=n)
            .into_par_iter()
            .map(|out| {
                let mut cand = Vec::new();
                let mut cdf = Vec::new();
                let mut acc = 0.0;
                for (idx, e) in table.entries(out).iter().enumerate() {
                    for i in 1..=7u8 {
                        let c = e.coef(kind, i);
                        if c == 0.0 {
                            continue;
                        }
                        let p = pattern(i, kind);
                        let mut w = c.abs();
                        for b in 0..3 {
                            w *= frame.leaf(p.odd[b], e.t[2 * b]).norm() + PROPOSAL_FLOOR * peak;
                        }
                        for b in 0..2 {
                            w *= frame.w(p.even[b], e.t[2 * b + 1]).norm() + PROPOSAL_FLOOR * wpeak;
                        }
                        acc += w;
                        cand.push((idx, i));
                        cdf.push(acc);
                    }
                }
                (cand, cdf)
            })
            .collect()
    };
    Proposal {
        lists: [build(Kind::Omega), build(Kind::OmegaStar)],
    }
}

impl Proposal {
    /// Draws `(entry index, i, probability)`; `None` when the support is empty.
    fn draw(&self, kind: Kind, out: i64, n_max: usize, rng: &mut ChaCha8Rng) -> Option<(usize, u8, f64)> {
        let (cand, cdf) = &self.lists[kind_index(kind)][(out + n_max as i64) as usize];
        let total = *cdf.last()?;
        let u = rng.gen::<f64>() * total;
        let k = cdf.partition_point(|c| *c <= u).min(cand.len() - 1);
        let w = cdf[k] - if k == 0 { 0.0 } else { cdf[k - 1] };
        Some((cand[k].0, cand[k].1, w / total))
    }
}

fn draw_samples(
    table: &HatTable,
    proposal: &Proposal,
    trees: &[Tree],
    shape: McShape,
    m: f64,
    out: i64,
    cfg: &McConfig,
) -> (Vec<(usize, McSample)>, usize) {
    let g = shape.generation;
    let seed = cfg
        .seed
        .wrapping_mul(0x9E37_79B9_7F4A_7C15)
        .wrapping_add((out + 1_000_003) as u64);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut kept = Vec::new();
    let mut support = 0;
    for s in 0..cfg.samples_per_mode {
        let tree = &trees[rng.gen_range(0..trees.len())];
        let mut pats = Vec::with_capacity(g);
        let mut freq = vec![0i64; tree.nodes.len()];
        let mut kind = vec![Kind::Omega; tree.nodes.len()];
        freq[0] = out;
        let mut coef = C64::new(trees.len() as f64 * shape.sign, 0.0);
        let mut phases = Vec::with_capacity(g);
        let mut ok = true;
        for &a in &tree.parent_order {
            let Some((idx, i, prob)) = proposal.draw(kind[a], freq[a], table.n_max, &mut rng) else {
                ok = false;
                break;
            };
            let e = &table.entries(freq[a])[idx];
            let t = e.t;
            pats.push(i);
            coef *= gamma(kind[a], e.coef(kind[a], i)) / prob;
            phases.push(phi_tuple(freq[a], &t));
            let ch = tree.nodes[a].children.expect("parent");
            let p = pattern(i, kind[a]);
            for l in 0..5 {
                freq[ch[l]] = t[l];
                if l % 2 == 0 {
                    kind[ch[l]] = p.odd[l / 2];
                }
            }
        }
        if !ok {
            continue;
        }
        let inside = match shape.region {
            McRegion::Resonant(k) => in_resonant(&phases[..k], m),
            McRegion::NonResonant(k) => in_nonresonant(&phases[..k], m),
        };
        if !inside {
            continue;
        }
        let mut cum = 0i64;
        for (j, p) in phases.iter().enumerate() {
            cum += p;
            if j < shape.denominators {
                coef /= IU * cum as f64;
            }
        }
        let mut odd = Vec::new();
        let mut even = Vec::new();
        for (j, &a) in tree.parent_order.iter().enumerate() {
            let ch = tree.nodes[a].children.expect("parent");
            let p = pattern(pats[j], kind[a]);
            for l in 0..5 {
                let c = ch[l];
                if tree.nodes[c].children.is_some() {
                    continue;
                }
                if l % 2 == 0 {
                    odd.push((kind[c], freq[c]));
                } else {
                    even.push((p.even[l / 2], freq[c]));
                }
            }
        }
        support += 1;
        kept.push((
            s,
            McSample {
                coef,
                phase: cum,
                odd,
                even,
            },
        ));
    }
    (kept, support)
}

fn sample_value(s: &McSample, frame: &LatticeFrame, family: Family, r0: Option<(&SpectralField, &SpectralField)>) -> C64 {
    let odd: Vec<C64> = s.odd.iter().map(|(k, n)| frame.leaf(*k, *n)).collect();
    let even: Vec<C64> = s.even.iter().map(|(k, n)| frame.w(*k, *n)).collect();
    let prod = |v: &[C64], skip: Option<usize>| -> C64 {
        v.iter()
            .enumerate()
            .filter(|(i, _)| Some(*i) != skip)
            .map(|(_, z)| *z)
            .product()
    };
    let leaves = match family {
        Family::WeightDerivative => {
            let po = prod(&odd, None);
            let mut acc = ZERO;
            for (idx, (k, n)) in s.even.iter().enumerate() {
                acc += frame.dw(*k, *n) * prod(&even, Some(idx));
            }
            acc * po
        }
        Family::Remainder => {
            let (x, xs) = r0.expect("R^(0) for remainder families");
            let pe = prod(&even, None);
            let mut acc = ZERO;
            for (idx, (k, n)) in s.odd.iter().enumerate() {
                acc += sub_leaf(x, xs, *k, *n) * prod(&odd, Some(idx));
            }
            acc * pe
        }
        _ => prod(&odd, None) * prod(&even, None),
    };
    s.coef * C64::from_polar(1.0, frame.t() * s.phase as f64) * leaves
}

/// Monte-Carlo evaluation of a term family, optionally integrated in time by the
/// composite trapezoid over `frames` (same samples at every time).
pub fn mc_term(
    desc: &TermDescriptor,
    table: &HatTable,
    frames: &[LatticeFrame],
    cfg: &McConfig,
    integrate: bool,
) -> Result<McEstimate, NormalFormError> {
    let shape = McShape::for_descriptor(desc)?;
    let trees = enumerate_trees(shape.generation)?;
    debug_assert_eq!(trees.len(), tree_count(shape.generation));
    if frames.is_empty() {
        return Err(NormalFormError::ModeUnsupported("no frames".into()));
    }
    for f in frames {
        check_lattice(f, table)?;
    }
    let r0s: Vec<(SpectralField, SpectralField)> = if desc.family == Family::Remainder {
        frames
            .iter()
            .map(|f| {
                first_generation(f, table, desc.m).map(|g| {
                    let s = g.r0.conj();
                    (g.r0, s)
                })
            })
            .collect::<Result<_, _>>()?
    } else {
        Vec::new()
    };
    let proposal = build_proposal(table, &frames[0]);
    let n = table.n_max as i64;
    let batches = cfg.batches.max(2);
    let per_mode: Vec<(C64, f64, usize)> = (-n..=n)
        .into_par_iter()
        .map(|out| {
            let (kept, support) = draw_samples(table, &proposal, &trees, shape, desc.m, out, cfg);
            let mut sums = vec![ZERO; batches];
            let batch_len = cfg.samples_per_mode.div_ceil(batches);
            for (idx, s) in &kept {
                let val = if integrate && frames.len() > 1 {
                    let mut acc = ZERO;
                    for k in 0..frames.len() {
                        let r = r0s.get(k).map(|(a, b)| (a, b));
                        let w = if k == 0 || k == frames.len() - 1 { 0.5 } else { 1.0 };
                        acc += sample_value(s, &frames[k], desc.family, r) * w * (frames[1].t() - frames[0].t());
                    }
                    acc
                } else {
                    let r = r0s.first().map(|(a, b)| (a, b));
                    sample_value(s, &frames[0], desc.family, r)
                };
                sums[(idx / batch_len).min(batches - 1)] += val;
            }
            let total: C64 = sums.iter().sum::<C64>() / cfg.samples_per_mode as f64;
            let means: Vec<C64> = sums.iter().map(|z| z / batch_len as f64).collect();
            let var = means.iter().map(|z| (z - total).norm_sqr()).sum::<f64>() / (batches as f64 - 1.0);
            (total, (var / batches as f64).sqrt(), support)
        })
        .collect();
    let mean = SpectralField::from_coeffs(
        table.n_max,
        per_mode.iter().map(|x| x.0).collect(),
        false,
    )
    .expect("window");
    Ok(McEstimate {
        mean,
        stderr: per_mode.iter().map(|x| x.1).collect(),
        samples_per_mode: cfg.samples_per_mode,
        support_samples: per_mode.iter().map(|x| x.2).sum(),
    })
}

/// A term family at one time: exact for `J <= 2`, Monte-Carlo otherwise (or on request).
pub fn eval_term(
    desc: &TermDescriptor,
    table: &HatTable,
    frame: &LatticeFrame,
    mode: EvalMode,
    mc: &McConfig,
) -> Result<SpectralField, NormalFormError> {
    if table.eta != desc.eta {
        return Err(NormalFormError::ModeUnsupported("hat table built for another eta".into()));
    }
    match (mode, desc.j) {
        (EvalMode::MonteCarlo, _) => Ok(mc_term(desc, table, std::slice::from_ref(frame), mc, false)?.mean),
        (EvalMode::Exact, 1) => {
            let g = first_generation(frame, table, desc.m)?;
            Ok(match desc.family {
                Family::Resonant => g.resonant,
                Family::Boundary => g.boundary,
                Family::WeightDerivative => g.weight_derivative,
                Family::Remainder => g.remainder,
                Family::Next => g.next,
            })
        }
        (EvalMode::Exact, 2) => {
            let g1 = first_generation(frame, table, desc.m)?;
            let g = second_generation(frame, table, desc.m, &g1)?;
            Ok(match desc.family {
                Family::Resonant => g.resonant,
                Family::Boundary => g.boundary,
                Family::WeightDerivative => g.weight_derivative,
                Family::Remainder => g.remainder,
                Family::Next => g.next,
            })
        }
        (EvalMode::Exact, j) if j <= super::tree::J_MAX => Err(NormalFormError::ModeUnsupported(format!(
            "generation {j} is evaluated by Monte Carlo only"
        ))),
        (EvalMode::Exact, j) => Err(NormalFormError::GenerationTooLarge(j)),
    }
}

/// `R^{(0)} = i sum Q_i(e^{it Phi} hathat m_i) + e^{itn|n|} F(R[u])`.
pub fn eval_r0(frame: &LatticeFrame, table: &HatTable) -> Result<SpectralField, NormalFormError> {
    Ok(first_generation(frame, table, f64::INFINITY)?.r0)
}
