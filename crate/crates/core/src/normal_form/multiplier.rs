//! Resonance function, the seven quintilinear multipliers, the exceptional sets
//! and the hat / hathat split.
//!
//! Convention: `multiplier` returns the real part `kappa_i * shape_i`; the Fourier
//! multiplier that appears in the equation for `omega` is `i * multiplier`.
//! With this, `kappa = sigma * (-2, 2, 2, 4, 2, -2, 2)`.

use serde::{Deserialize, Serialize};

use super::NormalFormError;
use crate::solver::Sigma;

/// Frequency 5-tuple `(n_1, ..., n_5)`.
pub type Tuple = [i64; 5];

pub fn phi(n: i64, n1: i64, n3: i64, n5: i64) -> i64 {
    n * n.abs() - n1 * n1.abs() - n3 * n3.abs() - n5 * n5.abs()
}

pub fn phi_tuple(n: i64, t: &Tuple) -> i64 {
    phi(n, t[0], t[2], t[4])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiplierId {
    pub i: u8,
    pub starred: bool,
}

impl MultiplierId {
    pub fn new(i: u8, starred: bool) -> Result<Self, NormalFormError> {
        if (1..=7).contains(&i) {
            Ok(Self { i, starred })
        } else {
            Err(NormalFormError::BadMultiplier(i))
        }
    }

    pub fn all() -> impl Iterator<Item = MultiplierId> {
        (1..=7u8).flat_map(|i| [false, true].map(move |starred| MultiplierId { i, starred }))
    }
}

/// Which profile occupies an odd slot.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Kind {
    Omega,
    OmegaStar,
}

impl Kind {
    pub fn flip(self) -> Kind {
        match self {
            Kind::Omega => Kind::OmegaStar,
            Kind::OmegaStar => Kind::Omega,
        }
    }

    /// Factor `i` or `-i` carried by a generation of this kind.
    pub fn unit_sign(self) -> f64 {
        match self {
            Kind::Omega => 1.0,
            Kind::OmegaStar => -1.0,
        }
    }
}

/// Slot layout of `Q_i`: kinds of slots 1, 3, 5 and gauge exponents `k` of slots 2, 4
/// (slot reads the coefficients of `e^{i k sigma F}`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pattern {
    pub odd: [Kind; 3],
    pub even: [i32; 2],
}

use Kind::{Omega as W, OmegaStar as S};

const PATTERNS: [Pattern; 7] = [
    Pattern { odd: [W, W, S], even: [1, -1] },
    Pattern { odd: [S, S, S], even: [-3, -1] },
    Pattern { odd: [W, W, W], even: [1, 1] },
    Pattern { odd: [W, S, W], even: [-1, 1] },
    Pattern { odd: [S, S, W], even: [-3, 1] },
    Pattern { odd: [W, W, W], even: [1, 1] },
    Pattern { odd: [W, S, S], even: [-1, -1] },
];

/// Layout of `Q_i` inside an equation of kind `kind` (`Q_i^*` swaps kinds and negates exponents).
pub fn pattern(i: u8, kind: Kind) -> Pattern {
    let p = PATTERNS[(i - 1) as usize];
    match kind {
        Kind::Omega => p,
        Kind::OmegaStar => Pattern {
            odd: p.odd.map(Kind::flip),
            even: p.even.map(|k| -k),
        },
    }
}

pub fn kappa(i: u8, sigma: Sigma) -> f64 {
    const K: [f64; 7] = [-2.0, 2.0, 2.0, 4.0, 2.0, -2.0, 2.0];
    K[(i - 1) as usize] * sigma.value()
}

/// Shape of `m_i` without the constant, for `n = n_12345` (not checked).
pub fn shape(i: u8, n: i64, t: &Tuple) -> f64 {
    let n45 = t[3] + t[4];
    match i {
        1 | 2 => {
            if n > 0 && n45 < 0 {
                n45 as f64
            } else {
                0.0
            }
        }
        3..=5 => {
            if !(n < 0 && n45 > 0) {
                return 0.0;
            }
            let n123 = t[0] + t[1] + t[2];
            debug_assert!(n123 != 0, "n_123 vanishes under n < 0 < n_45");
            if n123 == 0 {
                return 0.0;
            }
            let r = n as f64 / n123 as f64;
            let p = n45 as f64;
            match i {
                3 => p * (2.0 + r),
                4 => p * (1.0 + r),
                _ => p * r,
            }
        }
        6 | 7 => {
            let n23 = t[1] + t[2];
            let ok = if i == 6 { n23 > 0 && n45 > 0 } else { n23 < 0 && n45 < 0 };
            if !ok {
                return 0.0;
            }
            let r = n23 + n45;
            debug_assert!(r != 0);
            if r == 0 {
                return 0.0;
            }
            (n23 * n45) as f64 / r as f64
        }
        _ => unreachable!("multiplier index"),
    }
}

pub fn neg(t: &Tuple) -> Tuple {
    t.map(|x| -x)
}

/// `m_i` or `m_i^*(n, n_vec) = m_i(-n, -n_vec)` (multipliers are real).
pub fn multiplier(id: MultiplierId, sigma: Sigma, n: i64, t: &Tuple) -> Result<f64, NormalFormError> {
    if n != t.iter().sum::<i64>() {
        return Err(NormalFormError::ConstraintViolated { n, sum: t.iter().sum() });
    }
    Ok(multiplier_unchecked(id, sigma, n, t))
}

pub fn multiplier_unchecked(id: MultiplierId, sigma: Sigma, n: i64, t: &Tuple) -> f64 {
    let s = if id.starred {
        shape(id.i, -n, &neg(t))
    } else {
        shape(id.i, n, t)
    };
    kappa(id.i, sigma) * s
}

/// Compare exactly `|a| < eta^p |b|` style bounds in floating point on integer data.
fn lt(a: i64, eta_pow: f64, b: i64) -> bool {
    (a.abs() as f64) < eta_pow * b.abs() as f64
}

fn ge(a: i64, eta_pow: f64, b: i64) -> bool {
    !lt(a, eta_pow, b)
}

pub fn in_a1(t: &Tuple, eta: f64) -> bool {
    let [n1, n2, n3, n4, n5] = *t;
    let big24 = n2.abs().max(n4.abs());
    let n = n1 + n2 + n3 + n4 + n5;
    let e2 = eta * eta;
    let b1 = (n1 + n5) * (n3 + n5) == 0;
    let b2 = ge(big24, e2, n5.abs().min(n.abs()));
    let b3 = lt(big24, e2, n5) && lt(n5, eta, n1.abs().min(n3.abs())) && ge(n2 + n4, eta, n1 + n3);
    let b4 = lt(big24, e2, n5)
        && lt(n3, eta, n1.abs().min(n5.abs()))
        && ge(n2 + n4, eta, n1 + n5)
        && n5.abs() <= 2 * n1.abs();
    b1 || b2 || b3 || b4
}

pub fn in_a2(t: &Tuple, eta: f64) -> bool {
    let [n1, n2, n3, n4, n5] = *t;
    let big24 = n2.abs().max(n4.abs());
    (n1 + n3) * (n1 + n5) == 0 || ge(big24, eta, n3.abs().min(n5.abs()))
}

/// Whether `(n, t)` lies in the support of the hat part for multiplier family `i`.
pub fn hat_region(i: u8, n: i64, t: &Tuple, eta: f64) -> bool {
    let excluded = if i <= 5 { in_a1(t, eta) } else { in_a2(t, eta) };
    let p = phi_tuple(n, t).abs();
    let w = t[1].abs().max(t[3].abs());
    !excluded && p > w * w
}

/// `(hat, hathat)` with `hat + hathat = m` exactly.
pub fn hat_split(id: MultiplierId, sigma: Sigma, n: i64, t: &Tuple, eta: f64) -> (f64, f64) {
    let m = multiplier_unchecked(id, sigma, n, t);
    // the region is symmetric under negation, so the starred split uses the same test
    if hat_region(id.i, n, t, eta) {
        (m, 0.0)
    } else {
        (0.0, m)
    }
}

/// Half-width of the box of `(n_2, n_4)` that can meet the hat support on the window `N`.
/// Outside `A_1` forces `|n_2| v |n_4| < eta^2 N`, outside `A_2` forces `< eta N`.
pub fn hat_box(n_max: usize, eta: f64) -> i64 {
    let b = eta * 5.0 * n_max as f64;
    (b.ceil() as i64 - 1).max(0)
}
