//! Telescoping identities and decay of the term families along a trajectory.

use serde::{Deserialize, Serialize};

use super::frame::LatticeFrame;
use super::terms::{
    first_generation, mc_term, second_generation, Family, FirstGeneration, HatTable, McConfig, SecondGeneration,
    TermDescriptor,
};
use super::NormalFormError;
use crate::spectral::SpectralField;

/// Composite trapezoid of equally spaced samples.
pub fn trapezoid(values: &[SpectralField], h: f64) -> SpectralField {
    let k = values.len();
    let mut acc = SpectralField::zeros(values[0].n_max());
    for (j, v) in values.iter().enumerate() {
        let w = if j == 0 || j + 1 == k { 0.5 * h } else { h };
        acc += &v.scale_re(w);
    }
    acc
}

/// `(T_h - T_{2h}) / 3`, the leading trapezoid error; `None` for an odd number of intervals.
pub fn trapezoid_error(values: &[SpectralField], h: f64) -> Option<SpectralField> {
    let k = values.len();
    if k < 3 || (k - 1) % 2 != 0 {
        return None;
    }
    let coarse: Vec<SpectralField> = values.iter().step_by(2).cloned().collect();
    let fine = trapezoid(values, h);
    Some((&fine - &trapezoid(&coarse, 2.0 * h)).scale_re(1.0 / 3.0))
}

fn norm(f: &SpectralField, s: f64) -> f64 {
    f.sobolev_norm(s)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TelescopingReport {
    pub j: usize,
    pub m: f64,
    pub s: f64,
    pub t: f64,
    pub h: f64,
    pub frames: usize,
    /// `|| omega|_0^t ||`.
    pub lhs_norm: f64,
    /// Residual of `omega|_0^t = int (full lattice right side)`.
    pub residual_j0: f64,
    /// Residual of the generation-`J` identity.
    pub residual: f64,
    /// Trapezoid error estimate for the integrals in the identity.
    pub quadrature_error: Option<f64>,
    /// For `J = 2`: `|| int N^(2) - (N_0^(2)|_0^t + int (N_R^(2) + N_1^(2) + R^(2) + N^(3)_mc)) ||`.
    pub decomposition_gap_mc: Option<f64>,
    /// Same with the exact `N^(3)`.
    pub decomposition_gap_exact: Option<f64>,
    pub mc_stderr: Option<f64>,
    pub mc_support: Option<usize>,
}

fn boundary_diff(first: &SpectralField, last: &SpectralField) -> SpectralField {
    last - first
}

/// Checks the integrated identity after `J` reductions on `frames` (equally spaced, starting at the lower limit).
pub fn telescoping_check(
    j: usize,
    frames: &[LatticeFrame],
    table: &HatTable,
    m: f64,
    s: f64,
    mc: Option<&McConfig>,
) -> Result<TelescopingReport, NormalFormError> {
    if !(1..=2).contains(&j) {
        return Err(NormalFormError::GenerationTooLarge(j));
    }
    if frames.len() < 2 {
        return Err(NormalFormError::ModeUnsupported("telescoping needs two frames".into()));
    }
    let h = frames[1].t() - frames[0].t();
    let k = frames.len();
    let g1: Vec<FirstGeneration> = frames
        .iter()
        .map(|f| first_generation(f, table, m))
        .collect::<Result<_, _>>()?;
    let lhs = boundary_diff(&frames[0].state.omega, &frames[k - 1].state.omega);

    let rhs_full: Vec<SpectralField> = g1.iter().map(|g| g.rhs.clone()).collect();
    let residual_j0 = norm(&(&lhs - &trapezoid(&rhs_full, h)), s);

    let mut integrand: Vec<SpectralField> = g1
        .iter()
        .map(|g| {
            let mut x = &g.resonant + &g.weight_derivative;
            x += &g.r0;
            x += &g.remainder;
            x
        })
        .collect();
    let mut boundary = boundary_diff(&g1[0].boundary, &g1[k - 1].boundary);
    let mut report = TelescopingReport {
        j,
        m,
        s,
        t: frames[k - 1].t() - frames[0].t(),
        h,
        frames: k,
        lhs_norm: norm(&lhs, s),
        residual_j0,
        residual: 0.0,
        quadrature_error: None,
        decomposition_gap_mc: None,
        decomposition_gap_exact: None,
        mc_stderr: None,
        mc_support: None,
    };
    if j == 1 {
        for (x, g) in integrand.iter_mut().zip(&g1) {
            *x += &g.next;
        }
    } else {
        let g2: Vec<SecondGeneration> = frames
            .iter()
            .zip(&g1)
            .map(|(f, g)| second_generation(f, table, m, g))
            .collect::<Result<_, _>>()?;
        let b2 = boundary_diff(&g2[0].boundary, &g2[k - 1].boundary);
        boundary += &b2;
        let families: Vec<SpectralField> = g2
            .iter()
            .map(|g| {
                let mut x = &g.resonant + &g.weight_derivative;
                x += &g.remainder;
                x
            })
            .collect();
        for ((x, f), g) in integrand.iter_mut().zip(&families).zip(&g2) {
            *x += f;
            *x += &g.next;
        }
        // N^(2) standalone against its decomposition
        let standalone = trapezoid(&g1.iter().map(|g| g.next.clone()).collect::<Vec<_>>(), h);
        let split = &b2 + &trapezoid(&families, h);
        let n3_exact = trapezoid(&g2.iter().map(|g| g.next.clone()).collect::<Vec<_>>(), h);
        report.decomposition_gap_exact = Some(norm(&(&standalone - &(&split + &n3_exact)), s));
        if let Some(cfg) = mc {
            let desc = TermDescriptor::new(Family::Next, 2, m, table.eta)?;
            let est = mc_term(&desc, table, frames, cfg, true)?;
            report.decomposition_gap_mc = Some(norm(&(&standalone - &(&split + &est.mean)), s));
            report.mc_stderr = Some(est.stderr_norm(s));
            report.mc_support = Some(est.support_samples);
        }
    }
    let rhs = &boundary + &trapezoid(&integrand, h);
    report.residual = norm(&(&lhs - &rhs), s);
    report.quadrature_error = trapezoid_error(&integrand, h).map(|e| norm(&e, s));
    Ok(report)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayRow {
    pub family: Family,
    pub j: usize,
    pub m: f64,
    /// `sup_t || term ||_{l^2_s}` over the frames.
    pub norm: f64,
    /// Monte-Carlo error scale when `j = 3`.
    pub stderr: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayFit {
    pub family: Family,
    pub m: f64,
    /// `exp` of the least-squares slope of `log norm` against `J`.
    pub ratio: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DecayReport {
    pub s: f64,
    pub rows: Vec<DecayRow>,
    pub fits: Vec<DecayFit>,
}

fn slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let lx: Vec<f64> = xs.iter().map(|x| x.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|y| y.ln()).collect();
    slope(&lx, &ly)
}

/// Per-family, per-generation norms for each threshold; `J = 3` only when `mc` is given.
pub fn decay_scan(
    frames: &[LatticeFrame],
    table: &HatTable,
    ms: &[f64],
    s: f64,
    mc: Option<&McConfig>,
) -> Result<DecayReport, NormalFormError> {
    let mut rows = Vec::new();
    let mut fits = Vec::new();
    let fams = Family::all();
    for &m in ms {
        let mut sup = [[0.0f64; 2]; 5];
        for f in frames {
            let g1 = first_generation(f, table, m)?;
            let g2 = second_generation(f, table, m, &g1)?;
            let one = [&g1.resonant, &g1.boundary, &g1.weight_derivative, &g1.remainder, &g1.next];
            let two = [&g2.resonant, &g2.boundary, &g2.weight_derivative, &g2.remainder, &g2.next];
            for q in 0..5 {
                sup[q][0] = sup[q][0].max(norm(one[q], s));
                sup[q][1] = sup[q][1].max(norm(two[q], s));
            }
        }
        for (q, fam) in fams.iter().enumerate() {
            let mut js = vec![1.0, 2.0];
            let mut logs = vec![sup[q][0], sup[q][1]];
            for jj in 0..2 {
                rows.push(DecayRow {
                    family: *fam,
                    j: jj + 1,
                    m,
                    norm: sup[q][jj],
                    stderr: None,
                });
            }
            if let (Some(cfg), true) = (mc, *fam != Family::Next) {
                let desc = TermDescriptor::new(*fam, 3, m, table.eta)?;
                let mut best = (0.0f64, 0.0f64);
                for f in frames {
                    let est = mc_term(&desc, table, std::slice::from_ref(f), cfg, false)?;
                    let v = norm(&est.mean, s);
                    if v > best.0 {
                        best = (v, est.stderr_norm(s));
                    }
                }
                rows.push(DecayRow {
                    family: *fam,
                    j: 3,
                    m,
                    norm: best.0,
                    stderr: Some(best.1),
                });
                js.push(3.0);
                logs.push(best.0);
            }
            let ratio = if logs.iter().all(|v| *v > 0.0) {
                let ly: Vec<f64> = logs.iter().map(|v| v.ln()).collect();
                slope(&js, &ly).exp()
            } else {
                0.0
            };
            fits.push(DecayFit { family: *fam, m, ratio });
        }
    }
    Ok(DecayReport { s, rows, fits })
}

/// Smallest `M = 2^k` (`k = 1..=k_max`) for which every fitted ratio in the exact range is below `1/2`.
pub fn auto_threshold(
    frames: &[LatticeFrame],
    table: &HatTable,
    s: f64,
    k_max: u32,
) -> Result<Option<f64>, NormalFormError> {
    for k in 1..=k_max {
        let m = 2f64.powi(k as i32);
        let rep = decay_scan(frames, table, &[m], s, None)?;
        if rep.fits.iter().filter(|f| f.family != Family::Next).all(|f| f.ratio < 0.5) {
            return Ok(Some(m));
        }
    }
    Ok(None)
}
