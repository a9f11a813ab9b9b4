use std::io::BufReader;
use std::path::Path;

use mbolab::estimates::bounds::colored_real;
use mbolab::estimates::{
    campaign, case_emptiness_scan, counting_scan, fact_scan, large_mu_probe, replay, Curve, EstimateId, EstimateParams,
    EstimateReport, Fact,
};
use mbolab::gauge::{gauge_residual, weight_derivative_residual, RhsForm};
use mbolab::normal_form::scans::telescoping_check;
use mbolab::normal_form::terms::{first_generation, mc_term, second_generation};
use mbolab::normal_form::{frames_from_trajectory, EvalMode, Family, HatTable, LatticeFrame, McConfig, TermDescriptor};
use mbolab::solver::{conserved, conserved_prime, integrate, twin_probe};
use mbolab::{Equation, SpectralField, StepConfig, Trajectory};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::config::{Datum, RunConfig};
use crate::report::{envelope, report_path, write_json, LongCsv};
use crate::CliError;

pub fn datum_field(cfg: &RunConfig) -> SpectralField {
    match cfg.datum {
        Datum::TwoMode { a, b } => {
            let f = SpectralField::trig(cfg.n_max, 1, a, 0.0);
            f.add_field(&SpectralField::trig(cfg.n_max, 2, b, 0.0))
                .expect("same window")
                .assume_real()
        }
        Datum::Colored { amp, band, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            colored_real(band, 1.0, amp, &mut rng).with_n_max(cfg.n_max).assume_real()
        }
    }
}

fn read_trajectory(path: &Path) -> Result<Trajectory, CliError> {
    let f = std::fs::File::open(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(Trajectory::read_jsonl(BufReader::new(f))?)
}

#[derive(Serialize)]
struct SimulateSummary {
    trajectory: String,
    samples: usize,
    t_final: f64,
    mean_drift: f64,
    mass_rel_drift: f64,
    energy_rel_drift: f64,
    max_reality_defect: f64,
    final_hs_norm: f64,
}

fn rel(a: f64, b: f64) -> f64 {
    if a == b {
        0.0
    } else {
        (a - b).abs() / a.abs().max(b.abs())
    }
}

pub fn simulate(cfg: &RunConfig, explicit_report: Option<&Path>) -> Result<(), CliError> {
    let sub = "simulate";
    let u0 = datum_field(cfg);
    let step = StepConfig::new(cfg.equation, cfg.sigma, cfg.dt);
    let traj = integrate(&u0, &step, cfg.t_final, cfg.sample_every)?;
    let tpath = report_path(cfg, sub, "jsonl", cfg.output.trajectory.as_deref());
    let mut w = crate::report::create(&tpath)?;
    traj.write_jsonl(&mut w)?;
    drop(w);

    let triple = |u: &SpectralField| match cfg.equation {
        Equation::Mbo => conserved(u, cfg.sigma),
        Equation::MboPrime => conserved_prime(u, cfg.sigma),
    };
    let c0 = triple(&traj.states[0]);
    let mut csv = LongCsv::default();
    let (mut dmean, mut dmass, mut denergy, mut defect) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for (t, u) in traj.times.iter().zip(&traj.states) {
        let c = triple(u);
        dmean = dmean.max((c.mean - c0.mean).abs());
        dmass = dmass.max(rel(c.mass_l2, c0.mass_l2));
        denergy = denergy.max(rel(c.energy, c0.energy));
        defect = defect.max(u.reality_defect());
        csv.push("mean", *t, c.mean);
        csv.push("mass_l2", *t, c.mass_l2);
        csv.push("energy", *t, c.energy);
        csv.push("hs_norm", *t, u.sobolev_norm(cfg.s));
    }
    let summary = SimulateSummary {
        trajectory: tpath.display().to_string(),
        samples: traj.len(),
        t_final: cfg.t_final,
        mean_drift: dmean,
        mass_rel_drift: dmass,
        energy_rel_drift: denergy,
        max_reality_defect: defect,
        final_hs_norm: traj.final_state().sobolev_norm(cfg.s),
    };
    let json = report_path(cfg, sub, "json", explicit_report);
    write_json(&json, &envelope(sub, cfg, &summary))?;
    csv.write(&report_path(cfg, sub, "csv", None), &cfg.hash())?;
    println!(
        "simulate: {} samples to T = {}; drift mean {:.3e}, mass {:.3e}, energy {:.3e} -> {}",
        summary.samples,
        cfg.t_final,
        dmean,
        dmass,
        denergy,
        json.display()
    );
    if dmean > 1e-12 * (1.0 + c0.mean.abs()) {
        return Err(CliError::Invariant(format!("mean drifted by {dmean:e}")));
    }
    if defect > 1e-12 * (1.0 + u0.max_abs()) {
        return Err(CliError::Invariant(format!("reality defect {defect:e}")));
    }
    Ok(())
}

#[derive(Serialize)]
struct GaugeSummary {
    input: String,
    samples_checked: usize,
    s_index: f64,
    max_residual: f64,
    /// Median of `log2(residual(2h) / residual(h))`.
    residual_order: f64,
    /// Median of `residual(h) / h^2`.
    residual_constant: f64,
    weight_max_residual: Vec<(i32, f64)>,
    weight_order: Vec<(i32, f64)>,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.retain(|x| x.is_finite());
    if v.is_empty() {
        return f64::NAN;
    }
    v.sort_by(|a, b| a.total_cmp(b));
    v[v.len() / 2]
}

pub fn gauge_check(cfg: &RunConfig, explicit_report: Option<&Path>) -> Result<(), CliError> {
    let sub = "gauge-check";
    let input = cfg.output.input.as_deref().expect("validated");
    let traj = read_trajectory(input)?;
    if traj.len() < 5 {
        return Err(CliError::Config("gauge-check needs at least 5 samples".into()));
    }
    let h = traj.sample_dt();
    let sp = cfg.s - 1.0;
    let lo = 2;
    let hi = traj.len() - 3;
    let pts = cfg.gauge.points.min(hi - lo + 1);
    let ks: Vec<usize> = (0..pts)
        .map(|i| if pts == 1 { lo } else { lo + i * (hi - lo) / (pts - 1) })
        .collect();
    let mut csv = LongCsv::default();
    let mut max_res = 0.0f64;
    let mut orders = Vec::new();
    let mut consts = Vec::new();
    for &k in &ks {
        let r1 = gauge_residual(&traj, k, 1, RhsForm::Substituted, sp)?;
        let r2 = gauge_residual(&traj, k, 2, RhsForm::Substituted, sp)?;
        let t = traj.times[k];
        csv.push("residual_h", t, r1);
        csv.push("residual_2h", t, r2);
        max_res = max_res.max(r1);
        orders.push((r2 / r1).log2());
        consts.push(r1 / (h * h));
    }
    let mut wmax = Vec::new();
    let mut word = Vec::new();
    for kexp in [-3, -1, 1, 3] {
        let mut m = 0.0f64;
        let mut o = Vec::new();
        for &k in &ks {
            let r1 = weight_derivative_residual(&traj, k, 1, kexp, sp)?;
            let r2 = weight_derivative_residual(&traj, k, 2, kexp, sp)?;
            csv.push(format!("weight_residual_k{kexp}"), traj.times[k], r1);
            m = m.max(r1);
            o.push((r2 / r1).log2());
        }
        wmax.push((kexp, m));
        word.push((kexp, median(o)));
    }
    let summary = GaugeSummary {
        input: input.display().to_string(),
        samples_checked: ks.len(),
        s_index: sp,
        max_residual: max_res,
        residual_order: median(orders),
        residual_constant: median(consts),
        weight_max_residual: wmax,
        weight_order: word,
    };
    let csv_path = report_path(cfg, sub, "csv", explicit_report);
    csv.write(&csv_path, &cfg.hash())?;
    write_json(&report_path(cfg, sub, "json", None), &envelope(sub, cfg, &summary))?;
    println!(
        "gauge-check: {} points, max residual {:.3e} in H^{:.2}, observed order {:.2} -> {}",
        summary.samples_checked,
        max_res,
        sp,
        summary.residual_order,
        csv_path.display()
    );
    if !max_res.is_finite() {
        return Err(CliError::Numerical("non-finite gauge residual".into()));
    }
    Ok(())
}

#[derive(Serialize)]
struct NfEntry {
    family: Family,
    #[serde(rename = "J")]
    j: usize,
    norm_l2s: f64,
    /// `norm / norm of the same family one generation earlier` (`N^{(1)}` for `J = 1`).
    ratio: f64,
    residual: Option<f64>,
    stderr: Option<f64>,
}

#[derive(Serialize)]
struct NfSummary {
    input: String,
    frames: usize,
    n_lattice: usize,
    telescoping: Option<mbolab::normal_form::scans::TelescopingReport>,
    entries: Vec<NfEntry>,
}

/// `sup_t ||term||_{l^2_s}` per family for generations `1..=j_max` by exact evaluation.
fn exact_norms(frames: &[LatticeFrame], table: &HatTable, m: f64, s: f64, j_max: usize) -> Result<(f64, [[f64; 2]; 5]), CliError> {
    let mut sup = [[0.0f64; 2]; 5];
    let mut n1 = 0.0f64;
    for f in frames {
        let g1 = first_generation(f, table, m)?;
        n1 = n1.max(g1.n1_full.sobolev_norm(s));
        let one = [&g1.resonant, &g1.boundary, &g1.weight_derivative, &g1.remainder, &g1.next];
        for q in 0..5 {
            sup[q][0] = sup[q][0].max(one[q].sobolev_norm(s));
        }
        if j_max >= 2 {
            let g2 = second_generation(f, table, m, &g1)?;
            let two = [&g2.resonant, &g2.boundary, &g2.weight_derivative, &g2.remainder, &g2.next];
            for q in 0..5 {
                sup[q][1] = sup[q][1].max(two[q].sobolev_norm(s));
            }
        }
    }
    Ok((n1, sup))
}

fn safe_ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

pub fn nf_expand(cfg: &RunConfig, explicit_report: Option<&Path>) -> Result<(), CliError> {
    let sub = "nf-expand";
    let nf = &cfg.nf;
    let input = cfg.output.input.as_deref().expect("validated");
    let traj = read_trajectory(input)?;
    let frames = frames_from_trajectory(&traj, nf.n_lattice, nf.t_end, nf.stride)?;
    if frames.len() < 2 {
        return Err(CliError::Config("the telescoping window holds fewer than two frames".into()));
    }
    let table = HatTable::build(nf.n_lattice, cfg.eta, traj.sigma);
    let mc = McConfig {
        samples_per_mode: nf.samples,
        batches: nf.batches,
        seed: cfg.seed,
    };
    let s = cfg.s;
    let telescoping = if nf.j <= 2 {
        let use_mc = (nf.j == 2 && nf.mode == EvalMode::MonteCarlo).then_some(&mc);
        Some(telescoping_check(nf.j, &frames, &table, cfg.m, s, use_mc)?)
    } else {
        None
    };
    let residual = telescoping.as_ref().map(|r| r.residual);
    let mut entries = Vec::new();
    let fams = Family::all();
    let exact_j = nf.j.min(2);
    let (n1, sup) = exact_norms(&frames, &table, cfg.m, s, exact_j)?;
    if nf.mode == EvalMode::Exact {
        for (q, fam) in fams.iter().enumerate() {
            let norm = sup[q][nf.j - 1];
            let prev = if nf.j == 1 { n1 } else { sup[q][0] };
            entries.push(NfEntry {
                family: *fam,
                j: nf.j,
                norm_l2s: norm,
                ratio: safe_ratio(norm, prev),
                residual,
                stderr: None,
            });
        }
    } else {
        let k = nf.mc_frames.min(frames.len());
        let picks: Vec<&LatticeFrame> = (0..k)
            .map(|i| &frames[if k == 1 { frames.len() - 1 } else { i * (frames.len() - 1) / (k - 1) }])
            .collect();
        for (q, fam) in fams.iter().enumerate() {
            if *fam == Family::Next && nf.j == 3 {
                continue;
            }
            let desc = TermDescriptor::new(*fam, nf.j, cfg.m, cfg.eta)?;
            let mut best = (0.0f64, 0.0f64);
            for f in &picks {
                let est = mc_term(&desc, &table, std::slice::from_ref(*f), &mc, false)?;
                let v = est.mean.sobolev_norm(s);
                if v > best.0 {
                    best = (v, est.stderr_norm(s));
                }
            }
            let prev = if nf.j == 1 { n1 } else { sup[q][nf.j - 2] };
            entries.push(NfEntry {
                family: *fam,
                j: nf.j,
                norm_l2s: best.0,
                ratio: safe_ratio(best.0, prev),
                residual,
                stderr: Some(best.1),
            });
        }
    }
    let summary = NfSummary {
        input: input.display().to_string(),
        frames: frames.len(),
        n_lattice: nf.n_lattice,
        telescoping,
        entries,
    };
    let path = report_path(cfg, sub, "json", explicit_report);
    write_json(&path, &envelope(sub, cfg, &summary))?;
    let mut csv = LongCsv::default();
    for e in &summary.entries {
        csv.push(format!("norm_{}", e.family.label()), e.j as f64, e.norm_l2s);
    }
    csv.write(&report_path(cfg, sub, "csv", None), &cfg.hash())?;
    match residual {
        Some(r) => println!(
            "nf-expand: J = {}, M = {}, {} frames, telescoping residual {:.3e} -> {}",
            nf.j,
            cfg.m,
            summary.frames,
            r,
            path.display()
        ),
        None => println!("nf-expand: J = {}, M = {} (Monte-Carlo) -> {}", nf.j, cfg.m, path.display()),
    }
    if residual.is_some_and(|r| !r.is_finite()) {
        return Err(CliError::Numerical("non-finite telescoping residual".into()));
    }
    Ok(())
}

pub fn verify_estimates(cfg: &RunConfig, explicit_report: Option<&Path>) -> Result<(), CliError> {
    let sub = "verify-estimates";
    let e = &cfg.estimates;
    let params = EstimateParams::new(cfg.s, Some(cfg.delta()), cfg.eta)?;
    let ids: Vec<EstimateId> = if e.id == "all" {
        EstimateId::all().to_vec()
    } else {
        vec![e.id.parse()?]
    };
    let mut reports: Vec<EstimateReport> = Vec::new();
    let mut csv = LongCsv::default();
    let mut bad = Vec::new();
    for id in ids {
        let rep = campaign(id, &params, &e.sizes, e.trials, cfg.seed)?;
        for w in &rep.witness {
            let again = replay(id, &params, w);
            if !(again == w.ratio || (again - w.ratio).abs() <= 1e-12 * w.ratio.abs()) {
                bad.push(format!("{id} N={}: {} vs {again}", w.n_max, w.ratio));
            }
        }
        for (n, r) in rep.lattice_sizes.iter().zip(&rep.worst_ratio) {
            csv.push(format!("worst_ratio:{id}"), *n as f64, *r);
        }
        println!("verify-estimates: {id:<10} worst {:?} slope {:.3}", rep.worst_ratio, rep.slope);
        reports.push(rep);
    }
    let path = report_path(cfg, sub, "json", explicit_report);
    write_json(&path, &envelope(sub, cfg, &reports))?;
    csv.write(&report_path(cfg, sub, "csv", None), &cfg.hash())?;
    println!("verify-estimates -> {}", path.display());
    if !bad.is_empty() {
        return Err(CliError::Invariant(format!("witness replay mismatch: {}", bad.join("; "))));
    }
    Ok(())
}

#[derive(Serialize)]
struct CountSummary {
    scan: mbolab::estimates::CountReport,
    large_mu: Option<mbolab::estimates::counting::LargeMuProbe>,
    facts: Vec<mbolab::estimates::FactScan>,
    emptiness: Option<mbolab::estimates::EmptinessReport>,
}

pub fn count_lemma(cfg: &RunConfig, explicit_report: Option<&Path>) -> Result<(), CliError> {
    let sub = "count-lemma";
    let c = &cfg.counting;
    let k_max = (c.rmax as f64).log2().floor() as u32;
    let scan = counting_scan(c.curve, k_max, c.extra_centers, cfg.seed)?;
    let mut csv = LongCsv::default();
    for (r, n) in scan.r_values.iter().zip(&scan.max_counts) {
        csv.push("max_count", *r as f64, *n as f64);
    }
    let large_mu = if c.curve == Curve::Hyperbola && c.probes > 0 {
        Some(large_mu_probe(c.probes, cfg.seed)?)
    } else {
        None
    };
    let mut facts = Vec::new();
    if c.fact_k_max > 0 {
        for which in [Fact::Fact1, Fact::Fact2] {
            let f = fact_scan(which, c.fact_k_max, c.fact_configs, cfg.seed)?;
            for (r, n) in f.r_values.iter().zip(&f.max_counts) {
                csv.push(format!("fact_max_count:{which:?}"), *r as f64, *n as f64);
            }
            facts.push(f);
        }
    }
    let emptiness = (c.emptiness_bound > 0).then(|| case_emptiness_scan(c.emptiness_bound, cfg.eta));
    let summary = CountSummary {
        scan,
        large_mu,
        facts,
        emptiness,
    };
    let path = report_path(cfg, sub, "csv", explicit_report);
    csv.write(&path, &cfg.hash())?;
    write_json(&report_path(cfg, sub, "json", None), &envelope(sub, cfg, &summary))?;
    println!(
        "count-lemma: {:?} max counts {:?}, slope {:.3} -> {}",
        c.curve,
        summary.scan.max_counts,
        summary.scan.slope,
        path.display()
    );
    let mut bad = Vec::new();
    if let Some(p) = &summary.large_mu {
        println!("count-lemma: large-mu probe max count {} over {} probes", p.max_count, p.probes);
        if p.violations > 0 {
            bad.push(format!("{} large-mu probes exceed 2 points", p.violations));
        }
    }
    for f in &summary.facts {
        if f.mismatches > 0 {
            bad.push(format!("{:?}: {} reduction mismatches", f.fact, f.mismatches));
        }
    }
    if let Some(e) = &summary.emptiness {
        println!("count-lemma: emptiness scan {} ambient tuples, {} hits", e.ambient, e.hits);
        if e.hits > 0 {
            bad.push(format!("{} tuples in the empty case region", e.hits));
        }
    }
    if !bad.is_empty() {
        return Err(CliError::Invariant(bad.join("; ")));
    }
    Ok(())
}

pub fn twin(cfg: &RunConfig, explicit_report: Option<&Path>) -> Result<(), CliError> {
    let sub = "twin-probe";
    let u0 = datum_field(cfg);
    let a = StepConfig::new(cfg.equation, cfg.sigma, cfg.dt);
    let b = StepConfig::new(cfg.equation, cfg.sigma, cfg.dt / 2.0);
    let rep = twin_probe(&u0, &a, &b, cfg.twin.horizon, cfg.s, cfg.twin.samples)?;
    let mut csv = LongCsv::default();
    for (t, g) in rep.times.iter().zip(&rep.gaps) {
        csv.push("gap", *t, *g);
    }
    let path = report_path(cfg, sub, "json", explicit_report);
    write_json(&path, &envelope(sub, cfg, &rep))?;
    csv.write(&report_path(cfg, sub, "csv", None), &cfg.hash())?;
    println!(
        "twin-probe: divergence {:.3e}, fine-scheme error {:.3e}, ratio {:.2} -> {}",
        rep.divergence,
        rep.fine_error_estimate,
        rep.ratio,
        path.display()
    );
    Ok(())
}
