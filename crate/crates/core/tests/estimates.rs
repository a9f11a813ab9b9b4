mod common;

use common::rng;
use mbolab::estimates::counting::{max_count, random_fact_config};
use mbolab::estimates::quintic::{
    draw_inputs, kernel, lhs_brute, ratio_from_output, rhs, weighted_norm, Ensemble, EstimatePlan,
};
use mbolab::estimates::*;
use mbolab::normal_form::MultiplierId;
use mbolab::solver::Sigma;
use mbolab::spectral::japanese;
use proptest::prelude::*;
use rand::Rng;

fn params(eta: f64) -> EstimateParams {
    EstimateParams::new(0.6, None, eta).unwrap()
}

#[test]
fn params_validation() {
    assert!(matches!(EstimateParams::new(0.4, None, 0.1), Err(EstimateError::InvalidRegularity(_))));
    assert!(matches!(EstimateParams::new(0.6, Some(0.7), 0.1), Err(EstimateError::InvalidDelta(_))));
    assert!(matches!(EstimateParams::new(0.6, None, 1.5), Err(EstimateError::InvalidEta(_))));
    let p = params(0.1);
    assert!((p.delta - 0.025).abs() < 1e-15);
    assert!(matches!("matome-9".parse::<EstimateId>(), Err(EstimateError::UnknownId(_))));
    for id in EstimateId::all() {
        assert_eq!(id.tag().parse::<EstimateId>().unwrap(), id);
    }
    assert!(matches!(verify_estimate(EstimateId::Five0, &p, 0, 3, 1), Err(EstimateError::BadLattice(0))));
    assert!(matches!(verify_estimate(EstimateId::Five0, &p, 4, 0, 1), Err(EstimateError::NoTrials)));
}

#[test]
fn plan_matches_direct_summation() {
    let n = 7;
    let p = params(0.3);
    let mut r = rng(20);
    for id in EstimateId::all() {
        for v in id.variants() {
            let plan = EstimatePlan::new(id, v, &p, n);
            let x = draw_inputs(n, p.s, p.eta, Ensemble::Uniform, &mut r);
            let fast = plan.eval(&x);
            let slow = lhs_brute(id, v, &p, &x);
            let scale = slow.iter().fold(0.0f64, |a, b| a.max(b.abs()));
            assert!(scale > 0.0, "{id} {v:?} has empty support");
            for (a, b) in fast.iter().zip(&slow) {
                assert!((a - b).abs() <= 1e-12 * scale, "{id} {v:?}: {a} vs {b}");
            }
        }
    }
}

#[test]
fn zero_inputs_give_zero_ratio() {
    let p = params(0.1);
    let x = QuinticInputs::zeros(6);
    for id in EstimateId::all() {
        for v in id.variants() {
            let out = EstimatePlan::new(id, v, &p, 6).eval(&x);
            assert_eq!(ratio_from_output(id, &p, &x, &out), 0.0);
        }
    }
}

#[test]
fn single_spike_matome1() {
    let n_max = 10usize;
    let p = params(0.3);
    let mut r = rng(21);
    let mut done = 0;
    while done < 20 {
        let t: [i64; 5] = std::array::from_fn(|_| r.gen_range(-3i64..=3) * 3);
        let n: i64 = t.iter().sum();
        if n.abs() > n_max as i64 {
            continue;
        }
        let v = Some(MultiplierId::new(r.gen_range(1..=7), r.gen()).unwrap());
        let k = kernel(EstimateId::Matome1, v, &p, n, &t);
        if k == 0.0 {
            continue;
        }
        let mut x = QuinticInputs::zeros(n_max);
        let o = n_max as i64;
        x.w1[(t[0] + o) as usize] = 1.0;
        x.w2[(t[1] + o) as usize] = 1.0;
        x.w3[(t[2] + o) as usize] = 1.0;
        x.w4[(t[3] + o) as usize] = 1.0;
        x.w5[(t[4] + o) as usize] = 1.0;
        let out = EstimatePlan::new(EstimateId::Matome1, v, &p, n_max).eval(&x);
        for (i, y) in out.iter().enumerate() {
            let want = if i as i64 - o == n { k } else { 0.0 };
            assert!((y - want).abs() < 1e-12 * k, "{t:?}");
        }
        let by_hand = japanese(n).powf(p.s) * k / t.iter().map(|m| japanese(*m).powf(p.s)).product::<f64>();
        let ratio = ratio_from_output(EstimateId::Matome1, &p, &x, &out);
        assert!((ratio - by_hand).abs() < 1e-12 * by_hand);
        done += 1;
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn ratio_is_homogeneous(seed in 0u64..1000, idx in 0usize..10, lambda in 0.1f64..10.0) {
        let id = EstimateId::all()[idx];
        let p = params(0.3);
        let mut r = rng(seed);
        let x = draw_inputs(6, p.s, p.eta, Ensemble::of_trial(seed as usize), &mut r);
        for v in id.variants() {
            let plan = EstimatePlan::new(id, v, &p, 6);
            let a = ratio_from_output(id, &p, &x, &plan.eval(&x));
            let y = x.scaled(lambda);
            let b = ratio_from_output(id, &p, &y, &plan.eval(&y));
            prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-300));
        }
    }

    #[test]
    fn lhs_monotone_in_inputs(seed in 0u64..1000, idx in 0usize..10) {
        let id = EstimateId::all()[idx];
        let p = params(0.3);
        let mut r = rng(seed);
        let x = draw_inputs(6, p.s, p.eta, Ensemble::Uniform, &mut r);
        let mut y = x.clone();
        for v in [&mut y.w1, &mut y.w2, &mut y.w3, &mut y.w4, &mut y.w5] {
            for z in v.iter_mut() {
                *z += r.gen::<f64>() * 0.5;
            }
        }
        for v in id.variants() {
            let plan = EstimatePlan::new(id, v, &p, 6);
            let a = plan.eval(&x);
            let b = plan.eval(&y);
            for (s, t) in a.iter().zip(&b) {
                prop_assert!(*t >= *s - 1e-12 * s.abs().max(1.0));
            }
        }
    }

    #[test]
    fn weighted_norm_monotone_in_index(seed in 0u64..1000, r1 in -2.0f64..2.0, dr in 0.0f64..2.0) {
        let mut r = rng(seed);
        let v: Vec<f64> = (0..13).map(|_| r.gen::<f64>()).collect();
        prop_assert!(weighted_norm(&v, 6, r1 + dr) >= weighted_norm(&v, 6, r1));
    }
}

#[test]
fn witness_replays() {
    let p = params(2f64.powi(-10));
    for id in [EstimateId::Matome2, EstimateId::Five1, EstimateId::Six2] {
        let rep = campaign(id, &p, &[4, 8], 6, 5).unwrap();
        assert_eq!(rep.worst_ratio.len(), 2);
        for w in &rep.witness {
            let again = replay(id, &p, w);
            assert!((again - w.ratio).abs() <= 1e-12 * w.ratio.max(1e-300));
        }
        let json = serde_json::to_string(&rep).unwrap();
        let back: EstimateReport = serde_json::from_str(&json).unwrap();
        assert_eq!(back.worst_ratio, rep.worst_ratio);
        assert!(json.contains(id.tag()));
    }
}

#[test]
fn rhs_positive_for_positive_inputs() {
    let p = params(0.1);
    let mut r = rng(22);
    let x = draw_inputs(5, p.s, p.eta, Ensemble::Colored, &mut r);
    for id in EstimateId::all() {
        assert!(rhs(id, &p, &x) > 0.0);
    }
}

#[test]
fn counting_examples() {
    assert_eq!(count_ellipse(0, 0, 4, 10).unwrap(), 6);
    assert_eq!(count_ellipse(0, 0, 0, 10).unwrap(), 1);
    assert_eq!(count_ellipse(0, 0, 2, 10).unwrap(), 0);
    assert_eq!(count_hyperbola(0, 0, 6, 10).unwrap(), 8);
    assert_eq!(count_hyperbola(0, 0, 6, 5).unwrap(), 4);
    assert_eq!(count_hyperbola(0, 0, 12, 10).unwrap(), 8);
    assert_eq!(count_hyperbola(1, -1, 6, 10).unwrap(), 8);
    assert!(matches!(count_hyperbola(0, 0, 0, 10), Err(EstimateError::ZeroMu)));
    assert!(matches!(count_ellipse(0, 0, 1, 1), Err(EstimateError::BadRadius(1))));
    assert_eq!("ellipse".parse::<Curve>().unwrap(), Curve::Ellipse);
    assert!("parabola".parse::<Curve>().is_err());
}

#[test]
fn max_count_matches_pointwise_counts() {
    let mut r = rng(23);
    for _ in 0..10 {
        let rad = r.gen_range(2..=12);
        let c1 = r.gen_range(-rad..=rad);
        let c2 = r.gen_range(-rad..=rad);
        for curve in [Curve::Ellipse, Curve::Hyperbola] {
            let (best, mu) = max_count(curve, c1, c2, rad).unwrap();
            let range = 3 * (2 * rad) * (2 * rad) + (2 * rad) * (2 * rad);
            let count = |m: i64| match curve {
                Curve::Ellipse => count_ellipse(c1, c2, m, rad).unwrap(),
                Curve::Hyperbola if m == 0 => 0,
                Curve::Hyperbola => count_hyperbola(c1, c2, m, rad).unwrap(),
            };
            assert_eq!(count(mu), best);
            let brute = (-range..=range).map(count).max().unwrap();
            assert_eq!(brute, best);
        }
    }
}

#[test]
fn counting_scan_small() {
    let rep = counting_scan(Curve::Hyperbola, 5, 2, 1).unwrap();
    assert_eq!(rep.r_values, vec![2, 4, 8, 16, 32]);
    assert!(rep.max_counts.windows(2).all(|w| w[1] >= w[0]));
    for (&(c1, c2, mu), &c) in rep.witnesses.iter().zip(&rep.max_counts).skip(1) {
        let rad = rep.r_values[rep.max_counts.iter().position(|x| *x == c).unwrap()];
        assert!(count_hyperbola(c1, c2, mu, rad).unwrap() <= c);
    }
    assert!(rep.slope.is_finite());
}

#[test]
fn large_mu_has_few_points() {
    let p = large_mu_probe(200, 3).unwrap();
    assert_eq!(p.probes, 200);
    assert!(p.max_count <= 4);
    assert_eq!(p.violations, 0);
}

#[test]
fn fact_reductions_agree() {
    let mut r = rng(24);
    for which in [Fact::Fact1, Fact::Fact2] {
        for rad in [2i64, 5, 16, 40] {
            for _ in 0..60 {
                let cfg = random_fact_config(which, rad, &mut r);
                let a = fact_check(which, &cfg).unwrap();
                assert!(a >= 1);
                assert_eq!(a, fact_check_reduced(which, &cfg).unwrap(), "{which:?} {cfg:?}");
            }
        }
        let scan = fact_scan(which, 5, 20, 2).unwrap();
        assert_eq!(scan.mismatches, 0);
    }
}

#[test]
fn unattainable_phase_has_no_solutions() {
    let mut r = rng(25);
    for which in [Fact::Fact1, Fact::Fact2] {
        let mut cfg = random_fact_config(which, 8, &mut r);
        cfg.phi_target = 1 << 50;
        assert_eq!(fact_check(which, &cfg).unwrap(), 0);
        assert_eq!(fact_check_reduced(which, &cfg).unwrap(), 0);
        cfg.restricted = [3, 3];
        assert!(matches!(fact_check(which, &cfg), Err(EstimateError::BadFactConfig)));
    }
}

#[test]
fn emptiness_scan() {
    let e = case_emptiness_scan(60, 2f64.powi(-10));
    assert!(e.ambient > 0);
    assert_eq!(e.hits, 0);
    let coarse = case_emptiness_scan(40, 0.5);
    assert!(coarse.hits > 0);
}

#[test]
fn bound_campaign_smoke() {
    for id in BoundId::all() {
        let rep = bound_campaign(id, 0.6, Sigma::Minus, &[8, 16], 4, 1).unwrap();
        assert!(rep.worst_ratio.iter().all(|r| r.is_finite() && *r >= 0.0), "{id:?} {rep:?}");
    }
    assert!(matches!(
        bound_campaign(BoundId::Gauge, 0.5, Sigma::Minus, &[8], 1, 1),
        Err(EstimateError::InvalidRegularity(_))
    ));
}
