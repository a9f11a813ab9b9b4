mod common;

use common::{max_diff, rng, two_mode};
use mbolab::normal_form::frame::phase;
use mbolab::normal_form::multiplier::{multiplier_unchecked, pattern, phi_tuple, shape};
use mbolab::normal_form::scans::{log_log_slope, telescoping_check, trapezoid, trapezoid_error};
use mbolab::normal_form::terms::{first_generation, mc_term, second_generation};
use mbolab::normal_form::tree::{cumulative, in_nonresonant, in_resonant, labelled_count, tree_count};
use mbolab::normal_form::*;
use mbolab::solver::{integrate, Equation, Sigma, StepConfig, Trajectory};
use mbolab::spectral::{SpectralField, C64, I};
use rand::Rng;
use std::sync::OnceLock;

const SIGMA: Sigma = Sigma::Minus;
const ETA: f64 = 0.0009765625;

fn trajectory() -> &'static Trajectory {
    static T: OnceLock<Trajectory> = OnceLock::new();
    T.get_or_init(|| {
        integrate(&two_mode(32, 0.5, 0.25), &StepConfig::new(Equation::MboPrime, SIGMA, 1e-4), 0.0064, 1).unwrap()
    })
}

fn frame(n: usize) -> LatticeFrame {
    let tr = trajectory();
    let k = tr.len() / 2;
    LatticeFrame::from_u(&tr.states[k], tr.times[k], SIGMA, n).unwrap()
}

fn id(i: u8, starred: bool) -> MultiplierId {
    MultiplierId::new(i, starred).unwrap()
}

#[test]
fn phase_examples() {
    assert_eq!(phi(2, 2, 1, -1), 0);
    assert_eq!(phi(7, 7, 0, 0), 0);
    assert_eq!(phi(-3, 1, 1, 1), -9 - 3);
}

#[test]
fn phase_identities_exhaustive() {
    use mbolab::estimates::{phi5_identity_scan, phi6_identity_scan};
    let a = phi5_identity_scan(30);
    assert!(a.checked > 0 && a.failures == 0, "{a:?}");
    let b = phi6_identity_scan(30);
    assert!(b.checked > 0 && b.failures == 0, "{b:?}");
}

#[test]
fn multiplier_errors_and_indicators() {
    assert!(matches!(MultiplierId::new(8, false), Err(NormalFormError::BadMultiplier(8))));
    assert!(matches!(
        multiplier(id(1, false), SIGMA, 3, &[1, 1, 1, 1, 1]),
        Err(NormalFormError::ConstraintViolated { n: 3, sum: 5 })
    ));
    for n in -5i64..=0 {
        let t = [n + 2, 0, 0, 0, -2];
        assert_eq!(multiplier(id(1, false), SIGMA, n, &t).unwrap(), 0.0);
    }
    // m_1 = c_1 n_45 on n > 0 > n_45
    let t = [5, 0, 1, -1, -2];
    assert_eq!(multiplier(id(1, false), SIGMA, 3, &t).unwrap(), 2.0 * -3.0 * SIGMA.value() * -1.0);
}

#[test]
fn m345_dominated_by_n45() {
    let b = 20i64;
    let mut checked = 0u64;
    for n1 in -b..=b {
        for n2 in -b..=b {
            for n3 in -b..=b {
                for n4 in -b..=b {
                    for n5 in -b..=b {
                        let t = [n1, n2, n3, n4, n5];
                        let n = t.iter().sum::<i64>();
                        let n45 = (n4 + n5).abs() as f64;
                        for i in 3..=5u8 {
                            let m = shape(i, n, &t).abs();
                            assert!(m <= 3.0 * n45 + 1e-12, "i={i} {t:?}");
                        }
                        checked += (n < 0 && n4 + n5 > 0) as u64;
                    }
                }
            }
        }
    }
    assert!(checked > 0);
}

#[test]
fn starred_is_negated_argument() {
    let mut r = rng(10);
    for _ in 0..2000 {
        let t: Tuple = std::array::from_fn(|_| r.gen_range(-30..=30));
        let n = t.iter().sum::<i64>();
        let neg = t.map(|x| -x);
        for i in 1..=7u8 {
            assert_eq!(
                multiplier(id(i, true), SIGMA, n, &t).unwrap(),
                multiplier(id(i, false), SIGMA, -n, &neg).unwrap()
            );
        }
    }
}

/// The exceptional sets transcribed branch by branch with exact integer arithmetic for `eta = 2^-k`.
fn a1_oracle(t: &Tuple, k: u32) -> bool {
    let [n1, n2, n3, n4, n5] = *t;
    let q = 1i64 << k;
    let big = n2.abs().max(n4.abs());
    let n = n1 + n2 + n3 + n4 + n5;
    let first = (n1 + n5) * (n3 + n5) == 0;
    let second = big * q * q >= n5.abs().min(n.abs());
    let small = big * q * q < n5.abs();
    let third = small && n5.abs() * q < n1.abs().min(n3.abs()) && (n2 + n4).abs() * q >= (n1 + n3).abs();
    let fourth = small
        && n3.abs() * q < n1.abs().min(n5.abs())
        && (n2 + n4).abs() * q >= (n1 + n5).abs()
        && n5.abs() <= 2 * n1.abs();
    first || second || third || fourth
}

fn a2_oracle(t: &Tuple, k: u32) -> bool {
    let [n1, n2, n3, n4, n5] = *t;
    let big = n2.abs().max(n4.abs());
    (n1 + n3) * (n1 + n5) == 0 || big * (1i64 << k) >= n3.abs().min(n5.abs())
}

#[test]
fn exceptional_sets_match_transcription() {
    assert!(in_a1(&[3, 0, 7, 0, -3], ETA));
    assert!(in_a2(&[4, 0, -4, 0, 9], ETA));
    let mut r = rng(11);
    let mut hits = [0usize; 2];
    for trial in 0..5000 {
        let k = [1u32, 2, 3, 10][trial % 4];
        let eta = 0.5f64.powi(k as i32);
        let scale = if trial % 2 == 0 { 1000 } else { 40 };
        let mut t: Tuple = std::array::from_fn(|_| r.gen_range(-scale..=scale));
        if trial % 3 == 0 {
            t[1] = r.gen_range(-3..=3);
            t[3] = r.gen_range(-3..=3);
        }
        assert_eq!(in_a1(&t, eta), a1_oracle(&t, k), "{t:?} eta=2^-{k}");
        assert_eq!(in_a2(&t, eta), a2_oracle(&t, k), "{t:?} eta=2^-{k}");
        hits[0] += in_a1(&t, eta) as usize;
        hits[1] += in_a2(&t, eta) as usize;
    }
    assert!(hits[0] > 0 && hits[0] < 5000 && hits[1] > 0 && hits[1] < 5000);
}

#[test]
fn hat_split_partition_exhaustive() {
    let b = 12i64;
    for eta in [ETA, 0.25] {
        for n1 in -b..=b {
            for n2 in -b..=b {
                for n3 in -b..=b {
                    for n4 in -b..=b {
                        for n5 in -b..=b {
                            let t = [n1, n2, n3, n4, n5];
                            let n = t.iter().sum::<i64>();
                            for mid in MultiplierId::all() {
                                let m = multiplier_unchecked(mid, SIGMA, n, &t);
                                let (h, hh) = hat_split(mid, SIGMA, n, &t, eta);
                                assert_eq!(h + hh, m);
                                assert!(h == 0.0 || hh == 0.0);
                                let w = n2.abs().max(n4.abs());
                                if phi_tuple(n, &t).abs() <= w * w {
                                    assert_eq!(h, 0.0);
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    let t = [3, 0, 7, 0, -3];
    let n = 7;
    assert!(in_a1(&t, ETA));
    let m = multiplier_unchecked(id(1, false), SIGMA, n, &t);
    assert_eq!(hat_split(id(1, false), SIGMA, n, &t, ETA), (0.0, m));
}

#[test]
fn trees() {
    for (j, want) in [(1, 1), (2, 3), (3, 15)] {
        let ts = enumerate_trees(j).unwrap();
        assert_eq!(ts.len(), want);
        assert_eq!(tree_count(j), want);
        for t in &ts {
            t.check_invariants().unwrap();
            assert_eq!(t.generation(), j);
            assert_eq!(t.parent_order.len(), j);
            assert_eq!(t.leaves().len(), 4 * j + 1);
            assert_eq!(t.even_leaves().len(), 2 * j);
            assert_eq!(t.odd_leaves().len(), 2 * j + 1);
            for (a, &p) in t.parent_order.iter().enumerate() {
                for &q in &t.parent_order[..a] {
                    assert!(!t.dominates(p, q));
                }
                let ch = t.nodes[p].children.unwrap();
                assert!(t.nodes[ch[1]].children.is_none() && t.nodes[ch[3]].children.is_none());
            }
        }
    }
    assert_eq!(labelled_count(2), 49 * 3);
    assert!(matches!(enumerate_trees(4), Err(NormalFormError::GenerationTooLarge(4))));
}

#[test]
fn index_function_phases() {
    let t = &enumerate_trees(2).unwrap()[0];
    let mut f = IndexFunction { n: vec![0; t.nodes.len()] };
    let mut r = rng(12);
    // assign leaves, then fill parents bottom-up
    for leaf in t.leaves() {
        f.n[leaf] = r.gen_range(-9..=9);
    }
    for &p in t.parent_order.iter().rev() {
        let ch = t.nodes[p].children.unwrap();
        f.n[p] = ch.iter().map(|&c| f.n[c]).sum();
    }
    f.check(t).unwrap();
    let ph = f.phases(t);
    assert_eq!(ph.len(), 2);
    f.n[t.parent_order[0]] += 1;
    assert!(f.check(t).is_err());
}

#[test]
fn resonance_regions_partition() {
    let m = 10.0;
    let b = 100i64;
    for a in -b..=b {
        assert!(in_resonant(&[a], m) ^ in_nonresonant(&[a], m));
        for c in -b..=b {
            let nr1 = in_nonresonant(&[a], m);
            let r2 = in_resonant(&[a, c], m);
            let nr2 = in_nonresonant(&[a, c], m);
            assert!(!(r2 && nr2));
            assert_eq!(r2 || nr2, nr1);
        }
    }
    let b3 = 60i64;
    for a in -b3..=b3 {
        for c in -b3..=b3 {
            for d in -b3..=b3 {
                let mu = [a, c, d];
                let r = in_resonant(&mu, m);
                let nr = in_nonresonant(&mu, m);
                assert!(!(r && nr));
                assert_eq!(r || nr, in_nonresonant(&[a, c], m));
                if r || nr {
                    // growth of the cumulative phases along the chain
                    let cum = cumulative(&mu);
                    for j in 0..2 {
                        assert!(cum[j].abs() as f64 > 2f64.powi(j as i32) * m);
                        assert!(2 * mu[j].abs() <= 3 * cum[j].abs());
                    }
                }
            }
        }
    }
}

#[test]
fn eval_q_matches_nested_loops() {
    let f = frame(6);
    let n = 6i64;
    let t = f.t();
    for mid in [id(1, false), id(4, true), id(6, false), id(7, true)] {
        let w = |out: i64, tu: &Tuple| phase(t, out, tu) * multiplier_unchecked(mid, SIGMA, out, tu);
        let q = eval_q(mid, &w, &f);
        let kind = if mid.starred { Kind::OmegaStar } else { Kind::Omega };
        let p = pattern(mid.i, kind);
        for out in -n..=n {
            let mut acc = C64::new(0.0, 0.0);
            for n5 in -n..=n {
                for n4 in -n..=n {
                    for n3 in -n..=n {
                        for n2 in -n..=n {
                            let n1 = out - n2 - n3 - n4 - n5;
                            if n1.abs() > n {
                                continue;
                            }
                            let tu = [n1, n2, n3, n4, n5];
                            acc += w(out, &tu)
                                * f.leaf(p.odd[0], n1)
                                * f.w(p.even[0], n2)
                                * f.leaf(p.odd[1], n3)
                                * f.w(p.even[1], n4)
                                * f.leaf(p.odd[2], n5);
                        }
                    }
                }
            }
            assert!((acc - q.get(out)).norm() < 1e-13 * (1.0 + acc.norm()), "{mid:?} n={out}");
        }
        // factorized full sum against the brute-force one
        let full = full_q(mid.i, kind, &f);
        assert!(max_diff(&full, &q) < 1e-13);
    }
    let zero = LatticeFrame::from_u(&SpectralField::zeros(8), 0.0, SIGMA, 4).unwrap();
    assert_eq!(eval_q(id(2, false), &|_, _| C64::new(1.0, 0.0), &zero).max_abs(), 0.0);
}

#[test]
fn collapsed_weights_reduce_to_triple_convolution() {
    let f0 = frame(5);
    let delta = SpectralField::constant(5, 1.0);
    let w = [delta.clone(), delta.clone(), delta.clone(), delta.clone()];
    let dw = [SpectralField::zeros(5), SpectralField::zeros(5), SpectralField::zeros(5), SpectralField::zeros(5)];
    let f = LatticeFrame::from_parts(f0.state.clone(), SIGMA, w, dw, SpectralField::zeros(5));
    let q = eval_q(id(3, false), &|_, _| C64::new(1.0, 0.0), &f);
    let om = &f.state.omega;
    let full = om.product_full(om).product_full(om).with_n_max(5);
    // truncation: inner slots live on the window too
    let n = 5i64;
    for out in -n..=n {
        let mut acc = C64::new(0.0, 0.0);
        for a in -n..=n {
            for b in -n..=n {
                let c = out - a - b;
                if c.abs() <= n {
                    acc += om.get(a) * om.get(b) * om.get(c);
                }
            }
        }
        assert!((acc - q.get(out)).norm() < 1e-14);
    }
    assert!(full.l2_coeff_norm() > 0.0);
}

#[test]
fn starred_equation_is_conjugate_reflection() {
    let f = frame(8);
    for i in 1..=7u8 {
        let a = full_q(i, Kind::OmegaStar, &f);
        let b = full_q(i, Kind::Omega, &f).conj();
        assert!(max_diff(&a, &b) < 1e-14, "Q_{i}");
    }
    let s = &f.state;
    assert!(max_diff(&s.omega_star, &s.omega.conj()) == 0.0);
}

fn hat_weight(i: u8, t: f64, eta: f64, filt: impl Fn(i64) -> Option<C64> + Sync) -> impl Fn(i64, &Tuple) -> C64 + Sync {
    move |out: i64, tu: &Tuple| {
        let (h, _) = hat_split(id(i, false), SIGMA, out, tu, eta);
        if h == 0.0 {
            return C64::new(0.0, 0.0);
        }
        match filt(phi_tuple(out, tu)) {
            Some(k) => I * h * phase(t, out, tu) * k,
            None => C64::new(0.0, 0.0),
        }
    }
}

fn oracle_sum(f: &LatticeFrame, eta: f64, filt: impl Fn(i64) -> Option<C64> + Sync + Copy) -> SpectralField {
    let mut acc = SpectralField::zeros(f.n_max);
    for i in 1..=7u8 {
        acc += &eval_q(id(i, false), &hat_weight(i, f.t(), eta, filt), f);
    }
    acc
}

#[test]
fn first_generation_matches_oracle() {
    let f = frame(6);
    let m = 16.0;
    for eta in [ETA, 0.3] {
        let table = HatTable::build(6, eta, SIGMA);
        let g = first_generation(&f, &table, m).unwrap();
        let full = oracle_sum(&f, eta, |_| Some(C64::new(1.0, 0.0)));
        let res = oracle_sum(&f, eta, |p| ((p.abs() as f64) <= m).then_some(C64::new(1.0, 0.0)));
        let bnd = oracle_sum(&f, eta, |p| ((p.abs() as f64) > m).then(|| 1.0 / (I * p as f64)));
        let scale = full.max_abs().max(1e-300);
        assert!(max_diff(&g.n1_full, &full) < 1e-12 * scale);
        assert!(max_diff(&g.resonant, &res) < 1e-12 * scale);
        assert!(max_diff(&g.boundary, &bnd) < 1e-12 * scale);
        // R^(0): the hathat part plus the twisted remainder
        let mut hh = SpectralField::zeros(6);
        for i in 1..=7u8 {
            let t = f.t();
            let w = move |out: i64, tu: &Tuple| {
                let (_, x) = hat_split(id(i, false), SIGMA, out, tu, eta);
                I * x * phase(t, out, tu)
            };
            hh += &eval_q(id(i, false), &w, &f);
        }
        hh += &f.r_twisted;
        assert!(max_diff(&g.r0, &hh) < 1e-12 * g.rhs.max_abs());
        assert!(max_diff(&eval_r0(&f, &table).unwrap(), &g.r0) == 0.0);
    }
    assert!(matches!(
        first_generation(&frame(5), &HatTable::build(6, ETA, SIGMA), m),
        Err(NormalFormError::WindowMismatch(5, 6))
    ));
}

#[test]
fn weight_derivative_family_matches_oracle() {
    let f = frame(5);
    let n = 5i64;
    let m = 4.0;
    let eta = 0.3;
    let table = HatTable::build(5, eta, SIGMA);
    let g = first_generation(&f, &table, m).unwrap();
    let t = f.t();
    for out in -n..=n {
        let mut acc = C64::new(0.0, 0.0);
        for n1 in -n..=n {
            for n2 in -n..=n {
                for n3 in -n..=n {
                    for n4 in -n..=n {
                        let n5 = out - n1 - n2 - n3 - n4;
                        if n5.abs() > n {
                            continue;
                        }
                        let tu = [n1, n2, n3, n4, n5];
                        let ph = phi_tuple(out, &tu);
                        if (ph.abs() as f64) <= m {
                            continue;
                        }
                        for i in 1..=7u8 {
                            let (h, _) = hat_split(id(i, false), SIGMA, out, &tu, eta);
                            if h == 0.0 {
                                continue;
                            }
                            let p = pattern(i, Kind::Omega);
                            let odd = f.leaf(p.odd[0], n1) * f.leaf(p.odd[1], n3) * f.leaf(p.odd[2], n5);
                            let ev = f.dw(p.even[0], n2) * f.w(p.even[1], n4) + f.w(p.even[0], n2) * f.dw(p.even[1], n4);
                            acc += -I * h * phase(t, out, &tu) / (I * ph as f64) * odd * ev;
                        }
                    }
                }
            }
        }
        assert!((acc - g.weight_derivative.get(out)).norm() < 1e-12 * (1.0 + acc.norm()));
    }
}

#[test]
fn threshold_limits_and_zero_data() {
    let f = frame(6);
    let table = HatTable::build(6, ETA, SIGMA);
    let g = first_generation(&f, &table, 1e18).unwrap();
    assert!(max_diff(&g.resonant, &g.n1_full) == 0.0);
    assert_eq!(g.boundary.max_abs(), 0.0);
    assert_eq!(g.weight_derivative.max_abs(), 0.0);
    let zero = LatticeFrame::from_u(&SpectralField::zeros(8), 0.0, SIGMA, 6).unwrap();
    let mc = McConfig { samples_per_mode: 200, batches: 4, seed: 1 };
    for fam in Family::all() {
        for j in [1, 2] {
            let d = TermDescriptor::new(fam, j, 8.0, ETA).unwrap();
            assert_eq!(eval_term(&d, &table, &zero, EvalMode::Exact, &mc).unwrap().max_abs(), 0.0);
        }
    }
}

#[test]
fn remainder_of_constant_state_vanishes() {
    let table = HatTable::build(6, ETA, SIGMA);
    let f = LatticeFrame::from_u(&SpectralField::constant(8, 0.4), 0.3, SIGMA, 6).unwrap();
    assert!(eval_r0(&f, &table).unwrap().max_abs() < 1e-15);
}

#[test]
fn hathat_mass_grows_as_eta_shrinks() {
    let f = frame(6);
    let n = 6i64;
    let mass = |eta: f64| {
        let mut s = 0.0;
        for n1 in -n..=n {
            for n2 in -n..=n {
                for n3 in -n..=n {
                    for n4 in -n..=n {
                        for n5 in -n..=n {
                            let tu = [n1, n2, n3, n4, n5];
                            let out = tu.iter().sum::<i64>();
                            if out.abs() > n {
                                continue;
                            }
                            for i in 1..=7u8 {
                                let (_, hh) = hat_split(id(i, false), SIGMA, out, &tu, eta);
                                if hh != 0.0 {
                                    let p = pattern(i, Kind::Omega);
                                    s += hh.abs()
                                        * (f.leaf(p.odd[0], n1) * f.w(p.even[0], n2) * f.leaf(p.odd[1], n3))
                                            .norm()
                                        * (f.w(p.even[1], n4) * f.leaf(p.odd[2], n5)).norm();
                                }
                            }
                        }
                    }
                }
            }
        }
        s
    };
    let etas = [0.5, 0.25, 0.125, 0.0625, ETA];
    let ms: Vec<f64> = etas.iter().map(|e| mass(*e)).collect();
    // the branch |n_2| v |n_4| >= eta^2 (..) swallows more tuples as eta -> 0
    for w in ms.windows(2) {
        assert!(w[1] >= w[0] * (1.0 - 1e-12), "{ms:?}");
    }
    assert!(ms[0] < ms[4]);
}

#[test]
fn descriptors_and_modes() {
    assert!(matches!(TermDescriptor::new(Family::Boundary, 1, 1.0, ETA), Err(NormalFormError::BadThreshold(_))));
    assert!(matches!(TermDescriptor::new(Family::Boundary, 1, 8.0, 1.5), Err(NormalFormError::BadEta(_))));
    let table = HatTable::build(4, ETA, SIGMA);
    let f = frame(4);
    let mc = McConfig { samples_per_mode: 100, batches: 4, seed: 1 };
    let d3 = TermDescriptor::new(Family::Boundary, 3, 8.0, ETA).unwrap();
    assert!(matches!(eval_term(&d3, &table, &f, EvalMode::Exact, &mc), Err(NormalFormError::ModeUnsupported(_))));
    assert!(eval_term(&d3, &table, &f, EvalMode::MonteCarlo, &mc).is_ok());
    let other = TermDescriptor::new(Family::Boundary, 1, 8.0, 0.5).unwrap();
    assert!(matches!(eval_term(&other, &table, &f, EvalMode::Exact, &mc), Err(NormalFormError::ModeUnsupported(_))));
}

#[test]
fn second_generation_consistent_with_substitution() {
    let f = frame(6);
    let table = HatTable::build(6, ETA, SIGMA);
    for m in [4.0, 16.0] {
        let g1 = first_generation(&f, &table, m).unwrap();
        let g2 = second_generation(&f, &table, m, &g1).unwrap();
        assert!(max_diff(&g1.next, &g2.total) < 1e-12 * (1e-300 + g1.next.max_abs()));
    }
}

#[test]
fn monte_carlo_agrees_with_exact() {
    let f = frame(6);
    let table = HatTable::build(6, ETA, SIGMA);
    let mc = McConfig { samples_per_mode: 20000, batches: 20, seed: 3 };
    let s = 0.6;
    for j in [1, 2] {
        for fam in Family::all() {
            let d = TermDescriptor::new(fam, j, 8.0, ETA).unwrap();
            let ex = eval_term(&d, &table, &f, EvalMode::Exact, &mc).unwrap();
            let est = mc_term(&d, &table, std::slice::from_ref(&f), &mc, false).unwrap();
            let gap = (&ex - &est.mean).sobolev_norm(s);
            let se = est.stderr_norm(s);
            assert!(gap <= 5.0 * se + 1e-12 * ex.sobolev_norm(s), "{fam:?} J={j}: gap {gap:e} stderr {se:e}");
        }
    }
}

#[test]
fn monte_carlo_is_seeded() {
    let f = frame(5);
    let table = HatTable::build(5, ETA, SIGMA);
    let mc = McConfig { samples_per_mode: 500, batches: 5, seed: 9 };
    let d = TermDescriptor::new(Family::Resonant, 3, 4.0, ETA).unwrap();
    let a = mc_term(&d, &table, std::slice::from_ref(&f), &mc, false).unwrap();
    let b = mc_term(&d, &table, std::slice::from_ref(&f), &mc, false).unwrap();
    assert_eq!(a.mean, b.mean);
    assert_eq!(a.stderr, b.stderr);
}

#[test]
fn trapezoid_rule() {
    let h = 0.1;
    let vals: Vec<SpectralField> = (0..=8).map(|k| SpectralField::constant(1, (k as f64 * h).powi(2))).collect();
    let q = trapezoid(&vals, h);
    let exact = 0.8f64.powi(3) / 3.0;
    assert!((q.get(0).re - exact - h * h / 12.0 * 1.6).abs() < 1e-12);
    // Richardson correction is exact for quadratics
    let e = trapezoid_error(&vals, h).unwrap();
    assert!((q.get(0).re + e.get(0).re - exact).abs() < 1e-12);
    assert!(trapezoid_error(&vals[..8], h).is_none());
    assert!((log_log_slope(&[1.0, 2.0, 4.0], &[3.0, 12.0, 48.0]) - 2.0).abs() < 1e-12);
}

#[test]
fn telescoping_zero_solution_and_small_lattice() {
    let z = integrate(&SpectralField::zeros(8), &StepConfig::new(Equation::MboPrime, SIGMA, 1e-3), 0.004, 1).unwrap();
    let frames = frames_from_trajectory(&z, 4, 1.0, 1).unwrap();
    let table = HatTable::build(4, ETA, SIGMA);
    let r = telescoping_check(1, &frames, &table, 8.0, 0.6, None).unwrap();
    assert_eq!(r.residual, 0.0);

    let tr = trajectory();
    let frames = frames_from_trajectory(tr, 8, 1.0, 2).unwrap();
    let table = HatTable::build(8, ETA, SIGMA);
    let r = telescoping_check(1, &frames, &table, 16.0, 0.6, None).unwrap();
    assert!(r.residual < 1e-5 * r.lhs_norm.max(1.0), "{r:?}");
    assert!(telescoping_check(3, &frames, &table, 16.0, 0.6, None).is_err());
}
