mod common;

use common::{max_diff, random_complex, random_real, rng};
use mbolab::spectral::{ProductMode, Projection, SpectralError, SpectralField, C64};
use proptest::prelude::*;

fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[test]
fn hilbert_examples() {
    let cos = SpectralField::trig(4, 1, 1.0, 0.0);
    let sin = SpectralField::trig(4, 1, 0.0, 1.0);
    assert!(max_diff(&cos.hilbert(), &sin) < 1e-15);
    assert_eq!(cos.hilbert().get(1), c(0.0, -0.5));
    assert_eq!(cos.hilbert().get(-1), c(0.0, 0.5));
    assert!(cos.hilbert().is_real());
    assert_eq!(SpectralField::constant(4, 1.0).hilbert().max_abs(), 0.0);
    let mut e3 = SpectralField::zeros(4);
    e3.set(3, c(1.0, 0.0));
    assert_eq!(e3.hilbert().get(3), c(0.0, -1.0));
}

#[test]
fn projection_examples() {
    let cos = SpectralField::trig(3, 1, 1.0, 0.0);
    let p = cos.project(Projection::Plus);
    assert_eq!(p.get(1), c(0.5, 0.0));
    assert_eq!(p.get(-1), c(0.0, 0.0));
    assert_eq!(SpectralField::constant(3, 2.0).project(Projection::NonMean).max_abs(), 0.0);
}

#[test]
fn inv_dx_examples() {
    let sin = SpectralField::trig(5, 1, 0.0, 1.0);
    let cos = SpectralField::trig(5, 1, 1.0, 0.0);
    assert!(max_diff(&sin.inv_dx().unwrap(), &(-&cos)) < 1e-15);
    assert_eq!(SpectralField::zeros(5).inv_dx().unwrap().max_abs(), 0.0);
    assert!(matches!(
        SpectralField::constant(5, 1.0).inv_dx(),
        Err(SpectralError::NonzeroMean(_))
    ));
}

#[test]
fn product_examples() {
    let mut r = rng(1);
    let f = random_complex(8, &mut r);
    let one = SpectralField::constant(8, 1.0);
    for mode in [ProductMode::ExactConvolution, ProductMode::PaddedTransform] {
        assert!(max_diff(&one.product(&f, mode).unwrap(), &f) < 1e-14);
        let mut e1 = SpectralField::zeros(8);
        e1.set(1, c(1.0, 0.0));
        let mut e2 = SpectralField::zeros(8);
        e2.set(2, c(1.0, 0.0));
        assert!(max_diff(&e1.product(&e1, mode).unwrap(), &e2) < 1e-15);
    }
    assert!(matches!(
        f.product(&SpectralField::zeros(7), ProductMode::ExactConvolution),
        Err(SpectralError::SizeMismatch(8, 7))
    ));
}

#[test]
fn product_modes_agree_n32() {
    let mut r = rng(2);
    for _ in 0..20 {
        let f = random_complex(32, &mut r);
        let g = random_complex(32, &mut r);
        let a = f.product(&g, ProductMode::ExactConvolution).unwrap();
        let b = f.product(&g, ProductMode::PaddedTransform).unwrap();
        assert!(max_diff(&a, &b) <= 1e-12 * a.max_abs());
    }
}

#[test]
fn exact_convolution_matches_double_loop() {
    let mut r = rng(3);
    let n = 16i64;
    let f = random_complex(16, &mut r);
    let g = random_complex(16, &mut r);
    let h = f.product(&g, ProductMode::ExactConvolution).unwrap();
    for k in -n..=n {
        let mut acc = c(0.0, 0.0);
        for a in -n..=n {
            for b in -n..=n {
                if a + b == k {
                    acc += f.get(a) * g.get(b);
                }
            }
        }
        assert!((acc - h.get(k)).norm() < 1e-13);
    }
}

#[test]
fn sobolev_norm_examples() {
    let mut d0 = SpectralField::zeros(3);
    d0.set(0, c(1.0, 0.0));
    for s in [-1.0, 0.0, 0.6, 2.0] {
        assert!((d0.sobolev_norm(s) - 1.0).abs() < 1e-15);
    }
    let mut d1 = SpectralField::zeros(3);
    d1.set(1, c(1.0, 0.0));
    assert!((d1.sobolev_norm(1.0) - 2f64.sqrt()).abs() < 1e-15);
}

#[test]
fn json_round_trip_and_layout() {
    let mut r = rng(4);
    let f = random_real(6, 1.0, 1.0, &mut r);
    let back = SpectralField::from_json(&f.to_json()).unwrap();
    assert_eq!(back, f);
    let v: serde_json::Value = serde_json::from_str(&f.to_json()).unwrap();
    assert_eq!(v["n_max"], 6);
    assert_eq!(v["is_real"], true);
    assert_eq!(v["coeffs"].as_array().unwrap().len(), 13);
    assert_eq!(v["coeffs"][0][0].as_f64().unwrap(), f.get(-6).re);
}

#[test]
fn from_coeffs_rejects_bad_input() {
    assert!(matches!(
        SpectralField::from_coeffs(2, vec![c(0.0, 0.0); 4], false),
        Err(SpectralError::BadLength { got: 4, expected: 5 })
    ));
    let mut v = vec![c(0.0, 0.0); 5];
    v[3] = c(1.0, 0.0);
    assert!(matches!(SpectralField::from_coeffs(2, v, true), Err(SpectralError::NotReal(_))));
}

fn arb_field(n_max: usize) -> impl Strategy<Value = SpectralField> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 2 * n_max + 1).prop_map(move |v| {
        SpectralField::from_coeffs(n_max, v.into_iter().map(|(a, b)| c(a, b)).collect(), false).unwrap()
    })
}

fn arb_real(n_max: usize) -> impl Strategy<Value = SpectralField> {
    arb_field(n_max).prop_map(|f| f.assume_real())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn hilbert_squared_is_minus_nonmean(f in arb_field(12)) {
        let lhs = f.hilbert().hilbert();
        let rhs = -&f.project(Projection::NonMean);
        prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
    }

    #[test]
    fn inv_dx_dx_is_nonmean(f in arb_real(12)) {
        let lhs = f.dx().inv_dx().unwrap();
        prop_assert!(max_diff(&lhs, &f.project(Projection::NonMean)) < 1e-12);
        prop_assert!(max_diff(&f.inv_dx_nonmean().dx(), &f.project(Projection::NonMean)) < 1e-12);
    }

    #[test]
    fn projections_partition(f in arb_field(12)) {
        let sum = &(&f.project(Projection::Plus) + &f.project(Projection::Minus)) + &f.project(Projection::Mean);
        prop_assert!(max_diff(&sum, &f) < 1e-15);
    }

    #[test]
    fn conj_swaps_projections_on_real_fields(f in arb_real(10)) {
        let a = f.project(Projection::Plus).conj();
        let b = f.conj().project(Projection::Minus);
        prop_assert!(max_diff(&a, &b) < 1e-15);
    }

    #[test]
    fn operators_preserve_reality(f in arb_real(10)) {
        for g in [f.hilbert(), f.dx(), f.dxx(), f.inv_dx_nonmean(), f.project(Projection::NonMean)] {
            prop_assert!(g.is_real());
            prop_assert!(g.reality_defect() < 1e-15);
        }
        let p = f.product(&f, ProductMode::PaddedTransform).unwrap();
        prop_assert!(p.is_real() && p.reality_defect() < 1e-15);
    }

    #[test]
    fn product_bilinear_commutative(f in arb_field(8), g in arb_field(8), h in arb_field(8), a in -2.0f64..2.0) {
        for mode in [ProductMode::ExactConvolution, ProductMode::PaddedTransform] {
            let fg = f.product(&g, mode).unwrap();
            prop_assert!(max_diff(&fg, &g.product(&f, mode).unwrap()) < 1e-12);
            let lhs = (&f.scale_re(a) + &h).product(&g, mode).unwrap();
            let rhs = &fg.scale_re(a) + &h.product(&g, mode).unwrap();
            prop_assert!(max_diff(&lhs, &rhs) < 1e-12);
        }
    }

    #[test]
    fn sobolev_monotone_in_s(f in arb_field(10), s in -2.0f64..2.0, ds in 0.0f64..2.0) {
        prop_assert!(f.sobolev_norm(s) <= f.sobolev_norm(s + ds) * (1.0 + 1e-14));
    }

    #[test]
    fn grid_round_trip(f in arb_field(9)) {
        let g = SpectralField::from_grid(&f.to_grid(32), 9);
        prop_assert!(max_diff(&g, &f) < 1e-14);
    }
}

#[test]
fn product_estimate_ratio_bounded_in_n() {
    let s = 0.6;
    let mut worst = Vec::new();
    for n in [32usize, 64, 128] {
        let mut r = rng(5 + n as u64);
        let mut w: f64 = 0.0;
        for _ in 0..20 {
            let f = random_real(n, s + 0.5, 1.0, &mut r);
            let g = random_real(n, s - 0.5, 1.0, &mut r);
            let fg = f.product(&g, ProductMode::PaddedTransform).unwrap();
            w = w.max(fg.sobolev_norm(s - 1.0) / (f.sobolev_norm(s) * g.sobolev_norm(s - 1.0)));
        }
        worst.push(w);
    }
    assert!(worst[2] < 2.0 * worst[0], "{worst:?}");
}
