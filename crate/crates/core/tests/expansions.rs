use gauss_maxima::expansions::*;
use gauss_maxima::limits::{h_lambda, h_power};
use gauss_maxima::norming::{solve_bn, Lambda, RegimeParams};
use gauss_maxima::special::{std_normal_cdf, std_normal_pdf};
use proptest::prelude::*;

#[test]
fn partial_integration_matches_quadrature() {
    for (x, y, l) in [(1.0, 1.0, 2.0), (2.0, 1.0, 2.0), (0.3, 7.0, 0.5), (25.0, 4.0, 1.3), (3.0, 5.0, 2.0)] {
        let closed = partial_integration_j(x, y, l).unwrap();
        let num = partial_integration_j_numeric(x, y, l, 1e-14).unwrap();
        assert!(num.converged);
        assert!((closed - num.value).abs() < 1e-12, "{x},{y},{l}: {closed} vs {}", num.value);
    }
}

#[test]
fn shared_value_at_unit_point() {
    // κ(1,1,2,3) H₂(0,0) = -6 φ(2) exp(-2 Φ(2)) for both readings of κ
    let target = -6.0 * std_normal_pdf(2.0) * (-2.0 * std_normal_cdf(2.0)).exp();
    for v in KappaVariant::ALL {
        let k = kappa(1.0, 1.0, 2.0, 3.0, v).unwrap();
        let h = h_power(1.0, 1.0, Lambda::Finite(2.0)).unwrap();
        assert!((k * h - target).abs() < 1e-15);
    }
}

#[test]
fn printed_kappa_is_not_symmetric() {
    let a = kappa(2.0, 1.0, 2.0, 3.0, KappaVariant::AsPrinted).unwrap();
    let b = kappa(1.0, 2.0, 2.0, 3.0, KappaVariant::AsPrinted).unwrap();
    assert!((a - b).abs() > 0.2);
}

#[test]
fn corrections_vanish_where_s_vanishes() {
    let nc = solve_bn(1000).unwrap();
    let d = KappaVariant::default();
    // λ = ∞: s(1) = 0
    let l1 = approximant_power(1.0, 1.0, &nc, RegimeParams::infinite(), Order::First, d).unwrap();
    let l3 = approximant_power(1.0, 1.0, &nc, RegimeParams::infinite(), Order::Second, d).unwrap();
    assert_eq!(l1.value, l3.value);
    // λ = 0: s(min) = s(1) = 0 for any larger partner
    for y in [1.0, 2.0, 50.0] {
        let l1 = approximant_power(1.0, y, &nc, RegimeParams::zero(), Order::First, d).unwrap();
        let l4 = approximant_power(1.0, y, &nc, RegimeParams::zero(), Order::Second, d).unwrap();
        assert_eq!(l1.value, l4.value);
    }
    // linear: ω(0) = ω(-2) = 0
    for x in [0.0, -2.0] {
        for regime in [RegimeParams::infinite(), RegimeParams::zero()] {
            let l1 = approximant_linear(x, x, &nc, regime, Order::First).unwrap();
            let l2 = approximant_linear(x, x, &nc, regime, Order::Second).unwrap();
            assert_eq!(l1.value, l2.value);
        }
    }
}

#[test]
fn approximants_are_not_clamped() {
    let nc = solve_bn(1000).unwrap();
    let l3 = approximant_power(100.0, 100.0, &nc, RegimeParams::infinite(), Order::Second, KappaVariant::default())
        .unwrap();
    assert!(l3.value > 1.0, "{}", l3.value);
}

#[test]
fn first_order_power_is_linear_at_logs() {
    let nc = solve_bn(1000).unwrap();
    let regime = RegimeParams::with_tau(0.8, 1.0).unwrap();
    for (x, y) in [(0.5, 0.5), (3.0, 0.2), (40.0, 7.0)] {
        let p = approximant_power(x, y, &nc, regime, Order::First, KappaVariant::default()).unwrap();
        let l = approximant_linear(f64::ln(x), f64::ln(y), &nc, regime, Order::First).unwrap();
        assert!((p.value - l.value).abs() < 1e-15);
    }
}

proptest! {
    #[test]
    fn kappa_rebuilt_from_parts_is_tail_scaled(
        x in 0.1f64..50.0, y in 0.1f64..50.0, l in 0.2f64..4.0, t in -3.0f64..3.0
    ) {
        let rebuilt = kappa_reconstructed(x, y, l, t).unwrap();
        let k = kappa(x, y, l, t, KappaVariant::TailScaled).unwrap();
        prop_assert!((rebuilt - k).abs() <= 1e-12 * (1.0 + k.abs()), "{} vs {}", rebuilt, k);
    }

    #[test]
    fn tail_scaled_kappa_is_symmetric(x in 0.05f64..80.0, y in 0.05f64..80.0, l in 0.1f64..5.0, t in -4.0f64..4.0) {
        let a = kappa(x, y, l, t, KappaVariant::TailScaled).unwrap();
        let b = kappa(y, x, l, t, KappaVariant::TailScaled).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn iota_is_symmetric(x in -5.0f64..30.0, y in -5.0f64..30.0, l in 0.1f64..5.0, t in -4.0f64..4.0) {
        let a = iota(x, y, l, t).unwrap();
        let b = iota(y, x, l, t).unwrap();
        prop_assert!((a - b).abs() <= 1e-12 * (1.0 + a.abs()));
    }

    #[test]
    fn power_limit_is_linear_limit_at_logs(x in 0.01f64..100.0, y in 0.01f64..100.0, l in 0.05f64..10.0) {
        let p = h_power(x, y, Lambda::Finite(l)).unwrap();
        let g = h_lambda(x.ln(), y.ln(), Lambda::Finite(l));
        prop_assert!((p - g).abs() < 1e-14);
    }
}
