use gauss_maxima::actuals::*;
use gauss_maxima::expansions::{approximant_linear, approximant_power, KappaVariant, Order};
use gauss_maxima::norming::{power_norm, rho_of_n, solve_bn, CorrelationModel, RegimeParams};
use gauss_maxima::special::{bvn_cdf, std_normal_cdf, std_normal_tail, Correlation};
use std::ops::Neg;
use proptest::prelude::*;

fn rho(r: f64) -> Correlation {
    Correlation::new(r).unwrap()
}

fn second_order_rho(n: u64) -> Correlation {
    let nc = solve_bn(n).unwrap();
    rho_of_n(&CorrelationModel::second_order(2.0, 3.0).unwrap(), &nc).unwrap().rho
}

#[test]
fn matches_high_precision_values() {
    // 40-digit evaluation of F^n at (0.5, 0.5), λ = 2, τ = 3
    for (n, v) in [(1_000, 0.018_734_279_042_259_126), (10_000, 0.018_999_730_261_942_308)] {
        let nc = solve_bn(n).unwrap();
        let f = fn_power(0.5, 0.5, &nc, second_order_rho(n)).unwrap().value;
        assert!((f - v).abs() < 1e-13, "n={n}: {f} vs {v}");
    }
}

#[test]
fn printed_first_order_errors() {
    let nc = solve_bn(1000).unwrap();
    let f = fn_power(0.5, 0.5, &nc, second_order_rho(1000)).unwrap().value;
    let regime = RegimeParams::with_tau(2.0, 3.0).unwrap();
    let l1 = approximant_power(0.5, 0.5, &nc, regime, Order::First, KappaVariant::default()).unwrap().value;
    assert!(((f - l1).abs() - 0.00133).abs() <= 5e-6);

    let f = fn_linear(0.5, 0.5, &nc, Correlation::MINUS_ONE).unwrap().value;
    let l1 = approximant_linear(0.5, 0.5, &nc, RegimeParams::infinite(), Order::First).unwrap().value;
    assert!(((f - l1).abs() - 0.02047).abs() <= 5e-6);

    let nc = solve_bn(10_000).unwrap();
    let f = fn_linear(1.0, 1.0, &nc, Correlation::ZERO).unwrap().value;
    let l1 = approximant_linear(1.0, 1.0, &nc, RegimeParams::infinite(), Order::First).unwrap().value;
    assert!(((f - l1).abs() - 0.03431).abs() <= 5e-6);
}

#[test]
fn closed_forms() {
    let nc = solve_bn(1000).unwrap();
    let (x, y) = (0.7, 3.0);
    let a = power_norm(x, &nc).unwrap();
    let b = power_norm(y, &nc).unwrap();
    let co = fn_power(x, y, &nc, Correlation::ONE).unwrap().value;
    assert!((co - std_normal_cdf(a).powi(1000)).abs() < 1e-14);
    let ind = fn_power(x, y, &nc, Correlation::ZERO).unwrap().value;
    let oracle = (1000.0 * (std_normal_tail(a).neg().ln_1p() + std_normal_tail(b).neg().ln_1p())).exp();
    assert!((ind - oracle).abs() < 1e-14);
    let co = fn_linear(-1.0, 2.0, &nc, Correlation::ONE).unwrap().value;
    assert_eq!(co, phin_linear(-1.0, &nc).unwrap().value);
}

#[test]
fn univariate_special_points() {
    assert_eq!(phin_power(1.0, &solve_bn(2).unwrap()).unwrap().value, 0.25);
    // Φ(b_n) = 1 - 1/n exactly, so the deviation from e^{-1} is (1-1/n)^n - e^{-1}
    let nc = solve_bn(1_000_000).unwrap();
    let d = phin_power(1.0, &nc).unwrap().value - (-1.0f64).exp();
    assert!((d + 1.839_397_972e-7).abs() < 1e-12, "{d}");
    assert!(d.abs() < nc.bn_sq().powi(-2));
}

#[test]
fn monotone_on_grids() {
    let nc = solve_bn(10_000).unwrap();
    for r in [-0.9, 0.0, 0.54, 0.99] {
        let mut prev = 0.0;
        for x in [0.2, 0.5, 1.0, 2.0, 5.0, 20.0] {
            let v = fn_power(x, 1.5, &nc, rho(r)).unwrap().value;
            assert!(v >= prev);
            prev = v;
        }
    }
    let mut prev = 0.0;
    for r in [-1.0, -0.6, 0.0, 0.3, 0.8, 0.95, 1.0] {
        let v = fn_power(0.8, 2.5, &nc, rho(r)).unwrap().value;
        assert!(v >= prev - 1e-15, "{r}");
        prev = v;
    }
}

proptest! {
    #[test]
    fn frechet_bounds(n in 3u64..100_000, x in 0.05f64..60.0, y in 0.05f64..60.0, r in -1.0f64..=1.0) {
        let nc = solve_bn(n).unwrap();
        let a = power_norm(x, &nc).unwrap();
        let b = power_norm(y, &nc).unwrap();
        let v = fn_power(x, y, &nc, rho(r)).unwrap().value;
        let nf = n as f64;
        let (ta, tb) = (std_normal_tail(a), std_normal_tail(b));
        let lower = if ta + tb >= 1.0 { 0.0 } else { (nf * (-(ta + tb)).ln_1p()).exp() };
        let upper = (nf * (-std_normal_tail(a.min(b))).ln_1p()).exp();
        let slack = 1e-12 * upper;
        prop_assert!(v >= lower - slack && v <= upper + slack, "{} not in [{}, {}]", v, lower, upper);
    }

    #[test]
    fn stable_path_matches_naive_for_small_n(n in 3u64..=100, x in 0.1f64..20.0, y in 0.1f64..20.0, r in -0.99f64..0.99) {
        let nc = solve_bn(n).unwrap();
        let a = power_norm(x, &nc).unwrap();
        let b = power_norm(y, &nc).unwrap();
        let naive = (n as f64 * bvn_cdf(a, b, rho(r)).ln()).exp();
        let v = fn_power(x, y, &nc, rho(r)).unwrap().value;
        prop_assert!((v - naive).abs() < 1e-12, "{} vs {}", v, naive);
    }

    #[test]
    fn symmetric(n in 3u64..1_000_000, x in 0.05f64..60.0, y in 0.05f64..60.0, r in -1.0f64..=1.0) {
        let nc = solve_bn(n).unwrap();
        prop_assert_eq!(fn_power(x, y, &nc, rho(r)).unwrap(), fn_power(y, x, &nc, rho(r)).unwrap());
        prop_assert_eq!(fn_linear(x - 3.0, y, &nc, rho(r)).unwrap(), fn_linear(y, x - 3.0, &nc, rho(r)).unwrap());
    }

    #[test]
    fn value_is_exp_of_log(n in 3u64..1_000_000, x in -3.0f64..30.0, r in -1.0f64..=1.0) {
        let nc = solve_bn(n).unwrap();
        let v = fn_linear(x, 1.0, &nc, rho(r)).unwrap();
        prop_assert!((0.0..=1.0).contains(&v.value));
        prop_assert_eq!(v.value, v.log_value.exp());
    }
}
