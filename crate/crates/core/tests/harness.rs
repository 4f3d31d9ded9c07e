use gauss_maxima::expansions::KappaVariant;
use gauss_maxima::harness::*;
use gauss_maxima::limits::h_power;
use gauss_maxima::norming::{CorrelationModel, Lambda, RegimeParams};
use gauss_maxima::special::{std_normal_cdf, std_normal_pdf, Correlation};
use gauss_maxima::tables::ReferenceTable;

const E: f64 = std::f64::consts::E;

#[test]
fn comonotone_rate_at_unit_point_vanishes() {
    let report = verify_fixed_rho_rate(Correlation::ONE, 1.0, 1.0, &DEFAULT_N_GRID).unwrap();
    assert_eq!(report.target, 0.0);
    assert!(report.residuals.last().unwrap().abs() < 1e-3);
}

#[test]
fn independent_rate_at_e() {
    let expected = 2.0 * (2.0 / E) * (-2.0 / E).exp();
    let target = second_order_target(E, E, RegimeParams::infinite(), KappaVariant::default()).unwrap();
    assert!((target - expected).abs() < 1e-14);
    let report = verify_fixed_rho_rate(Correlation::ZERO, E, E, &DEFAULT_N_GRID).unwrap();
    assert!(report.pass, "{report}");
    let samples = &report.samples;
    let extrapolated = extrapolate(
        samples,
        |s| s.scaled_diff,
        ExtrapolationVariable::InvBnSquared,
        RichardsonOrder::Three,
    )
    .unwrap();
    assert!((extrapolated - expected).abs() < 0.01 * expected, "{extrapolated} vs {expected}");
}

#[test]
fn finite_lambda_target_at_unit_point() {
    let expected = -6.0 * std_normal_pdf(2.0) * (-2.0 * std_normal_cdf(2.0)).exp();
    let regime = RegimeParams::with_tau(2.0, 3.0).unwrap();
    for v in KappaVariant::ALL {
        assert!((second_order_target(1.0, 1.0, regime, v).unwrap() - expected).abs() < 1e-15);
    }
}

#[test]
fn uniform_error_on_independent_table_points() {
    let points: Vec<(f64, f64)> = ReferenceTable::builtin(3).unwrap().points().iter().map(|p| (p.x, p.y)).collect();
    let report = verify_uniform_convergence(
        &CorrelationModel::Fixed(Correlation::ZERO),
        Lambda::Infinite,
        &[10_000, 1_000_000],
        &points,
        0.1,
    )
    .unwrap();
    let first = report.steps[0];
    assert_eq!(first.argmax, (6.0, 7.0));
    assert!((first.max_abs_error - 0.0783).abs() < 5e-4, "{}", first.max_abs_error);
    assert!(report.decreasing && report.pass);
    let ratio = report.steps[1].max_abs_error / first.max_abs_error;
    assert!((0.4..0.8).contains(&ratio), "{ratio}");
}

#[test]
fn comonotone_uniform_error_is_univariate_error() {
    let grid: Vec<(f64, f64)> = RATE_GRID.iter().map(|&x| (x, x)).collect();
    let report =
        verify_uniform_convergence(&CorrelationModel::Fixed(Correlation::ONE), Lambda::Zero, &[1_000, 100_000], &grid, 0.1)
            .unwrap();
    for step in &report.steps {
        let nc = gauss_maxima::solve_bn(step.n).unwrap();
        let uni = RATE_GRID
            .iter()
            .map(|&x| {
                (gauss_maxima::actuals::phin_power(x, &nc).unwrap().value - h_power(x, x, Lambda::Zero).unwrap()).abs()
            })
            .fold(0.0, f64::max);
        assert_eq!(step.max_abs_error, uni);
    }
}

#[test]
fn swapped_points_give_identical_evidence() {
    let ev = disambiguate_kappa(&[(2.0, 1.0), (1.0, 2.0)], 2.0, 3.0, &DEFAULT_N_GRID, RichardsonOrder::Three, 5.0).unwrap();
    let a = ev.point(2.0, 1.0).unwrap();
    let b = ev.point(1.0, 2.0).unwrap();
    assert!((a.extrapolated - b.extrapolated).abs() < 1e-12);
    assert!((a.tail_scaled - b.tail_scaled).abs() < 1e-12);
    assert!(b.tie);
    assert_eq!(ev.decision, KappaDecision::Selected(KappaVariant::TailScaled));
}

#[test]
fn unit_point_alone_cannot_decide() {
    let ev = disambiguate_kappa(&[(1.0, 1.0)], 2.0, 3.0, &DEFAULT_N_GRID, RichardsonOrder::Three, 5.0).unwrap();
    assert_eq!(ev.decision, KappaDecision::Inconclusive);
}

#[test]
fn univariate_second_order_term() {
    for x in [1.0, 2.0] {
        let r = verify_univariate(x, &DEFAULT_N_GRID, 0.05).unwrap();
        assert!(r.pass, "{r}");
    }
}

#[test]
fn preconditions_hold_for_fixed_correlations() {
    let grid = [1_000, 100_000, 10_000_000];
    let inf = lambda_infinite_precondition(&CorrelationModel::Fixed(Correlation::new(0.5).unwrap()), &grid).unwrap();
    assert!(inf.non_increasing);
    assert!(inf.values.last().unwrap().1 < inf.values[0].1);
    let zero = lambda_zero_precondition(&CorrelationModel::Fixed(Correlation::ONE), &grid).unwrap();
    assert!(zero.values.iter().all(|&(_, v)| v == 0.0));
}

#[test]
fn slowly_converging_lambda() {
    let grid = [100_000, 1_000_000, 10_000_000, 100_000_000, 1_000_000_000];
    for (x, y) in [(2.0, 1.0), (3.0, 5.0)] {
        let r = verify_slow_lambda(x, y, 2.0, &grid, 0.15).unwrap();
        assert!(r.pass, "({x}, {y}): {} vs {}", r.extrapolated, r.target);
    }
}

#[test]
fn oscillating_correlation_splits_by_parity() {
    let grid = [1_000_000, 1_000_001, 100_000_000, 100_000_001];
    let rows = oscillation_demo(2.0, 1.0, 2.0, &grid).unwrap();
    let (even, odd): (Vec<_>, Vec<_>) = rows.iter().partition(|r| r.n % 2 == 0);
    let res = |r: &OscillationRow| (r.natural_scaled - r.target).abs();
    assert!(res(even[1]) < res(even[0]));
    assert!(res(odd[1]) < res(odd[0]));
    assert!(odd[1].bn_sq_scaled.abs() > odd[0].bn_sq_scaled.abs());
    assert!(odd[1].bn_sq_scaled.abs() > 3.0 * even[1].bn_sq_scaled.abs());
}

#[test]
fn noise_floor_limits_the_grid() {
    assert_eq!(max_usable_n(KERNEL_ABS_ACCURACY, 1e-3).unwrap(), 1_000_000_000);
    assert!(check_noise_floor(&DEFAULT_N_GRID, KERNEL_ABS_ACCURACY, 1e-3).is_ok());
    assert!(check_noise_floor(&[1_000, 1_000_000_000_000], KERNEL_ABS_ACCURACY, 1e-3).is_err());
}

#[test]
fn richardson_is_exact_on_quadratics() {
    let h = [0.1, 0.05, 0.025];
    let v: Vec<f64> = h.iter().map(|t| 3.0 - 2.0 * t + 7.0 * t * t).collect();
    assert!((richardson(&h, &v).unwrap() - 3.0).abs() < 1e-12);
}

#[test]
fn probe_csv() {
    let r = verify_univariate(2.0, &DEFAULT_N_GRID, 0.05).unwrap();
    let mut buf = Vec::new();
    write_csv(&r.records(), &mut buf).unwrap();
    let text = String::from_utf8(buf).unwrap();
    assert_eq!(text.lines().next(), Some(CSV_HEADER));
    assert_eq!(text.lines().count(), 1 + DEFAULT_N_GRID.len());
}
