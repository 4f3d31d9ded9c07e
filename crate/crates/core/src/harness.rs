//! Numerical verification of the limit statements at growing `n`.
//!
//! A [`RateProbe`] evaluates `scaling(n) · (F^n - H)` at one point along a grid
//! of sample sizes. The checks built on it compare those sequences with their
//! closed-form limits, fit the log-log decay of the residual, extrapolate
//! limits with Richardson's method, and pick the κ variant the numbers
//! support. Reports are plain data with a `Display` summary and a CSV form.

use std::fmt;
use std::io::Write;
use std::sync::Arc;

use rayon::prelude::*;

use crate::actuals::{fn_power, phin_power};
use crate::error::{Error, Result};
use crate::expansions::{kappa, power_correction, s, KappaVariant};
use crate::limits::{h_power, phi1};
use crate::norming::{norming_constant, rho_of_n, CorrelationModel, Lambda, NormingConstant, RegimeParams};
use crate::special::{std_normal_pdf, Correlation};

pub const DEFAULT_N_GRID: [u64; 5] = [1_000, 10_000, 100_000, 1_000_000, 10_000_000];
/// Absolute accuracy assumed for the normal kernels when estimating noise.
pub const KERNEL_ABS_ACCURACY: f64 = 1e-14;
/// Accepted range of the log-log slope of a residual against `b_n²`.
pub const SLOPE_RANGE: (f64, f64) = (-1.3, -0.7);

pub type ScaleFn = Arc<dyn Fn(&NormingConstant) -> f64 + Send + Sync>;

/// Factor multiplying `F^n - H` in a probe.
#[derive(Clone)]
pub enum Scaling {
    BnSquared,
    /// Any positive sequence, e.g. `γ_n = 1/(λ - λ_n)`.
    Custom(ScaleFn),
}

impl Scaling {
    pub fn custom<F>(f: F) -> Self
    where
        F: Fn(&NormingConstant) -> f64 + Send + Sync + 'static,
    {
        Scaling::Custom(Arc::new(f))
    }

    pub fn factor(&self, nc: &NormingConstant) -> f64 {
        match self {
            Scaling::BnSquared => nc.bn_sq(),
            Scaling::Custom(f) => f(nc),
        }
    }
}

impl fmt::Debug for Scaling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scaling::BnSquared => f.write_str("BnSquared"),
            Scaling::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Sequence `scaling(n)(F^n(u_n(x), u_n(y)) - H_limit(ln x, ln y))`.
#[derive(Debug, Clone)]
pub struct RateProbe {
    pub scenario: String,
    pub model: CorrelationModel,
    pub limit: Lambda,
    pub x: f64,
    pub y: f64,
    pub n_grid: Vec<u64>,
    pub scaling: Scaling,
}

impl RateProbe {
    pub fn new(
        scenario: impl Into<String>,
        model: CorrelationModel,
        limit: Lambda,
        x: f64,
        y: f64,
        n_grid: Vec<u64>,
    ) -> Result<Self> {
        validate_grid(&n_grid, 3)?;
        if !(x > 0.0 && y > 0.0) {
            return Err(Error::domain("RateProbe::new", format!("x and y must be positive, got ({x}, {y})")));
        }
        Ok(RateProbe {
            scenario: scenario.into(),
            model,
            limit,
            x,
            y,
            n_grid,
            scaling: Scaling::BnSquared,
        })
    }

    pub fn with_scaling(mut self, scaling: Scaling) -> Self {
        self.scaling = scaling;
        self
    }
}

fn validate_grid(n_grid: &[u64], min_len: usize) -> Result<()> {
    if n_grid.len() < min_len {
        return Err(Error::Config(format!(
            "n grid needs at least {min_len} sample sizes, got {}",
            n_grid.len()
        )));
    }
    if n_grid.windows(2).any(|w| w[0] >= w[1]) || n_grid[0] < 2 {
        return Err(Error::Config(format!(
            "n grid must be strictly increasing and start at 2 or above, got {n_grid:?}"
        )));
    }
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProbeSample {
    pub n: u64,
    pub bn: f64,
    pub actual: f64,
    pub limit: f64,
    /// NaN when `flagged`.
    pub scaled_diff: f64,
    /// `H` or `F^n` underflowed at this point.
    pub flagged: bool,
}

impl ProbeSample {
    pub fn bn_sq(&self) -> f64 {
        self.bn * self.bn
    }
}

pub fn probe(p: &RateProbe) -> Result<Vec<ProbeSample>> {
    let limit = h_power(p.x, p.y, p.limit)?;
    p.n_grid
        .iter()
        .map(|&n| {
            let nc = norming_constant(n)?;
            let rho = rho_of_n(&p.model, &nc)?.rho;
            let actual = fn_power(p.x, p.y, &nc, rho)?.value;
            let flagged = !(limit > 1e-300 && actual > 0.0);
            let scaled_diff = if flagged { f64::NAN } else { p.scaling.factor(&nc) * (actual - limit) };
            Ok(ProbeSample {
                n,
                bn: nc.bn(),
                actual,
                limit,
                scaled_diff,
                flagged,
            })
        })
        .collect()
}

/// Number of points used by Richardson extrapolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum RichardsonOrder {
    /// Removes the first-order term.
    Two,
    /// Removes the first two terms.
    #[default]
    Three,
}

impl RichardsonOrder {
    pub fn points(self) -> usize {
        match self {
            RichardsonOrder::Two => 2,
            RichardsonOrder::Three => 3,
        }
    }
}

/// Variable in which the residual is expanded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExtrapolationVariable {
    InvBnSquared,
    InvBn,
}

impl ExtrapolationVariable {
    pub fn at(self, bn: f64) -> f64 {
        match self {
            ExtrapolationVariable::InvBnSquared => 1.0 / (bn * bn),
            ExtrapolationVariable::InvBn => 1.0 / bn,
        }
    }
}

/// Value at `h = 0` of the polynomial through `(h[i], v[i])` (Neville).
pub fn richardson(h: &[f64], v: &[f64]) -> Result<f64> {
    if h.len() != v.len() || h.is_empty() {
        return Err(Error::Config("richardson needs matching, non-empty inputs".into()));
    }
    let mut p = v.to_vec();
    for k in 1..h.len() {
        for i in 0..h.len() - k {
            let denom = h[i] - h[i + k];
            if denom == 0.0 {
                return Err(Error::Config("richardson needs distinct abscissae".into()));
            }
            p[i] = (h[i] * p[i + 1] - h[i + k] * p[i]) / denom;
        }
    }
    Ok(p[0])
}

/// Extrapolate `value(sample)` from the largest sample sizes.
pub fn extrapolate<F: Fn(&ProbeSample) -> f64>(
    samples: &[ProbeSample],
    value: F,
    var: ExtrapolationVariable,
    order: RichardsonOrder,
) -> Result<f64> {
    let usable: Vec<&ProbeSample> = samples.iter().filter(|s| !s.flagged).collect();
    let k = order.points();
    if usable.len() < k {
        return Err(Error::Config(format!(
            "extrapolation needs {k} unflagged samples, got {}",
            usable.len()
        )));
    }
    let tail = &usable[usable.len() - k..];
    let h: Vec<f64> = tail.iter().map(|s| var.at(s.bn)).collect();
    let v: Vec<f64> = tail.iter().map(|s| value(s)).collect();
    richardson(&h, &v)
}

/// Least-squares slope of `ln residual` against `ln b_n²`.
pub fn loglog_slope(bn_sq: &[f64], residual: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = bn_sq
        .iter()
        .zip(residual)
        .filter(|(b, r)| **b > 0.0 && **r > 0.0)
        .map(|(b, r)| (b.ln(), r.ln()))
        .collect();
    if pts.len() < 2 {
        return f64::NAN;
    }
    let m = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / m;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    sxy / sxx
}

/// One line of harness CSV output.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbeRecord {
    pub scenario: String,
    pub x: f64,
    pub y: f64,
    pub n: u64,
    pub bn: f64,
    pub scaled_diff: f64,
    pub target: f64,
    pub residual: f64,
}

pub const CSV_HEADER: &str = "scenario,x,y,n,bn,scaled_diff,target,residual";

pub fn write_csv<W: Write>(records: &[ProbeRecord], mut out: W) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in records {
        writeln!(
            out,
            "{},{},{},{},{:.16e},{:.16e},{:.16e},{:.16e}",
            r.scenario, r.x, r.y, r.n, r.bn, r.scaled_diff, r.target, r.residual
        )?;
    }
    Ok(())
}

fn records(scenario: &str, x: f64, y: f64, samples: &[ProbeSample], target: f64) -> Vec<ProbeRecord> {
    samples
        .iter()
        .map(|s| ProbeRecord {
            scenario: scenario.to_string(),
            x,
            y,
            n: s.n,
            bn: s.bn,
            scaled_diff: s.scaled_diff,
            target,
            residual: (s.scaled_diff - target).abs(),
        })
        .collect()
}

fn is_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

// ---------------------------------------------------------------------------
// Univariate rate

#[derive(Debug, Clone, PartialEq)]
pub struct UnivariateReport {
    pub x: f64,
    /// `s(x) e^{-1/x}`
    pub target: f64,
    pub samples: Vec<ProbeSample>,
    pub residuals: Vec<f64>,
    pub decreasing: bool,
    /// Residual at the largest `n` relative to `|target|`; `None` when the
    /// target is zero.
    pub relative_residual: Option<f64>,
    pub tolerance: f64,
    pub pass: bool,
}

impl UnivariateReport {
    pub fn records(&self) -> Vec<ProbeRecord> {
        records("univariate", self.x, self.x, &self.samples, self.target)
    }
}

/// `b_n²(Φ^n(u_n(x)) - e^{-1/x})` against `s(x) e^{-1/x}`. Passes when the
/// residual decreases along the grid and, at the largest `n`, is below
/// `rel_tol · |target|` (below `rel_tol` itself when the target is zero).
pub fn verify_univariate(x: f64, n_grid: &[u64], rel_tol: f64) -> Result<UnivariateReport> {
    validate_grid(n_grid, 2)?;
    let limit = phi1(x)?;
    let target = s(x)? * limit;
    let mut samples = Vec::with_capacity(n_grid.len());
    for &n in n_grid {
        let nc = norming_constant(n)?;
        let actual = phin_power(x, &nc)?.value;
        samples.push(ProbeSample {
            n,
            bn: nc.bn(),
            actual,
            limit,
            scaled_diff: nc.bn_sq() * (actual - limit),
            flagged: false,
        });
    }
    let residuals: Vec<f64> = samples.iter().map(|s| (s.scaled_diff - target).abs()).collect();
    let last = *residuals.last().expect("grid is non-empty");
    let decreasing = is_decreasing(&residuals);
    let relative_residual = (target != 0.0).then(|| last / target.abs());
    let small = match relative_residual {
        Some(r) => r < rel_tol,
        None => last < rel_tol,
    };
    Ok(UnivariateReport {
        x,
        target,
        samples,
        residuals,
        decreasing,
        relative_residual,
        tolerance: rel_tol,
        pass: decreasing && small,
    })
}

impl fmt::Display for UnivariateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "univariate rate at x = {}: target s(x)e^(-1/x) = {:.6e}", self.x, self.target)?;
        for (s, r) in self.samples.iter().zip(&self.residuals) {
            writeln!(f, "  n = {:>12}  scaled = {:+.6e}  residual = {:.3e}", s.n, s.scaled_diff, r)?;
        }
        let rel = self
            .relative_residual
            .map_or("n/a (zero target)".to_string(), |r| format!("{:.2}%", 100.0 * r));
        write!(
            f,
            "  decreasing: {}  relative residual at max n: {}  tolerance: {}  => {}",
            self.decreasing,
            rel,
            self.tolerance,
            pass_word(self.pass)
        )
    }
}

fn pass_word(pass: bool) -> &'static str {
    if pass {
        "PASS"
    } else {
        "FAIL"
    }
}

// ---------------------------------------------------------------------------
// Second-order rates

/// `power_correction · H`: the limit of `b_n²(F^n - H)`.
pub fn second_order_target(x: f64, y: f64, regime: RegimeParams, variant: KappaVariant) -> Result<f64> {
    Ok(power_correction(x, y, regime, variant)? * h_power(x, y, regime.lambda())?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct RateReport {
    pub scenario: String,
    pub x: f64,
    pub y: f64,
    pub target: f64,
    pub samples: Vec<ProbeSample>,
    pub residuals: Vec<f64>,
    /// Log-log slope of the residual against `b_n²` over the last three samples.
    pub slope: f64,
    pub pass: bool,
}

impl RateReport {
    pub fn records(&self) -> Vec<ProbeRecord> {
        records(&self.scenario, self.x, self.y, &self.samples, self.target)
    }
}

/// Run `p` and fit the decay of `|scaled_diff - target|`.
pub fn verify_rate(p: &RateProbe, target: f64, slope_range: (f64, f64)) -> Result<RateReport> {
    let samples = probe(p)?;
    let residuals: Vec<f64> = samples.iter().map(|s| (s.scaled_diff - target).abs()).collect();
    let k = samples.len().min(3);
    let tail = samples.len() - k;
    let bsq: Vec<f64> = samples[tail..].iter().map(ProbeSample::bn_sq).collect();
    let slope = loglog_slope(&bsq, &residuals[tail..]);
    Ok(RateReport {
        scenario: p.scenario.clone(),
        x: p.x,
        y: p.y,
        target,
        pass: slope >= slope_range.0 && slope <= slope_range.1,
        samples,
        residuals,
        slope,
    })
}

/// Rate check for a fixed correlation: `ρ < 1` tends to `H_∞`, `ρ = 1` to `H_0`.
pub fn verify_fixed_rho_rate(rho: Correlation, x: f64, y: f64, n_grid: &[u64]) -> Result<RateReport> {
    let regime = if rho.is_comonotone() { RegimeParams::zero() } else { RegimeParams::infinite() };
    let p = RateProbe::new(
        format!("fixed(rho={})", rho.value()),
        CorrelationModel::Fixed(rho),
        regime.lambda(),
        x,
        y,
        n_grid.to_vec(),
    )?;
    let target = second_order_target(x, y, regime, KappaVariant::default())?;
    verify_rate(&p, target, SLOPE_RANGE)
}

impl fmt::Display for RateReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "{} ({}, {}): target {:+.6e}, last residual {:.3e}, slope {:.3} => {}",
            self.scenario,
            self.x,
            self.y,
            self.target,
            self.residuals.last().copied().unwrap_or(f64::NAN),
            self.slope,
            pass_word(self.pass)
        )
    }
}

// ---------------------------------------------------------------------------
// κ disambiguation

#[derive(Debug, Clone, PartialEq)]
pub struct KappaPoint {
    pub x: f64,
    pub y: f64,
    /// Extrapolated `lim b_n²(F^n - H)/H`.
    pub extrapolated: f64,
    pub as_printed: f64,
    pub tail_scaled: f64,
    pub dev_as_printed: f64,
    pub dev_tail_scaled: f64,
    /// Both variants agree here; excluded from the decision.
    pub tie: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum KappaDecision {
    Selected(KappaVariant),
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KappaEvidence {
    pub lambda: f64,
    pub tau: f64,
    pub n_grid: Vec<u64>,
    pub points: Vec<KappaPoint>,
    pub aggregate_as_printed: f64,
    pub aggregate_tail_scaled: f64,
    /// Ratio of the larger aggregate deviation to the smaller one.
    pub separation: f64,
    pub required_separation: f64,
    pub decision: KappaDecision,
}

impl KappaEvidence {
    pub fn point(&self, x: f64, y: f64) -> Option<&KappaPoint> {
        self.points.iter().find(|p| p.x == x && p.y == y)
    }
}

/// Extrapolate `lim b_n²(F^n - H)/H` at each point and compare it with both
/// κ variants. A variant is selected only when its aggregate deviation over
/// non-tied points is at least `required_separation` times smaller.
pub fn disambiguate_kappa(
    points: &[(f64, f64)],
    lambda: f64,
    tau: f64,
    n_grid: &[u64],
    order: RichardsonOrder,
    required_separation: f64,
) -> Result<KappaEvidence> {
    validate_grid(n_grid, order.points())?;
    let model = CorrelationModel::second_order(lambda, tau)?;
    let rows: Vec<KappaPoint> = points
        .par_iter()
        .map(|&(x, y)| {
            let p = RateProbe::new("kappa", model.clone(), Lambda::Finite(lambda), x, y, n_grid.to_vec())?;
            let samples = probe(&p)?;
            let extrapolated = extrapolate(
                &samples,
                |s| s.scaled_diff / s.limit,
                ExtrapolationVariable::InvBnSquared,
                order,
            )?;
            let as_printed = kappa(x, y, lambda, tau, KappaVariant::AsPrinted)?;
            let tail_scaled = kappa(x, y, lambda, tau, KappaVariant::TailScaled)?;
            let tie = (as_printed - tail_scaled).abs() <= 1e-12 * as_printed.abs().max(1.0);
            Ok(KappaPoint {
                x,
                y,
                extrapolated,
                as_printed,
                tail_scaled,
                dev_as_printed: (extrapolated - as_printed).abs(),
                dev_tail_scaled: (extrapolated - tail_scaled).abs(),
                tie,
            })
        })
        .collect::<Result<_>>()?;
    let informative: Vec<&KappaPoint> = rows.iter().filter(|p| !p.tie).collect();
    let aggregate_as_printed: f64 = informative.iter().map(|p| p.dev_as_printed).sum();
    let aggregate_tail_scaled: f64 = informative.iter().map(|p| p.dev_tail_scaled).sum();
    let (lo, hi) = if aggregate_as_printed < aggregate_tail_scaled {
        (aggregate_as_printed, aggregate_tail_scaled)
    } else {
        (aggregate_tail_scaled, aggregate_as_printed)
    };
    let separation = if informative.is_empty() { 1.0 } else { hi / lo };
    let decision = if informative.is_empty() || !(separation >= required_separation) {
        KappaDecision::Inconclusive
    } else if aggregate_tail_scaled < aggregate_as_printed {
        KappaDecision::Selected(KappaVariant::TailScaled)
    } else {
        KappaDecision::Selected(KappaVariant::AsPrinted)
    };
    Ok(KappaEvidence {
        lambda,
        tau,
        n_grid: n_grid.to_vec(),
        points: rows,
        aggregate_as_printed,
        aggregate_tail_scaled,
        separation,
        required_separation,
        decision,
    })
}

impl fmt::Display for KappaEvidence {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "kappa variants at lambda = {}, tau = {}:", self.lambda, self.tau)?;
        writeln!(f, "  {:>8} {:>8} {:>14} {:>14} {:>14} {:>6}", "x", "y", "extrapolated", "as_printed", "tail_scaled", "tie")?;
        for p in &self.points {
            writeln!(
                f,
                "  {:>8} {:>8} {:>+14.6e} {:>+14.6e} {:>+14.6e} {:>6}",
                p.x, p.y, p.extrapolated, p.as_printed, p.tail_scaled, p.tie
            )?;
        }
        writeln!(
            f,
            "  aggregate deviation: as_printed {:.3e}, tail_scaled {:.3e}, separation {:.1}x (need {}x)",
            self.aggregate_as_printed, self.aggregate_tail_scaled, self.separation, self.required_separation
        )?;
        match self.decision {
            KappaDecision::Selected(v) => write!(f, "  selected: {v}"),
            KappaDecision::Inconclusive => write!(f, "  inconclusive"),
        }
    }
}

// ---------------------------------------------------------------------------
// Uniform convergence

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UniformStep {
    pub n: u64,
    pub max_abs_error: f64,
    pub argmax: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct UniformReport {
    pub steps: Vec<UniformStep>,
    pub decreasing: bool,
    pub epsilon: f64,
    pub pass: bool,
}

/// `max over grid |F^n - H_limit|` for each `n`. The finite grid stands in for
/// the supremum over `x, y > 0`.
pub fn verify_uniform_convergence(
    model: &CorrelationModel,
    limit: Lambda,
    n_grid: &[u64],
    grid: &[(f64, f64)],
    epsilon: f64,
) -> Result<UniformReport> {
    validate_grid(n_grid, 2)?;
    if grid.is_empty() {
        return Err(Error::Config("uniform convergence needs a non-empty grid".into()));
    }
    let steps = n_grid
        .iter()
        .map(|&n| {
            let nc = norming_constant(n)?;
            let rho = rho_of_n(model, &nc)?.rho;
            let errs = grid
                .par_iter()
                .map(|&(x, y)| Ok(((fn_power(x, y, &nc, rho)?.value - h_power(x, y, limit)?).abs(), (x, y))))
                .collect::<Result<Vec<_>>>()?;
            let (max_abs_error, argmax) = errs
                .into_iter()
                .fold((f64::NEG_INFINITY, (f64::NAN, f64::NAN)), |a, b| if b.0 > a.0 { b } else { a });
            Ok(UniformStep { n, max_abs_error, argmax })
        })
        .collect::<Result<Vec<_>>>()?;
    let maxima: Vec<f64> = steps.iter().map(|s| s.max_abs_error).collect();
    let decreasing = is_decreasing(&maxima);
    let pass = decreasing && *maxima.last().expect("grid is non-empty") < epsilon;
    Ok(UniformReport {
        steps,
        decreasing,
        epsilon,
        pass,
    })
}

impl fmt::Display for UniformReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "uniform convergence:")?;
        for s in &self.steps {
            writeln!(f, "  n = {:>12}  max |F^n - H| = {:.5e} at ({}, {})", s.n, s.max_abs_error, s.argmax.0, s.argmax.1)?;
        }
        write!(f, "  decreasing: {}  epsilon: {} => {}", self.decreasing, self.epsilon, pass_word(self.pass))
    }
}

// ---------------------------------------------------------------------------
// Preconditions

#[derive(Debug, Clone, PartialEq)]
pub struct PreconditionTrace {
    pub name: &'static str,
    pub values: Vec<(u64, f64)>,
    /// Non-increasing along the grid.
    pub non_increasing: bool,
}

impl fmt::Display for PreconditionTrace {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:", self.name)?;
        for (n, v) in &self.values {
            write!(f, " n={n}: {v:.4e};")?;
        }
        write!(f, " non-increasing: {}", self.non_increasing)
    }
}

fn trace(
    name: &'static str,
    model: &CorrelationModel,
    n_grid: &[u64],
    g: impl Fn(f64, f64) -> f64,
) -> Result<PreconditionTrace> {
    let values = n_grid
        .iter()
        .map(|&n| {
            let nc = norming_constant(n)?;
            let rho = rho_of_n(model, &nc)?.rho.value();
            Ok((n, g(nc.bn(), 1.0 - rho)))
        })
        .collect::<Result<Vec<_>>>()?;
    let non_increasing = values.windows(2).all(|w| w[1].1 <= w[0].1);
    Ok(PreconditionTrace {
        name,
        values,
        non_increasing,
    })
}

/// `ln b_n / (b_n²(1 - ρ_n))`, which must vanish for the λ = ∞ expansion.
pub fn lambda_infinite_precondition(model: &CorrelationModel, n_grid: &[u64]) -> Result<PreconditionTrace> {
    trace("ln(bn)/(bn^2(1-rho_n))", model, n_grid, |b, d| b.ln() / (b * b * d))
}

/// `b_n⁶(1 - ρ_n)`, which must vanish for the λ = 0 expansion.
pub fn lambda_zero_precondition(model: &CorrelationModel, n_grid: &[u64]) -> Result<PreconditionTrace> {
    trace("bn^6(1-rho_n)", model, n_grid, |b, d| b.powi(6) * d)
}

// ---------------------------------------------------------------------------
// Slowly converging λ_n

/// Correlations with `λ_n = λ - 1/b_n`, so `γ_n = 1/(λ - λ_n) = b_n` and
/// `b_n²/γ_n → ∞`.
pub fn slow_lambda_model(lambda: f64) -> Result<CorrelationModel> {
    RegimeParams::finite(lambda)?;
    Ok(CorrelationModel::sequence(move |nc| {
        let ln = lambda - 1.0 / nc.bn();
        1.0 - 2.0 * ln * ln / nc.bn_sq()
    }))
}

/// `2 x⁻¹ φ(λ + ln(y/x)/(2λ)) H_λ(ln x, ln y)`: the limit of `γ_n(F^n - H)`
/// when `b_n²/γ_n → ∞`.
pub fn slow_lambda_target(x: f64, y: f64, lambda: f64) -> Result<f64> {
    let h = h_power(x, y, Lambda::Finite(lambda))?;
    Ok(2.0 / x * std_normal_pdf(lambda + (y / x).ln() / (2.0 * lambda)) * h)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SlowLambdaReport {
    pub x: f64,
    pub y: f64,
    pub lambda: f64,
    pub samples: Vec<ProbeSample>,
    pub extrapolated: f64,
    pub target: f64,
    pub relative_error: f64,
    pub tolerance: f64,
    pub pass: bool,
}

impl SlowLambdaReport {
    pub fn records(&self) -> Vec<ProbeRecord> {
        records("slow_lambda", self.x, self.y, &self.samples, self.target)
    }
}

/// Probe `b_n(F^n - H_λ)` under [`slow_lambda_model`] and extrapolate in
/// `1/b_n`, where its residual lives.
pub fn verify_slow_lambda(x: f64, y: f64, lambda: f64, n_grid: &[u64], rel_tol: f64) -> Result<SlowLambdaReport> {
    let p = RateProbe::new("slow_lambda", slow_lambda_model(lambda)?, Lambda::Finite(lambda), x, y, n_grid.to_vec())?
        .with_scaling(Scaling::custom(|nc| nc.bn()));
    let samples = probe(&p)?;
    let extrapolated = extrapolate(&samples, |s| s.scaled_diff, ExtrapolationVariable::InvBn, RichardsonOrder::Three)?;
    let target = slow_lambda_target(x, y, lambda)?;
    let relative_error = (extrapolated - target).abs() / target.abs();
    Ok(SlowLambdaReport {
        x,
        y,
        lambda,
        samples,
        extrapolated,
        target,
        relative_error,
        tolerance: rel_tol,
        pass: relative_error < rel_tol,
    })
}

impl fmt::Display for SlowLambdaReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "gamma_n-scaled limit at ({}, {}), lambda = {}: extrapolated {:.6e}, target {:.6e}, relative error {:.2}% (tol {:.0}%) => {}",
            self.x,
            self.y,
            self.lambda,
            self.extrapolated,
            self.target,
            100.0 * self.relative_error,
            100.0 * self.tolerance,
            pass_word(self.pass)
        )
    }
}

// ---------------------------------------------------------------------------
// Oscillating correlations

/// `λ_n = λ` for even `n` and `λ_n = λ - 1/b_n` for odd `n`. Even rows converge
/// at rate `b_n⁻²` and odd rows only at rate `b_n⁻¹`, so `b_n²(F^n - H)` has no
/// limit.
pub fn oscillating_model(lambda: f64) -> Result<CorrelationModel> {
    RegimeParams::finite(lambda)?;
    Ok(CorrelationModel::sequence(move |nc| {
        let ln = if nc.n() % 2 == 0 { lambda } else { lambda - 1.0 / nc.bn() };
        1.0 - 2.0 * ln * ln / nc.bn_sq()
    }))
}

#[derive(Debug, Clone, PartialEq)]
pub struct OscillationRow {
    pub n: u64,
    pub bn: f64,
    /// `b_n²(F^n - H)`
    pub bn_sq_scaled: f64,
    /// Limit of the even rows (`κ(x, y, λ, 0) H`) or of `b_n(F^n - H)` on odd
    /// rows, whichever applies to `n`.
    pub target: f64,
    /// The scaling under which this row converges (`b_n²` or `b_n`) applied to `F^n - H`.
    pub natural_scaled: f64,
}

/// Evaluate the oscillating scenario. Use a grid with both parities.
pub fn oscillation_demo(x: f64, y: f64, lambda: f64, n_grid: &[u64]) -> Result<Vec<OscillationRow>> {
    let model = oscillating_model(lambda)?;
    let h = h_power(x, y, Lambda::Finite(lambda))?;
    let even_target = kappa(x, y, lambda, 0.0, KappaVariant::default())? * h;
    let odd_target = slow_lambda_target(x, y, lambda)?;
    n_grid
        .iter()
        .map(|&n| {
            let nc = norming_constant(n)?;
            let rho = rho_of_n(&model, &nc)?.rho;
            let diff = fn_power(x, y, &nc, rho)?.value - h;
            let even = n % 2 == 0;
            Ok(OscillationRow {
                n,
                bn: nc.bn(),
                bn_sq_scaled: nc.bn_sq() * diff,
                target: if even { even_target } else { odd_target },
                natural_scaled: if even { nc.bn_sq() * diff } else { nc.bn() * diff },
            })
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Noise floor

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseFloor {
    pub n: u64,
    pub bn: f64,
    /// Error of `b_n²(F^n - H)` caused by an absolute error `kernel_accuracy`
    /// in `1 - F`, amplified by the power `n`.
    pub scaled_noise: f64,
}

pub fn noise_floor(n: u64, kernel_accuracy: f64) -> Result<NoiseFloor> {
    let nc = norming_constant(n)?;
    Ok(NoiseFloor {
        n,
        bn: nc.bn(),
        scaled_noise: nc.bn_sq() * n as f64 * kernel_accuracy,
    })
}

/// Largest power of ten whose scaled noise stays within `budget`.
pub fn max_usable_n(kernel_accuracy: f64, budget: f64) -> Result<u64> {
    let mut best = None;
    for k in 1..=18u32 {
        let n = 10u64.pow(k);
        if noise_floor(n, kernel_accuracy)?.scaled_noise <= budget {
            best = Some(n);
        } else {
            break;
        }
    }
    best.ok_or_else(|| Error::Config(format!("no usable n for accuracy {kernel_accuracy} and budget {budget}")))
}

/// Error unless every sample size of `n_grid` is within the noise budget.
pub fn check_noise_floor(n_grid: &[u64], kernel_accuracy: f64, budget: f64) -> Result<()> {
    for &n in n_grid {
        let nf = noise_floor(n, kernel_accuracy)?;
        if nf.scaled_noise > budget {
            return Err(Error::Config(format!(
                "n = {n} exceeds the noise floor: scaled kernel noise {:.2e} > budget {budget:.1e}",
                nf.scaled_noise
            )));
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Suites

/// Grouped checks run by the command-line `verify` command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Suite {
    Univariate,
    Kappa,
    Rates,
    Uniform,
    SlowLambda,
    Oscillation,
    Preconditions,
    All,
}

impl std::str::FromStr for Suite {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "univariate" => Suite::Univariate,
            "kappa" => Suite::Kappa,
            "rates" => Suite::Rates,
            "uniform" => Suite::Uniform,
            "slow-lambda" | "slow_lambda" | "gamma" => Suite::SlowLambda,
            "oscillation" => Suite::Oscillation,
            "preconditions" => Suite::Preconditions,
            "all" => Suite::All,
            other => {
                return Err(Error::Config(format!(
                    "unknown suite '{other}' (expected univariate, kappa, rates, uniform, slow-lambda, oscillation, preconditions or all)"
                )))
            }
        })
    }
}

/// Inputs shared by the suites.
#[derive(Debug, Clone)]
pub struct SuiteConfig {
    pub x: Vec<f64>,
    pub n_grid: Vec<u64>,
    pub rel_tol: f64,
    pub lambda: f64,
    pub tau: f64,
}

impl Default for SuiteConfig {
    fn default() -> Self {
        SuiteConfig {
            x: vec![0.5, 2.0, 5.0],
            n_grid: DEFAULT_N_GRID.to_vec(),
            rel_tol: 0.05,
            lambda: 2.0,
            tau: 3.0,
        }
    }
}

/// Points used by the rate suite for the fixed-correlation scenarios.
pub const RATE_GRID: [f64; 5] = [0.7, 1.5, 3.0, 5.0, 10.0];
/// Points used by the κ suite.
pub const KAPPA_POINTS: [(f64, f64); 4] = [(1.0, 1.0), (2.0, 1.0), (1.0, 2.0), (3.0, 5.0)];

#[derive(Debug, Clone)]
pub struct SuiteOutcome {
    pub name: &'static str,
    pub pass: bool,
    pub summary: String,
    pub records: Vec<ProbeRecord>,
}

pub fn run_suite(suite: Suite, cfg: &SuiteConfig) -> Result<Vec<SuiteOutcome>> {
    let mut out = Vec::new();
    let want = |s: Suite| suite == s || suite == Suite::All;
    if want(Suite::Univariate) {
        let mut summary = String::new();
        let mut recs = Vec::new();
        let mut pass = true;
        for &x in &cfg.x {
            let r = verify_univariate(x, &cfg.n_grid, cfg.rel_tol)?;
            pass &= r.pass;
            summary += &format!("{r}\n");
            recs.extend(r.records());
        }
        out.push(SuiteOutcome { name: "univariate", pass, summary, records: recs });
    }
    if want(Suite::Kappa) {
        let ev = disambiguate_kappa(&KAPPA_POINTS, cfg.lambda, cfg.tau, &cfg.n_grid, RichardsonOrder::Three, 5.0)?;
        let pass = matches!(ev.decision, KappaDecision::Selected(_));
        out.push(SuiteOutcome { name: "kappa", pass, summary: format!("{ev}\n"), records: Vec::new() });
    }
    if want(Suite::Rates) {
        let mut summary = String::new();
        let mut recs = Vec::new();
        let mut pass = true;
        for rho in [Correlation::ZERO, Correlation::ONE] {
            for &x in &RATE_GRID {
                for &y in &RATE_GRID {
                    let r = verify_fixed_rho_rate(rho, x, y, &cfg.n_grid)?;
                    pass &= r.pass;
                    summary += &format!("{r}\n");
                    recs.extend(r.records());
                }
            }
        }
        out.push(SuiteOutcome { name: "rates", pass, summary, records: recs });
    }
    if want(Suite::Uniform) {
        let grid: Vec<(f64, f64)> = RATE_GRID.iter().flat_map(|&x| RATE_GRID.iter().map(move |&y| (x, y))).collect();
        let r = verify_uniform_convergence(&CorrelationModel::Fixed(Correlation::ZERO), Lambda::Infinite, &cfg.n_grid, &grid, 0.05)?;
        out.push(SuiteOutcome { name: "uniform", pass: r.pass, summary: format!("{r}\n"), records: Vec::new() });
    }
    if want(Suite::SlowLambda) {
        let grid = [100_000, 1_000_000, 10_000_000, 100_000_000, 1_000_000_000];
        let mut summary = String::new();
        let mut recs = Vec::new();
        let mut pass = true;
        for (x, y) in [(2.0, 1.0), (3.0, 5.0)] {
            let r = verify_slow_lambda(x, y, cfg.lambda, &grid, 0.15)?;
            pass &= r.pass;
            summary += &format!("{r}\n");
            recs.extend(r.records());
        }
        out.push(SuiteOutcome { name: "slow-lambda", pass, summary, records: recs });
    }
    if want(Suite::Oscillation) {
        let grid = [10_000, 10_001, 1_000_000, 1_000_001, 100_000_000, 100_000_001];
        let rows = oscillation_demo(2.0, 1.0, cfg.lambda, &grid)?;
        let mut summary = String::from("oscillating correlations at (2, 1): b_n^2 (F^n - H) by parity\n");
        for r in &rows {
            summary += &format!(
                "  n = {:>10}  b_n^2-scaled {:+.5e}  natural-scaled {:+.5e}  its limit {:+.5e}\n",
                r.n, r.bn_sq_scaled, r.natural_scaled, r.target
            );
        }
        out.push(SuiteOutcome { name: "oscillation", pass: true, summary, records: Vec::new() });
    }
    if want(Suite::Preconditions) {
        let a = lambda_infinite_precondition(&CorrelationModel::Fixed(Correlation::ZERO), &cfg.n_grid)?;
        let b = lambda_zero_precondition(&CorrelationModel::Fixed(Correlation::ONE), &cfg.n_grid)?;
        let mut summary = format!("{a}\n{b}\n");
        for &n in &cfg.n_grid {
            let nf = noise_floor(n, KERNEL_ABS_ACCURACY)?;
            summary += &format!("noise floor n={n}: scaled kernel noise {:.2e}\n", nf.scaled_noise);
        }
        summary += &format!(
            "largest usable n at 1e-3 scaled noise: {}\n",
            max_usable_n(KERNEL_ABS_ACCURACY, 1e-3)?
        );
        out.push(SuiteOutcome {
            name: "preconditions",
            pass: a.non_increasing && b.non_increasing,
            summary,
            records: Vec::new(),
        });
    }
    Ok(out)
}
