//! Command-line front end. Every command parses its flags, calls the library
//! and formats the result; no numerics live here.
//!
//! Exit codes: 0 success, 1 a numeric tolerance was not met, 2 usage or
//! domain error.

use std::ffi::OsString;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::actuals::{fn_linear, fn_power};
use crate::error::{Error, Result};
use crate::expansions::{approximant_linear, approximant_power, KappaVariant, Order};
use crate::harness::{self, Suite, SuiteConfig};
use crate::norming::{norming_constant, rho_of_n, solve_bn};
use crate::tables::{
    compare_to_reference, compare_variants, generate_table, write_csv, EvalPoint, Metric, ReferenceTable, Rounding,
    Scenario, TableSpec, DEFAULT_TOLERANCE, TRANSCRIPTION_TOLERANCE,
};

pub const EXIT_OK: i32 = 0;
pub const EXIT_TOLERANCE: i32 = 1;
pub const EXIT_USAGE: i32 = 2;

/// Environment variable overriding the default comparison tolerance.
pub const ENV_TOLERANCE: &str = "GAUSS_MAXIMA_TOL";
/// Environment variable overriding the default κ variant.
pub const ENV_KAPPA: &str = "GAUSS_MAXIMA_KAPPA";

#[derive(Debug, Parser)]
#[command(name = "gauss-maxima", version, about = "Second-order asymptotics of bivariate Gaussian maxima")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve n(1 - Φ(b_n)) = 1 for b_n.
    Bn {
        #[arg(long)]
        n: u64,
    },
    /// Actual value, approximants and errors at one point.
    Eval(EvalArgs),
    /// Regenerate an error table and compare it with reference values.
    Table(TableArgs),
    /// Actual value and approximants along the diagonal x = y.
    Curve(CurveArgs),
    /// Actual value and approximants over a square grid (long format).
    Contour(ContourArgs),
    /// Run convergence checks.
    Verify(VerifyArgs),
}

/// Correlation scenario: `--lambda [--tau]` or `--rho`.
#[derive(Debug, Clone, Args)]
pub struct ScenarioArgs {
    /// Hüsler–Reiss parameter of ρ_n = 1 - 2λ²/b² + 4τλ/b⁴ - 2τ²/b⁶.
    #[arg(long, conflicts_with = "rho", allow_negative_numbers = true)]
    pub lambda: Option<f64>,
    /// Second-order parameter; needs --lambda.
    #[arg(long, requires = "lambda", allow_negative_numbers = true)]
    pub tau: Option<f64>,
    /// Fixed correlation in [-1, 1].
    #[arg(long, allow_negative_numbers = true)]
    pub rho: Option<f64>,
}

impl ScenarioArgs {
    fn scenario(&self) -> Result<Scenario> {
        match (self.lambda, self.rho) {
            (Some(l), None) => Scenario::husler_reiss(l, self.tau).map_err(|e| flag_error("--lambda/--tau", e)),
            (None, Some(r)) => Scenario::fixed(r).map_err(|e| flag_error("--rho", e)),
            _ => Err(Error::Config("give either --lambda (with optional --tau) or --rho".into())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum NormArg {
    Power,
    Linear,
    Both,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum KappaArg {
    AsPrinted,
    TailScaled,
}

impl From<KappaArg> for KappaVariant {
    fn from(k: KappaArg) -> Self {
        match k {
            KappaArg::AsPrinted => KappaVariant::AsPrinted,
            KappaArg::TailScaled => KappaVariant::TailScaled,
        }
    }
}

#[derive(Debug, Clone, Args)]
pub struct OutputArgs {
    /// Round to this many decimals; smaller magnitudes use scientific form.
    #[arg(long)]
    pub round: Option<u8>,
    /// Write CSV here instead of standard output.
    #[arg(long)]
    pub output: Option<PathBuf>,
}

impl OutputArgs {
    fn rounding(&self) -> Rounding {
        self.round.map_or(Rounding::Full, Rounding::Decimals)
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long, allow_negative_numbers = true)]
    pub x: f64,
    #[arg(long, allow_negative_numbers = true)]
    pub y: f64,
    #[arg(long)]
    pub n: u64,
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long, value_enum, default_value = "both")]
    pub norm: NormArg,
    /// 1 for L1 only, 2 to include the second-order approximant.
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=2))]
    pub order: u8,
    #[arg(long, value_enum, env = ENV_KAPPA)]
    pub kappa: Option<KappaArg>,
    #[arg(long)]
    pub round: Option<u8>,
}

#[derive(Debug, Args)]
pub struct TableArgs {
    /// Built-in table 1 to 4.
    #[arg(long, conflicts_with_all = ["scenario", "points"])]
    pub id: Option<u8>,
    /// Custom scenario, e.g. `fixed(rho=0.5)` or `second_order(lambda=1,tau=2)`.
    #[arg(long, requires = "points")]
    pub scenario: Option<String>,
    /// Custom points as `x:y` pairs, comma separated.
    #[arg(long, value_delimiter = ',', value_parser = parse_point)]
    pub points: Option<Vec<EvalPoint>>,
    /// Sample sizes, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<u64>>,
    /// Reference file to compare against (defaults to the built-in one for --id).
    #[arg(long)]
    pub reference: Option<PathBuf>,
    #[arg(long, env = ENV_TOLERANCE, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
    /// Fraction of cells that must be within --tol for exit status 0.
    #[arg(long, default_value_t = 1.0)]
    pub min_pass: f64,
    #[arg(long, value_enum, env = ENV_KAPPA)]
    pub kappa: Option<KappaArg>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct CurveArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub n: u64,
    /// Start of the grid; defaults to xmax/steps.
    #[arg(long, allow_negative_numbers = true)]
    pub xmin: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub xmax: f64,
    /// Number of grid points.
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "power")]
    pub norm: NormArg,
    #[arg(long, value_enum, env = ENV_KAPPA)]
    pub kappa: Option<KappaArg>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct ContourArgs {
    #[command(flatten)]
    pub scenario: ScenarioArgs,
    #[arg(long)]
    pub n: u64,
    /// Start of the grid on both axes; defaults to max/steps.
    #[arg(long, allow_negative_numbers = true)]
    pub min: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    pub max: f64,
    /// Grid points per axis.
    #[arg(long, default_value_t = 50)]
    pub steps: usize,
    #[arg(long, value_enum, default_value = "power")]
    pub norm: NormArg,
    #[arg(long, value_enum, env = ENV_KAPPA)]
    pub kappa: Option<KappaArg>,
    #[command(flatten)]
    pub output: OutputArgs,
}

#[derive(Debug, Args)]
pub struct VerifyArgs {
    /// univariate, kappa, rates, uniform, slow-lambda, oscillation, preconditions or all.
    #[arg(long, default_value = "all")]
    pub suite: String,
    /// Points for the univariate check, comma separated.
    #[arg(long, value_delimiter = ',')]
    pub x: Option<Vec<f64>>,
    /// Sample sizes, comma separated and increasing.
    #[arg(long, value_delimiter = ',')]
    pub n_grid: Option<Vec<u64>>,
    /// Relative tolerance of the univariate check.
    #[arg(long, default_value_t = 0.05)]
    pub rel_tol: f64,
    /// Write per-sample CSV records here.
    #[arg(long)]
    pub csv: Option<PathBuf>,
}

fn parse_point(s: &str) -> std::result::Result<EvalPoint, String> {
    let (x, y) = s.split_once(':').ok_or_else(|| format!("expected x:y, got '{s}'"))?;
    let x = x.trim().parse::<f64>().map_err(|e| format!("bad x in '{s}': {e}"))?;
    let y = y.trim().parse::<f64>().map_err(|e| format!("bad y in '{s}': {e}"))?;
    Ok(EvalPoint::new(x, y))
}

fn flag_error(flag: &str, e: Error) -> Error {
    match e {
        Error::Config(msg) => Error::Config(format!("{flag}: {msg}")),
        other => Error::Config(format!("{flag}: {other}")),
    }
}

fn kappa_of(k: Option<KappaArg>) -> KappaVariant {
    k.map(KappaVariant::from).unwrap_or_default()
}

/// Parse `args` (including the program name) and run the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
            let text = e.render().to_string();
            let _ = if e.use_stderr() { err.write_all(text.as_bytes()) } else { out.write_all(text.as_bytes()) };
            return code;
        }
    };
    match dispatch(cli.command, out, err) {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            match e {
                Error::Consistency(_) => EXIT_TOLERANCE,
                _ => EXIT_USAGE,
            }
        }
    }
}

fn dispatch(cmd: Command, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    match cmd {
        Command::Bn { n } => cmd_bn(n, out),
        Command::Eval(a) => cmd_eval(&a, out),
        Command::Table(a) => cmd_table(&a, out, err),
        Command::Curve(a) => cmd_curve(&a, out),
        Command::Contour(a) => cmd_contour(&a, out),
        Command::Verify(a) => cmd_verify(&a, out),
    }
}

fn cmd_bn(n: u64, out: &mut dyn Write) -> Result<i32> {
    let nc = solve_bn(n).map_err(|e| flag_error("--n", e))?;
    writeln!(out, "n,bn,residual")?;
    writeln!(out, "{},{},{:.3e}", nc.n(), nc.bn(), nc.residual())?;
    Ok(EXIT_OK)
}

fn cmd_eval(a: &EvalArgs, out: &mut dyn Write) -> Result<i32> {
    let scenario = a.scenario.scenario()?;
    let nc = norming_constant(a.n).map_err(|e| flag_error("--n", e))?;
    let rho = rho_of_n(&scenario.model()?, &nc)?;
    let regime = scenario.regime()?;
    let variant = kappa_of(a.kappa);
    let rounding = a.round.map_or(Rounding::Full, Rounding::Decimals);
    let k = scenario.second_order_index();
    let second = a.order == 2;

    let mut rows: Vec<(&str, f64, f64, Option<f64>)> = Vec::new();
    if matches!(a.norm, NormArg::Power | NormArg::Both) {
        let actual = fn_power(a.x, a.y, &nc, rho.rho).map_err(|e| flag_error("--x/--y", e))?.value;
        let first = approximant_power(a.x, a.y, &nc, regime, Order::First, variant)?.value;
        let snd = if second {
            Some(approximant_power(a.x, a.y, &nc, regime, Order::Second, variant).map_err(|e| flag_error("--tau", e))?.value)
        } else {
            None
        };
        rows.push(("power", actual, first, snd));
    }
    if matches!(a.norm, NormArg::Linear | NormArg::Both) {
        let actual = fn_linear(a.x, a.y, &nc, rho.rho).map_err(|e| flag_error("--x/--y", e))?.value;
        let first = approximant_linear(a.x, a.y, &nc, regime, Order::First)?.value;
        let snd = if second {
            Some(approximant_linear(a.x, a.y, &nc, regime, Order::Second).map_err(|e| flag_error("--tau", e))?.value)
        } else {
            None
        };
        rows.push(("linear", actual, first, snd));
    }

    writeln!(out, "# n={} bn={} rho_n={} scenario={scenario} kappa={variant}", a.n, nc.bn(), rho.rho)?;
    if second {
        writeln!(out, "normalization,actual,L1,L{k},delta1,delta{k}")?;
    } else {
        writeln!(out, "normalization,actual,L1,delta1")?;
    }
    let f = |v: f64| rounding.format(v);
    for (name, actual, first, snd) in rows {
        match snd {
            Some(l2) => writeln!(
                out,
                "{name},{},{},{},{},{}",
                f(actual),
                f(first),
                f(l2),
                f((actual - first).abs()),
                f((actual - l2).abs())
            )?,
            None => writeln!(out, "{name},{},{},{}", f(actual), f(first), f((actual - first).abs()))?,
        }
    }
    Ok(EXIT_OK)
}

fn open_output<'a>(path: &Option<PathBuf>, out: &'a mut dyn Write) -> Result<Box<dyn Write + 'a>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p)?)),
        None => Box::new(out),
    })
}

fn cmd_table(a: &TableArgs, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32> {
    if !(0.0..=1.0).contains(&a.min_pass) {
        return Err(Error::Config(format!("--min-pass must lie in [0, 1], got {}", a.min_pass)));
    }
    let variant = kappa_of(a.kappa);
    let builtin = a.id.map(ReferenceTable::builtin).transpose().map_err(|e| flag_error("--id", e))?;
    let reference = match &a.reference {
        Some(p) => Some(ReferenceTable::load(p).map_err(|e| flag_error("--reference", e))?),
        None => builtin.clone(),
    };
    let mut spec = match (&builtin, &a.scenario, &a.points) {
        (Some(r), _, _) => TableSpec::for_reference(r)?,
        (None, Some(s), Some(points)) => {
            let scenario: Scenario = s.parse().map_err(|e| flag_error("--scenario", e))?;
            TableSpec::new(scenario, vec![1_000, 10_000], points.clone())?
        }
        (None, None, Some(points)) => match &reference {
            Some(r) => TableSpec::new(r.scenario, r.sample_sizes(), points.clone())?,
            None => return Err(Error::Config("--points needs --scenario or --reference".into())),
        },
        (None, _, None) => match &reference {
            Some(r) => TableSpec::for_reference(r)?,
            None => return Err(Error::Config("give --id, --reference, or --scenario with --points".into())),
        },
    };
    if let Some(ns) = &a.n {
        spec.sample_sizes = ns.clone();
    }
    let spec = TableSpec::new(spec.scenario, spec.sample_sizes, spec.points).map_err(|e| flag_error("--n", e))?;
    let spec = spec.with_variant(variant);
    let rows = generate_table(&spec)?;
    {
        let mut w = open_output(&a.output.output, out)?;
        write_csv(&rows, &mut w, a.output.rounding())?;
        w.flush()?;
    }
    let Some(reference) = reference else {
        return Ok(EXIT_OK);
    };
    let report = compare_to_reference(&rows, &reference, a.tol)?;
    let (p1, t1) = report.count_where(Metric::is_first_order);
    let (p2, t2) = report.count_where(|m| !m.is_first_order());
    writeln!(
        err,
        "table {} ({}), kappa {variant}, tol {:e}: {}/{} cells within tolerance ({:.1}%); first order {p1}/{t1}, second order {p2}/{t2}",
        reference.table_id,
        reference.scenario,
        a.tol,
        report.passed(),
        report.total(),
        100.0 * report.fraction()
    )?;
    let idx = reference.scenario.second_order_index();
    for c in report.worst(5).into_iter().filter(|c| !c.pass) {
        writeln!(
            err,
            "  worst: {} n={} {} computed {:.5e} printed {} (|diff| {:.2e})",
            c.point,
            c.n,
            c.metric.name(idx),
            c.computed,
            c.reference_text,
            c.deviation
        )?;
    }
    if a.reference.is_none() && a.n.is_none() {
        let vc = compare_variants(&reference, a.tol)?;
        for (v, r) in &vc.reports {
            let (p, t) = r.count_where(|m| !m.is_first_order());
            writeln!(err, "  second-order cells under {v}: {p}/{t}")?;
        }
        for c in vc.failing_under_all(a.tol) {
            writeln!(
                err,
                "  fails under every kappa variant: {} n={} {} computed {:.5e} printed {}",
                c.point,
                c.n,
                c.metric.name(idx),
                c.computed,
                c.reference_text
            )?;
        }
        for c in vc.failing_under_all(TRANSCRIPTION_TOLERANCE) {
            writeln!(
                err,
                "  suspected transcription error (off by more than {TRANSCRIPTION_TOLERANCE:e} under every variant): {} n={} {} printed {}",
                c.point,
                c.n,
                c.metric.name(idx),
                c.reference_text
            )?;
        }
    }
    Ok(if report.fraction() >= a.min_pass { EXIT_OK } else { EXIT_TOLERANCE })
}

/// `steps` points from `min` (default `max/steps`) to `max`.
fn grid(min: Option<f64>, max: f64, steps: usize, flag: &str) -> Result<Vec<f64>> {
    if steps == 0 {
        return Err(Error::Config("--steps must be at least 1".into()));
    }
    let lo = min.unwrap_or(max / steps as f64);
    if !(lo.is_finite() && max.is_finite() && lo <= max) {
        return Err(Error::Config(format!("{flag}: grid bounds must be finite with min <= max, got [{lo}, {max}]")));
    }
    if steps == 1 {
        return Ok(vec![lo]);
    }
    let h = (max - lo) / (steps - 1) as f64;
    Ok((0..steps).map(|i| if i + 1 == steps { max } else { lo + h * i as f64 }).collect())
}

struct Series {
    actual: f64,
    first: f64,
    second: Option<f64>,
}

fn series_at(
    x: f64,
    y: f64,
    scenario: &Scenario,
    n: u64,
    norm: NormArg,
    variant: KappaVariant,
) -> Result<Series> {
    let nc = norming_constant(n)?;
    let rho = rho_of_n(&scenario.model()?, &nc)?.rho;
    let regime = scenario.regime()?;
    let has_second = regime.tau().is_some() || !matches!(regime.lambda(), crate::norming::Lambda::Finite(_));
    Ok(match norm {
        NormArg::Linear => Series {
            actual: fn_linear(x, y, &nc, rho)?.value,
            first: approximant_linear(x, y, &nc, regime, Order::First)?.value,
            second: has_second
                .then(|| approximant_linear(x, y, &nc, regime, Order::Second).map(|a| a.value))
                .transpose()?,
        },
        _ => Series {
            actual: fn_power(x, y, &nc, rho)?.value,
            first: approximant_power(x, y, &nc, regime, Order::First, variant)?.value,
            second: has_second
                .then(|| approximant_power(x, y, &nc, regime, Order::Second, variant).map(|a| a.value))
                .transpose()?,
        },
    })
}

fn check_power_grid(norm: NormArg, g: &[f64], flag: &str) -> Result<()> {
    if norm != NormArg::Linear && g.first().is_some_and(|&v| v <= 0.0) {
        return Err(Error::domain(
            "grid",
            format!("{flag}: power normalization needs a positive grid, got start {}", g[0]),
        ));
    }
    Ok(())
}

fn cmd_curve(a: &CurveArgs, out: &mut dyn Write) -> Result<i32> {
    if a.norm == NormArg::Both {
        return Err(Error::Config("--norm must be power or linear for curve".into()));
    }
    let scenario = a.scenario.scenario()?;
    let xs = grid(a.xmin, a.xmax, a.steps, "--xmin/--xmax")?;
    check_power_grid(a.norm, &xs, "--xmin/--xmax")?;
    let variant = kappa_of(a.kappa);
    let rounding = a.output.rounding();
    let mut w = open_output(&a.output.output, out)?;
    writeln!(w, "x,actual,L1,L2")?;
    for &x in &xs {
        let s = series_at(x, x, &scenario, a.n, a.norm, variant)?;
        let second = s.second.map_or(String::new(), |v| rounding.format(v));
        writeln!(w, "{x},{},{},{second}", rounding.format(s.actual), rounding.format(s.first))?;
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn cmd_contour(a: &ContourArgs, out: &mut dyn Write) -> Result<i32> {
    if a.norm == NormArg::Both {
        return Err(Error::Config("--norm must be power or linear for contour".into()));
    }
    let scenario = a.scenario.scenario()?;
    let g = grid(a.min, a.max, a.steps, "--min/--max")?;
    check_power_grid(a.norm, &g, "--min/--max")?;
    let variant = kappa_of(a.kappa);
    let rounding = a.output.rounding();
    let mut w = open_output(&a.output.output, out)?;
    writeln!(w, "x,y,series,value")?;
    for &x in &g {
        for &y in &g {
            let s = series_at(x, y, &scenario, a.n, a.norm, variant)?;
            writeln!(w, "{x},{y},actual,{}", rounding.format(s.actual))?;
            writeln!(w, "{x},{y},L1,{}", rounding.format(s.first))?;
            if let Some(v) = s.second {
                writeln!(w, "{x},{y},L2,{}", rounding.format(v))?;
            }
        }
    }
    w.flush()?;
    Ok(EXIT_OK)
}

fn cmd_verify(a: &VerifyArgs, out: &mut dyn Write) -> Result<i32> {
    let suite: Suite = a.suite.parse().map_err(|e| flag_error("--suite", e))?;
    let mut cfg = SuiteConfig::default();
    if let Some(x) = &a.x {
        cfg.x = x.clone();
    }
    if let Some(g) = &a.n_grid {
        cfg.n_grid = g.clone();
    }
    cfg.rel_tol = a.rel_tol;
    harness::check_noise_floor(&cfg.n_grid, harness::KERNEL_ABS_ACCURACY, 1e-3).map_err(|e| flag_error("--n-grid", e))?;
    let outcomes = harness::run_suite(suite, &cfg)?;
    let mut all = true;
    let mut records = Vec::new();
    for o in &outcomes {
        writeln!(out, "== {} : {}", o.name, if o.pass { "PASS" } else { "FAIL" })?;
        write!(out, "{}", o.summary)?;
        all &= o.pass;
        records.extend(o.records.iter().cloned());
    }
    if let Some(p) = &a.csv {
        let mut w = BufWriter::new(File::create(p)?);
        harness::write_csv(&records, &mut w)?;
        w.flush()?;
    }
    writeln!(out, "overall: {}", if all { "PASS" } else { "FAIL" })?;
    Ok(if all { EXIT_OK } else { EXIT_TOLERANCE })
}
