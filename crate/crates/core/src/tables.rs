//! Absolute-error tables `Δᵢ = |F^n - Lᵢ|` under both normalizations, the
//! embedded reference tables, and cell-by-cell comparison against them.
//!
//! Reference files are plain text: a header line
//! `# table=<id> scenario=<scenario>`, then CSV with columns
//! `x,y,metric,n,value`. `metric` is `delta1p`, `delta1l`, or `delta{2,3,4}p` /
//! `delta{2,3,4}l` for the second-order column of the scenario's regime.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::io::Write;
use std::str::FromStr;

use rayon::prelude::*;

use crate::actuals::{fn_linear, fn_power};
use crate::error::{Error, Result};
use crate::expansions::{approximant_linear, approximant_power, KappaVariant, Normalization, Order};
use crate::norming::{norming_constant, rho_of_n, CorrelationModel, Lambda, RegimeParams};
use crate::special::Correlation;

/// Default per-cell tolerance against reference values.
pub const DEFAULT_TOLERANCE: f64 = 5e-4;
/// Cells off by more than this under every κ variant are flagged as
/// suspected transcription errors.
pub const TRANSCRIPTION_TOLERANCE: f64 = 5e-3;

const REFERENCE_FILES: [&str; 4] = [
    include_str!("../data/table1.csv"),
    include_str!("../data/table2.csv"),
    include_str!("../data/table3.csv"),
    include_str!("../data/table4.csv"),
];

/// Correlation scenario of a table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Scenario {
    /// `ρ_n = 1 - 2λ²/b² + 4τλ/b⁴ - 2τ²/b⁶`. Without τ the sequence is
    /// `ρ_n = 1 - 2λ²/b²` and only first-order approximants are available.
    HuslerReiss { lambda: f64, tau: Option<f64> },
    Fixed(Correlation),
}

impl Scenario {
    pub fn husler_reiss(lambda: f64, tau: Option<f64>) -> Result<Self> {
        match tau {
            Some(t) => RegimeParams::with_tau(lambda, t)?,
            None => RegimeParams::finite(lambda)?,
        };
        Ok(Scenario::HuslerReiss { lambda, tau })
    }

    pub fn fixed(rho: f64) -> Result<Self> {
        Ok(Scenario::Fixed(Correlation::new(rho)?))
    }

    pub fn model(&self) -> Result<CorrelationModel> {
        match *self {
            Scenario::HuslerReiss { lambda, tau: Some(t) } => CorrelationModel::second_order(lambda, t),
            Scenario::HuslerReiss { lambda, tau: None } => {
                RegimeParams::finite(lambda)?;
                Ok(CorrelationModel::sequence(move |nc| 1.0 - 2.0 * lambda * lambda / nc.bn_sq()))
            }
            Scenario::Fixed(r) => Ok(CorrelationModel::Fixed(r)),
        }
    }

    pub fn regime(&self) -> Result<RegimeParams> {
        match *self {
            Scenario::HuslerReiss { lambda, tau: Some(t) } => RegimeParams::with_tau(lambda, t),
            Scenario::HuslerReiss { lambda, tau: None } => RegimeParams::finite(lambda),
            Scenario::Fixed(r) if r.is_comonotone() => Ok(RegimeParams::zero()),
            Scenario::Fixed(_) => Ok(RegimeParams::infinite()),
        }
    }

    /// Index of the second-order approximant: 2 (finite λ), 3 (λ = ∞) or 4 (λ = 0).
    pub fn second_order_index(&self) -> u8 {
        match self {
            Scenario::HuslerReiss { .. } => 2,
            Scenario::Fixed(r) if r.is_comonotone() => 4,
            Scenario::Fixed(_) => 3,
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::HuslerReiss { lambda, tau: Some(t) } => {
                write!(f, "second_order(lambda={lambda},tau={t})")
            }
            Scenario::HuslerReiss { lambda, tau: None } => write!(f, "second_order(lambda={lambda})"),
            Scenario::Fixed(r) => write!(f, "fixed(rho={})", r.value()),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    /// Parses the form produced by `Display`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Config(format!("cannot parse scenario '{s}'"));
        let s = s.trim();
        let (head, rest) = s.split_once('(').ok_or_else(bad)?;
        let body = rest.strip_suffix(')').ok_or_else(bad)?;
        let mut kv = BTreeMap::new();
        for part in body.split(',').filter(|p| !p.trim().is_empty()) {
            let (k, v) = part.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.trim().parse().map_err(|_| bad())?;
            kv.insert(k.trim().to_string(), v);
        }
        match head.trim() {
            "second_order" => {
                let lambda = *kv.get("lambda").ok_or_else(bad)?;
                Scenario::husler_reiss(lambda, kv.get("tau").copied())
            }
            "fixed" => Scenario::fixed(*kv.get("rho").ok_or_else(bad)?),
            _ => Err(bad()),
        }
    }
}

/// A point `(x, y)` at which both normalizations are evaluated.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalPoint {
    pub x: f64,
    pub y: f64,
}

impl EvalPoint {
    pub fn new(x: f64, y: f64) -> Self {
        EvalPoint { x, y }
    }

    fn key(&self) -> (u64, u64) {
        (self.x.to_bits(), self.y.to_bits())
    }
}

impl fmt::Display for EvalPoint {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{})", self.x, self.y)
    }
}

/// What to compute for a table.
#[derive(Debug, Clone, PartialEq)]
pub struct TableSpec {
    pub scenario: Scenario,
    pub sample_sizes: Vec<u64>,
    pub points: Vec<EvalPoint>,
    pub variant: KappaVariant,
}

impl TableSpec {
    pub fn new(scenario: Scenario, sample_sizes: Vec<u64>, points: Vec<EvalPoint>) -> Result<Self> {
        if sample_sizes.is_empty() || sample_sizes.iter().any(|&n| n < 2) {
            return Err(Error::Config(format!(
                "sample sizes must be non-empty and at least 2, got {sample_sizes:?}"
            )));
        }
        if let Some(p) = points.iter().find(|p| !(p.x > 0.0 && p.y > 0.0 && p.x.is_finite() && p.y.is_finite())) {
            return Err(Error::Config(format!("table points must be positive and finite, got {p}")));
        }
        Ok(TableSpec {
            scenario,
            sample_sizes,
            points,
            variant: KappaVariant::default(),
        })
    }

    pub fn with_variant(mut self, variant: KappaVariant) -> Self {
        self.variant = variant;
        self
    }

    /// Scenario, points and sample sizes of a built-in reference table.
    pub fn for_reference(reference: &ReferenceTable) -> Result<Self> {
        TableSpec::new(reference.scenario, reference.sample_sizes(), reference.points().to_vec())
    }
}

/// Actual value, approximants and errors for one normalization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormCell {
    pub actual: f64,
    pub first: f64,
    pub second: f64,
    pub delta1: f64,
    pub delta2: f64,
}

impl NormCell {
    fn new(actual: f64, first: f64, second: f64) -> Self {
        NormCell {
            actual,
            first,
            second,
            delta1: (actual - first).abs(),
            delta2: (actual - second).abs(),
        }
    }
}

/// One `(point, n)` row of a generated table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TableRow {
    pub point: EvalPoint,
    pub n: u64,
    pub bn: f64,
    pub rho: f64,
    pub rho_clamped: bool,
    pub power: NormCell,
    pub linear: NormCell,
}

impl TableRow {
    pub fn delta(&self, metric: Metric) -> f64 {
        match metric {
            Metric::Delta1Power => self.power.delta1,
            Metric::Delta2Power => self.power.delta2,
            Metric::Delta1Linear => self.linear.delta1,
            Metric::Delta2Linear => self.linear.delta2,
        }
    }
}

/// Evaluate one row.
pub fn evaluate_row(
    point: EvalPoint,
    n: u64,
    model: &CorrelationModel,
    regime: RegimeParams,
    variant: KappaVariant,
) -> Result<TableRow> {
    let nc = norming_constant(n)?;
    let rv = rho_of_n(model, &nc)?;
    let (x, y) = (point.x, point.y);
    let power = NormCell::new(
        fn_power(x, y, &nc, rv.rho)?.value,
        approximant_power(x, y, &nc, regime, Order::First, variant)?.value,
        approximant_power(x, y, &nc, regime, Order::Second, variant)?.value,
    );
    let linear = NormCell::new(
        fn_linear(x, y, &nc, rv.rho)?.value,
        approximant_linear(x, y, &nc, regime, Order::First)?.value,
        approximant_linear(x, y, &nc, regime, Order::Second)?.value,
    );
    Ok(TableRow {
        point,
        n,
        bn: nc.bn(),
        rho: rv.rho.value(),
        rho_clamped: rv.clamped,
        power,
        linear,
    })
}

/// All rows of `spec`, ordered by point then sample size. Rows are evaluated
/// in parallel; the result does not depend on scheduling.
pub fn generate_table(spec: &TableSpec) -> Result<Vec<TableRow>> {
    let model = spec.scenario.model()?;
    let regime = spec.scenario.regime()?;
    if matches!(regime.lambda(), Lambda::Finite(_)) && regime.tau().is_none() {
        return Err(Error::Config(format!(
            "scenario {} has no tau; second-order columns need one",
            spec.scenario
        )));
    }
    let tasks: Vec<(EvalPoint, u64)> = spec
        .points
        .iter()
        .flat_map(|&p| spec.sample_sizes.iter().map(move |&n| (p, n)))
        .collect();
    tasks
        .par_iter()
        .map(|&(p, n)| evaluate_row(p, n, &model, regime, spec.variant))
        .collect()
}

/// Column of a table.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Metric {
    Delta1Power,
    Delta1Linear,
    Delta2Power,
    Delta2Linear,
}

impl Metric {
    pub const ALL: [Metric; 4] = [
        Metric::Delta1Power,
        Metric::Delta1Linear,
        Metric::Delta2Power,
        Metric::Delta2Linear,
    ];

    pub fn is_first_order(self) -> bool {
        matches!(self, Metric::Delta1Power | Metric::Delta1Linear)
    }

    pub fn normalization(self) -> Normalization {
        match self {
            Metric::Delta1Power | Metric::Delta2Power => Normalization::Power,
            Metric::Delta1Linear | Metric::Delta2Linear => Normalization::Linear,
        }
    }

    /// File name of the metric, given the second-order index of the scenario.
    pub fn name(self, second_order_index: u8) -> String {
        match self {
            Metric::Delta1Power => "delta1p".into(),
            Metric::Delta1Linear => "delta1l".into(),
            Metric::Delta2Power => format!("delta{second_order_index}p"),
            Metric::Delta2Linear => format!("delta{second_order_index}l"),
        }
    }

    fn parse(s: &str, second_order_index: u8) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name(second_order_index) == s)
    }
}

/// One printed reference cell.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceCell {
    pub point: EvalPoint,
    pub n: u64,
    pub metric: Metric,
    pub value: f64,
    /// The value exactly as written in the file.
    pub text: String,
}

/// A reference table as transcribed.
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTable {
    pub table_id: u8,
    pub scenario: Scenario,
    points: Vec<EvalPoint>,
    cells: Vec<ReferenceCell>,
}

impl ReferenceTable {
    /// Built-in table 1 to 4.
    pub fn builtin(id: u8) -> Result<Self> {
        match id {
            1..=4 => ReferenceTable::parse(REFERENCE_FILES[usize::from(id) - 1]),
            _ => Err(Error::Config(format!("unknown table {id} (expected 1, 2, 3 or 4)"))),
        }
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        ReferenceTable::parse(&std::fs::read_to_string(path)?)
    }

    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or(Error::Parse {
            line: 1,
            msg: "empty reference file".into(),
        })?;
        let (table_id, scenario) = parse_header(header)?;
        let index = scenario.second_order_index();
        match lines.next() {
            Some((_, l)) if l.trim() == "x,y,metric,n,value" => {}
            Some((i, l)) => {
                return Err(Error::Parse {
                    line: i + 1,
                    msg: format!("expected column header 'x,y,metric,n,value', got '{l}'"),
                })
            }
            None => {
                return Err(Error::Parse {
                    line: 2,
                    msg: "missing column header".into(),
                })
            }
        }
        let mut points = Vec::new();
        let mut seen_points = BTreeSet::new();
        let mut seen_cells = BTreeSet::new();
        let mut cells = Vec::new();
        for (i, line) in lines {
            let err = |msg: String| Error::Parse { line: i + 1, msg };
            let fields: Vec<&str> = line.split(',').map(str::trim).collect();
            if fields.len() != 5 {
                return Err(err(format!("expected 5 fields, got {}", fields.len())));
            }
            let num = |s: &str, what: &str| -> Result<f64> {
                s.parse::<f64>().map_err(|_| err(format!("invalid {what} '{s}'")))
            };
            let point = EvalPoint::new(num(fields[0], "x")?, num(fields[1], "y")?);
            let metric = Metric::parse(fields[2], index)
                .ok_or_else(|| err(format!("unknown metric '{}' for {scenario}", fields[2])))?;
            let n: u64 = fields[3].parse().map_err(|_| err(format!("invalid n '{}'", fields[3])))?;
            let value = num(fields[4], "value")?;
            if !(value >= 0.0) {
                return Err(err(format!("negative error value {value}")));
            }
            if !seen_cells.insert((point.key(), n, metric)) {
                return Err(err(format!("duplicate cell {point} n={n} {}", fields[2])));
            }
            if seen_points.insert(point.key()) {
                points.push(point);
            }
            cells.push(ReferenceCell {
                point,
                n,
                metric,
                value,
                text: fields[4].to_string(),
            });
        }
        Ok(ReferenceTable {
            table_id,
            scenario,
            points,
            cells,
        })
    }

    pub fn points(&self) -> &[EvalPoint] {
        &self.points
    }

    pub fn cells(&self) -> &[ReferenceCell] {
        &self.cells
    }

    pub fn sample_sizes(&self) -> Vec<u64> {
        let set: BTreeSet<u64> = self.cells.iter().map(|c| c.n).collect();
        set.into_iter().collect()
    }

    pub fn get(&self, point: EvalPoint, n: u64, metric: Metric) -> Option<&ReferenceCell> {
        self.cells
            .iter()
            .find(|c| c.point.key() == point.key() && c.n == n && c.metric == metric)
    }
}

fn parse_header(line: &str) -> Result<(u8, Scenario)> {
    let err = |msg: &str| Error::Parse {
        line: 1,
        msg: msg.to_string(),
    };
    let body = line
        .trim()
        .strip_prefix('#')
        .ok_or_else(|| err("header must start with '#'"))?
        .trim();
    let rest = body
        .strip_prefix("table=")
        .ok_or_else(|| err("header must start with 'table=<id>'"))?;
    let (id, scen) = rest
        .split_once(char::is_whitespace)
        .ok_or_else(|| err("header needs 'scenario=<...>'"))?;
    let id: u8 = id.parse().map_err(|_| err("invalid table id"))?;
    let scen = scen
        .trim()
        .strip_prefix("scenario=")
        .ok_or_else(|| err("header needs 'scenario=<...>'"))?;
    let scenario = scen.parse().map_err(|e: Error| err(&e.to_string()))?;
    Ok((id, scenario))
}

/// Deviation of one computed cell from its reference.
#[derive(Debug, Clone, PartialEq)]
pub struct CellComparison {
    pub point: EvalPoint,
    pub n: u64,
    pub metric: Metric,
    pub computed: f64,
    pub reference: f64,
    pub reference_text: String,
    pub deviation: f64,
    pub pass: bool,
}

/// Result of comparing generated rows against a reference table.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub table_id: u8,
    pub tolerance: f64,
    pub cells: Vec<CellComparison>,
}

impl ComparisonReport {
    pub fn total(&self) -> usize {
        self.cells.len()
    }

    pub fn passed(&self) -> usize {
        self.cells.iter().filter(|c| c.pass).count()
    }

    pub fn fraction(&self) -> f64 {
        ratio(self.passed(), self.total())
    }

    /// `(passed, total)` over cells whose metric satisfies `keep`.
    pub fn count_where(&self, keep: impl Fn(Metric) -> bool) -> (usize, usize) {
        let sel: Vec<_> = self.cells.iter().filter(|c| keep(c.metric)).collect();
        (sel.iter().filter(|c| c.pass).count(), sel.len())
    }

    pub fn failing(&self) -> impl Iterator<Item = &CellComparison> {
        self.cells.iter().filter(|c| !c.pass)
    }

    /// The `k` cells with the largest deviation.
    pub fn worst(&self, k: usize) -> Vec<&CellComparison> {
        let mut v: Vec<_> = self.cells.iter().collect();
        v.sort_by(|a, b| b.deviation.total_cmp(&a.deviation));
        v.truncate(k);
        v
    }
}

fn ratio(a: usize, b: usize) -> f64 {
    if b == 0 {
        1.0
    } else {
        a as f64 / b as f64
    }
}

/// Compare every reference cell with the matching computed cell. The sets of
/// `(point, n)` must agree exactly.
pub fn compare_to_reference(rows: &[TableRow], reference: &ReferenceTable, tol: f64) -> Result<ComparisonReport> {
    if !(tol >= 0.0) {
        return Err(Error::Config(format!("tolerance must be non-negative, got {tol}")));
    }
    let computed: BTreeMap<((u64, u64), u64), &TableRow> =
        rows.iter().map(|r| ((r.point.key(), r.n), r)).collect();
    let expected: BTreeSet<((u64, u64), u64)> =
        reference.cells().iter().map(|c| (c.point.key(), c.n)).collect();
    let describe = |k: &((u64, u64), u64)| {
        format!("({},{}) n={}", f64::from_bits(k.0 .0), f64::from_bits(k.0 .1), k.1)
    };
    let missing: Vec<String> = expected.iter().filter(|k| !computed.contains_key(k)).map(describe).collect();
    let extra: Vec<String> = computed.keys().filter(|k| !expected.contains(k)).map(describe).collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(Error::Structural(format!(
            "point sets differ; missing: [{}]; extra: [{}]",
            missing.join(", "),
            extra.join(", ")
        )));
    }
    let cells = reference
        .cells()
        .iter()
        .map(|c| {
            let row = computed[&(c.point.key(), c.n)];
            let value = row.delta(c.metric);
            let deviation = (value - c.value).abs();
            CellComparison {
                point: c.point,
                n: c.n,
                metric: c.metric,
                computed: value,
                reference: c.value,
                reference_text: c.text.clone(),
                deviation,
                pass: deviation <= tol,
            }
        })
        .collect();
    Ok(ComparisonReport {
        table_id: reference.table_id,
        tolerance: tol,
        cells,
    })
}

/// A built-in table regenerated under every κ variant.
#[derive(Debug, Clone)]
pub struct VariantComparison {
    pub reports: Vec<(KappaVariant, ComparisonReport)>,
}

impl VariantComparison {
    pub fn report(&self, variant: KappaVariant) -> &ComparisonReport {
        &self
            .reports
            .iter()
            .find(|(v, _)| *v == variant)
            .expect("every variant is evaluated")
            .1
    }

    /// Variant matching more second-order power cells; `None` on a tie.
    pub fn better_matching(&self) -> Option<KappaVariant> {
        let score = |v| self.report(v).count_where(|m| m == Metric::Delta2Power).0;
        let (a, b) = (KappaVariant::AsPrinted, KappaVariant::TailScaled);
        match score(a).cmp(&score(b)) {
            std::cmp::Ordering::Greater => Some(a),
            std::cmp::Ordering::Less => Some(b),
            std::cmp::Ordering::Equal => None,
        }
    }

    /// Cells failing under every variant at `tol`, from the first report.
    pub fn failing_under_all(&self, tol: f64) -> Vec<CellComparison> {
        let (_, first) = &self.reports[0];
        first
            .cells
            .iter()
            .enumerate()
            .filter(|(i, _)| self.reports.iter().all(|(_, r)| r.cells[*i].deviation > tol))
            .map(|(_, c)| c.clone())
            .collect()
    }
}

/// Regenerate a reference table once per κ variant and compare each at `tol`.
pub fn compare_variants(reference: &ReferenceTable, tol: f64) -> Result<VariantComparison> {
    let spec = TableSpec::for_reference(reference)?;
    let reports = KappaVariant::ALL
        .into_iter()
        .map(|v| {
            let rows = generate_table(&spec.clone().with_variant(v))?;
            Ok((v, compare_to_reference(&rows, reference, tol)?))
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(VariantComparison { reports })
}

/// Number formatting for CSV output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Rounding {
    /// 17 significant digits.
    #[default]
    Full,
    /// Fixed decimals with trailing zeros dropped; non-zero magnitudes below
    /// `10^-digits` in three-significant-digit scientific form (`4.02e-9`).
    Decimals(u8),
}

impl Rounding {
    pub fn format(self, v: f64) -> String {
        match self {
            Rounding::Full => format!("{v:.16e}"),
            Rounding::Decimals(d) => format_rounded(v, d),
        }
    }
}

fn format_rounded(v: f64, digits: u8) -> String {
    if v == 0.0 {
        return "0".into();
    }
    if !v.is_finite() {
        return v.to_string();
    }
    if v.abs() < 10f64.powi(-i32::from(digits)) {
        return format!("{v:.2e}");
    }
    let s = format!("{v:.*}", usize::from(digits));
    let s = if s.contains('.') { s.trim_end_matches('0').trim_end_matches('.') } else { &s };
    if s == "-0" {
        "0".into()
    } else {
        s.to_string()
    }
}

pub const CSV_HEADER: &str = "x,y,n,actual_power,L1p,L2p_or_L34p,delta1p,delta2p,actual_linear,L1l,L2l_or_L34l,delta1l,delta2l";

/// Write rows as CSV with [`CSV_HEADER`].
pub fn write_csv<W: Write>(rows: &[TableRow], mut out: W, rounding: Rounding) -> Result<()> {
    writeln!(out, "{CSV_HEADER}")?;
    for r in rows {
        let f = |v: f64| rounding.format(v);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.point.x,
            r.point.y,
            r.n,
            f(r.power.actual),
            f(r.power.first),
            f(r.power.second),
            f(r.power.delta1),
            f(r.power.delta2),
            f(r.linear.actual),
            f(r.linear.first),
            f(r.linear.second),
            f(r.linear.delta1),
            f(r.linear.delta2),
        )?;
    }
    Ok(())
}
