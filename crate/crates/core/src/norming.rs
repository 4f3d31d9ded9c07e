//! Norming constants `b_n`, the two normalization maps and the correlation
//! schedules `ρ_n`.

use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, OnceLock, RwLock};

use crate::error::{Error, Result};
use crate::special::{std_normal_pdf, std_normal_quantile, std_normal_tail, Correlation};

/// The solution `b_n` of `n (1 - Φ(b_n)) = 1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormingConstant {
    n: u64,
    bn: f64,
}

impl NormingConstant {
    /// Solve for `b_n`; see [`solve_bn`].
    pub fn new(n: u64) -> Result<Self> {
        solve_bn(n)
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn bn(&self) -> f64 {
        self.bn
    }

    pub fn bn_sq(&self) -> f64 {
        self.bn * self.bn
    }

    /// |n (1 - Φ(b_n)) - 1|
    pub fn residual(&self) -> f64 {
        (self.n as f64 * std_normal_tail(self.bn) - 1.0).abs()
    }
}

impl fmt::Display for NormingConstant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "n={} bn={:.17}", self.n, self.bn)
    }
}

/// Solve `n (1 - Φ(b)) = 1` for `b`.
///
/// Seeded by the upper-tail quantile of `1/n`, bracketed, then polished with
/// safeguarded Newton steps on `g(b) = n·tail(b) - 1`. The iteration is fully
/// deterministic, so the same `n` always yields the same bits.
pub fn solve_bn(n: u64) -> Result<NormingConstant> {
    if n < 2 {
        return Err(Error::domain(
            "solve_bn",
            format!("n must be at least 2 (b_1 = Φ⁻¹(0) is undefined), got {n}"),
        ));
    }
    if n == 2 {
        return Ok(NormingConstant { n, bn: 0.0 });
    }
    let nf = n as f64;
    let g = |b: f64| nf * std_normal_tail(b) - 1.0;

    let seed = -std_normal_quantile(1.0 / nf)?;
    let step = 1e-3 * (1.0 + seed.abs());
    let (mut lo, mut hi) = (seed - step, seed + step);
    while g(lo) <= 0.0 {
        lo -= 2.0 * (hi - lo);
    }
    while g(hi) >= 0.0 {
        hi += 2.0 * (hi - lo);
    }

    let mut b = seed;
    for _ in 0..200 {
        let gb = g(b);
        if gb == 0.0 {
            break;
        }
        if gb > 0.0 {
            lo = b;
        } else {
            hi = b;
        }
        let newton = b + gb / (nf * std_normal_pdf(b));
        let next = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if next == b || (next - b).abs() <= 4.0 * f64::EPSILON * b.abs() {
            b = next;
            break;
        }
        b = next;
    }
    // Newton stalls a few ulps away; keep the neighbour with the smallest |g|.
    let mut best = (g(b).abs(), b);
    let mut down = b;
    let mut up = b;
    for _ in 0..8 {
        down = next_down(down);
        up = next_up(up);
        for c in [down, up] {
            let gc = g(c).abs();
            if gc < best.0 {
                best = (gc, c);
            }
        }
    }
    Ok(NormingConstant { n, bn: best.1 })
}

fn next_up(x: f64) -> f64 {
    // positive, finite x only
    f64::from_bits(x.to_bits() + 1)
}

fn next_down(x: f64) -> f64 {
    f64::from_bits(x.to_bits() - 1)
}

/// Power normalization `u_n(x) = b_n x^{1/b_n²}`.
pub fn power_norm(x: f64, nc: &NormingConstant) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain(
            "power_norm",
            format!("x must be positive, got {x}"),
        ));
    }
    if x == 1.0 {
        return Ok(nc.bn);
    }
    if !(nc.bn > 0.0) {
        return Err(Error::domain(
            "power_norm",
            format!("power normalization needs b_n > 0 (n ≥ 3), got b_n = {}", nc.bn),
        ));
    }
    Ok(nc.bn * (x.ln() / nc.bn_sq()).exp())
}

/// Linear normalization `b_n + x / b_n`.
pub fn linear_norm(x: f64, nc: &NormingConstant) -> Result<f64> {
    if !(nc.bn > 0.0) {
        return Err(Error::domain(
            "linear_norm",
            format!("linear normalization needs b_n > 0 (n ≥ 3), got b_n = {}", nc.bn),
        ));
    }
    if !x.is_finite() {
        return Err(Error::domain("linear_norm", format!("x must be finite, got {x}")));
    }
    Ok(nc.bn + x / nc.bn)
}

/// The Hüsler–Reiss parameter λ ∈ [0, ∞]. The endpoints are tags, not
/// floating infinities, because their limit laws are closed forms.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Lambda {
    Zero,
    Finite(f64),
    Infinite,
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Lambda::Zero => write!(f, "0"),
            Lambda::Finite(l) => write!(f, "{l}"),
            Lambda::Infinite => write!(f, "inf"),
        }
    }
}

/// λ with the optional second-order parameter τ.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RegimeParams {
    lambda: Lambda,
    tau: Option<f64>,
}

impl RegimeParams {
    pub fn zero() -> Self {
        Self {
            lambda: Lambda::Zero,
            tau: None,
        }
    }

    pub fn infinite() -> Self {
        Self {
            lambda: Lambda::Infinite,
            tau: None,
        }
    }

    /// λ ∈ (0, ∞) without τ: enough for first-order quantities.
    pub fn finite(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self {
            lambda: Lambda::Finite(lambda),
            tau: None,
        })
    }

    /// λ ∈ (0, ∞) with τ, as needed by the second-order expansion.
    pub fn with_tau(lambda: f64, tau: f64) -> Result<Self> {
        check_lambda(lambda)?;
        if !tau.is_finite() {
            return Err(Error::Config(format!("tau must be finite, got {tau}")));
        }
        Ok(Self {
            lambda: Lambda::Finite(lambda),
            tau: Some(tau),
        })
    }

    pub fn lambda(&self) -> Lambda {
        self.lambda
    }

    pub fn tau(&self) -> Option<f64> {
        self.tau
    }
}

impl fmt::Display for RegimeParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self.tau {
            Some(t) => write!(f, "lambda={} tau={}", self.lambda, t),
            None => write!(f, "lambda={}", self.lambda),
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::Config(format!(
            "finite lambda must lie in (0, inf), got {lambda}"
        )));
    }
    Ok(())
}

/// User-supplied schedule `n ↦ ρ_n`.
pub type RhoSequence = Arc<dyn Fn(&NormingConstant) -> f64 + Send + Sync>;

/// How the correlation of the n-th row is produced.
#[derive(Clone)]
pub enum CorrelationModel {
    /// ρ_n = ρ for all n.
    Fixed(Correlation),
    /// ρ_n = 1 - 2λ²/b_n² + 4τλ/b_n⁴ - 2τ²/b_n⁶, so that b_n²(λ - λ_n) = τ.
    SecondOrder { lambda: f64, tau: f64 },
    /// Arbitrary schedule.
    Sequence(RhoSequence),
}

impl CorrelationModel {
    pub fn fixed(rho: f64) -> Result<Self> {
        Ok(CorrelationModel::Fixed(Correlation::new(rho)?))
    }

    pub fn second_order(lambda: f64, tau: f64) -> Result<Self> {
        RegimeParams::with_tau(lambda, tau)?;
        Ok(CorrelationModel::SecondOrder { lambda, tau })
    }

    pub fn sequence<F>(f: F) -> Self
    where
        F: Fn(&NormingConstant) -> f64 + Send + Sync + 'static,
    {
        CorrelationModel::Sequence(Arc::new(f))
    }

    /// The limiting regime implied by the model, when it is known.
    ///
    /// Fixed ρ < 1 gives λ = ∞ and fixed ρ = 1 gives λ = 0; a user sequence
    /// carries no regime information.
    pub fn regime(&self) -> Option<RegimeParams> {
        match self {
            CorrelationModel::Fixed(r) if r.is_comonotone() => Some(RegimeParams::zero()),
            CorrelationModel::Fixed(_) => Some(RegimeParams::infinite()),
            CorrelationModel::SecondOrder { lambda, tau } => {
                RegimeParams::with_tau(*lambda, *tau).ok()
            }
            CorrelationModel::Sequence(_) => None,
        }
    }
}

impl fmt::Debug for CorrelationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrelationModel::Fixed(r) => write!(f, "Fixed({r})"),
            CorrelationModel::SecondOrder { lambda, tau } => {
                write!(f, "SecondOrder(lambda={lambda}, tau={tau})")
            }
            CorrelationModel::Sequence(_) => write!(f, "Sequence(..)"),
        }
    }
}

impl fmt::Display for CorrelationModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CorrelationModel::Fixed(r) => write!(f, "rho={r}"),
            CorrelationModel::SecondOrder { lambda, tau } => {
                write!(f, "lambda={lambda} tau={tau}")
            }
            CorrelationModel::Sequence(_) => write!(f, "sequence"),
        }
    }
}

/// A correlation produced by a model, with the raw value before clamping.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RhoValue {
    pub rho: Correlation,
    pub raw: f64,
    pub clamped: bool,
}

/// Evaluate the model at the row described by `nc`.
pub fn rho_of_n(model: &CorrelationModel, nc: &NormingConstant) -> Result<RhoValue> {
    let raw = match model {
        CorrelationModel::Fixed(r) => {
            return Ok(RhoValue {
                rho: *r,
                raw: r.value(),
                clamped: false,
            })
        }
        CorrelationModel::SecondOrder { lambda, tau } => {
            if !(nc.bn() > 0.0) {
                return Err(Error::domain(
                    "rho_of_n",
                    format!("second-order model needs b_n > 0, got n = {}", nc.n()),
                ));
            }
            let b2 = nc.bn_sq();
            1.0 - 2.0 * lambda * lambda / b2 + 4.0 * tau * lambda / (b2 * b2)
                - 2.0 * tau * tau / (b2 * b2 * b2)
        }
        CorrelationModel::Sequence(f) => f(nc),
    };
    if raw.is_nan() {
        return Err(Error::domain(
            "rho_of_n",
            format!("correlation model produced NaN at n = {}", nc.n()),
        ));
    }
    let (rho, clamped) = Correlation::clamped(raw);
    Ok(RhoValue { rho, raw, clamped })
}

/// λ_n = sqrt(b_n² (1 - ρ) / 2).
pub fn lambda_n(rho: Correlation, nc: &NormingConstant) -> f64 {
    (0.5 * nc.bn_sq() * (1.0 - rho.value())).max(0.0).sqrt()
}

/// Thread-safe memo of solved norming constants. Entries are immutable once
/// inserted.
#[derive(Debug, Default)]
pub struct NormingCache {
    map: RwLock<HashMap<u64, NormingConstant>>,
}

impl NormingCache {
    pub fn new() -> Self {
        Self::default()
    }

    /// Process-wide cache.
    pub fn global() -> &'static NormingCache {
        static CACHE: OnceLock<NormingCache> = OnceLock::new();
        CACHE.get_or_init(NormingCache::new)
    }

    pub fn get(&self, n: u64) -> Result<NormingConstant> {
        if let Some(nc) = self.map.read().expect("norming cache poisoned").get(&n) {
            return Ok(*nc);
        }
        let nc = solve_bn(n)?;
        let mut map = self.map.write().expect("norming cache poisoned");
        Ok(*map.entry(n).or_insert(nc))
    }

    pub fn len(&self) -> usize {
        self.map.read().expect("norming cache poisoned").len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Shorthand for `NormingCache::global().get(n)`.
pub fn norming_constant(n: u64) -> Result<NormingConstant> {
    NormingCache::global().get(n)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn n_two_is_exactly_zero() {
        let nc = solve_bn(2).unwrap();
        assert_eq!(nc.bn(), 0.0);
        assert!(nc.bn().is_sign_positive());
        assert_eq!(nc.residual(), 0.0);
    }

    #[test]
    fn n_below_two_is_rejected() {
        assert!(matches!(solve_bn(1), Err(Error::Domain { .. })));
        assert!(matches!(solve_bn(0), Err(Error::Domain { .. })));
    }

    #[test]
    fn deterministic() {
        let a = solve_bn(12_345).unwrap();
        let b = solve_bn(12_345).unwrap();
        assert_eq!(a.bn().to_bits(), b.bn().to_bits());
    }

    #[test]
    fn power_norm_anchor_and_errors() {
        let nc = solve_bn(1000).unwrap();
        assert_eq!(power_norm(1.0, &nc).unwrap(), nc.bn());
        assert_eq!(linear_norm(0.0, &nc).unwrap(), nc.bn());
        assert!(power_norm(0.0, &nc).is_err());
        assert!(power_norm(-2.0, &nc).is_err());
        assert!(power_norm(0.5, &nc).unwrap() < nc.bn());
        let e = power_norm(std::f64::consts::E, &nc).unwrap();
        let expect = nc.bn() * (1.0 / nc.bn_sq()).exp();
        assert!((e - expect).abs() <= 2.0 * f64::EPSILON * expect);
        // n = 2 still has the anchor
        let two = solve_bn(2).unwrap();
        assert_eq!(power_norm(1.0, &two).unwrap(), 0.0);
        assert!(power_norm(2.0, &two).is_err());
    }

    #[test]
    fn linear_norm_values() {
        let nc = solve_bn(1000).unwrap();
        let b = nc.bn();
        assert!((linear_norm(b * b, &nc).unwrap() - 2.0 * b).abs() < 1e-15);
        assert!(linear_norm(-b * b, &nc).unwrap().abs() < 1e-15);
    }

    #[test]
    fn fixed_model_is_constant() {
        let m = CorrelationModel::fixed(0.0).unwrap();
        for n in [3, 1000, 1_000_000] {
            let v = rho_of_n(&m, &solve_bn(n).unwrap()).unwrap();
            assert_eq!(v.rho.value(), 0.0);
            assert!(!v.clamped);
        }
    }

    #[test]
    fn second_order_model_matches_figure_captions() {
        let nc = solve_bn(1000).unwrap();
        let r = rho_of_n(&CorrelationModel::second_order(2.0, 3.0).unwrap(), &nc).unwrap();
        assert!((r.rho.value() - 0.405).abs() < 5e-4, "{}", r.rho);
        let r = rho_of_n(&CorrelationModel::second_order(2.5, -5.0).unwrap(), &nc).unwrap();
        assert!((r.rho.value() + 0.915).abs() < 5e-4, "{}", r.rho);
        let r = rho_of_n(&CorrelationModel::second_order(2.5, -2.0).unwrap(), &nc).unwrap();
        assert!((r.rho.value() + 0.537).abs() < 5e-4, "{}", r.rho);
        let r = rho_of_n(&CorrelationModel::second_order(2.0, 2.0).unwrap(), &nc).unwrap();
        assert!((r.rho.value() - 0.329).abs() < 5e-4, "{}", r.rho);
        let r = rho_of_n(&CorrelationModel::second_order(1.0, 2.0).unwrap(), &nc).unwrap();
        assert!((r.rho.value() - 0.869).abs() < 5e-4, "{}", r.rho);
    }

    #[test]
    fn second_order_model_flags_clamping_at_small_n() {
        let nc = solve_bn(3).unwrap();
        let r = rho_of_n(&CorrelationModel::second_order(2.0, 3.0).unwrap(), &nc).unwrap();
        assert!(r.clamped);
        assert!(r.raw < -1.0);
        assert_eq!(r.rho.value(), -1.0);
    }

    #[test]
    fn second_order_model_validation() {
        assert!(CorrelationModel::second_order(0.0, 1.0).is_err());
        assert!(CorrelationModel::second_order(f64::INFINITY, 1.0).is_err());
        assert!(CorrelationModel::second_order(1.0, f64::NAN).is_err());
        assert!(RegimeParams::with_tau(-1.0, 0.0).is_err());
    }

    #[test]
    fn sequence_model_delegates() {
        let m = CorrelationModel::sequence(|nc| 1.0 / nc.n() as f64);
        let nc = solve_bn(50).unwrap();
        assert_eq!(rho_of_n(&m, &nc).unwrap().rho.value(), 0.02);
        let bad = CorrelationModel::sequence(|_| f64::NAN);
        assert!(rho_of_n(&bad, &nc).is_err());
        assert!(m.regime().is_none());
    }

    #[test]
    fn lambda_n_endpoints() {
        let nc = solve_bn(1000).unwrap();
        assert_eq!(lambda_n(Correlation::ONE, &nc), 0.0);
        assert!((lambda_n(Correlation::MINUS_ONE, &nc) - nc.bn()).abs() < 1e-15);
    }

    #[test]
    fn cache_returns_solved_values() {
        let cache = NormingCache::new();
        assert!(cache.is_empty());
        let a = cache.get(1000).unwrap();
        let b = cache.get(1000).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, solve_bn(1000).unwrap());
        assert_eq!(cache.len(), 1);
        assert!(cache.get(1).is_err());
    }

    #[test]
    fn regimes_from_models() {
        assert_eq!(
            CorrelationModel::fixed(1.0).unwrap().regime(),
            Some(RegimeParams::zero())
        );
        assert_eq!(
            CorrelationModel::fixed(-1.0).unwrap().regime(),
            Some(RegimeParams::infinite())
        );
        assert_eq!(
            CorrelationModel::second_order(2.0, 3.0).unwrap().regime(),
            Some(RegimeParams::with_tau(2.0, 3.0).unwrap())
        );
    }
}
