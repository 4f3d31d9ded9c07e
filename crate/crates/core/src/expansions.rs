//! Second-order correction terms and the approximants `L₁..L₄` under power
//! and linear normalization.
//!
//! Power normalization (`u_n(x) = b_n x^{1/b_n²}`):
//!
//! * `L₁ = H_λ(ln x, ln y)`
//! * `L₂ = H_λ(ln x, ln y) (1 + κ(x, y, λ, τ) / b_n²)` for λ ∈ (0, ∞)
//! * `L₃ = H_∞(ln x, ln y) (1 + (s(x) + s(y)) / b_n²)` for λ = ∞
//! * `L₄ = H_0(ln x, ln y) (1 + s(min(x, y)) / b_n²)` for λ = 0
//!
//! Linear normalization (`b_n + x/b_n`) has the same shape with `ι` in place
//! of `κ` and `ω` in place of `s`.
//!
//! Approximant values are deliberately left unclamped: an asymptotic
//! expansion may leave [0, 1] for extreme arguments at small `n`.

use std::fmt;

use crate::error::{Error, Result};
use crate::limits::{h_lambda, h_power};
use crate::norming::{Lambda, NormingConstant, RegimeParams};
use crate::quadrature::{integrate_adaptive, Integral};
use crate::special::{std_normal_cdf, std_normal_pdf, std_normal_tail};

/// Univariate power-normalization correction `s(x) = ((ln x)² + ln x) / x`.
pub fn s(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("s", format!("x must be positive, got {x}")));
    }
    let l = x.ln();
    Ok((l * l + l) / x)
}

/// Univariate linear-normalization correction `ω(x) = (x² + 2x) e^{-x} / 2`.
pub fn omega(x: f64) -> f64 {
    0.5 * (x * x + 2.0 * x) * (-x).exp()
}

/// Which reading of the bivariate correction κ to use.
///
/// The displayed formula multiplies its φ-term by nothing; the version
/// assembled from its own ingredients (and the one the exact `F^n` converges
/// to) carries an extra `1/x`. With the extra factor κ is symmetric in
/// `(x, y)`, as it must be since both `F` and `H_λ` are.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum KappaVariant {
    /// The formula exactly as displayed; asymmetric for `x ≠ y`.
    AsPrinted,
    /// φ-term multiplied by `1/x`. Selected by the convergence harness.
    #[default]
    TailScaled,
}

impl KappaVariant {
    pub const ALL: [KappaVariant; 2] = [KappaVariant::AsPrinted, KappaVariant::TailScaled];

    pub fn name(self) -> &'static str {
        match self {
            KappaVariant::AsPrinted => "as_printed",
            KappaVariant::TailScaled => "tail_scaled",
        }
    }

    pub fn other(self) -> KappaVariant {
        match self {
            KappaVariant::AsPrinted => KappaVariant::TailScaled,
            KappaVariant::TailScaled => KappaVariant::AsPrinted,
        }
    }
}

impl fmt::Display for KappaVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for KappaVariant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "as_printed" | "as-printed" | "printed" => Ok(KappaVariant::AsPrinted),
            "tail_scaled" | "tail-scaled" | "scaled" => Ok(KappaVariant::TailScaled),
            other => Err(Error::Config(format!(
                "unknown kappa variant '{other}' (expected as_printed or tail_scaled)"
            ))),
        }
    }
}

fn check_power_args(op: &'static str, x: f64, y: f64, lambda: f64) -> Result<()> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain(op, format!("x and y must be positive, got ({x}, {y})")));
    }
    check_lambda(op, lambda)
}

fn check_lambda(op: &'static str, lambda: f64) -> Result<()> {
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::domain(op, format!("lambda must lie in (0, inf), got {lambda}")));
    }
    Ok(())
}

/// Second-order correction κ(x, y, λ, τ) for λ ∈ (0, ∞).
///
/// With `w = λ + ln(y/x)/(2λ)`:
/// `s(x) Φ(w) + s(y) Φ(λ + ln(x/y)/(2λ)) + (2τ - λ³ - 2λ - λ ln y - λ ln x) c φ(w)`
/// where `c = 1` for [`KappaVariant::AsPrinted`] and `c = 1/x` for
/// [`KappaVariant::TailScaled`].
pub fn kappa(x: f64, y: f64, lambda: f64, tau: f64, variant: KappaVariant) -> Result<f64> {
    check_power_args("kappa", x, y, lambda)?;
    let (lx, ly) = (x.ln(), y.ln());
    let d = ly - lx;
    let w = lambda + d / (2.0 * lambda);
    let w_swapped = lambda - d / (2.0 * lambda);
    let poly = 2.0 * tau - lambda.powi(3) - 2.0 * lambda - lambda * ly - lambda * lx;
    let phi_term = match variant {
        KappaVariant::AsPrinted => poly * std_normal_pdf(w),
        KappaVariant::TailScaled => poly * std_normal_pdf(w) / x,
    };
    Ok((lx * lx + lx) / x * std_normal_cdf(w) + (ly * ly + ly) / y * std_normal_cdf(w_swapped)
        + phi_term)
}

/// κ₁(x, y, λ, τ): the limit of the second-order part of the bivariate
/// integral,
/// `(4λ⁴ + 2λ² - 4λ² ln x) x⁻¹ (1 - Φ(w)) + (2τ - 5λ³ + λ ln y + λ ln x) x⁻¹ φ(w)`.
/// Anchored at `x`; not symmetric.
pub fn kappa1(x: f64, y: f64, lambda: f64, tau: f64) -> Result<f64> {
    check_power_args("kappa1", x, y, lambda)?;
    let (lx, ly) = (x.ln(), y.ln());
    let w = lambda + (ly - lx) / (2.0 * lambda);
    let l2 = lambda * lambda;
    Ok((4.0 * l2 * l2 + 2.0 * l2 - 4.0 * l2 * lx) / x * std_normal_tail(w)
        + (2.0 * tau - 5.0 * l2 * lambda + lambda * ly + lambda * lx) / x * std_normal_pdf(w))
}

/// Closed form of `J = ∫_y^∞ Φ(λ + ln(x/z)/(2λ)) z⁻² (1 + ln z - (ln z)²) dz`
/// obtained by partial integration.
pub fn partial_integration_j(x: f64, y: f64, lambda: f64) -> Result<f64> {
    check_power_args("partial_integration_j", x, y, lambda)?;
    let (lx, ly) = (x.ln(), y.ln());
    let l2 = lambda * lambda;
    let w = lambda + (ly - lx) / (2.0 * lambda);
    let w_swapped = lambda - (ly - lx) / (2.0 * lambda);
    Ok(
        (lx * lx + lx - 4.0 * l2 * lx + 2.0 * l2 + 4.0 * l2 * l2) / x * std_normal_tail(w)
            + (2.0 * lambda + 2.0 * lambda * ly + 2.0 * lambda * lx - 4.0 * l2 * lambda) / x
                * std_normal_pdf(w)
            - (ly * ly + ly) / y * std_normal_cdf(w_swapped),
    )
}

/// The same integral as [`partial_integration_j`] by adaptive quadrature in
/// `u = ln z`. Used to cross-check the closed form.
pub fn partial_integration_j_numeric(x: f64, y: f64, lambda: f64, abs_tol: f64) -> Result<Integral> {
    check_power_args("partial_integration_j_numeric", x, y, lambda)?;
    let lx = x.ln();
    let lo = y.ln();
    // e^{-u} u² < 1e-30 beyond here
    let hi = lo.max(0.0) + 80.0;
    let f = |u: f64| std_normal_cdf(lambda + (lx - u) / (2.0 * lambda)) * (-u).exp() * (1.0 + u - u * u);
    Ok(integrate_adaptive(f, lo, hi, abs_tol))
}

/// `s(x) + κ₁(x, y, λ, τ) - J(x, y, λ)`: κ assembled from its ingredients.
pub fn kappa_reconstructed(x: f64, y: f64, lambda: f64, tau: f64) -> Result<f64> {
    Ok(s(x)? + kappa1(x, y, lambda, tau)? - partial_integration_j(x, y, lambda)?)
}

/// Linear-normalization correction
/// `ι(x, y, λ, τ) = ω(x) Φ(λ + (y-x)/(2λ)) + ω(y) Φ(λ + (x-y)/(2λ))
///  + (2τ - λ(λ² + x + y + 2)) e^{-x} φ(λ + (y-x)/(2λ))`.
pub fn iota(x: f64, y: f64, lambda: f64, tau: f64) -> Result<f64> {
    check_lambda("iota", lambda)?;
    let w = lambda + (y - x) / (2.0 * lambda);
    let w_swapped = lambda + (x - y) / (2.0 * lambda);
    Ok(omega(x) * std_normal_cdf(w)
        + omega(y) * std_normal_cdf(w_swapped)
        + (2.0 * tau - lambda * (lambda * lambda + x + y + 2.0)) * (-x).exp() * std_normal_pdf(w))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Order {
    First,
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Normalization {
    Power,
    Linear,
}

impl fmt::Display for Normalization {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Normalization::Power => f.write_str("power"),
            Normalization::Linear => f.write_str("linear"),
        }
    }
}

/// An asymptotic approximation of `F^n` at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Approximant {
    pub order: Order,
    pub normalization: Normalization,
    pub regime: RegimeParams,
    pub value: f64,
}

impl Approximant {
    /// `L1`..`L4` following the regime of the second-order term.
    pub fn label(&self) -> &'static str {
        match (self.order, self.regime.lambda()) {
            (Order::First, _) => "L1",
            (Order::Second, Lambda::Finite(_)) => "L2",
            (Order::Second, Lambda::Infinite) => "L3",
            (Order::Second, Lambda::Zero) => "L4",
        }
    }
}

fn require_tau(regime: &RegimeParams) -> Result<f64> {
    regime.tau().ok_or_else(|| {
        Error::Config(format!(
            "second-order approximant for finite lambda needs tau ({regime})"
        ))
    })
}

/// Relative second-order correction under power normalization: `κ`,
/// `s(x) + s(y)` or `s(min(x, y))` by regime. `b_n²(F^n - H)` tends to this
/// times `H`.
pub fn power_correction(x: f64, y: f64, regime: RegimeParams, variant: KappaVariant) -> Result<f64> {
    match regime.lambda() {
        Lambda::Finite(l) => kappa(x, y, l, require_tau(&regime)?, variant),
        Lambda::Infinite => Ok(s(x)? + s(y)?),
        Lambda::Zero => s(x.min(y)),
    }
}

/// Relative second-order correction under linear normalization: `ι`,
/// `ω(x) + ω(y)` or `ω(min(x, y))` by regime.
pub fn linear_correction(x: f64, y: f64, regime: RegimeParams) -> Result<f64> {
    match regime.lambda() {
        Lambda::Finite(l) => iota(x, y, l, require_tau(&regime)?),
        Lambda::Infinite => Ok(omega(x) + omega(y)),
        Lambda::Zero => Ok(omega(x.min(y))),
    }
}

/// `L₁^p` or the matching second-order `L₂^p` / `L₃^p` / `L₄^p`.
pub fn approximant_power(
    x: f64,
    y: f64,
    nc: &NormingConstant,
    regime: RegimeParams,
    order: Order,
    variant: KappaVariant,
) -> Result<Approximant> {
    let first = h_power(x, y, regime.lambda())?;
    let value = match order {
        Order::First => first,
        Order::Second => first * (1.0 + power_correction(x, y, regime, variant)? / nc.bn_sq()),
    };
    Ok(Approximant {
        order,
        normalization: Normalization::Power,
        regime,
        value,
    })
}

/// `L₁^l` or the matching second-order `L₂^l` / `L₃^l` / `L₄^l`.
pub fn approximant_linear(
    x: f64,
    y: f64,
    nc: &NormingConstant,
    regime: RegimeParams,
    order: Order,
) -> Result<Approximant> {
    if !(x.is_finite() && y.is_finite()) {
        return Err(Error::domain(
            "approximant_linear",
            format!("x and y must be finite, got ({x}, {y})"),
        ));
    }
    let first = h_lambda(x, y, regime.lambda());
    let value = match order {
        Order::First => first,
        Order::Second => first * (1.0 + linear_correction(x, y, regime)? / nc.bn_sq()),
    };
    Ok(Approximant {
        order,
        normalization: Normalization::Linear,
        regime,
        value,
    })
}
