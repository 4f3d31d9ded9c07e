//! Limit laws: the Hüsler–Reiss family `H_λ` in linear arguments, its
//! power-normalized form `H_λ(ln x, ln y)`, and the univariate p-max stable
//! law `Φ₁(x) = exp(-1/x)`.

use crate::error::{Error, Result};
use crate::norming::Lambda;
use crate::special::std_normal_cdf;

/// Finite λ below this is evaluated with the λ = 0 closed form.
pub const LAMBDA_ZERO_CUTOFF: f64 = 1e-8;
/// Finite λ above this is evaluated with the λ = ∞ product form.
pub const LAMBDA_INFINITE_CUTOFF: f64 = 1e8;

/// Collapse numerically degenerate finite λ onto the closed-form tags.
pub fn effective_lambda(lambda: Lambda) -> Lambda {
    match lambda {
        Lambda::Finite(l) if l < LAMBDA_ZERO_CUTOFF => Lambda::Zero,
        Lambda::Finite(l) if l > LAMBDA_INFINITE_CUTOFF => Lambda::Infinite,
        other => other,
    }
}

/// `p · e^{-y}` without overflowing when `y` is very negative.
fn weighted_exp(p: f64, y: f64) -> f64 {
    if y > -700.0 {
        p * (-y).exp()
    } else {
        (p.ln() - y).exp()
    }
}

/// Hüsler–Reiss distribution
/// `H_λ(x, y) = exp(-Φ(λ + (x-y)/(2λ)) e^{-y} - Φ(λ + (y-x)/(2λ)) e^{-x})`,
/// with `H_0(x, y) = exp(-e^{-min(x,y)})` and `H_∞(x, y) = Λ(x)Λ(y)`.
pub fn h_lambda(x: f64, y: f64, lambda: Lambda) -> f64 {
    match effective_lambda(lambda) {
        Lambda::Zero => gumbel(x.min(y)),
        Lambda::Infinite => gumbel(x) * gumbel(y),
        Lambda::Finite(l) => {
            let d = x - y;
            let ty = weighted_exp(std_normal_cdf(l + d / (2.0 * l)), y);
            let tx = weighted_exp(std_normal_cdf(l - d / (2.0 * l)), x);
            (-(ty + tx)).exp()
        }
    }
}

/// Gumbel law Λ(x) = exp(-e^{-x}).
pub fn gumbel(x: f64) -> f64 {
    if x < -700.0 {
        return 0.0;
    }
    (-(-x).exp()).exp()
}

/// `H_λ(ln x, ln y)` for `x, y > 0`, written directly in the power variables:
/// `exp(-Φ(λ + ln(x/y)/(2λ))/y - Φ(λ + ln(y/x)/(2λ))/x)`; for λ = 0 this is
/// `exp(-1/min(x, y))` and for λ = ∞ it is `exp(-1/x) exp(-1/y)`.
pub fn h_power(x: f64, y: f64, lambda: Lambda) -> Result<f64> {
    if !(x > 0.0 && y > 0.0) {
        return Err(Error::domain(
            "h_power",
            format!("power-normalized arguments must be positive, got ({x}, {y})"),
        ));
    }
    Ok(match effective_lambda(lambda) {
        Lambda::Zero => frechet_unit(x.min(y)),
        Lambda::Infinite => frechet_unit(x) * frechet_unit(y),
        Lambda::Finite(l) => {
            let d = x.ln() - y.ln();
            let ty = std_normal_cdf(l + d / (2.0 * l)) / y;
            let tx = std_normal_cdf(l - d / (2.0 * l)) / x;
            (-(ty + tx)).exp()
        }
    })
}

fn frechet_unit(x: f64) -> f64 {
    (-1.0 / x).exp()
}

/// The p-max stable law `Φ₁(x) = exp(-1/x)`, `x > 0`.
pub fn phi1(x: f64) -> Result<f64> {
    if !(x > 0.0) {
        return Err(Error::domain("phi1", format!("x must be positive, got {x}")));
    }
    Ok(frechet_unit(x))
}
