//! Exact `F^n` at normalized points, to the precision of the normal kernels.
//!
//! `1 - F(a, b)` is assembled as `tail(a) + tail(b) - P(X > a, Y > b)` so it
//! keeps its significant digits when it is of order `1/n`, and the power is
//! taken as `exp(n · log1p(-t))`.

use crate::error::{Error, Result};
use crate::norming::{linear_norm, power_norm, NormingConstant};
use crate::special::{bvn_survival, std_normal_tail, Correlation};

/// `F^n` at one point together with `n · ln F`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ActualValue {
    pub value: f64,
    pub log_value: f64,
}

impl ActualValue {
    fn from_tail(t: f64, n: u64, op: &'static str) -> Result<Self> {
        if t.is_nan() || t > 1.0 + 1e-12 {
            return Err(Error::Consistency(format!(
                "{op}: 1 - F = {t} is not a probability"
            )));
        }
        let t = t.clamp(0.0, 1.0);
        let log_value = if t == 1.0 { f64::NEG_INFINITY } else { n as f64 * (-t).ln_1p() };
        Ok(ActualValue {
            value: log_value.exp(),
            log_value,
        })
    }
}

/// `1 - F(a, b)` for the standard bivariate normal with correlation `rho`.
fn joint_tail(a: f64, b: f64, rho: Correlation) -> f64 {
    if rho.is_comonotone() {
        return std_normal_tail(a.min(b));
    }
    std_normal_tail(a) + std_normal_tail(b) - bvn_survival(a, b, rho)
}

/// `F^n(b_n x^{1/b_n²}, b_n y^{1/b_n²})`.
pub fn fn_power(x: f64, y: f64, nc: &NormingConstant, rho: Correlation) -> Result<ActualValue> {
    let a = power_norm(x, nc)?;
    let b = power_norm(y, nc)?;
    ActualValue::from_tail(joint_tail(a, b, rho), nc.n(), "fn_power")
}

/// `F^n(b_n + x/b_n, b_n + y/b_n)`.
pub fn fn_linear(x: f64, y: f64, nc: &NormingConstant, rho: Correlation) -> Result<ActualValue> {
    let a = linear_norm(x, nc)?;
    let b = linear_norm(y, nc)?;
    ActualValue::from_tail(joint_tail(a, b, rho), nc.n(), "fn_linear")
}

/// `Φ^n(b_n x^{1/b_n²})`.
pub fn phin_power(x: f64, nc: &NormingConstant) -> Result<ActualValue> {
    let a = power_norm(x, nc)?;
    ActualValue::from_tail(std_normal_tail(a), nc.n(), "phin_power")
}

/// `Φ^n(b_n + x/b_n)`.
pub fn phin_linear(x: f64, nc: &NormingConstant) -> Result<ActualValue> {
    let a = linear_norm(x, nc)?;
    ActualValue::from_tail(std_normal_tail(a), nc.n(), "phin_linear")
}
