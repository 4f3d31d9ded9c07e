//! Second-order asymptotics for maxima of bivariate Gaussian triangular
//! arrays under power and linear normalization, with the tools to check them
//! numerically: exact `F^n` evaluation, the Hüsler–Reiss limits and their
//! second-order corrections, error tables against reference values, and a
//! convergence harness.

pub mod actuals;
pub mod cli;
pub mod error;
pub mod expansions;
pub mod harness;
pub mod limits;
pub mod norming;
pub mod quadrature;
pub mod special;
pub mod tables;

pub use error::{Error, Result};
pub use norming::{solve_bn, CorrelationModel, Lambda, NormingConstant, RegimeParams};
pub use special::Correlation;
