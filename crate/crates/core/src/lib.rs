//! Average-case convergence of first-order methods on random quadratics.
//!
//! Random quadratic problems are drawn with a prescribed spectral distribution
//! ([`spectra`], [`problems`]), optimized with Generalized Chebyshev, Laguerre,
//! Nesterov and gradient-descent iterations ([`optimizers`]), and compared with
//! the expected metrics obtained by quadrature of residual polynomials
//! ([`polynomials`]) and with closed-form asymptotic rates ([`rates`]).
//! [`harness`] runs whole experiment suites from a config file.

pub mod error;
pub mod gauss;
pub mod harness;
pub mod optimizers;
pub mod param;
pub mod polynomials;
pub mod problems;
pub mod rates;
pub mod rng;
pub mod spectra;

pub use error::{Error, Result};
pub use faer;
pub use optimizers::{run, Step, Trajectory};
pub use param::Param;
pub use polynomials::{
    expected_metric, expected_metrics, Method, RecurrenceCoefficients, ResidualFamily,
};
pub use problems::{gram_problem, spectrum_problem, Metrics, Provenance, QuadraticProblem};
pub use rates::{fit_slope, RateSpec, SlopeFit};
pub use spectra::SpectralDistribution;
