//! Experiment orchestration: configuration, parallel runs, output files,
//! predicted rates and comparisons.

mod compare;
mod config;
mod run;
mod tables;

pub use compare::{compare, CompareReport, CompareRow, Verdict};
pub use config::{
    ExperimentConfig, FitOptions, Generator, MethodKind, MethodSpec, OutputOptions, ProblemConfig,
};
pub use run::{
    build_problem, cmd_run, manifest_path, run_index, MethodSummary, RunManifest, RunRecord,
    RunStatus,
};
pub use tables::{
    best_cells, grid_axis, quadrature_table, rate_grid, rate_grid_csv, rate_table, rate_table_csv,
    rate_table_text, GridCell, QuadratureTable, RateRow, RateTarget,
};

use crate::error::{Error, Result};
use crate::param::Param;
use crate::rates::{
    gcm_avg_exponent, gd_avg_exponent, laguerre_exponent, nesterov_avg_exponent, RateSpec,
};
use crate::spectra::SpectralDistribution;

/// Exit codes shared by the command line front end.
pub mod exit {
    pub const SUCCESS: i32 = 0;
    pub const CONFIG: i32 = 1;
    pub const RUNTIME: i32 = 2;
    pub const COMPARISON: i32 = 3;
}

/// Recovers an exact rational from a float that was written as a short decimal.
pub(crate) fn exact_param(x: f64) -> Param {
    x.to_string().parse().unwrap_or(Param::Float(x))
}

/// Quotes a CSV field when needed.
pub(crate) fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

pub(crate) fn write_file(path: &std::path::Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

/// Predicted rate of a method on a spectrum with the given edge exponents.
/// Laguerre has no rate in terms of edge exponents and is unsupported here.
pub fn predicted_rate_for_edges(
    spec: &MethodSpec,
    tau: Param,
    xi: Param,
    objective: u32,
) -> Result<RateSpec> {
    match spec.kind {
        MethodKind::Gcm { alpha, beta } => gcm_avg_exponent(alpha, beta, tau, xi, objective),
        MethodKind::Nesterov => nesterov_avg_exponent(xi, objective),
        MethodKind::Gd => gd_avg_exponent(xi, objective),
        MethodKind::Laguerre { .. } => Err(Error::Unsupported(
            "laguerre rates are stated for Gamma spectra, not edge exponents".into(),
        )),
    }
}

/// Predicted rate of `spec` on `dist` for the given objective, if one is known.
///
/// Bounded spectra need a left edge at zero (otherwise convergence is linear)
/// and a step-size scale no smaller than the right edge. Laguerre has a known
/// rate only for the function gap on `Gamma(a)` with parameter `a + 2`.
pub fn predicted_rate(
    dist: &SpectralDistribution,
    spec: &MethodSpec,
    objective: u32,
) -> Option<RateSpec> {
    if let (MethodKind::Laguerre { alpha }, SpectralDistribution::Gamma { alpha: a }) =
        (spec.kind, dist)
    {
        let tuned = alpha
            .compare(exact_param(*a) + Param::int(2))
            .ordering
            .is_eq();
        return (tuned && objective == 1).then(|| laguerre_exponent(exact_param(*a)));
    }
    let (tau, xi) = dist.edge_exponents()?;
    let (lo, hi) = dist.support();
    if lo != 0.0
        || spec
            .lipschitz
            .is_some_and(|l| l * spec.lipschitz_scale < hi)
    {
        return None;
    }
    predicted_rate_for_edges(spec, exact_param(tau), exact_param(xi), objective).ok()
}
