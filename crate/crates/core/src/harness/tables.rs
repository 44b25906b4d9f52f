//! Rate tables, the `(alpha, beta)` heatmap and quadrature curves.

use serde::{Deserialize, Serialize};

use super::config::MethodSpec;
use super::{csv_field, predicted_rate_for_edges};
use crate::error::{Error, Result};
use crate::param::Param;
use crate::polynomials::expected_metrics;
use crate::rates::{gcm_avg_exponent, optimal_exponent, RateSpec};
use crate::spectra::SpectralDistribution;

/// A row requested from the rate table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum RateTarget {
    Method(MethodSpec),
    /// The best GCM tuning for the edge exponents.
    Optimal,
}

impl std::str::FromStr for RateTarget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        if s.trim().eq_ignore_ascii_case("optimal") {
            Ok(RateTarget::Optimal)
        } else {
            s.parse().map(RateTarget::Method)
        }
    }
}

impl RateTarget {
    /// The methods compared at the two standard edge-exponent cells.
    pub fn defaults() -> Vec<RateTarget> {
        [
            "gcm:alpha=1/2,beta=5/2",
            "gcm:alpha=1/2,beta=3/2",
            "nesterov",
            "gd",
        ]
        .iter()
        .map(|s| s.parse().expect("valid default"))
        .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateRow {
    pub method: String,
    pub rate: RateSpec,
}

pub fn rate_table(
    tau: Param,
    xi: Param,
    objective: u32,
    targets: &[RateTarget],
) -> Result<Vec<RateRow>> {
    targets
        .iter()
        .map(|target| {
            Ok(match target {
                RateTarget::Method(spec) => RateRow {
                    method: spec.to_string(),
                    rate: predicted_rate_for_edges(spec, tau, xi, objective)?,
                },
                RateTarget::Optimal => {
                    let opt = optimal_exponent(tau, xi, objective)?;
                    RateRow {
                        method: format!("gcm:alpha={},beta={}", opt.alpha, opt.beta),
                        rate: opt.rate,
                    }
                }
            })
        })
        .collect()
}

pub fn rate_table_csv(rows: &[RateRow]) -> String {
    let mut out = String::from("method,exponent,log_factor,rate,regime\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            csv_field(&r.method),
            r.rate.exponent,
            r.rate.log_factor,
            csv_field(&r.rate.describe()),
            csv_field(&r.rate.regime)
        ));
    }
    out
}

pub fn rate_table_text(rows: &[RateRow]) -> String {
    let width = rows
        .iter()
        .map(|r| r.method.len())
        .max()
        .unwrap_or(0)
        .max(6);
    let rate_width = rows
        .iter()
        .map(|r| r.rate.describe().len())
        .max()
        .unwrap_or(0)
        .max(4);
    let mut out = format!("{:<width$}  {:<rate_width$}  regime\n", "method", "rate");
    for r in rows {
        out.push_str(&format!(
            "{:<width$}  {:<rate_width$}  {}\n",
            r.method,
            r.rate.describe(),
            r.rate.regime
        ));
    }
    out
}

/// Lattice `-1 + 5 (i + 1) / n` for `i = 0..n`, covering `(-1, 4]` exactly.
pub fn grid_axis(n: usize) -> Result<Vec<Param>> {
    if n == 0 || n > 100_000 {
        return Err(Error::invalid(format!(
            "grid size must be in 1..=100000, got {n}"
        )));
    }
    let n = n as i64;
    Ok((0..n).map(|i| Param::ratio(-n + 5 * (i + 1), n)).collect())
}

/// One heatmap cell of GCM exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub alpha: f64,
    pub beta: f64,
    pub rate: RateSpec,
}

impl GridCell {
    pub fn converges(&self) -> bool {
        self.rate.converges()
    }
}

pub fn rate_grid(tau: Param, xi: Param, objective: u32, n: usize) -> Result<Vec<GridCell>> {
    let axis = grid_axis(n)?;
    let mut cells = Vec::with_capacity(n * n);
    for &alpha in &axis {
        for &beta in &axis {
            cells.push(GridCell {
                alpha: alpha.value(),
                beta: beta.value(),
                rate: gcm_avg_exponent(alpha, beta, tau, xi, objective)?,
            });
        }
    }
    Ok(cells)
}

pub fn rate_grid_csv(cells: &[GridCell]) -> String {
    let mut out = String::from("alpha,beta,exponent,log_factor,converges\n");
    for c in cells {
        out.push_str(&format!(
            "{},{},{},{},{}\n",
            c.alpha,
            c.beta,
            c.rate.exponent,
            c.rate.log_factor,
            c.converges()
        ));
    }
    out
}

/// Cells with the fastest decay: smallest exponent, and no log factor among ties.
pub fn best_cells(cells: &[GridCell]) -> Vec<&GridCell> {
    let key = |c: &GridCell| (c.rate.exponent, c.rate.log_factor);
    let Some(best) = cells
        .iter()
        .map(key)
        .min_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)))
    else {
        return Vec::new();
    };
    cells.iter().filter(|c| key(c) == best).collect()
}

/// Expected metrics per iteration for several objectives.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureTable {
    pub objectives: Vec<u32>,
    /// `columns[k][t]` is the metric for `objectives[k]` at iteration `t`.
    pub columns: Vec<Vec<f64>>,
}

impl QuadratureTable {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("t");
        for l in &self.objectives {
            out.push_str(&format!(",metric_l{l}"));
        }
        out.push('\n');
        let len = self.columns.first().map_or(0, Vec::len);
        for t in 0..len {
            out.push_str(&t.to_string());
            for c in &self.columns {
                out.push_str(&format!(",{:.16e}", c[t]));
            }
            out.push('\n');
        }
        out
    }
}

/// Expected metrics of `spec` under `dist`. Without an explicit `L`, the
/// step-size scale is the right edge of the support.
pub fn quadrature_table(
    dist: &SpectralDistribution,
    spec: &MethodSpec,
    iterations: usize,
    objectives: &[u32],
) -> Result<QuadratureTable> {
    if objectives.is_empty() {
        return Err(Error::invalid("at least one objective is required"));
    }
    let edge = dist.support().1;
    if spec.needs_lipschitz() && spec.lipschitz.is_none() && !edge.is_finite() {
        return Err(Error::invalid(format!(
            "{dist} is unbounded; give the method an explicit L"
        )));
    }
    let method = spec.resolve(edge)?;
    Ok(QuadratureTable {
        objectives: objectives.to_vec(),
        columns: expected_metrics(dist, method, objectives, iterations)?,
    })
}
