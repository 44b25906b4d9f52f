//! Residual polynomials of the four methods and the expected metrics they induce.
//!
//! A first-order method leaves the error `x_t - x* = P_t(H)(x_0 - x*)` for a
//! residual polynomial `P_t` (`P_t(0) = 1`). With isotropic initial error the
//! expected metric is `integral P_t^2 lambda^l dmu`, halved for the function gap.
//! Families are always evaluated pointwise by forward recurrence in `t`; monomial
//! coefficients would overflow long before the degrees used here.

use std::fmt;

use crate::error::{Error, Result};
use crate::spectra::SpectralDistribution;

/// Relative change tolerated when the quadrature node count is doubled.
pub const SELF_CHECK_TOLERANCE: f64 = 1e-6;

/// Minimum number of quadrature nodes used by [`expected_metrics`].
pub const MIN_QUADRATURE_NODES: usize = 400;

/// Rescaling threshold when running a recurrence at `lambda = 0`.
const RESCALE_AT: f64 = 1e100;

/// One step `p_t = (constant + slope * lambda) p_{t-1} + lag * p_{t-2}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Triple {
    pub constant: f64,
    pub slope: f64,
    pub lag: f64,
}

/// Three-term recurrence for degrees `1..=T`, starting from the constant `p_0`
/// with `p_{-1} = 0`. `terms[t - 1]` produces degree `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecurrenceCoefficients {
    pub initial: f64,
    pub terms: Vec<Triple>,
}

impl RecurrenceCoefficients {
    pub fn new(initial: f64, terms: Vec<Triple>) -> Self {
        RecurrenceCoefficients { initial, terms }
    }

    pub fn max_degree(&self) -> usize {
        self.terms.len()
    }

    /// Values `p_0(lambda), ..., p_T(lambda)`.
    pub fn evaluate(&self, lambda: f64) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.terms.len() + 1);
        let (mut prev, mut cur) = (0.0, self.initial);
        out.push(cur);
        for term in &self.terms {
            let next = (term.constant + term.slope * lambda) * cur + term.lag * prev;
            prev = cur;
            cur = next;
            out.push(cur);
        }
        out
    }

    /// Rewrites the family in the variable `lambda` where `x = a lambda + b`.
    ///
    /// If `p_t` is the family in `x`, the result `q_t` satisfies
    /// `q_t(lambda) = p_t(a lambda + b)`.
    pub fn shift_affine(&self, a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::invalid(format!(
                "affine map needs finite a != 0, got a={a}, b={b}"
            )));
        }
        let terms = self
            .terms
            .iter()
            .map(|t| Triple {
                constant: t.constant + b * t.slope,
                slope: a * t.slope,
                lag: t.lag,
            })
            .collect();
        Ok(RecurrenceCoefficients::new(self.initial, terms))
    }

    /// Residual normalization `P_t = p_t / p_t(0)`.
    ///
    /// The ratios `delta_t = p_{t-1}(0) / p_t(0)` are taken from running the
    /// recurrence at zero. The result has the momentum form
    /// `P_t = (a_t + b_t lambda) P_{t-1} + (1 - a_t) P_{t-2}` with
    /// `a_t = delta_t * constant_t` and `b_t = delta_t * slope_t`.
    pub fn to_residual(&self) -> Result<Self> {
        let deltas = self.ratios_at_zero()?;
        Ok(self.residual_from(&deltas))
    }

    /// Same normalization, with `delta_t = 1 / (constant_t + lag_t delta_{t-1})`
    /// and `delta_0 = 0` instead of explicit values at zero. Kept as an
    /// independent route for cross-checking.
    pub fn to_residual_by_delta_recursion(&self) -> Result<Self> {
        if self.initial == 0.0 {
            return Err(Error::Degenerate { degree: 0 });
        }
        let mut deltas = Vec::with_capacity(self.terms.len());
        let mut delta = 0.0;
        for (i, term) in self.terms.iter().enumerate() {
            let denom = term.constant + term.lag * delta;
            if denom == 0.0 {
                return Err(Error::Degenerate { degree: i + 1 });
            }
            delta = 1.0 / denom;
            deltas.push(delta);
        }
        Ok(self.residual_from(&deltas))
    }

    /// `delta_t = p_{t-1}(0) / p_t(0)` for `t = 1..=T`.
    pub fn ratios_at_zero(&self) -> Result<Vec<f64>> {
        if self.initial == 0.0 {
            return Err(Error::Degenerate { degree: 0 });
        }
        let mut deltas = Vec::with_capacity(self.terms.len());
        let (mut prev, mut cur) = (0.0, self.initial);
        for (i, term) in self.terms.iter().enumerate() {
            let next = term.constant * cur + term.lag * prev;
            if next == 0.0 {
                return Err(Error::Degenerate { degree: i + 1 });
            }
            deltas.push(cur / next);
            prev = cur;
            cur = next;
            if cur.abs() > RESCALE_AT || cur.abs() < 1.0 / RESCALE_AT {
                let f = 1.0 / cur.abs();
                prev *= f;
                cur *= f;
            }
        }
        Ok(deltas)
    }

    fn residual_from(&self, deltas: &[f64]) -> Self {
        let terms = self
            .terms
            .iter()
            .zip(deltas)
            .map(|(t, &d)| {
                let a = d * t.constant;
                Triple {
                    constant: a,
                    slope: d * t.slope,
                    lag: 1.0 - a,
                }
            })
            .collect();
        RecurrenceCoefficients::new(1.0, terms)
    }
}

/// Classical Jacobi recurrence on `[-1, 1]` for the weight `(1-x)^alpha (1+x)^beta`,
/// in the standard normalization `p_t(1) = binom(t + alpha, t)`.
///
/// Degree 1 uses the closed form `p_1(x) = (alpha - beta)/2 + (alpha + beta + 2)/2 x`,
/// which the general formula only reaches as a removable `0/0` when
/// `alpha + beta` is `0` or `-1`.
pub fn jacobi_raw_coefficients(t: usize, alpha: f64, beta: f64) -> Result<Triple> {
    if t == 0 {
        return Err(Error::invalid("recurrence coefficients start at degree 1"));
    }
    let s = alpha + beta;
    if t == 1 {
        return Ok(Triple {
            constant: 0.5 * (alpha - beta),
            slope: 0.5 * (s + 2.0),
            lag: 0.0,
        });
    }
    let n = t as f64;
    let k = 2.0 * n + s;
    let base = n * (n + s);
    if base == 0.0 || k - 2.0 == 0.0 {
        return Err(Error::SingularCoefficient { degree: t });
    }
    Ok(Triple {
        constant: (alpha * alpha - beta * beta) * (k - 1.0) / (2.0 * base * (k - 2.0)),
        slope: k * (k - 1.0) / (2.0 * base),
        lag: -(n + alpha - 1.0) * (n + beta - 1.0) * k / (base * (k - 2.0)),
    })
}

/// Jacobi recurrence for degrees `1..=max_degree`.
pub fn jacobi_recurrence(
    max_degree: usize,
    alpha: f64,
    beta: f64,
) -> Result<RecurrenceCoefficients> {
    let terms = (1..=max_degree)
        .map(|t| jacobi_raw_coefficients(t, alpha, beta))
        .collect::<Result<Vec<_>>>()?;
    Ok(RecurrenceCoefficients::new(1.0, terms))
}

/// Laguerre recurrence `L_t = ((2t + alpha - 1)/t - lambda/t) L_{t-1} - (t + alpha - 1)/t L_{t-2}`.
pub fn laguerre_raw_coefficients(t: usize, alpha: f64) -> Triple {
    let n = t as f64;
    Triple {
        constant: (2.0 * n + alpha - 1.0) / n,
        slope: -1.0 / n,
        lag: -(n + alpha - 1.0) / n,
    }
}

pub fn laguerre_recurrence(max_degree: usize, alpha: f64) -> RecurrenceCoefficients {
    RecurrenceCoefficients::new(
        1.0,
        (1..=max_degree)
            .map(|t| laguerre_raw_coefficients(t, alpha))
            .collect(),
    )
}

/// Residual GCM recurrence on `[0, lipschitz]`, orthogonal for
/// `lambda^beta (lipschitz - lambda)^alpha`.
pub fn gcm_residual_recurrence(
    alpha: f64,
    beta: f64,
    lipschitz: f64,
    max_degree: usize,
) -> Result<RecurrenceCoefficients> {
    check_gcm(alpha, beta, lipschitz)?;
    jacobi_recurrence(max_degree, alpha, beta)?
        .shift_affine(2.0 / lipschitz, -1.0)?
        .to_residual()
}

fn check_gcm(alpha: f64, beta: f64, lipschitz: f64) -> Result<()> {
    if !(alpha > -1.0 && beta > -1.0) {
        return Err(Error::invalid(format!(
            "GCM parameters must exceed -1, got ({alpha}, {beta})"
        )));
    }
    check_lipschitz(lipschitz)
}

fn check_lipschitz(lipschitz: f64) -> Result<()> {
    if !(lipschitz > 0.0 && lipschitz.is_finite()) {
        return Err(Error::invalid(format!(
            "L must be positive, got {lipschitz}"
        )));
    }
    Ok(())
}

fn check_laguerre(alpha: f64) -> Result<()> {
    if !(alpha > -1.0 && alpha.is_finite()) {
        return Err(Error::invalid(format!(
            "Laguerre alpha must exceed -1, got {alpha}"
        )));
    }
    Ok(())
}

/// A first-order method with fully resolved parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Generalized Chebyshev method tuned to `lambda^beta (L - lambda)^alpha`.
    Gcm {
        alpha: f64,
        beta: f64,
        lipschitz: f64,
    },
    /// Laguerre method with polynomial parameter `alpha` (unit spectral scale).
    Laguerre {
        alpha: f64,
    },
    Nesterov {
        lipschitz: f64,
    },
    Gd {
        lipschitz: f64,
    },
}

impl Method {
    pub fn validate(&self) -> Result<()> {
        match *self {
            Method::Gcm {
                alpha,
                beta,
                lipschitz,
            } => check_gcm(alpha, beta, lipschitz),
            Method::Laguerre { alpha } => check_laguerre(alpha),
            Method::Nesterov { lipschitz } | Method::Gd { lipschitz } => check_lipschitz(lipschitz),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::Gcm { .. } => "gcm",
            Method::Laguerre { .. } => "laguerre",
            Method::Nesterov { .. } => "nesterov",
            Method::Gd { .. } => "gd",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Method::Gcm {
                alpha,
                beta,
                lipschitz,
            } => {
                write!(f, "gcm:alpha={alpha},beta={beta},L={lipschitz}")
            }
            Method::Laguerre { alpha } => write!(f, "laguerre:alpha={alpha}"),
            Method::Nesterov { lipschitz } => write!(f, "nesterov:L={lipschitz}"),
            Method::Gd { lipschitz } => write!(f, "gd:L={lipschitz}"),
        }
    }
}

#[derive(Debug, Clone)]
enum Kind {
    Recurrence(RecurrenceCoefficients),
    Nesterov { lipschitz: f64 },
    Gd { lipschitz: f64 },
}

/// Residual polynomials `P_0, ..., P_T` of a method.
#[derive(Debug, Clone)]
pub struct ResidualFamily {
    method: Method,
    max_degree: usize,
    kind: Kind,
}

impl ResidualFamily {
    pub fn new(method: Method, max_degree: usize) -> Result<Self> {
        method.validate()?;
        let kind = match method {
            Method::Gcm {
                alpha,
                beta,
                lipschitz,
            } => Kind::Recurrence(gcm_residual_recurrence(alpha, beta, lipschitz, max_degree)?),
            Method::Laguerre { alpha } => {
                Kind::Recurrence(laguerre_recurrence(max_degree, alpha).to_residual()?)
            }
            Method::Nesterov { lipschitz } => Kind::Nesterov { lipschitz },
            Method::Gd { lipschitz } => Kind::Gd { lipschitz },
        };
        Ok(ResidualFamily {
            method,
            max_degree,
            kind,
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    /// Residual recurrence coefficients, for the families that have one.
    pub fn coefficients(&self) -> Option<&RecurrenceCoefficients> {
        match &self.kind {
            Kind::Recurrence(c) => Some(c),
            _ => None,
        }
    }

    /// Rows `P_t(grid)` for `t = 0..=T`.
    pub fn evaluate(&self, grid: &[f64]) -> Vec<Vec<f64>> {
        let mut rows = Vec::with_capacity(self.max_degree + 1);
        self.for_each_degree(grid, &vec![0.0; grid.len()], |_, row| {
            rows.push(row.to_vec())
        });
        rows
    }

    /// Streams `exp(log_scale_i) * P_t(grid_i)` for `t = 0..=T` without storing
    /// the table. Every family is linear in its starting value, so the scale is
    /// carried as a per-point factor. The recurrence state is rescaled whenever
    /// it grows or shrinks too far, so tiny scales times huge polynomial values
    /// still come out right.
    pub fn for_each_degree(
        &self,
        grid: &[f64],
        log_scale: &[f64],
        mut visit: impl FnMut(usize, &[f64]),
    ) {
        assert_eq!(grid.len(), log_scale.len(), "grid and scale lengths differ");
        let n = grid.len();
        let mut state = ScaledState::new(log_scale);
        let mut row = vec![0.0; n];
        state.emit(&mut row);
        visit(0, &row);
        let mut cur = vec![1.0; n];
        match &self.kind {
            Kind::Recurrence(coeffs) => {
                let mut prev = vec![0.0; n];
                cur.iter_mut().for_each(|v| *v = coeffs.initial);
                for (t, term) in coeffs.terms.iter().enumerate() {
                    for i in 0..n {
                        let next =
                            (term.constant + term.slope * grid[i]) * cur[i] + term.lag * prev[i];
                        prev[i] = cur[i];
                        cur[i] = next;
                        state.rescale(i, &mut [&mut cur[i], &mut prev[i]]);
                    }
                    state.apply(&cur, &mut row);
                    visit(t + 1, &row);
                }
            }
            Kind::Nesterov { lipschitz } => {
                // P_{t+1} = (1 - lambda/L) Q_t,  Q_{t+1} = P_{t+1} + t/(t+3) (P_{t+1} - P_t).
                let mut q = cur.clone();
                for t in 0..self.max_degree {
                    let momentum = t as f64 / (t as f64 + 3.0);
                    for i in 0..n {
                        let next = (1.0 - grid[i] / lipschitz) * q[i];
                        q[i] = next + momentum * (next - cur[i]);
                        cur[i] = next;
                        state.rescale(i, &mut [&mut cur[i], &mut q[i]]);
                    }
                    state.apply(&cur, &mut row);
                    visit(t + 1, &row);
                }
            }
            Kind::Gd { lipschitz } => {
                for t in 0..self.max_degree {
                    for i in 0..n {
                        cur[i] *= 1.0 - grid[i] / lipschitz;
                        state.rescale(i, &mut [&mut cur[i]]);
                    }
                    state.apply(&cur, &mut row);
                    visit(t + 1, &row);
                }
            }
        }
    }
}

/// Per-point factors `exp(log_factor_i)` multiplying a rescaled recurrence state.
struct ScaledState {
    log_factor: Vec<f64>,
    factor: Vec<f64>,
}

impl ScaledState {
    const HIGH: f64 = 1e100;
    const LOW: f64 = 1e-100;

    fn new(log_scale: &[f64]) -> Self {
        ScaledState {
            log_factor: log_scale.to_vec(),
            factor: log_scale.iter().map(|l| l.exp()).collect(),
        }
    }

    fn emit(&self, row: &mut [f64]) {
        row.copy_from_slice(&self.factor);
    }

    fn apply(&self, cur: &[f64], row: &mut [f64]) {
        for ((r, c), f) in row.iter_mut().zip(cur).zip(&self.factor) {
            *r = c * f;
        }
    }

    /// Moves the magnitude of point `i`'s state into its factor when it leaves
    /// `[LOW, HIGH]`. An all-zero state is left alone.
    #[inline]
    fn rescale(&mut self, i: usize, values: &mut [&mut f64]) {
        let size = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if (size > Self::LOW && size < Self::HIGH) || size == 0.0 || !size.is_finite() {
            return;
        }
        for v in values.iter_mut() {
            **v /= size;
        }
        self.log_factor[i] += size.ln();
        self.factor[i] = self.log_factor[i].exp();
    }
}

pub type PolynomialTable = Vec<Vec<f64>>;

pub fn gcm_polynomials(
    alpha: f64,
    beta: f64,
    lipschitz: f64,
    max_degree: usize,
    grid: &[f64],
) -> Result<PolynomialTable> {
    check_grid(grid, 0.0, lipschitz)?;
    Ok(ResidualFamily::new(
        Method::Gcm {
            alpha,
            beta,
            lipschitz,
        },
        max_degree,
    )?
    .evaluate(grid))
}

/// `P_t(lambda) = (1 - lambda / L)^t`.
pub fn gd_polynomial(lipschitz: f64, max_degree: usize, grid: &[f64]) -> Result<PolynomialTable> {
    Ok(ResidualFamily::new(Method::Gd { lipschitz }, max_degree)?.evaluate(grid))
}

pub fn nesterov_polynomials(
    lipschitz: f64,
    max_degree: usize,
    grid: &[f64],
) -> Result<PolynomialTable> {
    Ok(ResidualFamily::new(Method::Nesterov { lipschitz }, max_degree)?.evaluate(grid))
}

pub fn laguerre_polynomials(
    alpha: f64,
    max_degree: usize,
    grid: &[f64],
) -> Result<PolynomialTable> {
    Ok(ResidualFamily::new(Method::Laguerre { alpha }, max_degree)?.evaluate(grid))
}

fn check_grid(grid: &[f64], lo: f64, hi: f64) -> Result<()> {
    let slack = 1e-12 * hi.abs();
    match grid
        .iter()
        .find(|&&x| !(x >= lo - slack && x <= hi + slack))
    {
        Some(x) => Err(Error::invalid(format!(
            "grid point {x} outside [{lo}, {hi}]"
        ))),
        None => Ok(()),
    }
}

/// Expected metric `integral P_t^2 lambda^l dmu` for `t = 0..=T`, halved for `l = 1`.
pub fn expected_metric(
    dist: &SpectralDistribution,
    method: Method,
    objective: u32,
    max_degree: usize,
) -> Result<Vec<f64>> {
    Ok(expected_metrics(dist, method, &[objective], max_degree)?.remove(0))
}

/// Expected metrics for several objectives at once, one vector per entry of `objectives`.
///
/// Uses `max(400, 4T)` Gauss nodes and repeats with twice as many; a relative
/// disagreement above [`SELF_CHECK_TOLERANCE`] is reported as a precision error.
/// The finer result is returned.
pub fn expected_metrics(
    dist: &SpectralDistribution,
    method: Method,
    objectives: &[u32],
    max_degree: usize,
) -> Result<Vec<Vec<f64>>> {
    if let Some(l) = objectives.iter().find(|l| **l > 2) {
        return Err(Error::invalid(format!(
            "objective must be 0, 1 or 2, got {l}"
        )));
    }
    let family = ResidualFamily::new(method, max_degree)?;
    let nodes = MIN_QUADRATURE_NODES.max(4 * max_degree);
    let coarse = metrics_with_nodes(dist, &family, objectives, nodes)?;
    let fine = metrics_with_nodes(dist, &family, objectives, 2 * nodes)?;
    let mut worst = 0.0f64;
    for (c, f) in coarse.iter().zip(&fine) {
        for (a, b) in c.iter().zip(f) {
            let scale = a.abs().max(b.abs());
            if scale > 0.0 {
                worst = worst.max((a - b).abs() / scale);
            }
        }
    }
    if worst > SELF_CHECK_TOLERANCE {
        return Err(Error::Precision {
            relative_change: worst,
        });
    }
    Ok(fine)
}

/// Quadrature of the expected metrics with a fixed node count.
pub fn metrics_with_nodes(
    dist: &SpectralDistribution,
    family: &ResidualFamily,
    objectives: &[u32],
    nodes: usize,
) -> Result<Vec<Vec<f64>>> {
    let rule = dist.quadrature_nodes(nodes)?;
    let scale: Vec<f64> = rule.log_weights.iter().map(|l| 0.5 * l).collect();
    let powers: Vec<Vec<f64>> = objectives
        .iter()
        .map(|&l| rule.nodes.iter().map(|x| x.powi(l as i32)).collect())
        .collect();
    let mut out = vec![Vec::with_capacity(family.max_degree() + 1); objectives.len()];
    let mut overflow = None;
    family.for_each_degree(&rule.nodes, &scale, |t, row| {
        for (k, &l) in objectives.iter().enumerate() {
            let sum: f64 = row.iter().zip(&powers[k]).map(|(v, p)| v * v * p).sum();
            let value = if l == 1 { 0.5 * sum } else { sum };
            if !value.is_finite() && overflow.is_none() {
                overflow = Some(t);
            }
            out[k].push(value);
        }
    });
    match overflow {
        Some(degree) => Err(Error::Overflow { degree }),
        None => Ok(out),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gauss::gauss_jacobi;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol * a.abs().max(b.abs()).max(1e-300)
    }

    #[test]
    fn legendre_first_degree() {
        let c = jacobi_raw_coefficients(1, 0.0, 0.0).unwrap();
        assert_eq!(
            c,
            Triple {
                constant: 0.0,
                slope: 1.0,
                lag: 0.0
            }
        );
        let p = jacobi_recurrence(1, 0.0, 0.0).unwrap();
        for x in [-1.0, -0.3, 0.0, 0.7] {
            assert_eq!(p.evaluate(x)[1], x);
        }
    }

    #[test]
    fn degree_one_has_no_lag_term() {
        assert_eq!(jacobi_raw_coefficients(1, 1.0, 0.3).unwrap().lag, 0.0);
    }

    #[test]
    fn chebyshev_degree_two_is_cosine() {
        let p = jacobi_recurrence(2, -0.5, -0.5).unwrap();
        let ratio = p.evaluate(0.1f64.cos())[2] / 0.2f64.cos();
        for k in 0..50 {
            let theta = 0.03 + 0.06 * k as f64;
            if (2.0 * theta).cos().abs() < 1e-3 {
                continue;
            }
            let got = p.evaluate(theta.cos())[2] / (2.0 * theta).cos();
            assert!(close(got, ratio, 1e-12), "theta={theta}: {got} vs {ratio}");
        }
    }

    #[test]
    fn matches_textbook_legendre() {
        let p = jacobi_recurrence(5, 0.0, 0.0).unwrap();
        let x: f64 = 0.37;
        let p5 = (63.0 * x.powi(5) - 70.0 * x.powi(3) + 15.0 * x) / 8.0;
        assert!(close(p.evaluate(x)[5], p5, 1e-14));
    }

    #[test]
    fn singular_coefficients_are_reported() {
        assert!(matches!(
            jacobi_raw_coefficients(2, -1.0, -1.0),
            Err(Error::SingularCoefficient { degree: 2 })
        ));
        assert!(matches!(
            jacobi_recurrence(5, -1.5, -1.5),
            Err(Error::SingularCoefficient { degree: 3 })
        ));
        assert!(jacobi_raw_coefficients(0, 0.0, 0.0).is_err());
    }

    #[test]
    fn shift_identity_and_inverse() {
        let p = jacobi_recurrence(12, 0.5, 1.5).unwrap();
        assert_eq!(p.shift_affine(1.0, 0.0).unwrap(), p);
        let (a, b) = (2.0 / 3.0, -1.0);
        let back = p
            .shift_affine(a, b)
            .unwrap()
            .shift_affine(1.0 / a, -b / a)
            .unwrap();
        for (x, y) in back.terms.iter().zip(&p.terms) {
            assert!((x.constant - y.constant).abs() <= 1e-14 * (1.0 + y.constant.abs()));
            assert!((x.slope - y.slope).abs() <= 1e-14 * (1.0 + y.slope.abs()));
            assert_eq!(x.lag, y.lag);
        }
        assert!(p.shift_affine(0.0, 1.0).is_err());
    }

    #[test]
    fn shifted_chebyshev_is_orthogonal_on_unit_interval() {
        let q = jacobi_recurrence(10, -0.5, -0.5)
            .unwrap()
            .shift_affine(2.0, -1.0)
            .unwrap();
        let rule = gauss_jacobi(40, -0.5, -0.5, 0.0, 1.0).unwrap();
        let values: Vec<Vec<f64>> = rule.nodes.iter().map(|&x| q.evaluate(x)).collect();
        let inner = |s: usize, t: usize| -> f64 {
            values
                .iter()
                .zip(&rule.weights)
                .map(|(v, w)| w * v[s] * v[t])
                .sum()
        };
        for t in 0..=10 {
            for s in 0..t {
                assert!(
                    inner(s, t).abs() <= 1e-8,
                    "<q_{s}, q_{t}> = {}",
                    inner(s, t)
                );
            }
        }
    }

    #[test]
    fn residual_of_constant_family_is_one() {
        let c = RecurrenceCoefficients::new(
            3.0,
            vec![
                Triple {
                    constant: 1.0,
                    slope: 0.0,
                    lag: 0.0
                };
                6
            ],
        );
        let r = c.to_residual().unwrap();
        for x in [0.0, 0.5, 7.0] {
            assert!(r.evaluate(x).iter().all(|v| (*v - 1.0).abs() < 1e-15));
        }
    }

    #[test]
    fn residual_property_of_shifted_chebyshev() {
        let r = jacobi_recurrence(100, -0.5, -0.5)
            .unwrap()
            .shift_affine(2.0, -1.0)
            .unwrap()
            .to_residual()
            .unwrap();
        assert!(r.evaluate(0.0).iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn degenerate_family_names_the_degree() {
        // p_1(0) = 0 because the constant term vanishes.
        let c = RecurrenceCoefficients::new(
            1.0,
            vec![Triple {
                constant: 0.0,
                slope: 1.0,
                lag: 0.0,
            }],
        );
        assert!(matches!(
            c.to_residual(),
            Err(Error::Degenerate { degree: 1 })
        ));
        assert!(matches!(
            c.to_residual_by_delta_recursion(),
            Err(Error::Degenerate { degree: 1 })
        ));
        let zero = RecurrenceCoefficients::new(0.0, vec![]);
        assert!(matches!(
            zero.to_residual(),
            Err(Error::Degenerate { degree: 0 })
        ));
    }

    #[test]
    fn delta_recursion_agrees_with_ratios() {
        for &(a, b) in &[(0.5, 1.5), (0.5, 2.5), (-0.5, -0.5), (1.5, -0.5)] {
            let raw = jacobi_recurrence(1000, a, b)
                .unwrap()
                .shift_affine(2.0, -1.0)
                .unwrap();
            let x = raw.to_residual().unwrap();
            let y = raw.to_residual_by_delta_recursion().unwrap();
            for (p, q) in x.terms.iter().zip(&y.terms) {
                assert!(close(p.constant, q.constant, 1e-10));
                assert!(close(p.slope, q.slope, 1e-10));
            }
        }
    }

    #[test]
    fn residual_gcm_is_optimal_for_its_kernel_weight() {
        // GCM(alpha, beta) is orthogonal for lambda^beta (1-lambda)^alpha, so among
        // residual polynomials of its degree it minimizes the integral of P^2 against
        // lambda^(beta-1) (1-lambda)^alpha. For (1/2, 3/2) that is lambda^(1/2)(1-lambda)^(1/2).
        let t = 8;
        let rule = gauss_jacobi(60, 0.5, 0.5, 0.0, 1.0).unwrap();
        let best = gcm_polynomials(0.5, 1.5, 1.0, t, &rule.nodes).unwrap();
        let energy = |vals: &dyn Fn(usize) -> f64| -> f64 {
            (0..rule.len())
                .map(|i| rule.weights[i] * vals(i).powi(2))
                .sum()
        };
        let optimum = energy(&|i| best[t][i]);
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..200 {
            // Residual perturbation: lambda times a random polynomial of degree t-1
            // written in a Chebyshev basis on [0, 1].
            let coeffs: Vec<f64> = (0..t).map(|_| rng.random_range(-0.05..0.05)).collect();
            let perturbed = |i: usize| {
                let x = rule.nodes[i];
                let theta = (2.0 * x - 1.0).clamp(-1.0, 1.0).acos();
                let q: f64 = coeffs
                    .iter()
                    .enumerate()
                    .map(|(k, c)| c * (k as f64 * theta).cos())
                    .sum();
                best[t][i] + x * q
            };
            assert!(energy(&perturbed) >= optimum);
        }
    }

    #[test]
    fn gcm_degree_one_is_orthogonal_to_constants() {
        let (a, b) = (0.5, 1.5);
        let rule = gauss_jacobi(10, a, b, 0.0, 2.0).unwrap();
        let p = gcm_polynomials(a, b, 2.0, 1, &rule.nodes).unwrap();
        assert_eq!(p[1].len(), rule.len());
        let inner: f64 = rule.weights.iter().zip(&p[1]).map(|(w, v)| w * v).sum();
        assert!(inner.abs() < 1e-14);
        assert_eq!(gcm_polynomials(a, b, 2.0, 1, &[0.0]).unwrap()[1][0], 1.0);
    }

    #[test]
    fn gcm_orthogonality() {
        for &(a, b) in &[(0.5, 1.5), (0.5, 2.5), (-0.5, -0.5), (2.0, 0.0)] {
            let lip = 3.0;
            let rule = gauss_jacobi(60, a, b, 0.0, lip).unwrap();
            let p = gcm_polynomials(a, b, lip, 20, &rule.nodes).unwrap();
            let inner = |s: usize, t: usize| -> f64 {
                (0..rule.len())
                    .map(|i| rule.weights[i] * p[s][i] * p[t][i])
                    .sum()
            };
            for t in 1..=20 {
                let norm = inner(t, t);
                for s in 0..t {
                    assert!(inner(s, t).abs() <= 1e-8 * norm, "({a},{b}) s={s} t={t}");
                }
            }
        }
    }

    #[test]
    fn gcm_rejects_out_of_range_grid_and_parameters() {
        assert!(gcm_polynomials(0.5, 1.5, 1.0, 3, &[1.5]).is_err());
        assert!(gcm_polynomials(-1.0, 1.5, 1.0, 3, &[0.5]).is_err());
    }

    #[test]
    fn gd_examples() {
        let lip = 2.0;
        let p = gd_polynomial(lip, 10, &[0.0, lip, lip / 2.0]).unwrap();
        for t in 0..=10 {
            assert_eq!(p[t][0], 1.0);
            if t >= 1 {
                assert_eq!(p[t][1], 0.0);
            }
        }
        assert_eq!(p[10][2], 2f64.powi(-10));
    }

    #[test]
    fn gd_matches_closed_form() {
        let grid: Vec<f64> = (0..=50).map(|i| i as f64 / 50.0 * 3.0).collect();
        let p = gd_polynomial(3.0, 200, &grid).unwrap();
        for (i, &x) in grid.iter().enumerate() {
            let base = 1.0 - x / 3.0;
            for t in [1usize, 7, 64, 200] {
                assert!(
                    (p[t][i] - base.powi(t as i32)).abs()
                        <= 1e-13 * base.powi(t as i32).abs() + 1e-300
                );
            }
        }
    }

    #[test]
    fn nesterov_examples() {
        let grid = [0.0, 0.3, 1.0, 2.0];
        let p = nesterov_polynomials(2.0, 30, &grid).unwrap();
        for (i, x) in grid.iter().enumerate() {
            assert_eq!(p[1][i], 1.0 - x / 2.0);
        }
        assert!(p.iter().all(|row| row[0] == 1.0));
    }

    #[test]
    fn laguerre_examples() {
        let p = laguerre_polynomials(0.0, 1, &[0.0, 0.4, 2.0]).unwrap();
        assert_eq!(p[1], vec![1.0, 0.6, -1.0]);
        for alpha in [-0.5, 0.0, 1.0, 3.0] {
            let p = laguerre_polynomials(alpha, 200, &[0.0]).unwrap();
            assert!(p.iter().all(|row| (row[0] - 1.0).abs() <= 1e-10));
        }
        assert!(laguerre_polynomials(-1.0, 3, &[0.0]).is_err());
    }

    #[test]
    fn laguerre_delta_has_closed_form() {
        for alpha in [0.0, 0.5, 2.0] {
            let deltas = laguerre_recurrence(50, alpha).ratios_at_zero().unwrap();
            for (i, d) in deltas.iter().enumerate() {
                let t = (i + 1) as f64;
                assert!(close(*d, t / (t + alpha), 1e-13));
            }
        }
    }

    #[test]
    fn expected_metric_at_start_is_one() {
        for dist in [
            SpectralDistribution::beta(0.5, -0.5, 1.0).unwrap(),
            SpectralDistribution::marchenko_pastur(1.0, 1.0).unwrap(),
            SpectralDistribution::gamma(0.0).unwrap(),
        ] {
            let m = expected_metric(&dist, Method::Gd { lipschitz: 4.0 }, 0, 5).unwrap();
            assert!((m[0] - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_metric_errors() {
        let e = SpectralDistribution::empirical(vec![1.0, 2.0]).unwrap();
        assert!(matches!(
            expected_metric(&e, Method::Gd { lipschitz: 2.0 }, 1, 3),
            Err(Error::Unsupported(_))
        ));
        let b = SpectralDistribution::beta(0.0, 0.0, 1.0).unwrap();
        assert!(expected_metric(&b, Method::Gd { lipschitz: 1.0 }, 3, 3).is_err());
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn every_family_is_residual(
            a in -0.95f64..4.0,
            b in -0.95f64..4.0,
            lip in 0.1f64..10.0,
            alpha in -0.95f64..5.0,
        ) {
            let methods = [
                Method::Gcm { alpha: a, beta: b, lipschitz: lip },
                Method::Laguerre { alpha },
                Method::Nesterov { lipschitz: lip },
                Method::Gd { lipschitz: lip },
            ];
            for m in methods {
                let family = ResidualFamily::new(m, 1000).unwrap();
                let rows = family.evaluate(&[0.0]);
                let worst = rows.iter().map(|r| (r[0] - 1.0).abs()).fold(0.0, f64::max);
                prop_assert!(worst <= 1e-10, "{m}: {worst}");
            }
        }

        #[test]
        fn shift_then_inverse_is_identity(
            a in prop_oneof![-5.0f64..-0.1, 0.1f64..5.0],
            b in -3.0f64..3.0,
        ) {
            let p = jacobi_recurrence(20, 0.3, -0.4).unwrap();
            let back = p.shift_affine(a, b).unwrap().shift_affine(1.0 / a, -b / a).unwrap();
            for x in [-0.9, 0.1, 0.8] {
                let (u, v) = (back.evaluate(x), p.evaluate(x));
                for (s, t) in u.iter().zip(&v) {
                    prop_assert!((s - t).abs() <= 1e-9 * (1.0 + t.abs()));
                }
            }
        }
    }
}
