//! Closed-form asymptotic rates, exact integral identities, and log-log slope fits.
//!
//! Exponent functions take [`Param`]s so that the measure-zero branches (where a
//! `log t` factor appears) are decided exactly for rational inputs.

use std::cmp::Ordering;

use num_rational::Ratio;
use serde::{Deserialize, Serialize};
use statrs::function::gamma::ln_gamma;

use crate::error::{Error, Result};
use crate::param::Param;

/// Default trailing window for slope fits.
pub const DEFAULT_FIT_WINDOW: usize = 700;

/// Asymptotic rate `Theta(t^exponent)`, optionally times `log t`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateSpec {
    pub exponent: f64,
    #[serde(skip)]
    pub exact_exponent: Option<Ratio<i64>>,
    pub log_factor: bool,
    pub regime: String,
    /// Constants in front of the rates are never available.
    pub constant_known: bool,
}

impl RateSpec {
    fn new(exponent: Param, log_factor: bool, regime: impl Into<String>) -> Self {
        RateSpec {
            exponent: exponent.value(),
            exact_exponent: exponent.exact(),
            log_factor,
            regime: regime.into(),
            constant_known: false,
        }
    }

    pub fn converges(&self) -> bool {
        self.exponent < 0.0
    }

    /// Exponent as text, e.g. `-5/2`, with ` log t` appended when present.
    pub fn describe(&self) -> String {
        let base = match self.exact_exponent {
            Some(r) if *r.denom() == 1 => r.numer().to_string(),
            Some(r) => format!("{}/{}", r.numer(), r.denom()),
            None => format!("{}", self.exponent),
        };
        if self.log_factor {
            format!("t^({base}) log t")
        } else {
            format!("t^({base})")
        }
    }
}

/// Accumulates notes about boundary comparisons for the regime label.
#[derive(Default)]
struct Notes(Vec<String>);

impl Notes {
    fn cmp(&mut self, what: &str, a: Param, b: Param) -> Ordering {
        let c = a.compare(b);
        if c.approximate {
            self.0.push(format!("{what} equal within tolerance"));
        }
        c.ordering
    }

    fn label(self, regime: &str) -> String {
        if self.0.is_empty() {
            regime.to_string()
        } else {
            format!("{regime} [{}]", self.0.join("; "))
        }
    }
}

fn check_objective(l: u32) -> Result<Param> {
    match l {
        1 | 2 => Ok(Param::int(l as i64)),
        _ => Err(Error::invalid(format!("objective must be 1 or 2, got {l}"))),
    }
}

fn half() -> Param {
    Param::ratio(1, 2)
}

fn one() -> Param {
    Param::int(1)
}

fn two() -> Param {
    Param::int(2)
}

/// Average-case exponent of GCM(alpha, beta) on a spectrum with edge exponents
/// `tau` (right) and `xi` (left), for the function gap (`l = 1`) or the squared
/// gradient norm (`l = 2`).
pub fn gcm_avg_exponent(
    alpha: Param,
    beta: Param,
    tau: Param,
    xi: Param,
    l: u32,
) -> Result<RateSpec> {
    let lp = check_objective(l)?;
    let mut notes = Notes::default();
    let right_edge = tau + half();
    let left_edge = xi + lp + half();
    let a = notes.cmp("alpha vs tau+1/2", alpha, right_edge);
    let b = notes.cmp("beta vs xi+l+1/2", beta, left_edge);
    let spec = match (a, b) {
        (Ordering::Less, Ordering::Less) => {
            RateSpec::new(-one() - two() * beta, false, notes.label("beta-limited"))
        }
        (Ordering::Equal, Ordering::Equal) => {
            RateSpec::new(-two() * (xi + lp + one()), true, notes.label("critical"))
        }
        _ => {
            if a == Ordering::Equal || b == Ordering::Equal {
                notes
                    .0
                    .push("single-equality boundary, no log factor assumed".into());
            }
            let inner = (alpha - beta - tau).max(-xi - lp);
            RateSpec::new(two() * (inner - one()), false, notes.label("edge-limited"))
        }
    };
    Ok(spec)
}

/// Best achievable average-case rate and the GCM tuning that attains it.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimalTuning {
    pub rate: RateSpec,
    pub alpha: Param,
    pub beta: Param,
}

pub fn optimal_exponent(tau: Param, xi: Param, l: u32) -> Result<OptimalTuning> {
    let lp = check_objective(l)?;
    let beta = xi + lp + one();
    Ok(OptimalTuning {
        rate: RateSpec::new(-two() * beta, false, "optimal"),
        alpha: tau,
        beta,
    })
}

/// Worst-case exponent of GCM(alpha, beta) over spectra supported in `[0, L]`.
pub fn gcm_worst_exponent(alpha: Param, beta: Param, l: u32) -> Result<RateSpec> {
    let lp = check_objective(l)?;
    let mut notes = Notes::default();
    if notes.cmp("alpha vs beta-l", alpha, beta - lp) == Ordering::Greater {
        return Ok(RateSpec::new(
            two() * (alpha - beta),
            false,
            notes.label("alpha-dominated"),
        ));
    }
    if notes.cmp("beta vs l-1/2", beta, lp - half()) != Ordering::Greater {
        return Ok(RateSpec::new(
            -one() - two() * beta,
            false,
            notes.label("beta-limited"),
        ));
    }
    Ok(RateSpec::new(
        -two() * lp,
        false,
        notes.label("lower-bound"),
    ))
}

pub fn nesterov_avg_exponent(xi: Param, l: u32) -> Result<RateSpec> {
    let lp = check_objective(l)?;
    if l == 2 {
        return Ok(RateSpec::new(-(xi + Param::ratio(9, 2)), false, "gradient"));
    }
    let mut notes = Notes::default();
    Ok(match notes.cmp("xi vs -1/2", xi, -half()) {
        Ordering::Less => RateSpec::new(-two() * (xi + lp + one()), false, notes.label("optimal")),
        Ordering::Equal => RateSpec::new(Param::int(-3), true, notes.label("critical")),
        Ordering::Greater => {
            RateSpec::new(-(xi + Param::ratio(7, 2)), false, notes.label("suboptimal"))
        }
    })
}

pub fn gd_avg_exponent(xi: Param, l: u32) -> Result<RateSpec> {
    let lp = check_objective(l)?;
    Ok(RateSpec::new(-(xi + lp + one()), false, "gd"))
}

/// Rate of the tuned Laguerre method on the Gamma spectrum with parameter `alpha`.
pub fn laguerre_exponent(alpha: Param) -> RateSpec {
    RateSpec::new(-(alpha + two()), false, "laguerre")
}

/// `Gamma(l+xi+1) Gamma(2t+tau+1) / Gamma(2t+l+xi+tau+2)`, the integral of
/// `(1-lambda)^(2t) lambda^l` against the unnormalized weight `lambda^xi (1-lambda)^tau`.
pub fn gd_beta_closed_form(t: usize, tau: f64, xi: f64, l: u32) -> f64 {
    let two_t = 2.0 * t as f64;
    let l = l as f64;
    (ln_gamma(l + xi + 1.0) + ln_gamma(two_t + tau + 1.0) - ln_gamma(two_t + l + xi + tau + 2.0))
        .exp()
}

/// `1 / binom(t + alpha + 2, t)` for real `alpha`.
pub fn laguerre_closed_form(t: usize, alpha: f64) -> f64 {
    let t = t as f64;
    (ln_gamma(t + 1.0) + ln_gamma(alpha + 3.0) - ln_gamma(t + alpha + 3.0)).exp()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlopeFit {
    pub slope: f64,
    pub stderr: f64,
    /// Inclusive iteration range `[first, last]` used.
    pub window: (usize, usize),
    pub log_corrected: bool,
    /// The trajectory was shorter than the requested window.
    pub shrunk: bool,
}

/// Least-squares slope of `log v_t` against `log t` over the trailing window,
/// optionally with an extra `log log t` regressor to absorb a `log t` factor.
///
/// `values[t]` is the metric at iteration `t`. Falls back to the trailing half
/// when fewer than `window + 1` values are available.
pub fn fit_slope(values: &[f64], window: usize, include_log: bool) -> Result<SlopeFit> {
    if window < 3 {
        return Err(Error::invalid(format!(
            "fit window must be at least 3, got {window}"
        )));
    }
    let last = values
        .len()
        .checked_sub(1)
        .ok_or_else(|| Error::invalid("empty trajectory"))?;
    let min_t = if include_log { 2 } else { 1 };
    let (first, shrunk) = if last + 1 >= window + min_t {
        (last + 1 - window, false)
    } else {
        ((last + 1 - values.len() / 2).max(min_t), true)
    };
    let regressors = if include_log { 3 } else { 2 };
    if last < first || last + 1 - first < regressors + 1 {
        return Err(Error::invalid(format!(
            "trajectory with {} values is too short to fit",
            values.len()
        )));
    }
    if let Some(t) = (first..=last).find(|&t| !(values[t] > 0.0 && values[t].is_finite())) {
        return Err(Error::invalid(format!(
            "value at t = {t} is {} (must be positive to fit in log space)",
            values[t]
        )));
    }
    let ts: Vec<f64> = (first..=last).map(|t| (t as f64).ln()).collect();
    let mut columns = vec![ts.clone()];
    if include_log {
        columns.push(ts.iter().map(|x| x.ln()).collect());
    }
    let y: Vec<f64> = (first..=last).map(|t| values[t].ln()).collect();
    let (coef, stderr) = least_squares(&columns, &y);
    Ok(SlopeFit {
        slope: coef[0],
        stderr: stderr[0],
        window: (first, last),
        log_corrected: include_log,
        shrunk,
    })
}

/// Ordinary least squares with an intercept via Householder QR on centered
/// columns. Returns slopes for `columns` (intercept omitted) and their standard errors.
fn least_squares(columns: &[Vec<f64>], y: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let n = y.len();
    let p = columns.len();
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    // Centering removes the intercept column and improves conditioning.
    let mut a: Vec<Vec<f64>> = columns
        .iter()
        .map(|c| {
            let m = mean(c);
            c.iter().map(|x| x - m).collect()
        })
        .collect();
    let ym = mean(y);
    let mut b: Vec<f64> = y.iter().map(|v| v - ym).collect();
    let mut r = vec![vec![0.0; p]; p];
    for j in 0..p {
        let norm = a[j][j..].iter().map(|x| x * x).sum::<f64>().sqrt();
        let alpha = if a[j][j] > 0.0 { -norm } else { norm };
        let mut v: Vec<f64> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm2: f64 = v.iter().map(|x| x * x).sum();
        if vnorm2 > 0.0 {
            let reflect = |col: &mut [f64]| {
                let dot: f64 = v.iter().zip(col.iter()).map(|(a, b)| a * b).sum();
                let f = 2.0 * dot / vnorm2;
                col.iter_mut().zip(&v).for_each(|(c, vi)| *c -= f * vi);
            };
            for col in a.iter_mut().skip(j) {
                reflect(&mut col[j..]);
            }
            reflect(&mut b[j..]);
        }
        for (k, col) in a.iter().enumerate().skip(j) {
            r[j][k] = col[j];
        }
    }
    // Back substitution R coef = (Q^T b)[..p].
    let mut coef = vec![0.0; p];
    for j in (0..p).rev() {
        let s: f64 = (j + 1..p).map(|k| r[j][k] * coef[k]).sum();
        coef[j] = (b[j] - s) / r[j][j];
    }
    let rss: f64 = b[p..].iter().map(|x| x * x).sum();
    let dof = n.saturating_sub(p + 1).max(1) as f64;
    let sigma2 = rss / dof;
    // diag((R^T R)^-1) = row norms of R^-1.
    let mut rinv = vec![vec![0.0; p]; p];
    for j in 0..p {
        rinv[j][j] = 1.0 / r[j][j];
        for i in (0..j).rev() {
            let s: f64 = (i + 1..=j).map(|k| r[i][k] * rinv[k][j]).sum();
            rinv[i][j] = -s / r[i][i];
        }
    }
    let stderr = (0..p)
        .map(|i| (sigma2 * rinv[i].iter().map(|x| x * x).sum::<f64>()).sqrt())
        .collect();
    (coef, stderr)
}
