//! Gauss rules for Jacobi and generalized Laguerre weights.
//!
//! Nodes are eigenvalues of the Jacobi (tridiagonal) matrix of the weight, built
//! directly in the target variable. Weights come from the Christoffel function
//! `1 / sum_k q_k(x)^2` over the orthonormal family, which avoids computing
//! eigenvectors. Rules are normalized so the weights sum to one.

use std::collections::HashMap;
use std::sync::{Arc, Mutex, OnceLock};

use crate::error::{Error, Result};

/// Nodes in increasing order with weights summing to one.
///
/// Far tail weights of the Laguerre rule underflow to zero; `log_weights`
/// keeps them so integrands that grow fast enough can still be summed.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureRule {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
    pub log_weights: Vec<f64>,
}

impl QuadratureRule {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn integrate(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }

    pub fn from_log_weights(nodes: Vec<f64>, log_weights: Vec<f64>) -> Self {
        let weights = log_weights.iter().map(|l| l.exp()).collect();
        QuadratureRule {
            nodes,
            weights,
            log_weights,
        }
    }
}

/// Symmetric tridiagonal matrix: `diag[k]` and `off[k]` coupling rows `k-1` and `k`
/// (`off[0]` unused). Holds one extra row so the degree-`n` polynomial can be evaluated.
struct Tridiagonal {
    diag: Vec<f64>,
    off: Vec<f64>,
}

impl Tridiagonal {
    /// Jacobi matrix of `(1-x)^a (1+x)^b` mapped affinely onto `[lo, hi]`.
    fn jacobi(n: usize, a: f64, b: f64, lo: f64, hi: f64) -> Self {
        let half = 0.5 * (hi - lo);
        let mut diag = Vec::with_capacity(n + 1);
        let mut off = Vec::with_capacity(n + 1);
        let s = a + b;
        for k in 0..=n {
            let kf = k as f64;
            let centre = if k == 0 {
                (b - a) / (s + 2.0)
            } else {
                (b * b - a * a) / ((2.0 * kf + s) * (2.0 * kf + s + 2.0))
            };
            diag.push(lo + half * (centre + 1.0));
            let beta = match k {
                0 => 0.0,
                1 => 4.0 * (1.0 + a) * (1.0 + b) / ((2.0 + s).powi(2) * (3.0 + s)),
                _ => {
                    let m = 2.0 * kf + s;
                    4.0 * kf * (kf + a) * (kf + b) * (kf + s) / (m * m * (m + 1.0) * (m - 1.0))
                }
            };
            off.push(half * beta.sqrt());
        }
        Tridiagonal { diag, off }
    }

    /// Jacobi matrix of `x^a e^{-x}` on `[0, inf)`.
    fn laguerre(n: usize, a: f64) -> Self {
        let diag = (0..=n).map(|k| 2.0 * k as f64 + a + 1.0).collect();
        let off = (0..=n)
            .map(|k| {
                let kf = k as f64;
                (kf * (kf + a)).sqrt()
            })
            .collect();
        Tridiagonal { diag, off }
    }

    /// Eigenvalues of the leading `n x n` block by implicit QL with Wilkinson shifts.
    fn eigenvalues(&self, n: usize) -> Result<Vec<f64>> {
        let mut d = self.diag[..n].to_vec();
        // e[i] couples i and i+1.
        let mut e: Vec<f64> = (0..n)
            .map(|i| if i + 1 < n { self.off[i + 1] } else { 0.0 })
            .collect();
        for l in 0..n {
            let mut iterations = 0;
            loop {
                let mut m = l;
                while m + 1 < n {
                    let dd = d[m].abs() + d[m + 1].abs();
                    if e[m].abs() <= f64::EPSILON * dd {
                        break;
                    }
                    m += 1;
                }
                if m == l {
                    break;
                }
                iterations += 1;
                if iterations > 60 {
                    return Err(Error::Linalg(
                        "tridiagonal QL iteration did not converge".into(),
                    ));
                }
                let mut g = (d[l + 1] - d[l]) / (2.0 * e[l]);
                let mut r = g.hypot(1.0);
                g = d[m] - d[l] + e[l] / (g + r.copysign(g));
                let (mut s, mut c, mut p) = (1.0, 1.0, 0.0);
                let mut deflated = false;
                let mut i = m;
                while i > l {
                    i -= 1;
                    let f = s * e[i];
                    let b = c * e[i];
                    r = f.hypot(g);
                    e[i + 1] = r;
                    if r == 0.0 {
                        d[i + 1] -= p;
                        e[m] = 0.0;
                        deflated = true;
                        break;
                    }
                    s = f / r;
                    c = g / r;
                    g = d[i + 1] - p;
                    r = (d[i] - g) * s + 2.0 * c * b;
                    p = s * r;
                    d[i + 1] = g + p;
                    g = c * r - b;
                }
                if deflated {
                    continue;
                }
                d[l] -= p;
                e[l] = g;
                e[m] = 0.0;
            }
        }
        d.sort_by(f64::total_cmp);
        Ok(d)
    }

    /// Runs the orthonormal recurrence at `x` up to degree `n`.
    ///
    /// Returns `(q_n / q_n', ln sum_{k<n} q_k^2)`. Values are rescaled on the fly so
    /// nodes far out in a Laguerre tail do not overflow.
    fn evaluate(&self, n: usize, x: f64) -> (f64, f64) {
        const BIG: f64 = 1e150;
        let mut log_scale = 0.0;
        let (mut prev, mut cur) = (0.0, 1.0);
        let (mut dprev, mut dcur) = (0.0, 0.0);
        let mut sum = 0.0;
        for k in 0..n {
            sum += cur * cur;
            let next = ((x - self.diag[k]) * cur - self.off[k] * prev) / self.off[k + 1];
            let dnext = (cur + (x - self.diag[k]) * dcur - self.off[k] * dprev) / self.off[k + 1];
            prev = cur;
            cur = next;
            dprev = dcur;
            dcur = dnext;
            let size = cur.abs().max(prev.abs());
            if size > BIG {
                let f = 1.0 / size;
                prev *= f;
                cur *= f;
                dprev *= f;
                dcur *= f;
                sum *= f * f;
                log_scale += size.ln();
            }
        }
        (cur / dcur, sum.ln() + 2.0 * log_scale)
    }

    fn rule(&self, n: usize) -> Result<QuadratureRule> {
        let mut nodes = self.eigenvalues(n)?;
        let mut log_weights = Vec::with_capacity(n);
        for x in nodes.iter_mut() {
            // One Newton step on q_n sharpens nodes that QL only resolves to
            // absolute precision, which matters next to a zero endpoint.
            let (ratio, _) = self.evaluate(n, *x);
            if ratio.is_finite() && ratio.abs() <= 1e-6 * (1.0 + x.abs()) {
                *x -= ratio;
            }
            let (_, log_sum) = self.evaluate(n, *x);
            log_weights.push(-log_sum);
        }
        let top = log_weights
            .iter()
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = log_weights.iter().map(|l| (l - top).exp()).sum();
        if !(top.is_finite() && total.is_finite()) || log_weights.iter().any(|l| l.is_nan()) {
            return Err(Error::Linalg("quadrature weights are not finite".into()));
        }
        let shift = top + total.ln();
        log_weights.iter_mut().for_each(|l| *l -= shift);
        Ok(QuadratureRule::from_log_weights(nodes, log_weights))
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
enum RuleKey {
    Jacobi {
        n: usize,
        a: u64,
        b: u64,
        lo: u64,
        hi: u64,
    },
    Laguerre {
        n: usize,
        a: u64,
    },
}

fn cache() -> &'static Mutex<HashMap<RuleKey, Arc<QuadratureRule>>> {
    static CACHE: OnceLock<Mutex<HashMap<RuleKey, Arc<QuadratureRule>>>> = OnceLock::new();
    CACHE.get_or_init(Default::default)
}

fn cached(
    key: RuleKey,
    build: impl FnOnce() -> Result<QuadratureRule>,
) -> Result<Arc<QuadratureRule>> {
    if let Some(rule) = cache().lock().expect("rule cache poisoned").get(&key) {
        return Ok(Arc::clone(rule));
    }
    let rule = Arc::new(build()?);
    cache()
        .lock()
        .expect("rule cache poisoned")
        .insert(key, Arc::clone(&rule));
    Ok(rule)
}

/// `n`-point Gauss rule for the probability weight proportional to
/// `(x - lo)^left (hi - x)^right` on `[lo, hi]`.
pub fn gauss_jacobi(
    n: usize,
    right: f64,
    left: f64,
    lo: f64,
    hi: f64,
) -> Result<Arc<QuadratureRule>> {
    if n == 0 {
        return Err(Error::invalid("a quadrature rule needs at least one node"));
    }
    if !(right > -1.0 && left > -1.0) {
        return Err(Error::invalid(format!(
            "Jacobi exponents must exceed -1, got ({right}, {left})"
        )));
    }
    if !(lo.is_finite() && hi.is_finite() && hi > lo) {
        return Err(Error::invalid(format!("bad interval [{lo}, {hi}]")));
    }
    let key = RuleKey::Jacobi {
        n,
        a: right.to_bits(),
        b: left.to_bits(),
        lo: lo.to_bits(),
        hi: hi.to_bits(),
    };
    cached(key, || Tridiagonal::jacobi(n, right, left, lo, hi).rule(n))
}

/// `n`-point Gauss rule for the probability weight `x^a e^{-x} / Gamma(a+1)`.
pub fn gauss_laguerre(n: usize, a: f64) -> Result<Arc<QuadratureRule>> {
    if n == 0 {
        return Err(Error::invalid("a quadrature rule needs at least one node"));
    }
    if a.is_nan() || a <= -1.0 {
        return Err(Error::invalid(format!(
            "Laguerre exponent must exceed -1, got {a}"
        )));
    }
    let key = RuleKey::Laguerre { n, a: a.to_bits() };
    cached(key, || Tridiagonal::laguerre(n, a).rule(n))
}
