//! Expected spectral distribution models: densities, supports, samplers and
//! quadrature rules over their supports.

use std::f64::consts::PI;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::Rng;
use rand_distr::Distribution;
use statrs::function::beta::{beta_reg, ln_beta};
use statrs::function::factorial::factorial;
use statrs::function::gamma::{gamma, gamma_lr};

use crate::error::{Error, Result};
use crate::gauss::{self, QuadratureRule};
use crate::param::SpecString;

/// Resolution of the tabulated inverse CDF used for Marchenko-Pastur sampling.
const MP_TABLE_POINTS: usize = 10_000;

#[derive(Debug, Clone, PartialEq)]
pub enum SpectralDistribution {
    /// Density proportional to `lambda^xi (scale - lambda)^tau` on `[0, scale]`.
    Beta { tau: f64, xi: f64, scale: f64 },
    /// Limiting spectrum of `X X^T` for a `d x n` matrix with variance `sigma2 / n`
    /// entries and `ratio = d / n <= 1`.
    MarchenkoPastur { ratio: f64, sigma2: f64 },
    /// Density `lambda^alpha e^{-lambda} / Gamma(alpha + 1)` on `[0, inf)`.
    Gamma { alpha: f64 },
    /// Uniform mass on a sorted list of eigenvalues.
    Empirical { eigenvalues: Vec<f64> },
}

impl SpectralDistribution {
    pub fn beta(tau: f64, xi: f64, scale: f64) -> Result<Self> {
        let d = SpectralDistribution::Beta { tau, xi, scale };
        d.validate()?;
        Ok(d)
    }

    pub fn marchenko_pastur(ratio: f64, sigma2: f64) -> Result<Self> {
        let d = SpectralDistribution::MarchenkoPastur { ratio, sigma2 };
        d.validate()?;
        Ok(d)
    }

    pub fn gamma(alpha: f64) -> Result<Self> {
        let d = SpectralDistribution::Gamma { alpha };
        d.validate()?;
        Ok(d)
    }

    pub fn empirical(mut eigenvalues: Vec<f64>) -> Result<Self> {
        eigenvalues.sort_by(f64::total_cmp);
        let d = SpectralDistribution::Empirical { eigenvalues };
        d.validate()?;
        Ok(d)
    }

    /// Reads one eigenvalue per line; blank lines and `#` comments are skipped.
    pub fn load_empirical(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut values = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let v: f64 = line.parse().map_err(|_| {
                Error::Parse(format!(
                    "{}:{}: not a number: {line:?}",
                    path.display(),
                    i + 1
                ))
            })?;
            values.push(v);
        }
        Self::empirical(values)
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            SpectralDistribution::Beta { tau, xi, scale } => {
                if !(tau > -1.0 && xi > -1.0) {
                    return Err(Error::invalid(format!(
                        "Beta exponents must exceed -1, got tau={tau}, xi={xi}"
                    )));
                }
                if !(scale > 0.0 && scale.is_finite()) {
                    return Err(Error::invalid(format!(
                        "Beta scale must be positive, got {scale}"
                    )));
                }
            }
            SpectralDistribution::MarchenkoPastur { ratio, sigma2 } => {
                if !(ratio > 0.0 && ratio <= 1.0) {
                    return Err(Error::invalid(format!(
                        "Marchenko-Pastur ratio must lie in (0, 1], got {ratio} \
                         (the atom at zero for ratio > 1 is not modelled)"
                    )));
                }
                if !(sigma2 > 0.0 && sigma2.is_finite()) {
                    return Err(Error::invalid(format!(
                        "sigma2 must be positive, got {sigma2}"
                    )));
                }
            }
            SpectralDistribution::Gamma { alpha } => {
                if !(alpha > -1.0 && alpha.is_finite()) {
                    return Err(Error::invalid(format!(
                        "Gamma alpha must exceed -1, got {alpha}"
                    )));
                }
            }
            SpectralDistribution::Empirical { ref eigenvalues } => {
                if eigenvalues.is_empty() {
                    return Err(Error::invalid("empirical spectrum is empty"));
                }
                if let Some(v) = eigenvalues.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
                    return Err(Error::invalid(format!(
                        "empirical eigenvalues must be finite and nonnegative, got {v}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Right and left edge exponents `(tau, xi)` of the density, where defined.
    pub fn edge_exponents(&self) -> Option<(f64, f64)> {
        match *self {
            SpectralDistribution::Beta { tau, xi, .. } => Some((tau, xi)),
            SpectralDistribution::MarchenkoPastur { ratio: 1.0, .. } => Some((0.5, -0.5)),
            SpectralDistribution::MarchenkoPastur { .. } => Some((0.5, 0.5)),
            _ => None,
        }
    }

    pub fn support(&self) -> (f64, f64) {
        match self {
            SpectralDistribution::Beta { scale, .. } => (0.0, *scale),
            SpectralDistribution::MarchenkoPastur { ratio, sigma2 } => mp_edges(*ratio, *sigma2),
            SpectralDistribution::Gamma { .. } => (0.0, f64::INFINITY),
            SpectralDistribution::Empirical { eigenvalues } => {
                (eigenvalues[0], eigenvalues[eigenvalues.len() - 1])
            }
        }
    }

    /// Normalized density. Returns `+inf` at an edge where the density blows up.
    pub fn density(&self, lambda: f64) -> Result<f64> {
        if !lambda.is_finite() {
            return Err(Error::invalid(format!("density evaluated at {lambda}")));
        }
        let value = match *self {
            SpectralDistribution::Beta { tau, xi, scale } => {
                if !(0.0..=scale).contains(&lambda) {
                    return Ok(0.0);
                }
                let norm = ((tau + xi + 1.0) * scale.ln() + ln_beta(xi + 1.0, tau + 1.0)).exp();
                lambda.powf(xi) * (scale - lambda).powf(tau) / norm
            }
            SpectralDistribution::MarchenkoPastur { ratio, sigma2 } => {
                let (lo, hi) = mp_edges(ratio, sigma2);
                if !(lo..=hi).contains(&lambda) {
                    return Ok(0.0);
                }
                if lambda == 0.0 {
                    return Ok(f64::INFINITY);
                }
                ((hi - lambda) * (lambda - lo)).sqrt() / (2.0 * PI * sigma2 * ratio * lambda)
            }
            SpectralDistribution::Gamma { alpha } => {
                if lambda < 0.0 {
                    return Ok(0.0);
                }
                lambda.powf(alpha) * (-lambda).exp() / gamma_function(alpha + 1.0)
            }
            SpectralDistribution::Empirical { .. } => {
                return Err(Error::Unsupported(
                    "an empirical spectrum has no density".into(),
                ))
            }
        };
        Ok(value)
    }

    /// Cumulative distribution function.
    pub fn cdf(&self, lambda: f64) -> Result<f64> {
        if lambda.is_nan() {
            return Err(Error::invalid("cdf evaluated at NaN"));
        }
        let (lo, hi) = self.support();
        if lambda < lo {
            return Ok(0.0);
        }
        if lambda >= hi {
            return Ok(1.0);
        }
        Ok(match self {
            SpectralDistribution::Beta { tau, xi, scale } => {
                beta_reg(xi + 1.0, tau + 1.0, lambda / scale)
            }
            SpectralDistribution::MarchenkoPastur { ratio, sigma2 } => {
                MpTable::new(*ratio, *sigma2).cdf(lambda)
            }
            SpectralDistribution::Gamma { alpha } => gamma_lr(alpha + 1.0, lambda),
            SpectralDistribution::Empirical { eigenvalues } => {
                let below = eigenvalues.partition_point(|v| *v <= lambda);
                below as f64 / eigenvalues.len() as f64
            }
        })
    }

    /// Draws `d` independent eigenvalues. An empirical spectrum returns its stored
    /// list, which must have exactly `d` entries.
    pub fn sample_eigenvalues<R: Rng + ?Sized>(&self, d: usize, rng: &mut R) -> Result<Vec<f64>> {
        if d == 0 {
            return Err(Error::invalid("cannot sample zero eigenvalues"));
        }
        match *self {
            SpectralDistribution::Beta { tau, xi, scale } => {
                let law = rand_distr::Beta::new(xi + 1.0, tau + 1.0)
                    .map_err(|e| Error::invalid(format!("Beta sampler: {e}")))?;
                Ok((0..d).map(|_| scale * law.sample(rng)).collect())
            }
            SpectralDistribution::Gamma { alpha } => {
                let law = rand_distr::Gamma::new(alpha + 1.0, 1.0)
                    .map_err(|e| Error::invalid(format!("Gamma sampler: {e}")))?;
                Ok((0..d).map(|_| law.sample(rng)).collect())
            }
            SpectralDistribution::MarchenkoPastur { ratio, sigma2 } => {
                let table = MpTable::new(ratio, sigma2);
                Ok((0..d).map(|_| table.inverse(rng.random::<f64>())).collect())
            }
            SpectralDistribution::Empirical { ref eigenvalues } => {
                if eigenvalues.len() != d {
                    return Err(Error::invalid(format!(
                        "empirical spectrum has {} eigenvalues, requested {d}",
                        eigenvalues.len()
                    )));
                }
                Ok(eigenvalues.clone())
            }
        }
    }

    /// Gauss rule for the distribution: `sum w_i g(x_i)` approximates `E g(lambda)`.
    ///
    /// Beta uses Gauss-Jacobi with the edge exponents absorbed into the weights.
    /// Marchenko-Pastur is a Jacobi(1/2, -1/2) weight on its support times the
    /// smooth factor `1 - lambda_minus / lambda`. Gamma uses generalized
    /// Gauss-Laguerre over the whole half-line.
    pub fn quadrature_nodes(&self, n_nodes: usize) -> Result<QuadratureRule> {
        if n_nodes < 2 {
            return Err(Error::invalid(format!(
                "need at least 2 quadrature nodes, got {n_nodes}"
            )));
        }
        match *self {
            SpectralDistribution::Beta { tau, xi, scale } => {
                Ok((*gauss::gauss_jacobi(n_nodes, tau, xi, 0.0, scale)?).clone())
            }
            SpectralDistribution::MarchenkoPastur { ratio, sigma2 } => {
                let (lo, hi) = mp_edges(ratio, sigma2);
                let base = gauss::gauss_jacobi(n_nodes, 0.5, -0.5, lo, hi)?;
                let mut weights: Vec<f64> = base
                    .nodes
                    .iter()
                    .zip(&base.weights)
                    .map(|(&x, &w)| w * (1.0 - lo / x))
                    .collect();
                let total: f64 = weights.iter().sum();
                weights.iter_mut().for_each(|w| *w /= total);
                Ok(QuadratureRule::from_log_weights(
                    base.nodes.clone(),
                    weights.iter().map(|w| w.ln()).collect(),
                ))
            }
            SpectralDistribution::Gamma { alpha } => {
                Ok((*gauss::gauss_laguerre(n_nodes, alpha)?).clone())
            }
            SpectralDistribution::Empirical { .. } => Err(Error::Unsupported(
                "quadrature over an empirical spectrum; average over its eigenvalues instead"
                    .into(),
            )),
        }
    }
}

impl fmt::Display for SpectralDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SpectralDistribution::Beta { tau, xi, scale } => {
                write!(f, "beta:tau={tau},xi={xi},L={scale}")
            }
            SpectralDistribution::MarchenkoPastur { ratio, sigma2 } => {
                write!(f, "mp:r={ratio},sigma2={sigma2}")
            }
            SpectralDistribution::Gamma { alpha } => write!(f, "gamma:alpha={alpha}"),
            SpectralDistribution::Empirical { eigenvalues } => {
                write!(f, "empirical:d={}", eigenvalues.len())
            }
        }
    }
}

impl FromStr for SpectralDistribution {
    type Err = Error;

    /// `beta:tau=1/2,xi=-1/2[,L=1]`, `mp[:r=1][,sigma2=1]`, `gamma:alpha=0`,
    /// or `empirical:path=eigs.txt`.
    fn from_str(s: &str) -> Result<Self> {
        let spec = SpecString::parse(s)?;
        let get = |key: &str, default: Option<f64>| -> Result<f64> {
            match spec.param(key)? {
                Some(p) => Ok(p.value()),
                None => default
                    .ok_or_else(|| Error::Parse(format!("{:?} requires key {key:?}", spec.name))),
            }
        };
        match spec.name.as_str() {
            "beta" => {
                spec.only(&["tau", "xi", "L"])?;
                Self::beta(get("tau", None)?, get("xi", None)?, get("L", Some(1.0))?)
            }
            "mp" | "marchenko-pastur" => {
                spec.only(&["r", "sigma2"])?;
                Self::marchenko_pastur(get("r", Some(1.0))?, get("sigma2", Some(1.0))?)
            }
            "gamma" => {
                spec.only(&["alpha"])?;
                Self::gamma(get("alpha", None)?)
            }
            "empirical" => {
                spec.only(&["path"])?;
                let path = spec
                    .raw("path")
                    .ok_or_else(|| Error::Parse("empirical requires key \"path\"".into()))?;
                Self::load_empirical(path)
            }
            other => Err(Error::Parse(format!("unknown distribution {other:?}"))),
        }
    }
}

/// Gamma function, exact on small positive integers.
fn gamma_function(x: f64) -> f64 {
    if x.fract() == 0.0 && (1.0..=171.0).contains(&x) {
        factorial(x as u64 - 1)
    } else {
        gamma(x)
    }
}

fn mp_edges(ratio: f64, sigma2: f64) -> (f64, f64) {
    let root = ratio.sqrt();
    (
        sigma2 * (1.0 - root).powi(2).max(0.0),
        sigma2 * (1.0 + root).powi(2),
    )
}

/// Marchenko-Pastur CDF tabulated in the angle `theta`, where
/// `lambda = sigma2 ((1 - sqrt r)^2 + 4 sqrt r sin^2(theta / 2))`. The density in
/// `theta` is smooth, so Simpson cells on a uniform grid are accurate.
struct MpTable {
    ratio: f64,
    sigma2: f64,
    cdf: Vec<f64>,
}

impl MpTable {
    fn new(ratio: f64, sigma2: f64) -> Self {
        let density = |theta: f64| {
            let s = (0.5 * theta).sin();
            let c = (0.5 * theta).cos();
            let root = ratio.sqrt();
            let scaled = (1.0 - root).powi(2) + 4.0 * root * s * s;
            if scaled == 0.0 {
                // ratio = 1 at theta = 0: the sin^2 factors cancel.
                2.0 * c * c / PI
            } else {
                // h^2 sin^2(theta) / (2 pi sigma2 r lambda) with h = 2 sigma2 sqrt r.
                8.0 * s * s * c * c / (PI * scaled)
            }
        };
        let h = PI / MP_TABLE_POINTS as f64;
        let mut cdf = Vec::with_capacity(MP_TABLE_POINTS + 1);
        cdf.push(0.0);
        let mut acc = 0.0;
        for k in 0..MP_TABLE_POINTS {
            let a = k as f64 * h;
            acc += h / 6.0 * (density(a) + 4.0 * density(a + 0.5 * h) + density(a + h));
            cdf.push(acc);
        }
        let total = acc;
        cdf.iter_mut().for_each(|v| *v /= total);
        MpTable { ratio, sigma2, cdf }
    }

    fn lambda(&self, theta: f64) -> f64 {
        let root = self.ratio.sqrt();
        let s = (0.5 * theta).sin();
        self.sigma2 * ((1.0 - root).powi(2) + 4.0 * root * s * s)
    }

    fn theta(&self, lambda: f64) -> f64 {
        let root = self.ratio.sqrt();
        let s2 = ((lambda / self.sigma2 - (1.0 - root).powi(2)) / (4.0 * root)).clamp(0.0, 1.0);
        2.0 * s2.sqrt().asin()
    }

    fn cdf(&self, lambda: f64) -> f64 {
        let pos = self.theta(lambda) / PI * MP_TABLE_POINTS as f64;
        let k = (pos.floor() as usize).min(MP_TABLE_POINTS - 1);
        let frac = pos - k as f64;
        self.cdf[k] + frac * (self.cdf[k + 1] - self.cdf[k])
    }

    fn inverse(&self, u: f64) -> f64 {
        let k = self
            .cdf
            .partition_point(|v| *v <= u)
            .clamp(1, MP_TABLE_POINTS)
            - 1;
        let (a, b) = (self.cdf[k], self.cdf[k + 1]);
        let frac = if b > a { (u - a) / (b - a) } else { 0.0 };
        let theta = (k as f64 + frac) * PI / MP_TABLE_POINTS as f64;
        self.lambda(theta)
    }
}
