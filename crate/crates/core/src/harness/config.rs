//! Experiment configuration files and method specifications.

use std::collections::HashSet;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::param::{Param, SpecString};
use crate::polynomials::Method;
use crate::spectra::SpectralDistribution;

/// One experiment suite, read from TOML. Unknown keys are rejected.
///
/// ```toml
/// iterations = 1000
/// seeds = [0, 1, 2, 3, 4, 5, 6, 7]
/// methods = ["gcm:alpha=1/2,beta=5/2", "nesterov", "gd"]
///
/// [output]
/// dir = "results"
///
/// [[problems]]
/// name = "beta"
/// generator = "spectrum"
/// distribution = "beta:tau=1/2,xi=1/2"
/// dimension = 4000
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub iterations: usize,
    /// Run indices; each selects an independent stream of `master_seed`.
    pub seeds: Vec<u64>,
    #[serde(default)]
    pub master_seed: u64,
    /// Thread count; 0 uses every available core.
    #[serde(default)]
    pub workers: usize,
    pub methods: Vec<String>,
    #[serde(default)]
    pub fit: FitOptions,
    pub output: OutputOptions,
    pub problems: Vec<ProblemConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitOptions {
    #[serde(default = "default_window")]
    pub window: usize,
    /// Metric the slopes are fitted on: 0 distance, 1 function gap, 2 gradient.
    #[serde(default = "default_objective")]
    pub objective: u32,
    /// Add a `log log t` regressor. When absent it is used exactly for methods
    /// whose predicted rate carries a log factor.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub include_log: Option<bool>,
}

fn default_window() -> usize {
    crate::rates::DEFAULT_FIT_WINDOW
}

fn default_objective() -> u32 {
    1
}

impl Default for FitOptions {
    fn default() -> Self {
        FitOptions {
            window: default_window(),
            objective: default_objective(),
            include_log: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputOptions {
    pub dir: PathBuf,
    /// Per-iteration geometric mean and log spread across seeds.
    #[serde(default = "yes")]
    pub aggregates: bool,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Generator {
    /// Sampled eigenvalues with Haar eigenvectors.
    Spectrum,
    /// `H = X X^T` with Gaussian `X`.
    Gram,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemConfig {
    pub name: String,
    pub generator: Generator,
    /// Spectrum to sample from; required for `spectrum`, unused for `gram`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distribution: Option<String>,
    pub dimension: usize,
    /// Columns of `X` (gram only), defaults to the dimension.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<usize>,
    /// Entry variance scale (gram only).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma2: Option<f64>,
}

impl ProblemConfig {
    pub fn samples(&self) -> usize {
        self.samples.unwrap_or(self.dimension)
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2.unwrap_or(1.0)
    }

    /// The distribution the spectrum follows as the dimension grows.
    pub fn limit_distribution(&self) -> Result<SpectralDistribution> {
        match self.generator {
            Generator::Spectrum => self
                .distribution
                .as_deref()
                .ok_or_else(|| {
                    Error::Config(format!(
                        "problem {:?}: spectrum generator needs a distribution",
                        self.name
                    ))
                })?
                .parse(),
            Generator::Gram => SpectralDistribution::marchenko_pastur(
                self.dimension as f64 / self.samples() as f64,
                self.sigma2(),
            ),
        }
    }

    fn validate(&self) -> Result<()> {
        let err = |msg: String| Err(Error::Config(format!("problem {:?}: {msg}", self.name)));
        if self.name.is_empty()
            || !self
                .name
                .chars()
                .all(|c| c.is_ascii_alphanumeric() || c == '-' || c == '_')
        {
            return err("name must be nonempty and use only letters, digits, '-' and '_'".into());
        }
        if self.dimension == 0 {
            return err("dimension must be at least 1".into());
        }
        match self.generator {
            Generator::Spectrum => {
                if self.samples.is_some() || self.sigma2.is_some() {
                    return err("samples and sigma2 only apply to the gram generator".into());
                }
                let dist = self.limit_distribution()?;
                if let SpectralDistribution::Empirical { eigenvalues } = &dist {
                    if eigenvalues.len() != self.dimension {
                        return err(format!(
                            "empirical spectrum has {} eigenvalues but dimension is {}",
                            eigenvalues.len(),
                            self.dimension
                        ));
                    }
                }
            }
            Generator::Gram => {
                if self.distribution.is_some() {
                    return err(
                        "the gram generator takes samples and sigma2, not a distribution".into(),
                    );
                }
                if self.samples() < self.dimension {
                    return err(format!(
                        "samples ({}) must be at least the dimension ({})",
                        self.samples(),
                        self.dimension
                    ));
                }
                self.limit_distribution()?;
            }
        }
        Ok(())
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig =
            toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        // An unreadable config is a usage problem, not a runtime failure.
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(Error::Config("iterations must be at least 1".into()));
        }
        if self.seeds.is_empty() {
            return Err(Error::Config("at least one seed is required".into()));
        }
        let mut seen = HashSet::new();
        if let Some(s) = self.seeds.iter().find(|s| !seen.insert(**s)) {
            return Err(Error::Config(format!("duplicate seed {s}")));
        }
        if self.seeds.iter().any(|&s| s >= 1 << 32) {
            return Err(Error::Config("seeds must be below 2^32".into()));
        }
        if self.fit.window < 3 {
            return Err(Error::Config("fit window must be at least 3".into()));
        }
        if self.fit.objective > 2 {
            return Err(Error::Config(format!(
                "objective must be 0, 1 or 2, got {}",
                self.fit.objective
            )));
        }
        if self.methods.is_empty() {
            return Err(Error::Config("at least one method is required".into()));
        }
        if self.problems.is_empty() {
            return Err(Error::Config("at least one problem is required".into()));
        }
        let mut labels = HashSet::new();
        for m in &self.methods {
            let spec: MethodSpec = m
                .parse()
                .map_err(|e: Error| Error::Config(format!("method {m:?}: {e}")))?;
            if !labels.insert(spec.slug()) {
                return Err(Error::Config(format!("method {m:?} is listed twice")));
            }
        }
        let mut names = HashSet::new();
        for p in &self.problems {
            p.validate()?;
            if !names.insert(p.name.as_str()) {
                return Err(Error::Config(format!(
                    "problem name {:?} is used twice",
                    p.name
                )));
            }
        }
        Ok(())
    }

    pub fn method_specs(&self) -> Result<Vec<MethodSpec>> {
        self.methods.iter().map(|m| m.parse()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum MethodKind {
    Gcm { alpha: Param, beta: Param },
    Laguerre { alpha: Param },
    Nesterov,
    Gd,
}

/// A method whose step-size scale may be left to the problem.
///
/// Syntax: `gcm:alpha=1/2,beta=3/2`, `laguerre:alpha=2`, `nesterov`, `gd`.
/// The first three accept `L=<value>` to fix the scale, otherwise it is taken
/// from the problem, and `L_scale=<factor>` to overestimate it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MethodSpec {
    pub kind: MethodKind,
    pub lipschitz: Option<f64>,
    pub lipschitz_scale: f64,
}

impl MethodSpec {
    pub fn name(&self) -> &'static str {
        match self.kind {
            MethodKind::Gcm { .. } => "gcm",
            MethodKind::Laguerre { .. } => "laguerre",
            MethodKind::Nesterov => "nesterov",
            MethodKind::Gd => "gd",
        }
    }

    /// The scale actually used, given the problem's own scale.
    pub fn lipschitz_for(&self, default: f64) -> f64 {
        self.lipschitz.unwrap_or(default) * self.lipschitz_scale
    }

    pub fn resolve(&self, default_lipschitz: f64) -> Result<Method> {
        let lipschitz = self.lipschitz_for(default_lipschitz);
        let method = match self.kind {
            MethodKind::Gcm { alpha, beta } => Method::Gcm {
                alpha: alpha.value(),
                beta: beta.value(),
                lipschitz,
            },
            MethodKind::Laguerre { alpha } => Method::Laguerre {
                alpha: alpha.value(),
            },
            MethodKind::Nesterov => Method::Nesterov { lipschitz },
            MethodKind::Gd => Method::Gd { lipschitz },
        };
        method.validate()?;
        Ok(method)
    }

    pub fn needs_lipschitz(&self) -> bool {
        !matches!(self.kind, MethodKind::Laguerre { .. })
    }

    /// File-name friendly form of the label.
    pub fn slug(&self) -> String {
        self.to_string()
            .chars()
            .map(|c| match c {
                'a'..='z' | 'A'..='Z' | '0'..='9' | '.' | '-' => c,
                '/' => 'o',
                _ => '_',
            })
            .collect()
    }
}

impl FromStr for MethodSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let spec = SpecString::parse(s)?;
        let kind = match spec.name.as_str() {
            "gcm" => {
                spec.only(&["alpha", "beta", "L", "L_scale"])?;
                MethodKind::Gcm {
                    alpha: spec.require("alpha")?,
                    beta: spec.require("beta")?,
                }
            }
            "laguerre" => {
                spec.only(&["alpha"])?;
                MethodKind::Laguerre {
                    alpha: spec.require("alpha")?,
                }
            }
            "nesterov" => {
                spec.only(&["L", "L_scale"])?;
                MethodKind::Nesterov
            }
            "gd" => {
                spec.only(&["L", "L_scale"])?;
                MethodKind::Gd
            }
            other => {
                return Err(Error::Parse(format!(
                    "unknown method {other:?} (expected gcm, laguerre, nesterov or gd)"
                )))
            }
        };
        let lipschitz = spec.param("L")?.map(Param::value);
        let lipschitz_scale = spec.param("L_scale")?.map_or(1.0, Param::value);
        if let Some(l) = lipschitz {
            if l.is_nan() || l <= 0.0 {
                return Err(Error::Parse(format!("L must be positive, got {l}")));
            }
        }
        if lipschitz_scale.is_nan() || lipschitz_scale <= 0.0 {
            return Err(Error::Parse(format!(
                "L_scale must be positive, got {lipschitz_scale}"
            )));
        }
        let out = MethodSpec {
            kind,
            lipschitz,
            lipschitz_scale,
        };
        // Catch out-of-range shape parameters at parse time.
        out.resolve(1.0)?;
        Ok(out)
    }
}

impl fmt::Display for MethodSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut fields = Vec::new();
        match self.kind {
            MethodKind::Gcm { alpha, beta } => {
                fields.push(format!("alpha={alpha}"));
                fields.push(format!("beta={beta}"));
            }
            MethodKind::Laguerre { alpha } => fields.push(format!("alpha={alpha}")),
            MethodKind::Nesterov | MethodKind::Gd => {}
        }
        if let Some(l) = self.lipschitz {
            fields.push(format!("L={l}"));
        }
        if self.lipschitz_scale != 1.0 {
            fields.push(format!("L_scale={}", self.lipschitz_scale));
        }
        if fields.is_empty() {
            write!(f, "{}", self.name())
        } else {
            write!(f, "{}:{}", self.name(), fields.join(","))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const SMALL: &str = r#"
iterations = 10
seeds = [0, 1]
methods = ["gcm:alpha=1/2,beta=3/2", "gd"]

[output]
dir = "out"

[[problems]]
name = "beta"
generator = "spectrum"
distribution = "beta:tau=1/2,xi=1/2"
dimension = 5
"#;

    #[test]
    fn parses_and_round_trips() {
        let c = ExperimentConfig::from_toml(SMALL).unwrap();
        assert_eq!(c.iterations, 10);
        assert_eq!(c.fit.window, 700);
        assert_eq!(c.fit.objective, 1);
        assert!(c.output.aggregates);
        assert_eq!(ExperimentConfig::from_toml(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn unknown_keys_are_errors() {
        let text = SMALL.replace("dimension = 5", "dimension = 5\ncolour = \"red\"");
        assert!(matches!(
            ExperimentConfig::from_toml(&text),
            Err(Error::Config(_))
        ));
        let text = SMALL.replace("iterations = 10", "iterations = 10\nthreads = 2");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn invalid_configs() {
        for (from, to) in [
            ("seeds = [0, 1]", "seeds = [1, 1]"),
            ("seeds = [0, 1]", "seeds = []"),
            ("iterations = 10", "iterations = 0"),
            ("dimension = 5", "dimension = 0"),
            ("\"gd\"]", "\"gd\", \"gd\"]"),
            ("\"gd\"]", "\"cg\"]"),
            ("beta=3/2", "beta=-1"),
            ("tau=1/2", "tau=-2"),
            ("generator = \"spectrum\"", "generator = \"gram\""),
        ] {
            let text = SMALL.replace(from, to);
            assert_ne!(text, SMALL);
            assert!(ExperimentConfig::from_toml(&text).is_err(), "{to}");
        }
    }

    #[test]
    fn gram_problems() {
        let text = SMALL.replace(
            "generator = \"spectrum\"\ndistribution = \"beta:tau=1/2,xi=1/2\"",
            "generator = \"gram\"\nsamples = 10",
        );
        let c = ExperimentConfig::from_toml(&text).unwrap();
        let dist = c.problems[0].limit_distribution().unwrap();
        assert_eq!(
            dist,
            SpectralDistribution::marchenko_pastur(0.5, 1.0).unwrap()
        );
        let text = text.replace("samples = 10", "samples = 3");
        assert!(ExperimentConfig::from_toml(&text).is_err());
    }

    #[test]
    fn method_specs() {
        let m: MethodSpec = "gcm:alpha=1/2,beta=0.5,L_scale=1.5".parse().unwrap();
        assert_eq!(m.to_string(), "gcm:alpha=1/2,beta=1/2,L_scale=1.5");
        assert_eq!(
            m.resolve(2.0).unwrap(),
            Method::Gcm {
                alpha: 0.5,
                beta: 0.5,
                lipschitz: 3.0
            }
        );
        let g: MethodSpec = "GD:L=4".parse().unwrap();
        assert_eq!(g.resolve(1.0).unwrap(), Method::Gd { lipschitz: 4.0 });
        assert_eq!(g.slug(), "gd_L_4");
        let l: MethodSpec = "laguerre:alpha=2".parse().unwrap();
        assert!(!l.needs_lipschitz());
        assert_eq!(l.resolve(7.0).unwrap(), Method::Laguerre { alpha: 2.0 });
        for bad in [
            "laguerre:alpha=2,L=1",
            "gcm:alpha=1",
            "gd:L=0",
            "nesterov:L_scale=-1",
            "laguerre:alpha=-1",
        ] {
            assert!(bad.parse::<MethodSpec>().is_err(), "{bad}");
        }
    }

    proptest::proptest! {
        #[test]
        fn method_specs_round_trip(
            kind in 0usize..4,
            a in -3i64..16,
            b in -3i64..16,
            lipschitz in proptest::option::of(0.1f64..10.0),
            scale in proptest::sample::select(vec![1.0, 1.5, 2.0]),
        ) {
            let kind = match kind {
                0 => MethodKind::Gcm { alpha: Param::ratio(a, 4), beta: Param::ratio(b, 4) },
                1 => MethodKind::Laguerre { alpha: Param::ratio(a + 4, 4) },
                2 => MethodKind::Nesterov,
                _ => MethodKind::Gd,
            };
            // Laguerre has no step-size scale.
            let scaled = !matches!(kind, MethodKind::Laguerre { .. });
            let spec = MethodSpec {
                kind,
                lipschitz: lipschitz.filter(|_| scaled),
                lipschitz_scale: if scaled { scale } else { 1.0 },
            };
            let parsed: MethodSpec = spec.to_string().parse().unwrap();
            proptest::prop_assert_eq!(parsed, spec);
        }
    }
}
