//! `compare`: empirical slopes against predicted exponents.

use std::fmt;

use serde::{Deserialize, Serialize};

use super::csv_field;
use super::exit;
use super::run::RunManifest;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Verdict {
    Pass,
    Fail,
    /// At least one seed diverged.
    Diverged,
    /// No slope could be fitted.
    NoSlope,
    /// No predicted rate applies to this problem and method.
    NoPrediction,
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Diverged => "diverged",
            Verdict::NoSlope => "no-slope",
            Verdict::NoPrediction => "no-prediction",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompareRow {
    pub problem: String,
    pub method: String,
    pub empirical: Option<f64>,
    pub spread: Option<f64>,
    pub predicted: Option<f64>,
    pub log_factor: bool,
    pub delta: Option<f64>,
    pub tolerance: f64,
    pub verdict: Verdict,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CompareReport {
    pub rows: Vec<CompareRow>,
}

impl CompareReport {
    /// 3 if any comparison failed, else 2 if any run diverged, else 0.
    pub fn exit_code(&self) -> i32 {
        if self.rows.iter().any(|r| r.verdict == Verdict::Fail) {
            exit::COMPARISON
        } else if self.rows.iter().any(|r| r.verdict == Verdict::Diverged) {
            exit::RUNTIME
        } else {
            exit::SUCCESS
        }
    }

    pub fn to_csv(&self) -> String {
        let opt = |v: Option<f64>| v.map_or(String::new(), |v| format!("{v:.6}"));
        let mut out = String::from(
            "problem,method,empirical,spread,predicted,log_factor,delta,tolerance,verdict\n",
        );
        for r in &self.rows {
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{}\n",
                csv_field(&r.problem),
                csv_field(&r.method),
                opt(r.empirical),
                opt(r.spread),
                opt(r.predicted),
                r.log_factor,
                opt(r.delta),
                r.tolerance,
                r.verdict
            ));
        }
        out
    }
}

/// Joins the mean fitted slope of every (problem, method) with its predicted
/// exponent. `log_tolerance` applies to predictions that carry a log factor.
pub fn compare(manifest: &RunManifest, tolerance: f64, log_tolerance: f64) -> CompareReport {
    let rows = manifest
        .summaries
        .iter()
        .map(|s| {
            let log_factor = s.predicted.as_ref().is_some_and(|p| p.log_factor);
            let tol = if log_factor { log_tolerance } else { tolerance };
            let predicted = s.predicted.as_ref().map(|p| p.exponent);
            let delta = s.slope_mean.zip(predicted).map(|(e, p)| e - p);
            let verdict = if s.diverged > 0 {
                Verdict::Diverged
            } else if s.slope_mean.is_none() {
                Verdict::NoSlope
            } else if predicted.is_none() {
                Verdict::NoPrediction
            } else if delta.is_some_and(|d| d.abs() <= tol) {
                Verdict::Pass
            } else {
                Verdict::Fail
            };
            CompareRow {
                problem: s.problem.clone(),
                method: s.method.clone(),
                empirical: if s.diverged > 0 { None } else { s.slope_mean },
                spread: s.slope_std,
                predicted,
                log_factor,
                delta: if s.diverged > 0 { None } else { delta },
                tolerance: tol,
                verdict,
            }
        })
        .collect();
    CompareReport { rows }
}
