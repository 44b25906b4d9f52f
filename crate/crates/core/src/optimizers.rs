//! The four first-order methods, run as genuine iterate updates.
//!
//! Every method here is oblivious: its step coefficients are a function of the
//! iteration counter and the method parameters only, computed before the run by
//! [`schedule`]. Iterates live in the eigenbasis of `H`, where the gradient is
//! `lambda * e` coordinatewise, so a step costs O(d).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polynomials::{gcm_residual_recurrence, Method};
use crate::problems::{metrics_of, Metrics, Provenance, QuadraticProblem};

/// A run aborts once the function gap exceeds its initial value by this factor.
pub const DIVERGENCE_FACTOR: f64 = 1e12;

/// Agreement required between the closed-form GCM steps and the residual recurrence.
pub const GCM_COEFFICIENT_TOLERANCE: f64 = 1e-10;

/// Per-iteration metrics of one run; entry 0 is the starting point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub method: String,
    pub provenance: Provenance,
    pub fgap: Vec<f64>,
    pub gradsq: Vec<f64>,
    pub distsq: Vec<f64>,
}

impl Trajectory {
    fn new(method: &Method, provenance: Provenance, capacity: usize) -> Self {
        Trajectory {
            method: method.to_string(),
            provenance,
            fgap: Vec::with_capacity(capacity),
            gradsq: Vec::with_capacity(capacity),
            distsq: Vec::with_capacity(capacity),
        }
    }

    fn push(&mut self, m: Metrics) {
        self.fgap.push(m.fgap);
        self.gradsq.push(m.gradsq);
        self.distsq.push(m.distsq);
    }

    /// Number of recorded iterates, `T + 1`.
    pub fn len(&self) -> usize {
        self.fgap.len()
    }

    pub fn is_empty(&self) -> bool {
        self.fgap.is_empty()
    }

    pub fn iterations(&self) -> usize {
        self.len().saturating_sub(1)
    }

    /// CSV with `#` comment lines carrying the method and provenance, then
    /// `t,fgap,gradsq,distsq` rows with 17 significant digits.
    pub fn to_csv(&self) -> String {
        let p = &self.provenance;
        let mut out = format!(
            "# method={}\n# generator={}\n# parameters={}\n",
            self.method, p.generator, p.parameters
        );
        if let Some(seed) = p.seed {
            out.push_str(&format!("# seed={seed}\n"));
        }
        if let Some(index) = p.run_index {
            out.push_str(&format!("# run_index={index}\n"));
        }
        out.push_str("t,fgap,gradsq,distsq\n");
        for t in 0..self.len() {
            out.push_str(&format!(
                "{t},{:.16e},{:.16e},{:.16e}\n",
                self.fgap[t], self.gradsq[t], self.distsq[t]
            ));
        }
        out
    }

    /// Metric series by objective power: 0 distance, 1 function gap, 2 gradient.
    pub fn series(&self, objective: u32) -> Option<&[f64]> {
        match objective {
            0 => Some(&self.distsq),
            1 => Some(&self.fgap),
            2 => Some(&self.gradsq),
            _ => None,
        }
    }
}

/// Update `x_t = x_{t-1} + momentum (x_{t-1} - x_{t-2}) + step grad f(x_{t-1})`.
///
/// For Nesterov the pair is read differently: `momentum` extrapolates the
/// auxiliary sequence and `step` multiplies the gradient taken there.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Step {
    pub momentum: f64,
    pub step: f64,
}

/// Closed-form GCM step coefficients for `t = 1..=T`.
///
/// For `t >= 2` the shifted Jacobi triple of degree `t` on `[0, L]` is written
/// with `k = t - 1`:
///
/// ```text
/// constant = -2 (beta^2 + alpha beta + (2k+1)(alpha+beta) + 2k^2 + 2k)(2k+s+1) / (2 (k+1)(k+s+1)(2k+s))
/// slope    = (2k+s+1)(2k+s+2) / (L (k+1)(k+s+1))
/// lag      = -(k+alpha)(k+beta)(2k+s+2) / ((k+1)(k+s+1)(2k+s))
/// ```
///
/// with `s = alpha + beta`; degree 1 is `constant = -(beta+1)`, `slope = (s+2)/L`.
/// The normalization is `delta_t = 1 / (constant + lag delta_{t-1})`, `delta_0 = 0`,
/// giving `momentum = delta constant - 1` and `step = delta slope`.
pub fn gcm_steps(alpha: f64, beta: f64, lipschitz: f64, max_degree: usize) -> Result<Vec<Step>> {
    Method::Gcm {
        alpha,
        beta,
        lipschitz,
    }
    .validate()?;
    let s = alpha + beta;
    let mut steps = Vec::with_capacity(max_degree);
    let mut delta = 0.0;
    for t in 1..=max_degree {
        let (constant, slope, lag) = if t == 1 {
            (-(beta + 1.0), (s + 2.0) / lipschitz, 0.0)
        } else {
            let k = (t - 1) as f64;
            let denom = (k + 1.0) * (k + s + 1.0) * (2.0 * k + s);
            if denom == 0.0 {
                return Err(Error::SingularCoefficient { degree: t });
            }
            let constant = -2.0
                * (beta * beta + alpha * beta + (2.0 * k + 1.0) * s + 2.0 * k * k + 2.0 * k)
                * (2.0 * k + s + 1.0)
                / (2.0 * denom);
            let slope =
                (2.0 * k + s + 1.0) * (2.0 * k + s + 2.0) / (lipschitz * (k + 1.0) * (k + s + 1.0));
            let lag = -(k + alpha) * (k + beta) * (2.0 * k + s + 2.0) / denom;
            (constant, slope, lag)
        };
        let denom = constant + lag * delta;
        if denom == 0.0 {
            return Err(Error::Degenerate { degree: t });
        }
        delta = 1.0 / denom;
        steps.push(Step {
            momentum: delta * constant - 1.0,
            step: delta * slope,
        });
    }
    Ok(steps)
}

/// Checks GCM steps against the residual recurrence built from the raw Jacobi
/// coefficients by affine shift and ratio normalization.
pub fn validate_gcm_steps(steps: &[Step], alpha: f64, beta: f64, lipschitz: f64) -> Result<()> {
    let reference = gcm_residual_recurrence(alpha, beta, lipschitz, steps.len())?;
    for (i, (s, r)) in steps.iter().zip(&reference.terms).enumerate() {
        let want_momentum = r.constant - 1.0;
        let bad = |got: f64, want: f64| {
            (got - want).abs() > GCM_COEFFICIENT_TOLERANCE * want.abs().max(1.0)
        };
        if bad(s.momentum, want_momentum) || bad(s.step, r.slope) {
            return Err(Error::CoefficientMismatch {
                degree: i + 1,
                detail: format!(
                    "closed form gives (momentum {}, step {}), recurrence gives ({}, {})",
                    s.momentum, s.step, want_momentum, r.slope
                ),
            });
        }
    }
    Ok(())
}

/// Laguerre step at iteration `t`: momentum `(t-1)/(t+alpha)`, step `-1/(t+alpha)`.
pub fn laguerre_step(t: usize, alpha: f64) -> Step {
    let t = t as f64;
    Step {
        momentum: (t - 1.0) / (t + alpha),
        step: -1.0 / (t + alpha),
    }
}

pub fn gd_step(lipschitz: f64) -> Step {
    Step {
        momentum: 0.0,
        step: -1.0 / lipschitz,
    }
}

/// Extrapolation factor used after producing `x_{t+1}`: `t / (t + 3)`.
pub fn nesterov_momentum(t: usize) -> f64 {
    t as f64 / (t as f64 + 3.0)
}

/// Step coefficients for iterations `1..=T`; GCM steps are validated first.
pub fn schedule(method: Method, iterations: usize) -> Result<Vec<Step>> {
    method.validate()?;
    Ok(match method {
        Method::Gcm {
            alpha,
            beta,
            lipschitz,
        } => {
            let steps = gcm_steps(alpha, beta, lipschitz, iterations)?;
            validate_gcm_steps(&steps, alpha, beta, lipschitz)?;
            steps
        }
        Method::Laguerre { alpha } => (1..=iterations).map(|t| laguerre_step(t, alpha)).collect(),
        Method::Gd { lipschitz } => vec![gd_step(lipschitz); iterations],
        Method::Nesterov { lipschitz } => (0..iterations)
            .map(|t| Step {
                momentum: nesterov_momentum(t),
                step: -1.0 / lipschitz,
            })
            .collect(),
    })
}

/// Runs `method` for `iterations` steps, calling `observe(t, step, error)` with
/// the eigenbasis error `U^T (x_t - x*)` after each step (and once for `t = 0`
/// with `step = None`).
pub fn run_observed(
    problem: &QuadraticProblem,
    method: Method,
    iterations: usize,
    mut observe: impl FnMut(usize, Option<Step>, &[f64]),
) -> Result<Trajectory> {
    let steps = schedule(method, iterations)?;
    let lambda = problem.eigvals();
    let mut traj = Trajectory::new(&method, problem.provenance.clone(), iterations + 1);
    let mut cur = problem.initial_error().to_vec();
    let start = metrics_of(lambda, &cur);
    traj.push(start);
    observe(0, None, &cur);
    let limit = DIVERGENCE_FACTOR * start.fgap;
    let mut prev = cur.clone();
    let mut next = vec![0.0; cur.len()];
    let nesterov = matches!(method, Method::Nesterov { .. });
    // Nesterov's auxiliary sequence y, with y_0 = x_0.
    let mut aux = cur.clone();
    for (i, &step) in steps.iter().enumerate() {
        let t = i + 1;
        if nesterov {
            // x_t = y_{t-1} - grad f(y_{t-1}) / L,  y_t = x_t + m (x_t - x_{t-1}).
            for k in 0..cur.len() {
                next[k] = aux[k] + step.step * lambda[k] * aux[k];
                aux[k] = next[k] + step.momentum * (next[k] - cur[k]);
            }
        } else {
            for k in 0..cur.len() {
                next[k] =
                    cur[k] + step.momentum * (cur[k] - prev[k]) + step.step * lambda[k] * cur[k];
            }
        }
        std::mem::swap(&mut prev, &mut cur);
        std::mem::swap(&mut cur, &mut next);
        let m = metrics_of(lambda, &cur);
        let finite = m.fgap.is_finite() && m.gradsq.is_finite() && m.distsq.is_finite();
        if !finite || (start.fgap > 0.0 && m.fgap > limit) {
            return Err(Error::Diverged { last_finite: t - 1 });
        }
        traj.push(m);
        observe(t, Some(step), &cur);
    }
    Ok(traj)
}

pub fn run(problem: &QuadraticProblem, method: Method, iterations: usize) -> Result<Trajectory> {
    run_observed(problem, method, iterations, |_, _, _| {})
}

/// Eigenbasis errors `U^T (x_t - x*)` for `t = 0..=T`; meant for small problems.
pub fn iterates(
    problem: &QuadraticProblem,
    method: Method,
    iterations: usize,
) -> Result<Vec<Vec<f64>>> {
    let mut out = Vec::with_capacity(iterations + 1);
    run_observed(problem, method, iterations, |_, _, e| out.push(e.to_vec()))?;
    Ok(out)
}

pub fn run_gcm(
    problem: &QuadraticProblem,
    alpha: f64,
    beta: f64,
    lipschitz: f64,
    iterations: usize,
) -> Result<Trajectory> {
    run(
        problem,
        Method::Gcm {
            alpha,
            beta,
            lipschitz,
        },
        iterations,
    )
}

pub fn run_laguerre(
    problem: &QuadraticProblem,
    alpha: f64,
    iterations: usize,
) -> Result<Trajectory> {
    run(problem, Method::Laguerre { alpha }, iterations)
}

pub fn run_nesterov(
    problem: &QuadraticProblem,
    lipschitz: f64,
    iterations: usize,
) -> Result<Trajectory> {
    run(problem, Method::Nesterov { lipschitz }, iterations)
}

pub fn run_gd(problem: &QuadraticProblem, lipschitz: f64, iterations: usize) -> Result<Trajectory> {
    run(problem, Method::Gd { lipschitz }, iterations)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::polynomials::ResidualFamily;
    use crate::problems::spectrum_problem;
    use crate::rng::seeded;

    fn problem(eigs: Vec<f64>, seed: u64) -> QuadraticProblem {
        spectrum_problem(eigs, &mut seeded(seed)).unwrap()
    }

    #[test]
    fn gcm_steps_match_residual_recurrence() {
        let values = [-0.5, 0.5, 1.5, 2.5];
        for &a in &values {
            for &b in &values {
                let steps = gcm_steps(a, b, 1.7, 1000).unwrap();
                validate_gcm_steps(&steps, a, b, 1.7).unwrap();
            }
        }
    }

    #[test]
    fn mismatched_steps_are_rejected() {
        let mut steps = gcm_steps(0.5, 1.5, 1.0, 10).unwrap();
        steps[4].step *= 1.0 + 1e-6;
        assert!(matches!(
            validate_gcm_steps(&steps, 0.5, 1.5, 1.0),
            Err(Error::CoefficientMismatch { degree: 5, .. })
        ));
    }

    #[test]
    fn scalar_gcm_run_matches_polynomial() {
        let lip = 2.0;
        let p = problem(vec![lip], 1);
        let traj = run_gcm(&p, 0.5, 1.5, lip, 20).unwrap();
        assert!(traj.fgap[1] < traj.fgap[0]);
        let e = iterates(
            &p,
            Method::Gcm {
                alpha: 0.5,
                beta: 1.5,
                lipschitz: lip,
            },
            20,
        )
        .unwrap();
        let family = ResidualFamily::new(
            Method::Gcm {
                alpha: 0.5,
                beta: 1.5,
                lipschitz: lip,
            },
            20,
        )
        .unwrap();
        let rows = family.evaluate(&[lip]);
        for t in 0..=20 {
            let want = rows[t][0] * e[0][0];
            assert!((e[t][0] - want).abs() <= 1e-12 * e[0][0].abs());
        }
    }

    #[test]
    fn laguerre_first_step_is_gradient_step() {
        let p = problem(vec![0.5, 1.0, 3.0], 2);
        let alpha = 0.7;
        let e = iterates(&p, Method::Laguerre { alpha }, 1).unwrap();
        for k in 0..3 {
            let want = e[0][k] - p.eigvals()[k] * e[0][k] / (1.0 + alpha);
            assert!((e[1][k] - want).abs() < 1e-15);
        }
    }

    #[test]
    fn isotropic_problems_converge_in_one_step() {
        let lip = 1.5;
        let p = problem(vec![lip; 5], 3);
        for m in [
            Method::Gd { lipschitz: lip },
            Method::Nesterov { lipschitz: lip },
        ] {
            let traj = run(&p, m, 6).unwrap();
            assert!(traj.fgap[0] > 0.0);
            for t in 1..=6 {
                assert!(traj.fgap[t] < 1e-28 && traj.distsq[t] < 1e-28, "{m} t={t}");
            }
        }
    }

    #[test]
    fn trajectory_shape() {
        let p = problem(vec![0.1, 0.2, 0.9], 4);
        let traj = run_gd(&p, 1.0, 10).unwrap();
        assert_eq!(traj.len(), 11);
        assert_eq!(traj.iterations(), 10);
        assert_eq!(traj.gradsq.len(), 11);
        assert_eq!(
            traj.distsq[0],
            p.initial_error().iter().map(|v| v * v).sum::<f64>()
        );
        assert!(traj.fgap.iter().all(|v| v.is_finite() && *v >= 0.0));
        assert_eq!(traj.method, "gd:L=1");
        let csv = traj.to_csv();
        assert!(csv.starts_with("# method=gd:L=1\n# generator=spectrum\n"));
        let rows: Vec<&str> = csv.lines().filter(|l| !l.starts_with('#')).collect();
        assert_eq!(rows[0], "t,fgap,gradsq,distsq");
        assert_eq!(rows.len(), 12);
        let first: Vec<f64> = rows[1].split(',').map(|v| v.parse().unwrap()).collect();
        assert_eq!(
            first,
            vec![0.0, traj.fgap[0], traj.gradsq[0], traj.distsq[0]]
        );
    }

    #[test]
    fn divergence_is_reported() {
        let p = problem(vec![0.2, 1.0, 4.0], 5);
        // Step size 1/L with L far below the spectrum amplifies the top mode by 15 each step.
        match run_gd(&p, 0.25, 100) {
            Err(Error::Diverged { last_finite }) => assert!(last_finite > 0 && last_finite < 20),
            other => panic!("expected divergence, got {other:?}"),
        }
    }

    #[test]
    fn schedules_depend_only_on_parameters() {
        let a = problem(vec![0.1, 0.5, 1.0], 6);
        let b = problem(vec![0.01, 0.02, 0.03, 0.04], 7);
        for m in [
            Method::Gcm {
                alpha: 0.5,
                beta: 2.5,
                lipschitz: 1.0,
            },
            Method::Laguerre { alpha: 2.0 },
            Method::Nesterov { lipschitz: 1.0 },
            Method::Gd { lipschitz: 1.0 },
        ] {
            let mut seen_a = Vec::new();
            let mut seen_b = Vec::new();
            run_observed(&a, m, 30, |_, s, _| seen_a.push(s)).unwrap();
            run_observed(&b, m, 30, |_, s, _| seen_b.push(s)).unwrap();
            assert_eq!(seen_a, seen_b);
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        let p = problem(vec![1.0], 8);
        assert!(run_gcm(&p, -1.0, 0.0, 1.0, 3).is_err());
        assert!(run_laguerre(&p, -2.0, 3).is_err());
        assert!(run_gd(&p, 0.0, 3).is_err());
    }

    proptest::proptest! {
        #[test]
        fn iterates_follow_residual_polynomials(
            eigs in proptest::collection::vec(0.01f64..1.0, 1..8),
            which in 0usize..4,
            seed in 0u64..1000,
        ) {
            let p = problem(eigs, seed);
            let l = p.l_instance();
            let method = [
                Method::Gcm { alpha: 0.5, beta: 2.5, lipschitz: l },
                Method::Laguerre { alpha: 1.5 },
                Method::Nesterov { lipschitz: l },
                Method::Gd { lipschitz: l },
            ][which];
            let e = iterates(&p, method, 30).unwrap();
            let rows = ResidualFamily::new(method, 30).unwrap().evaluate(p.eigvals());
            let scale = e[0].iter().fold(0.0f64, |m, x| m.max(x.abs()));
            for t in 0..=30 {
                for k in 0..p.dim() {
                    proptest::prop_assert!((e[t][k] - rows[t][k] * e[0][k]).abs() <= 1e-10 * scale);
                }
            }
        }
    }
}
