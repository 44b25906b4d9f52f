//! Random quadratic problems `f(x) = 1/2 (x - x*)^T H (x - x*)`, stored through
//! the eigendecomposition `H = U diag(lambda) U^T`.
//!
//! The optimum is always `x* = 0` and `x_0` is standard Gaussian, so the initial
//! error is isotropic with unit variance per coordinate.

use faer::{Col, Mat, Side};
use rand::Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How a problem was generated, recorded next to every trajectory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub generator: String,
    pub parameters: String,
    pub seed: Option<u64>,
    pub run_index: Option<u64>,
}

impl Provenance {
    pub fn new(generator: impl Into<String>, parameters: impl Into<String>) -> Self {
        Provenance {
            generator: generator.into(),
            parameters: parameters.into(),
            seed: None,
            run_index: None,
        }
    }

    pub fn with_stream(mut self, seed: u64, run_index: u64) -> Self {
        self.seed = Some(seed);
        self.run_index = Some(run_index);
        self
    }
}

/// The three convergence metrics at one point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// `f(x) - f(x*)`.
    pub fgap: f64,
    /// `||grad f(x)||^2`.
    pub gradsq: f64,
    /// `||x - x*||^2`.
    pub distsq: f64,
}

#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    eigvals: Vec<f64>,
    eigvecs: Mat<f64>,
    x_star: Vec<f64>,
    x0: Vec<f64>,
    /// `U^T (x_0 - x*)`, the initial error in the eigenbasis.
    initial_error: Vec<f64>,
    l_instance: f64,
    pub provenance: Provenance,
}

impl QuadraticProblem {
    /// Assembles a problem from its spectral data. `eigvecs` must be orthonormal;
    /// this is not re-checked here.
    pub fn from_eigendecomposition(
        eigvals: Vec<f64>,
        eigvecs: Mat<f64>,
        x0: Vec<f64>,
        provenance: Provenance,
    ) -> Result<Self> {
        let d = eigvals.len();
        if d == 0 {
            return Err(Error::invalid("problem dimension must be at least 1"));
        }
        if eigvecs.nrows() != d || eigvecs.ncols() != d || x0.len() != d {
            return Err(Error::invalid(format!(
                "dimension mismatch: {d} eigenvalues, {}x{} eigenvectors, x0 of length {}",
                eigvecs.nrows(),
                eigvecs.ncols(),
                x0.len()
            )));
        }
        if let Some(v) = eigvals.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::invalid(format!(
                "eigenvalues must be finite and nonnegative, got {v}"
            )));
        }
        let l_instance = eigvals.iter().cloned().fold(0.0, f64::max);
        let x_star = vec![0.0; d];
        let mut problem = QuadraticProblem {
            eigvals,
            eigvecs,
            x_star,
            x0,
            initial_error: Vec::new(),
            l_instance,
            provenance,
        };
        let diff: Vec<f64> = problem
            .x0
            .iter()
            .zip(&problem.x_star)
            .map(|(a, b)| a - b)
            .collect();
        problem.initial_error = problem.to_eigenbasis(&diff)?;
        Ok(problem)
    }

    pub fn dim(&self) -> usize {
        self.eigvals.len()
    }

    pub fn eigvals(&self) -> &[f64] {
        &self.eigvals
    }

    pub fn eigvecs(&self) -> &Mat<f64> {
        &self.eigvecs
    }

    pub fn x_star(&self) -> &[f64] {
        &self.x_star
    }

    pub fn x0(&self) -> &[f64] {
        &self.x0
    }

    pub fn initial_error(&self) -> &[f64] {
        &self.initial_error
    }

    /// Largest eigenvalue of this instance.
    pub fn l_instance(&self) -> f64 {
        self.l_instance
    }

    /// `U^T v`.
    pub fn to_eigenbasis(&self, v: &[f64]) -> Result<Vec<f64>> {
        self.check_len(v)?;
        let col = Col::from_fn(v.len(), |i| v[i]);
        let z = self.eigvecs.transpose() * &col;
        Ok(z.iter().copied().collect())
    }

    /// `U z`.
    pub fn from_eigenbasis(&self, z: &[f64]) -> Result<Vec<f64>> {
        self.check_len(z)?;
        let col = Col::from_fn(z.len(), |i| z[i]);
        let v = &self.eigvecs * &col;
        Ok(v.iter().copied().collect())
    }

    /// Dense `H`; intended for small instances and cross-checks.
    pub fn hessian(&self) -> Mat<f64> {
        let d = self.dim();
        let scaled = Mat::from_fn(d, d, |i, j| self.eigvecs[(i, j)] * self.eigvals[j]);
        &scaled * self.eigvecs.transpose()
    }

    pub fn metrics(&self, x: &[f64]) -> Result<Metrics> {
        self.check_len(x)?;
        let diff: Vec<f64> = x.iter().zip(&self.x_star).map(|(a, b)| a - b).collect();
        let z = self.to_eigenbasis(&diff)?;
        self.metrics_in_eigenbasis(&z)
    }

    /// Metrics of the error vector `z = U^T (x - x*)`; O(d).
    pub fn metrics_in_eigenbasis(&self, z: &[f64]) -> Result<Metrics> {
        self.check_len(z)?;
        Ok(metrics_of(&self.eigvals, z))
    }

    fn check_len(&self, v: &[f64]) -> Result<()> {
        if v.len() != self.dim() {
            return Err(Error::invalid(format!(
                "vector of length {} for a problem of dimension {}",
                v.len(),
                self.dim()
            )));
        }
        Ok(())
    }
}

pub(crate) fn metrics_of(eigvals: &[f64], z: &[f64]) -> Metrics {
    let mut m = Metrics {
        fgap: 0.0,
        gradsq: 0.0,
        distsq: 0.0,
    };
    for (&lam, &e) in eigvals.iter().zip(z) {
        let e2 = e * e;
        m.fgap += lam * e2;
        m.gradsq += lam * lam * e2;
        m.distsq += e2;
    }
    m.fgap *= 0.5;
    m
}

fn standard_normal_vec<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Vec<f64> {
    (0..d).map(|_| StandardNormal.sample(rng)).collect()
}

/// Gram problem `H = X X^T` with `X` a `d x n` matrix of i.i.d. `N(0, sigma2 / n)`
/// entries. Its spectrum approaches Marchenko-Pastur with ratio `d / n` and
/// right edge `sigma2 (1 + sqrt(d/n))^2`.
pub fn gram_problem<R: Rng + ?Sized>(
    n: usize,
    d: usize,
    sigma2: f64,
    rng: &mut R,
) -> Result<QuadraticProblem> {
    if n == 0 || d == 0 {
        return Err(Error::invalid(format!(
            "gram problem needs n, d >= 1, got n={n}, d={d}"
        )));
    }
    if !(sigma2 > 0.0 && sigma2.is_finite()) {
        return Err(Error::invalid(format!(
            "sigma2 must be positive, got {sigma2}"
        )));
    }
    let entry =
        Normal::new(0.0, (sigma2 / n as f64).sqrt()).map_err(|e| Error::invalid(e.to_string()))?;
    let x = Mat::from_fn(d, n, |_, _| entry.sample(rng));
    let h = &x * x.transpose();
    let evd = h
        .self_adjoint_eigen(Side::Lower)
        .map_err(|e| Error::Linalg(format!("eigendecomposition failed: {e:?}")))?;
    let eigvals: Vec<f64> = evd.S().column_vector().iter().map(|v| v.max(0.0)).collect();
    let eigvecs = evd.U().to_owned();
    let x0 = standard_normal_vec(d, rng);
    QuadraticProblem::from_eigendecomposition(
        eigvals,
        eigvecs,
        x0,
        Provenance::new("gram", format!("n={n},d={d},sigma2={sigma2}")),
    )
}

/// Haar-distributed orthogonal matrix: QR of a Gaussian matrix with the columns
/// of `Q` sign-corrected by the diagonal of `R`.
pub fn haar_orthogonal<R: Rng + ?Sized>(d: usize, rng: &mut R) -> Mat<f64> {
    let g = Mat::from_fn(d, d, |_, _| -> f64 { StandardNormal.sample(rng) });
    let qr = g.qr();
    let r = qr.R();
    let signs: Vec<f64> = (0..d)
        .map(|i| if r[(i, i)] < 0.0 { -1.0 } else { 1.0 })
        .collect();
    let q = qr.compute_Q();
    Mat::from_fn(d, d, |i, j| q[(i, j)] * signs[j])
}

/// Problem with prescribed spectrum and Haar-random eigenvectors.
pub fn spectrum_problem<R: Rng + ?Sized>(
    eigvals: Vec<f64>,
    rng: &mut R,
) -> Result<QuadraticProblem> {
    if eigvals.is_empty() {
        return Err(Error::invalid(
            "spectrum must contain at least one eigenvalue",
        ));
    }
    if let Some(v) = eigvals.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
        return Err(Error::invalid(format!(
            "eigenvalues must be finite and nonnegative, got {v}"
        )));
    }
    let d = eigvals.len();
    let u = haar_orthogonal(d, rng);
    let x0 = standard_normal_vec(d, rng);
    QuadraticProblem::from_eigendecomposition(
        eigvals,
        u,
        x0,
        Provenance::new("spectrum", format!("d={d}")),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::seeded;
    use proptest::prelude::*;
    use rand::Rng;

    fn orthonormality_error(u: &Mat<f64>) -> f64 {
        let g = u.transpose() * u;
        let d = u.nrows();
        let mut worst = 0.0f64;
        for i in 0..d {
            for j in 0..d {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g[(i, j)] - target).abs());
            }
        }
        worst
    }

    fn dense_metrics(p: &QuadraticProblem, x: &[f64]) -> Metrics {
        let h = p.hessian();
        let d = p.dim();
        let hx: Vec<f64> = (0..d)
            .map(|i| (0..d).map(|j| h[(i, j)] * x[j]).sum())
            .collect();
        Metrics {
            fgap: 0.5 * x.iter().zip(&hx).map(|(a, b)| a * b).sum::<f64>(),
            gradsq: hx.iter().map(|v| v * v).sum(),
            distsq: x.iter().map(|v| v * v).sum(),
        }
    }

    #[test]
    fn haar_matrix_is_orthonormal() {
        let u = haar_orthogonal(40, &mut seeded(1));
        assert!(orthonormality_error(&u) <= 1e-10);
    }

    #[test]
    fn isotropic_spectrum_gives_identity() {
        let p = spectrum_problem(vec![1.0; 3], &mut seeded(2)).unwrap();
        let h = p.hessian();
        for i in 0..3 {
            for j in 0..3 {
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((h[(i, j)] - want).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn scalar_gram_problem() {
        let p = gram_problem(1, 1, 1.0, &mut seeded(3)).unwrap();
        let h = p.hessian()[(0, 0)];
        assert!(h >= 0.0);
        let x0 = p.x0()[0];
        let m = p.metrics(p.x0()).unwrap();
        assert!((m.fgap - 0.5 * h * x0 * x0).abs() <= 1e-14 * m.fgap.max(1e-300));
        assert_eq!(p.l_instance(), h.max(p.eigvals()[0]));
    }

    #[test]
    fn metric_examples() {
        let p = spectrum_problem(vec![2.0; 4], &mut seeded(4)).unwrap();
        assert_eq!(
            p.metrics(p.x_star()).unwrap(),
            Metrics {
                fgap: 0.0,
                gradsq: 0.0,
                distsq: 0.0
            }
        );
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let m = p.metrics(&e1).unwrap();
        assert!((m.fgap - 1.0).abs() < 1e-14);
        assert!((m.gradsq - 4.0).abs() < 1e-14);
        assert!((m.distsq - 1.0).abs() < 1e-14);
        assert!(p.metrics(&[1.0]).is_err());
    }

    #[test]
    fn metrics_match_dense_evaluation() {
        let mut rng = seeded(5);
        let eigs: Vec<f64> = (0..10).map(|i| 0.1 + i as f64).collect();
        let p = spectrum_problem(eigs, &mut rng).unwrap();
        let x = standard_normal_vec(10, &mut rng);
        let (a, b) = (p.metrics(&x).unwrap(), dense_metrics(&p, &x));
        for (u, v) in [(a.fgap, b.fgap), (a.gradsq, b.gradsq), (a.distsq, b.distsq)] {
            assert!((u - v).abs() <= 1e-12 * v.abs());
        }
    }

    #[test]
    fn rejects_negative_eigenvalues() {
        assert!(spectrum_problem(vec![1.0, -0.1], &mut seeded(0)).is_err());
        assert!(spectrum_problem(vec![], &mut seeded(0)).is_err());
        assert!(gram_problem(0, 3, 1.0, &mut seeded(0)).is_err());
    }

    #[test]
    fn gram_eigendecomposition_reconstructs_h() {
        let mut rng = seeded(6);
        let p = gram_problem(12, 8, 2.0, &mut rng).unwrap();
        assert!(orthonormality_error(p.eigvecs()) < 1e-10);
        assert!(p.eigvals().iter().all(|v| *v >= 0.0));
        assert_eq!(
            p.l_instance(),
            p.eigvals().iter().cloned().fold(0.0, f64::max)
        );
        let z = p.to_eigenbasis(p.x0()).unwrap();
        let back = p.from_eigenbasis(&z).unwrap();
        for (a, b) in back.iter().zip(p.x0()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn rotational_invariance() {
        let mut rng = seeded(7);
        let d = 6;
        let eigs: Vec<f64> = (0..d).map(|i| 0.5 * i as f64 + 0.2).collect();
        let p = spectrum_problem(eigs.clone(), &mut rng).unwrap();
        // U V with V a permutation matrix: column j of U V is column perm[j] of U.
        let perm = [3, 0, 5, 1, 4, 2];
        let u = p.eigvecs();
        let uv = Mat::from_fn(d, d, |i, j| u[(i, perm[j])]);
        let eigs_perm: Vec<f64> = perm.iter().map(|&k| eigs[k]).collect();
        let q = QuadraticProblem::from_eigendecomposition(
            eigs_perm,
            uv,
            p.x0().to_vec(),
            p.provenance.clone(),
        )
        .unwrap();
        let x = standard_normal_vec(d, &mut rng);
        let (a, b) = (p.metrics(&x).unwrap(), q.metrics(&x).unwrap());
        assert!((a.fgap - b.fgap).abs() < 1e-12 * a.fgap);
        assert!((a.gradsq - b.gradsq).abs() < 1e-12 * a.gradsq);
        // A general rotation W of both the basis and the point also preserves metrics.
        let w = haar_orthogonal(d, &mut rng);
        let r = QuadraticProblem::from_eigendecomposition(
            eigs,
            u * &w,
            p.x0().to_vec(),
            p.provenance.clone(),
        )
        .unwrap();
        // Moving x by U W U^T carries the metrics of p over to r.
        let z = p.to_eigenbasis(&x).unwrap();
        let rotated = r.from_eigenbasis(&z).unwrap();
        let m = r.metrics(&rotated).unwrap();
        assert!((m.fgap - a.fgap).abs() < 1e-12 * a.fgap);
        assert!((m.distsq - a.distsq).abs() < 1e-12 * a.distsq);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn eigenvalue_sandwich(seed in 0u64..1000, d in 1usize..12) {
            let mut rng = seeded(seed);
            let eigs: Vec<f64> = (0..d).map(|_| rng.random_range(0.0..5.0)).collect();
            let p = spectrum_problem(eigs, &mut rng).unwrap();
            let x = standard_normal_vec(d, &mut rng);
            let m = p.metrics(&x).unwrap();
            let l = p.l_instance();
            let slack = 1e-12 * (1.0 + l * l * m.distsq);
            prop_assert!(m.gradsq <= l * 2.0 * m.fgap + slack);
            prop_assert!(l * 2.0 * m.fgap <= l * l * m.distsq + slack);
        }
    }
}
