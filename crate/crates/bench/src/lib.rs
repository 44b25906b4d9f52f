//! Fixtures shared by the benchmarks.

use avgrate::problems::{spectrum_problem, QuadraticProblem};
use avgrate::rng::seeded;
use avgrate::spectra::SpectralDistribution;

/// Problem with a Beta(1/2, 1/2) spectrum on [0, 1] and Haar eigenvectors.
pub fn beta_problem(dimension: usize, seed: u64) -> QuadraticProblem {
    let mut rng = seeded(seed);
    let eigs = SpectralDistribution::beta(0.5, 0.5, 1.0)
        .and_then(|d| d.sample_eigenvalues(dimension, &mut rng))
        .expect("valid spectrum");
    spectrum_problem(eigs, &mut rng).expect("valid problem")
}

pub fn beta_spectrum() -> SpectralDistribution {
    SpectralDistribution::beta(0.5, -0.5, 1.0).expect("valid spectrum")
}
