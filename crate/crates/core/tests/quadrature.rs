//! Expected metrics by quadrature against closed forms and predicted slopes.

use avgrate::gauss::gauss_jacobi;
use avgrate::polynomials::{expected_metric, Method};
use avgrate::rates::{fit_slope, gd_beta_closed_form, laguerre_closed_form};
use avgrate::spectra::SpectralDistribution;
use statrs::function::beta::ln_beta;

fn beta(tau: f64, xi: f64) -> SpectralDistribution {
    SpectralDistribution::beta(tau, xi, 1.0).unwrap()
}

fn gcm(alpha: f64, beta: f64) -> Method {
    Method::Gcm {
        alpha,
        beta,
        lipschitz: 1.0,
    }
}

/// Slope over `t in [first, T]`, where `T = values.len() - 1`.
fn slope_from(values: &[f64], first: usize) -> f64 {
    fit_slope(values, values.len() - first, false)
        .unwrap()
        .slope
}

#[test]
fn gcm_slopes_on_beta_spectra() {
    let v = expected_metric(&beta(0.5, 0.5), gcm(0.5, 1.5), 1, 1000).unwrap();
    let s = slope_from(&v, 300);
    assert!((s + 4.0).abs() <= 0.15, "slope {s}");
    let v = expected_metric(&beta(0.5, -0.5), gcm(0.5, 2.5), 1, 1000).unwrap();
    let s = slope_from(&v, 300);
    assert!((s + 3.0).abs() <= 0.15, "slope {s}");
}

#[test]
fn gd_slope_on_beta_spectrum() {
    let v = expected_metric(&beta(0.5, -0.5), Method::Gd { lipschitz: 1.0 }, 1, 2000).unwrap();
    let fit = fit_slope(&v, 700, false).unwrap();
    assert_eq!(fit.window, (1301, 2000));
    assert!((fit.slope + 1.5).abs() <= 0.05, "slope {}", fit.slope);
}

#[test]
fn gd_expected_metric_matches_beta_integral() {
    // E (1-lambda)^{2t} lambda^l over the normalized density lambda^xi (1-lambda)^tau.
    for (tau, xi) in [(0.5, 0.5), (0.5, -0.5), (0.0, 0.0), (-0.5, 0.5)] {
        let dist = beta(tau, xi);
        for l in 0..=2u32 {
            let v = expected_metric(&dist, Method::Gd { lipschitz: 1.0 }, l, 100).unwrap();
            let norm = ln_beta(xi + 1.0, tau + 1.0).exp();
            let half = if l == 1 { 0.5 } else { 1.0 };
            for t in [0usize, 1, 7, 50, 100] {
                let want = half * gd_beta_closed_form(t, tau, xi, l) / norm;
                assert!(
                    (v[t] - want).abs() <= 1e-10 * want,
                    "tau={tau} xi={xi} l={l} t={t}: {} vs {want}",
                    v[t]
                );
            }
        }
    }
}

#[test]
fn gd_closed_form_against_direct_quadrature() {
    // Integral of (1-lambda)^{200+1/2} lambda^{1/2}: Gauss-Jacobi with the
    // non-integer parts as weight, exact for the polynomial part.
    let rule = gauss_jacobi(200, 0.5, 0.5, 0.0, 1.0).unwrap();
    let direct = rule.integrate(|x| (1.0 - x).powi(200)) * ln_beta(1.5, 1.5).exp();
    let closed = gd_beta_closed_form(100, 0.5, -0.5, 1);
    assert!(
        (direct - closed).abs() <= 1e-10 * closed,
        "{direct} vs {closed}"
    );
}

#[test]
fn laguerre_binomial_identity() {
    // Laguerre(a + 2) under Gamma(a + 1) integrates P_t^2 to 1 / C(t + a + 2, t).
    for a in [0.0, 1.0, 0.5] {
        let dist = SpectralDistribution::gamma(a + 1.0).unwrap();
        let v = expected_metric(&dist, Method::Laguerre { alpha: a + 2.0 }, 0, 50).unwrap();
        for (t, got) in v.iter().enumerate() {
            let want = laguerre_closed_form(t, a);
            assert!(
                (got - want).abs() <= 1e-8 * want,
                "a={a} t={t}: {got} vs {want}"
            );
        }
    }
    // Integer check: C(5, 3) = 10.
    assert!((laguerre_closed_form(3, 0.0) - 0.1).abs() < 1e-14);
}

#[test]
fn laguerre_function_gap_on_gamma_spectrum() {
    // The function gap under Gamma(a) is (a + 1) / 2 times the Gamma(a + 1) integral.
    let v = expected_metric(
        &SpectralDistribution::gamma(0.0).unwrap(),
        Method::Laguerre { alpha: 2.0 },
        1,
        200,
    )
    .unwrap();
    for (t, got) in v.iter().enumerate() {
        let want = 0.5 * laguerre_closed_form(t, 0.0);
        assert!((got - want).abs() <= 1e-8 * want);
    }
    let s = slope_from(&v, 100);
    assert!((s + 2.0).abs() < 0.05, "slope {s}");
}

#[test]
fn nesterov_slopes() {
    let v = expected_metric(
        &beta(0.5, 0.5),
        Method::Nesterov { lipschitz: 1.0 },
        1,
        2000,
    )
    .unwrap();
    let s = fit_slope(&v, 700, false).unwrap().slope;
    assert!((s + 4.0).abs() <= 0.1, "slope {s}");
    let mp = SpectralDistribution::marchenko_pastur(1.0, 1.0).unwrap();
    let v = expected_metric(&mp, Method::Nesterov { lipschitz: 4.0 }, 1, 2000).unwrap();
    let s = fit_slope(&v, 700, true).unwrap().slope;
    assert!((s + 3.0).abs() <= 0.15, "slope {s}");
}
