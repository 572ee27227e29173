//! Test-only oracles, independent of the library's implementation paths.
#![allow(dead_code)]

use fock_tomography::quadrature::integrate;

/// Physicists' Hermite polynomial by the three-term recurrence.
pub fn hermite(n: usize, x: f64) -> f64 {
    let (mut h0, mut h1) = (1.0, 2.0 * x);
    if n == 0 {
        return h0;
    }
    for k in 1..n {
        let h2 = 2.0 * x * h1 - 2.0 * k as f64 * h0;
        h0 = h1;
        h1 = h2;
    }
    h1
}

/// Marginal of the Fock state `|m⟩` with vacuum variance 1/4:
/// `√(2/π)·H_m(√2 X)²·exp(−2X²) / (2^m m!)`.
pub fn fock_marginal(m: usize, x: f64) -> f64 {
    let fact: f64 = (1..=m).map(|i| i as f64).product();
    let h = hermite(m, std::f64::consts::SQRT_2 * x);
    (2.0 / std::f64::consts::PI).sqrt() * h * h * (-2.0 * x * x).exp() / (2f64.powi(m as i32) * fact)
}

/// `π ∫ pr_m(X) f(X) dX` by adaptive quadrature, split at integer abscissae.
pub fn project_onto(m: usize, f: impl Fn(f64) -> f64) -> f64 {
    let mut total = 0.0;
    for k in -10..10 {
        total += integrate(|x| fock_marginal(m, x) * f(x), k as f64, (k + 1) as f64, 1e-14);
    }
    std::f64::consts::PI * total
}

/// Two-sided Kolmogorov–Smirnov statistic of a sample against a CDF.
pub fn ks_statistic(sample: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = sample.to_vec();
    xs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let n = xs.len() as f64;
    xs.iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max)
}

/// Asymptotic 1% critical value of the one-sample KS statistic.
pub fn ks_critical_1pct(n: usize) -> f64 {
    1.627_6 / (n as f64).sqrt()
}

pub fn mean_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}
