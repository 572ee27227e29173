//! Fitting the efficiency of the vacuum/single-photon mixture.

use serde::{Deserialize, Serialize};

use super::histogram::{bin_samples, BinEdges};
use crate::error::{Error, Result};
use crate::quadrature::CompensatedSum;
use crate::simulator::open_unit;
use crate::states::EfficiencyMixtureState;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum EfficiencyMethod {
    /// Per-sample maximum likelihood.
    MaximumLikelihood,
    /// Least squares between the binned density and the model marginal.
    HistogramLeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum StderrMethod {
    /// Observed Fisher information (likelihood fit) or the multinomial
    /// sandwich variance (histogram fit).
    Analytic,
    Bootstrap {
        resamples: usize,
        seed: u64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyFitConfig {
    pub method: EfficiencyMethod,
    pub stderr: StderrMethod,
    pub min_samples: usize,
    /// Bin width for the histogram fit.
    pub bin_width: f64,
    /// Histogram fit covers `[−half_range, half_range)`.
    pub half_range: f64,
}

impl Default for EfficiencyFitConfig {
    fn default() -> Self {
        Self {
            method: EfficiencyMethod::MaximumLikelihood,
            stderr: StderrMethod::Analytic,
            min_samples: 1000,
            bin_width: 0.05,
            half_range: 4.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Boundary {
    Lower,
    Upper,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyFit {
    pub eta_hat: f64,
    pub eta_stderr: f64,
    /// Mean negative log-likelihood per sample, or the histogram sum of
    /// squares.
    pub objective: f64,
    pub method: EfficiencyMethod,
    /// Set when `η = 0` or `η = 1` lies within two standard errors of the
    /// estimate (always the case when the optimum sits on the boundary).
    pub boundary: Option<Boundary>,
    pub iterations: usize,
}

pub fn fit_efficiency(x: &[f64], config: &EfficiencyFitConfig) -> Result<EfficiencyFit> {
    if x.len() < config.min_samples.max(1) {
        return Err(Error::TooFewSamples {
            required: config.min_samples.max(1),
            got: x.len(),
        });
    }
    if x.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("samples contain non-finite values".into()));
    }
    let (eta_hat, analytic_se, objective, iterations) = match config.method {
        EfficiencyMethod::MaximumLikelihood => fit_mle(x)?,
        EfficiencyMethod::HistogramLeastSquares => fit_histogram(x, config)?,
    };
    let eta_stderr = match config.stderr {
        StderrMethod::Analytic => analytic_se,
        StderrMethod::Bootstrap { resamples, seed } => bootstrap_stderr(x, config, resamples, seed)?,
    };
    let boundary = if eta_hat - 2.0 * eta_stderr <= 0.0 {
        Some(Boundary::Lower)
    } else if eta_hat + 2.0 * eta_stderr >= 1.0 {
        Some(Boundary::Upper)
    } else {
        None
    };
    Ok(EfficiencyFit {
        eta_hat,
        eta_stderr,
        objective,
        method: config.method,
        boundary,
        iterations,
    })
}

/// Score `Σ (4x²−1)/(1−η+4ηx²)` and observed information, for the
/// log-likelihood `Σ ln(1 − η + 4ηx²)`.
fn score_and_information(x: &[f64], eta: f64) -> (f64, f64) {
    let mut score = CompensatedSum::default();
    let mut info = CompensatedSum::default();
    for &v in x {
        let d = 4.0 * v * v - 1.0;
        let m = 1.0 - eta + 4.0 * eta * v * v;
        score.add(d / m);
        info.add((d / m) * (d / m));
    }
    (score.value(), info.value())
}

fn neg_mean_log_likelihood(x: &[f64], eta: f64) -> f64 {
    let state = EfficiencyMixtureState::new(eta.clamp(0.0, 1.0)).unwrap_or(EfficiencyMixtureState::vacuum());
    -x.iter()
        .map(|&v| state.marginal_density(v).ln())
        .collect::<CompensatedSum>()
        .value()
        / x.len() as f64
}

/// The log-likelihood is concave in η, so the score is monotone and the
/// maximizer is found by safeguarded Newton on a shrinking bracket.
fn fit_mle(x: &[f64]) -> Result<(f64, f64, f64, usize)> {
    let finish = |eta: f64, iterations: usize| {
        let (_, info) = score_and_information(x, eta);
        let se = if info > 0.0 { 1.0 / info.sqrt() } else { f64::INFINITY };
        (eta, se, neg_mean_log_likelihood(x, eta), iterations)
    };
    let (s0, _) = score_and_information(x, 0.0);
    if s0 <= 0.0 {
        return Ok(finish(0.0, 0));
    }
    let (s1, _) = score_and_information(x, 1.0);
    if s1 >= 0.0 {
        return Ok(finish(1.0, 0));
    }
    let (mut lo, mut hi) = (0.0, 1.0);
    let mut eta = 0.5;
    for it in 1..=200 {
        let (s, info) = score_and_information(x, eta);
        if !s.is_finite() {
            return Err(Error::NonConvergence {
                iterations: it,
                diagnostics: format!("score is {s} at eta={eta}"),
            });
        }
        if s > 0.0 {
            lo = eta;
        } else {
            hi = eta;
        }
        let newton = eta + s / info;
        let next = if info > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        if (next - eta).abs() < 1e-13 || hi - lo < 1e-13 {
            return Ok(finish(next, it));
        }
        eta = next;
    }
    Err(Error::NonConvergence {
        iterations: 200,
        diagnostics: format!("bracket [{lo}, {hi}] did not close"),
    })
}

/// The model density is linear in η, `pr₀ + η(pr₁ − pr₀)`, so the
/// least-squares solution is closed form. Bin averages of the model come from
/// the CDFs.
fn fit_histogram(x: &[f64], config: &EfficiencyFitConfig) -> Result<(f64, f64, f64, usize)> {
    let hist = bin_samples(
        x,
        &BinEdges::Symmetric {
            half_range: config.half_range,
            width: config.bin_width,
        },
    )?;
    let n = x.len() as f64;
    let vac = EfficiencyMixtureState::vacuum();
    let one = EfficiencyMixtureState::single_photon();
    let mut base = Vec::with_capacity(hist.bin_count());
    let mut slope = Vec::with_capacity(hist.bin_count());
    let mut widths = Vec::with_capacity(hist.bin_count());
    for w in hist.bin_edges.windows(2) {
        let width = w[1] - w[0];
        let p0 = (vac.marginal_cdf(w[1]) - vac.marginal_cdf(w[0])) / width;
        let p1 = (one.marginal_cdf(w[1]) - one.marginal_cdf(w[0])) / width;
        base.push(p0);
        slope.push(p1 - p0);
        widths.push(width);
    }
    // Normalize by the full sample count so out-of-range mass is respected.
    let y: Vec<f64> = hist
        .counts
        .iter()
        .zip(&widths)
        .map(|(&c, w)| c as f64 / (n * w))
        .collect();
    let num: f64 = slope.iter().zip(&y).zip(&base).map(|((d, y), b)| d * (y - b)).sum();
    let den: f64 = slope.iter().map(|d| d * d).sum();
    if !(den > 0.0) {
        return Err(Error::Degenerate("histogram fit has no sensitivity to eta".into()));
    }
    let eta = (num / den).clamp(0.0, 1.0);

    // Multinomial covariance of the binned densities at the fitted model.
    let probs: Vec<f64> = base
        .iter()
        .zip(&slope)
        .zip(&widths)
        .map(|((b, d), w)| (b + eta * d) * w)
        .collect();
    let a: f64 = slope
        .iter()
        .zip(&probs)
        .zip(&widths)
        .map(|((d, p), w)| d * d * p / (w * w))
        .sum();
    let b: f64 = slope.iter().zip(&probs).zip(&widths).map(|((d, p), w)| d * p / w).sum();
    let se = ((a - b * b) / n).max(0.0).sqrt() / den;
    let objective = y
        .iter()
        .zip(&base)
        .zip(&slope)
        .map(|((y, b), d)| (y - b - eta * d).powi(2))
        .sum();
    Ok((eta, se, objective, 1))
}

fn bootstrap_stderr(x: &[f64], config: &EfficiencyFitConfig, resamples: usize, seed: u64) -> Result<f64> {
    use rand::SeedableRng;
    if resamples < 2 {
        return Err(Error::InvalidInput("bootstrap needs at least 2 resamples".into()));
    }
    let mut rng = rand_chacha::ChaCha20Rng::seed_from_u64(seed);
    let n = x.len();
    let mut estimates = Vec::with_capacity(resamples);
    let mut buf = vec![0.0; n];
    for _ in 0..resamples {
        for slot in buf.iter_mut() {
            *slot = x[((open_unit(&mut rng) * n as f64) as usize).min(n - 1)];
        }
        let (eta, ..) = match config.method {
            EfficiencyMethod::MaximumLikelihood => fit_mle(&buf)?,
            EfficiencyMethod::HistogramLeastSquares => fit_histogram(&buf, config)?,
        };
        estimates.push(eta);
    }
    let mean = estimates.iter().sum::<f64>() / resamples as f64;
    let var = estimates.iter().map(|e| (e - mean).powi(2)).sum::<f64>() / (resamples - 1) as f64;
    Ok(var.sqrt())
}
