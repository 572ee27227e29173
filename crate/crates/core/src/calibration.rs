//! Vacuum-based calibration of the detector scale and origin.
//!
//! The vacuum run is modelled as a Gaussian of standard deviation
//! `scale · 1/2` centred at `offset`. The default fit uses the sample moments,
//! which is the Gaussian maximum-likelihood estimate. A histogram
//! least-squares refinement can be switched on; it starts from the moments.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quadrature::CompensatedSum;
use crate::states::{vacuum_cdf, QuadratureConvention};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CalibrationMethod {
    Moments,
    HistogramLeastSquares,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationConfig {
    pub method: CalibrationMethod,
    pub min_samples: usize,
}

impl Default for CalibrationConfig {
    fn default() -> Self {
        Self {
            method: CalibrationMethod::Moments,
            min_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    /// Raw units per dimensionless quadrature unit.
    pub scale_hat: f64,
    /// Raw value corresponding to the quadrature origin.
    pub offset_hat: f64,
    /// Sum of squared deviations between the binned density and the fitted
    /// vacuum marginal.
    pub fit_residual: f64,
    pub n_used: usize,
    pub method: CalibrationMethod,
    /// Histogram bin width in raw units (Scott's rule).
    pub bin_width: f64,
    pub bin_count: usize,
}

impl CalibrationResult {
    /// Identity calibration, for data already in quadrature units.
    pub fn identity() -> Self {
        Self {
            scale_hat: 1.0,
            offset_hat: 0.0,
            fit_residual: 0.0,
            n_used: 0,
            method: CalibrationMethod::Moments,
            bin_width: 0.0,
            bin_count: 0,
        }
    }

    pub fn to_key_values(&self, prefix: &str) -> String {
        let method = match self.method {
            CalibrationMethod::Moments => "moments",
            CalibrationMethod::HistogramLeastSquares => "hist",
        };
        format!(
            "{p}scale_hat={}\n{p}offset_hat={}\n{p}fit_residual={}\n{p}n_used={}\n{p}method={}\n{p}bin_width={}\n{p}bin_count={}\n",
            self.scale_hat,
            self.offset_hat,
            self.fit_residual,
            self.n_used,
            method,
            self.bin_width,
            self.bin_count,
            p = prefix
        )
    }
}

/// Fits the vacuum Gaussian by varying its scale and origin.
pub fn fit_vacuum(samples: &[f64], config: &CalibrationConfig) -> Result<CalibrationResult> {
    if samples.len() < config.min_samples.max(2) {
        return Err(Error::TooFewSamples {
            required: config.min_samples.max(2),
            got: samples.len(),
        });
    }
    if samples.iter().any(|x| !x.is_finite()) {
        return Err(Error::InvalidInput("vacuum samples contain non-finite values".into()));
    }
    let n = samples.len() as f64;
    let mean = samples.iter().copied().collect::<CompensatedSum>().value() / n;
    let var = samples
        .iter()
        .map(|x| (x - mean) * (x - mean))
        .collect::<CompensatedSum>()
        .value()
        / n;
    if !(var > 0.0) {
        return Err(Error::Degenerate("vacuum samples have zero variance".into()));
    }
    let std = var.sqrt();

    let hist = VacuumHistogram::scott(samples, mean, std);
    let mut scale = std / QuadratureConvention::VACUUM_STD;
    let mut offset = mean;
    if config.method == CalibrationMethod::HistogramLeastSquares {
        (scale, offset) = hist.refine(scale, offset)?;
    }
    Ok(CalibrationResult {
        scale_hat: scale,
        offset_hat: offset,
        fit_residual: hist.objective(scale, offset),
        n_used: samples.len(),
        method: config.method,
        bin_width: hist.width,
        bin_count: hist.densities.len(),
    })
}

/// Maps raw detector values to dimensionless quadratures, preserving order.
pub fn rescale(samples: &[f64], cal: &CalibrationResult) -> Vec<f64> {
    samples
        .iter()
        .map(|raw| (raw - cal.offset_hat) / cal.scale_hat)
        .collect()
}

struct VacuumHistogram {
    lo: f64,
    width: f64,
    densities: Vec<f64>,
}

impl VacuumHistogram {
    /// Bins on `mean ± 5·std` with Scott's-rule width `3.49·std·N^(−1/3)`.
    fn scott(samples: &[f64], mean: f64, std: f64) -> Self {
        let n = samples.len() as f64;
        let span = 10.0 * std;
        let nominal = 3.49 * std * n.powf(-1.0 / 3.0);
        let bins = ((span / nominal).ceil() as usize).max(1);
        let width = span / bins as f64;
        let lo = mean - 5.0 * std;
        let mut counts = vec![0u64; bins];
        for &x in samples {
            let k = ((x - lo) / width).floor();
            if k >= 0.0 && (k as usize) < bins {
                counts[k as usize] += 1;
            }
        }
        let densities = counts.iter().map(|&c| c as f64 / (n * width)).collect();
        Self { lo, width, densities }
    }

    fn residuals(&self, scale: f64, offset: f64) -> impl Iterator<Item = f64> + '_ {
        self.densities.iter().enumerate().map(move |(i, &y)| {
            let a = (self.lo + i as f64 * self.width - offset) / scale;
            let b = (self.lo + (i + 1) as f64 * self.width - offset) / scale;
            y - (vacuum_cdf(b) - vacuum_cdf(a)) / self.width
        })
    }

    fn objective(&self, scale: f64, offset: f64) -> f64 {
        self.residuals(scale, offset).map(|r| r * r).sum()
    }

    /// Levenberg–Marquardt on the two parameters with finite-difference
    /// Jacobian.
    fn refine(&self, scale0: f64, offset0: f64) -> Result<(f64, f64)> {
        let (mut s, mut b) = (scale0, offset0);
        let mut cost = self.objective(s, b);
        let mut lambda = 1e-3;
        for _ in 0..100 {
            let hs = 1e-6 * s;
            let hb = 1e-6 * s;
            let r0: Vec<f64> = self.residuals(s, b).collect();
            let rs: Vec<f64> = self.residuals(s + hs, b).collect();
            let rb: Vec<f64> = self.residuals(s, b + hb).collect();
            let (mut a11, mut a12, mut a22, mut g1, mut g2) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for i in 0..r0.len() {
                let j1 = (rs[i] - r0[i]) / hs;
                let j2 = (rb[i] - r0[i]) / hb;
                a11 += j1 * j1;
                a12 += j1 * j2;
                a22 += j2 * j2;
                g1 += j1 * r0[i];
                g2 += j2 * r0[i];
            }
            let mut improved = false;
            while lambda < 1e12 {
                let d11 = a11 * (1.0 + lambda);
                let d22 = a22 * (1.0 + lambda);
                let det = d11 * d22 - a12 * a12;
                let ds = -(d22 * g1 - a12 * g2) / det;
                let db = -(d11 * g2 - a12 * g1) / det;
                let (ns, nb) = (s + ds, b + db);
                if ns > 0.0 {
                    let new_cost = self.objective(ns, nb);
                    if new_cost < cost {
                        let converged = ds.abs() < 1e-10 * s && db.abs() < 1e-10 * s;
                        (s, b, cost) = (ns, nb, new_cost);
                        lambda = (lambda * 0.3).max(1e-12);
                        improved = true;
                        if converged {
                            return Ok((s, b));
                        }
                        break;
                    }
                }
                lambda *= 10.0;
            }
            if !improved {
                return Ok((s, b));
            }
        }
        if s > 0.0 && s.is_finite() && b.is_finite() {
            Ok((s, b))
        } else {
            Err(Error::NonConvergence {
                iterations: 100,
                diagnostics: format!("histogram calibration ended at scale={s}, offset={b}"),
            })
        }
    }
}
