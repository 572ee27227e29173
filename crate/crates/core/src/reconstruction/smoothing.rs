//! Kernel density estimate of the phase-averaged marginal.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use super::histogram::MarginalHistogram;
use crate::error::{Error, Result};

/// An even density sampled on the uniform half-line grid `X_i = i·h`,
/// `i = 0..points`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    spacing: f64,
    values: Vec<f64>,
}

impl GridDensity {
    pub fn new(grid_max: f64, values: Vec<f64>) -> Result<Self> {
        if values.len() < 3 || !(grid_max > 0.0) {
            return Err(Error::InvalidInput(format!(
                "grid needs at least 3 points and positive extent, got {} points to {grid_max}",
                values.len()
            )));
        }
        Ok(Self {
            spacing: grid_max / (values.len() - 1) as f64,
            values,
        })
    }

    /// Tabulates `f` on `points` nodes over `[0, grid_max]`.
    pub fn from_fn<F: Fn(f64) -> f64>(grid_max: f64, points: usize, f: F) -> Result<Self> {
        let h = grid_max / (points.max(2) - 1) as f64;
        Self::new(grid_max, (0..points).map(|i| f(i as f64 * h)).collect())
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn grid_max(&self) -> f64 {
        self.spacing * (self.values.len() - 1) as f64
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn abscissae(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(move |i| i as f64 * self.spacing)
    }

    /// Cubic interpolation, extended evenly to negative `x` and by zero
    /// beyond the grid.
    pub fn value(&self, x: f64) -> f64 {
        interpolate_even(&self.values, self.spacing, x.abs())
    }

    /// `∫ p(X) dX` over the whole line (twice the half-line integral).
    pub fn total_mass(&self) -> f64 {
        let v = &self.values;
        let half = self.spacing * (v.iter().sum::<f64>() - 0.5 * (v[0] + v[v.len() - 1]));
        2.0 * half
    }
}

/// Four-point Lagrange interpolation on a uniform grid of an even function,
/// using reflection at the origin.
pub(crate) fn interpolate_even(values: &[f64], h: f64, x: f64) -> f64 {
    let last = values.len() - 1;
    let t = x / h;
    if t > last as f64 {
        return 0.0;
    }
    let i = (t.floor() as usize).min(last - 1);
    let s = t - i as f64;
    let at = |k: isize| -> f64 {
        let k = k.unsigned_abs();
        if k > last {
            // Quadratic extrapolation past the end.
            3.0 * values[last] - 3.0 * values[last - 1] + values[last - 2]
        } else {
            values[k]
        }
    };
    let i = i as isize;
    let (p0, p1, p2, p3) = (at(i - 1), at(i), at(i + 1), at(i + 2));
    let w0 = -s * (s - 1.0) * (s - 2.0) / 6.0;
    let w1 = (s + 1.0) * (s - 1.0) * (s - 2.0) / 2.0;
    let w2 = -(s + 1.0) * s * (s - 2.0) / 2.0;
    let w3 = (s + 1.0) * s * (s - 1.0) / 6.0;
    w0 * p0 + w1 * p1 + w2 * p2 + w3 * p3
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmoothingConfig {
    /// Multiplier applied to Silverman's bandwidth.
    pub bandwidth_scale: f64,
    /// Overrides the rule-of-thumb bandwidth when set.
    pub bandwidth: Option<f64>,
    pub grid_max: f64,
    pub grid_points: usize,
    pub min_samples: u64,
}

impl Default for SmoothingConfig {
    fn default() -> Self {
        Self {
            bandwidth_scale: 1.0,
            bandwidth: None,
            grid_max: 6.0,
            grid_points: 2001,
            min_samples: 1000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoothedMarginal {
    pub density: GridDensity,
    /// Gaussian kernel standard deviation actually used.
    pub bandwidth: f64,
}

/// Silverman's rule of thumb, `0.9·min(σ, IQR/1.34)·n^(−1/5)`, from binned data.
pub fn silverman_bandwidth(hist: &MarginalHistogram) -> f64 {
    let (_, std) = hist.mean_std();
    let iqr = hist.quantile(0.75) - hist.quantile(0.25);
    let spread = if iqr > 0.0 { std.min(iqr / 1.34) } else { std };
    0.9 * spread * (hist.n_total as f64).powf(-0.2)
}

/// Symmetrized Gaussian-kernel density estimate of a binned marginal.
///
/// Each bin contributes a kernel at its centre weighted by its count; the
/// estimate is averaged with its mirror image, `(p(X) + p(−X))/2`, and
/// normalized by the in-range count.
pub fn smooth_marginal(hist: &MarginalHistogram, config: &SmoothingConfig) -> Result<SmoothedMarginal> {
    if hist.n_total < config.min_samples.max(1) {
        return Err(Error::TooFewSamples {
            required: config.min_samples.max(1) as usize,
            got: hist.n_total as usize,
        });
    }
    let bandwidth = match config.bandwidth {
        Some(b) => b,
        None => config.bandwidth_scale * silverman_bandwidth(hist),
    };
    if !(bandwidth > 0.0 && bandwidth.is_finite()) {
        return Err(Error::Degenerate(format!(
            "kernel bandwidth {bandwidth} is not positive"
        )));
    }
    let values = symmetric_kde(hist, bandwidth, config.grid_max, config.grid_points);
    Ok(SmoothedMarginal {
        density: GridDensity::new(config.grid_max, values)?,
        bandwidth,
    })
}

/// Kernel estimate without symmetrization, evaluated at arbitrary points.
pub fn raw_kde(hist: &MarginalHistogram, bandwidth: f64, x: f64) -> f64 {
    let norm = 1.0 / (hist.n_total as f64 * bandwidth * (2.0 * PI).sqrt());
    hist.centers()
        .iter()
        .zip(&hist.counts)
        .map(|(c, &k)| k as f64 * (-0.5 * ((x - c) / bandwidth).powi(2)).exp())
        .sum::<f64>()
        * norm
}

fn symmetric_kde(hist: &MarginalHistogram, bandwidth: f64, grid_max: f64, points: usize) -> Vec<f64> {
    let h = grid_max / (points - 1) as f64;
    let reach = 10.0 * bandwidth;
    let norm = 0.5 / (hist.n_total as f64 * bandwidth * (2.0 * PI).sqrt());
    let inv2 = 0.5 / (bandwidth * bandwidth);
    let mut out = vec![0.0; points];
    for (c, &k) in hist.centers().iter().zip(&hist.counts) {
        if k == 0 {
            continue;
        }
        let w = k as f64 * norm;
        // A kernel at c contributes p(X) at X ≈ c and p(−X) at X ≈ −c.
        for centre in [*c, -*c] {
            let lo = (((centre - reach) / h).ceil().max(0.0)) as usize;
            let hi = ((centre + reach) / h).floor();
            if hi < 0.0 {
                continue;
            }
            let hi = (hi as usize).min(points - 1);
            for (i, slot) in out.iter_mut().enumerate().take(hi + 1).skip(lo) {
                let d = i as f64 * h - centre;
                *slot += w * (-d * d * inv2).exp();
            }
        }
    }
    out
}
