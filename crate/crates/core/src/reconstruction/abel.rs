//! Inverse Abel transform of a phase-averaged marginal.
//!
//! ```text
//! W(R) = −(1/π) ∫_R^∞ pr′(X) (X² − R²)^(−1/2) dX
//! ```
//!
//! With `u = √(X² − R²)` (so `X dX = u du`) the integrable singularity at
//! `X = R` disappears:
//!
//! ```text
//! W(R) = −(1/π) ∫_0^√(X_max² − R²) g(√(u² + R²)) du,   g(X) = pr′(X)/X.
//! ```
//!
//! `g` is even and finite at the origin, where it equals `pr″(0)`.

use std::f64::consts::PI;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::smoothing::{interpolate_even, GridDensity};
use crate::error::{Error, Result};
use crate::quadrature::{integrate, simpson, trapezoid};
use crate::states::ring_measure;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbelConfig {
    /// Largest accepted grid spacing.
    pub max_spacing: f64,
    /// The input grid must reach at least this far.
    pub min_range: f64,
}

impl Default for AbelConfig {
    fn default() -> Self {
        Self {
            max_spacing: 0.02,
            min_range: 4.0,
        }
    }
}

/// Tabulated phase-averaged Wigner function.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadialWignerProfile {
    pub radii: Vec<f64>,
    pub values: Vec<f64>,
    pub stderr: Option<Vec<f64>>,
}

impl RadialWignerProfile {
    /// `2π ∫ W(R) R dR` over the tabulated range.
    pub fn normalization(&self) -> f64 {
        let integrand: Vec<f64> = self
            .radii
            .iter()
            .zip(&self.values)
            .map(|(r, w)| ring_measure(*r) * w)
            .collect();
        trapezoid(&self.radii, &integrand)
    }

    /// Linear interpolation; zero outside the table.
    pub fn value_at(&self, r: f64) -> f64 {
        let r = r.abs();
        let k = self.radii.partition_point(|&x| x <= r);
        if k == 0 {
            return 0.0;
        }
        if k == self.radii.len() {
            let last = k - 1;
            return if r == self.radii[last] { self.values[last] } else { 0.0 };
        }
        let (r0, r1) = (self.radii[k - 1], self.radii[k]);
        let t = (r - r0) / (r1 - r0);
        self.values[k - 1] * (1.0 - t) + self.values[k] * t
    }

    pub fn write_table<W: Write>(&self, mut out: W, metadata: &[(&str, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k}={v}")?;
        }
        match &self.stderr {
            Some(err) => {
                writeln!(out, "# columns=R W stderr")?;
                for ((r, w), e) in self.radii.iter().zip(&self.values).zip(err) {
                    writeln!(out, "{r} {w} {e}")?;
                }
            }
            None => {
                writeln!(out, "# columns=R W")?;
                for (r, w) in self.radii.iter().zip(&self.values) {
                    writeln!(out, "{r} {w}")?;
                }
            }
        }
        Ok(())
    }
}

/// Uniform radial grid of `points` nodes on `[0, r_max]`.
pub fn radial_grid(r_max: f64, points: usize) -> Vec<f64> {
    let n = points.max(2);
    (0..n).map(|i| r_max * i as f64 / (n - 1) as f64).collect()
}

/// Reconstructs `W(R)` at the requested radii from an even marginal density.
pub fn abel_inverse(density: &GridDensity, radii: &[f64], config: &AbelConfig) -> Result<RadialWignerProfile> {
    let h = density.spacing();
    if h > config.max_spacing {
        return Err(Error::GridTooCoarse {
            spacing: h,
            max_spacing: config.max_spacing,
        });
    }
    let x_max = density.grid_max();
    if x_max < config.min_range {
        return Err(Error::RangeTooShort {
            reach: x_max,
            required: config.min_range,
        });
    }
    if let Some(r) = radii.iter().find(|r| !(**r >= 0.0)) {
        return Err(Error::Domain {
            name: "R",
            value: *r,
            constraint: "radius must be nonnegative",
        });
    }

    let g = derivative_over_x(density.values(), h);
    let values = radii
        .iter()
        .map(|&r| {
            if r >= x_max {
                return 0.0;
            }
            let u_max = (x_max * x_max - r * r).sqrt();
            // Odd number of nodes with spacing no coarser than the input grid.
            let intervals = 2 * ((u_max / h).ceil() as usize / 2 + 1);
            let du = u_max / intervals as f64;
            let samples: Vec<f64> = (0..=intervals)
                .map(|k| {
                    let u = k as f64 * du;
                    interpolate_even(&g, h, (u * u + r * r).sqrt())
                })
                .collect();
            -simpson(&samples, du) / PI
        })
        .collect();
    Ok(RadialWignerProfile {
        radii: radii.to_vec(),
        values,
        stderr: None,
    })
}

/// `pr′(X)/X` on the grid, with `pr″(0)` at the origin. Second-order central
/// differences; the density is extended evenly at 0 and one-sidedly at the
/// far end.
fn derivative_over_x(p: &[f64], h: f64) -> Vec<f64> {
    let n = p.len();
    let mut g = vec![0.0; n];
    g[0] = 2.0 * (p[1] - p[0]) / (h * h);
    for i in 1..n - 1 {
        g[i] = (p[i + 1] - p[i - 1]) / (2.0 * h) / (i as f64 * h);
    }
    let last = n - 1;
    g[last] = (3.0 * p[last] - 4.0 * p[last - 1] + p[last - 2]) / (2.0 * h) / (last as f64 * h);
    g
}

/// Projects a radial Wigner function back onto a quadrature axis:
/// `pr(X) = 2 ∫_0^∞ W(√(X² + P²)) dP`.
pub fn project_radial(profile: &RadialWignerProfile, xs: &[f64]) -> Vec<f64> {
    let r_max = profile.radii.last().copied().unwrap_or(0.0);
    xs.iter()
        .map(|&x| {
            if x.abs() >= r_max {
                return 0.0;
            }
            let p_max = (r_max * r_max - x * x).sqrt();
            // Linear interpolation kinks at every node; split accordingly.
            let pieces = (p_max / 0.05).ceil().max(1.0) as usize;
            let dp = p_max / pieces as f64;
            (0..pieces)
                .map(|k| {
                    integrate(
                        |p| profile.value_at((x * x + p * p).sqrt()),
                        k as f64 * dp,
                        (k + 1) as f64 * dp,
                        1e-10,
                    )
                })
                .sum::<f64>()
                * 2.0
        })
        .collect()
}
