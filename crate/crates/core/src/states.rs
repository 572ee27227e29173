//! Analytic vacuum, single-photon and efficiency-mixture states.
//!
//! All functions use the quadrature normalization in which the vacuum
//! Wigner function is `(2/π)·exp(−2(X²+P²))`, so vacuum quadrature noise has
//! variance 1/4. The mixture `η|1⟩⟨1| + (1−η)|0⟩⟨0|` is rotationally
//! symmetric, so every marginal is independent of the local-oscillator phase.

use std::f64::consts::{FRAC_2_PI, PI};

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{check_unit_interval, Error, Result};

/// Normalization constants of the quadrature convention.
#[derive(Debug, Clone, Copy, Default)]
pub struct QuadratureConvention;

impl QuadratureConvention {
    /// Variance of a vacuum quadrature measurement.
    pub const VACUUM_VARIANCE: f64 = 0.25;
    /// Standard deviation of a vacuum quadrature measurement.
    pub const VACUUM_STD: f64 = 0.5;
    /// `√(2/π)`, the peak of the vacuum marginal.
    pub const MARGINAL_PEAK: f64 = 0.797_884_560_802_865_4;
}

/// Vacuum Wigner function `W₀(X, P)`.
pub fn vacuum_wigner(x: f64, p: f64) -> f64 {
    FRAC_2_PI * (-2.0 * (x * x + p * p)).exp()
}

/// Vacuum marginal `pr₀(X) = √(2/π)·exp(−2X²)`.
pub fn vacuum_marginal(x: f64) -> f64 {
    QuadratureConvention::MARGINAL_PEAK * (-2.0 * x * x).exp()
}

/// Lower tail of the vacuum marginal.
pub fn vacuum_cdf(x: f64) -> f64 {
    0.5 * erfc(-std::f64::consts::SQRT_2 * x)
}

/// Upper tail of the vacuum marginal.
pub fn vacuum_sf(x: f64) -> f64 {
    0.5 * erfc(std::f64::consts::SQRT_2 * x)
}

/// The one-parameter family `η|1⟩⟨1| + (1−η)|0⟩⟨0|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyMixtureState {
    eta: f64,
}

impl EfficiencyMixtureState {
    pub fn new(eta: f64) -> Result<Self> {
        check_unit_interval("eta", eta)?;
        Ok(Self { eta })
    }

    pub fn vacuum() -> Self {
        Self { eta: 0.0 }
    }

    pub fn single_photon() -> Self {
        Self { eta: 1.0 }
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    /// Wigner function at the phase-space point `(x, p)`.
    pub fn wigner(&self, x: f64, p: f64) -> f64 {
        self.radial(x.hypot(p))
    }

    /// Wigner function as a function of the phase-space radius.
    pub fn wigner_radial(&self, r: f64) -> Result<f64> {
        if !(r >= 0.0) {
            return Err(Error::Domain {
                name: "R",
                value: r,
                constraint: "radius must be nonnegative",
            });
        }
        Ok(self.radial(r))
    }

    fn radial(&self, r: f64) -> f64 {
        let r2 = r * r;
        FRAC_2_PI * (-2.0 * r2).exp() * (1.0 - 2.0 * self.eta + 4.0 * self.eta * r2)
    }

    /// Wigner value at the origin, `(2/π)(1 − 2η)`.
    pub fn wigner_origin(&self) -> f64 {
        FRAC_2_PI * (1.0 - 2.0 * self.eta)
    }

    /// Phase-averaged marginal density `√(2/π)·exp(−2X²)·(1 − η + 4ηX²)`.
    pub fn marginal_density(&self, x: f64) -> f64 {
        vacuum_marginal(x) * (1.0 - self.eta + 4.0 * self.eta * x * x)
    }

    /// Cumulative distribution of the marginal.
    ///
    /// Uses the closed form `Φ₀(X) − η·√(2/π)·X·exp(−2X²)`, where the second
    /// term is the antiderivative of the single-photon excess over vacuum.
    pub fn marginal_cdf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 1.0;
        }
        if x == f64::NEG_INFINITY {
            return 0.0;
        }
        vacuum_cdf(x) - self.eta * x * vacuum_marginal(x)
    }

    /// Survival function `1 − CDF`, accurate in the upper tail.
    pub fn marginal_sf(&self, x: f64) -> f64 {
        if x == f64::INFINITY {
            return 0.0;
        }
        if x == f64::NEG_INFINITY {
            return 1.0;
        }
        vacuum_sf(x) + self.eta * x * vacuum_marginal(x)
    }

    /// Second moment `⟨X²⟩ = 1/4 + η/2`.
    pub fn second_moment(&self) -> f64 {
        0.25 + 0.5 * self.eta
    }

    /// Solves `CDF(X) = u` by bracketed Newton iteration to `1e−12` in `X`.
    ///
    /// `u` must lie in the open interval (0, 1); endpoints map to ±∞. For
    /// `u > 1/2` the residual is formed on the upper tail.
    pub fn inverse_cdf(&self, u: f64) -> f64 {
        if u <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if u >= 1.0 {
            return f64::INFINITY;
        }
        if u <= 0.5 {
            self.solve_tail(u, Tail::Lower)
        } else {
            self.solve_tail(1.0 - u, Tail::Upper)
        }
    }

    /// Solves `SF(X) = q`; keeps full relative precision deep in the upper tail.
    pub fn inverse_sf(&self, q: f64) -> f64 {
        if q <= 0.0 {
            return f64::INFINITY;
        }
        if q >= 1.0 {
            return f64::NEG_INFINITY;
        }
        if q <= 0.5 {
            self.solve_tail(q, Tail::Upper)
        } else {
            self.solve_tail(1.0 - q, Tail::Lower)
        }
    }

    fn solve_tail(&self, target: f64, tail: Tail) -> f64 {
        // Residual is increasing in x for both tails.
        let residual = |x: f64| match tail {
            Tail::Lower => self.marginal_cdf(x) - target,
            Tail::Upper => target - self.marginal_sf(x),
        };

        let (mut lo, mut hi) = (-INVERSE_CDF_BRACKET, INVERSE_CDF_BRACKET);
        let mut x = match tail {
            Tail::Lower => -0.5,
            Tail::Upper => 0.5,
        };
        for _ in 0..200 {
            let f = residual(x);
            if f == 0.0 {
                return x;
            }
            if f < 0.0 {
                lo = x;
            } else {
                hi = x;
            }
            if hi - lo <= INVERSE_CDF_TOLERANCE {
                break;
            }
            let slope = self.marginal_density(x);
            let newton = x - f / slope;
            x = if slope > 0.0 && newton > lo && newton < hi {
                if (newton - x).abs() <= 0.5 * INVERSE_CDF_TOLERANCE {
                    return newton;
                }
                newton
            } else {
                0.5 * (lo + hi)
            };
        }
        x
    }
}

#[derive(Clone, Copy)]
enum Tail {
    Lower,
    Upper,
}

const INVERSE_CDF_BRACKET: f64 = 12.0;
const INVERSE_CDF_TOLERANCE: f64 = 1e-12;

/// Area element used by radial integrals, `2πR`.
pub(crate) fn ring_measure(r: f64) -> f64 {
    2.0 * PI * r
}
