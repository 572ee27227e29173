//! Monte-Carlo sampling of density-matrix diagonals with pattern functions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::pattern::{PatternFunction, MAX_FOCK_INDEX};
use crate::error::{Error, Result};
use crate::quadrature::CompensatedSum;
use std::f64::consts::PI;

/// Samples per parallel partial sum. Partial sums are merged in index order.
const BLOCK: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEstimate {
    pub n: usize,
    pub rho_nn: f64,
    /// Standard error of the mean of `π·f_nn(x_k)`.
    pub sigma_nn: f64,
    /// `√(⟨(π f_nn)²⟩ / N)`, the uncentered form.
    pub sigma_nn_uncentered: f64,
}

/// Estimates `ρ_nn = (π/N) Σ_k f_nn(x_k)` for `n = 0..=n_max`.
pub fn sample_diagonals(x: &[f64], n_max: usize) -> Result<Vec<DiagonalEstimate>> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    if n_max > MAX_FOCK_INDEX {
        return Err(Error::UnsupportedFockIndex {
            n: n_max,
            max: MAX_FOCK_INDEX,
        });
    }
    let patterns: Vec<PatternFunction> = (0..=n_max).map(PatternFunction::new).collect::<Result<_>>()?;
    let partials: Vec<Vec<(CompensatedSum, CompensatedSum)>> = x
        .par_chunks(BLOCK)
        .map(|chunk| {
            patterns
                .iter()
                .map(|f| {
                    let mut s1 = CompensatedSum::default();
                    let mut s2 = CompensatedSum::default();
                    for &v in chunk {
                        let w = PI * f.eval(v);
                        s1.add(w);
                        s2.add(w * w);
                    }
                    (s1, s2)
                })
                .collect()
        })
        .collect();

    let n = x.len() as f64;
    Ok(patterns
        .iter()
        .enumerate()
        .map(|(idx, f)| {
            let mut s1 = CompensatedSum::default();
            let mut s2 = CompensatedSum::default();
            for block in &partials {
                s1.merge(&block[idx].0);
                s2.merge(&block[idx].1);
            }
            let mean = s1.value() / n;
            let mean_sq = s2.value() / n;
            let sample_var = if x.len() > 1 {
                ((mean_sq - mean * mean) * n / (n - 1.0)).max(0.0)
            } else {
                mean_sq
            };
            DiagonalEstimate {
                n: f.index(),
                rho_nn: mean,
                sigma_nn: (sample_var / n).sqrt(),
                sigma_nn_uncentered: (mean_sq / n).sqrt(),
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quadrature::integrate;
    use crate::simulator::sample_quadrature;
    use crate::states::EfficiencyMixtureState;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    fn draws(eta: f64, n: usize, seed: u64) -> Vec<f64> {
        let state = EfficiencyMixtureState::new(eta).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| sample_quadrature(&state, &mut rng)).collect()
    }

    #[test]
    fn exact_integration_of_mixture() {
        for eta in [0.0, 0.3, 0.553, 1.0] {
            let s = EfficiencyMixtureState::new(eta).unwrap();
            for (n, want) in [(0, 1.0 - eta), (1, eta), (2, 0.0), (3, 0.0)] {
                let f = PatternFunction::new(n).unwrap();
                let rho = PI * integrate(|v| s.marginal_density(v) * f.eval(v), -9.0, 9.0, 1e-13);
                assert!((rho - want).abs() < 1e-9, "eta={eta} n={n} rho={rho}");
            }
        }
    }

    #[test]
    fn reference_scale_single_photon() {
        let x = draws(0.553, 12_000, 61);
        let d = sample_diagonals(&x, 1).unwrap();
        assert!((d[1].rho_nn - 0.553).abs() < 3.0 * d[1].sigma_nn, "{:?}", d[1]);
        assert!((0.010..0.013).contains(&d[1].sigma_nn), "{:?}", d[1]);
        assert!((0.0115..0.0135).contains(&d[1].sigma_nn_uncentered), "{:?}", d[1]);
        assert!(d[1].sigma_nn_uncentered > d[1].sigma_nn);
    }

    #[test]
    fn vacuum_control() {
        let x = draws(0.0, 200_000, 62);
        let d = sample_diagonals(&x, 1).unwrap();
        assert!((d[0].rho_nn - 1.0).abs() < 3.0 * d[0].sigma_nn, "{:?}", d[0]);
        assert!(d[1].rho_nn.abs() < 3.0 * d[1].sigma_nn, "{:?}", d[1]);
        assert!((d[0].sigma_nn_uncentered - 0.0029).abs() < 0.0002);
        assert!((d[1].sigma_nn_uncentered - 0.0032).abs() < 0.0002);
    }

    #[test]
    fn deterministic_regardless_of_threads() {
        let x = draws(0.6, 30_000, 63);
        let a = sample_diagonals(&x, 3).unwrap();
        let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
        let b = pool.install(|| sample_diagonals(&x, 3)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn errors() {
        assert_eq!(sample_diagonals(&[], 1), Err(Error::EmptyInput));
        assert!(matches!(
            sample_diagonals(&[0.0], 4),
            Err(Error::UnsupportedFockIndex { .. })
        ));
        assert!(sample_diagonals(&[0.0], 0).unwrap()[0].sigma_nn > 0.0);
    }
}
