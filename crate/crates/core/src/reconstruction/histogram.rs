use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// How bin edges are chosen.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum BinEdges {
    /// `bins` equal-width bins covering `[lo, hi)`.
    Uniform {
        lo: f64,
        hi: f64,
        bins: usize,
    },
    /// Bins of the given width covering `[−half_range, half_range)`.
    Symmetric {
        half_range: f64,
        width: f64,
    },
    Explicit(Vec<f64>),
}

impl BinEdges {
    pub fn edges(&self) -> Result<Vec<f64>> {
        let edges = match self {
            BinEdges::Uniform { lo, hi, bins } => {
                if *bins == 0 || !(hi > lo) {
                    return Err(Error::InvalidInput(format!(
                        "bad uniform binning [{lo}, {hi}) x {bins}"
                    )));
                }
                let w = (hi - lo) / *bins as f64;
                (0..=*bins).map(|i| lo + i as f64 * w).collect()
            }
            BinEdges::Symmetric { half_range, width } => {
                if !(*half_range > 0.0 && *width > 0.0) {
                    return Err(Error::InvalidInput(format!(
                        "bad symmetric binning ±{half_range} width {width}"
                    )));
                }
                let bins = (2.0 * half_range / width).round().max(1.0) as usize;
                let w = 2.0 * half_range / bins as f64;
                (0..=bins).map(|i| -half_range + i as f64 * w).collect()
            }
            BinEdges::Explicit(e) => e.clone(),
        };
        if edges.len() < 2 || edges.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidInput("bin edges must be strictly increasing".into()));
        }
        Ok(edges)
    }
}

/// Binned marginal distribution. Bins are half-open, `[e_i, e_{i+1})`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarginalHistogram {
    pub bin_edges: Vec<f64>,
    pub counts: Vec<u64>,
    /// Number of samples inside the binned range.
    pub n_total: u64,
    pub underflow: u64,
    pub overflow: u64,
}

pub fn bin_samples(x: &[f64], edges: &BinEdges) -> Result<MarginalHistogram> {
    if x.is_empty() {
        return Err(Error::EmptyInput);
    }
    let bin_edges = edges.edges()?;
    let nbins = bin_edges.len() - 1;
    let mut counts = vec![0u64; nbins];
    let (mut underflow, mut overflow) = (0u64, 0u64);
    for &v in x {
        if v.is_nan() {
            return Err(Error::InvalidInput("NaN sample".into()));
        }
        // Index of the first edge strictly greater than v.
        let k = bin_edges.partition_point(|&e| e <= v);
        if k == 0 {
            underflow += 1;
        } else if k > nbins {
            overflow += 1;
        } else {
            counts[k - 1] += 1;
        }
    }
    let n_total = counts.iter().sum();
    Ok(MarginalHistogram {
        bin_edges,
        counts,
        n_total,
        underflow,
        overflow,
    })
}

impl MarginalHistogram {
    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn centers(&self) -> Vec<f64> {
        self.bin_edges.windows(2).map(|w| 0.5 * (w[0] + w[1])).collect()
    }

    /// Empirical density, normalized by the in-range count.
    pub fn densities(&self) -> Vec<f64> {
        let n = self.n_total.max(1) as f64;
        self.bin_edges
            .windows(2)
            .zip(&self.counts)
            .map(|(w, &c)| c as f64 / (n * (w[1] - w[0])))
            .collect()
    }

    /// Weighted mean and standard deviation of the bin centres.
    pub fn mean_std(&self) -> (f64, f64) {
        let n = self.n_total as f64;
        let centers = self.centers();
        let mean = centers
            .iter()
            .zip(&self.counts)
            .map(|(c, &k)| c * k as f64)
            .sum::<f64>()
            / n;
        let var = centers
            .iter()
            .zip(&self.counts)
            .map(|(c, &k)| k as f64 * (c - mean).powi(2))
            .sum::<f64>()
            / n;
        (mean, var.sqrt())
    }

    /// Quantile of the in-range distribution, linear within bins.
    pub fn quantile(&self, q: f64) -> f64 {
        let target = q.clamp(0.0, 1.0) * self.n_total as f64;
        let mut acc = 0.0;
        for (i, &c) in self.counts.iter().enumerate() {
            let next = acc + c as f64;
            if next >= target && c > 0 {
                let frac = (target - acc) / c as f64;
                return self.bin_edges[i] + frac * (self.bin_edges[i + 1] - self.bin_edges[i]);
            }
            acc = next;
        }
        *self.bin_edges.last().unwrap()
    }

    /// Pearson chi-squared statistic against a model CDF, over bins whose
    /// expected count is at least 5. Returns `(statistic, degrees of freedom)`.
    pub fn pearson_chi_squared<F: Fn(f64) -> f64>(&self, cdf: F) -> (f64, usize) {
        let total = (self.n_total + self.underflow + self.overflow) as f64;
        let mut stat = 0.0;
        let mut used = 0usize;
        for (w, &c) in self.bin_edges.windows(2).zip(&self.counts) {
            let expected = total * (cdf(w[1]) - cdf(w[0]));
            if expected >= 5.0 {
                stat += (c as f64 - expected).powi(2) / expected;
                used += 1;
            }
        }
        (stat, used.saturating_sub(1))
    }

    /// Writes `center density count` rows with a `#` metadata header.
    pub fn write_table<W: Write>(&self, mut out: W, metadata: &[(&str, String)]) -> Result<()> {
        for (k, v) in metadata {
            writeln!(out, "# {k}={v}")?;
        }
        writeln!(out, "# n_total={}", self.n_total)?;
        writeln!(out, "# underflow={}", self.underflow)?;
        writeln!(out, "# overflow={}", self.overflow)?;
        writeln!(out, "# columns=x density count")?;
        for ((c, d), k) in self.centers().iter().zip(self.densities()).zip(&self.counts) {
            writeln!(out, "{c} {d} {k}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::sample_quadrature;
    use crate::states::{vacuum_cdf, EfficiencyMixtureState};
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;

    #[test]
    fn sample_on_edge_goes_right() {
        let h = bin_samples(&[0.5], &BinEdges::Explicit(vec![0.0, 0.5, 1.0])).unwrap();
        assert_eq!(h.counts, vec![0, 1]);
        let h = bin_samples(&[1.0, -0.1, 0.0], &BinEdges::Explicit(vec![0.0, 0.5, 1.0])).unwrap();
        assert_eq!(h.counts, vec![1, 0]);
        assert_eq!((h.underflow, h.overflow, h.n_total), (1, 1, 1));
    }

    #[test]
    fn everything_out_of_range() {
        let h = bin_samples(
            &[5.0, 6.0, -9.0],
            &BinEdges::Uniform {
                lo: -1.0,
                hi: 1.0,
                bins: 4,
            },
        )
        .unwrap();
        assert_eq!(h.n_total, 0);
        assert_eq!(h.counts, vec![0; 4]);
        assert_eq!((h.underflow, h.overflow), (1, 2));
    }

    #[test]
    fn errors() {
        assert_eq!(
            bin_samples(&[], &BinEdges::Explicit(vec![0.0, 1.0])),
            Err(Error::EmptyInput)
        );
        assert!(bin_samples(&[0.1], &BinEdges::Explicit(vec![0.0, 0.0])).is_err());
        assert!(bin_samples(
            &[0.1],
            &BinEdges::Uniform {
                lo: 0.0,
                hi: 1.0,
                bins: 0
            }
        )
        .is_err());
    }

    #[test]
    fn counts_sum_to_total() {
        let xs: Vec<f64> = (0..1000).map(|i| (i as f64 * 0.37).sin() * 3.0).collect();
        let h = bin_samples(
            &xs,
            &BinEdges::Symmetric {
                half_range: 2.0,
                width: 0.1,
            },
        )
        .unwrap();
        assert_eq!(h.bin_count(), 40);
        assert_eq!(h.counts.iter().sum::<u64>(), h.n_total);
        assert_eq!(h.n_total + h.underflow + h.overflow, 1000);
    }

    #[test]
    fn vacuum_histogram_fits_true_model() {
        let vac = EfficiencyMixtureState::vacuum();
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let xs: Vec<f64> = (0..100_000).map(|_| sample_quadrature(&vac, &mut rng)).collect();
        let h = bin_samples(
            &xs,
            &BinEdges::Uniform {
                lo: -2.5,
                hi: 2.5,
                bins: 200,
            },
        )
        .unwrap();
        let (chi2, dof) = h.pearson_chi_squared(vacuum_cdf);
        let per_dof = chi2 / dof as f64;
        assert!((0.7..=1.3).contains(&per_dof), "chi2/dof = {per_dof}");
    }
}
