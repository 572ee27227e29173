//! Synthetic homodyne runs.
//!
//! Each run has a vacuum stream (the calibration reference) and a Fock stream
//! in which a fraction of trigger events is false and yields vacuum noise.
//! Dimensionless draws are mapped through an affine detector response.
//!
//! Random streams: every block of [`CHUNK_LEN`] samples of a given source uses
//! its own ChaCha20 stream, seeded with `seed_from_u64(seed)` and selected with
//! `set_stream((source_id << 48) | block_index)`. Within a sample, draws are
//! taken in the order: false-trigger test (Fock source only), quadrature,
//! phase. Blocks are generated in parallel and concatenated in index order,
//! so the output does not depend on the number of threads.

use std::f64::consts::TAU;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, DatasetHeader};
use crate::error::{Error, Result};
use crate::states::EfficiencyMixtureState;

/// Samples per independent random stream.
pub const CHUNK_LEN: usize = 8192;

/// Name of the generator and stream-splitting scheme, recorded in datasets.
pub const RNG_NAME: &str = "chacha20/seed_from_u64/stream=(source<<48|block)/block=8192";

/// Affine detector response and false-trigger rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectorModel {
    pub scale: f64,
    pub offset: f64,
    pub dark_fraction: f64,
}

impl Default for DetectorModel {
    fn default() -> Self {
        Self {
            scale: 1.0,
            offset: 0.0,
            dark_fraction: 0.0,
        }
    }
}

impl DetectorModel {
    pub fn new(scale: f64, offset: f64, dark_fraction: f64) -> Result<Self> {
        let model = Self {
            scale,
            offset,
            dark_fraction,
        };
        model.validate()?;
        Ok(model)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Domain {
                name: "scale",
                value: self.scale,
                constraint: "must be positive and finite",
            });
        }
        if !self.offset.is_finite() {
            return Err(Error::Domain {
                name: "offset",
                value: self.offset,
                constraint: "must be finite",
            });
        }
        if !(0.0..1.0).contains(&self.dark_fraction) {
            return Err(Error::Domain {
                name: "dark_fraction",
                value: self.dark_fraction,
                constraint: "must lie in [0, 1)",
            });
        }
        Ok(())
    }

    /// Maps a dimensionless quadrature to raw detector units.
    pub fn to_raw(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }

    /// Mixture weight of `|1⟩` seen in the Fock stream.
    pub fn effective_eta(&self, eta_true: f64) -> f64 {
        eta_true * (1.0 - self.dark_fraction)
    }
}

/// Which acquisition a sample belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Source {
    VacuumRun,
    FockRun,
}

impl Source {
    pub fn code(self) -> char {
        match self {
            Source::VacuumRun => 'V',
            Source::FockRun => 'F',
        }
    }

    pub fn from_code(code: &str) -> Option<Self> {
        match code {
            "V" => Some(Source::VacuumRun),
            "F" => Some(Source::FockRun),
            _ => None,
        }
    }

    fn stream_id(self) -> u64 {
        match self {
            Source::VacuumRun => 0,
            Source::FockRun => 1,
        }
    }
}

/// One homodyne outcome.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSample {
    pub source: Source,
    /// Local-oscillator phase in `[0, 2π)`.
    pub phase: f64,
    pub raw_value: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub eta_true: f64,
    pub n_vacuum: usize,
    pub n_fock: usize,
    pub detector: DetectorModel,
    pub seed: u64,
}

impl RunSpec {
    /// Sample counts and efficiency of the reference experiment.
    pub fn reference_scale(seed: u64) -> Self {
        Self {
            eta_true: 0.553,
            n_vacuum: 200_000,
            n_fock: 12_000,
            detector: DetectorModel::default(),
            seed,
        }
    }

    pub fn validate(&self) -> Result<()> {
        crate::error::check_unit_interval("eta_true", self.eta_true)?;
        self.detector.validate()
    }
}

/// Uniform draw on the open interval (0, 1).
pub fn open_unit<R: RngCore + ?Sized>(rng: &mut R) -> f64 {
    ((rng.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Draws one dimensionless quadrature from the state's marginal by inversion.
pub fn sample_quadrature<R: RngCore + ?Sized>(state: &EfficiencyMixtureState, rng: &mut R) -> f64 {
    state.inverse_cdf(open_unit(rng))
}

/// Generator for the given source and block, per the module-level scheme.
pub fn block_rng(seed: u64, source: Source, block: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream((source.stream_id() << 48) | block);
    rng
}

/// Generates the vacuum stream followed by the Fock stream.
pub fn generate_run(spec: &RunSpec) -> Result<Dataset> {
    spec.validate()?;
    let signal = EfficiencyMixtureState::new(spec.eta_true)?;
    let mut samples = generate_stream(spec, Source::VacuumRun, spec.n_vacuum, &signal);
    samples.extend(generate_stream(spec, Source::FockRun, spec.n_fock, &signal));
    Ok(Dataset::new(DatasetHeader::for_spec(spec), samples))
}

fn generate_stream(
    spec: &RunSpec,
    source: Source,
    count: usize,
    signal: &EfficiencyMixtureState,
) -> Vec<QuadratureSample> {
    let vacuum = EfficiencyMixtureState::vacuum();
    let blocks = count.div_ceil(CHUNK_LEN);
    let per_block: Vec<Vec<QuadratureSample>> = (0..blocks)
        .into_par_iter()
        .map(|block| {
            let len = CHUNK_LEN.min(count - block * CHUNK_LEN);
            let mut rng = block_rng(spec.seed, source, block as u64);
            (0..len)
                .map(|_| {
                    let state = match source {
                        Source::VacuumRun => &vacuum,
                        Source::FockRun => {
                            if open_unit(&mut rng) < spec.detector.dark_fraction {
                                &vacuum
                            } else {
                                signal
                            }
                        }
                    };
                    let x = sample_quadrature(state, &mut rng);
                    let phase = rng.random::<f64>() * TAU;
                    QuadratureSample {
                        source,
                        // Guard against rounding up to 2π.
                        phase: if phase < TAU { phase } else { 0.0 },
                        raw_value: spec.detector.to_raw(x),
                    }
                })
                .collect()
        })
        .collect();
    per_block.into_iter().flatten().collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn moments(xs: &[f64]) -> (f64, f64) {
        let n = xs.len() as f64;
        let mean = xs.iter().sum::<f64>() / n;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / n;
        (mean, var.sqrt())
    }

    fn draws(eta: f64, n: usize, seed: u64) -> Vec<f64> {
        let state = EfficiencyMixtureState::new(eta).unwrap();
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| sample_quadrature(&state, &mut rng)).collect()
    }

    #[test]
    fn vacuum_draw_moments() {
        let xs = draws(0.0, 1_000_000, 11);
        let (mean, std) = moments(&xs);
        assert!(mean.abs() < 3.0 * 0.5 / 1e3, "mean={mean}");
        assert!((std - 0.5).abs() < 0.005, "std={std}");
    }

    #[test]
    fn single_photon_second_moment() {
        let xs = draws(1.0, 1_000_000, 12);
        let m2 = xs.iter().map(|x| x * x).sum::<f64>() / xs.len() as f64;
        assert!((m2 - 0.75).abs() < 0.0075, "m2={m2}");
    }

    #[test]
    fn detector_validation() {
        assert!(DetectorModel::new(0.0, 0.0, 0.0).is_err());
        assert!(DetectorModel::new(1.0, f64::NAN, 0.0).is_err());
        assert!(DetectorModel::new(1.0, 0.0, 1.0).is_err());
        assert!(DetectorModel::new(1.0, 0.0, -0.1).is_err());
        assert!(DetectorModel::new(2.0, -3.0, 0.02).is_ok());
        let mut spec = RunSpec::reference_scale(1);
        spec.eta_true = 1.2;
        assert!(generate_run(&spec).is_err());
    }

    #[test]
    fn empty_fock_branch() {
        let spec = RunSpec {
            n_vacuum: 500,
            n_fock: 0,
            ..RunSpec::reference_scale(3)
        };
        let data = generate_run(&spec).unwrap();
        assert_eq!(data.samples.len(), 500);
        assert!(data.samples.iter().all(|s| s.source == Source::VacuumRun));
    }

    #[test]
    fn phases_are_in_range_and_order_is_logical() {
        let spec = RunSpec {
            n_vacuum: 3 * CHUNK_LEN + 17,
            n_fock: CHUNK_LEN + 5,
            ..RunSpec::reference_scale(9)
        };
        let data = generate_run(&spec).unwrap();
        assert!(data.samples.iter().all(|s| (0.0..TAU).contains(&s.phase)));
        let first_fock = data.samples.iter().position(|s| s.source == Source::FockRun);
        assert_eq!(first_fock, Some(spec.n_vacuum));
        // The second block of the vacuum stream starts from its own stream.
        let mut rng = block_rng(9, Source::VacuumRun, 1);
        let x = sample_quadrature(&EfficiencyMixtureState::vacuum(), &mut rng);
        assert_eq!(data.samples[CHUNK_LEN].raw_value, x);
    }

    #[test]
    fn affine_detector_moments() {
        let spec = RunSpec {
            eta_true: 0.0,
            n_vacuum: 0,
            n_fock: 400_000,
            detector: DetectorModel::new(2.0, 1.0, 0.0).unwrap(),
            seed: 5,
        };
        let data = generate_run(&spec).unwrap();
        let raw: Vec<f64> = data.samples.iter().map(|s| s.raw_value).collect();
        let (mean, std) = moments(&raw);
        assert!((mean - 1.0).abs() < 0.006, "mean={mean}");
        assert!((std - 1.0).abs() < 0.006, "std={std}");
    }
}
