//! End-to-end reconstruction of a dataset: calibration, efficiency fit,
//! Wigner-function reconstruction and diagonal sampling.

use std::f64::consts::FRAC_2_PI;
use std::fmt::Write as _;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::budget::{check_agreement, AgreementCheck, BudgetResult};
use crate::calibration::{fit_vacuum, rescale, CalibrationConfig, CalibrationResult};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::reconstruction::{
    abel_inverse, bin_samples, fit_efficiency, radial_grid, sample_diagonals, smooth_marginal, AbelConfig, BinEdges,
    DiagonalEstimate, EfficiencyFit, EfficiencyFitConfig, MarginalHistogram, RadialWignerProfile, SmoothingConfig,
};
use crate::simulator::{open_unit, Source};

/// Version of the report document layout.
pub const REPORT_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReconstructionConfig {
    pub calibration: CalibrationConfig,
    pub efficiency: EfficiencyFitConfig,
    /// Bin width of the histogram fed to the kernel estimate.
    pub kde_bin_width: f64,
    /// Bin width of the histogram table written for plotting.
    pub plot_bin_width: f64,
    pub smoothing: SmoothingConfig,
    pub abel: AbelConfig,
    pub radial_max: f64,
    pub radial_points: usize,
    pub n_max: usize,
    /// Bootstrap resamples for the per-radius uncertainty of `W(R)`; 0 skips.
    pub bootstrap_resamples: usize,
    pub bootstrap_seed: u64,
    /// Bandwidth multipliers at which `W(0)` is recomputed.
    pub bandwidth_sensitivity: Vec<f64>,
}

impl Default for ReconstructionConfig {
    fn default() -> Self {
        Self {
            calibration: CalibrationConfig::default(),
            efficiency: EfficiencyFitConfig::default(),
            kde_bin_width: 0.005,
            plot_bin_width: 0.05,
            smoothing: SmoothingConfig::default(),
            abel: AbelConfig::default(),
            radial_max: 4.0,
            radial_points: 401,
            n_max: 3,
            bootstrap_resamples: 0,
            bootstrap_seed: 0,
            bandwidth_sensitivity: vec![0.5, 1.0, 2.0],
        }
    }
}

impl ReconstructionConfig {
    /// Short SHA-256 digest of the serialized configuration.
    pub fn digest(&self) -> String {
        let json = serde_json::to_vec(self).expect("config serializes");
        let hash = Sha256::digest(&json);
        hash.iter().take(8).fold(String::new(), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// `W(0,0)` inferred from the sampled `ρ₁₁` via `(2/π)(1 − 2ρ₁₁)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WignerOrigin {
    pub value: f64,
    pub uncertainty: f64,
    /// `(2/π)(1 − 2η̂)` at the fitted efficiency.
    pub from_fitted_eta: f64,
    /// Whether `from_fitted_eta` lies within `uncertainty` of `value`.
    pub consistent: bool,
}

/// `W(0)` read off the Abel-reconstructed profile.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AbelOrigin {
    pub value: f64,
    pub stderr: Option<f64>,
    pub bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthPoint {
    pub scale: f64,
    pub bandwidth: f64,
    pub wigner_origin: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool_version: String,
    pub dataset_seed: u64,
    pub dataset_rng: String,
    pub dataset_eta_true: f64,
    pub dataset_dark_fraction: f64,
    pub config_digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub format_version: u32,
    /// The stream that was reconstructed: the Fock run, or the vacuum run
    /// when the dataset has no Fock samples.
    pub analyzed_source: Source,
    pub n_analyzed: usize,
    pub calibration: CalibrationResult,
    pub efficiency_fit: EfficiencyFit,
    pub diagonals: Vec<DiagonalEstimate>,
    pub vacuum_diagonals: Vec<DiagonalEstimate>,
    pub wigner_origin: WignerOrigin,
    pub abel_origin: AbelOrigin,
    pub bandwidth_sensitivity: Vec<BandwidthPoint>,
    pub budget: Option<BudgetResult>,
    pub agreement: Option<AgreementCheck>,
    pub provenance: Provenance,
}

/// Everything produced by [`reconstruct`].
#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub report: RunReport,
    pub profile: RadialWignerProfile,
    pub histogram: MarginalHistogram,
}

pub fn reconstruct(dataset: &Dataset, config: &ReconstructionConfig) -> Result<Reconstruction> {
    let vacuum_raw = dataset.raw_values(Source::VacuumRun);
    let calibration = fit_vacuum(&vacuum_raw, &config.calibration)?;
    let vacuum = rescale(&vacuum_raw, &calibration);
    let fock_raw = dataset.raw_values(Source::FockRun);
    let (analyzed_source, analyzed) = if fock_raw.is_empty() {
        (Source::VacuumRun, vacuum.clone())
    } else {
        (Source::FockRun, rescale(&fock_raw, &calibration))
    };

    let efficiency_fit = fit_efficiency(&analyzed, &config.efficiency)?;
    let diagonals = sample_diagonals(&analyzed, config.n_max)?;
    let vacuum_diagonals = sample_diagonals(&vacuum, config.n_max)?;
    let rho11 = diagonals
        .get(1)
        .ok_or_else(|| Error::InvalidInput("n_max must be at least 1".into()))?;
    let wigner_value = FRAC_2_PI * (1.0 - 2.0 * rho11.rho_nn);
    let wigner_uncertainty = 2.0 * FRAC_2_PI * rho11.sigma_nn;
    let from_fitted_eta = FRAC_2_PI * (1.0 - 2.0 * efficiency_fit.eta_hat);
    let wigner_origin = WignerOrigin {
        value: wigner_value,
        uncertainty: wigner_uncertainty,
        from_fitted_eta,
        consistent: (from_fitted_eta - wigner_value).abs() <= wigner_uncertainty,
    };

    let kde_edges = BinEdges::Symmetric {
        half_range: config.smoothing.grid_max,
        width: config.kde_bin_width,
    };
    let kde_hist = bin_samples(&analyzed, &kde_edges)?;
    let radii = radial_grid(config.radial_max, config.radial_points);
    let smoothed = smooth_marginal(&kde_hist, &config.smoothing)?;
    let mut profile = abel_inverse(&smoothed.density, &radii, &config.abel)?;

    if config.bootstrap_resamples >= 2 {
        profile.stderr = Some(bootstrap_profile(
            &analyzed,
            config,
            smoothed.bandwidth,
            &kde_edges,
            &radii,
        )?);
    }
    let abel_origin = AbelOrigin {
        value: profile.values[0],
        stderr: profile.stderr.as_ref().map(|s| s[0]),
        bandwidth: smoothed.bandwidth,
    };

    let bandwidth_sensitivity = config
        .bandwidth_sensitivity
        .iter()
        .map(|&scale| {
            let cfg = SmoothingConfig {
                bandwidth_scale: config.smoothing.bandwidth_scale * scale,
                bandwidth: config.smoothing.bandwidth.map(|b| b * scale),
                ..config.smoothing
            };
            let s = smooth_marginal(&kde_hist, &cfg)?;
            let w = abel_inverse(&s.density, &[0.0], &config.abel)?;
            Ok(BandwidthPoint {
                scale,
                bandwidth: s.bandwidth,
                wigner_origin: w.values[0],
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let histogram = bin_samples(
        &analyzed,
        &BinEdges::Symmetric {
            half_range: config.smoothing.grid_max,
            width: config.plot_bin_width,
        },
    )?;

    let report = RunReport {
        format_version: REPORT_FORMAT_VERSION,
        analyzed_source,
        n_analyzed: analyzed.len(),
        calibration,
        efficiency_fit,
        diagonals,
        vacuum_diagonals,
        wigner_origin,
        abel_origin,
        bandwidth_sensitivity,
        budget: None,
        agreement: None,
        provenance: Provenance {
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            dataset_seed: dataset.header.seed,
            dataset_rng: dataset.header.rng.clone(),
            dataset_eta_true: dataset.header.eta_true,
            dataset_dark_fraction: dataset.header.dark_fraction,
            config_digest: config.digest(),
        },
    };
    Ok(Reconstruction {
        report,
        profile,
        histogram,
    })
}

/// Per-radius standard deviation of `W(R)` over bootstrap resamples, at a
/// fixed bandwidth. Resample `b` draws from ChaCha20 stream `b`.
fn bootstrap_profile(
    x: &[f64],
    config: &ReconstructionConfig,
    bandwidth: f64,
    edges: &BinEdges,
    radii: &[f64],
) -> Result<Vec<f64>> {
    let n = x.len();
    let smoothing = SmoothingConfig {
        bandwidth: Some(bandwidth),
        ..config.smoothing
    };
    let profiles = (0..config.bootstrap_resamples)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha20Rng::seed_from_u64(config.bootstrap_seed);
            rng.set_stream(b as u64);
            let sample: Vec<f64> = (0..n)
                .map(|_| x[((open_unit(&mut rng) * n as f64) as usize).min(n - 1)])
                .collect();
            let hist = bin_samples(&sample, edges)?;
            let s = smooth_marginal(&hist, &smoothing)?;
            Ok(abel_inverse(&s.density, radii, &config.abel)?.values)
        })
        .collect::<Result<Vec<_>>>()?;
    let m = profiles.len() as f64;
    Ok((0..radii.len())
        .map(|i| {
            let mean = profiles.iter().map(|p| p[i]).sum::<f64>() / m;
            (profiles.iter().map(|p| (p[i] - mean).powi(2)).sum::<f64>() / (m - 1.0)).sqrt()
        })
        .collect())
}

impl RunReport {
    /// Adds a budget prediction and its agreement check against the fitted
    /// efficiency.
    pub fn attach_budget(&mut self, budget: BudgetResult) {
        self.agreement = Some(check_agreement(
            &budget,
            self.efficiency_fit.eta_hat,
            self.efficiency_fit.eta_stderr,
        ));
        self.budget = Some(budget);
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| Error::InvalidInput(format!("report is not valid JSON: {e}")))?;
        check_version(&value, REPORT_FORMAT_VERSION)?;
        serde_json::from_value(value).map_err(|e| Error::InvalidInput(format!("malformed report: {e}")))
    }

    /// Human-readable `key=value` rendering.
    pub fn to_key_values(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "format_version={}", self.format_version);
        let _ = writeln!(s, "analyzed_source={}", self.analyzed_source.code());
        let _ = writeln!(s, "n_analyzed={}", self.n_analyzed);
        s.push_str(&self.calibration.to_key_values("calibration."));
        let fit = &self.efficiency_fit;
        let _ = writeln!(s, "efficiency.eta_hat={}", fit.eta_hat);
        let _ = writeln!(s, "efficiency.eta_stderr={}", fit.eta_stderr);
        let _ = writeln!(s, "efficiency.objective={}", fit.objective);
        let _ = writeln!(s, "efficiency.method={:?}", fit.method);
        let _ = writeln!(
            s,
            "efficiency.boundary={}",
            fit.boundary
                .map_or("none".to_string(), |b| format!("{b:?}").to_lowercase())
        );
        for (label, diags) in [
            ("diagonal", &self.diagonals),
            ("vacuum_diagonal", &self.vacuum_diagonals),
        ] {
            for d in diags.iter() {
                let _ = writeln!(s, "{label}.rho_{0}{0}={1}", d.n, d.rho_nn);
                let _ = writeln!(s, "{label}.sigma_{0}{0}={1}", d.n, d.sigma_nn);
                let _ = writeln!(s, "{label}.sigma_{0}{0}_uncentered={1}", d.n, d.sigma_nn_uncentered);
            }
        }
        let w = &self.wigner_origin;
        let _ = writeln!(s, "wigner_origin.value={}", w.value);
        let _ = writeln!(s, "wigner_origin.uncertainty={}", w.uncertainty);
        let _ = writeln!(s, "wigner_origin.from_fitted_eta={}", w.from_fitted_eta);
        let _ = writeln!(s, "wigner_origin.consistent={}", w.consistent);
        let _ = writeln!(s, "abel_origin.value={}", self.abel_origin.value);
        let _ = writeln!(
            s,
            "abel_origin.stderr={}",
            self.abel_origin.stderr.map_or("none".to_string(), |e| e.to_string())
        );
        let _ = writeln!(s, "abel_origin.bandwidth={}", self.abel_origin.bandwidth);
        for p in &self.bandwidth_sensitivity {
            let _ = writeln!(
                s,
                "bandwidth_sensitivity.x{}={} {}",
                p.scale, p.bandwidth, p.wigner_origin
            );
        }
        match (&self.budget, &self.agreement) {
            (Some(b), Some(a)) => {
                let _ = writeln!(s, "budget.eta_predicted={}", b.eta_predicted);
                let _ = writeln!(s, "budget.eta_uncertainty={}", b.eta_uncertainty);
                let _ = writeln!(s, "agreement.difference={}", a.difference);
                let _ = writeln!(s, "agreement.tolerance={}", a.tolerance);
                let _ = writeln!(s, "agreement.passes={}", a.passes);
            }
            _ => {
                let _ = writeln!(s, "budget=absent");
            }
        }
        let p = &self.provenance;
        let _ = writeln!(s, "provenance.tool_version={}", p.tool_version);
        let _ = writeln!(s, "provenance.dataset_seed={}", p.dataset_seed);
        let _ = writeln!(s, "provenance.dataset_rng={}", p.dataset_rng);
        let _ = writeln!(s, "provenance.dataset_eta_true={}", p.dataset_eta_true);
        let _ = writeln!(s, "provenance.dataset_dark_fraction={}", p.dataset_dark_fraction);
        let _ = writeln!(s, "provenance.config_digest={}", p.config_digest);
        s
    }
}

/// Rejects structured documents whose `format_version` differs from `expected`.
pub fn check_version(value: &serde_json::Value, expected: u32) -> Result<()> {
    match value.get("format_version").and_then(|v| v.as_u64()) {
        Some(v) if v == expected as u64 => Ok(()),
        Some(v) => Err(Error::VersionMismatch {
            expected: expected.to_string(),
            found: v.to_string(),
        }),
        None => Err(Error::VersionMismatch {
            expected: expected.to_string(),
            found: "missing".to_string(),
        }),
    }
}
