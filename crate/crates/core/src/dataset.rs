//! Plain-text dataset format shared by the simulator and the reconstruction.
//!
//! ```text
//! # format=fock-tomography-dataset
//! # version=1
//! # seed=42
//! # eta_true=0.553
//! # scale=1
//! # offset=0
//! # dark_fraction=0
//! # n_vacuum=200000
//! # n_fock=12000
//! # rng=chacha20/...
//! V 4.0187 0.2741932...
//! F 1.1130 -0.613...
//! ```
//!
//! Body lines are `source phase raw_value`, with `source` one of `V`, `F`.
//! Floats are written with Rust's shortest round-trip formatting.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::simulator::{QuadratureSample, RunSpec, Source, RNG_NAME};

pub const FORMAT_NAME: &str = "fock-tomography-dataset";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetHeader {
    pub version: u32,
    pub seed: u64,
    pub eta_true: f64,
    pub scale: f64,
    pub offset: f64,
    pub dark_fraction: f64,
    pub n_vacuum: usize,
    pub n_fock: usize,
    pub rng: String,
}

impl DatasetHeader {
    pub fn for_spec(spec: &RunSpec) -> Self {
        Self {
            version: FORMAT_VERSION,
            seed: spec.seed,
            eta_true: spec.eta_true,
            scale: spec.detector.scale,
            offset: spec.detector.offset,
            dark_fraction: spec.detector.dark_fraction,
            n_vacuum: spec.n_vacuum,
            n_fock: spec.n_fock,
            rng: RNG_NAME.to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub header: DatasetHeader,
    pub samples: Vec<QuadratureSample>,
}

impl Dataset {
    pub fn new(header: DatasetHeader, samples: Vec<QuadratureSample>) -> Self {
        Self { header, samples }
    }

    pub fn raw_values(&self, source: Source) -> Vec<f64> {
        self.samples
            .iter()
            .filter(|s| s.source == source)
            .map(|s| s.raw_value)
            .collect()
    }

    pub fn write_to<W: Write>(&self, mut out: W) -> Result<()> {
        let h = &self.header;
        writeln!(out, "# format={FORMAT_NAME}")?;
        writeln!(out, "# version={}", h.version)?;
        writeln!(out, "# seed={}", h.seed)?;
        writeln!(out, "# eta_true={}", h.eta_true)?;
        writeln!(out, "# scale={}", h.scale)?;
        writeln!(out, "# offset={}", h.offset)?;
        writeln!(out, "# dark_fraction={}", h.dark_fraction)?;
        writeln!(out, "# n_vacuum={}", h.n_vacuum)?;
        writeln!(out, "# n_fock={}", h.n_fock)?;
        writeln!(out, "# rng={}", h.rng)?;
        for s in &self.samples {
            writeln!(out, "{} {} {}", s.source.code(), s.phase, s.raw_value)?;
        }
        out.flush()?;
        Ok(())
    }

    /// Parses and validates a dataset. Nothing is returned unless the whole
    /// input is consistent with its header.
    pub fn read_from<R: BufRead>(input: R) -> Result<Self> {
        let mut meta = BTreeMap::new();
        let mut samples = Vec::new();
        let mut in_body = false;
        for (idx, line) in input.lines().enumerate() {
            let lineno = idx + 1;
            let line = line?;
            let trimmed = line.trim();
            if trimmed.is_empty() {
                continue;
            }
            if let Some(rest) = trimmed.strip_prefix('#') {
                if in_body {
                    return Err(format_err(lineno, "header line after body"));
                }
                let (key, value) = rest
                    .trim()
                    .split_once('=')
                    .ok_or_else(|| format_err(lineno, "header line is not key=value"))?;
                if meta
                    .insert(key.trim().to_string(), (value.trim().to_string(), lineno))
                    .is_some()
                {
                    return Err(format_err(lineno, format!("duplicate header key `{}`", key.trim())));
                }
                continue;
            }
            in_body = true;
            samples.push(parse_body_line(trimmed, lineno)?);
        }

        let header = parse_header(&meta)?;
        let n_vacuum = samples.iter().filter(|s| s.source == Source::VacuumRun).count();
        let n_fock = samples.len() - n_vacuum;
        if n_vacuum != header.n_vacuum || n_fock != header.n_fock {
            return Err(Error::Format {
                line: 0,
                message: format!(
                    "header declares {} vacuum and {} Fock samples, body has {} and {}",
                    header.n_vacuum, header.n_fock, n_vacuum, n_fock
                ),
            });
        }
        Ok(Self { header, samples })
    }
}

fn format_err(line: usize, message: impl Into<String>) -> Error {
    Error::Format {
        line,
        message: message.into(),
    }
}

fn parse_body_line(line: &str, lineno: usize) -> Result<QuadratureSample> {
    let mut fields = line.split_whitespace();
    let (Some(src), Some(phase), Some(raw), None) = (fields.next(), fields.next(), fields.next(), fields.next()) else {
        return Err(format_err(lineno, "expected `source phase raw_value`"));
    };
    let source = Source::from_code(src).ok_or_else(|| format_err(lineno, format!("unknown source `{src}`")))?;
    let phase: f64 = phase
        .parse()
        .map_err(|_| format_err(lineno, format!("bad phase `{phase}`")))?;
    if !(0.0..std::f64::consts::TAU).contains(&phase) {
        return Err(format_err(lineno, format!("phase {phase} outside [0, 2π)")));
    }
    let raw_value: f64 = raw
        .parse()
        .map_err(|_| format_err(lineno, format!("bad raw value `{raw}`")))?;
    if !raw_value.is_finite() {
        return Err(format_err(lineno, "raw value is not finite"));
    }
    Ok(QuadratureSample {
        source,
        phase,
        raw_value,
    })
}

fn parse_header(meta: &BTreeMap<String, (String, usize)>) -> Result<DatasetHeader> {
    fn field<T: FromStr>(meta: &BTreeMap<String, (String, usize)>, key: &str) -> Result<T> {
        let (value, line) = meta
            .get(key)
            .ok_or_else(|| format_err(0, format!("missing header key `{key}`")))?;
        value
            .parse()
            .map_err(|_| format_err(*line, format!("bad value `{value}` for `{key}`")))
    }

    let format: String = field(meta, "format")?;
    if format != FORMAT_NAME {
        return Err(format_err(meta["format"].1, format!("unknown format `{format}`")));
    }
    let version: u32 = field(meta, "version")?;
    if version != FORMAT_VERSION {
        return Err(Error::VersionMismatch {
            expected: FORMAT_VERSION.to_string(),
            found: version.to_string(),
        });
    }
    let header = DatasetHeader {
        version,
        seed: field(meta, "seed")?,
        eta_true: field(meta, "eta_true")?,
        scale: field(meta, "scale")?,
        offset: field(meta, "offset")?,
        dark_fraction: field(meta, "dark_fraction")?,
        n_vacuum: field(meta, "n_vacuum")?,
        n_fock: field(meta, "n_fock")?,
        rng: field(meta, "rng")?,
    };
    crate::error::check_unit_interval("eta_true", header.eta_true)?;
    crate::simulator::DetectorModel::new(header.scale, header.offset, header.dark_fraction)?;
    Ok(header)
}
