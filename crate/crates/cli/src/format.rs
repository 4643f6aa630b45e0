//! File formats: ratio files, density tables and the provenance header shared
//! by every output.
//!
//! Reals are written with 17 significant digits (`{:.16e}`) so that parsing
//! recovers the exact double.

use std::fmt::Write as _;

use ratio_rmt_core::ensemble::{RatioSample, RatioSource};
use ratio_rmt_core::spectra::TripleSelectionMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const TOOL: &str = "ratio-rmt";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

/// Exact textual form of a double.
pub fn real(x: f64) -> String {
    format!("{x:.16e}")
}

pub fn sha256_hex(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
}

/// Where an output came from. `spec` is a canonical description of every
/// setting that influences the numbers; `spec_hash` is its SHA-256.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: Option<u64>,
    pub spec: String,
    pub spec_hash: String,
}

impl Provenance {
    pub fn new(command: &str, seed: Option<u64>, spec: String) -> Self {
        Self {
            tool: TOOL.into(),
            version: VERSION.into(),
            command: command.into(),
            seed,
            spec_hash: sha256_hex(&spec),
            spec,
        }
    }

    pub fn header(&self) -> String {
        let mut s = format!("# {} {}\n# command: {}\n", self.tool, self.version, self.command);
        if let Some(seed) = self.seed {
            let _ = writeln!(s, "# seed: {seed}");
        }
        let _ = writeln!(s, "# spec: {}\n# spec-hash: {}", self.spec, self.spec_hash);
        s
    }
}

pub fn mode_name(mode: TripleSelectionMode) -> &'static str {
    match mode {
        TripleSelectionMode::CenteredOnly => "centered",
        TripleSelectionMode::AllAdjacent => "all-adjacent",
    }
}

fn source_line(source: &RatioSource) -> String {
    match source {
        RatioSource::Ensemble { k } => format!("ensemble k={}", real(*k)),
        RatioSource::Spectrum { label, .. } => format!("spectrum {label}"),
        RatioSource::External { label } => format!("external {label}"),
    }
}

/// Ratios file: metadata as `#` lines, then one ratio per line.
pub fn ratios_csv(sample: &RatioSample, prov: &Provenance) -> String {
    let meta = &sample.meta;
    let mut s = prov.header();
    match meta.class {
        Some(c) => {
            let _ = writeln!(s, "# beta: {}", c.beta());
        }
        None => s.push_str("# beta: unknown\n"),
    }
    let _ = writeln!(s, "# source: {}", source_line(&meta.source));
    if let RatioSource::Spectrum { mode, threshold, .. } = &meta.source {
        let _ = writeln!(s, "# mode: {}", mode_name(*mode));
        match threshold {
            Some(t) => {
                let _ = writeln!(s, "# entropy-threshold: {}", real(*t));
            }
            None => s.push_str("# entropy-threshold: none\n"),
        }
    }
    let _ = writeln!(
        s,
        "# count: {}\n# requested: {}\n# discarded: {}",
        sample.len(),
        meta.n_requested,
        meta.n_discarded
    );
    s.reserve(sample.len() * 24);
    for &r in &sample.ratios {
        s.push_str(&real(r));
        s.push('\n');
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioFile {
    pub provenance: Provenance,
    pub sample: RatioSample,
}

pub fn ratios_json(sample: &RatioSample, prov: &Provenance) -> String {
    let file = RatioFile { provenance: prov.clone(), sample: sample.clone() };
    serde_json::to_string_pretty(&file).expect("ratio samples serialize") + "\n"
}

/// Ratios from either ratio-file format. Text files may mix blank lines and
/// `#` comments with one decimal per line.
pub fn parse_ratios(text: &str) -> Result<Vec<f64>, CliError> {
    if text.trim_start().starts_with('{') {
        let file: RatioFile =
            serde_json::from_str(text).map_err(|e| CliError::Parse(format!("ratio JSON: {e}")))?;
        return Ok(file.sample.ratios);
    }
    let mut out = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let v: f64 = line
            .parse()
            .map_err(|_| CliError::Parse(format!("line {}: `{line}` is not a number", i + 1)))?;
        if !(v.is_finite() && v >= 0.0) {
            return Err(CliError::Parse(format!("line {}: ratio must be finite and nonnegative", i + 1)));
        }
        out.push(v);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PdfRow {
    pub r: f64,
    pub pdf: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizationRow {
    pub mass: f64,
    pub abs_err: f64,
}

/// A tabulated density; `normalization` is the total mass of the density
/// on `[0, inf)`, not of the table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdfTable {
    pub provenance: Provenance,
    pub beta: u8,
    pub k: f64,
    pub rows: Vec<PdfRow>,
    pub normalization: NormalizationRow,
}

impl PdfTable {
    pub fn csv(&self) -> String {
        let mut s = self.provenance.header();
        let _ = writeln!(s, "# beta: {}\n# k: {}", self.beta, real(self.k));
        s.push_str("r,pdf\n");
        for row in &self.rows {
            let _ = writeln!(s, "{},{}", real(row.r), real(row.pdf));
        }
        let _ = writeln!(
            s,
            "# normalization: {} +- {}",
            real(self.normalization.mass),
            real(self.normalization.abs_err)
        );
        s
    }

    pub fn json(&self) -> String {
        serde_json::to_string_pretty(self).expect("tables serialize") + "\n"
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use ratio_rmt_core::ensemble::{RatioMeta, SymmetryClass};

    #[test]
    fn reals_round_trip() {
        for x in [0.1, 1.0 / 3.0, 2.5e-300, 6.02214076e23, 0.0] {
            let s = real(x);
            assert_eq!(s.parse::<f64>().unwrap(), x);
        }
        assert_eq!(real(0.5), "5.0000000000000000e-1");
    }

    #[test]
    fn hash_is_sha256() {
        assert_eq!(sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn ratio_files_round_trip() {
        let sample = RatioSample {
            ratios: vec![0.25, 1.0 / 7.0, 3.5],
            meta: RatioMeta {
                class: Some(SymmetryClass::Unitary),
                source: RatioSource::Ensemble { k: 0.5 },
                seed: Some(3),
                n_requested: 3,
                n_discarded: 0,
            },
        };
        let prov = Provenance::new("simulate", Some(3), "x".into());
        assert_eq!(parse_ratios(&ratios_csv(&sample, &prov)).unwrap(), sample.ratios);
        assert_eq!(parse_ratios(&ratios_json(&sample, &prov)).unwrap(), sample.ratios);
        assert!(matches!(parse_ratios("0.5\nabc\n"), Err(CliError::Parse(m)) if m.starts_with("line 2")));
        assert!(parse_ratios("-1\n").is_err());
        assert_eq!(parse_ratios("# nothing\n\n").unwrap(), Vec::<f64>::new());
    }
}
