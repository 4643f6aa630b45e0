//! g-l spacing ratios from externally computed spectra.
//!
//! Level files are UTF-8 text with a header line naming the columns,
//! `energy[,entropy][,localized]`, followed by one comma-separated record per
//! level. Lines starting with `#` are comments, except the directive
//! `# entropy-threshold=<value>` that records how the localized flags were
//! derived.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use crate::ensemble::{RatioMeta, RatioSample, RatioSource};

/// Relative tolerance under which two energies count as the same level.
pub const DUPLICATE_TOLERANCE: f64 = 1e-12;
/// Lower spacings below this fraction of the local mean spacing are
/// discarded as degenerate.
pub const DEGENERACY_FRACTION: f64 = 1e-10;
/// Number of levels in the window for the local mean spacing.
pub const MEAN_SPACING_WINDOW: usize = 21;

const THRESHOLD_DIRECTIVE: &str = "entropy-threshold=";

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectraError {
    #[error("no levels in input")]
    Empty,
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("lines {first} and {second}: duplicate energy {energy}")]
    Duplicate { first: usize, second: usize, energy: f64 },
    #[error("no entropy column to derive localized flags from")]
    MissingEntropy,
    #[error("levels carry no localized flags; tag them by entropy first")]
    MissingFlags,
    #[error("need at least 3 levels, got {0}")]
    TooFewLevels(usize),
    #[error("no localized level away from the ends of the spectrum")]
    NoInteriorLocalized,
    #[error("entropy threshold must be finite, got {0}")]
    Threshold(f64),
}

/// Which consecutive triples contribute a ratio.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum TripleSelectionMode {
    /// Triples whose middle level is localized.
    CenteredOnly,
    /// Every triple with at least one localized member, each once.
    #[default]
    AllAdjacent,
}

/// An ascending spectrum with optional entropies and localized flags.
#[derive(Debug, Clone, PartialEq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LevelSequence {
    pub energies: Vec<f64>,
    pub entropy: Option<Vec<f64>>,
    pub localized: Option<Vec<bool>>,
    /// Entropy cutoff the flags were derived with, if any.
    pub threshold: Option<f64>,
}

impl LevelSequence {
    pub fn len(&self) -> usize {
        self.energies.len()
    }

    pub fn is_empty(&self) -> bool {
        self.energies.is_empty()
    }

    pub fn localized_count(&self) -> usize {
        self.localized.as_ref().map_or(0, |f| f.iter().filter(|&&b| b).count())
    }

    pub fn localized_fraction(&self) -> f64 {
        if self.is_empty() {
            0.0
        } else {
            self.localized_count() as f64 / self.len() as f64
        }
    }

    /// Text in the level-file format; [`parse_level_text`] reads it back
    /// unchanged.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(t) = self.threshold {
            out.push_str(&format!("# {THRESHOLD_DIRECTIVE}{t}\n"));
        }
        out.push_str("energy");
        if self.entropy.is_some() {
            out.push_str(",entropy");
        }
        if self.localized.is_some() {
            out.push_str(",localized");
        }
        out.push('\n');
        for i in 0..self.len() {
            out.push_str(&self.energies[i].to_string());
            if let Some(s) = &self.entropy {
                out.push(',');
                out.push_str(&s[i].to_string());
            }
            if let Some(f) = &self.localized {
                out.push_str(if f[i] { ",1" } else { ",0" });
            }
            out.push('\n');
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Column {
    Energy,
    Entropy,
    Localized,
}

#[derive(Debug, Clone, Copy)]
struct Row {
    line: usize,
    energy: f64,
    entropy: f64,
    localized: bool,
}

/// Line-by-line reader for level files.
#[derive(Debug, Default)]
pub struct LevelParser {
    line: usize,
    columns: Option<Vec<Column>>,
    rows: Vec<Row>,
    threshold: Option<f64>,
}

impl LevelParser {
    pub fn new() -> Self {
        Self::default()
    }

    fn error(&self, message: impl Into<String>) -> SpectraError {
        SpectraError::Parse { line: self.line, message: message.into() }
    }

    pub fn push_line(&mut self, raw: &str) -> Result<(), SpectraError> {
        self.line += 1;
        let line = raw.trim();
        if line.is_empty() {
            return Ok(());
        }
        if let Some(comment) = line.strip_prefix('#') {
            if let Some(v) = comment.trim().strip_prefix(THRESHOLD_DIRECTIVE) {
                let t: f64 = v.trim().parse().map_err(|_| self.error("bad entropy-threshold value"))?;
                if !t.is_finite() {
                    return Err(self.error("entropy threshold must be finite"));
                }
                self.threshold = Some(t);
            }
            return Ok(());
        }
        let Some(columns) = &self.columns else {
            let cols = parse_header(line).ok_or_else(|| {
                self.error("expected header `energy[,entropy][,localized]`")
            })?;
            self.columns = Some(cols);
            return Ok(());
        };
        let fields: Vec<&str> = line.split(',').map(str::trim).collect();
        if fields.len() != columns.len() {
            return Err(self.error(format!("expected {} fields, found {}", columns.len(), fields.len())));
        }
        let mut row = Row { line: self.line, energy: 0.0, entropy: f64::NAN, localized: false };
        for (col, field) in columns.iter().zip(&fields) {
            match col {
                Column::Energy | Column::Entropy => {
                    let v: f64 = field
                        .parse()
                        .ok()
                        .filter(|v: &f64| v.is_finite())
                        .ok_or_else(|| self.error(format!("`{field}` is not a finite number")))?;
                    if *col == Column::Energy {
                        row.energy = v;
                    } else {
                        row.entropy = v;
                    }
                }
                Column::Localized => {
                    row.localized = match *field {
                        "0" => false,
                        "1" => true,
                        _ => return Err(self.error(format!("localized flag must be 0 or 1, got `{field}`"))),
                    }
                }
            }
        }
        self.rows.push(row);
        Ok(())
    }

    pub fn finish(self) -> Result<LevelSequence, SpectraError> {
        let Some(columns) = self.columns else {
            return Err(SpectraError::Empty);
        };
        let mut rows = self.rows;
        if rows.is_empty() {
            return Err(SpectraError::Empty);
        }
        rows.sort_by(|a, b| a.energy.total_cmp(&b.energy));
        for w in rows.windows(2) {
            let scale = libm::fabs(w[0].energy).max(libm::fabs(w[1].energy));
            if w[1].energy - w[0].energy <= DUPLICATE_TOLERANCE * scale {
                let (first, second) = (w[0].line.min(w[1].line), w[0].line.max(w[1].line));
                return Err(SpectraError::Duplicate { first, second, energy: w[0].energy });
            }
        }
        let has = |c| columns.contains(&c);
        Ok(LevelSequence {
            energies: rows.iter().map(|r| r.energy).collect(),
            entropy: has(Column::Entropy).then(|| rows.iter().map(|r| r.entropy).collect()),
            localized: has(Column::Localized).then(|| rows.iter().map(|r| r.localized).collect()),
            threshold: self.threshold,
        })
    }
}

fn parse_header(line: &str) -> Option<Vec<Column>> {
    let names: Vec<&str> = line.split(',').map(str::trim).collect();
    let cols: Vec<Column> = match names.as_slice() {
        ["energy"] => alloc::vec![Column::Energy],
        ["energy", "entropy"] => alloc::vec![Column::Energy, Column::Entropy],
        ["energy", "localized"] => alloc::vec![Column::Energy, Column::Localized],
        ["energy", "entropy", "localized"] => alloc::vec![Column::Energy, Column::Entropy, Column::Localized],
        _ => return None,
    };
    Some(cols)
}

/// Parse a whole level file held in memory.
pub fn parse_level_text(text: &str) -> Result<LevelSequence, SpectraError> {
    let mut p = LevelParser::new();
    for line in text.lines() {
        p.push_line(line)?;
    }
    p.finish()
}

/// Flag levels with entropy `<= threshold` as localized.
pub fn tag_localized(seq: &LevelSequence, threshold: f64) -> Result<LevelSequence, SpectraError> {
    if !threshold.is_finite() {
        return Err(SpectraError::Threshold(threshold));
    }
    let entropy = seq.entropy.as_ref().ok_or(SpectraError::MissingEntropy)?;
    Ok(LevelSequence {
        localized: Some(entropy.iter().map(|&s| s <= threshold).collect()),
        threshold: Some(threshold),
        ..seq.clone()
    })
}

fn local_mean_spacing(e: &[f64], k: usize) -> f64 {
    let n = e.len();
    let w = MEAN_SPACING_WINDOW.min(n);
    let lo = k.saturating_sub(w / 2).min(n - w);
    let hi = lo + w - 1;
    (e[hi] - e[lo]) / (hi - lo) as f64
}

/// Ratios of the triples centred at `middles`, upper over lower spacing.
fn ratios_of(seq: &LevelSequence, middles: impl Iterator<Item = usize>) -> (Vec<f64>, usize, usize) {
    let e = &seq.energies;
    let (mut out, mut requested, mut discarded) = (Vec::new(), 0, 0);
    for k in middles {
        requested += 1;
        let lower = e[k] - e[k - 1];
        if !(lower >= DEGENERACY_FRACTION * local_mean_spacing(e, k)) || lower <= 0.0 {
            discarded += 1;
            continue;
        }
        out.push((e[k + 1] - e[k]) / lower);
    }
    (out, requested, discarded)
}

fn sample(seq: &LevelSequence, mode: TripleSelectionMode, ratios: (Vec<f64>, usize, usize)) -> RatioSample {
    RatioSample {
        ratios: ratios.0,
        meta: RatioMeta {
            class: None,
            source: RatioSource::Spectrum {
                label: String::from("level sequence"),
                mode,
                threshold: seq.threshold,
            },
            seed: None,
            n_requested: ratios.1,
            n_discarded: ratios.2,
        },
    }
}

/// g-l ratios: one per selected consecutive triple `(E[k-1], E[k], E[k+1])`,
/// `r = (E[k+1] - E[k]) / (E[k] - E[k-1])`.
pub fn extract_gl_ratios(seq: &LevelSequence, mode: TripleSelectionMode) -> Result<RatioSample, SpectraError> {
    let flags = seq.localized.as_ref().ok_or(SpectraError::MissingFlags)?;
    let n = seq.len();
    if n < 3 {
        return Err(SpectraError::TooFewLevels(n));
    }
    let middles = (1..n - 1).filter(|&k| match mode {
        TripleSelectionMode::CenteredOnly => flags[k],
        TripleSelectionMode::AllAdjacent => flags[k - 1] || flags[k] || flags[k + 1],
    });
    if mode == TripleSelectionMode::CenteredOnly && !(1..n - 1).any(|k| flags[k]) {
        return Err(SpectraError::NoInteriorLocalized);
    }
    Ok(sample(seq, mode, ratios_of(seq, middles)))
}

/// g-g ratios: triples with no localized member.
pub fn extract_gg_ratios(seq: &LevelSequence) -> Result<RatioSample, SpectraError> {
    let flags = seq.localized.as_ref().ok_or(SpectraError::MissingFlags)?;
    let n = seq.len();
    if n < 3 {
        return Err(SpectraError::TooFewLevels(n));
    }
    let middles = (1..n - 1).filter(|&k| !(flags[k - 1] || flags[k] || flags[k + 1]));
    Ok(sample(seq, TripleSelectionMode::AllAdjacent, ratios_of(seq, middles)))
}
