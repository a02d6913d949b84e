//! Number-embedding corpora and their JSON interchange file.
//!
//! A corpus holds, for one model, the hidden state of every transformer layer for each
//! of the 27 inputs `one..nine`, `One..Nine` and `1..9`. `layers[0]` is the output of the
//! first block; the input-embedding layer is not stored.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

/// The numbers under study.
pub const NUMBERS: std::ops::RangeInclusive<u8> = 1..=9;

const LOWERCASE_WORDS: [&str; 9] = [
    "one", "two", "three", "four", "five", "six", "seven", "eight", "nine",
];
const MIXEDCASE_WORDS: [&str; 9] = [
    "One", "Two", "Three", "Four", "Five", "Six", "Seven", "Eight", "Nine",
];
const DIGITS: [&str; 9] = ["1", "2", "3", "4", "5", "6", "7", "8", "9"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NumberFormat {
    LowercaseWord,
    MixedcaseWord,
    Digit,
}

impl NumberFormat {
    pub const ALL: [NumberFormat; 3] = [
        NumberFormat::LowercaseWord,
        NumberFormat::MixedcaseWord,
        NumberFormat::Digit,
    ];

    /// Interchange-file name of the format.
    pub fn as_str(self) -> &'static str {
        match self {
            NumberFormat::LowercaseWord => "lowercase_word",
            NumberFormat::MixedcaseWord => "mixedcase_word",
            NumberFormat::Digit => "digit",
        }
    }

    /// Column heading used in tables.
    pub fn short_label(self) -> &'static str {
        match self {
            NumberFormat::LowercaseWord => "LC",
            NumberFormat::MixedcaseWord => "MC",
            NumberFormat::Digit => "Digits",
        }
    }

    /// Canonical input string for `number` (1..=9).
    pub fn token(self, number: u8) -> &'static str {
        let table = match self {
            NumberFormat::LowercaseWord => &LOWERCASE_WORDS,
            NumberFormat::MixedcaseWord => &MIXEDCASE_WORDS,
            NumberFormat::Digit => &DIGITS,
        };
        table[usize::from(number) - 1]
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|f| f.as_str() == s)
    }
}

impl fmt::Display for NumberFormat {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingEntry {
    pub format: NumberFormat,
    pub number: u8,
    pub token_string: String,
    /// One vector per layer, `num_layers` x `hidden_size`.
    pub layers: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingCorpus {
    pub schema_version: u32,
    pub model_id: String,
    pub variant_label: String,
    pub num_layers: usize,
    pub hidden_size: usize,
    pub entries: Vec<EmbeddingEntry>,
}

impl EmbeddingCorpus {
    /// Checks every corpus invariant and reports the first violation.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        if self.num_layers == 0 {
            return Err(Error::validation("num_layers must be positive"));
        }
        if self.hidden_size == 0 {
            return Err(Error::validation("hidden_size must be positive"));
        }

        let mut seen = [[false; 9]; 3];
        for entry in &self.entries {
            let tag = format!("({},{})", entry.format, entry.number);
            if !NUMBERS.contains(&entry.number) {
                return Err(Error::validation(format!(
                    "number {} out of range 1..=9 in {tag}",
                    entry.number
                )));
            }
            let slot = &mut seen[format_index(entry.format)][usize::from(entry.number) - 1];
            if *slot {
                return Err(Error::validation(format!("duplicate {tag}")));
            }
            *slot = true;

            if entry.layers.len() != self.num_layers {
                return Err(Error::validation(format!(
                    "ragged dimension: {tag} has {} layers, expected {}",
                    entry.layers.len(),
                    self.num_layers
                )));
            }
            for (layer, v) in entry.layers.iter().enumerate() {
                if v.len() != self.hidden_size {
                    return Err(Error::validation(format!(
                        "ragged dimension: {tag} layer {layer} has {} components, expected {}",
                        v.len(),
                        self.hidden_size
                    )));
                }
                if let Some(i) = v.iter().position(|x| !x.is_finite()) {
                    return Err(Error::validation(format!(
                        "non-finite value in {tag} layer {layer} component {i}"
                    )));
                }
                if v.iter().all(|&x| x == 0.0) {
                    return Err(Error::validation(format!(
                        "zero vector in {tag} layer {layer}"
                    )));
                }
            }
        }

        for format in NumberFormat::ALL {
            for number in NUMBERS {
                if !seen[format_index(format)][usize::from(number) - 1] {
                    return Err(Error::validation(format!("missing ({format},{number})")));
                }
            }
        }
        Ok(())
    }

    pub fn entry(&self, format: NumberFormat, number: u8) -> Option<&EmbeddingEntry> {
        self.entries
            .iter()
            .find(|e| e.format == format && e.number == number)
    }

    /// The nine vectors of one (layer, format) slice, ordered by number.
    pub fn slice(&self, layer: usize, format: NumberFormat) -> Result<Vec<&[f64]>> {
        if layer >= self.num_layers {
            return Err(Error::validation(format!(
                "layer index {layer} out of range (corpus has {} layers)",
                self.num_layers
            )));
        }
        NUMBERS
            .map(|n| {
                self.entry(format, n)
                    .map(|e| e.layers[layer].as_slice())
                    .ok_or_else(|| Error::validation(format!("missing ({format},{n})")))
            })
            .collect()
    }

    /// True when the two formats carry the same embeddings to within `tol` per component,
    /// as happens for uncased tokenizers.
    pub fn formats_identical(&self, a: NumberFormat, b: NumberFormat, tol: f64) -> bool {
        NUMBERS
            .into_iter()
            .all(|n| match (self.entry(a, n), self.entry(b, n)) {
                (Some(x), Some(y)) => x.layers.iter().zip(&y.layers).all(|(u, v)| {
                    u.len() == v.len() && u.iter().zip(v).all(|(p, q)| (p - q).abs() < tol)
                }),
                _ => false,
            })
    }

    /// Display label combining model id and variant.
    pub fn label(&self) -> String {
        if self.variant_label.is_empty() {
            self.model_id.clone()
        } else {
            format!("{}-{}", self.model_id, self.variant_label)
        }
    }
}

fn format_index(format: NumberFormat) -> usize {
    match format {
        NumberFormat::LowercaseWord => 0,
        NumberFormat::MixedcaseWord => 1,
        NumberFormat::Digit => 2,
    }
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|ext| ext == "gz")
}

/// Reads and validates an interchange file. Files ending in `.gz` are decompressed.
pub fn load_corpus(path: impl AsRef<Path>) -> Result<EmbeddingCorpus> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut text = String::new();
    let read = if is_gzip(path) {
        GzDecoder::new(file).read_to_string(&mut text)
    } else {
        BufReader::new(file).read_to_string(&mut text)
    };
    read.map_err(|e| match e.kind() {
        std::io::ErrorKind::InvalidData => Error::Parse(format!("{}: {e}", path.display())),
        _ => Error::io(path, e),
    })?;
    let corpus = parse_corpus(&text)?;
    Ok(corpus)
}

/// Parses and validates an interchange document held in memory.
pub fn parse_corpus(text: &str) -> Result<EmbeddingCorpus> {
    let corpus: EmbeddingCorpus =
        serde_json::from_str(text).map_err(|e| Error::Parse(e.to_string()))?;
    corpus.validate()?;
    Ok(corpus)
}

/// Writes the corpus as pretty-printed JSON (gzip when the path ends in `.gz`).
///
/// Floats are written in shortest round-trip form, so a reload reproduces every
/// component exactly.
pub fn save_corpus(corpus: &EmbeddingCorpus, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    corpus.validate()?;
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let result = if is_gzip(path) {
        let mut enc = GzEncoder::new(BufWriter::new(file), Compression::default());
        write_json(&mut enc, corpus).and_then(|_| enc.finish().map(drop))
    } else {
        let mut w = BufWriter::new(file);
        write_json(&mut w, corpus).and_then(|_| w.flush())
    };
    result.map_err(|e| Error::io(path, e))
}

fn write_json<W: Write>(w: &mut W, corpus: &EmbeddingCorpus) -> std::io::Result<()> {
    serde_json::to_writer_pretty(&mut *w, corpus)?;
    w.write_all(b"\n")
}
