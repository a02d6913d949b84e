//! Synthetic corpora with a known latent number line.
//!
//! Each number `n` sits at a position `p_n`. Its embedding is a bank of Gaussian tuning
//! curves `v_n[i] = exp(-(g_i - p_n)² / (2σ²))` over `grid_size` centers `g_i`, spread
//! evenly on `[min p - 3σ, max p + 3σ]`. Cosine similarity between two numbers then
//! decays monotonically with `|p_x - p_y|`.
//!
//! Noise is `noise_amplitude * u` with `u` uniform on [-1, 1). `u` comes from ChaCha8
//! seeded with `seed_from_u64(seed)`, taking `(next_u64() >> 11) * 2^-53` mapped to
//! `2x - 1`. Draw order is number, then grid index. Without `formats_identical`, each
//! (layer, format) cell draws its own block in (layer, format) order.

use nalgebra::{Cholesky, DMatrix};
use rand_chacha::rand_core::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingCorpus, EmbeddingEntry, NumberFormat, NUMBERS, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::simspace::NumberPair;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PositionModel {
    Log10,
    Linear,
    Custom(Vec<f64>),
}

impl PositionModel {
    pub fn positions(&self) -> Vec<f64> {
        match self {
            PositionModel::Log10 => NUMBERS.map(|n| f64::from(n).log10()).collect(),
            PositionModel::Linear => NUMBERS.map(f64::from).collect(),
            PositionModel::Custom(p) => p.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthSpec {
    pub position_model: PositionModel,
    pub tuning_sigma: f64,
    pub grid_size: usize,
    pub noise_amplitude: f64,
    pub seed: u64,
    pub num_layers: usize,
    pub formats_identical: bool,
    pub model_id: String,
    pub variant_label: String,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            position_model: PositionModel::Log10,
            tuning_sigma: 0.15,
            grid_size: 64,
            noise_amplitude: 0.0,
            seed: 7,
            num_layers: 12,
            formats_identical: true,
            model_id: "synthetic".into(),
            variant_label: "log10".into(),
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.tuning_sigma.is_finite() && self.tuning_sigma > 0.0) {
            return Err(Error::validation(format!(
                "tuning sigma must be positive, got {}",
                self.tuning_sigma
            )));
        }
        if self.grid_size < 16 {
            return Err(Error::validation(format!(
                "grid size must be at least 16, got {}",
                self.grid_size
            )));
        }
        if !(self.noise_amplitude.is_finite() && self.noise_amplitude >= 0.0) {
            return Err(Error::validation(
                "noise amplitude must be finite and non-negative",
            ));
        }
        if self.num_layers == 0 {
            return Err(Error::validation("num_layers must be positive"));
        }
        if let PositionModel::Custom(p) = &self.position_model {
            if p.len() != 9 {
                return Err(Error::validation(format!(
                    "custom positions need 9 values, got {}",
                    p.len()
                )));
            }
            if p.iter().any(|v| !v.is_finite()) || p.windows(2).any(|w| w[0] >= w[1]) {
                return Err(Error::validation(
                    "custom positions must be finite and strictly increasing",
                ));
            }
        }
        Ok(())
    }
}

/// Uniform noise stream on [-1, 1).
struct Noise(ChaCha8Rng);

impl Noise {
    fn new(seed: u64) -> Self {
        Noise(ChaCha8Rng::seed_from_u64(seed))
    }

    fn next(&mut self) -> f64 {
        let unit = (self.0.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        2.0 * unit - 1.0
    }

    fn block(&mut self, rows: usize, cols: usize) -> Vec<Vec<f64>> {
        (0..rows)
            .map(|_| (0..cols).map(|_| self.next()).collect())
            .collect()
    }
}

/// Noiseless tuning-curve vectors for the nine positions.
pub fn tuning_vectors(positions: &[f64], sigma: f64, grid_size: usize) -> Vec<Vec<f64>> {
    let lo = positions.iter().copied().fold(f64::INFINITY, f64::min) - 3.0 * sigma;
    let hi = positions.iter().copied().fold(f64::NEG_INFINITY, f64::max) + 3.0 * sigma;
    let step = (hi - lo) / (grid_size - 1) as f64;
    positions
        .iter()
        .map(|&p| {
            (0..grid_size)
                .map(|i| {
                    let g = lo + step * i as f64;
                    (-(g - p).powi(2) / (2.0 * sigma * sigma)).exp()
                })
                .collect()
        })
        .collect()
}

fn add_noise(base: &[Vec<f64>], noise: &[Vec<f64>], amplitude: f64) -> Vec<Vec<f64>> {
    base.iter()
        .zip(noise)
        .map(|(v, u)| v.iter().zip(u).map(|(x, e)| x + amplitude * e).collect())
        .collect()
}

fn assemble(
    model_id: &str,
    variant_label: &str,
    num_layers: usize,
    hidden_size: usize,
    cell: impl Fn(usize, NumberFormat) -> Vec<Vec<f64>>,
) -> Result<EmbeddingCorpus> {
    let cells: Vec<Vec<Vec<Vec<f64>>>> = (0..num_layers)
        .map(|layer| NumberFormat::ALL.iter().map(|&f| cell(layer, f)).collect())
        .collect();
    let mut entries = Vec::with_capacity(27);
    for (fi, format) in NumberFormat::ALL.into_iter().enumerate() {
        for n in NUMBERS {
            let layers = (0..num_layers)
                .map(|l| cells[l][fi][usize::from(n) - 1].clone())
                .collect();
            entries.push(EmbeddingEntry {
                format,
                number: n,
                token_string: format.token(n).to_string(),
                layers,
            });
        }
    }
    let corpus = EmbeddingCorpus {
        schema_version: SCHEMA_VERSION,
        model_id: model_id.to_string(),
        variant_label: variant_label.to_string(),
        num_layers,
        hidden_size,
        entries,
    };
    corpus.validate()?;
    Ok(corpus)
}

/// Builds the tuning-curve corpus described by `spec`. Identical specs yield identical
/// corpora.
pub fn generate(spec: &SynthSpec) -> Result<EmbeddingCorpus> {
    spec.validate()?;
    let base = tuning_vectors(
        &spec.position_model.positions(),
        spec.tuning_sigma,
        spec.grid_size,
    );
    let d = spec.grid_size;
    let amp = spec.noise_amplitude;

    let cells: Vec<Vec<Vec<f64>>> = if amp == 0.0 {
        vec![base.clone()]
    } else {
        let mut noise = Noise::new(spec.seed);
        if spec.formats_identical {
            vec![add_noise(&base, &noise.block(9, d), amp)]
        } else {
            (0..spec.num_layers * 3)
                .map(|_| add_noise(&base, &noise.block(9, d), amp))
                .collect()
        }
    };
    assemble(
        &spec.model_id,
        &spec.variant_label,
        spec.num_layers,
        d,
        |layer, format| {
            if cells.len() == 1 {
                cells[0].clone()
            } else {
                let fi = NumberFormat::ALL
                    .iter()
                    .position(|&f| f == format)
                    .unwrap_or(0);
                cells[layer * 3 + fi].clone()
            }
        },
    )
}

/// Corpus whose cosine similarities equal `similarity(pair)` exactly, in every layer and
/// format.
///
/// The Gram matrix (unit diagonal) is Cholesky-factored; row `n` of the factor becomes
/// the vector for number `n`, zero-padded to `hidden_size`. Fails if the target is not
/// positive definite.
pub fn from_similarity(
    similarity: impl Fn(NumberPair) -> f64,
    hidden_size: usize,
    num_layers: usize,
    model_id: &str,
) -> Result<EmbeddingCorpus> {
    if hidden_size < 9 {
        return Err(Error::validation("hidden_size must be at least 9"));
    }
    let mut gram = DMatrix::<f64>::identity(9, 9);
    for pair in NumberPair::ALL {
        let (i, j) = (usize::from(pair.lo) - 1, usize::from(pair.hi) - 1);
        let s = similarity(pair);
        gram[(i, j)] = s;
        gram[(j, i)] = s;
    }
    let chol = Cholesky::new(gram)
        .ok_or_else(|| Error::validation("target similarity matrix is not positive definite"))?;
    let l = chol.l();
    let vectors: Vec<Vec<f64>> = (0..9)
        .map(|i| {
            (0..hidden_size)
                .map(|j| if j < 9 { l[(i, j)] } else { 0.0 })
                .collect()
        })
        .collect();
    assemble(model_id, "similarity", num_layers, hidden_size, |_, _| {
        vectors.clone()
    })
}
