//! Fixtures shared by the pipeline benchmarks.

use mnl_core::simspace::{pair_similarities, DissimilarityMatrix};
use mnl_core::synth::{generate, SynthSpec};
use mnl_core::{EmbeddingCorpus, NumberFormat, NumberPair};

/// A 12-layer noisy corpus in which every (layer, format) cell differs.
pub fn noisy_corpus(hidden_size: usize) -> EmbeddingCorpus {
    generate(&SynthSpec {
        grid_size: hidden_size,
        noise_amplitude: 0.02,
        formats_identical: false,
        ..Default::default()
    })
    .expect("valid synthetic spec")
}

/// The 36 (ratio, normalized similarity) points of one cell.
pub fn ratio_points(corpus: &EmbeddingCorpus) -> Vec<(f64, f64)> {
    let sims = pair_similarities(corpus, 0, NumberFormat::Digit).expect("layer 0 exists");
    NumberPair::ALL
        .iter()
        .map(|&p| (p.ratio(), sims.normalized(p)))
        .collect()
}

pub fn dissimilarities(corpus: &EmbeddingCorpus) -> DissimilarityMatrix {
    let sims = pair_similarities(corpus, 0, NumberFormat::Digit).expect("layer 0 exists");
    DissimilarityMatrix::from_similarities(&sims)
}
