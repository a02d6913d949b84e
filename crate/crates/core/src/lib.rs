//! Analyses of number embeddings for human-like magnitude effects.
//!
//! The pipeline runs per model, layer and number format:
//!
//! 1. [`corpus`] loads the 27 number embeddings (words, capitalised words, digits for 1..9).
//! 2. [`simspace`] turns one (layer, format) slice into 36 pairwise cosine similarities.
//! 3. [`effects`] fits the distance, size and ratio effects using the curve families in [`fitting`].
//! 4. [`numberline`] recovers a one-dimensional latent number line with classical MDS and
//!    scores it against log10(1..9).
//! 5. [`pipeline`] runs every selected cell of a corpus.
//! 6. [`report`] folds the cells into layer/format/model tables and writes them out.
//!
//! [`synth`] builds corpora with a known latent number line and [`stats`] carries the
//! correlation and regression routines.

pub mod corpus;
pub mod effects;
mod error;
pub mod fitting;
pub mod numberline;
pub mod pipeline;
pub mod report;
pub mod simspace;
pub mod stats;
pub mod synth;

pub use corpus::{EmbeddingCorpus, EmbeddingEntry, NumberFormat, NUMBERS};
pub use effects::{Aggregation, EffectFit, EffectKind, EffectOptions, Fit};
pub use error::{Error, Result};
pub use fitting::{LinearFit, NegExpFit};
pub use numberline::{NumberLineSolution, SolutionSource};
pub use pipeline::{AnalysisOptions, CellResult, CorpusResults, ResultBundle};
pub use report::{EffectTable, EmitFormat};
pub use simspace::{DissimilarityMatrix, NumberPair, PairSimilaritySet};
pub use stats::RegressionReport;
pub use synth::{PositionModel, SynthSpec};
