//! The result grid: every selected effect and number line for each (layer, format) cell
//! of a corpus.

use serde::{Deserialize, Serialize};

use crate::corpus::{EmbeddingCorpus, NumberFormat};
use crate::effects::{run_effect, EffectFit, EffectKind, EffectOptions};
use crate::error::{Error, Result};
use crate::numberline::{self, NumberLineSolution, SolutionSource};
use crate::simspace::{pair_similarities, DissimilarityMatrix};

pub const BUNDLE_SCHEMA_VERSION: u32 = 1;

/// Lowercase and mixed-case entries closer than this are treated as one format.
pub const MERGE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AnalysisOptions {
    pub effects: Vec<EffectKind>,
    pub mds: bool,
    /// 0-based layer indices; `None` means every layer.
    pub layers: Option<Vec<usize>>,
    pub formats: Vec<NumberFormat>,
    pub effect_options: EffectOptions,
    pub smacof: bool,
    /// Format whose layer-averaged number line feeds the residual table.
    pub residual_format: NumberFormat,
}

impl Default for AnalysisOptions {
    fn default() -> Self {
        Self {
            effects: EffectKind::ALL.to_vec(),
            mds: true,
            layers: None,
            formats: NumberFormat::ALL.to_vec(),
            effect_options: EffectOptions::default(),
            smacof: false,
            residual_format: NumberFormat::Digit,
        }
    }
}

impl AnalysisOptions {
    pub fn validate(&self) -> Result<()> {
        if self.effects.is_empty() && !self.mds {
            return Err(Error::validation("select at least one effect or mds"));
        }
        if self.formats.is_empty() {
            return Err(Error::validation("select at least one number format"));
        }
        if matches!(&self.layers, Some(l) if l.is_empty()) {
            return Err(Error::validation("layer selection is empty"));
        }
        Ok(())
    }

    /// Selected layers for `corpus`, checked against its bounds.
    pub fn layers_for(&self, corpus: &EmbeddingCorpus) -> Result<Vec<usize>> {
        match &self.layers {
            None => Ok((0..corpus.num_layers).collect()),
            Some(layers) => {
                let mut out = layers.clone();
                out.sort_unstable();
                out.dedup();
                if let Some(&bad) = out.iter().find(|&&l| l >= corpus.num_layers) {
                    return Err(Error::validation(format!(
                        "layer {} out of range for {} (valid: 1..={})",
                        bad + 1,
                        corpus.label(),
                        corpus.num_layers
                    )));
                }
                Ok(out)
            }
        }
    }

    fn sorted_formats(&self) -> Vec<NumberFormat> {
        let mut f = self.formats.clone();
        f.sort();
        f.dedup();
        f
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub layer_index: usize,
    pub format: NumberFormat,
    pub effects: Vec<EffectFit>,
    pub numberline: Option<NumberLineSolution>,
}

impl CellResult {
    pub fn effect(&self, kind: EffectKind) -> Option<&EffectFit> {
        self.effects.iter().find(|e| e.effect_kind == kind)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusResults {
    pub model_id: String,
    pub variant_label: String,
    pub num_layers: usize,
    pub layers: Vec<usize>,
    pub formats: Vec<NumberFormat>,
    /// Lowercase and mixed-case embeddings coincide (uncased tokenizer).
    pub lowercase_mixedcase_merged: bool,
    /// Sorted by (layer, format).
    pub cells: Vec<CellResult>,
    /// Number line of the dissimilarities averaged over all selected layers and formats.
    pub aggregated: Option<NumberLineSolution>,
    /// Number line of the residual format averaged over the selected layers.
    pub residual_line: Option<NumberLineSolution>,
}

impl CorpusResults {
    pub fn cell(&self, layer_index: usize, format: NumberFormat) -> Option<&CellResult> {
        self.cells
            .iter()
            .find(|c| c.layer_index == layer_index && c.format == format)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    pub schema_version: u32,
    pub options: AnalysisOptions,
    pub corpora: Vec<CorpusResults>,
}

fn in_cell(err: Error, corpus: &EmbeddingCorpus, layer: usize, format: NumberFormat) -> Error {
    let ctx = format!("{} layer {} format {}", corpus.label(), layer + 1, format);
    match err {
        Error::Validation(m) => Error::Validation(format!("{ctx}: {m}")),
        Error::Degenerate(m) => Error::Degenerate(format!("{ctx}: {m}")),
        Error::Parse(m) => Error::Parse(format!("{ctx}: {m}")),
        other => other,
    }
}

/// All selected effects and the per-cell number line for one (layer, format).
pub fn analyze_cell(
    corpus: &EmbeddingCorpus,
    layer: usize,
    format: NumberFormat,
    opts: &AnalysisOptions,
) -> Result<CellResult> {
    let run = || -> Result<CellResult> {
        let sims = pair_similarities(corpus, layer, format)?;
        let effects = opts
            .effects
            .iter()
            .map(|&kind| run_effect(kind, &sims, &opts.effect_options))
            .collect::<Result<Vec<_>>>()?;
        let numberline = if opts.mds {
            let d = DissimilarityMatrix::from_similarities(&sims);
            Some(numberline::solve(
                &d,
                opts.smacof,
                SolutionSource::Cell {
                    layer_index: layer,
                    format,
                },
            )?)
        } else {
            None
        };
        Ok(CellResult {
            layer_index: layer,
            format,
            effects,
            numberline,
        })
    };
    run().map_err(|e| in_cell(e, corpus, layer, format))
}

/// Every (layer, format) cell of `corpus` selected by `opts`, in sorted order.
pub fn cell_keys(
    corpus: &EmbeddingCorpus,
    opts: &AnalysisOptions,
) -> Result<Vec<(usize, NumberFormat)>> {
    let layers = opts.layers_for(corpus)?;
    let formats = opts.sorted_formats();
    Ok(layers
        .iter()
        .flat_map(|&l| formats.iter().map(move |&f| (l, f)))
        .collect())
}

/// Builds [`CorpusResults`] from already computed cells (in any order).
pub fn assemble_corpus(
    corpus: &EmbeddingCorpus,
    mut cells: Vec<CellResult>,
    opts: &AnalysisOptions,
) -> Result<CorpusResults> {
    let layers = opts.layers_for(corpus)?;
    let formats = opts.sorted_formats();
    cells.sort_by_key(|c| (c.layer_index, c.format));

    let (aggregated, residual_line) = if opts.mds {
        let mean_over = |fs: &[NumberFormat]| -> Result<NumberLineSolution> {
            let mut mats = Vec::new();
            for &l in &layers {
                for &f in fs {
                    mats.push(DissimilarityMatrix::from_similarities(&pair_similarities(
                        corpus, l, f,
                    )?));
                }
            }
            let d = DissimilarityMatrix::mean(&mats)?;
            numberline::solve(
                &d,
                opts.smacof,
                SolutionSource::Aggregated {
                    formats: fs.to_vec(),
                },
            )
        };
        let ctx = |e: Error, what: &str| match e {
            Error::Degenerate(m) => Error::Degenerate(format!("{} {what}: {m}", corpus.label())),
            other => other,
        };
        let aggregated = mean_over(&formats).map_err(|e| ctx(e, "aggregated number line"))?;
        let residual = if formats.contains(&opts.residual_format) {
            Some(mean_over(&[opts.residual_format]).map_err(|e| ctx(e, "residual number line"))?)
        } else {
            None
        };
        (Some(aggregated), residual)
    } else {
        (None, None)
    };

    Ok(CorpusResults {
        model_id: corpus.model_id.clone(),
        variant_label: corpus.variant_label.clone(),
        num_layers: corpus.num_layers,
        lowercase_mixedcase_merged: formats.contains(&NumberFormat::LowercaseWord)
            && formats.contains(&NumberFormat::MixedcaseWord)
            && corpus.formats_identical(
                NumberFormat::LowercaseWord,
                NumberFormat::MixedcaseWord,
                MERGE_TOLERANCE,
            ),
        layers,
        formats,
        cells,
        aggregated,
        residual_line,
    })
}

/// Serial analysis of one corpus.
pub fn analyze_corpus(corpus: &EmbeddingCorpus, opts: &AnalysisOptions) -> Result<CorpusResults> {
    opts.validate()?;
    let cells = cell_keys(corpus, opts)?
        .into_iter()
        .map(|(l, f)| analyze_cell(corpus, l, f, opts))
        .collect::<Result<Vec<_>>>()?;
    assemble_corpus(corpus, cells, opts)
}

/// Reads a `results.json` bundle written by the report emitter.
pub fn load_bundle(path: impl AsRef<std::path::Path>) -> Result<ResultBundle> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let bundle: ResultBundle = serde_json::from_str(&text)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))?;
    if bundle.schema_version != BUNDLE_SCHEMA_VERSION {
        return Err(Error::validation(format!(
            "{}: unsupported bundle schema version {}",
            path.display(),
            bundle.schema_version
        )));
    }
    Ok(bundle)
}
