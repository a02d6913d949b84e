//! Layer, format and model tables over a result grid, plus plot data, written as CSV,
//! Markdown or JSON.
//!
//! Output is a pure function of the results: corpora are ordered by (model id,
//! variant), cells by (layer, format), and floats use shortest round-trip formatting
//! (Markdown rounds to three decimals).

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus::NumberFormat;
use crate::effects::{EffectKind, Fit};
use crate::error::{Error, Result};
use crate::numberline::log_targets;
use crate::pipeline::{CellResult, CorpusResults};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TableAxis {
    ByLayer,
    ByFormat,
    ByModel,
}

impl TableAxis {
    pub fn as_str(self) -> &'static str {
        match self {
            TableAxis::ByLayer => "by_layer",
            TableAxis::ByFormat => "by_format",
            TableAxis::ByModel => "by_model",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    RSquared,
    Correlation,
    Residual,
    Mixed,
}

impl Metric {
    pub fn label(self) -> &'static str {
        match self {
            Metric::RSquared => "R²",
            Metric::Correlation => "correlation with log10",
            Metric::Residual => "|position - log10 n|",
            Metric::Mixed => "R² and correlation",
        }
    }
}

/// A per-cell quantity aggregated into tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Quantity {
    Effect(EffectKind),
    MdsCorrelation,
}

impl Quantity {
    pub fn name(self) -> &'static str {
        match self {
            Quantity::Effect(k) => k.as_str(),
            Quantity::MdsCorrelation => "mds",
        }
    }

    fn metric(self) -> Metric {
        match self {
            Quantity::Effect(_) => Metric::RSquared,
            Quantity::MdsCorrelation => Metric::Correlation,
        }
    }

    fn of(self, cell: &CellResult) -> Option<f64> {
        match self {
            Quantity::Effect(k) => cell.effect(k).map(|e| e.r_squared),
            Quantity::MdsCorrelation => cell.numberline.as_ref().map(|n| n.log_correlation),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EffectTable {
    /// Quantity name: distance, size, ratio, mds, residual or grand.
    pub name: String,
    pub axis: TableAxis,
    pub metric: Metric,
    pub row_header: String,
    pub row_labels: Vec<String>,
    pub column_labels: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    /// Mean of each row's distinct columns (merged formats count once).
    pub row_averages: Vec<Option<f64>>,
    /// Mean of each column over rows, when the table has a totals row.
    pub column_averages: Option<Vec<Option<f64>>>,
    /// Mean of the row averages.
    pub grand_average: Option<f64>,
    /// Dimensions folded into each body cell.
    pub averaged_over: Vec<String>,
    /// Rows whose lowercase and mixed-case columns are one merged value.
    pub merged_rows: Vec<bool>,
    pub notes: Vec<String>,
}

impl EffectTable {
    pub fn file_stem(&self) -> String {
        format!("{}_{}", self.name, self.axis.as_str())
    }

    pub fn cell(&self, row: &str, column: &str) -> Option<f64> {
        let r = self.row_labels.iter().position(|l| l == row)?;
        let c = self.column_labels.iter().position(|l| l == column)?;
        self.cells[r][c]
    }

    pub fn row_average(&self, row: &str) -> Option<f64> {
        let r = self.row_labels.iter().position(|l| l == row)?;
        self.row_averages[r]
    }
}

pub fn mean(values: impl IntoIterator<Item = f64>) -> Option<f64> {
    let (sum, n) = values
        .into_iter()
        .fold((0.0, 0usize), |(s, n), v| (s + v, n + 1));
    (n > 0).then(|| sum / n as f64)
}

/// Lowercase model label, non-alphanumerics replaced by '-'.
pub fn slug(label: &str) -> String {
    let s: String = label
        .chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() {
                c.to_ascii_lowercase()
            } else {
                '-'
            }
        })
        .collect();
    s.trim_matches('-').to_string()
}

/// Corpora in canonical order with their display labels. The model id is the label
/// unless two corpora share it, in which case the variant is appended.
pub fn labelled(corpora: &[CorpusResults]) -> Result<Vec<(String, &CorpusResults)>> {
    let mut sorted: Vec<&CorpusResults> = corpora.iter().collect();
    sorted.sort_by(|a, b| (&a.model_id, &a.variant_label).cmp(&(&b.model_id, &b.variant_label)));
    let mut out = Vec::with_capacity(sorted.len());
    let mut seen = BTreeSet::new();
    for c in &sorted {
        let shared = sorted.iter().filter(|o| o.model_id == c.model_id).count() > 1;
        let label = if shared && !c.variant_label.is_empty() {
            format!("{}-{}", c.model_id, c.variant_label)
        } else {
            c.model_id.clone()
        };
        if !seen.insert(label.clone()) {
            return Err(Error::validation(format!(
                "two corpora share the label {label}"
            )));
        }
        out.push((label, *c));
    }
    Ok(out)
}

fn distinct_formats(c: &CorpusResults) -> Vec<NumberFormat> {
    c.formats
        .iter()
        .copied()
        .filter(|&f| !(c.lowercase_mixedcase_merged && f == NumberFormat::MixedcaseWord))
        .collect()
}

fn check_complete(c: &CorpusResults, quantities: &[Quantity]) -> Result<()> {
    for &l in &c.layers {
        for &f in &c.formats {
            let cell = c.cell(l, f).ok_or_else(|| {
                Error::validation(format!(
                    "incomplete grid: {} has no cell for layer {} format {f}",
                    c.model_id,
                    l + 1
                ))
            })?;
            if let Some(q) = quantities.iter().find(|q| q.of(cell).is_none()) {
                return Err(Error::validation(format!(
                    "incomplete grid: {} layer {} format {f} lacks {}",
                    c.model_id,
                    l + 1,
                    q.name()
                )));
            }
        }
    }
    Ok(())
}

/// Value at one layer, averaged over the corpus's distinct formats.
fn layer_value(c: &CorpusResults, q: Quantity, layer: usize) -> Option<f64> {
    if !c.layers.contains(&layer) {
        return None;
    }
    mean(
        distinct_formats(c)
            .iter()
            .filter_map(|&f| c.cell(layer, f).and_then(|cell| q.of(cell))),
    )
}

/// Value for one format, averaged over layers.
fn format_value(c: &CorpusResults, q: Quantity, format: NumberFormat) -> Option<f64> {
    if !c.formats.contains(&format) {
        return None;
    }
    mean(
        c.layers
            .iter()
            .filter_map(|&l| c.cell(l, format).and_then(|cell| q.of(cell))),
    )
}

fn by_layer_table(q: Quantity, corpora: &[(String, &CorpusResults)]) -> EffectTable {
    let layers: BTreeSet<usize> = corpora
        .iter()
        .flat_map(|(_, c)| c.layers.iter().copied())
        .collect();
    let cells: Vec<Vec<Option<f64>>> = layers
        .iter()
        .map(|&l| corpora.iter().map(|(_, c)| layer_value(c, q, l)).collect())
        .collect();
    let row_averages = cells
        .iter()
        .map(|row| mean(row.iter().flatten().copied()))
        .collect();
    let mut notes = Vec::new();
    for (label, c) in corpora {
        if c.lowercase_mixedcase_merged {
            notes.push(format!(
                "{label}: lowercase and mixed-case inputs are identical; counted once"
            ));
        }
    }
    EffectTable {
        name: q.name().to_string(),
        axis: TableAxis::ByLayer,
        metric: q.metric(),
        row_header: "layer".into(),
        row_labels: layers.iter().map(|l| (l + 1).to_string()).collect(),
        column_labels: corpora.iter().map(|(label, _)| label.clone()).collect(),
        grand_average: None,
        row_averages,
        column_averages: None,
        averaged_over: vec!["format".into()],
        merged_rows: vec![false; layers.len()],
        notes,
        cells,
    }
}

fn by_format_table(q: Quantity, corpora: &[(String, &CorpusResults)]) -> EffectTable {
    let formats: Vec<NumberFormat> = NumberFormat::ALL
        .into_iter()
        .filter(|f| corpora.iter().any(|(_, c)| c.formats.contains(f)))
        .collect();
    let cells: Vec<Vec<Option<f64>>> = corpora
        .iter()
        .map(|(_, c)| formats.iter().map(|&f| format_value(c, q, f)).collect())
        .collect();
    let row_averages: Vec<Option<f64>> = corpora
        .iter()
        .map(|(_, c)| {
            mean(
                distinct_formats(c)
                    .iter()
                    .filter_map(|&f| format_value(c, q, f)),
            )
        })
        .collect();
    let column_averages = (0..formats.len())
        .map(|j| mean(cells.iter().filter_map(|row| row[j])))
        .collect();
    let merged_rows: Vec<bool> = corpora
        .iter()
        .map(|(_, c)| c.lowercase_mixedcase_merged)
        .collect();
    let notes = corpora
        .iter()
        .filter(|(_, c)| c.lowercase_mixedcase_merged)
        .map(|(label, _)| format!("{label}: LC and MC merged (identical embeddings)"))
        .collect();
    EffectTable {
        name: q.name().to_string(),
        axis: TableAxis::ByFormat,
        metric: q.metric(),
        row_header: "model".into(),
        row_labels: corpora.iter().map(|(label, _)| label.clone()).collect(),
        column_labels: formats.iter().map(|f| f.as_str().to_string()).collect(),
        grand_average: mean(row_averages.iter().flatten().copied()),
        row_averages,
        column_averages: Some(column_averages),
        averaged_over: vec!["layer".into()],
        merged_rows,
        notes,
        cells,
    }
}

fn residual_table(corpora: &[(String, &CorpusResults)]) -> Option<EffectTable> {
    if corpora.iter().all(|(_, c)| c.residual_line.is_none()) {
        return None;
    }
    let cells: Vec<Vec<Option<f64>>> = (0..9)
        .map(|n| {
            corpora
                .iter()
                .map(|(_, c)| c.residual_line.as_ref().map(|s| s.residuals[n]))
                .collect()
        })
        .collect();
    let row_averages = cells
        .iter()
        .map(|row| mean(row.iter().flatten().copied()))
        .collect();
    let formats: BTreeSet<&str> = corpora
        .iter()
        .filter_map(|(_, c)| c.residual_line.as_ref())
        .flat_map(|s| match &s.source {
            crate::numberline::SolutionSource::Aggregated { formats } => {
                formats.iter().map(|f| f.as_str()).collect::<Vec<_>>()
            }
            crate::numberline::SolutionSource::Cell { format, .. } => vec![format.as_str()],
        })
        .collect();
    Some(EffectTable {
        name: "residual".into(),
        axis: TableAxis::ByModel,
        metric: Metric::Residual,
        row_header: "number".into(),
        row_labels: (1..=9).map(|n| n.to_string()).collect(),
        column_labels: corpora.iter().map(|(label, _)| label.clone()).collect(),
        cells,
        row_averages,
        column_averages: None,
        grand_average: None,
        averaged_over: vec!["layer".into()],
        merged_rows: vec![false; 9],
        notes: vec![format!(
            "number line from the layer-averaged dissimilarities of format(s): {}",
            formats.into_iter().collect::<Vec<_>>().join(", ")
        )],
    })
}

fn grand_table(quantities: &[Quantity], corpora: &[(String, &CorpusResults)]) -> EffectTable {
    let cells: Vec<Vec<Option<f64>>> = corpora
        .iter()
        .map(|(_, c)| {
            quantities
                .iter()
                .map(|&q| mean(c.layers.iter().filter_map(|&l| layer_value(c, q, l))))
                .collect()
        })
        .collect();
    let column_averages = (0..quantities.len())
        .map(|j| mean(cells.iter().filter_map(|row| row[j])))
        .collect();
    EffectTable {
        name: "grand".into(),
        axis: TableAxis::ByModel,
        metric: Metric::Mixed,
        row_header: "model".into(),
        row_labels: corpora.iter().map(|(label, _)| label.clone()).collect(),
        column_labels: quantities.iter().map(|q| q.name().to_string()).collect(),
        row_averages: vec![None; corpora.len()],
        column_averages: Some(column_averages),
        grand_average: None,
        averaged_over: vec!["layer".into(), "format".into()],
        merged_rows: corpora
            .iter()
            .map(|(_, c)| c.lowercase_mixedcase_merged)
            .collect(),
        notes: vec!["effect columns hold R², the mds column holds the log10 correlation".into()],
        cells,
    }
}

fn quantities_present(corpora: &[CorpusResults]) -> Vec<Quantity> {
    let mut qs = Vec::new();
    for kind in EffectKind::ALL {
        if corpora
            .iter()
            .any(|c| c.cells.iter().any(|cell| cell.effect(kind).is_some()))
        {
            qs.push(Quantity::Effect(kind));
        }
    }
    if corpora
        .iter()
        .any(|c| c.cells.iter().any(|cell| cell.numberline.is_some()))
    {
        qs.push(Quantity::MdsCorrelation);
    }
    qs
}

/// Every table for the given corpora: per quantity a layer x model and a model x format
/// table, then the residual table and the per-model grand averages.
pub fn build_tables(corpora: &[CorpusResults]) -> Result<Vec<EffectTable>> {
    if corpora.is_empty() {
        return Err(Error::validation("no results to tabulate"));
    }
    let quantities = quantities_present(corpora);
    for c in corpora {
        check_complete(c, &quantities)?;
    }
    let labelled = labelled(corpora)?;
    let mut tables = Vec::new();
    for &q in &quantities {
        tables.push(by_layer_table(q, &labelled));
        tables.push(by_format_table(q, &labelled));
    }
    tables.extend(residual_table(&labelled));
    tables.push(grand_table(&quantities, &labelled));
    Ok(tables)
}

/// A model label with its (quantity, value) grand averages.
pub type ModelAverages = (String, Vec<(String, f64)>);

/// Per-model grand averages, in [`build_tables`] order.
pub fn grand_averages(corpora: &[CorpusResults]) -> Result<Vec<ModelAverages>> {
    let quantities = quantities_present(corpora);
    let labelled = labelled(corpora)?;
    let table = grand_table(&quantities, &labelled);
    Ok(table
        .row_labels
        .iter()
        .zip(&table.cells)
        .map(|(label, row)| {
            let values = table
                .column_labels
                .iter()
                .zip(row)
                .filter_map(|(name, v)| v.map(|v| (name.clone(), v)))
                .collect();
            (label.clone(), values)
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub x: f64,
    pub y_observed: Option<f64>,
    pub y_fitted: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotSeries {
    pub file_stem: String,
    pub rows: Vec<PlotRow>,
}

/// Dense points appended to negative-exponential plot files.
pub const FITTED_CURVE_POINTS: usize = 200;

/// Observed and fitted points for every fitted cell, named
/// `<effect>_points_<model>_L<layer>_<format>`.
pub fn build_plots(corpora: &[CorpusResults]) -> Result<Vec<PlotSeries>> {
    let mut plots = Vec::new();
    for (label, c) in labelled(corpora)? {
        let model = slug(&label);
        for cell in &c.cells {
            for e in &cell.effects {
                let mut rows: Vec<PlotRow> = e
                    .points
                    .iter()
                    .map(|&(x, y)| PlotRow {
                        x,
                        y_observed: Some(y),
                        y_fitted: e.fit.predict(x),
                    })
                    .collect();
                if let Fit::NegExp(f) = e.fit {
                    let lo = e.points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
                    let hi = e
                        .points
                        .iter()
                        .map(|p| p.0)
                        .fold(f64::NEG_INFINITY, f64::max);
                    let step = (hi - lo) / (FITTED_CURVE_POINTS - 1) as f64;
                    rows.extend((0..FITTED_CURVE_POINTS).map(|k| {
                        let x = lo + step * k as f64;
                        PlotRow {
                            x,
                            y_observed: None,
                            y_fitted: f.predict(x),
                        }
                    }));
                }
                plots.push(PlotSeries {
                    file_stem: format!(
                        "{}_points_{}_L{}_{}",
                        e.effect_kind.as_str(),
                        model,
                        cell.layer_index + 1,
                        cell.format
                    ),
                    rows,
                });
            }
        }
    }
    Ok(plots)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EmitFormat {
    Csv,
    Md,
    Json,
}

impl EmitFormat {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "csv" => Some(EmitFormat::Csv),
            "md" => Some(EmitFormat::Md),
            "json" => Some(EmitFormat::Json),
            _ => None,
        }
    }

    pub fn extension(self) -> &'static str {
        match self {
            EmitFormat::Csv => "csv",
            EmitFormat::Md => "md",
            EmitFormat::Json => "json",
        }
    }
}

fn num(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn csv_error(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Parse(format!("{}: {other:?}", path.display())),
    }
}

pub fn table_to_csv(table: &EffectTable) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let has_avg = table.row_averages.iter().any(Option::is_some);
    let has_merge = table.merged_rows.iter().any(|&m| m);
    let mut header = vec![table.row_header.clone()];
    header.extend(table.column_labels.iter().cloned());
    if has_avg {
        header.push("avg".into());
    }
    if has_merge {
        header.push("lc_mc_merged".into());
    }
    let to_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(&header).map_err(to_err)?;
    for (i, label) in table.row_labels.iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(table.cells[i].iter().map(|&v| num(v)));
        if has_avg {
            rec.push(num(table.row_averages[i]));
        }
        if has_merge {
            rec.push(table.merged_rows[i].to_string());
        }
        w.write_record(&rec).map_err(to_err)?;
    }
    if let Some(cols) = &table.column_averages {
        let mut rec = vec!["total".to_string()];
        rec.extend(cols.iter().map(|&v| num(v)));
        if has_avg {
            rec.push(num(table.grand_average));
        }
        if has_merge {
            rec.push(String::new());
        }
        w.write_record(&rec).map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

pub fn table_to_markdown(table: &EffectTable) -> String {
    let r3 = |v: Option<f64>| v.map(|x| format!("{x:.3}")).unwrap_or_else(|| "-".into());
    let has_avg = table.row_averages.iter().any(Option::is_some);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "### {} {} ({}, averaged over {})\n",
        table.name,
        table.axis.as_str().replace('_', " "),
        table.metric.label(),
        table.averaged_over.join(", ")
    );
    let mut header: Vec<String> = vec![table.row_header.clone()];
    header.extend(table.column_labels.iter().cloned());
    if has_avg {
        header.push("Avg.".into());
    }
    let _ = writeln!(out, "| {} |", header.join(" | "));
    let _ = writeln!(out, "|{}", " --- |".repeat(header.len()));
    for (i, label) in table.row_labels.iter().enumerate() {
        let mut row = vec![label.clone()];
        let merged = table.merged_rows[i];
        for (j, v) in table.cells[i].iter().enumerate() {
            let col = &table.column_labels[j];
            if merged && col == NumberFormat::MixedcaseWord.as_str() {
                row.push("(= LC)".into());
            } else {
                row.push(r3(*v));
            }
        }
        if has_avg {
            row.push(r3(table.row_averages[i]));
        }
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    if let Some(cols) = &table.column_averages {
        let mut row = vec!["Total".to_string()];
        row.extend(cols.iter().map(|&v| r3(v)));
        if has_avg {
            row.push(r3(table.grand_average));
        }
        let _ = writeln!(out, "| {} |", row.join(" | "));
    }
    for note in &table.notes {
        let _ = writeln!(out, "\n_{note}_");
    }
    out
}

pub fn plot_to_csv(plot: &PlotSeries) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record(["x", "y_observed", "y_fitted"])
        .map_err(to_err)?;
    for r in &plot.rows {
        w.write_record([r.x.to_string(), num(r.y_observed), r.y_fitted.to_string()])
            .map_err(to_err)?;
    }
    w.into_inner().map_err(|e| Error::Parse(e.to_string()))
}

/// Anchored positions of each corpus's aggregated number line.
pub fn numberline_csv(c: &CorpusResults) -> Result<Option<Vec<u8>>> {
    let Some(s) = &c.aggregated else {
        return Ok(None);
    };
    let mut w = csv::Writer::from_writer(Vec::new());
    let to_err = |e: csv::Error| Error::Parse(e.to_string());
    w.write_record([
        "number",
        "coordinate",
        "anchored_position",
        "log10",
        "residual",
    ])
    .map_err(to_err)?;
    for (n, target) in log_targets().iter().enumerate() {
        w.write_record([
            (n + 1).to_string(),
            s.coordinates[n].to_string(),
            s.anchored_positions[n].to_string(),
            target.to_string(),
            s.residuals[n].to_string(),
        ])
        .map_err(to_err)?;
    }
    w.into_inner()
        .map(Some)
        .map_err(|e| Error::Parse(e.to_string()))
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value).map_err(|e| Error::Parse(e.to_string()))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes one file per table per format, plot CSVs under `plots/`, per-model number
/// lines, and (with JSON selected) `results.json` holding the full result grid.
pub fn emit(
    corpora: &[CorpusResults],
    tables: &[EffectTable],
    plots: &[PlotSeries],
    bundle: Option<&crate::pipeline::ResultBundle>,
    out_dir: &Path,
    formats: &[EmitFormat],
) -> Result<()> {
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let formats: BTreeSet<EmitFormat> = formats.iter().copied().collect();
    for table in tables {
        for &f in &formats {
            let path = out_dir.join(format!("{}.{}", table.file_stem(), f.extension()));
            let bytes = match f {
                EmitFormat::Csv => table_to_csv(table)?,
                EmitFormat::Md => table_to_markdown(table).into_bytes(),
                EmitFormat::Json => json_bytes(table)?,
            };
            write_file(&path, &bytes)?;
        }
    }
    if !plots.is_empty() {
        let dir = out_dir.join("plots");
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        for plot in plots {
            let path = dir.join(format!("{}.csv", plot.file_stem));
            write_file(&path, &plot_to_csv(plot)?)?;
        }
    }
    for (label, c) in labelled(corpora)? {
        if let Some(bytes) = numberline_csv(c)? {
            let path = out_dir.join(format!("numberline_{}.csv", slug(&label)));
            write_file(&path, &bytes)?;
        }
    }
    if let (Some(bundle), true) = (bundle, formats.contains(&EmitFormat::Json)) {
        write_file(&out_dir.join("results.json"), &json_bytes(bundle)?)?;
    }
    Ok(())
}

/// A by-layer table read back from CSV: layer labels, model columns and the avg column.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerTable {
    pub layers: Vec<String>,
    pub models: Vec<String>,
    pub cells: Vec<Vec<Option<f64>>>,
    pub avg: Vec<Option<f64>>,
}

impl LayerTable {
    /// The `avg` column, or each row's mean over the model columns when `recompute`.
    pub fn averages(&self, recompute: bool) -> Result<Vec<f64>> {
        self.layers
            .iter()
            .enumerate()
            .map(|(i, layer)| {
                let v = if recompute || self.avg.is_empty() {
                    mean(self.cells[i].iter().flatten().copied())
                } else {
                    self.avg[i]
                };
                v.ok_or_else(|| Error::validation(format!("layer {layer} has no average")))
            })
            .collect()
    }
}

/// Parses a `<effect>_by_layer.csv` table (as written by [`emit`]).
pub fn read_layer_table(path: impl AsRef<Path>) -> Result<LayerTable> {
    let path = path.as_ref();
    let mut r = csv::Reader::from_path(path).map_err(|e| csv_error(path, e))?;
    let header: Vec<String> = r
        .headers()
        .map_err(|e| csv_error(path, e))?
        .iter()
        .map(|s| s.trim().to_string())
        .collect();
    if header.first().map(String::as_str) != Some("layer") {
        return Err(Error::validation(format!(
            "{}: first column must be 'layer'",
            path.display()
        )));
    }
    let avg_col = header.iter().position(|h| h == "avg");
    let model_cols: Vec<usize> = (1..header.len()).filter(|&i| Some(i) != avg_col).collect();
    let parse = |s: &str, line: usize| -> Result<Option<f64>> {
        let s = s.trim();
        if s.is_empty() {
            return Ok(None);
        }
        s.parse::<f64>().map(Some).map_err(|_| {
            Error::validation(format!(
                "{}: bad number '{s}' on row {line}",
                path.display()
            ))
        })
    };
    let mut table = LayerTable {
        layers: Vec::new(),
        models: model_cols.iter().map(|&i| header[i].clone()).collect(),
        cells: Vec::new(),
        avg: Vec::new(),
    };
    for (line, rec) in r.records().enumerate() {
        let rec = rec.map_err(|e| csv_error(path, e))?;
        let label = rec.get(0).unwrap_or("").trim().to_string();
        if label == "total" {
            continue;
        }
        table.cells.push(
            model_cols
                .iter()
                .map(|&i| parse(rec.get(i).unwrap_or(""), line + 2))
                .collect::<Result<_>>()?,
        );
        if let Some(i) = avg_col {
            table.avg.push(parse(rec.get(i).unwrap_or(""), line + 2)?);
        }
        table.layers.push(label);
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::effects::{Aggregation, EffectFit};
    use crate::fitting::LinearFit;

    fn fake_cell(layer: usize, format: NumberFormat, r2: f64) -> CellResult {
        let effects = EffectKind::ALL
            .iter()
            .map(|&k| EffectFit {
                effect_kind: k,
                layer_index: layer,
                format,
                aggregation: Aggregation::default_for(k),
                duplicates_averaged: false,
                points: vec![(1.0, 1.0), (2.0, 0.5)],
                fit: Fit::Linear(LinearFit {
                    intercept: 1.5,
                    slope: -0.5,
                    r_squared: r2,
                }),
                r_squared: r2,
            })
            .collect();
        CellResult {
            layer_index: layer,
            format,
            effects,
            numberline: None,
        }
    }

    fn fake_corpus(
        id: &str,
        layers: usize,
        r2: impl Fn(usize, NumberFormat) -> f64,
    ) -> CorpusResults {
        let mut cells = Vec::new();
        for l in 0..layers {
            for f in NumberFormat::ALL {
                cells.push(fake_cell(l, f, r2(l, f)));
            }
        }
        CorpusResults {
            model_id: id.into(),
            variant_label: "base".into(),
            num_layers: layers,
            layers: (0..layers).collect(),
            formats: NumberFormat::ALL.to_vec(),
            lowercase_mixedcase_merged: false,
            cells,
            aggregated: None,
            residual_line: None,
        }
    }

    #[test]
    fn constant_r_squared_everywhere() {
        let c = fake_corpus("m", 4, |_, _| 0.9);
        for t in build_tables(&[c]).unwrap() {
            for row in &t.cells {
                for v in row.iter().flatten() {
                    assert!((v - 0.9).abs() < 1e-12, "{}", t.file_stem());
                }
            }
            for v in t.row_averages.iter().flatten() {
                assert!((v - 0.9).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn two_format_average() {
        let mut c = fake_corpus(
            "m",
            2,
            |_, f| if f == NumberFormat::Digit { 1.0 } else { 0.8 },
        );
        c.formats = vec![NumberFormat::LowercaseWord, NumberFormat::Digit];
        c.cells
            .retain(|cell| cell.format != NumberFormat::MixedcaseWord);
        let tables = build_tables(&[c]).unwrap();
        let t = tables
            .iter()
            .find(|t| t.file_stem() == "distance_by_layer")
            .unwrap();
        assert!((t.cell("1", "m").unwrap() - 0.9).abs() < 1e-12);
    }

    #[test]
    fn merged_formats_count_once() {
        let mut c = fake_corpus("bert", 2, |_, f| match f {
            NumberFormat::Digit => 0.944,
            _ => 0.976,
        });
        c.lowercase_mixedcase_merged = true;
        let tables = build_tables(&[c]).unwrap();
        let t = tables
            .iter()
            .find(|t| t.file_stem() == "distance_by_format")
            .unwrap();
        assert!((t.row_average("bert").unwrap() - 0.960).abs() < 1e-12);
        assert!(t.merged_rows[0]);
        let md = table_to_markdown(t);
        assert!(md.contains("(= LC)"));
    }

    #[test]
    fn averages_cross_foot() {
        let a = fake_corpus("a", 3, |l, f| {
            0.5 + 0.1 * l as f64 + if f == NumberFormat::Digit { 0.05 } else { 0.0 }
        });
        let b = fake_corpus("b", 5, |l, _| 0.9 - 0.01 * l as f64);
        let tables = build_tables(&[b, a]).unwrap();
        for t in &tables {
            for (i, row) in t.cells.iter().enumerate() {
                if let Some(avg) = t.row_averages[i] {
                    let recomputed = mean(row.iter().flatten().copied()).unwrap();
                    assert!((avg - recomputed).abs() < 1e-12);
                }
            }
        }
        let by_layer = tables
            .iter()
            .find(|t| t.file_stem() == "size_by_layer")
            .unwrap();
        assert_eq!(by_layer.row_labels.len(), 5);
        assert_eq!(by_layer.column_labels, vec!["a", "b"]);
        assert_eq!(by_layer.cell("5", "a"), None);
    }

    #[test]
    fn incomplete_grid_rejected() {
        let mut c = fake_corpus("m", 2, |_, _| 0.5);
        c.cells.pop();
        assert!(build_tables(&[c]).is_err());
    }

    #[test]
    fn shared_model_ids_get_variant_suffix() {
        let a = fake_corpus("bart", 2, |_, _| 0.5);
        let mut b = fake_corpus("bart", 3, |_, _| 0.5);
        b.variant_label = "large".into();
        let labels: Vec<String> = labelled(&[b, a])
            .unwrap()
            .into_iter()
            .map(|(l, _)| l)
            .collect();
        assert_eq!(labels, vec!["bart-base", "bart-large"]);
    }

    #[test]
    fn csv_round_trip_of_layer_table() {
        let c = fake_corpus("m", 3, |l, _| 0.1 * (l + 1) as f64);
        let tables = build_tables(&[c]).unwrap();
        let t = tables
            .iter()
            .find(|t| t.file_stem() == "ratio_by_layer")
            .unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ratio_by_layer.csv");
        fs::write(&path, table_to_csv(t).unwrap()).unwrap();
        let back = read_layer_table(&path).unwrap();
        assert_eq!(back.models, vec!["m"]);
        assert_eq!(
            back.averages(false).unwrap(),
            t.row_averages
                .iter()
                .map(|v| v.unwrap())
                .collect::<Vec<_>>()
        );
    }

    #[test]
    fn slugs() {
        assert_eq!(slug("facebook/BART-base"), "facebook-bart-base");
        assert_eq!(slug("bart"), "bart");
    }
}
