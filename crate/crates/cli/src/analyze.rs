use std::path::{Path, PathBuf};

use clap::ValueEnum;
use mnl_core::corpus::load_corpus;
use mnl_core::pipeline::{
    analyze_cell, assemble_corpus, cell_keys, load_bundle, AnalysisOptions, CorpusResults,
    ResultBundle, BUNDLE_SCHEMA_VERSION,
};
use mnl_core::report::{self, EmitFormat};
use mnl_core::{Aggregation, EffectKind, EffectOptions, NumberFormat};
use rayon::prelude::*;

use crate::args::{AnalyzeArgs, EffectArg, EmitArg, FormatArg, MergeArgs, OrderArg};
use crate::config::{self, AnalyzeConfig};
use crate::failure::{CmdResult, Failure};

fn parse_list<T: ValueEnum>(values: &[String], what: &str) -> CmdResult<Vec<T>> {
    values
        .iter()
        .flat_map(|v| v.split(','))
        .map(|v| {
            T::from_str(v.trim(), false)
                .map_err(|_| Failure::validation(format!("config: unknown {what} '{v}'")))
        })
        .collect()
}

fn parse_one<T: ValueEnum>(value: &str, what: &str) -> CmdResult<T> {
    T::from_str(value.trim(), false)
        .map_err(|_| Failure::validation(format!("config: unknown {what} '{value}'")))
}

/// "all" or a comma-separated list of 1-based layers; returns 0-based indices.
pub fn parse_layers(spec: &str) -> CmdResult<Option<Vec<usize>>> {
    let spec = spec.trim();
    if spec.eq_ignore_ascii_case("all") {
        return Ok(None);
    }
    spec.split(',')
        .map(|s| match s.trim().parse::<usize>() {
            Ok(0) => Err(Failure::validation("layers are numbered from 1")),
            Ok(n) => Ok(n - 1),
            Err(_) => Err(Failure::validation(format!(
                "bad layer '{}': expected a number or 'all'",
                s.trim()
            ))),
        })
        .collect::<CmdResult<Vec<_>>>()
        .map(Some)
}

fn format_of(f: FormatArg) -> Vec<NumberFormat> {
    match f {
        FormatArg::LowercaseWord => vec![NumberFormat::LowercaseWord],
        FormatArg::MixedcaseWord => vec![NumberFormat::MixedcaseWord],
        FormatArg::Digit => vec![NumberFormat::Digit],
        FormatArg::All => NumberFormat::ALL.to_vec(),
    }
}

fn emit_formats(args: &[EmitArg]) -> Vec<EmitFormat> {
    if args.is_empty() {
        return vec![EmitFormat::Csv, EmitFormat::Md, EmitFormat::Json];
    }
    args.iter()
        .map(|e| match e {
            EmitArg::Csv => EmitFormat::Csv,
            EmitArg::Md => EmitFormat::Md,
            EmitArg::Json => EmitFormat::Json,
        })
        .collect()
}

fn out_dir(flag: Option<PathBuf>, config: Option<PathBuf>) -> CmdResult<PathBuf> {
    flag.or(config)
        .or_else(|| {
            std::env::var_os("MNL_OUT_DIR")
                .filter(|v| !v.is_empty())
                .map(PathBuf::from)
        })
        .ok_or_else(|| Failure::validation("no output directory: pass --out or set MNL_OUT_DIR"))
}

struct Plan {
    inputs: Vec<PathBuf>,
    options: AnalysisOptions,
    out: PathBuf,
    emit: Vec<EmitFormat>,
    jobs: Option<usize>,
}

fn plan(args: AnalyzeArgs) -> CmdResult<Plan> {
    let cfg = match &args.config {
        Some(path) => config::load(path)?,
        None => AnalyzeConfig::default(),
    };
    let inputs = if args.inputs.is_empty() {
        cfg.input
    } else {
        args.inputs
    };
    if inputs.is_empty() {
        return Err(Failure::validation("no input corpus: pass --input"));
    }
    let effects = if args.effect.is_empty() {
        parse_list(&cfg.effect, "effect")?
    } else {
        args.effect
    };
    let (effects, mds) = if effects.is_empty() || effects.contains(&EffectArg::All) {
        (EffectKind::ALL.to_vec(), true)
    } else {
        let kinds = EffectKind::ALL
            .into_iter()
            .filter(|k| {
                effects.contains(&match k {
                    EffectKind::Distance => EffectArg::Distance,
                    EffectKind::Size => EffectArg::Size,
                    EffectKind::Ratio => EffectArg::Ratio,
                })
            })
            .collect();
        (kinds, effects.contains(&EffectArg::Mds))
    };
    let layers = match args.layer.or(cfg.layer) {
        Some(spec) => parse_layers(&spec)?,
        None => None,
    };
    let format_args: Vec<FormatArg> = if args.format.is_empty() {
        parse_list(&cfg.format, "format")?
    } else {
        args.format
    };
    let mut formats: Vec<NumberFormat> = if format_args.is_empty() {
        NumberFormat::ALL.to_vec()
    } else {
        format_args.into_iter().flat_map(format_of).collect()
    };
    formats.sort();
    formats.dedup();
    let order = match args.order {
        Some(o) => Some(o),
        None => cfg
            .order
            .as_deref()
            .map(|o| parse_one::<OrderArg>(o, "order"))
            .transpose()?,
    };
    let residual = match args.residual_format {
        Some(f) => Some(f),
        None => cfg
            .residual_format
            .as_deref()
            .map(|f| parse_one::<FormatArg>(f, "format"))
            .transpose()?,
    };
    let residual_format = match residual.map(format_of).as_deref() {
        None => NumberFormat::Digit,
        Some([one]) => *one,
        Some(_) => {
            return Err(Failure::validation(
                "--residual-format takes a single format",
            ))
        }
    };
    let options = AnalysisOptions {
        effects,
        mds,
        layers,
        formats,
        effect_options: EffectOptions {
            order: order.map(|o| match o {
                OrderArg::GroupThenNormalize => Aggregation::GroupThenNormalize,
                OrderArg::NormalizeThenGroup => Aggregation::NormalizeThenGroup,
            }),
            ratio_average_duplicates: args.ratio_average_duplicates
                || cfg.ratio_average_duplicates.unwrap_or(false),
        },
        smacof: args.smacof || cfg.smacof.unwrap_or(false),
        residual_format,
    };
    options.validate()?;
    let emit_args = if args.emit.is_empty() {
        parse_list(&cfg.emit, "emit format")?
    } else {
        args.emit
    };
    let jobs = args.jobs.or(cfg.jobs);
    if jobs == Some(0) {
        return Err(Failure::validation("--jobs must be at least 1"));
    }
    Ok(Plan {
        inputs,
        options,
        out: out_dir(args.out, cfg.out)?,
        emit: emit_formats(&emit_args),
        jobs,
    })
}

pub fn run_analyze(args: AnalyzeArgs) -> CmdResult {
    let plan = plan(args)?;
    let corpora = plan
        .inputs
        .iter()
        .map(load_corpus)
        .collect::<Result<Vec<_>, _>>()?;
    let mut tasks = Vec::new();
    for (ci, corpus) in corpora.iter().enumerate() {
        tasks.extend(
            cell_keys(corpus, &plan.options)?
                .into_iter()
                .map(|(l, f)| (ci, l, f)),
        );
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(plan.jobs.unwrap_or(0))
        .build()
        .map_err(|e| Failure::validation(format!("cannot start worker pool: {e}")))?;
    let opts = &plan.options;
    let results: Vec<CorpusResults> = pool.install(|| -> CmdResult<Vec<CorpusResults>> {
        let cells = tasks
            .par_iter()
            .map(|&(ci, l, f)| analyze_cell(&corpora[ci], l, f, opts))
            .collect::<Vec<_>>();
        let mut per_corpus = vec![Vec::new(); corpora.len()];
        for (&(ci, _, _), cell) in tasks.iter().zip(cells) {
            per_corpus[ci].push(cell?);
        }
        corpora
            .par_iter()
            .zip(per_corpus)
            .map(|(corpus, cells)| assemble_corpus(corpus, cells, opts))
            .collect::<Result<Vec<_>, _>>()
            .map_err(Failure::from)
    })?;

    let bundle = ResultBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        options: plan.options.clone(),
        corpora: results,
    };
    write_outputs(&bundle, &plan.out, &plan.emit)
}

fn write_outputs(bundle: &ResultBundle, out: &Path, emit: &[EmitFormat]) -> CmdResult {
    let mut corpora = bundle.corpora.clone();
    corpora.sort_by(|a, b| (&a.model_id, &a.variant_label).cmp(&(&b.model_id, &b.variant_label)));
    let bundle = ResultBundle {
        corpora,
        ..bundle.clone()
    };
    let tables = report::build_tables(&bundle.corpora)?;
    let plots = report::build_plots(&bundle.corpora)?;
    report::emit(&bundle.corpora, &tables, &plots, Some(&bundle), out, emit)?;
    let layers_of = |label: &str| {
        report::labelled(&bundle.corpora)
            .ok()
            .and_then(|l| {
                l.into_iter()
                    .find(|(name, _)| name == label)
                    .map(|(_, c)| c.layers.len())
            })
            .unwrap_or(0)
    };
    for (label, values) in report::grand_averages(&bundle.corpora)? {
        let parts: Vec<String> = values
            .iter()
            .map(|(name, v)| format!("{name}={v:.4}"))
            .collect();
        println!("{label}: layers={} {}", layers_of(&label), parts.join(" "));
    }
    println!("wrote {} tables to {}", tables.len(), out.display());
    Ok(())
}

pub fn run_merge(args: MergeArgs) -> CmdResult {
    let bundles = args
        .inputs
        .iter()
        .map(load_bundle)
        .collect::<Result<Vec<_>, _>>()?;
    let first = &bundles[0];
    for (b, path) in bundles.iter().zip(&args.inputs).skip(1) {
        if b.options.effects != first.options.effects || b.options.mds != first.options.mds {
            return Err(Failure::validation(format!(
                "{} was produced with a different effect selection",
                path.display()
            )));
        }
    }
    let mut corpora: Vec<CorpusResults> = Vec::new();
    for b in &bundles {
        for c in &b.corpora {
            if corpora
                .iter()
                .any(|o| o.model_id == c.model_id && o.variant_label == c.variant_label)
            {
                return Err(Failure::validation(format!(
                    "{}-{} appears in more than one bundle",
                    c.model_id, c.variant_label
                )));
            }
            corpora.push(c.clone());
        }
    }
    let bundle = ResultBundle {
        schema_version: BUNDLE_SCHEMA_VERSION,
        options: first.options.clone(),
        corpora,
    };
    write_outputs(
        &bundle,
        &out_dir(args.out, None)?,
        &emit_formats(&args.emit),
    )
}
