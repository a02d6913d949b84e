use mnl_core::corpus::save_corpus;
use mnl_core::synth::{generate, PositionModel, SynthSpec};

use crate::args::SynthArgs;
use crate::failure::{CmdResult, Failure};

fn positions(spec: &str) -> CmdResult<(PositionModel, &'static str)> {
    match spec {
        "log10" => Ok((PositionModel::Log10, "log10")),
        "linear" => Ok((PositionModel::Linear, "linear")),
        _ => {
            let Some(list) = spec.strip_prefix("custom:") else {
                return Err(Failure::validation(format!(
                    "unknown position model '{spec}' (log10, linear, custom:p1,...,p9)"
                )));
            };
            let values = list
                .split(',')
                .map(|v| v.trim().parse::<f64>())
                .collect::<Result<Vec<_>, _>>()
                .map_err(|_| Failure::validation(format!("bad custom positions '{list}'")))?;
            Ok((PositionModel::Custom(values), "custom"))
        }
    }
}

pub fn run_synth(args: SynthArgs) -> CmdResult {
    let (position_model, name) = positions(&args.positions)?;
    let spec = SynthSpec {
        position_model,
        tuning_sigma: args.sigma,
        grid_size: args.dims,
        noise_amplitude: args.noise,
        seed: args.seed,
        num_layers: args.layers,
        formats_identical: args.formats_identical,
        model_id: args.model_id,
        variant_label: args.variant.unwrap_or_else(|| name.to_string()),
    };
    let corpus = generate(&spec)?;
    save_corpus(&corpus, &args.out)?;
    println!(
        "wrote {} ({} entries, {} layers, {} dims)",
        args.out.display(),
        corpus.entries.len(),
        corpus.num_layers,
        corpus.hidden_size
    );
    Ok(())
}
