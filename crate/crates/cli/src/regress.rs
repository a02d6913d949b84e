use mnl_core::report::read_layer_table;
use mnl_core::stats::{ols_regression, RegressionReport};

use crate::args::RegressArgs;
use crate::failure::{CmdResult, Failure};

pub fn render(report: &RegressionReport, response: &str) -> String {
    let mut out = format!(
        "response: {response}  observations: {}  df: {}  R²: {:.4}\n",
        report.degrees_of_freedom as usize + report.names.len(),
        report.degrees_of_freedom,
        report.r_squared
    );
    out.push_str(&format!(
        "{:<12}{:>10}{:>10}{:>10}{:>10}\n",
        "", "coef", "std err", "t", "P>|t|"
    ));
    for i in 0..report.names.len() {
        out.push_str(&format!(
            "{:<12}{:>10.4}{:>10.4}{:>10.3}{:>10.4}\n",
            report.names[i],
            report.coefficients[i],
            report.standard_errors[i],
            report.t_statistics[i],
            report.p_values[i]
        ));
    }
    out
}

pub fn run_regress(args: RegressArgs) -> CmdResult {
    let distance = read_layer_table(&args.distance)?;
    let size = read_layer_table(&args.size)?;
    let ratio = read_layer_table(&args.ratio)?;
    for (name, t) in [("size", &size), ("ratio", &ratio)] {
        if t.layers != distance.layers {
            return Err(Failure::validation(format!(
                "{name} table layers ({}) do not align with distance table layers ({})",
                t.layers.len(),
                distance.layers.len()
            )));
        }
    }
    let x_distance = distance.averages(args.recompute_avg)?;
    let x_size = size.averages(args.recompute_avg)?;
    let y = ratio.averages(args.recompute_avg)?;
    let report = ols_regression(&[("distance", &x_distance), ("size", &x_size)], &y)?;
    print!("{}", render(&report, "ratio"));
    Ok(())
}
