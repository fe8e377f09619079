use std::io::Write;

use anyhow::Result;
use hypertime::model::{build_event, HypertimeModel};
use hypertime::{build, Mode};

use crate::args::TrainArgs;
use crate::commands::load;
use crate::output::write_string;

pub fn fit_model(args: &TrainArgs) -> Result<HypertimeModel<f64>> {
    let ds = load(&args.input, args.model_args.mode.map(Mode::from))?;
    let cfg = args.model_args.build_config()?;
    Ok(match ds.mode() {
        Mode::Valued => build(&ds, &cfg)?,
        Mode::Event => build_event(&ds, &cfg)?,
    })
}

/// Build log as a tab-separated table.
pub fn log_table(model: &HypertimeModel<f64>) -> String {
    let mut out = String::from("h\terror\tperiod\tkept\n");
    for step in model.build_log() {
        let period = step
            .period
            .map_or_else(|| "-".to_string(), |p| p.to_string());
        out.push_str(&format!(
            "{}\t{}\t{}\t{}\n",
            step.h, step.error, period, step.kept
        ));
    }
    out
}

pub fn run(args: &TrainArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = fit_model(args)?;
    write_string(&args.model, args.force, &model.to_json()?)?;
    stdout.write_all(log_table(&model).as_bytes())?;
    Ok(())
}
