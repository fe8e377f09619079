use std::io::Write;

use anyhow::{bail, Context, Result};
use hypertime::dataset::read_records;
use hypertime::evaluation::Cell;
use hypertime::model::HypertimeModel;
use hypertime::{LoadOptions, Mode};

use crate::args::PredictArgs;

pub fn load_model(path: &std::path::Path) -> Result<HypertimeModel<f64>> {
    let text =
        std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    HypertimeModel::from_json(&text).with_context(|| format!("parsing model {}", path.display()))
}

/// Writes `t,x1..xd,prediction` rows in query order.
pub fn run(args: &PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let model = load_model(&args.model)?;
    let file = std::fs::File::open(&args.input)
        .with_context(|| format!("opening {}", args.input.display()))?;
    let (queries, dim, _) = read_records::<f64, _>(file, &LoadOptions::default())
        .with_context(|| format!("loading {}", args.input.display()))?;
    if dim != model.spatial_dim() {
        bail!(
            "query has {dim} spatial columns but the model expects {}",
            model.spatial_dim()
        );
    }
    if args.cell && model.mode() != Mode::Event {
        bail!("--cell needs an event model");
    }
    let mut header = vec!["t".to_string()];
    header.extend((1..=model.spatial_dim()).map(|k| format!("x{k}")));
    header.push(match (model.mode(), args.cell) {
        (Mode::Valued, _) => "mean".into(),
        (Mode::Event, false) => "density".into(),
        (Mode::Event, true) => "count".into(),
    });
    let mut out = String::new();
    out.push_str(&header.join(","));
    out.push('\n');
    for q in &queries {
        let mut p = match (model.mode(), args.cell) {
            (Mode::Valued, _) => model.predict_mean(&q.x, q.t)?,
            (Mode::Event, false) => model.density(None, &q.x, q.t)?,
            (Mode::Event, true) => {
                let h = 0.5 * args.grid_spatial;
                let cell = Cell {
                    lo: q.x.iter().map(|v| v - h).collect(),
                    hi: q.x.iter().map(|v| v + h).collect(),
                    t0: q.t - 0.5 * args.grid_temporal,
                    t1: q.t + 0.5 * args.grid_temporal,
                };
                model.predict_cell_count(&cell, 1)?
            }
        };
        if let Some(c) = args.clamp {
            p = p.clamp(c.lo, c.hi);
        }
        out.push_str(&q.t.to_string());
        for v in &q.x {
            out.push_str(&format!(",{v}"));
        }
        out.push_str(&format!(",{p}\n"));
    }
    stdout.write_all(out.as_bytes())?;
    Ok(())
}
