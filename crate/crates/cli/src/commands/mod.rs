pub mod evaluate;
pub mod generate;
pub mod predict;
pub mod spectrum;
pub mod train;

use std::path::Path;

use anyhow::{bail, Context, Result};
use hypertime::{load_csv, Dataset, LoadOptions, Mode};

/// Loads a CSV, checking its mode against `expected` when one is given.
pub fn load(path: &Path, expected: Option<Mode>) -> Result<Dataset<f64>> {
    let ds = load_csv(path, &LoadOptions::default())
        .with_context(|| format!("loading {}", path.display()))?;
    if let Some(mode) = expected {
        if ds.mode() != mode {
            bail!(
                "{} holds {} data but {} mode was requested",
                path.display(),
                ds.mode().name(),
                mode.name()
            );
        }
    }
    Ok(ds)
}
