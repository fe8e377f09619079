use std::io::Write;

use anyhow::Result;
use hypertime::{spectrum, Mode, ResidualSeries, SpectralConfig};

use crate::args::SpectrumArgs;
use crate::commands::load;

pub fn run(args: &SpectrumArgs, stdout: &mut dyn Write) -> Result<()> {
    let ds = load(&args.input, Some(Mode::Valued))?;
    let series = ResidualSeries::new(ds.times(), ds.values())?;
    let candidates = SpectralConfig {
        longest: args.longest_period,
        count: args.candidates,
    }
    .candidates();
    writeln!(stdout, "period,amplitude")?;
    for e in spectrum(&series, &candidates).entries {
        writeln!(stdout, "{},{}", e.period, e.amplitude)?;
    }
    Ok(())
}
