use anyhow::Result;
use hypertime::synthetic::{self, PedestrianConfig};
use hypertime::{write_csv, Dataset, DAY};

use crate::args::{GenerateArgs, Generator};
use crate::output::write_atomic;

pub fn generate(args: &GenerateArgs) -> Result<Dataset<f64>> {
    let weeks = args.days / 7.0;
    Ok(match args.kind {
        Generator::OfficeHours => {
            synthetic::office_hours(args.start, weeks, args.noise, args.seed)?
        }
        Generator::DailyWeekly => {
            synthetic::daily_weekly(args.start, weeks, args.noise, args.seed)?
        }
        Generator::DailyCosine => synthetic::sampled(
            args.start,
            args.days * DAY,
            600.0,
            args.noise,
            args.seed,
            synthetic::daily_cosine_signal,
        )?,
        Generator::Pedestrians => synthetic::pedestrians(&PedestrianConfig {
            start: args.start,
            days: args.days,
            seed: args.seed,
            ..PedestrianConfig::default()
        })?,
    })
}

pub fn run(args: &GenerateArgs) -> Result<()> {
    let ds = generate(args)?;
    write_atomic(&args.output, args.force, |w| Ok(write_csv(&ds, w)?))
}
