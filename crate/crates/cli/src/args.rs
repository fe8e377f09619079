use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use hypertime::clustering::{Backend, FitConfig};
use hypertime::{BuildConfig, Mode, SpectralConfig, WEEK};

#[derive(Debug, Parser)]
#[command(
    name = "hypertime",
    version,
    about = "Spatio-temporal models with hypertime projections"
)]
pub struct Cli {
    /// key=value file supplying defaults for any flag.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Log progress to standard error.
    #[arg(short, long, global = true)]
    pub verbose: bool,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a model and write it as JSON.
    Train(TrainArgs),
    /// Print predictions for the rows of a query CSV.
    Predict(PredictArgs),
    /// Benchmark the baselines and hypertime models on held-out folds.
    Evaluate(EvaluateArgs),
    /// Print the amplitude spectrum of a valued series.
    Spectrum(SpectrumArgs),
    /// Write a synthetic dataset.
    Generate(GenerateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Valued,
    Event,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Valued => Mode::Valued,
            ModeArg::Event => Mode::Event,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum BackendArg {
    Em,
    Km,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Em => Backend::Em,
            BackendArg::Km => Backend::Km,
        }
    }
}

/// Component count: a number or `auto`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Clusters {
    Fixed(usize),
    Auto,
}

fn parse_clusters(s: &str) -> Result<Clusters, String> {
    if s == "auto" {
        return Ok(Clusters::Auto);
    }
    match s.parse::<usize>() {
        Ok(0) | Err(_) => Err(format!("expected a positive integer or 'auto', got '{s}'")),
        Ok(n) => Ok(Clusters::Fixed(n)),
    }
}

/// Value range `lo:hi`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Clamp {
    pub lo: f64,
    pub hi: f64,
}

fn parse_clamp(s: &str) -> Result<Clamp, String> {
    let (lo, hi) = s.split_once(':').ok_or("expected lo:hi")?;
    let lo: f64 = lo
        .trim()
        .parse()
        .map_err(|_| format!("bad lower bound '{lo}'"))?;
    let hi: f64 = hi
        .trim()
        .parse()
        .map_err(|_| format!("bad upper bound '{hi}'"))?;
    if !(lo <= hi) {
        return Err(format!("empty range {lo}:{hi}"));
    }
    Ok(Clamp { lo, hi })
}

fn parse_positive(s: &str) -> Result<f64, String> {
    match s.trim().parse::<f64>() {
        Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
        _ => Err(format!("expected a positive number, got '{s}'")),
    }
}

/// Options shared by every command that builds a model.
#[derive(Debug, Clone, Args)]
pub struct ModelArgs {
    #[arg(long, value_enum)]
    pub mode: Option<ModeArg>,
    #[arg(long, value_enum, default_value = "em")]
    pub backend: BackendArg,
    /// Number of mixture components, or `auto` (km backend).
    #[arg(long, default_value = "1", value_parser = parse_clusters)]
    pub clusters: Clusters,
    /// Maximum number of periods added to the projection.
    #[arg(long, default_value_t = 5)]
    pub max_h: usize,
    /// Longest candidate period, seconds.
    #[arg(long, default_value_t = WEEK)]
    pub longest_period: f64,
    /// Number of candidate periods `longest / k`.
    #[arg(long, default_value_t = 168)]
    pub candidates: usize,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    /// Cluster raw spatial coordinates instead of standardized ones.
    #[arg(long)]
    pub no_standardize: bool,
}

impl ModelArgs {
    pub fn build_config(&self) -> Result<BuildConfig<f64>> {
        if !(self.longest_period > 0.0) || self.candidates == 0 {
            bail!("the candidate period set is empty");
        }
        let backend = Backend::from(self.backend);
        let (n_clusters, auto) = match self.clusters {
            Clusters::Fixed(n) => (n, false),
            Clusters::Auto if backend == Backend::Km => (1, true),
            Clusters::Auto => bail!("--clusters auto needs --backend km"),
        };
        Ok(BuildConfig {
            fit: FitConfig {
                n_clusters,
                seed: self.seed,
                backend,
                ..FitConfig::default()
            },
            spectral: SpectralConfig {
                longest: self.longest_period,
                count: self.candidates,
            },
            max_h: self.max_h,
            standardize: !self.no_standardize,
            auto_clusters: auto,
            ..BuildConfig::default()
        })
    }
}

#[derive(Debug, Clone, Args)]
pub struct TrainArgs {
    /// Training CSV with header `t[,a],x1..xd`.
    #[arg(long)]
    pub input: PathBuf,
    /// Output model file.
    #[arg(long)]
    pub model: PathBuf,
    #[command(flatten)]
    pub model_args: ModelArgs,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Query CSV with header `t,x1..xd`; an `a` column is ignored.
    #[arg(long)]
    pub input: PathBuf,
    /// Clamp predictions into `lo:hi`.
    #[arg(long, value_parser = parse_clamp, allow_hyphen_values = true)]
    pub clamp: Option<Clamp>,
    /// Event models: predict the count of the cell centered on each query
    /// instead of the density.
    #[arg(long)]
    pub cell: bool,
    /// Cell edge for `--cell`, spatial units.
    #[arg(long, default_value_t = 0.2)]
    pub grid_spatial: f64,
    /// Cell duration for `--cell`, seconds.
    #[arg(long, default_value_t = 1800.0)]
    pub grid_temporal: f64,
}

#[derive(Debug, Clone, Args)]
pub struct EvaluateArgs {
    /// Training CSV.
    #[arg(long)]
    pub input: PathBuf,
    /// Held-out fold CSV; repeat for several folds.
    #[arg(long, required = true)]
    pub test: Vec<PathBuf>,
    #[arg(long, default_value = ".")]
    pub out_dir: PathBuf,
    #[command(flatten)]
    pub model_args: ModelArgs,
    /// Hist_n interval counts to sweep.
    #[arg(long, default_value = "1,2,3,4,6,8,12,24", value_delimiter = ',')]
    pub hist_range: Vec<usize>,
    /// FreMEn_m component counts to sweep.
    #[arg(long, default_value = "0,1,2,3,4,5", value_delimiter = ',')]
    pub fremen_range: Vec<usize>,
    /// HyT-EM_k component counts to sweep.
    #[arg(long, default_value = "1,2,3,4", value_delimiter = ',')]
    pub cluster_range: Vec<usize>,
    /// Methods to compare: any of mean,hist,fremen,hyt-em,hyt-km.
    #[arg(
        long,
        value_enum,
        default_value = "mean,hist,fremen,hyt-em,hyt-km",
        value_delimiter = ','
    )]
    pub methods: Vec<Method>,
    #[arg(long, default_value_t = 0.05)]
    pub alpha: f64,
    /// Event mode: spatial cell edges; the first scores the folds, all
    /// are dumped as heatmaps.
    #[arg(long, default_value = "0.2", value_delimiter = ',', value_parser = parse_positive)]
    pub grid_spatial: Vec<f64>,
    /// Event mode: temporal bin lengths in seconds, as `--grid-spatial`.
    #[arg(long, default_value = "1800", value_delimiter = ',', value_parser = parse_positive)]
    pub grid_temporal: Vec<f64>,
    #[arg(long)]
    pub force: bool,
}

#[derive(Debug, Clone, Args)]
pub struct SpectrumArgs {
    /// Valued CSV.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = WEEK)]
    pub longest_period: f64,
    #[arg(long, default_value_t = 168)]
    pub candidates: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, ValueEnum)]
pub enum Method {
    Mean,
    Hist,
    Fremen,
    HytEm,
    HytKm,
}

impl Method {
    pub fn label(self) -> &'static str {
        match self {
            Method::Mean => "Mean",
            Method::Hist => "Hist",
            Method::Fremen => "FreMEn",
            Method::HytEm => "HyT-EM",
            Method::HytKm => "HyT-KM",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Generator {
    /// Binary door state open during office hours.
    OfficeHours,
    /// Daily plus weekly cosine.
    DailyWeekly,
    /// Pure daily cosine.
    DailyCosine,
    /// 2-D pedestrian detections.
    Pedestrians,
}

#[derive(Debug, Clone, Args)]
pub struct GenerateArgs {
    #[arg(long, value_enum)]
    pub kind: Generator,
    /// Output CSV.
    #[arg(long)]
    pub output: PathBuf,
    /// Length in days.
    #[arg(long, default_value_t = 21.0)]
    pub days: f64,
    /// Start of the series, seconds.
    #[arg(long, default_value_t = 0.0)]
    pub start: f64,
    /// Noise standard deviation (valued generators).
    #[arg(long, default_value_t = 0.1)]
    pub noise: f64,
    #[arg(long, default_value_t = 42)]
    pub seed: u64,
    #[arg(long)]
    pub force: bool,
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn value_parsers() {
        assert_eq!(parse_clusters("auto"), Ok(Clusters::Auto));
        assert_eq!(parse_clusters("3"), Ok(Clusters::Fixed(3)));
        assert!(parse_clusters("0").is_err());
        assert_eq!(parse_clamp("0:1").unwrap(), Clamp { lo: 0.0, hi: 1.0 });
        assert_eq!(parse_clamp("-1:1").unwrap().lo, -1.0);
        assert!(parse_clamp("1:0").is_err());
        assert!(parse_positive("0").is_err());
        let cli = Cli::try_parse_from([
            "hypertime",
            "evaluate",
            "--input",
            "a",
            "--test",
            "b",
            "--hist-range",
            "1,4",
        ])
        .unwrap();
        let Command::Evaluate(e) = cli.command else {
            panic!()
        };
        assert_eq!(e.hist_range, vec![1, 4]);
        assert_eq!(e.methods.len(), 5);
    }

    #[test]
    fn auto_clusters_needs_km() {
        let cli = Cli::try_parse_from([
            "hypertime",
            "train",
            "--input",
            "a",
            "--model",
            "m",
            "--clusters",
            "auto",
        ])
        .unwrap();
        let Command::Train(t) = cli.command else {
            panic!()
        };
        assert!(t.model_args.build_config().is_err());
    }
}
