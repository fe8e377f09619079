use std::collections::BTreeMap;
use std::io::Write;

use anyhow::{bail, Result};
use hypertime::baselines::{train_baseline, BaselineConfig};
use hypertime::clustering::Backend;
use hypertime::evaluation::{
    covering_span, grid_count, histogram_l1, padded_box, pairwise_ttests, per_cell_baseline, score,
    sweep, sweep_by, train_family, ComparisonReport, EvaluationGrid, GridSpec, MethodFamily,
    SweepResult,
};
use hypertime::model::{build_event, HypertimeModel};
use hypertime::{build, split_by_time, BuildConfig, Dataset, Mode, Predictor};
use serde::Serialize;

use crate::args::{EvaluateArgs, Method};
use crate::commands::load;
use crate::output::{write_atomic, write_string};

/// Share of the training span held out to tune parameters.
const VALIDATION_SHARE: f64 = 0.25;
/// Padding of the event grid box around the training detections.
const BOX_MARGIN_STD: f64 = 3.0;

#[derive(Debug, Clone)]
pub struct EvaluateOptions {
    pub build: BuildConfig<f64>,
    pub methods: Vec<Method>,
    pub hist_range: Vec<usize>,
    pub fremen_range: Vec<usize>,
    pub cluster_range: Vec<usize>,
    pub alpha: f64,
    /// Event mode: `(spatial edge, temporal length)` pairs; the first one
    /// scores the folds.
    pub resolutions: Vec<(f64, f64)>,
}

impl EvaluateOptions {
    pub fn from_args(args: &EvaluateArgs) -> Result<Self> {
        let mut methods = args.methods.clone();
        methods.sort();
        methods.dedup();
        let resolutions = args
            .grid_spatial
            .iter()
            .flat_map(|&s| args.grid_temporal.iter().map(move |&t| (s, t)))
            .collect();
        Ok(Self {
            build: args.model_args.build_config()?,
            methods,
            hist_range: args.hist_range.clone(),
            fremen_range: args.fremen_range.clone(),
            cluster_range: args.cluster_range.clone(),
            alpha: args.alpha,
            resolutions,
        })
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MethodSummary {
    /// Tuned parameter (intervals, components or clusters).
    pub parameter: Option<usize>,
    pub sweep: Option<SweepResult<f64>>,
}

/// Observed and predicted grids of the first fold at one resolution.
#[derive(Debug, Clone)]
pub struct Heatmap {
    pub method: String,
    pub spatial: f64,
    pub temporal: f64,
    pub observed: EvaluationGrid<f64>,
    pub predicted: EvaluationGrid<f64>,
}

#[derive(Debug, Clone)]
pub struct Evaluation {
    /// Per-fold errors keyed by method label.
    pub errors: BTreeMap<String, Vec<f64>>,
    pub summaries: BTreeMap<String, MethodSummary>,
    /// `None` when fewer than two folds were given.
    pub report: Option<ComparisonReport>,
    pub heatmaps: Vec<Heatmap>,
}

fn inner_split(train: &Dataset<f64>) -> Result<(Dataset<f64>, Dataset<f64>)> {
    let (t0, t1) = train.time_range().expect("non-empty");
    Ok(split_by_time(train, t1 - VALIDATION_SHARE * (t1 - t0))?)
}

fn hypertime_config(base: &BuildConfig<f64>, backend: Backend, k: usize) -> BuildConfig<f64> {
    let mut cfg = base.clone();
    cfg.fit.backend = backend;
    cfg.fit.n_clusters = k;
    cfg.auto_clusters = false;
    cfg
}

pub fn evaluate(
    train: &Dataset<f64>,
    tests: &[Dataset<f64>],
    opts: &EvaluateOptions,
) -> Result<Evaluation> {
    if tests.is_empty() {
        bail!("no test folds");
    }
    for (i, t) in tests.iter().enumerate() {
        if t.mode() != train.mode() || t.spatial_dim() != train.spatial_dim() {
            bail!(
                "test fold {} does not match the training data layout",
                i + 1
            );
        }
    }
    let mut eval = match train.mode() {
        Mode::Valued => evaluate_valued(train, tests, opts)?,
        Mode::Event => evaluate_events(train, tests, opts)?,
    };
    eval.report = if tests.len() < 2 {
        log::warn!("only {} test fold; skipping t-tests", tests.len());
        None
    } else {
        Some(pairwise_ttests(&eval.errors, opts.alpha)?)
    };
    Ok(eval)
}

fn evaluate_valued(
    train: &Dataset<f64>,
    tests: &[Dataset<f64>],
    opts: &EvaluateOptions,
) -> Result<Evaluation> {
    let (inner, validation) = inner_split(train)?;
    let mut errors = BTreeMap::new();
    let mut summaries = BTreeMap::new();
    for &method in &opts.methods {
        log::info!("evaluating {}", method.label());
        let tuned = |family: MethodFamily<f64>,
                     range: &[usize]|
         -> Result<(Box<dyn Predictor<f64>>, MethodSummary)> {
            let s = sweep(&inner, &validation, &family, range)?;
            let predictor = train_family(&family, train, s.best)?;
            Ok((
                predictor,
                MethodSummary {
                    parameter: Some(s.best),
                    sweep: Some(s),
                },
            ))
        };
        let (predictor, summary) = match method {
            Method::Mean => (
                train_baseline(&BaselineConfig::Mean, train, &opts.build.spectral)?,
                MethodSummary {
                    parameter: None,
                    sweep: None,
                },
            ),
            Method::Hist => tuned(MethodFamily::Hist, &opts.hist_range)?,
            Method::Fremen => tuned(
                MethodFamily::Fremen(opts.build.spectral),
                &opts.fremen_range,
            )?,
            Method::HytEm => tuned(
                MethodFamily::Hypertime(hypertime_config(&opts.build, Backend::Em, 1)),
                &opts.cluster_range,
            )?,
            Method::HytKm => {
                let mut cfg = hypertime_config(&opts.build, Backend::Km, 1);
                cfg.auto_clusters = true;
                let model = build(train, &cfg)?;
                let chosen = model.cluster_selection().map(|s| s.chosen);
                (
                    Box::new(model) as Box<dyn Predictor<f64>>,
                    MethodSummary {
                        parameter: chosen,
                        sweep: None,
                    },
                )
            }
        };
        let fold_errors = tests
            .iter()
            .map(|t| Ok(score(predictor.as_ref(), t)?))
            .collect::<Result<Vec<f64>>>()?;
        errors.insert(method.label().to_string(), fold_errors);
        summaries.insert(method.label().to_string(), summary);
    }
    Ok(Evaluation {
        errors,
        summaries,
        report: None,
        heatmaps: Vec::new(),
    })
}

/// Grid over `ds`'s covering span with the given spatial box.
fn fold_grid(
    ds: &Dataset<f64>,
    bounds: &(Vec<f64>, Vec<f64>),
    spatial: f64,
    temporal: f64,
) -> Result<GridSpec> {
    let (t0, t1) = covering_span(ds, temporal)?;
    Ok(GridSpec::new(
        bounds.0.clone(),
        bounds.1.clone(),
        spatial,
        t0,
        t1,
        temporal,
    )?)
}

/// Trained event-mode method that can fill a grid with predicted counts.
enum EventPredictor<'a> {
    Baseline {
        cfg: BaselineConfig,
        train: &'a Dataset<f64>,
        span: (f64, f64),
    },
    Hypertime(Box<HypertimeModel<f64>>),
}

impl EventPredictor<'_> {
    fn predict(
        &self,
        grid: &GridSpec,
        opts: &EvaluateOptions,
    ) -> hypertime::Result<EvaluationGrid<f64>> {
        Ok(match self {
            EventPredictor::Baseline { cfg, train, span } => {
                per_cell_baseline(train, *span, grid, cfg, &opts.build.spectral)?
            }
            EventPredictor::Hypertime(model) => EvaluationGrid {
                spec: grid.clone(),
                values: model.predict_grid(grid, 1)?,
            },
        })
    }
}

fn train_event<'a>(
    method: Method,
    train: &'a Dataset<f64>,
    span: (f64, f64),
    param: usize,
    opts: &EvaluateOptions,
) -> hypertime::Result<EventPredictor<'a>> {
    let baseline = |cfg| EventPredictor::Baseline { cfg, train, span };
    Ok(match method {
        Method::Mean => baseline(BaselineConfig::Mean),
        Method::Hist => baseline(BaselineConfig::Hist { n_intervals: param }),
        Method::Fremen => baseline(BaselineConfig::Fremen {
            m_components: param,
        }),
        Method::HytEm => EventPredictor::Hypertime(Box::new(build_event(
            train,
            &hypertime_config(&opts.build, Backend::Em, param),
        )?)),
        Method::HytKm => EventPredictor::Hypertime(Box::new(build_event(
            train,
            &hypertime_config(&opts.build, Backend::Km, param),
        )?)),
    })
}

fn evaluate_events(
    train: &Dataset<f64>,
    tests: &[Dataset<f64>],
    opts: &EvaluateOptions,
) -> Result<Evaluation> {
    let Some(&(spatial, temporal)) = opts.resolutions.first() else {
        bail!("no grid resolution configured");
    };
    let bounds = padded_box(train, BOX_MARGIN_STD)?;
    let (inner, validation) = inner_split(train)?;
    let inner_span = covering_span(&inner, temporal)?;
    let train_span = covering_span(train, temporal)?;
    let validation_grid = fold_grid(&validation, &bounds, spatial, temporal)?;
    let validation_counts = grid_count(&validation, &validation_grid)?;
    let fold_grids = tests
        .iter()
        .map(|t| {
            let g = fold_grid(t, &bounds, spatial, temporal)?;
            let counts = grid_count(t, &g)?;
            Ok((g, counts))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut errors = BTreeMap::new();
    let mut summaries = BTreeMap::new();
    let mut heatmaps = Vec::new();
    for &method in &opts.methods {
        log::info!("evaluating {}", method.label());
        let range = match method {
            Method::Mean => None,
            Method::Hist => Some(&opts.hist_range),
            Method::Fremen => Some(&opts.fremen_range),
            Method::HytEm | Method::HytKm => Some(&opts.cluster_range),
        };
        let summary = match range {
            None => MethodSummary {
                parameter: None,
                sweep: None,
            },
            Some(range) => {
                let s = sweep_by(range, |p| {
                    let predicted = train_event(method, &inner, inner_span, p, opts)?
                        .predict(&validation_grid, opts)?;
                    histogram_l1(&validation_counts, &predicted)
                })?;
                MethodSummary {
                    parameter: Some(s.best),
                    sweep: Some(s),
                }
            }
        };
        let predictor = train_event(
            method,
            train,
            train_span,
            summary.parameter.unwrap_or(0),
            opts,
        )?;
        let mut fold_errors = Vec::with_capacity(tests.len());
        for (grid, counts) in &fold_grids {
            fold_errors.push(histogram_l1(counts, &predictor.predict(grid, opts)?)?);
        }
        if matches!(method, Method::HytEm) {
            for &(s, t) in &opts.resolutions {
                let grid = fold_grid(&tests[0], &bounds, s, t)?;
                heatmaps.push(Heatmap {
                    method: method.label().to_string(),
                    spatial: s,
                    temporal: t,
                    observed: grid_count(&tests[0], &grid)?,
                    predicted: predictor.predict(&grid, opts)?,
                });
            }
        }
        errors.insert(method.label().to_string(), fold_errors);
        summaries.insert(method.label().to_string(), summary);
    }
    Ok(Evaluation {
        errors,
        summaries,
        report: None,
        heatmaps,
    })
}

pub fn errors_csv(errors: &BTreeMap<String, Vec<f64>>) -> String {
    let mut out = String::from("method,fold,error\n");
    for (method, folds) in errors {
        for (i, e) in folds.iter().enumerate() {
            out.push_str(&format!("{method},{},{e}\n", i + 1));
        }
    }
    out
}

pub fn run(args: &EvaluateArgs, stdout: &mut dyn Write) -> Result<()> {
    let opts = EvaluateOptions::from_args(args)?;
    let expected = args.model_args.mode.map(Mode::from);
    let train = load(&args.input, expected)?;
    let tests = args
        .test
        .iter()
        .map(|p| load(p, Some(train.mode())))
        .collect::<Result<Vec<_>>>()?;
    let eval = evaluate(&train, &tests, &opts)?;

    let dir = &args.out_dir;
    write_string(
        &dir.join("errors.csv"),
        args.force,
        &errors_csv(&eval.errors),
    )?;
    write_string(
        &dir.join("parameters.json"),
        args.force,
        &serde_json::to_string_pretty(&eval.summaries)?,
    )?;
    if let Some(report) = &eval.report {
        write_string(
            &dir.join("ttests.json"),
            args.force,
            &serde_json::to_string_pretty(report)?,
        )?;
    }
    for h in &eval.heatmaps {
        let name = format!("heatmap_{}_s{}_t{}.dat", h.method, h.spatial, h.temporal);
        write_atomic(&dir.join(name), args.force, |w| {
            Ok(hypertime::evaluation::write_heatmap(
                w,
                &h.observed,
                &h.predicted,
            )?)
        })?;
    }

    writeln!(stdout, "method\tparameter\tmean_error")?;
    for (method, folds) in &eval.errors {
        let param = eval.summaries[method]
            .parameter
            .map_or_else(|| "-".to_string(), |p| p.to_string());
        let mean = folds.iter().sum::<f64>() / folds.len() as f64;
        writeln!(stdout, "{method}\t{param}\t{mean}")?;
    }
    if let Some(report) = &eval.report {
        for e in &report.edges {
            writeln!(stdout, "{} -> {}", e.better, e.worse)?;
        }
    }
    Ok(())
}
