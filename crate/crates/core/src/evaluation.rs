//! Benchmark methodology: error metrics, spatio-temporal grids, histogram
//! comparison, parameter sweeps and paired t-tests between methods.

use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::baselines::{
    train_baseline, BaselineConfig, FourierBasis, FremenPredictor, HistPredictor, Predictor,
};
use crate::dataset::{Dataset, Measurement, Mode, SpatialStats};
use crate::error::{Error, Result};
use crate::model::{build, BuildConfig};
use crate::scalar::Scalar;
use crate::spectral::SpectralConfig;

pub fn rmse<F: Scalar>(predictions: &[F], truth: &[F]) -> Result<F> {
    if predictions.len() != truth.len() {
        return Err(Error::LengthMismatch {
            left: predictions.len(),
            right: truth.len(),
        });
    }
    if predictions.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let ss: F = predictions
        .iter()
        .zip(truth)
        .map(|(&p, &s)| (p - s) * (p - s))
        .sum();
    Ok((ss / F::from_usize_lossy(truth.len())).sqrt())
}

/// Regular grid over a spatial box and a time interval. Cells are
/// half-open; the grid covers `[lo, lo + n·edge)` per spatial dimension with
/// `n = ceil((hi − lo) / edge)`, and likewise in time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    lo: Vec<f64>,
    hi: Vec<f64>,
    spatial_edge: f64,
    t0: f64,
    t1: f64,
    temporal_len: f64,
    spatial_counts: Vec<usize>,
    temporal_count: usize,
}

fn bin_count(span: f64, edge: f64) -> usize {
    ((span / edge) - 1e-9).ceil().max(1.0) as usize
}

/// Half-open bin of `v` with boundaries `origin + i·edge`.
fn bin_of(v: f64, origin: f64, edge: f64, count: usize) -> Option<usize> {
    if !(v >= origin) {
        return None;
    }
    let mut i = ((v - origin) / edge).floor() as usize;
    while i > 0 && origin + i as f64 * edge > v {
        i -= 1;
    }
    while origin + (i + 1) as f64 * edge <= v {
        i += 1;
    }
    (i < count).then_some(i)
}

impl GridSpec {
    pub fn new(
        lo: Vec<f64>,
        hi: Vec<f64>,
        spatial_edge: f64,
        t0: f64,
        t1: f64,
        temporal_len: f64,
    ) -> Result<Self> {
        if lo.len() != hi.len() {
            return Err(Error::DimensionMismatch {
                expected: lo.len(),
                found: hi.len(),
            });
        }
        let all_finite = lo
            .iter()
            .chain(&hi)
            .chain([&t0, &t1])
            .all(|v| v.is_finite());
        if !all_finite
            || lo.iter().zip(&hi).any(|(l, h)| !(h > l))
            || !(t1 > t0)
            || !(temporal_len > 0.0)
            || (!lo.is_empty() && !(spatial_edge > 0.0))
        {
            return Err(Error::DegenerateCell);
        }
        let spatial_counts = lo
            .iter()
            .zip(&hi)
            .map(|(l, h)| bin_count(h - l, spatial_edge))
            .collect();
        Ok(Self {
            temporal_count: bin_count(t1 - t0, temporal_len),
            spatial_counts,
            lo,
            hi,
            spatial_edge,
            t0,
            t1,
            temporal_len,
        })
    }

    pub fn spatial_dim(&self) -> usize {
        self.lo.len()
    }

    pub fn spatial_edge(&self) -> f64 {
        self.spatial_edge
    }

    pub fn temporal_len(&self) -> f64 {
        self.temporal_len
    }

    pub fn time_range(&self) -> (f64, f64) {
        (
            self.t0,
            self.t0 + self.temporal_count as f64 * self.temporal_len,
        )
    }

    pub fn lo(&self) -> &[f64] {
        &self.lo
    }

    pub fn hi(&self) -> &[f64] {
        &self.hi
    }

    pub fn n_spatial(&self) -> usize {
        self.spatial_counts.iter().product()
    }

    pub fn n_temporal(&self) -> usize {
        self.temporal_count
    }

    pub fn n_cells(&self) -> usize {
        self.n_spatial() * self.temporal_count
    }

    /// Same spatial layout over another time interval.
    pub fn with_time(&self, t0: f64, t1: f64) -> Result<Self> {
        Self::new(
            self.lo.clone(),
            self.hi.clone(),
            self.spatial_edge,
            t0,
            t1,
            self.temporal_len,
        )
    }

    /// Flat index `t_bin · n_spatial + spatial_index` of `(x, t)`.
    pub fn locate(&self, x: &[f64], t: f64) -> Option<usize> {
        let tb = bin_of(t, self.t0, self.temporal_len, self.temporal_count)?;
        let mut s = 0;
        for (k, &v) in x.iter().enumerate() {
            let b = bin_of(v, self.lo[k], self.spatial_edge, self.spatial_counts[k])?;
            s = s * self.spatial_counts[k] + b;
        }
        Some(tb * self.n_spatial() + s)
    }

    fn spatial_bins(&self, mut s: usize) -> Vec<usize> {
        let mut bins = vec![0; self.spatial_dim()];
        for k in (0..self.spatial_dim()).rev() {
            bins[k] = s % self.spatial_counts[k];
            s /= self.spatial_counts[k];
        }
        bins
    }

    pub fn cell(&self, index: usize) -> Cell {
        let tb = index / self.n_spatial();
        let bins = self.spatial_bins(index % self.n_spatial());
        let lo: Vec<f64> = bins
            .iter()
            .zip(&self.lo)
            .map(|(&b, &l)| l + b as f64 * self.spatial_edge)
            .collect();
        let hi = bins
            .iter()
            .zip(&self.lo)
            .map(|(&b, &l)| l + (b + 1) as f64 * self.spatial_edge)
            .collect();
        Cell {
            lo,
            hi,
            t0: self.t0 + tb as f64 * self.temporal_len,
            t1: self.t0 + (tb + 1) as f64 * self.temporal_len,
        }
    }
}

/// One spatio-temporal box.
#[derive(Debug, Clone, PartialEq)]
pub struct Cell {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl Cell {
    /// Spatial volume times duration.
    pub fn volume(&self) -> f64 {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| h - l)
            .product::<f64>()
            * (self.t1 - self.t0)
    }

    pub fn t_center(&self) -> f64 {
        0.5 * (self.t0 + self.t1)
    }

    pub fn center(&self) -> Vec<f64> {
        self.lo
            .iter()
            .zip(&self.hi)
            .map(|(l, h)| 0.5 * (l + h))
            .collect()
    }
}

/// Per-cell values (observed counts or predictions) over a grid.
#[derive(Debug, Clone, PartialEq)]
pub struct EvaluationGrid<F: Scalar> {
    pub spec: GridSpec,
    pub values: Vec<F>,
}

impl<F: Scalar> EvaluationGrid<F> {
    pub fn total(&self) -> F {
        self.values.iter().copied().sum()
    }
}

/// `[first, first + n·len)` with the smallest `n` that contains the last
/// record.
pub fn covering_span<F: Scalar>(ds: &Dataset<F>, len: f64) -> Result<(f64, f64)> {
    let (t0, last) = ds.time_range().ok_or(Error::EmptyDataset)?;
    let bins = ((last - t0) / len).floor() + 1.0;
    Ok((t0, t0 + bins * len))
}

/// Bounding box of the spatial coordinates, padded by `margin_std`
/// standard deviations per dimension.
pub fn padded_box<F: Scalar>(ds: &Dataset<F>, margin_std: f64) -> Result<(Vec<f64>, Vec<f64>)> {
    let stats = SpatialStats::from_dataset(ds)?;
    let d = ds.spatial_dim();
    let mut lo = vec![f64::INFINITY; d];
    let mut hi = vec![f64::NEG_INFINITY; d];
    for r in ds.records() {
        for k in 0..d {
            let v = r.x[k].as_f64();
            lo[k] = lo[k].min(v);
            hi[k] = hi[k].max(v);
        }
    }
    for k in 0..d {
        let pad = margin_std * stats.std[k].as_f64();
        lo[k] -= pad;
        hi[k] += pad;
    }
    Ok((lo, hi))
}

/// Counts events per cell; events outside the grid are ignored.
pub fn grid_count<F: Scalar>(events: &Dataset<F>, spec: &GridSpec) -> Result<EvaluationGrid<F>> {
    if events.spatial_dim() != spec.spatial_dim() {
        return Err(Error::DimensionMismatch {
            expected: spec.spatial_dim(),
            found: events.spatial_dim(),
        });
    }
    let mut values = vec![F::zero(); spec.n_cells()];
    let mut x = vec![0.0; spec.spatial_dim()];
    for r in events.records() {
        for (xv, v) in x.iter_mut().zip(&r.x) {
            *xv = v.as_f64();
        }
        if let Some(i) = spec.locate(&x, r.t) {
            values[i] = values[i] + F::one();
        }
    }
    Ok(EvaluationGrid {
        spec: spec.clone(),
        values,
    })
}

/// Sum of absolute per-bin differences.
pub fn histogram_l1<F: Scalar>(g1: &EvaluationGrid<F>, g2: &EvaluationGrid<F>) -> Result<F> {
    if g1.spec != g2.spec {
        return Err(Error::GridMismatch);
    }
    Ok(g1
        .values
        .iter()
        .zip(&g2.values)
        .map(|(&a, &b)| (a - b).abs())
        .sum())
}

/// Per spatial cell, fits `cfg` to the training counts binned at the grid's
/// temporal resolution over `train_span`, then predicts every cell of
/// `spec`.
pub fn per_cell_baseline<F: Scalar>(
    train: &Dataset<F>,
    train_span: (f64, f64),
    spec: &GridSpec,
    cfg: &BaselineConfig,
    spectral: &SpectralConfig,
) -> Result<EvaluationGrid<F>> {
    let train_grid = spec.with_time(train_span.0, train_span.1)?;
    let counts = grid_count(train, &train_grid)?.values;
    let ns = spec.n_spatial();
    let nt_train = train_grid.n_temporal();
    let train_times: Vec<f64> = (0..nt_train)
        .map(|b| train_grid.cell(b * ns).t_center())
        .collect();
    let test_times: Vec<f64> = (0..spec.n_temporal())
        .map(|b| spec.cell(b * ns).t_center())
        .collect();
    let basis = match cfg {
        BaselineConfig::Fremen { m_components } if *m_components > 0 => {
            Some(FourierBasis::<F>::new(&train_times, &spectral.candidates()))
        }
        _ => None,
    };
    let mut values = vec![F::zero(); spec.n_cells()];
    for s in 0..ns {
        let series: Vec<F> = (0..nt_train).map(|b| counts[b * ns + s]).collect();
        if series.iter().all(|&c| c == F::zero()) {
            continue;
        }
        let predictor: Box<dyn Predictor<F>> = match (cfg, &basis) {
            (BaselineConfig::Fremen { m_components }, Some(basis)) => {
                Box::new(FremenPredictor::fit_on_basis(basis, &series, *m_components))
            }
            (BaselineConfig::Hist { n_intervals }, _) => {
                if *n_intervals == 0 {
                    return Err(Error::InvalidConfig(
                        "histogram needs at least one interval".into(),
                    ));
                }
                let ds = count_series(&train_times, &series)?;
                Box::new(HistPredictor::train(&ds, *n_intervals)?)
            }
            _ => train_baseline(cfg, &count_series(&train_times, &series)?, spectral)?,
        };
        for (b, &t) in test_times.iter().enumerate() {
            values[b * ns + s] = predictor.predict(&[], t)?;
        }
    }
    Ok(EvaluationGrid {
        spec: spec.clone(),
        values,
    })
}

fn count_series<F: Scalar>(times: &[f64], counts: &[F]) -> Result<Dataset<F>> {
    Dataset::new(
        times
            .iter()
            .zip(counts)
            .map(|(&t, &c)| Measurement::valued(t, c, vec![]))
            .collect(),
        0,
        Mode::Valued,
    )
}

/// Gnuplot-friendly rows: cell center coordinates, temporal bin, observed
/// and predicted value.
pub fn write_heatmap<F: Scalar, W: Write>(
    mut w: W,
    observed: &EvaluationGrid<F>,
    predicted: &EvaluationGrid<F>,
) -> Result<()> {
    if observed.spec != predicted.spec {
        return Err(Error::GridMismatch);
    }
    let spec = &observed.spec;
    let io = |source| Error::Io {
        path: "<heatmap>".into(),
        source,
    };
    let mut header = String::from("#");
    for k in 1..=spec.spatial_dim() {
        header.push_str(&format!(" x{k}"));
    }
    writeln!(w, "{header} t_bin d_g p_g").map_err(io)?;
    let ns = spec.n_spatial();
    for i in 0..spec.n_cells() {
        if i > 0 && i % ns == 0 {
            writeln!(w).map_err(io)?;
        }
        let cell = spec.cell(i);
        let mut row = String::new();
        for c in cell.center() {
            row.push_str(&format!("{c} "));
        }
        writeln!(
            w,
            "{row}{} {} {}",
            i / ns,
            observed.values[i],
            predicted.values[i]
        )
        .map_err(io)?;
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Student t distribution

fn ln_gamma(x: f64) -> f64 {
    // Lanczos approximation, g = 7, n = 9.
    const COEF: [f64; 9] = [
        0.999_999_999_999_809_9,
        676.520_368_121_885_1,
        -1_259.139_216_722_402_8,
        771.323_428_777_653_1,
        -176.615_029_162_140_6,
        12.507_343_278_686_905,
        -0.138_571_095_265_720_12,
        9.984_369_578_019_572e-6,
        1.505_632_735_149_311_6e-7,
    ];
    if x < 0.5 {
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let t = x + 7.5;
    let mut a = COEF[0];
    for (i, &c) in COEF.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * std::f64::consts::TAU.ln() + (x + 0.5) * t.ln() - t + a.ln()
}

/// Continued fraction for the incomplete beta function (modified Lentz).
fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta `I_x(a, b)`.
pub fn regularized_incomplete_beta(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    if x < (a + 1.0) / (a + b + 2.0) {
        ln_front.exp() * beta_cf(a, b, x) / a
    } else {
        1.0 - ln_front.exp() * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Two-sided p-value of Student's t with `df` degrees of freedom.
pub fn student_t_two_sided(t: f64, df: f64) -> f64 {
    regularized_incomplete_beta(0.5 * df, 0.5, df / (df + t * t))
}

// ---------------------------------------------------------------------------
// Pairwise comparison

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairResult {
    /// `None` when the difference has zero variance but non-zero mean.
    pub t: Option<f64>,
    pub p_value: Option<f64>,
    pub significant: bool,
    /// The per-fold differences had zero variance.
    pub degenerate: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct DominanceEdge {
    pub better: String,
    pub worse: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub methods: Vec<String>,
    pub mean_errors: Vec<f64>,
    pub alpha: f64,
    /// `matrix[a][b]` tests `errors[a] − errors[b]`; the diagonal is `None`.
    pub matrix: Vec<Vec<Option<PairResult>>>,
    pub edges: Vec<DominanceEdge>,
}

impl ComparisonReport {
    pub fn has_edge(&self, better: &str, worse: &str) -> bool {
        self.edges
            .iter()
            .any(|e| e.better == better && e.worse == worse)
    }
}

fn paired_test(a: &[f64], b: &[f64], alpha: f64) -> PairResult {
    let f = a.len() as f64;
    let diffs: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
    let mean = diffs.iter().sum::<f64>() / f;
    let var = diffs.iter().map(|d| (d - mean) * (d - mean)).sum::<f64>() / (f - 1.0);
    let scale = diffs.iter().fold(0.0f64, |m, d| m.max(d.abs()));
    if !(var.sqrt() > 1e-12 * scale) || var == 0.0 {
        let zero = mean == 0.0;
        return PairResult {
            t: zero.then_some(0.0),
            p_value: zero.then_some(1.0),
            significant: false,
            degenerate: true,
        };
    }
    let t = mean / (var / f).sqrt();
    let p = student_t_two_sided(t, f - 1.0);
    PairResult {
        t: Some(t),
        p_value: Some(p),
        significant: p < alpha,
        degenerate: false,
    }
}

/// Paired two-sided t-tests between every ordered pair of methods.
/// `A → B` is an edge when A's mean error is lower and `p < alpha`.
pub fn pairwise_ttests(
    errors: &BTreeMap<String, Vec<f64>>,
    alpha: f64,
) -> Result<ComparisonReport> {
    let methods: Vec<String> = errors.keys().cloned().collect();
    let folds = errors.values().next().map_or(0, Vec::len);
    if let Some(bad) = errors.values().find(|v| v.len() != folds) {
        return Err(Error::LengthMismatch {
            left: folds,
            right: bad.len(),
        });
    }
    if !methods.is_empty() && folds < 2 {
        return Err(Error::TooFewFolds(folds));
    }
    let series: Vec<&Vec<f64>> = errors.values().collect();
    let mean_errors: Vec<f64> = series
        .iter()
        .map(|v| v.iter().sum::<f64>() / folds as f64)
        .collect();
    let mut matrix = vec![vec![None; methods.len()]; methods.len()];
    let mut edges = Vec::new();
    for a in 0..methods.len() {
        for b in 0..methods.len() {
            if a == b {
                continue;
            }
            let r = paired_test(series[a], series[b], alpha);
            if r.significant && mean_errors[a] < mean_errors[b] {
                edges.push(DominanceEdge {
                    better: methods[a].clone(),
                    worse: methods[b].clone(),
                });
            }
            matrix[a][b] = Some(r);
        }
    }
    Ok(ComparisonReport {
        methods,
        mean_errors,
        alpha,
        matrix,
        edges,
    })
}

// ---------------------------------------------------------------------------
// Parameter sweeps

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SweepResult<F: Scalar> {
    pub best: usize,
    /// `(parameter, validation error)`; `None` where training failed.
    pub scores: Vec<(usize, Option<F>)>,
}

/// Scores every parameter, returning the lowest error; ties go to the
/// smaller parameter and failing parameters are skipped.
pub fn sweep_by<F: Scalar>(
    params: &[usize],
    mut score: impl FnMut(usize) -> Result<F>,
) -> Result<SweepResult<F>> {
    if params.is_empty() {
        return Err(Error::InvalidConfig("empty parameter range".into()));
    }
    let mut sorted = params.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut best: Option<(usize, F)> = None;
    let mut scores = Vec::with_capacity(sorted.len());
    for p in sorted {
        match score(p) {
            Ok(e) if e.is_finite() => {
                if best.is_none_or(|(_, b)| e < b) {
                    best = Some((p, e));
                }
                scores.push((p, Some(e)));
            }
            Ok(_) => {
                log::warn!("parameter {p}: non-finite validation error, skipped");
                scores.push((p, None));
            }
            Err(err) => {
                log::warn!("parameter {p}: {err}, skipped");
                scores.push((p, None));
            }
        }
    }
    let (best, _) = best.ok_or(Error::SweepFailed)?;
    Ok(SweepResult { best, scores })
}

/// Parameterized method families a sweep can tune.
#[derive(Debug, Clone)]
pub enum MethodFamily<F: Scalar> {
    /// Parameter: number of daily intervals.
    Hist,
    /// Parameter: number of periodic components.
    Fremen(SpectralConfig),
    /// Parameter: number of mixture components.
    Hypertime(BuildConfig<F>),
}

pub fn train_family<F: Scalar>(
    family: &MethodFamily<F>,
    train: &Dataset<F>,
    param: usize,
) -> Result<Box<dyn Predictor<F>>> {
    Ok(match family {
        MethodFamily::Hist => train_baseline(
            &BaselineConfig::Hist { n_intervals: param },
            train,
            &SpectralConfig::default(),
        )?,
        MethodFamily::Fremen(spectral) => train_baseline(
            &BaselineConfig::Fremen {
                m_components: param,
            },
            train,
            spectral,
        )?,
        MethodFamily::Hypertime(cfg) => {
            let mut cfg = cfg.clone();
            cfg.fit.n_clusters = param;
            Box::new(build(train, &cfg)?)
        }
    })
}

/// Root mean squared error of `predictor` on a valued dataset.
pub fn score<F: Scalar>(predictor: &dyn Predictor<F>, data: &Dataset<F>) -> Result<F> {
    data.require_mode(Mode::Valued)?;
    let preds = data
        .records()
        .iter()
        .map(|r| predictor.predict(&r.x, r.t))
        .collect::<Result<Vec<F>>>()?;
    rmse(&preds, &data.values())
}

pub fn sweep<F: Scalar>(
    train: &Dataset<F>,
    validation: &Dataset<F>,
    family: &MethodFamily<F>,
    params: &[usize],
) -> Result<SweepResult<F>> {
    sweep_by(params, |p| {
        score(train_family(family, train, p)?.as_ref(), validation)
    })
}
