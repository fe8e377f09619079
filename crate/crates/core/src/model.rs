//! The iterative hypertime build loop and every prediction query.
//!
//! Prediction of a value uses the mixture's joint density `p(a, x, t)`
//! directly: `μ(x, t) = ∫ a p(a, x, t) da`, evaluated in closed form per
//! component as `q_j(x, t) · c_j(x, t)` where `q_j` is the marginal density
//! over the non-value dimensions and `c_j` the conditional mean of `a`.

use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{self, FitConfig, GaussianDensity, MixtureModel};
use crate::dataset::{standardize, Dataset, Mode, SpatialStats};
use crate::error::{Error, Result};
use crate::evaluation::{covering_span, grid_count, padded_box, Cell, GridSpec};
use crate::hypertime::{
    assemble, extend_vectors, project_time, DimensionLayout, HypertimeProjection,
};
use crate::scalar::Scalar;
use crate::spectral::{prominent_period, spectral_sum, ResidualSeries, SpectralConfig};

pub const MODEL_FORMAT_VERSION: u32 = 1;

/// Reference grid used by event-mode models for calibration and residuals.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EventGridConfig {
    /// Temporal bin length of the residual grid, seconds.
    pub temporal_bin: f64,
    /// Spatial bin edge of the residual grid, raw units.
    pub spatial_bin: f64,
    /// Padding of the training bounding box, in training standard deviations.
    pub margin_std: f64,
    /// Step of the temporal quadrature used to calibrate the scale.
    pub calibration_step: f64,
}

impl Default for EventGridConfig {
    fn default() -> Self {
        Self {
            temporal_bin: 1800.0,
            spatial_bin: 0.5,
            margin_std: 3.0,
            calibration_step: 300.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BuildConfig<F: Scalar> {
    pub fit: FitConfig<F>,
    pub spectral: SpectralConfig,
    pub max_h: usize,
    /// Standardize spatial coordinates before clustering.
    pub standardize: bool,
    /// Choose the component count from residual spectra (km backend only).
    pub auto_clusters: bool,
    pub cluster_cap: usize,
    pub event_grid: EventGridConfig,
}

impl<F: Scalar> Default for BuildConfig<F> {
    fn default() -> Self {
        Self {
            fit: FitConfig::default(),
            spectral: SpectralConfig::default(),
            max_h: 5,
            standardize: true,
            auto_clusters: false,
            cluster_cap: 8,
            event_grid: EventGridConfig::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct BuildStep<F: Scalar> {
    pub h: usize,
    pub error: F,
    /// Period appended to reach this step; `None` for `h = 0`.
    pub period: Option<f64>,
    pub kept: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct ClusterCountSelection<F: Scalar> {
    /// `(n, T_Σ(n))` in evaluation order.
    pub pairs: Vec<(usize, F)>,
    pub chosen: usize,
}

/// Spatio-temporal extent of an event-mode training set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingVolume {
    pub lo: Vec<f64>,
    pub hi: Vec<f64>,
    pub t0: f64,
    pub t1: f64,
}

impl TrainingVolume {
    pub fn grid(&self, spatial_edge: f64, temporal_len: f64) -> Result<GridSpec> {
        GridSpec::new(
            self.lo.clone(),
            self.hi.clone(),
            spatial_edge,
            self.t0,
            self.t1,
            temporal_len,
        )
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GammaCalibration<F: Scalar> {
    pub gamma: F,
    /// The ratio was zero, negative or not finite; `gamma` fell back to 1.
    pub degenerate: bool,
}

#[derive(Debug, Clone)]
struct ComponentEval<F: Scalar> {
    weight: F,
    full: Option<GaussianDensity<F>>,
    /// Marginal over the conditioning dimensions (`None`: no such dims).
    marginal: Option<GaussianDensity<F>>,
    value_mean: F,
    cond_mean: Vec<F>,
    /// `Σ_RR^{-1} Σ_Ra`.
    beta: Vec<F>,
    /// Marginal over the temporal dimensions only.
    temporal: Option<GaussianDensity<F>>,
}

impl<F: Scalar> ComponentEval<F> {
    fn new(c: &clustering::GaussianComponent<F>, layout: &DimensionLayout) -> Self {
        let cond = layout.conditioning_indices();
        let sub = |idx: &[usize]| {
            if idx.is_empty() {
                None
            } else {
                let mean: Vec<F> = idx.iter().map(|&i| c.mean[i]).collect();
                GaussianDensity::new(&mean, &c.covariance.principal(idx))
            }
        };
        let marginal = sub(&cond);
        let (value_mean, beta) = match (layout.value, &marginal) {
            (Some(v), Some(m)) => (
                c.mean[v],
                m.chol().solve(&c.covariance.row_entries(v, &cond)),
            ),
            (Some(v), None) => (c.mean[v], Vec::new()),
            (None, _) => (F::zero(), Vec::new()),
        };
        Self {
            weight: c.weight,
            full: GaussianDensity::new(&c.mean, &c.covariance),
            marginal,
            value_mean,
            cond_mean: cond.iter().map(|&i| c.mean[i]).collect(),
            beta,
            temporal: sub(&layout.temporal_indices()),
        }
    }

    /// `(q_j, c_j)` at conditioning coordinates `z`.
    fn marginal_and_conditional(&self, z: &[F]) -> (F, F) {
        let q = self
            .marginal
            .as_ref()
            .map_or(F::one(), |m| m.log_pdf(z).exp());
        let c = self.value_mean
            + self
                .beta
                .iter()
                .zip(z.iter().zip(&self.cond_mean))
                .map(|(&b, (&x, &m))| b * (x - m))
                .sum::<F>();
        (q, c)
    }
}

/// Trained predictor: mixture, projection, scale and spatial statistics.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HypertimeModel<F: Scalar> {
    version: u32,
    mode: Mode,
    projection: HypertimeProjection,
    layout: DimensionLayout,
    gamma: F,
    gamma_degenerate: bool,
    spatial_stats: SpatialStats<F>,
    training_error: F,
    build_log: Vec<BuildStep<F>>,
    cluster_selection: Option<ClusterCountSelection<F>>,
    volume: Option<TrainingVolume>,
    mixture: MixtureModel<F>,
    #[serde(skip)]
    cache: OnceLock<Vec<ComponentEval<F>>>,
}

impl<F: Scalar> HypertimeModel<F> {
    /// Model with `γ = 1` and an empty build log.
    pub fn from_parts(
        mode: Mode,
        projection: HypertimeProjection,
        mixture: MixtureModel<F>,
        spatial_stats: SpatialStats<F>,
    ) -> Result<Self> {
        let layout = mixture.layout.clone();
        if layout.temporal.len() != projection.len() || layout.spatial_dim() != spatial_stats.dim()
        {
            return Err(Error::DimensionMismatch {
                expected: layout.len(),
                found: usize::from(mode == Mode::Valued)
                    + spatial_stats.dim()
                    + 2 * projection.len(),
            });
        }
        if layout.value.is_some() != (mode == Mode::Valued) {
            return Err(Error::ModeMismatch {
                expected: mode.name(),
            });
        }
        Ok(Self {
            version: MODEL_FORMAT_VERSION,
            mode,
            projection,
            layout,
            gamma: F::one(),
            gamma_degenerate: false,
            spatial_stats,
            training_error: F::nan(),
            build_log: Vec::new(),
            cluster_selection: None,
            volume: None,
            mixture,
            cache: OnceLock::new(),
        })
    }

    pub fn mode(&self) -> Mode {
        self.mode
    }

    pub fn projection(&self) -> &HypertimeProjection {
        &self.projection
    }

    pub fn periods(&self) -> &[f64] {
        self.projection.periods()
    }

    pub fn layout(&self) -> &DimensionLayout {
        &self.layout
    }

    pub fn mixture(&self) -> &MixtureModel<F> {
        &self.mixture
    }

    pub fn gamma(&self) -> F {
        self.gamma
    }

    pub fn gamma_degenerate(&self) -> bool {
        self.gamma_degenerate
    }

    pub fn set_gamma(&mut self, cal: GammaCalibration<F>) {
        self.gamma = cal.gamma;
        self.gamma_degenerate = cal.degenerate;
    }

    pub fn spatial_stats(&self) -> &SpatialStats<F> {
        &self.spatial_stats
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial_stats.dim()
    }

    pub fn training_error(&self) -> F {
        self.training_error
    }

    pub fn build_log(&self) -> &[BuildStep<F>] {
        &self.build_log
    }

    pub fn cluster_selection(&self) -> Option<&ClusterCountSelection<F>> {
        self.cluster_selection.as_ref()
    }

    pub fn training_volume(&self) -> Option<&TrainingVolume> {
        self.volume.as_ref()
    }

    fn evals(&self) -> &[ComponentEval<F>] {
        self.cache.get_or_init(|| {
            self.mixture
                .components
                .iter()
                .map(|c| ComponentEval::new(c, &self.layout))
                .collect()
        })
    }

    /// Standardized coordinates followed by the hypertime projection.
    fn conditioning_point(&self, x: &[F], t: f64) -> Result<Vec<F>> {
        let mut z = self.spatial_stats.apply(x)?;
        z.extend(project_time::<F>(t, &self.projection));
        Ok(z)
    }

    /// `γ Σ w_j u_j(a, x, t)` in raw spatial units.
    pub fn density(&self, a: Option<F>, x: &[F], t: f64) -> Result<F> {
        let z = self.conditioning_point(x, t)?;
        let v = match (self.mode, a) {
            (Mode::Valued, Some(a)) => std::iter::once(a).chain(z).collect(),
            (Mode::Event, None) => z,
            (Mode::Valued, None) => return Err(Error::ModeMismatch { expected: "event" }),
            (Mode::Event, Some(_)) => return Err(Error::ModeMismatch { expected: "valued" }),
        };
        let s: F = self
            .evals()
            .iter()
            .map(|e| {
                e.full
                    .as_ref()
                    .map_or(F::zero(), |g| e.weight * g.log_pdf(&v).exp())
            })
            .sum();
        Ok(self.gamma * s / self.spatial_stats.volume_scale())
    }

    /// Unscaled `(∫ Σ w_j u_j da, ∫ a Σ w_j u_j da)` at `(x, t)`.
    pub fn value_moments(&self, x: &[F], t: f64) -> Result<(F, F)> {
        self.require_mode(Mode::Valued)?;
        let z = self.conditioning_point(x, t)?;
        let vs = self.spatial_stats.volume_scale();
        let (m0, m1) = self
            .evals()
            .iter()
            .fold((F::zero(), F::zero()), |(m0, m1), e| {
                let (q, c) = e.marginal_and_conditional(&z);
                (m0 + e.weight * q, m1 + e.weight * q * c)
            });
        Ok((m0 / vs, m1 / vs))
    }

    pub fn predict_mean(&self, x: &[F], t: f64) -> Result<F> {
        Ok(self.gamma * self.value_moments(x, t)?.1)
    }

    fn require_mode(&self, mode: Mode) -> Result<()> {
        if self.mode == mode {
            Ok(())
        } else {
            Err(Error::ModeMismatch {
                expected: mode.name(),
            })
        }
    }

    fn check_dataset(&self, ds: &Dataset<F>) -> Result<()> {
        ds.require_mode(self.mode)?;
        if ds.spatial_dim() != self.spatial_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spatial_dim(),
                found: ds.spatial_dim(),
            });
        }
        Ok(())
    }

    fn first_moments(&self, ds: &Dataset<F>) -> Result<Vec<F>> {
        self.check_dataset(ds)?;
        ds.records()
            .par_iter()
            .map(|r| self.value_moments(&r.x, r.t).map(|m| m.1))
            .collect()
    }

    /// `γ = Σ a_i / Σ_i ∫ a Σ_j w_j u_j da`, so that the training average of
    /// the predicted mean equals the training average of `a`.
    pub fn calibrate_gamma(&self, train: &Dataset<F>) -> Result<GammaCalibration<F>> {
        train.require_non_empty()?;
        let m1 = self.first_moments(train)?;
        let num: F = train.values().into_iter().sum();
        let den: F = m1.into_iter().sum();
        Ok(checked_ratio(num, den))
    }

    pub fn predict_all(&self, ds: &Dataset<F>) -> Result<Vec<F>> {
        Ok(self
            .first_moments(ds)?
            .into_iter()
            .map(|m| self.gamma * m)
            .collect())
    }

    /// `ε_i = μ_i − a_i` in record order.
    pub fn residuals(&self, ds: &Dataset<F>) -> Result<ResidualSeries<F>> {
        let mu = self.predict_all(ds)?;
        let eps = mu.iter().zip(ds.values()).map(|(&m, a)| m - a).collect();
        ResidualSeries::new(ds.times(), eps)
    }

    /// Root mean squared residual.
    pub fn model_error(&self, ds: &Dataset<F>) -> Result<F> {
        ds.require_non_empty()?;
        Ok(rms(self.residuals(ds)?.values()))
    }

    /// Expected number of events in `cell`, by the midpoint rule on an
    /// `s × … × s` lattice of sub-cells (`s = subsamples`).
    pub fn predict_cell_count(&self, cell: &Cell, subsamples: usize) -> Result<F> {
        self.require_mode(Mode::Event)?;
        if cell.lo.len() != self.spatial_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.spatial_dim(),
                found: cell.lo.len(),
            });
        }
        let volume = cell.volume();
        if !(volume > 0.0) {
            return Err(Error::DegenerateCell);
        }
        let s = subsamples.max(1);
        let d = self.spatial_dim();
        let total = s.pow(d as u32 + 1);
        let mut acc = F::zero();
        let mut x = vec![F::zero(); d];
        for k in 0..total {
            let mut rest = k;
            let tf = (rest % s) as f64;
            rest /= s;
            let t = cell.t0 + (tf + 0.5) / s as f64 * (cell.t1 - cell.t0);
            for (dim, xv) in x.iter_mut().enumerate() {
                let f = (rest % s) as f64;
                rest /= s;
                *xv = F::lit(cell.lo[dim] + (f + 0.5) / s as f64 * (cell.hi[dim] - cell.lo[dim]));
            }
            acc = acc + self.density(None, &x, t)?;
        }
        Ok(acc * F::lit(volume / total as f64))
    }

    /// Predicted count for every cell of `grid`, midpoint rule.
    pub fn predict_grid(&self, grid: &GridSpec, subsamples: usize) -> Result<Vec<F>> {
        (0..grid.n_cells())
            .into_par_iter()
            .map(|i| self.predict_cell_count(&grid.cell(i), subsamples))
            .collect()
    }

    /// Unscaled expected event count over `[t0, t1)` integrated over all of
    /// space (closed-form spatial marginal, midpoint rule in time).
    fn event_mass(&self, t0: f64, t1: f64, step: f64) -> F {
        let steps = ((t1 - t0) / step).ceil().max(1.0) as usize;
        let dt = (t1 - t0) / steps as f64;
        let evals = self.evals();
        let sum: F = (0..steps)
            .into_par_iter()
            .map(|k| {
                let t = t0 + (k as f64 + 0.5) * dt;
                let z = project_time::<F>(t, &self.projection);
                evals
                    .iter()
                    .map(|e| {
                        e.weight
                            * e.temporal
                                .as_ref()
                                .map_or(F::one(), |g| g.log_pdf(&z).exp())
                    })
                    .sum::<F>()
            })
            .collect::<Vec<F>>()
            .into_iter()
            .sum();
        sum * F::lit(dt)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let model: Self = serde_json::from_str(text)?;
        if model.version != MODEL_FORMAT_VERSION {
            return Err(Error::UnsupportedVersion(model.version));
        }
        if model.layout != model.mixture.layout
            || model.layout.temporal.len() != model.projection.len()
            || model.layout.spatial_dim() != model.spatial_stats.dim()
        {
            return Err(Error::InvalidConfig("inconsistent model layout".into()));
        }
        Ok(model)
    }
}

fn checked_ratio<F: Scalar>(num: F, den: F) -> GammaCalibration<F> {
    let g = num / den;
    if g.is_finite() && g > F::zero() {
        GammaCalibration {
            gamma: g,
            degenerate: false,
        }
    } else {
        log::warn!("degenerate scale calibration ({num} / {den}); using 1");
        GammaCalibration {
            gamma: F::one(),
            degenerate: true,
        }
    }
}

fn rms<F: Scalar>(values: &[F]) -> F {
    if values.is_empty() {
        return F::zero();
    }
    let ss: F = values.iter().map(|&v| v * v).sum();
    (ss / F::from_usize_lossy(values.len())).sqrt()
}

struct Stage<F: Scalar> {
    model: HypertimeModel<F>,
    residuals: ResidualSeries<F>,
    error: F,
}

/// Shared state of one build: the standardized training set and its
/// current vectors.
struct Builder<'a, F: Scalar> {
    raw: &'a Dataset<F>,
    stats: SpatialStats<F>,
    times: Vec<f64>,
    cfg: &'a BuildConfig<F>,
    volume: Option<TrainingVolume>,
    reference: Option<(GridSpec, Vec<F>)>,
}

impl<'a, F: Scalar> Builder<'a, F> {
    fn new(
        raw: &'a Dataset<F>,
        cfg: &'a BuildConfig<F>,
    ) -> Result<(Self, Vec<Vec<F>>, DimensionLayout)> {
        raw.require_non_empty()?;
        let stats = if cfg.standardize {
            SpatialStats::from_dataset(raw)?
        } else {
            SpatialStats::identity(raw.spatial_dim())
        };
        let z = standardize(raw, &stats)?;
        let (vectors, layout) = assemble(&z, &HypertimeProjection::default())?;
        let (volume, reference) = if raw.mode() == Mode::Event {
            let volume = training_volume(raw, &cfg.event_grid)?;
            let grid = volume.grid(cfg.event_grid.spatial_bin, cfg.event_grid.temporal_bin)?;
            let observed = grid_count(raw, &grid)?.values;
            (Some(volume), Some((grid, observed)))
        } else {
            (None, None)
        };
        Ok((
            Self {
                raw,
                stats,
                times: raw.times(),
                cfg,
                volume,
                reference,
            },
            vectors,
            layout,
        ))
    }

    fn stage(
        &self,
        vectors: &[Vec<F>],
        layout: &DimensionLayout,
        proj: &HypertimeProjection,
        fit: &FitConfig<F>,
    ) -> Result<Stage<F>> {
        let mixture = clustering::fit(vectors, layout, fit)?;
        let mut model =
            HypertimeModel::from_parts(self.raw.mode(), proj.clone(), mixture, self.stats.clone())?;
        model.volume = self.volume.clone();
        match self.raw.mode() {
            Mode::Valued => {
                let m1 = model.first_moments(self.raw)?;
                let num: F = self.raw.values().into_iter().sum();
                model.set_gamma(checked_ratio(num, m1.iter().copied().sum()));
                let eps: Vec<F> = m1
                    .iter()
                    .zip(self.raw.values())
                    .map(|(&m, a)| model.gamma * m - a)
                    .collect();
                let error = rms(&eps);
                let residuals = ResidualSeries::new(self.times.clone(), eps)?;
                Ok(Stage {
                    model,
                    residuals,
                    error,
                })
            }
            Mode::Event => {
                let vol = self.volume.as_ref().expect("event volume");
                let mass = model.event_mass(vol.t0, vol.t1, self.cfg.event_grid.calibration_step);
                model.set_gamma(checked_ratio(F::from_usize_lossy(self.raw.len()), mass));
                let (grid, observed) = self.reference.as_ref().expect("event grid");
                let predicted = model.predict_grid(grid, 1)?;
                let eps: Vec<F> = predicted
                    .iter()
                    .zip(observed)
                    .map(|(&p, &d)| p - d)
                    .collect();
                let times = (0..grid.n_cells())
                    .map(|i| grid.cell(i).t_center())
                    .collect();
                let error = rms(&eps);
                let residuals = ResidualSeries::new(times, eps)?;
                Ok(Stage {
                    model,
                    residuals,
                    error,
                })
            }
        }
    }
}

fn training_volume<F: Scalar>(ds: &Dataset<F>, cfg: &EventGridConfig) -> Result<TrainingVolume> {
    let (lo, hi) = padded_box(ds, cfg.margin_std)?;
    let (t0, t1) = covering_span(ds, cfg.temporal_bin)?;
    Ok(TrainingVolume { lo, hi, t0, t1 })
}

/// Iteratively adds the most prominent residual period to the hypertime
/// projection until the training error stops decreasing.
pub fn build<F: Scalar>(train: &Dataset<F>, cfg: &BuildConfig<F>) -> Result<HypertimeModel<F>> {
    train.require_mode(Mode::Valued)?;
    run_build(train, cfg)
}

/// Event-mode build: the modeled quantity is detection density, residuals
/// come from counts on a reference grid.
pub fn build_event<F: Scalar>(
    train: &Dataset<F>,
    cfg: &BuildConfig<F>,
) -> Result<HypertimeModel<F>> {
    train.require_mode(Mode::Event)?;
    run_build(train, cfg)
}

fn run_build<F: Scalar>(train: &Dataset<F>, cfg: &BuildConfig<F>) -> Result<HypertimeModel<F>> {
    cfg.fit.validate()?;
    let (builder, mut vectors, mut layout) = Builder::new(train, cfg)?;
    let mut fit = cfg.fit.clone();
    let selection = if cfg.auto_clusters
        && fit.backend == clustering::Backend::Km
        && train.mode() == Mode::Valued
    {
        let sel = select_with(&builder, &vectors, &layout, cfg)?;
        fit.n_clusters = sel.chosen;
        Some(sel)
    } else {
        None
    };

    let mut proj = HypertimeProjection::default();
    let mut best = builder.stage(&vectors, &layout, &proj, &fit)?;
    let mut log = vec![BuildStep {
        h: 0,
        error: best.error,
        period: None,
        kept: true,
    }];
    let candidates = cfg.spectral.candidates();
    while proj.len() < cfg.max_h {
        let period = match prominent_period(&best.residuals, &candidates, proj.periods()) {
            Ok(p) => p,
            Err(Error::CandidatesExhausted) => break,
            Err(e) => return Err(e),
        };
        let next_vectors = extend_vectors(&vectors, &builder.times, period)?;
        let next_layout = layout.extended();
        let mut next_proj = proj.clone();
        next_proj.push(period)?;
        let stage = builder.stage(&next_vectors, &next_layout, &next_proj, &fit)?;
        let improved = stage.error < best.error;
        log.push(BuildStep {
            h: next_proj.len(),
            error: stage.error,
            period: Some(period),
            kept: improved,
        });
        log::info!(
            "h={} period={period} error={}",
            next_proj.len(),
            stage.error
        );
        if !improved {
            break;
        }
        best = stage;
        vectors = next_vectors;
        layout = next_layout;
        proj = next_proj;
    }
    let mut model = best.model;
    model.training_error = best.error;
    model.build_log = log;
    model.cluster_selection = selection;
    Ok(model)
}

fn select_with<F: Scalar>(
    builder: &Builder<'_, F>,
    vectors: &[Vec<F>],
    layout: &DimensionLayout,
    cfg: &BuildConfig<F>,
) -> Result<ClusterCountSelection<F>> {
    let candidates = cfg.spectral.candidates();
    let proj = HypertimeProjection::default();
    let cap = cfg.cluster_cap.max(1);
    let t_sum = |n: usize| -> Result<F> {
        let fit = FitConfig {
            n_clusters: n,
            backend: clustering::Backend::Km,
            ..cfg.fit.clone()
        };
        let stage = builder.stage(vectors, layout, &proj, &fit)?;
        Ok(spectral_sum(&stage.residuals, &candidates))
    };
    let mut n = 1;
    let mut current = t_sum(1)?;
    let mut pairs = vec![(1, current)];
    while n < cap && n < vectors.len() {
        let next = t_sum(n + 1)?;
        pairs.push((n + 1, next));
        // Equal sums up to rounding (e.g. time-only data at h = 0) do not
        // justify another component.
        if current - next > F::lit(1e-9) * current.abs() {
            n += 1;
            current = next;
        } else {
            break;
        }
    }
    Ok(ClusterCountSelection { pairs, chosen: n })
}

/// Chooses the component count at `h = 0` by comparing residual spectral
/// sums of `n` and `n + 1` component models.
pub fn select_cluster_count<F: Scalar>(
    train: &Dataset<F>,
    cfg: &BuildConfig<F>,
) -> Result<ClusterCountSelection<F>> {
    train.require_mode(Mode::Valued)?;
    let (builder, vectors, layout) = Builder::new(train, cfg)?;
    select_with(&builder, &vectors, &layout, cfg)
}
