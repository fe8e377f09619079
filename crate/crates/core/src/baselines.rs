//! Comparison predictors: global mean, time-of-day histogram and a
//! fixed number of strongest periodic components.

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::hypertime::circle_point;
use crate::model::HypertimeModel;
use crate::scalar::{cmp_scalar, Scalar};
use crate::spectral::{SpectralConfig, DAY};

/// Anything that predicts a value at `(x, t)`.
pub trait Predictor<F: Scalar>: Send + Sync {
    fn predict(&self, x: &[F], t: f64) -> Result<F>;
}

impl<F: Scalar> Predictor<F> for HypertimeModel<F> {
    fn predict(&self, x: &[F], t: f64) -> Result<F> {
        self.predict_mean(x, t)
    }
}

fn valued_values<F: Scalar>(train: &Dataset<F>) -> Result<Vec<F>> {
    train.require_mode(Mode::Valued)?;
    train.require_non_empty()?;
    Ok(train.values())
}

fn mean_of<F: Scalar>(values: &[F]) -> F {
    values.iter().copied().sum::<F>() / F::from_usize_lossy(values.len())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MeanPredictor<F: Scalar> {
    pub mean: F,
}

impl<F: Scalar> MeanPredictor<F> {
    pub fn train(train: &Dataset<F>) -> Result<Self> {
        Ok(Self {
            mean: mean_of(&valued_values(train)?),
        })
    }
}

impl<F: Scalar> Predictor<F> for MeanPredictor<F> {
    fn predict(&self, _x: &[F], _t: f64) -> Result<F> {
        Ok(self.mean)
    }
}

/// Average per time-of-day interval; days are aligned to `t = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HistPredictor<F: Scalar> {
    pub bins: Vec<F>,
}

fn day_interval(t: f64, n: usize) -> usize {
    let idx = (n as f64 * t.rem_euclid(DAY) / DAY).floor() as usize;
    idx.min(n - 1)
}

impl<F: Scalar> HistPredictor<F> {
    pub fn train(train: &Dataset<F>, n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidConfig(
                "histogram needs at least one interval".into(),
            ));
        }
        let values = valued_values(train)?;
        Ok(Self::from_series(&train.times(), &values, n))
    }

    fn from_series(times: &[f64], values: &[F], n: usize) -> Self {
        let global = mean_of(values);
        let mut sums = vec![F::zero(); n];
        let mut counts = vec![0usize; n];
        for (&t, &a) in times.iter().zip(values) {
            let i = day_interval(t, n);
            sums[i] = sums[i] + a;
            counts[i] += 1;
        }
        let bins = sums
            .into_iter()
            .zip(counts)
            .map(|(s, c)| {
                if c == 0 {
                    global
                } else {
                    s / F::from_usize_lossy(c)
                }
            })
            .collect();
        Self { bins }
    }
}

impl<F: Scalar> Predictor<F> for HistPredictor<F> {
    fn predict(&self, _x: &[F], t: f64) -> Result<F> {
        Ok(self.bins[day_interval(t, self.bins.len())])
    }
}

/// Precomputed `e^{−j2πt_i/T_k}` for one time axis and candidate set, so
/// many series sharing the axis can be analyzed cheaply.
#[derive(Debug, Clone)]
pub struct FourierBasis<F: Scalar> {
    times: Vec<f64>,
    periods: Vec<f64>,
    /// Row per sample, `(cos, sin)` per candidate.
    table: Vec<Vec<(F, F)>>,
    /// `Σ_i (cos, sin)` per candidate.
    totals: Vec<(F, F)>,
}

impl<F: Scalar> FourierBasis<F> {
    pub fn new(times: &[f64], periods: &[f64]) -> Self {
        let table: Vec<Vec<(F, F)>> = times
            .iter()
            .map(|&t| periods.iter().map(|&p| circle_point::<F>(t, p)).collect())
            .collect();
        let mut totals = vec![(F::zero(), F::zero()); periods.len()];
        for row in &table {
            for (acc, &(c, s)) in totals.iter_mut().zip(row) {
                acc.0 = acc.0 + c;
                acc.1 = acc.1 + s;
            }
        }
        Self {
            times: times.to_vec(),
            periods: periods.to_vec(),
            table,
            totals,
        }
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct PeriodicComponent<F: Scalar> {
    pub period: f64,
    pub re: F,
    pub im: F,
}

/// Mean plus the `m` strongest periodic components of the training series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FremenPredictor<F: Scalar> {
    pub mean: F,
    pub components: Vec<PeriodicComponent<F>>,
}

impl<F: Scalar> FremenPredictor<F> {
    pub fn train(train: &Dataset<F>, m: usize, candidates: &[f64]) -> Result<Self> {
        let values = valued_values(train)?;
        let basis = FourierBasis::new(&train.times(), candidates);
        Ok(Self::fit_on_basis(&basis, &values, m))
    }

    /// Coefficients `c_k = (1/l) Σ (a_i − ā) e^{−j2πt_i/T_k}`, computed as
    /// `(1/l)(Σ a_i e_i − ā Σ e_i)` so zero samples cost nothing.
    pub fn fit_on_basis(basis: &FourierBasis<F>, values: &[F], m: usize) -> Self {
        let mean = mean_of(values);
        if m == 0 {
            return Self {
                mean,
                components: Vec::new(),
            };
        }
        let k = basis.periods.len();
        let mut sums = vec![(F::zero(), F::zero()); k];
        for (row, &a) in basis.table.iter().zip(values) {
            if a == F::zero() {
                continue;
            }
            for (acc, &(c, s)) in sums.iter_mut().zip(row) {
                acc.0 = acc.0 + a * c;
                acc.1 = acc.1 + a * s;
            }
        }
        let l = F::from_usize_lossy(values.len());
        let mut comps: Vec<(F, PeriodicComponent<F>)> = sums
            .iter()
            .zip(&basis.totals)
            .zip(&basis.periods)
            .map(|((&(sc, ss), &(tc, ts)), &period)| {
                let re = (sc - mean * tc) / l;
                let im = -(ss - mean * ts) / l;
                (re.hypot(im), PeriodicComponent { period, re, im })
            })
            .collect();
        comps.sort_by(|a, b| cmp_scalar(b.0, a.0).then_with(|| b.1.period.total_cmp(&a.1.period)));
        Self {
            mean,
            components: comps.into_iter().take(m).map(|c| c.1).collect(),
        }
    }
}

impl<F: Scalar> Predictor<F> for FremenPredictor<F> {
    fn predict(&self, _x: &[F], t: f64) -> Result<F> {
        let two = F::lit(2.0);
        Ok(self.components.iter().fold(self.mean, |acc, c| {
            let (cos, sin) = circle_point::<F>(t, c.period);
            acc + two * (c.re * cos - c.im * sin)
        }))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum BaselineConfig {
    Mean,
    Hist { n_intervals: usize },
    Fremen { m_components: usize },
}

impl BaselineConfig {
    pub fn label(&self) -> String {
        match self {
            BaselineConfig::Mean => "Mean".into(),
            BaselineConfig::Hist { n_intervals } => format!("Hist_{n_intervals}"),
            BaselineConfig::Fremen { m_components } => format!("FreMEn_{m_components}"),
        }
    }
}

pub fn mean_predictor<F: Scalar>(train: &Dataset<F>) -> Result<MeanPredictor<F>> {
    MeanPredictor::train(train)
}

pub fn hist_predictor<F: Scalar>(train: &Dataset<F>, n: usize) -> Result<HistPredictor<F>> {
    HistPredictor::train(train, n)
}

pub fn fremen_predictor<F: Scalar>(
    train: &Dataset<F>,
    m: usize,
    candidates: &[f64],
) -> Result<FremenPredictor<F>> {
    FremenPredictor::train(train, m, candidates)
}

pub fn train_baseline<F: Scalar>(
    cfg: &BaselineConfig,
    train: &Dataset<F>,
    spectral: &SpectralConfig,
) -> Result<Box<dyn Predictor<F>>> {
    Ok(match *cfg {
        BaselineConfig::Mean => Box::new(MeanPredictor::train(train)?),
        BaselineConfig::Hist { n_intervals } => Box::new(HistPredictor::train(train, n_intervals)?),
        BaselineConfig::Fremen { m_components } => Box::new(FremenPredictor::train(
            train,
            m_components,
            &spectral.candidates(),
        )?),
    })
}
