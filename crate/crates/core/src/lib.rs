//! Spatio-temporal models that warp time onto circular hypertime
//! dimensions and cluster the extended space with Gaussian mixtures.
//!
//! The library is generic over the scalar type `F` (`f32` or `f64`);
//! timestamps are always `f64` seconds.

// `!(a > b)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod clustering;
pub mod dataset;
pub mod error;
pub mod evaluation;
pub mod hypertime;
pub mod linalg;
pub mod model;
pub mod scalar;
pub mod spectral;
pub mod synthetic;

pub use baselines::{train_baseline, BaselineConfig, Predictor};
pub use clustering::{fit, Backend, FitConfig, MixtureModel};
pub use dataset::{
    load_csv, read_csv, split_by_time, write_csv, Dataset, LoadOptions, Measurement, Mode,
};
pub use error::{Error, Result};
pub use evaluation::{
    grid_count, histogram_l1, pairwise_ttests, rmse, sweep, EvaluationGrid, GridSpec,
};
pub use hypertime::HypertimeProjection;
pub use model::{build, BuildConfig, HypertimeModel};
pub use scalar::Scalar;
pub use spectral::{prominent_period, spectrum, ResidualSeries, SpectralConfig, DAY, WEEK};

pub type DatasetF64 = Dataset<f64>;
pub type DatasetF32 = Dataset<f32>;
pub type MixtureModelF64 = MixtureModel<f64>;
pub type MixtureModelF32 = MixtureModel<f32>;
pub type HypertimeModelF64 = HypertimeModel<f64>;
pub type HypertimeModelF32 = HypertimeModel<f32>;
pub type BuildConfigF64 = BuildConfig<f64>;
pub type BuildConfigF32 = BuildConfig<f32>;
