//! Circular projection of linear time and assembly of the clustered vector
//! space `(a, x, cos 2πt/T1, sin 2πt/T1, ...)`.

use std::f64::consts::TAU;
use std::ops::Range;

use serde::{Deserialize, Serialize};

use crate::dataset::{Dataset, Mode};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Ordered list of modeled periods, in seconds, most prominent first.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct HypertimeProjection {
    periods: Vec<f64>,
}

impl HypertimeProjection {
    pub fn new(periods: Vec<f64>) -> Result<Self> {
        let mut proj = Self::default();
        for p in periods {
            proj.push(p)?;
        }
        Ok(proj)
    }

    pub fn push(&mut self, period: f64) -> Result<()> {
        if !(period > 0.0 && period.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "period {period} must be positive"
            )));
        }
        if self.periods.contains(&period) {
            return Err(Error::InvalidConfig(format!(
                "period {period} already projected"
            )));
        }
        self.periods.push(period);
        Ok(())
    }

    pub fn periods(&self) -> &[f64] {
        &self.periods
    }

    pub fn len(&self) -> usize {
        self.periods.len()
    }

    pub fn is_empty(&self) -> bool {
        self.periods.is_empty()
    }
}

/// `(cos 2πt/T, sin 2πt/T)`. The phase is reduced modulo `T` in `f64`
/// before conversion so large epoch timestamps keep full precision.
#[inline]
pub fn circle_point<F: Scalar>(t: f64, period: f64) -> (F, F) {
    let angle = TAU * (t.rem_euclid(period) / period);
    let (s, c) = angle.sin_cos();
    (F::lit(c), F::lit(s))
}

pub fn project_time<F: Scalar>(t: f64, proj: &HypertimeProjection) -> Vec<F> {
    let mut out = Vec::with_capacity(2 * proj.len());
    for &p in &proj.periods {
        let (c, s) = circle_point(t, p);
        out.push(c);
        out.push(s);
    }
    out
}

/// Index map of an assembled vector.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DimensionLayout {
    pub value: Option<usize>,
    pub spatial: Range<usize>,
    /// `(cos index, sin index)` per period, in projection order.
    pub temporal: Vec<(usize, usize)>,
}

impl DimensionLayout {
    pub fn new(has_value: bool, spatial_dim: usize, periods: usize) -> Self {
        let offset = usize::from(has_value);
        let spatial = offset..offset + spatial_dim;
        let base = spatial.end;
        Self {
            value: has_value.then_some(0),
            spatial,
            temporal: (0..periods)
                .map(|k| (base + 2 * k, base + 2 * k + 1))
                .collect(),
        }
    }

    pub fn len(&self) -> usize {
        usize::from(self.value.is_some()) + self.spatial.len() + 2 * self.temporal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn spatial_dim(&self) -> usize {
        self.spatial.len()
    }

    /// Layout after appending one more period.
    pub fn extended(&self) -> Self {
        let mut next = self.clone();
        let base = self.len();
        next.temporal.push((base, base + 1));
        next
    }

    /// Indices measured with the Euclidean metric (value and space).
    pub fn euclidean_indices(&self) -> Vec<usize> {
        self.value.into_iter().chain(self.spatial.clone()).collect()
    }

    /// Every index except the value dimension.
    pub fn conditioning_indices(&self) -> Vec<usize> {
        (0..self.len()).filter(|&i| Some(i) != self.value).collect()
    }

    pub fn temporal_indices(&self) -> Vec<usize> {
        self.temporal.iter().flat_map(|&(c, s)| [c, s]).collect()
    }
}

/// Appends the circular coordinates of `period` to every vector.
pub fn extend_vectors<F: Scalar>(
    vectors: &[Vec<F>],
    times: &[f64],
    period: f64,
) -> Result<Vec<Vec<F>>> {
    if vectors.len() != times.len() {
        return Err(Error::LengthMismatch {
            left: vectors.len(),
            right: times.len(),
        });
    }
    if !(period > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "period {period} must be positive"
        )));
    }
    Ok(vectors
        .iter()
        .zip(times)
        .map(|(v, &t)| {
            let (c, s) = circle_point(t, period);
            let mut out = Vec::with_capacity(v.len() + 2);
            out.extend_from_slice(v);
            out.push(c);
            out.push(s);
            out
        })
        .collect())
}

/// One assembled vector from raw parts.
pub fn assemble_point<F: Scalar>(
    a: Option<F>,
    x: &[F],
    t: f64,
    proj: &HypertimeProjection,
) -> Vec<F> {
    let mut v = Vec::with_capacity(usize::from(a.is_some()) + x.len() + 2 * proj.len());
    v.extend(a);
    v.extend_from_slice(x);
    v.extend(project_time::<F>(t, proj));
    v
}

pub fn assemble<F: Scalar>(
    ds: &Dataset<F>,
    proj: &HypertimeProjection,
) -> Result<(Vec<Vec<F>>, DimensionLayout)> {
    ds.require_non_empty()?;
    let layout = DimensionLayout::new(ds.mode() == Mode::Valued, ds.spatial_dim(), proj.len());
    let vectors = ds
        .records()
        .iter()
        .map(|r| assemble_point(r.a, &r.x, r.t, proj))
        .collect();
    Ok((vectors, layout))
}
