//! Seeded generators for synthetic benchmark data.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};

use crate::dataset::{Dataset, Measurement, Mode};
use crate::error::Result;
use crate::scalar::Scalar;
use crate::spectral::{DAY, WEEK};

fn noise(sigma: f64) -> Normal<f64> {
    Normal::new(0.0, sigma.max(0.0)).expect("finite sigma")
}

/// Samples `f(t)` plus Gaussian noise every `step` seconds over
/// `[start, start + duration)`.
pub fn sampled<F: Scalar>(
    start: f64,
    duration: f64,
    step: f64,
    sigma: f64,
    seed: u64,
    f: impl Fn(f64) -> f64,
) -> Result<Dataset<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = noise(sigma);
    let n = (duration / step).floor() as usize;
    let records = (0..n)
        .map(|i| {
            let t = start + i as f64 * step;
            Measurement::valued(t, F::lit(f(t) + eps.sample(&mut rng)), vec![])
        })
        .collect();
    Dataset::new(records, 0, Mode::Valued)
}

/// 1 between 08:00 and 18:00, else 0.
pub fn office_hours_signal(t: f64) -> f64 {
    let h = t.rem_euclid(DAY) / 3600.0;
    if (8.0..18.0).contains(&h) {
        1.0
    } else {
        0.0
    }
}

pub fn daily_weekly_signal(t: f64) -> f64 {
    0.5 + 0.3 * (std::f64::consts::TAU * t / DAY).cos()
        + 0.2 * (std::f64::consts::TAU * t / WEEK).cos()
}

pub fn daily_cosine_signal(t: f64) -> f64 {
    0.5 + 0.4 * (std::f64::consts::TAU * t / DAY).cos()
}

/// Square-wave daily rhythm from `start`, `weeks` long with 10-minute
/// sampling.
pub fn office_hours<F: Scalar>(
    start: f64,
    weeks: f64,
    sigma: f64,
    seed: u64,
) -> Result<Dataset<F>> {
    sampled(start, weeks * WEEK, 600.0, sigma, seed, office_hours_signal)
}

/// Daily plus weekly cosine from `start`, `weeks` long with 10-minute
/// sampling.
pub fn daily_weekly<F: Scalar>(
    start: f64,
    weeks: f64,
    sigma: f64,
    seed: u64,
) -> Result<Dataset<F>> {
    sampled(start, weeks * WEEK, 600.0, sigma, seed, daily_weekly_signal)
}

/// `offset + amplitude·cos(2πt/day)` from `t = 0`.
pub fn daily_cosine<F: Scalar>(
    days: f64,
    step: f64,
    offset: f64,
    amplitude: f64,
    sigma: f64,
    seed: u64,
) -> Result<Dataset<F>> {
    sampled(0.0, days * DAY, step, sigma, seed, move |t| {
        offset + amplitude * (std::f64::consts::TAU * t / DAY).cos()
    })
}

/// Parameters of the pedestrian-flow event generator.
#[derive(Debug, Clone)]
pub struct PedestrianConfig {
    pub start: f64,
    pub days: f64,
    /// Mean detections per hour averaged over a day.
    pub hourly_rate: f64,
    /// Spatial spread of detections around the flow center.
    pub spread: f64,
    pub seed: u64,
}

impl Default for PedestrianConfig {
    fn default() -> Self {
        Self {
            start: 0.0,
            days: 7.0,
            hourly_rate: 20.0,
            spread: 0.4,
            seed: 42,
        }
    }
}

/// Detection rate per second at `t`: peaks at midday, zero around midnight.
pub fn pedestrian_rate(t: f64, hourly_rate: f64) -> f64 {
    hourly_rate / 3600.0 * (1.0 - (std::f64::consts::TAU * t / DAY).cos())
}

/// Flow center in a 4 × 4 area; people drift from west to east over the day.
pub fn pedestrian_center(t: f64) -> [f64; 2] {
    let phase = std::f64::consts::TAU * t / DAY;
    [2.0 - 1.2 * phase.cos(), 2.0 + 0.6 * phase.sin()]
}

/// 2-D detections of a time-varying Poisson process.
pub fn pedestrians<F: Scalar>(cfg: &PedestrianConfig) -> Result<Dataset<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let eps = noise(cfg.spread);
    let bin = 300.0;
    let n = (cfg.days * DAY / bin).floor() as usize;
    let mut records = Vec::new();
    for b in 0..n {
        let mid = cfg.start + (b as f64 + 0.5) * bin;
        let lambda = pedestrian_rate(mid, cfg.hourly_rate) * bin;
        if lambda <= 0.0 {
            continue;
        }
        let count = Poisson::new(lambda)
            .expect("positive rate")
            .sample(&mut rng) as usize;
        for _ in 0..count {
            let t = cfg.start + b as f64 * bin + rng.random::<f64>() * bin;
            let c = pedestrian_center(t);
            let x = vec![
                F::lit(c[0] + eps.sample(&mut rng)),
                F::lit(c[1] + eps.sample(&mut rng)),
            ];
            records.push(Measurement::event(t, x));
        }
    }
    Dataset::new(records, 2, Mode::Event)
}

/// Isotropic Gaussian blobs in `d` dimensions, `per_blob` points each.
pub fn blobs<F: Scalar>(
    centers: &[Vec<f64>],
    sigma: f64,
    per_blob: usize,
    seed: u64,
) -> Vec<Vec<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let eps = noise(sigma);
    centers
        .iter()
        .flat_map(|c| std::iter::repeat_n(c, per_blob))
        .map(|c| {
            c.iter()
                .map(|&v| F::lit(v + eps.sample(&mut rng)))
                .collect()
        })
        .collect()
}
