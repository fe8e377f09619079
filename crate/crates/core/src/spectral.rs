//! Spectral analysis of non-uniformly sampled series by direct evaluation of
//! complex exponential sums at a set of candidate periods.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypertime::circle_point;
use crate::scalar::{cmp_scalar, Scalar};

pub const WEEK: f64 = 604_800.0;
pub const DAY: f64 = 86_400.0;

/// Residual (or any) time series with its cached mean.
#[derive(Debug, Clone, PartialEq)]
pub struct ResidualSeries<F: Scalar> {
    times: Vec<f64>,
    values: Vec<F>,
    mean: F,
}

impl<F: Scalar> ResidualSeries<F> {
    pub fn new(times: Vec<f64>, values: Vec<F>) -> Result<Self> {
        if times.len() != values.len() {
            return Err(Error::LengthMismatch {
                left: times.len(),
                right: values.len(),
            });
        }
        if values.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let mean = values.iter().copied().sum::<F>() / F::from_usize_lossy(values.len());
        Ok(Self {
            times,
            values,
            mean,
        })
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn values(&self) -> &[F] {
        &self.values
    }

    pub fn mean(&self) -> F {
        self.mean
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `(1/l) Σ (v_i − v̄) e^{−j2πt_i/T}` as `(re, im)`.
    pub fn coefficient(&self, period: f64) -> (F, F) {
        let mut re = F::zero();
        let mut im = F::zero();
        for (&t, &v) in self.times.iter().zip(&self.values) {
            let (c, s) = circle_point::<F>(t, period);
            let d = v - self.mean;
            re = re + d * c;
            im = im - d * s;
        }
        let l = F::from_usize_lossy(self.values.len());
        (re / l, im / l)
    }
}

/// Candidate period set: harmonics `longest / k` for `k = 1..=count`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpectralConfig {
    pub longest: f64,
    pub count: usize,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        Self {
            longest: WEEK,
            count: 168,
        }
    }
}

impl SpectralConfig {
    pub fn candidates(&self) -> Vec<f64> {
        default_candidates(self.longest, self.count)
    }
}

pub fn default_candidates(longest: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|k| longest / k as f64).collect()
}

pub fn amplitude<F: Scalar>(series: &ResidualSeries<F>, period: f64) -> F {
    let (re, im) = series.coefficient(period);
    re.hypot(im)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct SpectrumEntry<F: Scalar> {
    pub period: f64,
    pub amplitude: F,
}

/// Amplitudes sorted descending; ties go to the larger period.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumResult<F: Scalar> {
    pub entries: Vec<SpectrumEntry<F>>,
}

impl<F: Scalar> SpectrumResult<F> {
    pub fn top(&self) -> Option<&SpectrumEntry<F>> {
        self.entries.first()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

fn rank<F: Scalar>(a: &SpectrumEntry<F>, b: &SpectrumEntry<F>) -> std::cmp::Ordering {
    cmp_scalar(b.amplitude, a.amplitude).then_with(|| b.period.total_cmp(&a.period))
}

pub fn spectrum<F: Scalar>(series: &ResidualSeries<F>, candidates: &[f64]) -> SpectrumResult<F> {
    let mut entries: Vec<SpectrumEntry<F>> = candidates
        .par_iter()
        .map(|&period| SpectrumEntry {
            period,
            amplitude: amplitude(series, period),
        })
        .collect();
    entries.sort_by(rank);
    SpectrumResult { entries }
}

fn is_excluded(period: f64, exclude: &[f64]) -> bool {
    exclude
        .iter()
        .any(|&e| (e - period).abs() <= 1e-9 * e.abs().max(period.abs()))
}

/// Strongest candidate not in `exclude`.
pub fn prominent_period<F: Scalar>(
    series: &ResidualSeries<F>,
    candidates: &[f64],
    exclude: &[f64],
) -> Result<f64> {
    let allowed: Vec<f64> = candidates
        .iter()
        .copied()
        .filter(|&p| !is_excluded(p, exclude))
        .collect();
    spectrum(series, &allowed)
        .top()
        .map(|e| e.period)
        .ok_or(Error::CandidatesExhausted)
}

/// Sum of amplitudes over all candidates.
pub fn spectral_sum<F: Scalar>(series: &ResidualSeries<F>, candidates: &[f64]) -> F {
    let amps: Vec<F> = candidates
        .par_iter()
        .map(|&p| amplitude(series, p))
        .collect();
    amps.into_iter().sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent evaluation of the centered exponential sum.
    fn brute_amplitude(times: &[f64], values: &[f64], period: f64) -> f64 {
        let mean = values.iter().sum::<f64>() / values.len() as f64;
        let (mut re, mut im) = (0.0, 0.0);
        for (t, v) in times.iter().zip(values) {
            let w = 2.0 * std::f64::consts::PI * t / period;
            re += (v - mean) * w.cos();
            im -= (v - mean) * w.sin();
        }
        (re * re + im * im).sqrt() / values.len() as f64
    }

    fn daily_cosine() -> ResidualSeries<f64> {
        let n = 1000;
        let span = 10.0 * DAY;
        let times: Vec<f64> = (0..n).map(|i| i as f64 * span / n as f64).collect();
        let values = times
            .iter()
            .map(|t| (std::f64::consts::TAU * t / DAY).cos())
            .collect();
        ResidualSeries::new(times, values).unwrap()
    }

    #[test]
    fn candidate_harmonics() {
        assert_eq!(default_candidates(WEEK, 2), vec![WEEK, WEEK / 2.0]);
        assert_eq!(default_candidates(DAY, 1), vec![DAY]);
        let c = default_candidates(WEEK, 42);
        assert!(c.contains(&DAY));
        assert!(c.contains(&14400.0));
    }

    #[test]
    fn constant_series_has_no_amplitude() {
        let s = ResidualSeries::new(vec![0.0, 100.0, 3000.0], vec![2.5, 2.5, 2.5]).unwrap();
        for p in default_candidates(WEEK, 20) {
            assert_eq!(amplitude(&s, p), 0.0);
        }
        assert_eq!(spectral_sum(&s, &default_candidates(WEEK, 20)), 0.0);
    }

    #[test]
    fn cosine_amplitude_on_and_off_frequency() {
        let s = daily_cosine();
        let on = amplitude(&s, DAY);
        let expected = brute_amplitude(s.times(), s.values(), DAY);
        assert!((on - 0.5).abs() < 0.02, "{on}");
        assert!((on - expected).abs() < 1e-12);
        assert!(amplitude(&s, WEEK) < 0.1);
    }

    #[test]
    fn spectrum_sorted_with_daily_peak() {
        let s = daily_cosine();
        let spec = spectrum(&s, &SpectralConfig::default().candidates());
        assert_eq!(spec.len(), 168);
        assert_eq!(spec.top().unwrap().period, DAY);
        assert!(spec
            .entries
            .windows(2)
            .all(|w| w[0].amplitude >= w[1].amplitude));
    }

    #[test]
    fn white_noise_has_no_dominant_peak() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let times: Vec<f64> = (0..2000)
            .map(|_| rng.random_range(0.0..4.0 * WEEK))
            .collect();
        let values: Vec<f64> = (0..2000).map(|_| rng.random_range(-1.0..1.0)).collect();
        let s = ResidualSeries::new(times, values).unwrap();
        let spec = spectrum(&s, &SpectralConfig::default().candidates());
        let mut amps: Vec<f64> = spec.entries.iter().map(|e| e.amplitude).collect();
        amps.sort_by(f64::total_cmp);
        let median = amps[amps.len() / 2];
        assert!(spec.top().unwrap().amplitude < 5.0 * median);
    }

    #[test]
    fn single_sample_is_flat() {
        let s = ResidualSeries::new(vec![123.0], vec![4.0]).unwrap();
        let spec = spectrum(&s, &[DAY, WEEK]);
        assert!(spec.entries.iter().all(|e| e.amplitude == 0.0));
        // tie-break: larger period first
        assert_eq!(spec.top().unwrap().period, WEEK);
    }

    #[test]
    fn prominent_period_with_exclusions() {
        let s = daily_cosine();
        let cands = SpectralConfig::default().candidates();
        assert_eq!(prominent_period(&s, &cands, &[]).unwrap(), DAY);

        let mut ranked: Vec<(f64, f64)> = cands
            .iter()
            .filter(|&&p| p != DAY)
            .map(|&p| (brute_amplitude(s.times(), s.values(), p), p))
            .collect();
        ranked.sort_by(|a, b| b.0.total_cmp(&a.0).then(b.1.total_cmp(&a.1)));
        let second = prominent_period(&s, &cands, &[DAY]).unwrap();
        assert_eq!(second, ranked[0].1);
        assert!(second == WEEK / 6.0 || second == WEEK / 8.0, "{second}");

        assert!(matches!(
            prominent_period(&s, &cands, &cands),
            Err(Error::CandidatesExhausted)
        ));
    }

    #[test]
    fn spectral_sum_adds_amplitudes() {
        let s = daily_cosine();
        assert!((spectral_sum(&s, &[DAY]) - amplitude(&s, DAY)).abs() < 1e-15);
        let brute = brute_amplitude(s.times(), s.values(), DAY)
            + brute_amplitude(s.times(), s.values(), WEEK);
        assert!((spectral_sum(&s, &[DAY, WEEK]) - brute).abs() < 1e-12);
    }

    #[test]
    fn mismatched_series_rejected() {
        assert!(ResidualSeries::<f64>::new(vec![0.0], vec![]).is_err());
        assert!(ResidualSeries::<f64>::new(vec![], vec![]).is_err());
    }

    proptest! {
        #[test]
        fn amplitude_invariances(
            pairs in prop::collection::vec((0.0f64..1e6, -5.0f64..5.0), 2..60),
            shift in -10.0f64..10.0,
            scale in -4.0f64..4.0,
            period in 600.0f64..1e6,
        ) {
            let (t, v): (Vec<f64>, Vec<f64>) = pairs.iter().copied().unzip();
            let base = amplitude(&ResidualSeries::new(t.clone(), v.clone()).unwrap(), period);
            let shifted: Vec<f64> = v.iter().map(|x| x + shift).collect();
            let scaled: Vec<f64> = v.iter().map(|x| x * scale).collect();
            let a_shift = amplitude(&ResidualSeries::new(t.clone(), shifted).unwrap(), period);
            let a_scale = amplitude(&ResidualSeries::new(t.clone(), scaled).unwrap(), period);
            prop_assert!((a_shift - base).abs() < 1e-9);
            prop_assert!((a_scale - scale.abs() * base).abs() < 1e-9);

            let mut rev = pairs.clone();
            rev.reverse();
            let (tr, vr): (Vec<f64>, Vec<f64>) = rev.into_iter().unzip();
            let a_perm = amplitude(&ResidualSeries::new(tr, vr).unwrap(), period);
            prop_assert!((a_perm - base).abs() < 1e-9);
        }

        #[test]
        fn recovers_embedded_period(k in 1usize..=24, phase in 0.0f64..std::f64::consts::TAU) {
            let cands = default_candidates(WEEK, 24);
            let target = cands[k - 1];
            // 8 samples per period over 3 periods at minimum
            let n = 8 * 24 * 3;
            let span = 3.0 * WEEK;
            let mut rng = ChaCha8Rng::seed_from_u64(k as u64);
            let times: Vec<f64> = (0..n).map(|i| i as f64 * span / n as f64 + rng.random_range(0.0..10.0)).collect();
            let values = times.iter().map(|t| (std::f64::consts::TAU * t / target + phase).cos()).collect();
            let s = ResidualSeries::new(times, values).unwrap();
            prop_assert_eq!(prominent_period(&s, &cands, &[]).unwrap(), target);
        }
    }
}
