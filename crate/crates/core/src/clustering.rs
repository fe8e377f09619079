//! Gaussian mixtures over assembled hypertime vectors.
//!
//! Two backends share one EM engine:
//! * `em` seeds component means by D²-weighted (k-means++ style) sampling
//!   under [`mixed_distance`] and starts every component from the global
//!   covariance;
//! * `km` runs Lloyd iterations under the same metric and seeds means,
//!   covariances and weights from the hard partition.
//!
//! M-steps clamp covariance eigenvalues at a floor, which is the maximizer
//! of the likelihood under that constraint, so the log-likelihood trace
//! stays non-decreasing. A fit whose unclamped covariances fall below the
//! floor or exceed the condition ceiling is restarted with a new seed and,
//! failing that, refitted with diagonal covariances.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::hypertime::DimensionLayout;
use crate::linalg::{Cholesky, SquareMatrix};
use crate::scalar::{log_sum_exp, Scalar};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Backend {
    Em,
    Km,
}

impl Backend {
    pub fn name(self) -> &'static str {
        match self {
            Backend::Em => "em",
            Backend::Km => "km",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CovarianceKind {
    Full,
    Diagonal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FitConfig<F: Scalar> {
    /// Mean predictions are density weighted, so components beyond one
    /// only help where the data has real spatial structure; sweep it.
    pub n_clusters: usize,
    pub max_iterations: usize,
    /// Convergence threshold on the per-point mean log-likelihood.
    pub tolerance: F,
    pub max_restarts: usize,
    pub eigen_floor: F,
    pub condition_ceiling: F,
    pub seed: u64,
    pub backend: Backend,
}

impl<F: Scalar> Default for FitConfig<F> {
    fn default() -> Self {
        Self {
            n_clusters: 1,
            max_iterations: 200,
            tolerance: F::lit(1e-6),
            max_restarts: 5,
            eigen_floor: F::lit(1e-6),
            condition_ceiling: F::lit(1e10),
            seed: 42,
            backend: Backend::Em,
        }
    }
}

impl<F: Scalar> FitConfig<F> {
    pub fn validate(&self) -> Result<()> {
        if self.n_clusters == 0 {
            return Err(Error::InvalidConfig("n_clusters must be at least 1".into()));
        }
        if !(self.tolerance > F::zero())
            || !(self.eigen_floor > F::zero())
            || !(self.condition_ceiling > F::one())
        {
            return Err(Error::InvalidConfig("tolerances must be positive".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GaussianComponent<F: Scalar> {
    pub weight: F,
    pub mean: Vec<F>,
    pub covariance: SquareMatrix<F>,
}

impl<F: Scalar> GaussianComponent<F> {
    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn is_finite(&self) -> bool {
        self.weight.is_finite()
            && self.mean.iter().all(|v| v.is_finite())
            && self.covariance.is_finite()
    }

    /// Gaussian density at `x`; zero if the covariance is not positive
    /// definite.
    pub fn pdf(&self, x: &[F]) -> F {
        GaussianDensity::new(&self.mean, &self.covariance).map_or(F::zero(), |g| g.log_pdf(x).exp())
    }
}

/// Gaussian with a cached Cholesky factor.
#[derive(Debug, Clone)]
pub struct GaussianDensity<F: Scalar> {
    mean: Vec<F>,
    chol: Cholesky<F>,
    log_norm: F,
}

impl<F: Scalar> GaussianDensity<F> {
    pub fn new(mean: &[F], covariance: &SquareMatrix<F>) -> Option<Self> {
        let chol = covariance.cholesky()?;
        let d = F::from_usize_lossy(mean.len());
        let log_norm = -F::lit(0.5) * (d * (F::TAU()).ln() + chol.log_det());
        Some(Self {
            mean: mean.to_vec(),
            chol,
            log_norm,
        })
    }

    pub fn log_pdf(&self, x: &[F]) -> F {
        let diff: Vec<F> = x.iter().zip(&self.mean).map(|(&a, &b)| a - b).collect();
        self.log_norm - F::lit(0.5) * self.chol.mahalanobis_sq(&diff)
    }

    pub fn chol(&self) -> &Cholesky<F> {
        &self.chol
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct FitLog<F: Scalar> {
    pub iterations: usize,
    pub log_likelihood: F,
    /// Per-point mean log-likelihood after every E-step.
    pub trace: Vec<F>,
    pub restarts: usize,
    pub diagonal_fallback: bool,
    /// Final unclamped covariances violated the floor or the ceiling.
    pub unstable: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct MixtureModel<F: Scalar> {
    pub components: Vec<GaussianComponent<F>>,
    pub layout: DimensionLayout,
    pub fit_log: FitLog<F>,
}

impl<F: Scalar> MixtureModel<F> {
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn weight_sum(&self) -> F {
        self.components.iter().map(|c| c.weight).sum()
    }

    pub fn is_finite(&self) -> bool {
        self.components.iter().all(GaussianComponent::is_finite)
            && self.fit_log.log_likelihood.is_finite()
    }

    /// `Σ w_j N(x; μ_j, Σ_j)`.
    pub fn pdf(&self, x: &[F]) -> F {
        self.components.iter().map(|c| c.weight * c.pdf(x)).sum()
    }
}

/// True iff some covariance has an eigenvalue below `floor` or a condition
/// number above `ceiling`.
pub fn detect_instability<F: Scalar>(model: &MixtureModel<F>, floor: F, ceiling: F) -> bool {
    model
        .components
        .iter()
        .any(|c| covariance_unstable(&c.covariance, floor, ceiling))
}

fn covariance_unstable<F: Scalar>(cov: &SquareMatrix<F>, floor: F, ceiling: F) -> bool {
    if !cov.is_finite() {
        return true;
    }
    let eig = cov.symmetric_eigen();
    let (lo, hi) = (eig.min_value(), eig.max_value());
    lo < floor || !(lo > F::zero()) || hi / lo > ceiling
}

/// Euclidean distance over value and spatial indices plus `1 − cos` between
/// each pair of temporal coordinates.
pub fn mixed_distance<F: Scalar>(p: &[F], q: &[F], layout: &DimensionLayout) -> F {
    let mut sq = F::zero();
    for i in layout.euclidean_indices() {
        let d = p[i] - q[i];
        sq = sq + d * d;
    }
    let mut dist = sq.sqrt();
    for &(c, s) in &layout.temporal {
        let np = p[c].hypot(p[s]);
        let nq = q[c].hypot(q[s]);
        let term = if np > F::zero() && nq > F::zero() {
            let cos = (p[c] * q[c] + p[s] * q[s]) / (np * nq);
            (F::one() - cos.min(F::one()).max(-F::one())).max(F::zero())
        } else {
            F::one()
        };
        dist = dist + term;
    }
    dist
}

fn renormalize_temporal<F: Scalar>(v: &mut [F], layout: &DimensionLayout) {
    for &(c, s) in &layout.temporal {
        let n = v[c].hypot(v[s]);
        if n > F::zero() {
            v[c] = v[c] / n;
            v[s] = v[s] / n;
        }
    }
}

fn check_points<F: Scalar>(points: &[Vec<F>], layout: &DimensionLayout, n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidConfig("n_clusters must be at least 1".into()));
    }
    if points.len() < n {
        return Err(Error::TooFewPoints {
            points: points.len(),
            clusters: n,
        });
    }
    if let Some(bad) = points.iter().find(|p| p.len() != layout.len()) {
        return Err(Error::DimensionMismatch {
            expected: layout.len(),
            found: bad.len(),
        });
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::InvalidRecord("non-finite point coordinate".into()));
    }
    Ok(())
}

/// Sorted copy of the points, so fits do not depend on input order.
fn canonical_order<F: Scalar>(points: &[Vec<F>]) -> Vec<Vec<F>> {
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.as_f64().total_cmp(&y.as_f64()))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    sorted
}

fn restart_seed(seed: u64, attempt: usize) -> u64 {
    seed.wrapping_add((attempt as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15))
}

/// D²-weighted seeding under the mixed metric.
fn seed_centers<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    n: usize,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<F>> {
    let first = rng.random_range(0..points.len());
    let mut chosen = vec![first];
    let mut nearest: Vec<f64> = points
        .iter()
        .map(|p| mixed_distance(p, &points[first], layout).as_f64())
        .collect();
    while chosen.len() < n {
        let total: f64 = nearest.iter().map(|d| d * d).sum();
        let pick = if total > 0.0 && total.is_finite() {
            let mut r = rng.random::<f64>() * total;
            let mut idx = None;
            for (i, d) in nearest.iter().enumerate() {
                let w = d * d;
                if w > 0.0 {
                    idx = Some(i);
                    if r < w {
                        break;
                    }
                    r -= w;
                }
            }
            idx.expect("positive total weight")
        } else {
            (0..points.len())
                .find(|i| !chosen.contains(i))
                .expect("points.len() >= n")
        };
        chosen.push(pick);
        for (d, p) in nearest.iter_mut().zip(points) {
            *d = d.min(mixed_distance(p, &points[pick], layout).as_f64());
        }
    }
    chosen.into_iter().map(|i| points[i].clone()).collect()
}

fn nearest_center<F: Scalar>(p: &[F], centers: &[Vec<F>], layout: &DimensionLayout) -> (usize, F) {
    let mut best = (0, F::infinity());
    for (j, c) in centers.iter().enumerate() {
        let d = mixed_distance(p, c, layout);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Lloyd iterations under [`mixed_distance`]. Centers are member means with
/// each temporal pair projected back onto the unit circle; an emptied
/// cluster is re-seeded with the point farthest from its center.
pub fn kmeans_init<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    n: usize,
    seed: u64,
) -> Result<(Vec<Vec<F>>, Vec<usize>)> {
    check_points(points, layout, n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = seed_centers(points, layout, n, &mut rng);
    let mut assignments: Vec<usize> = Vec::new();
    for _ in 0..100 {
        let scored: Vec<(usize, F)> = points
            .par_iter()
            .map(|p| nearest_center(p, &centers, layout))
            .collect();
        let mut next: Vec<usize> = scored.iter().map(|s| s.0).collect();
        let mut counts = vec![0usize; n];
        next.iter().for_each(|&j| counts[j] += 1);
        let mut taken = vec![false; points.len()];
        for j in 0..n {
            if counts[j] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|&i| !taken[i] && counts[next[i]] > 1)
                .max_by(|&a, &b| {
                    scored[a]
                        .1
                        .as_f64()
                        .total_cmp(&scored[b].1.as_f64())
                        .then(b.cmp(&a))
                });
            if let Some(i) = far {
                counts[next[i]] -= 1;
                next[i] = j;
                counts[j] = 1;
                taken[i] = true;
            }
        }
        let converged = next == assignments;
        assignments = next;
        let d = layout.len();
        let mut sums = vec![vec![F::zero(); d]; n];
        for (p, &j) in points.iter().zip(&assignments) {
            for (s, &v) in sums[j].iter_mut().zip(p) {
                *s = *s + v;
            }
        }
        for (j, sum) in sums.into_iter().enumerate() {
            if counts[j] == 0 {
                continue;
            }
            let c = F::from_usize_lossy(counts[j]);
            let mut center: Vec<F> = sum.into_iter().map(|s| s / c).collect();
            renormalize_temporal(&mut center, layout);
            centers[j] = center;
        }
        if converged {
            break;
        }
    }
    Ok((centers, assignments))
}

fn global_covariance<F: Scalar>(points: &[Vec<F>]) -> (Vec<F>, SquareMatrix<F>) {
    let ones = vec![F::one(); points.len()];
    weighted_moments(points, &ones)
}

/// Weighted mean and (biased) covariance; weights need not be normalized.
fn weighted_moments<F: Scalar>(points: &[Vec<F>], weights: &[F]) -> (Vec<F>, SquareMatrix<F>) {
    let d = points.first().map_or(0, Vec::len);
    let total: F = weights.iter().copied().sum();
    let mut mean = vec![F::zero(); d];
    for (p, &w) in points.iter().zip(weights) {
        for (m, &v) in mean.iter_mut().zip(p) {
            *m = *m + w * v;
        }
    }
    mean.iter_mut().for_each(|m| *m = *m / total);
    let mut cov = SquareMatrix::zeros(d);
    let mut diff = vec![F::zero(); d];
    for (p, &w) in points.iter().zip(weights) {
        if w == F::zero() {
            continue;
        }
        for k in 0..d {
            diff[k] = p[k] - mean[k];
        }
        for r in 0..d {
            let wr = w * diff[r];
            for c in r..d {
                cov[(r, c)] = cov[(r, c)] + wr * diff[c];
            }
        }
    }
    for r in 0..d {
        for c in r..d {
            let v = cov[(r, c)] / total;
            cov[(r, c)] = v;
            cov[(c, r)] = v;
        }
    }
    (mean, cov)
}

/// Applies the covariance constraint; returns the constrained matrix and
/// whether the raw one was unstable.
fn constrain<F: Scalar>(
    raw: &SquareMatrix<F>,
    kind: CovarianceKind,
    cfg: &FitConfig<F>,
) -> (SquareMatrix<F>, bool) {
    let raw = match kind {
        CovarianceKind::Full => raw.clone(),
        CovarianceKind::Diagonal => raw.diagonal_part(),
    };
    let unstable = covariance_unstable(&raw, cfg.eigen_floor, cfg.condition_ceiling);
    let constrained = match kind {
        CovarianceKind::Full => raw.clamp_eigenvalues(cfg.eigen_floor).0,
        CovarianceKind::Diagonal => SquareMatrix::from_diagonal(
            &raw.diagonal()
                .iter()
                .map(|&v| v.max(cfg.eigen_floor))
                .collect::<Vec<_>>(),
        ),
    };
    (constrained, unstable)
}

struct EStep<F: Scalar> {
    resp: Vec<Vec<F>>,
    mean_ll: F,
}

fn e_step<F: Scalar>(points: &[Vec<F>], comps: &[GaussianComponent<F>]) -> Option<EStep<F>> {
    let dens: Vec<(F, GaussianDensity<F>)> = comps
        .iter()
        .map(|c| GaussianDensity::new(&c.mean, &c.covariance).map(|g| (c.weight.ln(), g)))
        .collect::<Option<_>>()?;
    let rows: Vec<(Vec<F>, F)> = points
        .par_iter()
        .map(|p| {
            let logs: Vec<F> = dens.iter().map(|(lw, g)| *lw + g.log_pdf(p)).collect();
            let lse = log_sum_exp(&logs);
            let r = logs.iter().map(|&l| (l - lse).exp()).collect();
            (r, lse)
        })
        .collect();
    let mut total = F::zero();
    let mut resp = Vec::with_capacity(rows.len());
    for (r, ll) in rows {
        total = total + ll;
        resp.push(r);
    }
    let mean_ll = total / F::from_usize_lossy(points.len());
    mean_ll.is_finite().then_some(EStep { resp, mean_ll })
}

fn m_step<F: Scalar>(
    points: &[Vec<F>],
    resp: &[Vec<F>],
    prev: &[GaussianComponent<F>],
    kind: CovarianceKind,
    cfg: &FitConfig<F>,
) -> (Vec<GaussianComponent<F>>, bool) {
    let n = F::from_usize_lossy(points.len());
    let min_mass = F::epsilon() * n;
    let weight_floor = F::epsilon() * F::epsilon();
    let mut unstable = false;
    let mut comps: Vec<GaussianComponent<F>> = prev
        .iter()
        .enumerate()
        .map(|(j, old)| {
            let w: Vec<F> = resp.iter().map(|r| r[j]).collect();
            let mass: F = w.iter().copied().sum();
            let weight = (mass / n).max(weight_floor);
            if !(mass > min_mass) {
                unstable = true;
                return GaussianComponent {
                    weight,
                    mean: old.mean.clone(),
                    covariance: old.covariance.clone(),
                };
            }
            let (mean, raw) = weighted_moments(points, &w);
            let (covariance, bad) = constrain(&raw, kind, cfg);
            unstable |= bad;
            GaussianComponent {
                weight,
                mean,
                covariance,
            }
        })
        .collect();
    let total: F = comps.iter().map(|c| c.weight).sum();
    comps.iter_mut().for_each(|c| c.weight = c.weight / total);
    (comps, unstable)
}

fn run_em<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    init: Vec<GaussianComponent<F>>,
    kind: CovarianceKind,
    cfg: &FitConfig<F>,
) -> MixtureModel<F> {
    let mut comps = init;
    let mut log = FitLog::default();
    let Some(mut step) = e_step(points, &comps) else {
        log.unstable = true;
        log.log_likelihood = F::neg_infinity();
        return MixtureModel {
            components: comps,
            layout: layout.clone(),
            fit_log: log,
        };
    };
    log.trace.push(step.mean_ll);
    for it in 1..=cfg.max_iterations {
        let (next, unstable) = m_step(points, &step.resp, &comps, kind, cfg);
        let Some(next_step) = e_step(points, &next) else {
            log.unstable = true;
            break;
        };
        comps = next;
        log.unstable = unstable;
        log.iterations = it;
        let gain = next_step.mean_ll - step.mean_ll;
        step = next_step;
        log.trace.push(step.mean_ll);
        if gain < cfg.tolerance {
            break;
        }
    }
    log.log_likelihood = step.mean_ll;
    MixtureModel {
        components: comps,
        layout: layout.clone(),
        fit_log: log,
    }
}

fn em_initial<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    cfg: &FitConfig<F>,
    kind: CovarianceKind,
    seed: u64,
) -> Vec<GaussianComponent<F>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let centers = seed_centers(points, layout, cfg.n_clusters, &mut rng);
    let (_, raw) = global_covariance(points);
    let (cov, _) = constrain(&raw, kind, cfg);
    let w = F::one() / F::from_usize_lossy(cfg.n_clusters);
    centers
        .into_iter()
        .map(|mean| GaussianComponent {
            weight: w,
            mean,
            covariance: cov.clone(),
        })
        .collect()
}

fn km_initial<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    cfg: &FitConfig<F>,
    kind: CovarianceKind,
    seed: u64,
) -> Result<Vec<GaussianComponent<F>>> {
    let (_, assignments) = kmeans_init(points, layout, cfg.n_clusters, seed)?;
    let (_, global) = global_covariance(points);
    let n = F::from_usize_lossy(points.len());
    Ok((0..cfg.n_clusters)
        .map(|j| {
            let members: Vec<F> = assignments
                .iter()
                .map(|&a| if a == j { F::one() } else { F::zero() })
                .collect();
            let count: F = members.iter().copied().sum();
            let (mean, raw) = weighted_moments(points, &members);
            let raw = if count >= F::lit(2.0) {
                raw
            } else {
                global.clone()
            };
            GaussianComponent {
                weight: count / n,
                mean,
                covariance: constrain(&raw, kind, cfg).0,
            }
        })
        .collect())
}

/// One EM run from the seeded D² initialization.
pub fn em_fit<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    cfg: &FitConfig<F>,
) -> Result<MixtureModel<F>> {
    cfg.validate()?;
    check_points(points, layout, cfg.n_clusters)?;
    let points = canonical_order(points);
    let init = em_initial(&points, layout, cfg, CovarianceKind::Full, cfg.seed);
    Ok(run_em(&points, layout, init, CovarianceKind::Full, cfg))
}

fn fit_with_restarts<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    cfg: &FitConfig<F>,
    init: impl Fn(CovarianceKind, u64) -> Result<Vec<GaussianComponent<F>>>,
) -> Result<MixtureModel<F>> {
    for attempt in 0..=cfg.max_restarts {
        let seed = restart_seed(cfg.seed, attempt);
        let mut model = run_em(
            points,
            layout,
            init(CovarianceKind::Full, seed)?,
            CovarianceKind::Full,
            cfg,
        );
        if !model.fit_log.unstable && model.is_finite() {
            model.fit_log.restarts = attempt;
            return Ok(model);
        }
        log::debug!("unstable mixture fit (attempt {attempt}), restarting");
    }
    log::debug!("falling back to diagonal covariances");
    let mut model = run_em(
        points,
        layout,
        init(CovarianceKind::Diagonal, cfg.seed)?,
        CovarianceKind::Diagonal,
        cfg,
    );
    model.fit_log.restarts = cfg.max_restarts;
    model.fit_log.diagonal_fallback = true;
    Ok(model)
}

/// [`em_fit`] with instability restarts and the diagonal fallback.
pub fn em_fit_stable<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    cfg: &FitConfig<F>,
) -> Result<MixtureModel<F>> {
    cfg.validate()?;
    check_points(points, layout, cfg.n_clusters)?;
    let points = canonical_order(points);
    fit_with_restarts(&points, layout, cfg, |kind, seed| {
        Ok(em_initial(&points, layout, cfg, kind, seed))
    })
}

/// k-means (mixed metric) initialization followed by stable EM refinement.
pub fn km_fit<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    cfg: &FitConfig<F>,
) -> Result<MixtureModel<F>> {
    cfg.validate()?;
    check_points(points, layout, cfg.n_clusters)?;
    let points = canonical_order(points);
    fit_with_restarts(&points, layout, cfg, |kind, seed| {
        km_initial(&points, layout, cfg, kind, seed)
    })
}

/// Dispatches on `cfg.backend`.
pub fn fit<F: Scalar>(
    points: &[Vec<F>],
    layout: &DimensionLayout,
    cfg: &FitConfig<F>,
) -> Result<MixtureModel<F>> {
    match cfg.backend {
        Backend::Em => em_fit_stable(points, layout, cfg),
        Backend::Km => km_fit(points, layout, cfg),
    }
}
