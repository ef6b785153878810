//! CMA-ES core (sampling and rank-μ update), the evolutionary importance
//! weight map, the softmax ablation weights, and the trust-region CMA
//! baseline.
//!
//! The weight map turns the evolving Gaussian N(m, σ²C) into per-sample
//! importance weights: unnormalized density exponents are softmax-normalized
//! over the batch, then floored at `1/(10·batch)` so no sample loses its
//! gradient information entirely, then renormalized so the batch sum stays
//! at most 1.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{cholesky, repair_covariance, Matrix, Rng, Vector};
use crate::objectives::{evaluate_metered, BudgetMeter, Problem};
use crate::record::{config_hash, RunRecord, TrEventRow, TrajectoryPoint};
use crate::trust_region::{MapKind, TrustRegion};

/// Initial coordinate-wise step size for the CMA runners, in normalized
/// trust-region units.
const CMA_SIGMA0: f64 = 0.5;

/// Where a run starts when the caller does not supply a point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StartPolicy {
    DomainCenter,
    RandomUniform,
}

pub fn start_point(problem: &Problem, policy: StartPolicy, rng: &mut Rng) -> Vector {
    match policy {
        StartPolicy::DomainCenter => Vector::from_fn(problem.dim(), |i, _| {
            0.5 * (problem.bounds()[i].0 + problem.bounds()[i].1)
        }),
        StartPolicy::RandomUniform => Vector::from_fn(problem.dim(), |i, _| {
            rng.uniform_in(problem.bounds()[i].0, problem.bounds()[i].1)
        }),
    }
}

/// Strategy constants. `standard` follows the usual CMA-ES defaults as
/// functions of the dimension; the fields are public so degenerate settings
/// can be constructed directly.
#[derive(Debug, Clone)]
pub struct CmaParams {
    pub lambda: usize,
    pub mu: usize,
    pub weights: Vec<f64>,
    pub mu_eff: f64,
    pub c_sigma: f64,
    pub d_sigma: f64,
    pub c_c: f64,
    pub c_1: f64,
    pub c_mu: f64,
    /// E‖N(0, I)‖ for the step-size path.
    pub chi_n: f64,
}

impl CmaParams {
    pub fn default_lambda(dim: usize) -> usize {
        4 + (3.0 * (dim as f64).ln()).floor() as usize
    }

    pub fn standard(dim: usize, lambda: usize) -> Self {
        let n = dim as f64;
        let mu = (lambda / 2).max(1);
        let raw: Vec<f64> = (1..=mu)
            .map(|i| (mu as f64 + 0.5).ln() - (i as f64).ln())
            .collect();
        let total: f64 = raw.iter().sum();
        let weights: Vec<f64> = raw.iter().map(|w| w / total).collect();
        let mu_eff = 1.0 / weights.iter().map(|w| w * w).sum::<f64>();

        let c_sigma = (mu_eff + 2.0) / (n + mu_eff + 5.0);
        let d_sigma = 1.0 + 2.0 * (((mu_eff - 1.0) / (n + 1.0)).sqrt() - 1.0).max(0.0) + c_sigma;
        let c_c = (4.0 + mu_eff / n) / (n + 4.0 + 2.0 * mu_eff / n);
        let c_1 = 2.0 / ((n + 1.3).powi(2) + mu_eff);
        let c_mu = (2.0 * (mu_eff - 2.0 + 1.0 / mu_eff) / ((n + 2.0).powi(2) + mu_eff))
            .min(1.0 - c_1);
        let chi_n = n.sqrt() * (1.0 - 1.0 / (4.0 * n) + 1.0 / (21.0 * n * n));

        let params = Self {
            lambda,
            mu,
            weights,
            mu_eff,
            c_sigma,
            d_sigma,
            c_c,
            c_1,
            c_mu,
            chi_n,
        };
        params.assert_weight_contract();
        params
    }

    /// Decreasing, positive, normalized recombination weights.
    pub fn assert_weight_contract(&self) {
        let sum: f64 = self.weights.iter().sum();
        assert!((sum - 1.0).abs() <= 1e-12, "weights must sum to 1, got {sum}");
        for pair in self.weights.windows(2) {
            assert!(pair[0] >= pair[1], "weights must be decreasing");
        }
        assert!(
            self.weights.iter().all(|w| *w > 0.0),
            "weights must be positive"
        );
    }
}

/// Evolving search distribution N(m, σ²C) with its evolution paths.
#[derive(Debug, Clone)]
pub struct CmaState {
    pub params: CmaParams,
    pub mean: Vector,
    pub sigma: f64,
    pub cov: Matrix,
    pub p_sigma: Vector,
    pub p_c: Vector,
    pub generation: u32,
}

impl CmaState {
    pub fn new(mean: Vector, sigma: f64, params: CmaParams) -> Self {
        let dim = mean.len();
        Self {
            params,
            mean,
            sigma,
            cov: Matrix::identity(dim, dim),
            p_sigma: Vector::zeros(dim),
            p_c: Vector::zeros(dim),
            generation: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// λ draws from N(m, σ²C). A Cholesky failure repairs the covariance
    /// (eigenvalue flooring) and retries once; a second failure is the
    /// caller's signal to reset the state.
    pub fn sample(&mut self, lambda: usize, rng: &mut Rng) -> Result<Vec<Vector>> {
        if lambda < 2 {
            return Err(Error::Domain(format!("population size must be >= 2, got {lambda}")));
        }
        let l = match cholesky(&self.cov) {
            Ok(l) => l,
            Err(_) => {
                self.cov = repair_covariance(&self.cov);
                cholesky(&self.cov).map_err(|_| Error::SingularCovariance)?
            }
        };
        Ok((0..lambda)
            .map(|_| {
                let z = rng.standard_normal_vector(self.dim());
                &self.mean + &l * z * self.sigma
            })
            .collect())
    }

    fn eigen_range(&self) -> (f64, f64) {
        let eigen = nalgebra::SymmetricEigen::new(self.cov.clone());
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for v in eigen.eigenvalues.iter() {
            lo = lo.min(*v);
            hi = hi.max(*v);
        }
        (lo, hi)
    }

    pub fn condition_number(&self) -> f64 {
        let (lo, hi) = self.eigen_range();
        if lo <= 0.0 {
            f64::INFINITY
        } else {
            hi / lo
        }
    }

    pub fn max_eigenvalue(&self) -> f64 {
        self.eigen_range().1
    }

    /// Covariance is repaired per the numerics flooring policy when the
    /// symmetric-eigen check finds it degenerate.
    pub fn assert_positive_definite(&self) -> bool {
        self.eigen_range().0 > 0.0
    }
}

/// One generation of the standard CMA-ES update, minimizing fitness.
/// Non-finite fitness entries are dropped; with fewer than two survivors the
/// update is skipped and the state returned unchanged.
pub fn cma_update(state: &CmaState, population: &[(Vector, f64)]) -> CmaState {
    let mut scored: Vec<(usize, f64)> = population
        .iter()
        .enumerate()
        .filter(|(_, (_, f))| f.is_finite())
        .map(|(i, (_, f))| (i, *f))
        .collect();
    if scored.len() < 2 {
        return state.clone();
    }
    scored.sort_by(|a, b| a.1.partial_cmp(&b.1).unwrap());

    let p = &state.params;
    let n = state.dim();
    let nf = n as f64;
    let mu_used = p.mu.min(scored.len());
    let wsum: f64 = p.weights[..mu_used].iter().sum();
    let weights: Vec<f64> = p.weights[..mu_used].iter().map(|w| w / wsum).collect();

    let old_mean = state.mean.clone();
    let mut new_mean = Vector::zeros(n);
    for (w, &(idx, _)) in weights.iter().zip(&scored) {
        new_mean += &population[idx].0 * *w;
    }

    // C^{-1/2} for the step-size path.
    let eigen = nalgebra::SymmetricEigen::new(state.cov.clone());
    let inv_sqrt = Matrix::from_diagonal(&eigen.eigenvalues.map(|v| 1.0 / v.max(1e-20).sqrt()));
    let c_inv_sqrt = &eigen.eigenvectors * inv_sqrt * eigen.eigenvectors.transpose();

    let mean_step = (&new_mean - &old_mean) / state.sigma;

    let p_sigma = &state.p_sigma * (1.0 - p.c_sigma)
        + c_inv_sqrt * &mean_step * (p.c_sigma * (2.0 - p.c_sigma) * p.mu_eff).sqrt();

    let gen_factor = 1.0 - (1.0 - p.c_sigma).powi(2 * (state.generation as i32 + 1));
    let h_sigma = if p_sigma.norm()
        < (1.4 + 2.0 / (nf + 1.0)) * p.chi_n * gen_factor.sqrt()
    {
        1.0
    } else {
        0.0
    };

    let p_c = &state.p_c * (1.0 - p.c_c)
        + &mean_step * (h_sigma * (p.c_c * (2.0 - p.c_c) * p.mu_eff).sqrt());

    // Rank-μ estimate C' = Σ wᵢ yᵢ yᵢᵀ with yᵢ = (xᵢ - m)/σ.
    let mut rank_mu = Matrix::zeros(n, n);
    for (w, &(idx, _)) in weights.iter().zip(&scored) {
        let y = (&population[idx].0 - &old_mean) / state.sigma;
        rank_mu.ger(*w, &y, &y, 1.0);
    }

    let delta_h = (1.0 - h_sigma) * p.c_c * (2.0 - p.c_c);
    let base = 1.0 - p.c_1 - p.c_mu + p.c_1 * delta_h;
    let mut cov = &state.cov * base;
    cov.ger(p.c_1, &p_c, &p_c, 1.0);
    cov += rank_mu * p.c_mu;
    let cov = (&cov + cov.transpose()) * 0.5;

    let sigma = (state.sigma
        * ((p.c_sigma / p.d_sigma) * (p_sigma.norm() / p.chi_n - 1.0)).exp())
    .clamp(1e-16, 1e8);

    CmaState {
        params: state.params.clone(),
        mean: new_mean,
        sigma,
        cov,
        p_sigma,
        p_c,
        generation: state.generation + 1,
    }
}

/// Source of per-sample importance weights.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WeightSource {
    /// Eq.-style Gaussian density weights from the evolving CMA statistics.
    CmaGaussian,
    /// Fitness softmax at the given temperature (the "-0.1" ablation).
    Softmax { temperature: f64 },
    /// Every sample weighs 1/batch; reduces the weighted losses to EGL/HGrad.
    Uniform,
}

#[derive(Debug, Clone)]
pub struct WeightOutcome {
    pub weights: Vec<f64>,
    /// True when a degenerate covariance forced uniform weights.
    pub used_fallback: bool,
}

/// Minimum weight: `1/(10·batch)` keeps every sample's gradient information
/// alive while letting elites dominate by up to 10x.
pub fn weight_floor(batch: usize) -> f64 {
    1.0 / (10.0 * batch as f64)
}

/// Importance weights for a batch of points with fitness values.
///
/// Every emitted batch satisfies `min(w) >= weight_floor(batch)` and
/// `sum(w) <= 1`; the softmax source is rank-monotone in fitness.
pub fn weights_for(
    source: &WeightSource,
    cma: Option<&CmaState>,
    points: &[&Vector],
    fitness: &[f64],
) -> WeightOutcome {
    assert!(!points.is_empty(), "weights_for needs a non-empty batch");
    assert_eq!(points.len(), fitness.len());
    let batch = points.len();

    let (mut weights, used_fallback) = match source {
        WeightSource::Uniform => (vec![1.0 / batch as f64; batch], false),
        WeightSource::Softmax { temperature } => {
            let scores: Vec<f64> = fitness.iter().map(|f| -f / temperature).collect();
            (softmax(&scores), false)
        }
        WeightSource::CmaGaussian => match cma.and_then(|s| gaussian_scores(s, points)) {
            Some(scores) => (softmax(&scores), false),
            None => (vec![1.0 / batch as f64; batch], true),
        },
    };

    apply_floor(&mut weights);

    let floor = weight_floor(batch);
    let sum: f64 = weights.iter().sum();
    assert!(
        weights.iter().all(|w| *w >= floor * (1.0 - 1e-9)),
        "weight fell below floor"
    );
    assert!(sum <= 1.0 + 1e-12, "batch weights sum to {sum} > 1");

    WeightOutcome {
        weights,
        used_fallback,
    }
}

fn gaussian_scores(state: &CmaState, points: &[&Vector]) -> Option<Vec<f64>> {
    let l = cholesky(&state.cov)
        .or_else(|_| cholesky(&repair_covariance(&state.cov)))
        .ok()?;
    let n = state.dim();
    let ls = l.as_slice();
    if (0..n).any(|i| ls[i * n + i] == 0.0) {
        return None;
    }
    let two_sigma_sq = 2.0 * state.sigma * state.sigma;
    let mean = state.mean.as_slice();
    let mut y = vec![0.0; n];
    let mut scores = Vec::with_capacity(points.len());
    for x in points {
        let xs = x.as_slice();
        // Forward substitution for L y = x - m; the exponent is -|y|²/(2σ²).
        let mut sumsq = 0.0;
        for i in 0..n {
            let mut acc = xs[i] - mean[i];
            for j in 0..i {
                acc -= ls[j * n + i] * y[j];
            }
            let v = acc / ls[i * n + i];
            y[i] = v;
            sumsq += v * v;
        }
        scores.push(-sumsq / two_sigma_sq);
    }
    Some(scores)
}

fn softmax(scores: &[f64]) -> Vec<f64> {
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    if !max.is_finite() {
        return vec![1.0 / scores.len() as f64; scores.len()];
    }
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.iter().map(|e| e / total).collect()
}

/// Raise sub-floor weights to the floor and rescale the rest so the batch
/// sums to one. Rescaling can push new entries under the floor, so iterate
/// until the floored set is stable.
fn apply_floor(weights: &mut [f64]) {
    let batch = weights.len();
    let floor = weight_floor(batch);
    let mut fixed = vec![false; batch];
    loop {
        let n_fixed = fixed.iter().filter(|f| **f).count();
        let free_target = 1.0 - n_fixed as f64 * floor;
        let free_sum: f64 = weights
            .iter()
            .zip(&fixed)
            .filter(|(_, f)| !**f)
            .map(|(w, _)| *w)
            .sum();
        if free_sum <= 0.0 {
            for (w, f) in weights.iter_mut().zip(&fixed) {
                if !*f {
                    *w = free_target / (batch - n_fixed) as f64;
                }
            }
        } else {
            let scale = free_target / free_sum;
            for (w, f) in weights.iter_mut().zip(&fixed) {
                if !*f {
                    *w *= scale;
                }
            }
        }
        let mut changed = false;
        for (w, f) in weights.iter_mut().zip(fixed.iter_mut()) {
            if !*f && *w < floor {
                *w = floor;
                *f = true;
                changed = true;
            }
        }
        if !changed {
            break;
        }
    }
}

/// The rescaling layer of the trust-region CMA baseline: candidate points are
/// `shift + delta * z`, and each internal stop shrinks `delta` by `gamma` and
/// recenters on the best point of the stopping generation.
#[derive(Debug, Clone)]
pub struct TrRescale {
    pub shift: Vector,
    pub delta: f64,
    pub gamma: f64,
    pub restarts: u32,
}

impl TrRescale {
    pub fn new(dim: usize, gamma: f64) -> Self {
        Self {
            shift: Vector::zeros(dim),
            delta: 1.0,
            gamma,
            restarts: 0,
        }
    }

    pub fn apply(&self, z: &Vector) -> Vector {
        &self.shift + z * self.delta
    }

    pub fn restart_at(&mut self, best: Vector) {
        self.delta *= self.gamma;
        self.shift = best;
        self.restarts += 1;
    }
}

/// Internal stop triggers: ill-conditioned or collapsed covariance, or
/// `30·λ` evaluations without a new best. Plain CMA terminates here, the
/// way tolerance-based implementations do; the trust-region variant
/// restarts instead and keeps spending its budget.
fn should_stop(state: &CmaState, evals_since_improve: usize, lambda: usize) -> bool {
    state.condition_number() > 1e14
        || state.sigma * state.max_eigenvalue() < 1e-12
        || evals_since_improve >= 30 * lambda
}

#[derive(Serialize)]
struct CmaRunConfig<'a> {
    algorithm: &'a str,
    map_kind: MapKind,
    gamma: Option<f64>,
    budget: usize,
    start: StartPolicy,
    lambda: usize,
    sigma0: f64,
}

/// Plain CMA-ES inside a fixed trust-region map of the domain.
pub fn cma_run(
    problem: &Problem,
    budget: usize,
    map_kind: MapKind,
    seed: u64,
    start: StartPolicy,
) -> RunRecord {
    run_cma_family(problem, budget, map_kind, None, seed, start)
}

/// CMA with restart-and-rescale trust-region management.
pub fn cma_tr_run(
    problem: &Problem,
    budget: usize,
    map_kind: MapKind,
    gamma: f64,
    seed: u64,
    start: StartPolicy,
) -> RunRecord {
    run_cma_family(problem, budget, map_kind, Some(gamma), seed, start)
}

fn run_cma_family(
    problem: &Problem,
    budget: usize,
    map_kind: MapKind,
    restart_gamma: Option<f64>,
    seed: u64,
    start: StartPolicy,
) -> RunRecord {
    let dim = problem.dim();
    let lambda = CmaParams::default_lambda(dim);
    let algorithm = if restart_gamma.is_some() { "cma-tr" } else { "cma" };
    let hash = config_hash(&CmaRunConfig {
        algorithm,
        map_kind,
        gamma: restart_gamma,
        budget,
        start,
        lambda,
        sigma0: CMA_SIGMA0,
    });

    let mut rng = Rng::new(seed);
    let tr = TrustRegion::covering(problem.bounds(), map_kind);
    let x0 = start_point(problem, start, &mut rng);
    let u0 = tr.from_search(&x0).unwrap_or_else(|_| Vector::zeros(dim));

    let mut meter = BudgetMeter::new(budget);
    let mut state = CmaState::new(u0, CMA_SIGMA0, CmaParams::standard(dim, lambda));
    let mut rescale = TrRescale::new(dim, restart_gamma.unwrap_or(1.0));

    let mut f_best = f64::INFINITY;
    let mut x_best = x0.clone();
    let mut trajectory = Vec::new();
    let mut tr_events = Vec::new();
    let mut errors = Vec::new();
    let mut evals_since_improve = 0usize;

    'outer: while !meter.exhausted() {
        let zs = match state.sample(lambda, &mut rng) {
            Ok(zs) => zs,
            Err(e) => {
                errors.push(format!("sampling failed ({e}); distribution reset"));
                state = CmaState::new(
                    Vector::zeros(dim),
                    CMA_SIGMA0,
                    CmaParams::standard(dim, lambda),
                );
                continue;
            }
        };

        let mut generation = Vec::with_capacity(lambda);
        let mut gen_best: Option<(f64, Vector)> = None;
        let improved_before = f_best;
        for z in zs {
            let y = rescale.apply(&z);
            let x = tr.to_search(&y);
            match evaluate_metered(problem, &mut meter, &x) {
                Ok(f) => {
                    if f < f_best {
                        f_best = f;
                        x_best = x;
                    }
                    if gen_best.as_ref().map_or(true, |(bf, _)| f < *bf) {
                        gen_best = Some((f, y.clone()));
                    }
                    generation.push((z, f));
                }
                Err(_) => {
                    trajectory.push(sample_point(problem, &meter, f_best));
                    break 'outer;
                }
            }
        }
        trajectory.push(sample_point(problem, &meter, f_best));

        state = cma_update(&state, &generation);
        if f_best < improved_before {
            evals_since_improve = 0;
        } else {
            evals_since_improve += generation.len();
        }

        if should_stop(&state, evals_since_improve, lambda) {
            if restart_gamma.is_none() {
                break;
            }
            if let Some((_, best_y)) = gen_best {
                rescale.restart_at(best_y);
            } else {
                rescale.restart_at(rescale.shift.clone());
            }
            state = CmaState::new(
                Vector::zeros(dim),
                CMA_SIGMA0,
                CmaParams::standard(dim, lambda),
            );
            evals_since_improve = 0;
            tr_events.push(TrEventRow {
                generation: rescale.restarts,
                kind: "restart".into(),
                evals: meter.used(),
                center: tr.to_search(&rescale.shift).iter().cloned().collect(),
                scale: vec![rescale.delta; dim],
            });
        }
    }

    let norm = problem.normalized(f_best);
    RunRecord {
        algorithm: algorithm.into(),
        problem: problem.name().into(),
        dim,
        config_hash: hash,
        seed,
        budget,
        evals_used: meter.used(),
        y_min: problem.y_min(),
        y_max: problem.y_max(),
        f_best,
        f_best_normalized: norm.value,
        solved: norm.solved(),
        x_best: x_best.iter().cloned().collect(),
        stopped_early: false,
        trajectory,
        tr_events,
        errors,
    }
}

fn sample_point(problem: &Problem, meter: &BudgetMeter, f_best: f64) -> TrajectoryPoint {
    TrajectoryPoint {
        evals: meter.used(),
        f_best,
        f_best_normalized: problem.normalized(f_best).value,
    }
}
