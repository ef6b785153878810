//! The gradient-learning main loop: explore, pair, weight, train, descend,
//! and manage the trust region.
//!
//! One iteration samples `n_s` points uniformly from the ε-ball around the
//! incumbent (normalized coordinates), feeds them to the replay buffer and
//! the CMA distribution, draws up to `n_p` admissible training pairs from
//! the buffer, trains the gradient network for one epoch, and takes one
//! descent step. After `n_max` iterations without a new best value the
//! trust region reacts: interior stalls shrink it around the best point and
//! decay ε, boundary stalls (enough movement accumulated) only shift its
//! center.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::evo::{
    cma_update, start_point, weights_for, CmaParams, CmaState, StartPolicy, WeightSource,
};
use crate::numerics::{sample_ball, Rng, Vector};
use crate::objectives::{evaluate_metered, BudgetMeter, Problem};
use crate::record::{config_hash, RunRecord, TrEventRow, TrajectoryPoint};
use crate::surrogate::{
    AdamState, GradNet, LossConfig, TaylorPair, TrainOpt, Variant, DEFAULT_HIDDEN,
};
use crate::trust_region::{
    classify_convergence, fit_value_normalizer, EventKind, MapKind, TrustRegion, ValueNormalizer,
};

/// Exploration and pair-batch sizes from the problem dimension:
/// `n_s = 8·⌈√N⌉`, `n_p = 2000·⌈√N⌉`.
pub fn adaptive_sizes(dim: usize) -> (usize, usize) {
    let root = (dim as f64).sqrt().ceil() as usize;
    (8 * root, 2000 * root)
}

/// Replay-buffer capacity rule: `20000·⌈√N⌉` entries, oldest evicted first.
pub fn buffer_capacity(dim: usize) -> usize {
    20_000 * (dim as f64).sqrt().ceil() as usize
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub variant: Variant,
    pub weight_source: WeightSource,
    pub jacobian_attached: bool,
    /// ε₀ = eps0_coeff · √dim, in normalized coordinates.
    pub eps0_coeff: f64,
    /// Multiplicative ε decay per interior trust-region event.
    pub eps_factor: f64,
    pub eps_min: f64,
    /// Trust-region shrink factor γ_α.
    pub tr_shrink: f64,
    /// Descent step size α.
    pub step_size: f64,
    /// Consecutive non-improving iterations that trigger a trust-region event.
    pub n_max: usize,
    pub budget: usize,
    pub net_hidden: Vec<usize>,
    /// Gradient-network learn rate.
    pub learn_rate: f64,
    pub batch_size: usize,
    pub outlier_quantile: f64,
    pub map_kind: MapKind,
    pub start: StartPolicy,
    /// Stop once the best normalized value drops below this.
    pub target_normalized: Option<f64>,
    /// Re-initialize the network at every trust-region change instead of
    /// training incrementally.
    pub reinit_net_on_tr_change: bool,
    pub train_optimizer: TrainOpt,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            variant: Variant::EvoGrad2,
            weight_source: WeightSource::CmaGaussian,
            jacobian_attached: false,
            eps0_coeff: 0.4,
            eps_factor: 0.97,
            eps_min: 1e-4,
            tr_shrink: 0.9,
            step_size: 0.01,
            n_max: 10,
            budget: 150_000,
            net_hidden: DEFAULT_HIDDEN.to_vec(),
            learn_rate: 0.001,
            batch_size: 64,
            outlier_quantile: 0.1,
            map_kind: MapKind::Tanh,
            start: StartPolicy::DomainCenter,
            target_normalized: None,
            reinit_net_on_tr_change: false,
            train_optimizer: TrainOpt::Adam,
        }
    }
}

impl OptimizerConfig {
    /// Defaults with the weight source matching the variant: evolutionary
    /// weights for the weighted variants, uniform otherwise.
    pub fn preset(variant: Variant) -> Self {
        let weight_source = if variant.weighted() {
            WeightSource::CmaGaussian
        } else {
            WeightSource::Uniform
        };
        Self {
            variant,
            weight_source,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let checks = [
            (self.eps0_coeff > 0.0, "eps0_coeff must be > 0"),
            (
                self.eps_factor > 0.0 && self.eps_factor < 1.0,
                "eps_factor must lie in (0, 1)",
            ),
            (self.eps_min > 0.0, "eps_min must be > 0"),
            (
                self.tr_shrink > 0.0 && self.tr_shrink < 1.0,
                "tr_shrink must lie in (0, 1)",
            ),
            (self.step_size > 0.0, "step_size must be > 0"),
            (self.n_max >= 1, "n_max must be >= 1"),
            (self.budget >= 1, "budget must be >= 1"),
            (self.learn_rate > 0.0, "learn_rate must be > 0"),
            (self.batch_size >= 1, "batch_size must be >= 1"),
            (
                self.outlier_quantile > 0.0 && self.outlier_quantile < 0.5,
                "outlier_quantile must lie in (0, 0.5)",
            ),
        ];
        for (ok, msg) in checks {
            if !ok {
                return Err(Error::Config(msg.into()));
            }
        }
        Ok(())
    }

    /// Label used in records and benchmark tables.
    pub fn algorithm_label(&self) -> String {
        let mut label = self.variant.as_str().to_string();
        if self.variant.second_order() && self.jacobian_attached {
            label.push_str("-attached");
        }
        if self.variant.weighted() {
            if let WeightSource::Softmax { temperature } = self.weight_source {
                label = format!("{}-{temperature}", self.variant.as_str());
            }
        }
        label
    }
}

/// One evaluated sample in normalized coordinates.
#[derive(Debug, Clone)]
pub struct BufferEntry {
    pub x: Vector,
    pub y_raw: f64,
    pub y_norm: f64,
    pub tr_generation: u32,
}

/// Persistent store of every evaluated point, in the coordinates of the
/// current trust region.
#[derive(Debug, Default)]
pub struct ReplayBuffer {
    entries: std::collections::VecDeque<BufferEntry>,
    capacity: usize,
}

impl ReplayBuffer {
    pub fn new(capacity: usize) -> Self {
        Self {
            entries: std::collections::VecDeque::with_capacity(capacity.min(1 << 16)),
            capacity,
        }
    }

    pub fn push(&mut self, entry: BufferEntry) {
        if self.entries.len() == self.capacity {
            self.entries.pop_front();
        }
        self.entries.push_back(entry);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn as_slice(&mut self) -> &[BufferEntry] {
        self.entries.make_contiguous()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BufferEntry> {
        self.entries.iter()
    }

    /// Re-express all entries in a new trust-region frame, evicting points
    /// that fall outside its invertible image.
    pub fn remap(&mut self, old: &TrustRegion, new: &TrustRegion) -> usize {
        let before = self.entries.len();
        let mut kept = std::collections::VecDeque::with_capacity(before);
        for mut e in self.entries.drain(..) {
            let search = old.to_search(&e.x);
            if let Ok(u) = new.from_search(&search) {
                if u.iter().all(|v| v.is_finite()) {
                    e.x = u;
                    e.tr_generation = new.generation();
                    kept.push_back(e);
                }
            }
        }
        self.entries = kept;
        before - self.entries.len()
    }

    pub fn refresh_norms(&mut self, normalizer: &ValueNormalizer) {
        for e in self.entries.iter_mut() {
            e.y_norm = normalizer.apply(e.y_raw);
        }
    }

    /// The `k` best entries by raw objective value.
    pub fn elites(&mut self, k: usize) -> Vec<(Vector, f64)> {
        let entries = self.entries.make_contiguous();
        let k = k.min(entries.len());
        if k == 0 {
            return Vec::new();
        }
        let mut idx: Vec<usize> = (0..entries.len()).collect();
        idx.select_nth_unstable_by(k - 1, |&a, &b| {
            entries[a].y_raw.partial_cmp(&entries[b].y_raw).unwrap()
        });
        idx[..k]
            .iter()
            .map(|&i| (entries[i].x.clone(), entries[i].y_raw))
            .collect()
    }
}

/// Up to `n_p` oriented pairs at distance ≤ ε, drawn uniformly from the
/// admissible set without materializing it.
///
/// Plain rejection sampling over index pairs covers the dense regime; when
/// acceptance is too low the sampler switches to windows over a random 1-D
/// projection, which proposes only spatially plausible partners.
pub fn sample_pair_indices<T>(
    items: &[T],
    point_of: impl Fn(&T) -> &Vector,
    eps: f64,
    n_p: usize,
    rng: &mut Rng,
) -> Vec<(usize, usize)> {
    let n = items.len();
    let mut picked = Vec::with_capacity(n_p.min(1 << 20));
    if n < 2 || n_p == 0 {
        return picked;
    }
    let eps_sq = eps * eps;
    let proposal_budget = 64 * n_p;
    let dist_sq = |i: usize, j: usize| {
        let a = point_of(&items[i]);
        let b = point_of(&items[j]);
        let mut acc = 0.0;
        for k in 0..a.len() {
            let d = a[k] - b[k];
            acc += d * d;
        }
        acc
    };

    let mut attempts = 0usize;
    while picked.len() < n_p && attempts < proposal_budget {
        attempts += 1;
        let i = rng.index(n);
        let j = rng.index(n);
        if i == j {
            continue;
        }
        if dist_sq(i, j) <= eps_sq {
            picked.push((i, j));
        }
    }
    if picked.len() >= n_p {
        return picked;
    }

    // Sparse regime: sort along a random direction; admissible partners of a
    // point lie inside its ±ε projection window.
    let dim = point_of(&items[0]).len();
    let mut dir = rng.standard_normal_vector(dim);
    let dn = dir.norm();
    if dn > 0.0 {
        dir /= dn;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let proj: Vec<f64> = items.iter().map(|p| point_of(p).dot(&dir)).collect();
    order.sort_by(|&a, &b| proj[a].partial_cmp(&proj[b]).unwrap());
    let sorted_proj: Vec<f64> = order.iter().map(|&i| proj[i]).collect();

    // Window bounds by two-pointer sweep.
    let mut lo = vec![0usize; n];
    let mut hi = vec![0usize; n];
    let mut l = 0;
    let mut h = 0;
    for k in 0..n {
        while sorted_proj[k] - sorted_proj[l] > eps {
            l += 1;
        }
        if h < k + 1 {
            h = k + 1;
        }
        while h < n && sorted_proj[h] - sorted_proj[k] <= eps {
            h += 1;
        }
        lo[k] = l;
        hi[k] = h;
    }

    let mut attempts = 0usize;
    while picked.len() < n_p && attempts < proposal_budget {
        attempts += 1;
        let k = rng.index(n);
        let width = hi[k] - lo[k];
        if width < 2 {
            continue;
        }
        let q = lo[k] + rng.index(width);
        if q == k {
            continue;
        }
        let (i, j) = (order[k], order[q]);
        if dist_sq(i, j) <= eps_sq {
            picked.push((i, j));
        }
    }
    picked
}

/// Pair dataset from the replay buffer, with importance weights attached via
/// the configured weight map (normalized over the drawn batch, floored).
/// Returns the pairs and whether the weight map fell back to uniform.
pub fn build_pairs(
    buffer: &mut ReplayBuffer,
    eps: f64,
    n_p: usize,
    rng: &mut Rng,
    source: &WeightSource,
    cma: Option<&CmaState>,
) -> (Vec<TaylorPair>, bool) {
    let entries = buffer.as_slice();
    let indices = sample_pair_indices(entries, |e| &e.x, eps, n_p, rng);
    if indices.is_empty() {
        return (Vec::new(), false);
    }

    let probe_points: Vec<&Vector> = indices.iter().map(|(_, j)| &entries[*j].x).collect();
    let probe_fitness: Vec<f64> = indices.iter().map(|(_, j)| entries[*j].y_raw).collect();
    let outcome = weights_for(source, cma, &probe_points, &probe_fitness);

    let pairs = indices
        .iter()
        .zip(&outcome.weights)
        .map(|(&(i, j), &weight)| TaylorPair {
            anchor: entries[i].x.clone(),
            probe: entries[j].x.clone(),
            y_anchor: entries[i].y_norm,
            y_probe: entries[j].y_norm,
            weight,
        })
        .collect();
    (pairs, outcome.used_fallback)
}

/// Outcome of one driver step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Continued,
    Finished,
}

/// The state machine of a single optimization run. [`run`] drives it to
/// completion; tests can step it and inspect the internals.
pub struct Run<'a> {
    problem: &'a Problem,
    cfg: OptimizerConfig,
    seed: u64,
    rng: Rng,
    tr: TrustRegion,
    meter: BudgetMeter,
    buffer: ReplayBuffer,
    normalizer: Option<ValueNormalizer>,
    fitted_at_len: usize,
    cma: CmaState,
    net: GradNet,
    adam: AdamState,
    loss_cfg: LossConfig,
    x_k: Vector,
    f_best: f64,
    x_best_search: Vector,
    eps: f64,
    n_s: usize,
    n_p: usize,
    no_improve: usize,
    movement: f64,
    improved_this_iter: bool,
    trajectory: Vec<TrajectoryPoint>,
    tr_events: Vec<TrEventRow>,
    errors: Vec<String>,
    stopped_early: bool,
    done: bool,
}

impl<'a> Run<'a> {
    pub fn new(problem: &'a Problem, cfg: OptimizerConfig, seed: u64) -> Result<Self> {
        cfg.validate()?;
        let dim = problem.dim();
        let mut rng = Rng::new(seed);
        let tr = TrustRegion::covering(problem.bounds(), cfg.map_kind);
        let x0 = start_point(problem, cfg.start, &mut rng);
        let u0 = tr.from_search(&x0).unwrap_or_else(|_| Vector::zeros(dim));
        let (n_s, n_p) = adaptive_sizes(dim);
        let eps = cfg.eps0_coeff * (dim as f64).sqrt();
        let net = GradNet::new(dim, &cfg.net_hidden, &mut rng);
        let adam = AdamState::new(&net, cfg.learn_rate, cfg.train_optimizer);
        let cma = CmaState::new(u0.clone(), eps, CmaParams::standard(dim, n_s.max(2)));
        let loss_cfg = LossConfig {
            variant: cfg.variant,
            jacobian_attached: cfg.jacobian_attached,
            batch_size: cfg.batch_size,
            learn_rate: cfg.learn_rate,
            optimizer: cfg.train_optimizer,
        };
        Ok(Self {
            problem,
            meter: BudgetMeter::new(cfg.budget),
            buffer: ReplayBuffer::new(buffer_capacity(dim)),
            normalizer: None,
            fitted_at_len: 0,
            cma,
            net,
            adam,
            loss_cfg,
            x_k: u0,
            f_best: f64::INFINITY,
            x_best_search: x0,
            eps,
            n_s,
            n_p,
            no_improve: 0,
            movement: 0.0,
            improved_this_iter: false,
            trajectory: Vec::new(),
            tr_events: Vec::new(),
            errors: Vec::new(),
            stopped_early: false,
            done: false,
            cfg,
            seed,
            rng,
            tr,
        })
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn sizes(&self) -> (usize, usize) {
        (self.n_s, self.n_p)
    }

    pub fn meter(&self) -> &BudgetMeter {
        &self.meter
    }

    pub fn trust_region(&self) -> &TrustRegion {
        &self.tr
    }

    pub fn f_best(&self) -> f64 {
        self.f_best
    }

    pub fn incumbent(&self) -> &Vector {
        &self.x_k
    }

    pub fn buffer_len(&self) -> usize {
        self.buffer.len()
    }

    pub fn no_improve(&self) -> usize {
        self.no_improve
    }

    pub fn movement(&self) -> f64 {
        self.movement
    }

    /// Replace the surrogate, e.g. with a hand-set gradient field.
    pub fn set_surrogate(&mut self, net: GradNet) {
        self.adam = AdamState::new(&net, self.cfg.learn_rate, self.cfg.train_optimizer);
        self.net = net;
    }

    fn note_value(&mut self, x_search: &Vector, f: f64) {
        if f < self.f_best {
            self.f_best = f;
            self.x_best_search = x_search.clone();
            self.improved_this_iter = true;
        }
    }

    fn push_trajectory(&mut self) {
        let norm = if self.f_best.is_finite() {
            self.problem.normalized(self.f_best).value
        } else {
            1.0
        };
        self.trajectory.push(TrajectoryPoint {
            evals: self.meter.used(),
            f_best: self.f_best,
            f_best_normalized: norm,
        });
    }

    fn target_reached(&self) -> bool {
        match self.cfg.target_normalized {
            Some(t) => {
                self.f_best.is_finite() && self.problem.normalized(self.f_best).value < t
            }
            None => false,
        }
    }

    /// Sample `n_s` points from the ε-ball around the incumbent, evaluate
    /// them, and feed buffer + CMA. Returns the evaluated batch size.
    pub fn explore(&mut self) -> usize {
        let mut batch: Vec<(Vector, f64)> = Vec::with_capacity(self.n_s);
        for _ in 0..self.n_s {
            let u = match sample_ball(&self.x_k, self.eps, &mut self.rng) {
                Ok(u) => u,
                Err(e) => {
                    self.errors.push(format!("ball sampling failed: {e}"));
                    break;
                }
            };
            let x = self.tr.to_search(&u);
            match evaluate_metered(self.problem, &mut self.meter, &x) {
                Ok(f) => {
                    self.note_value(&x, f);
                    self.buffer.push(BufferEntry {
                        x: u.clone(),
                        y_raw: f,
                        y_norm: 0.0,
                        tr_generation: self.tr.generation(),
                    });
                    batch.push((u, f));
                }
                Err(_) => {
                    self.done = true;
                    break;
                }
            }
        }
        self.push_trajectory();
        let evaluated = batch.len();
        if evaluated >= 2 {
            // The replay buffer trains the CMA statistics too: mixing the
            // buffer's elites into the generation keeps the distribution
            // anchored on the best region found so far, which is what makes
            // the density a useful importance weight.
            batch.extend(self.buffer.elites(evaluated));
            self.cma = cma_update(&self.cma, &batch);
        }
        evaluated
    }

    fn refit_normalizer(&mut self, force: bool) {
        let len = self.buffer.len();
        if len < 2 {
            return;
        }
        let due = force
            || self.normalizer.is_none()
            || len >= self.fitted_at_len + self.fitted_at_len / 4 + 1;
        if !due {
            return;
        }
        let ys: Vec<f64> = self.buffer.iter().map(|e| e.y_raw).collect();
        match fit_value_normalizer(&ys, self.cfg.outlier_quantile) {
            Ok(vn) => {
                self.buffer.refresh_norms(&vn);
                self.normalizer = Some(vn);
                self.fitted_at_len = len;
            }
            Err(e) => self.errors.push(format!("value normalizer refit failed: {e}")),
        }
    }

    /// Build the weighted pair dataset for this iteration.
    pub fn pairs(&mut self) -> Vec<TaylorPair> {
        let cma = match self.cfg.weight_source {
            WeightSource::CmaGaussian => Some(&self.cma),
            _ => None,
        };
        let (pairs, fell_back) = build_pairs(
            &mut self.buffer,
            self.eps,
            self.n_p,
            &mut self.rng,
            &self.cfg.weight_source,
            cma,
        );
        if fell_back {
            self.errors
                .push(format!("degenerate covariance at eval {}; uniform weights", self.meter.used()));
        }
        pairs
    }

    /// One training epoch over the pair set; recoverable failures are logged.
    pub fn train(&mut self, pairs: &[TaylorPair]) {
        if pairs.is_empty() {
            return;
        }
        match crate::surrogate::train_epoch_steps(
            &mut self.net,
            pairs,
            &self.loss_cfg,
            &mut self.adam,
            &mut self.rng,
        ) {
            Ok(()) => {}
            Err(e) => self.errors.push(format!("epoch aborted: {e}")),
        }
    }

    /// One descent step `x ← x - α·g(x)`, evaluated through the meter.
    pub fn descent_step(&mut self) -> StepOutcome {
        let g = self.net.forward(&self.x_k);
        let x_next = &self.x_k - &g * self.cfg.step_size;
        let search = self.tr.to_search(&x_next);
        let f = match evaluate_metered(self.problem, &mut self.meter, &search) {
            Ok(f) => f,
            Err(_) => {
                self.done = true;
                return StepOutcome::Finished;
            }
        };
        self.note_value(&search, f);
        self.buffer.push(BufferEntry {
            x: x_next.clone(),
            y_raw: f,
            y_norm: self.normalizer.as_ref().map_or(0.0, |vn| vn.apply(f)),
            tr_generation: self.tr.generation(),
        });
        self.movement += (&x_next - &self.x_k).norm();
        self.x_k = x_next;
        StepOutcome::Continued
    }

    /// Trust-region lifecycle once the stall counter reaches `n_max`:
    /// boundary events shift the center, interior events shrink and decay ε.
    pub fn handle_convergence(&mut self) {
        let event = classify_convergence(self.movement, self.problem.dim());
        let old_tr = self.tr.clone();
        let kind_label = match event.kind {
            EventKind::Interior => "interior",
            EventKind::Boundary => "boundary",
        };
        self.tr = match event.kind {
            EventKind::Interior => {
                self.eps = (self.eps * self.cfg.eps_factor).max(self.cfg.eps_min);
                old_tr.shrink_to(&self.x_best_search, self.cfg.tr_shrink)
            }
            EventKind::Boundary => old_tr.shift_to(&self.x_best_search),
        };
        self.buffer.remap(&old_tr, &self.tr);
        self.refit_normalizer(true);

        self.x_k = self
            .tr
            .from_search(&self.x_best_search)
            .unwrap_or_else(|_| Vector::zeros(self.problem.dim()));
        self.cma = CmaState::new(
            self.x_k.clone(),
            self.eps,
            CmaParams::standard(self.problem.dim(), self.n_s.max(2)),
        );
        if self.cfg.reinit_net_on_tr_change {
            let net = GradNet::new(self.problem.dim(), &self.cfg.net_hidden, &mut self.rng);
            self.set_surrogate(net);
        }
        self.tr_events.push(TrEventRow {
            generation: self.tr.generation(),
            kind: kind_label.into(),
            evals: self.meter.used(),
            center: self.tr.center().iter().cloned().collect(),
            scale: self.tr.scale().iter().cloned().collect(),
        });
        self.no_improve = 0;
        self.movement = 0.0;
    }

    /// One full iteration of the main loop.
    pub fn step(&mut self) -> StepOutcome {
        if self.done {
            return StepOutcome::Finished;
        }
        self.improved_this_iter = false;

        self.explore();
        if self.done || self.target_reached() {
            self.stopped_early = !self.done && self.target_reached();
            self.done = true;
            return StepOutcome::Finished;
        }

        self.refit_normalizer(false);

        let pairs = self.pairs();
        if !pairs.is_empty() {
            self.train(&pairs);
            if self.descent_step() == StepOutcome::Finished {
                return StepOutcome::Finished;
            }
            if self.target_reached() {
                self.stopped_early = true;
                self.done = true;
                return StepOutcome::Finished;
            }
        }

        if self.improved_this_iter {
            self.no_improve = 0;
        } else {
            self.no_improve += 1;
        }
        if self.no_improve >= self.cfg.n_max {
            self.handle_convergence();
        }
        StepOutcome::Continued
    }

    pub fn finish(mut self) -> RunRecord {
        if self
            .trajectory
            .last()
            .map_or(true, |p| p.evals != self.meter.used())
        {
            self.push_trajectory();
        }
        let (f_best, norm, solved) = if self.f_best.is_finite() {
            let n = self.problem.normalized(self.f_best);
            (self.f_best, n.value, n.solved())
        } else {
            (f64::INFINITY, 1.0, false)
        };
        RunRecord {
            algorithm: self.cfg.algorithm_label(),
            problem: self.problem.name().into(),
            dim: self.problem.dim(),
            config_hash: config_hash(&self.cfg),
            seed: self.seed,
            budget: self.cfg.budget,
            evals_used: self.meter.used(),
            y_min: self.problem.y_min(),
            y_max: self.problem.y_max(),
            f_best,
            f_best_normalized: norm,
            solved,
            x_best: self.x_best_search.iter().cloned().collect(),
            stopped_early: self.stopped_early,
            trajectory: self.trajectory,
            tr_events: self.tr_events,
            errors: self.errors,
        }
    }
}

/// Execute a full run. `(problem, config, seed)` determines the record.
pub fn run(problem: &Problem, cfg: &OptimizerConfig, seed: u64) -> Result<RunRecord> {
    let mut driver = Run::new(problem, cfg.clone(), seed)?;
    while driver.step() == StepOutcome::Continued {}
    Ok(driver.finish())
}
