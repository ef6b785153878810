//! Derivative-free optimization by learned gradients.
//!
//! The optimizers in this crate train a small network to predict descent
//! directions from objective samples alone. Four variants share one loop:
//!
//! * `egl` — first-order Taylor-residual gradient learning,
//! * `evograd` — the same residual, importance-weighted by an evolving
//!   CMA-ES Gaussian so the learned gradient leans toward globally promising
//!   regions,
//! * `hgrad` — a second-order residual that uses the network's Jacobian as a
//!   Hessian estimate, shrinking the gradient error from O(ε) to O(ε²),
//! * `evograd2` — evolutionary weights on the second-order residual.
//!
//! Everything runs inside a trust region with normalized coordinates and
//! values, and every objective evaluation passes through a budget meter.
//! A CMA-ES implementation doubles as the weight source and as the `cma` /
//! `cma-tr` baselines.

pub mod error;
pub mod evo;
pub mod numerics;
pub mod objectives;
pub mod optimizer;
pub mod record;
pub mod surrogate;
pub mod trust_region;

pub use error::{Error, Result};
pub use evo::{
    cma_run, cma_tr_run, cma_update, weights_for, CmaParams, CmaState, StartPolicy, WeightSource,
};
pub use numerics::{
    cholesky, gaussian_log_density, repair_covariance, sample_ball, Matrix, Rng, Vector,
};
pub use objectives::{
    evaluate_metered, make_suite, normalized_value, suite_manifest, BudgetMeter, NormalizedScore,
    Problem, SOLVED_THRESHOLD,
};
pub use optimizer::{adaptive_sizes, build_pairs, run, OptimizerConfig, ReplayBuffer, Run};
pub use record::{config_hash, RunRecord, TrEventRow, TrajectoryPoint};
pub use surrogate::{
    batch_loss, residual, train_epoch, AdamState, GradNet, LossConfig, TaylorPair, TrainOpt,
    Variant,
};
pub use trust_region::{
    classify_convergence, fit_value_normalizer, ConvergenceEvent, EventKind, MapKind, TrustRegion,
    ValueNormalizer,
};
