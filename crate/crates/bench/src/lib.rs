//! Benchmark harness: runs algorithm × problem × seed grids, aggregates the
//! evaluation metrics, runs significance tests, and emits tables plus plot
//! data.
//!
//! Every grid cell is written to its own record file as soon as it finishes,
//! so an interrupted suite resumes by skipping completed cells, and parallel
//! workers never contend on shared state.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use evograd::{
    cma_run, cma_tr_run, run, suite_manifest, MapKind, OptimizerConfig, Problem, RunRecord,
    StartPolicy, Variant, WeightSource, SOLVED_THRESHOLD,
};

pub const KNOWN_ALGORITHMS: [&str; 8] = [
    "egl",
    "evograd",
    "evograd-0.1",
    "hgrad",
    "hgrad-attached",
    "evograd2",
    "cma",
    "cma-tr",
];

pub const DESK_DIMS: [usize; 4] = [2, 5, 10, 20];

/// Budget rule for the desk-scale suite: `50·dim·√dim`, capped at the full
/// budget of 150k evaluations.
pub fn desk_budget(dim: usize) -> usize {
    ((50.0 * dim as f64 * (dim as f64).sqrt()) as usize).min(150_000)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProblemRef {
    pub name: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SuiteSpec {
    pub problems: Vec<ProblemRef>,
    pub algorithms: Vec<String>,
    pub seeds: Vec<u64>,
    /// Evaluations per cell; `None` applies the desk-budget rule per dim.
    pub budget: Option<usize>,
    pub start: StartPolicy,
}

impl SuiteSpec {
    /// Default desk-scale grid: the full function set at dims {2, 5, 10, 20},
    /// ten seeds, desk budgets, random starts.
    pub fn desk() -> Self {
        let mut problems = Vec::new();
        for &dim in &DESK_DIMS {
            for name in evograd::objectives::FUNCTION_NAMES {
                problems.push(ProblemRef {
                    name: name.to_string(),
                    dim,
                });
            }
        }
        Self {
            problems,
            algorithms: KNOWN_ALGORITHMS.iter().map(|s| s.to_string()).collect(),
            seeds: (0..10).collect(),
            budget: None,
            start: StartPolicy::RandomUniform,
        }
    }

    pub fn from_json(json: &str) -> Result<Self> {
        Ok(serde_json::from_str(json)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("spec serializes")
    }

    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() || self.algorithms.is_empty() || self.seeds.is_empty() {
            bail!("suite spec needs problems, algorithms and seeds");
        }
        for p in &self.problems {
            Problem::by_name(&p.name, p.dim)
                .with_context(|| format!("problem {}-{}", p.name, p.dim))?;
        }
        for a in &self.algorithms {
            if algorithm_by_name(a).is_none() {
                bail!("unknown algorithm '{a}'; known: {KNOWN_ALGORITHMS:?}");
            }
        }
        Ok(())
    }

    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for p in &self.problems {
            for a in &self.algorithms {
                for &seed in &self.seeds {
                    cells.push(Cell {
                        problem: p.clone(),
                        algorithm: a.clone(),
                        seed,
                        budget: self.budget.unwrap_or_else(|| desk_budget(p.dim)),
                        start: self.start,
                    });
                }
            }
        }
        cells
    }
}

#[derive(Debug, Clone)]
pub struct Cell {
    pub problem: ProblemRef,
    pub algorithm: String,
    pub seed: u64,
    pub budget: usize,
    pub start: StartPolicy,
}

impl Cell {
    pub fn filename(&self) -> String {
        format!(
            "{}__{}_{}__seed{}.json",
            self.algorithm, self.problem.name, self.problem.dim, self.seed
        )
    }
}

#[derive(Debug, Clone)]
pub enum AlgorithmKind {
    Gradient(OptimizerConfig),
    Cma { map: MapKind },
    CmaTr { map: MapKind, gamma: f64 },
}

/// Named algorithm presets: the four gradient-learning variants, the two
/// ablations, and the evolutionary baselines.
pub fn algorithm_by_name(name: &str) -> Option<AlgorithmKind> {
    let kind = match name {
        "egl" => AlgorithmKind::Gradient(OptimizerConfig::preset(Variant::Egl)),
        "evograd" => AlgorithmKind::Gradient(OptimizerConfig::preset(Variant::EvoGrad)),
        "evograd-0.1" => {
            let mut cfg = OptimizerConfig::preset(Variant::EvoGrad);
            cfg.weight_source = WeightSource::Softmax { temperature: 0.1 };
            AlgorithmKind::Gradient(cfg)
        }
        "hgrad" => AlgorithmKind::Gradient(OptimizerConfig::preset(Variant::HGrad)),
        "hgrad-attached" => {
            let mut cfg = OptimizerConfig::preset(Variant::HGrad);
            cfg.jacobian_attached = true;
            AlgorithmKind::Gradient(cfg)
        }
        "evograd2" => AlgorithmKind::Gradient(OptimizerConfig::preset(Variant::EvoGrad2)),
        "cma" => AlgorithmKind::Cma {
            map: MapKind::Linear,
        },
        "cma-tr" => AlgorithmKind::CmaTr {
            map: MapKind::Linear,
            gamma: 0.9,
        },
        _ => return None,
    };
    Some(kind)
}

/// Run one grid cell to completion.
pub fn run_cell(cell: &Cell) -> Result<RunRecord> {
    let problem = Problem::by_name(&cell.problem.name, cell.problem.dim)?;
    let kind = algorithm_by_name(&cell.algorithm)
        .with_context(|| format!("unknown algorithm '{}'", cell.algorithm))?;
    let record = match kind {
        AlgorithmKind::Gradient(mut cfg) => {
            cfg.budget = cell.budget;
            cfg.start = cell.start;
            run(&problem, &cfg, cell.seed)?
        }
        AlgorithmKind::Cma { map } => cma_run(&problem, cell.budget, map, cell.seed, cell.start),
        AlgorithmKind::CmaTr { map, gamma } => {
            cma_tr_run(&problem, cell.budget, map, gamma, cell.seed, cell.start)
        }
    };
    Ok(record)
}

#[derive(Debug)]
pub struct SuiteOutcome {
    pub records: Vec<RunRecord>,
    pub executed: usize,
    pub skipped: usize,
    pub failures: Vec<String>,
}

fn write_atomic(path: &Path, content: &str) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, content)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

/// Execute every cell of the spec, in parallel, writing one record file per
/// cell. Cells whose record file already parses are skipped when `resume` is
/// set, so interrupted suites pick up where they stopped.
pub fn run_suite(spec: &SuiteSpec, out_dir: &Path, jobs: usize, resume: bool) -> Result<SuiteOutcome> {
    spec.validate()?;
    let records_dir = out_dir.join("records");
    fs::create_dir_all(&records_dir)?;

    write_atomic(&out_dir.join("spec.json"), &spec.to_json())?;
    let problems: Result<Vec<Problem>> = spec
        .problems
        .iter()
        .map(|p| Ok(Problem::by_name(&p.name, p.dim)?))
        .collect();
    let manifest = serde_json::to_string_pretty(&suite_manifest(&problems?))?;
    write_atomic(&out_dir.join("manifest.json"), &manifest)?;

    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs)
        .build()
        .context("building worker pool")?;

    use rayon::prelude::*;
    let results: Vec<(Option<RunRecord>, bool, Option<String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let path = records_dir.join(cell.filename());
                if resume {
                    if let Ok(existing) = fs::read_to_string(&path) {
                        if let Ok(record) = RunRecord::from_json(&existing) {
                            return (Some(record), true, None);
                        }
                    }
                }
                match run_cell(cell) {
                    Ok(record) => match write_atomic(&path, &record.to_json()) {
                        Ok(()) => (Some(record), false, None),
                        Err(e) => (None, false, Some(format!("{}: {e}", cell.filename()))),
                    },
                    Err(e) => (None, false, Some(format!("{}: {e}", cell.filename()))),
                }
            })
            .collect()
    });

    let mut outcome = SuiteOutcome {
        records: Vec::with_capacity(results.len()),
        executed: 0,
        skipped: 0,
        failures: Vec::new(),
    };
    for (record, skipped, failure) in results {
        match record {
            Some(r) => {
                if skipped {
                    outcome.skipped += 1;
                } else {
                    outcome.executed += 1;
                }
                outcome.records.push(r);
            }
            None => outcome.failures.extend(failure),
        }
    }
    Ok(outcome)
}

/// Load every record file below `dir`, sorted by filename.
pub fn load_records(dir: &Path) -> Result<Vec<RunRecord>> {
    let records_dir = if dir.join("records").is_dir() {
        dir.join("records")
    } else {
        dir.to_path_buf()
    };
    let mut paths: Vec<PathBuf> = fs::read_dir(&records_dir)
        .with_context(|| format!("reading {}", records_dir.display()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|e| e == "json"))
        .collect();
    paths.sort();
    let mut records = Vec::with_capacity(paths.len());
    for path in paths {
        let json = fs::read_to_string(&path)?;
        records.push(
            RunRecord::from_json(&json)
                .with_context(|| format!("parsing {}", path.display()))?,
        );
    }
    Ok(records)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub algorithm: String,
    pub cells: usize,
    pub solved_fraction: f64,
    /// Mean evaluations at the first crossing below the solved threshold,
    /// over solved cells only. Absent when nothing solved.
    pub budget_to_solve: Option<f64>,
    pub unsolved_cells: usize,
    pub mean_norm: f64,
    pub std_norm: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsTable {
    pub rows: Vec<MetricsRow>,
}

impl MetricsTable {
    pub fn row(&self, algorithm: &str) -> Option<&MetricsRow> {
        self.rows.iter().find(|r| r.algorithm == algorithm)
    }
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn population_std(xs: &[f64], mu: f64) -> f64 {
    (xs.iter().map(|x| (x - mu) * (x - mu)).sum::<f64>() / xs.len() as f64).sqrt()
}

/// Fraction of records whose final normalized value lies below `threshold`.
/// The solved-fraction metric and the success-rate curves share this.
pub fn fraction_below(records: &[&RunRecord], threshold: f64) -> f64 {
    if records.is_empty() {
        return 0.0;
    }
    records
        .iter()
        .filter(|r| r.f_best_normalized < threshold)
        .count() as f64
        / records.len() as f64
}

fn by_algorithm(records: &[RunRecord]) -> BTreeMap<&str, Vec<&RunRecord>> {
    let mut map: BTreeMap<&str, Vec<&RunRecord>> = BTreeMap::new();
    for r in records {
        map.entry(r.algorithm.as_str()).or_default().push(r);
    }
    map
}

/// Per-algorithm metrics: solved fraction, budget-to-solve over solved cells,
/// and the mean/std of final normalized values.
pub fn aggregate(records: &[RunRecord]) -> Result<MetricsTable> {
    if records.is_empty() {
        bail!("no records to aggregate");
    }
    let mut rows = Vec::new();
    for (algorithm, group) in by_algorithm(records) {
        let finals: Vec<f64> = group.iter().map(|r| r.f_best_normalized).collect();
        let crossings: Vec<f64> = group
            .iter()
            .filter_map(|r| r.first_crossing(SOLVED_THRESHOLD))
            .map(|e| e as f64)
            .collect();
        let mu = mean(&finals);
        rows.push(MetricsRow {
            algorithm: algorithm.to_string(),
            cells: group.len(),
            solved_fraction: fraction_below(&group, SOLVED_THRESHOLD),
            budget_to_solve: if crossings.is_empty() {
                None
            } else {
                Some(mean(&crossings))
            },
            unsolved_cells: group.len() - crossings.len(),
            mean_norm: mu,
            std_norm: population_std(&finals, mu),
        });
    }
    Ok(MetricsTable { rows })
}

/// Two-sided Welch (unequal-variance) t-test p-value.
pub fn welch_t_test(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() < 2 || b.len() < 2 {
        bail!("welch test needs at least two samples per side");
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (ma, mb) = (mean(a), mean(b));
    let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / (na - 1.0);
    let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / (nb - 1.0);
    let se2 = va / na + vb / nb;
    if se2 == 0.0 {
        return Ok(if ma == mb { 1.0 } else { 0.0 });
    }
    let t = (ma - mb) / se2.sqrt();
    let df = se2 * se2
        / ((va / na) * (va / na) / (na - 1.0) + (vb / nb) * (vb / nb) / (nb - 1.0));
    let dist = StudentsT::new(0.0, 1.0, df).context("degrees of freedom")?;
    Ok((2.0 * (1.0 - dist.cdf(t.abs()))).clamp(0.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EmitFormat {
    Csv,
    Json,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceRow {
    pub algorithm: String,
    pub evals: usize,
    pub q25: f64,
    pub median: f64,
    pub q75: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuccessRateRow {
    pub algorithm: String,
    pub threshold: f64,
    pub fraction: f64,
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    if n == 1 {
        return sorted[0];
    }
    let pos = q * (n - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (pos - lo as f64) * (sorted[hi] - sorted[lo])
}

/// Normalized best value of one record after `evals` evaluations
/// (step interpolation; before the first sample, the first sample's value).
fn value_at(record: &RunRecord, evals: usize) -> f64 {
    let mut current = record
        .trajectory
        .first()
        .map(|p| p.f_best_normalized)
        .unwrap_or(1.0);
    for p in &record.trajectory {
        if p.evals <= evals {
            current = p.f_best_normalized;
        } else {
            break;
        }
    }
    current
}

/// Per-algorithm convergence curves: quartiles of the normalized best value
/// on a shared evaluation grid.
pub fn convergence_curves(records: &[RunRecord], points: usize) -> Vec<ConvergenceRow> {
    let max_evals = records.iter().map(|r| r.evals_used).max().unwrap_or(0);
    let mut rows = Vec::new();
    for (algorithm, group) in by_algorithm(records) {
        for k in 1..=points {
            let evals = (max_evals * k).div_euclid(points).max(1);
            let mut values: Vec<f64> = group.iter().map(|r| value_at(r, evals)).collect();
            values.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            rows.push(ConvergenceRow {
                algorithm: algorithm.to_string(),
                evals,
                q25: quantile(&values, 0.25),
                median: quantile(&values, 0.5),
                q75: quantile(&values, 0.75),
            });
        }
    }
    rows
}

/// Log-spaced thresholds over `[1e-3, 1]` with the solved threshold included
/// exactly, so the curve and the solved-fraction metric agree bit-for-bit.
pub fn success_thresholds() -> Vec<f64> {
    let mut ts: Vec<f64> = (0..=30).map(|k| 10f64.powf(-3.0 + k as f64 * 0.1)).collect();
    ts.push(SOLVED_THRESHOLD);
    ts.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
    ts.dedup();
    ts
}

pub fn success_rate_curves(records: &[RunRecord]) -> Vec<SuccessRateRow> {
    let mut rows = Vec::new();
    for (algorithm, group) in by_algorithm(records) {
        for &threshold in &success_thresholds() {
            rows.push(SuccessRateRow {
                algorithm: algorithm.to_string(),
                threshold,
                fraction: fraction_below(&group, threshold),
            });
        }
    }
    rows
}

fn csv_string<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut writer = csv::Writer::from_writer(Vec::new());
    for row in rows {
        writer.serialize(row)?;
    }
    Ok(String::from_utf8(writer.into_inner()?)?)
}

/// Write the metrics table, convergence curves, and success-rate curves.
/// All contents are materialized before anything is written, and files land
/// via rename, so a failing path leaves no partial outputs.
pub fn emit(
    records: &[RunRecord],
    table: &MetricsTable,
    format: EmitFormat,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if records.is_empty() {
        bail!("refusing to emit outputs for an empty record set");
    }
    let curves = convergence_curves(records, 100);
    let rates = success_rate_curves(records);

    let files: Vec<(&str, String)> = match format {
        EmitFormat::Csv => vec![
            ("metrics.csv", csv_string(&table.rows)?),
            ("convergence.csv", csv_string(&curves)?),
            ("success_rate.csv", csv_string(&rates)?),
        ],
        EmitFormat::Json => vec![
            ("metrics.json", serde_json::to_string_pretty(&table.rows)?),
            ("convergence.json", serde_json::to_string_pretty(&curves)?),
            ("success_rate.json", serde_json::to_string_pretty(&rates)?),
        ],
    };

    fs::create_dir_all(out_dir)?;
    let mut staged = Vec::new();
    for (name, content) in &files {
        let tmp = out_dir.join(format!("{name}.tmp"));
        if let Err(e) = fs::write(&tmp, content) {
            for (t, _) in &staged {
                let _ = fs::remove_file(t);
            }
            return Err(e).with_context(|| format!("writing {name}"));
        }
        staged.push((tmp, out_dir.join(name)));
    }
    let mut written = Vec::new();
    for (tmp, dest) in staged {
        fs::rename(&tmp, &dest)?;
        written.push(dest);
    }
    Ok(written)
}

pub const SWEEPABLE_PARAMS: [&str; 9] = [
    "eps0_coeff",
    "eps_factor",
    "eps_min",
    "tr_shrink",
    "step_size",
    "learn_rate",
    "outlier_quantile",
    "n_max",
    "batch_size",
];

/// Set one hyperparameter by name on a gradient config.
pub fn apply_param(cfg: &mut OptimizerConfig, param: &str, value: f64) -> Result<()> {
    match param {
        "eps0_coeff" => cfg.eps0_coeff = value,
        "eps_factor" => cfg.eps_factor = value,
        "eps_min" => cfg.eps_min = value,
        "tr_shrink" => cfg.tr_shrink = value,
        "step_size" => cfg.step_size = value,
        "learn_rate" => cfg.learn_rate = value,
        "outlier_quantile" => cfg.outlier_quantile = value,
        "n_max" => cfg.n_max = value as usize,
        "batch_size" => cfg.batch_size = value as usize,
        other => bail!("unknown hyperparameter '{other}'; valid: {SWEEPABLE_PARAMS:?}"),
    }
    cfg.validate()?;
    Ok(())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub mean_norm: f64,
    pub budget_to_solve: Option<f64>,
    pub solved_fraction: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SweepReport {
    pub algorithm: String,
    pub param: String,
    pub points: Vec<SweepPoint>,
    /// Coefficient of variation σ/μ of the mean normalized error across the
    /// swept values.
    pub cv: f64,
}

pub fn cv_of(values: &[f64]) -> f64 {
    let mu = mean(values);
    if mu == 0.0 {
        return 0.0;
    }
    population_std(values, mu) / mu
}

/// Run the suite once per hyperparameter value and report per-value metrics
/// plus the robustness CV.
pub fn sweep(
    spec: &SuiteSpec,
    algorithm: &str,
    param: &str,
    values: &[f64],
    out_dir: &Path,
    jobs: usize,
) -> Result<SweepReport> {
    let Some(AlgorithmKind::Gradient(base)) = algorithm_by_name(algorithm) else {
        bail!("sweeps need a gradient-learning algorithm, got '{algorithm}'");
    };
    if values.is_empty() {
        bail!("sweep needs at least one value");
    }
    {
        // Fail fast on unknown parameter names.
        let mut probe = base.clone();
        apply_param(&mut probe, param, values[0])?;
    }

    let mut points = Vec::new();
    for &value in values {
        let sub_dir = out_dir.join(format!("{param}_{value}"));
        let mut sub_spec = spec.clone();
        sub_spec.algorithms = vec![algorithm.to_string()];
        let outcome = run_suite_with_config(&sub_spec, &sub_dir, jobs, true, |cfg| {
            apply_param(cfg, param, value)
        })?;
        let table = aggregate(&outcome.records)?;
        let row = table
            .rows
            .first()
            .context("sweep produced no metric rows")?;
        points.push(SweepPoint {
            value,
            mean_norm: row.mean_norm,
            budget_to_solve: row.budget_to_solve,
            solved_fraction: row.solved_fraction,
        });
    }
    let metric: Vec<f64> = points.iter().map(|p| p.mean_norm).collect();
    Ok(SweepReport {
        algorithm: algorithm.to_string(),
        param: param.to_string(),
        points,
        cv: cv_of(&metric),
    })
}

/// `run_suite` with a config hook applied to every gradient cell; the sweep
/// runner uses it to inject the swept value.
pub fn run_suite_with_config(
    spec: &SuiteSpec,
    out_dir: &Path,
    jobs: usize,
    resume: bool,
    tweak: impl Fn(&mut OptimizerConfig) -> Result<()> + Sync,
) -> Result<SuiteOutcome> {
    spec.validate()?;
    let records_dir = out_dir.join("records");
    fs::create_dir_all(&records_dir)?;
    let cells = spec.cells();
    let pool = rayon::ThreadPoolBuilder::new().num_threads(jobs).build()?;

    use rayon::prelude::*;
    let results: Vec<(Option<RunRecord>, bool, Option<String>)> = pool.install(|| {
        cells
            .par_iter()
            .map(|cell| {
                let path = records_dir.join(cell.filename());
                if resume {
                    if let Ok(existing) = fs::read_to_string(&path) {
                        if let Ok(record) = RunRecord::from_json(&existing) {
                            return (Some(record), true, None);
                        }
                    }
                }
                let executed = (|| -> Result<RunRecord> {
                    let problem = Problem::by_name(&cell.problem.name, cell.problem.dim)?;
                    let record = match algorithm_by_name(&cell.algorithm).unwrap() {
                        AlgorithmKind::Gradient(mut cfg) => {
                            cfg.budget = cell.budget;
                            cfg.start = cell.start;
                            tweak(&mut cfg)?;
                            run(&problem, &cfg, cell.seed)?
                        }
                        AlgorithmKind::Cma { map } => {
                            cma_run(&problem, cell.budget, map, cell.seed, cell.start)
                        }
                        AlgorithmKind::CmaTr { map, gamma } => {
                            cma_tr_run(&problem, cell.budget, map, gamma, cell.seed, cell.start)
                        }
                    };
                    write_atomic(&path, &record.to_json())?;
                    Ok(record)
                })();
                match executed {
                    Ok(record) => (Some(record), false, None),
                    Err(e) => (None, false, Some(format!("{}: {e}", cell.filename()))),
                }
            })
            .collect()
    });

    let mut outcome = SuiteOutcome {
        records: Vec::new(),
        executed: 0,
        skipped: 0,
        failures: Vec::new(),
    };
    for (record, skipped, failure) in results {
        match record {
            Some(r) => {
                if skipped {
                    outcome.skipped += 1;
                } else {
                    outcome.executed += 1;
                }
                outcome.records.push(r);
            }
            None => outcome.failures.extend(failure),
        }
    }
    Ok(outcome)
}

#[cfg(test)]
mod tests {
    use super::*;
    use tempfile::TempDir;

    fn tiny_spec() -> SuiteSpec {
        SuiteSpec {
            problems: vec![
                ProblemRef {
                    name: "sphere".into(),
                    dim: 2,
                },
                ProblemRef {
                    name: "rastrigin".into(),
                    dim: 2,
                },
            ],
            algorithms: vec!["cma".into(), "egl".into()],
            seeds: vec![0, 1, 2],
            budget: Some(200),
            start: StartPolicy::RandomUniform,
        }
    }

    #[test]
    fn grid_cardinality() {
        assert_eq!(tiny_spec().cells().len(), 12);
    }

    #[test]
    fn suite_runs_resumes_and_reproduces() {
        let dir = TempDir::new().unwrap();
        let spec = tiny_spec();
        let first = run_suite(&spec, dir.path(), 2, true).unwrap();
        assert_eq!(first.executed, 12);
        assert_eq!(first.skipped, 0);
        assert!(first.failures.is_empty());

        // Resume: nothing re-runs.
        let second = run_suite(&spec, dir.path(), 2, true).unwrap();
        assert_eq!(second.executed, 0);
        assert_eq!(second.skipped, 12);

        // From-scratch rerun in a fresh directory is byte-identical.
        let dir2 = TempDir::new().unwrap();
        run_suite(&spec, dir2.path(), 1, true).unwrap();
        for cell in spec.cells() {
            let a = std::fs::read(dir.path().join("records").join(cell.filename())).unwrap();
            let b = std::fs::read(dir2.path().join("records").join(cell.filename())).unwrap();
            assert_eq!(a, b, "cell {} differs between runs", cell.filename());
        }

        // Loading from disk matches the in-memory records.
        let loaded = load_records(dir.path()).unwrap();
        assert_eq!(loaded.len(), 12);
    }

    #[test]
    fn aggregate_matches_brute_force_recomputation() {
        let dir = TempDir::new().unwrap();
        let outcome = run_suite(&tiny_spec(), dir.path(), 1, true).unwrap();
        let table = aggregate(&outcome.records).unwrap();

        for row in &table.rows {
            let group: Vec<&RunRecord> = outcome
                .records
                .iter()
                .filter(|r| r.algorithm == row.algorithm)
                .collect();
            let solved: Vec<f64> = group
                .iter()
                .filter_map(|r| {
                    r.trajectory
                        .iter()
                        .find(|p| p.f_best_normalized < 0.01)
                        .map(|p| p.evals as f64)
                })
                .collect();
            let expect_fraction =
                group.iter().filter(|r| r.f_best_normalized < 0.01).count() as f64
                    / group.len() as f64;
            assert_eq!(row.solved_fraction, expect_fraction);
            match (row.budget_to_solve, solved.is_empty()) {
                (None, true) => {}
                (Some(b), false) => {
                    let expect = solved.iter().sum::<f64>() / solved.len() as f64;
                    assert!((b - expect).abs() < 1e-12);
                }
                other => panic!("inconsistent budget_to_solve: {other:?}"),
            }
            let finals: Vec<f64> = group.iter().map(|r| r.f_best_normalized).collect();
            let mu = finals.iter().sum::<f64>() / finals.len() as f64;
            assert!((row.mean_norm - mu).abs() < 1e-15);
        }
    }

    #[test]
    fn aggregate_rejects_empty() {
        assert!(aggregate(&[]).is_err());
    }

    #[test]
    fn welch_identical_samples_give_p_one() {
        let a = vec![1.0, 2.0, 3.0, 4.0];
        assert_eq!(welch_t_test(&a, &a).unwrap(), 1.0);
    }

    #[test]
    fn welch_separated_samples_give_tiny_p() {
        let a = vec![0.0; 30];
        let b: Vec<f64> = (0..30).map(|i| 1.0 + 1e-9 * i as f64).collect();
        assert!(welch_t_test(&a, &b).unwrap() < 1e-6);
    }

    // Classic two-sample case cross-checked against a hand-computed Welch
    // statistic: a = {27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1},
    // b = {27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0}.
    #[test]
    fn welch_textbook_case_matches_hand_computation() {
        let a = [27.5, 21.0, 19.0, 23.6, 17.0, 17.9, 16.9, 20.1];
        let b = [27.1, 22.0, 20.8, 23.4, 23.4, 23.5, 25.8, 22.0];
        let ma = a.iter().sum::<f64>() / 8.0;
        let mb = b.iter().sum::<f64>() / 8.0;
        let va = a.iter().map(|x| (x - ma) * (x - ma)).sum::<f64>() / 7.0;
        let vb = b.iter().map(|x| (x - mb) * (x - mb)).sum::<f64>() / 7.0;
        let se2 = va / 8.0 + vb / 8.0;
        let t_hand = (ma - mb) / se2.sqrt();
        let df_hand = se2 * se2
            / ((va / 8.0) * (va / 8.0) / 7.0 + (vb / 8.0) * (vb / 8.0) / 7.0);
        // Frozen reference values for this dataset (independent evaluation):
        // t = -2.1070884, df = 11.0930111, p = 0.0586666.
        assert!((t_hand - (-2.107_088_4)).abs() < 1e-6, "t = {t_hand}");
        assert!((df_hand - 11.093_011_1).abs() < 1e-6, "df = {df_hand}");

        let dist = StudentsT::new(0.0, 1.0, df_hand).unwrap();
        let p_hand = 2.0 * (1.0 - dist.cdf(t_hand.abs()));
        let p = welch_t_test(&a, &b).unwrap();
        assert!((p - p_hand).abs() < 1e-12);
        assert!((p - 0.058_666_6).abs() < 1e-4, "p = {p}");
    }

    #[test]
    fn emit_is_consistent_and_roundtrips() {
        let dir = TempDir::new().unwrap();
        let outcome = run_suite(&tiny_spec(), dir.path(), 1, true).unwrap();
        let table = aggregate(&outcome.records).unwrap();
        let out = dir.path().join("tables");
        let files = emit(&outcome.records, &table, EmitFormat::Csv, &out).unwrap();
        assert_eq!(files.len(), 3);

        // The success-rate value at the solved threshold equals the table's
        // solved fraction exactly.
        let mut reader = csv::Reader::from_path(out.join("success_rate.csv")).unwrap();
        let mut checked = 0;
        for row in reader.deserialize::<SuccessRateRow>() {
            let row = row.unwrap();
            if row.threshold == SOLVED_THRESHOLD {
                let expect = table.row(&row.algorithm).unwrap().solved_fraction;
                assert_eq!(row.fraction, expect);
                checked += 1;
            }
        }
        assert_eq!(checked, table.rows.len());

        // CSV metrics reparse to the in-memory table.
        let mut reader = csv::Reader::from_path(out.join("metrics.csv")).unwrap();
        let rows: Vec<MetricsRow> = reader.deserialize().map(|r| r.unwrap()).collect();
        assert_eq!(rows, table.rows);
    }

    #[test]
    fn emit_refuses_empty_records() {
        let dir = TempDir::new().unwrap();
        let table = MetricsTable { rows: vec![] };
        assert!(emit(&[], &table, EmitFormat::Csv, dir.path()).is_err());
        assert!(std::fs::read_dir(dir.path()).unwrap().next().is_none());
    }

    #[test]
    fn cv_examples() {
        assert_eq!(cv_of(&[2.0, 2.0, 2.0]), 0.0);
        assert!((cv_of(&[1.0, 3.0]) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn unknown_sweep_param_lists_valid_names() {
        let mut cfg = OptimizerConfig::default();
        let err = apply_param(&mut cfg, "nonsense", 1.0).unwrap_err();
        assert!(err.to_string().contains("eps0_coeff"));
    }

    #[test]
    fn unknown_algorithm_rejected() {
        assert!(algorithm_by_name("nope").is_none());
        let mut spec = tiny_spec();
        spec.algorithms = vec!["nope".into()];
        assert!(spec.validate().is_err());
    }
}
