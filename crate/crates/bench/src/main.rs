//! Benchmark CLI: run suites, aggregate records, sweep hyperparameters.

use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};

use evograd::objectives::{FUNCTION_NAMES, SUPPORTED_DIMS};
use evograd_bench::{
    aggregate, algorithm_by_name, emit, load_records, run_suite, sweep, EmitFormat, SuiteSpec,
    KNOWN_ALGORITHMS,
};

#[derive(Parser)]
#[command(
    name = "evograd-bench",
    about = "Benchmark harness for the gradient-learning black-box optimizers",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a suite: every (problem, algorithm, seed) cell once, in parallel.
    Run {
        /// Suite spec JSON path, or "desk" for the built-in desk-scale grid.
        #[arg(long, default_value = "desk")]
        spec: String,
        /// Output directory (records land in <out>/records).
        #[arg(long, env = "EVOGRAD_OUT_DIR", default_value = "bench-out")]
        out: PathBuf,
        /// Worker threads; 0 picks the machine default.
        #[arg(long, default_value_t = 0)]
        jobs: usize,
        /// Re-run cells even when their record file already exists.
        #[arg(long)]
        no_resume: bool,
        /// Also aggregate and emit tables after the runs.
        #[arg(long)]
        tables: bool,
        /// Table format when --tables is set.
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Aggregate a records directory into metric tables and plot data.
    Aggregate {
        /// Directory holding record files (or a suite output directory).
        #[arg(long)]
        records: PathBuf,
        /// Where to write the tables.
        #[arg(long, env = "EVOGRAD_OUT_DIR", default_value = "bench-out")]
        out: PathBuf,
        #[arg(long, default_value = "csv")]
        format: String,
    },
    /// Sweep one hyperparameter of a gradient algorithm across values.
    Sweep {
        #[arg(long, default_value = "evograd2")]
        algorithm: String,
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. 0.1,0.4,0.8.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Suite spec JSON path, or "desk".
        #[arg(long, default_value = "desk")]
        spec: String,
        #[arg(long, env = "EVOGRAD_OUT_DIR", default_value = "bench-out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        jobs: usize,
    },
    /// List the benchmark problems.
    ListProblems {
        /// Restrict to these dimensions.
        #[arg(long, value_delimiter = ',')]
        dims: Vec<usize>,
    },
    /// List the algorithm presets.
    ListAlgorithms,
}

fn parse_format(format: &str) -> Result<EmitFormat> {
    match format {
        "csv" => Ok(EmitFormat::Csv),
        "json" => Ok(EmitFormat::Json),
        other => bail!("unknown format '{other}'; use csv or json"),
    }
}

fn load_spec(spec: &str) -> Result<SuiteSpec> {
    if spec == "desk" {
        return Ok(SuiteSpec::desk());
    }
    let json = std::fs::read_to_string(spec).with_context(|| format!("reading spec {spec}"))?;
    SuiteSpec::from_json(&json)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Run {
            spec,
            out,
            jobs,
            no_resume,
            tables,
            format,
        } => {
            let format = parse_format(&format)?;
            let spec = load_spec(&spec)?;
            let outcome = run_suite(&spec, &out, jobs, !no_resume)?;
            println!(
                "suite complete: {} executed, {} resumed, {} failed, records in {}",
                outcome.executed,
                outcome.skipped,
                outcome.failures.len(),
                out.join("records").display()
            );
            for failure in &outcome.failures {
                eprintln!("cell failed: {failure}");
            }
            if tables {
                let table = aggregate(&outcome.records)?;
                let files = emit(&outcome.records, &table, format, &out.join("tables"))?;
                for f in files {
                    println!("wrote {}", f.display());
                }
            }
            if !outcome.failures.is_empty() {
                bail!("{} cells failed", outcome.failures.len());
            }
        }
        Command::Aggregate {
            records,
            out,
            format,
        } => {
            let format = parse_format(&format)?;
            let loaded = load_records(&records)?;
            let table = aggregate(&loaded)?;
            for row in &table.rows {
                println!(
                    "{:<16} cells={:<4} solved={:<6.3} budget_to_solve={} mean={:.4} std={:.4}",
                    row.algorithm,
                    row.cells,
                    row.solved_fraction,
                    row.budget_to_solve
                        .map(|b| format!("{b:.0}"))
                        .unwrap_or_else(|| "-".into()),
                    row.mean_norm,
                    row.std_norm
                );
            }
            let files = emit(&loaded, &table, format, &out.join("tables"))?;
            for f in files {
                println!("wrote {}", f.display());
            }
        }
        Command::Sweep {
            algorithm,
            param,
            values,
            spec,
            out,
            jobs,
        } => {
            let spec = load_spec(&spec)?;
            let report = sweep(&spec, &algorithm, &param, &values, &out, jobs)?;
            for p in &report.points {
                println!(
                    "{param}={:<8} mean_norm={:.5} solved={:.3} budget_to_solve={}",
                    p.value,
                    p.mean_norm,
                    p.solved_fraction,
                    p.budget_to_solve
                        .map(|b| format!("{b:.0}"))
                        .unwrap_or_else(|| "-".into()),
                );
            }
            println!("cv({param}) = {:.4}", report.cv);
            std::fs::create_dir_all(&out)?;
            let path = out.join(format!("sweep_{param}.json"));
            std::fs::write(&path, serde_json::to_string_pretty(&report)?)?;
            println!("wrote {}", path.display());
        }
        Command::ListProblems { dims } => {
            let dims = if dims.is_empty() {
                SUPPORTED_DIMS.to_vec()
            } else {
                dims
            };
            for &dim in &dims {
                for name in FUNCTION_NAMES {
                    let p = evograd::Problem::by_name(name, dim)?;
                    println!(
                        "{name:<12} dim={dim:<3} domain=[{}, {}] y_min={} y_max={:.4e}",
                        p.bounds()[0].0,
                        p.bounds()[0].1,
                        p.y_min(),
                        p.y_max()
                    );
                }
            }
        }
        Command::ListAlgorithms => {
            for name in KNOWN_ALGORITHMS {
                let kind = match algorithm_by_name(name).unwrap() {
                    evograd_bench::AlgorithmKind::Gradient(cfg) => {
                        format!("gradient learning ({})", cfg.algorithm_label())
                    }
                    evograd_bench::AlgorithmKind::Cma { .. } => "evolutionary baseline".into(),
                    evograd_bench::AlgorithmKind::CmaTr { .. } => {
                        "evolutionary baseline with trust region".into()
                    }
                };
                println!("{name:<16} {kind}");
            }
        }
    }
    Ok(())
}
