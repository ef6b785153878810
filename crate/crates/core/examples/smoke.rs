//! Quick convergence smoke run: prints trajectories for a few configs.

use evograd::{cma_run, cma_tr_run, run, MapKind, OptimizerConfig, Problem, StartPolicy, Variant};
use std::time::Instant;

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let name = args.get(1).map(String::as_str).unwrap_or("sphere");
    let dim: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(5);
    let budget: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(30_000);
    let variant = args.get(4).map(String::as_str).unwrap_or("evograd2");
    let seeds: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(3);

    let problem = Problem::by_name(name, dim).unwrap();
    println!(
        "problem={name} dim={dim} budget={budget} y_max={:.3e}",
        problem.y_max()
    );

    for seed in 0..seeds {
        let t0 = Instant::now();
        let rec = match variant {
            "cma" => cma_run(&problem, budget, MapKind::Linear, seed, StartPolicy::RandomUniform),
            "cma-tr" => cma_tr_run(
                &problem,
                budget,
                MapKind::Linear,
                0.9,
                seed,
                StartPolicy::RandomUniform,
            ),
            v => {
                let variant = match v {
                    "egl" => Variant::Egl,
                    "evograd" => Variant::EvoGrad,
                    "hgrad" => Variant::HGrad,
                    _ => Variant::EvoGrad2,
                };
                let mut cfg = OptimizerConfig::preset(variant);
                cfg.budget = budget;
                cfg.start = StartPolicy::RandomUniform;
                run(&problem, &cfg, seed).unwrap()
            }
        };
        let secs = t0.elapsed().as_secs_f64();
        let mut marks = String::new();
        for point in rec.trajectory.iter().step_by(rec.trajectory.len() / 8 + 1) {
            marks.push_str(&format!(" {}:{:.2e}", point.evals, point.f_best));
        }
        println!(
            "seed {seed}: f_best={:.3e} norm={:.2e} evals={} events={} solved={} [{:.1}s]{}",
            rec.f_best,
            rec.f_best_normalized,
            rec.evals_used,
            rec.tr_events.len(),
            rec.solved,
            secs,
            marks
        );
    }
}
