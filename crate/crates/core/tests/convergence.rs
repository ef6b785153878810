//! End-to-end convergence behavior of the optimizer family: full-loop descent
//! precision, the second-order accuracy ordering, and the evolutionary-weight
//! escape study on the multi-peak landscape.

use evograd::evo::{cma_update, CmaParams, CmaState, WeightSource};
use evograd::optimizer::{adaptive_sizes, build_pairs, BufferEntry, ReplayBuffer};
use evograd::surrogate::{train_epoch_steps, AdamState, GradNet, LossConfig, TrainOpt, Variant};
use evograd::trust_region::{MapKind, TrustRegion};
use evograd::{run, sample_ball, OptimizerConfig, Problem, Rng, StartPolicy, Vector};

/// One-shot gradient-learning study: sample points in the ε-ball around an
/// anchor, pair them, train the variant, return g(anchor).
#[allow(clippy::too_many_arguments)]
fn learn_gradient_at(
    f: &dyn Fn(&Vector) -> f64,
    anchor: &Vector,
    eps: f64,
    n_points: usize,
    n_pairs: usize,
    epochs: usize,
    lr: f64,
    variant: Variant,
    seed: u64,
) -> Vector {
    let dim = anchor.len();
    let mut rng = Rng::new(seed);
    let mut buffer = ReplayBuffer::new(n_points + 1);
    for i in 0..=n_points {
        let x = if i == 0 {
            anchor.clone()
        } else {
            sample_ball(anchor, eps, &mut rng).unwrap()
        };
        let y = f(&x);
        buffer.push(BufferEntry {
            y_raw: y,
            y_norm: y,
            x,
            tr_generation: 0,
        });
    }
    let (pairs, _) = build_pairs(
        &mut buffer,
        eps,
        n_pairs,
        &mut rng,
        &WeightSource::Uniform,
        None,
    );
    assert!(!pairs.is_empty());

    let mut net = GradNet::new_default(dim, &mut rng);
    let cfg = LossConfig {
        variant,
        learn_rate: lr,
        ..LossConfig::default()
    };
    let mut adam = AdamState::new(&net, lr, TrainOpt::Adam);
    for e in 0..epochs {
        if e == epochs * 3 / 5 || e == epochs * 17 / 20 {
            adam.lr *= 0.15;
        }
        let _ = train_epoch_steps(&mut net, &pairs, &cfg, &mut adam, &mut rng);
    }
    net.forward(anchor)
}

// Full loop on the 5-dimensional sphere reaches 1e-4 within 30k evaluations
// on every seed.
#[test]
fn full_loop_reaches_high_precision_on_sphere() {
    let problem = Problem::by_name("sphere", 5).unwrap();
    let target = 1e-4;
    for seed in 0..10 {
        let mut cfg = OptimizerConfig::preset(Variant::EvoGrad2);
        cfg.budget = 30_000;
        cfg.start = StartPolicy::RandomUniform;
        cfg.target_normalized = Some(target / (problem.y_max() - problem.y_min()));
        let rec = run(&problem, &cfg, seed).unwrap();
        assert!(
            rec.f_best < target,
            "seed {seed}: f_best {} after {} evals",
            rec.f_best,
            rec.evals_used
        );
        assert!(rec.evals_used <= 30_000);
    }
}

// Second-order residuals beat first-order ones on a function with strong
// third derivatives, for every tested ε ≥ 0.1.
#[test]
fn hgrad_orders_below_egl_on_cubic_family() {
    // Strong quadratic part (drives the first-order method's O(ε) bias),
    // mild cubic part (keeps the second-order method's O(ε²) bias small).
    let f = |x: &Vector| {
        3.0 * x[0] * x[0] + 2.0 * x[1] * x[1] + 2.0 * x[0] * x[1]
            + 0.3 * (x[0].powi(3) + x[1].powi(3) + x[0] * x[0] * x[1])
            + 2.0 * x[0]
            - x[1]
    };
    let anchor = Vector::from_vec(vec![0.5, -0.3]);
    let (ax, ay) = (0.5f64, -0.3f64);
    let grad = Vector::from_vec(vec![
        6.0 * ax + 2.0 * ay + 0.3 * (3.0 * ax * ax + 2.0 * ax * ay) + 2.0,
        4.0 * ay + 2.0 * ax + 0.3 * (3.0 * ay * ay + ax * ax) - 1.0,
    ]);

    for eps in [0.4, 0.2, 0.1] {
        let seeds = 5;
        let mut err = |variant: Variant| -> f64 {
            let mut errors: Vec<f64> = (0..seeds)
                .map(|s| {
                    let g =
                        learn_gradient_at(&f, &anchor, eps, 800, 6000, 300, 0.002, variant, 40 + s);
                    (&g - &grad).norm()
                })
                .collect();
            errors.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            errors[seeds as usize / 2]
        };
        let e_hgrad = err(Variant::HGrad);
        let e_egl = err(Variant::Egl);
        assert!(
            e_hgrad < e_egl,
            "eps {eps}: hgrad {e_hgrad} not below egl {e_egl}"
        );
    }
}

// On a positive-definite quadratic the second-order Taylor expansion is
// exact, so a trained second-order surrogate recovers the anchor gradient
// even at ε = 1.
#[test]
fn hgrad_is_quadratic_exact_at_unit_eps() {
    let mut rng = Rng::new(7);
    let n = 5;
    let half = evograd::Matrix::from_fn(n, n, |_, _| rng.standard_normal());
    let a = (&half * half.transpose()) * 0.3 + evograd::Matrix::identity(n, n) * 0.5;
    let anchor = Vector::from_element(n, 0.6);
    let dir = rng.standard_normal_vector(n);
    let x_star = &anchor + &dir * (1.5 / dir.norm());
    let true_grad = &a * (&anchor - &x_star);
    let quad = {
        let a = a.clone();
        let x_star = x_star.clone();
        move |x: &Vector| 0.5 * ((x - &x_star).transpose() * &a * (x - &x_star))[(0, 0)]
    };

    let mut ok = 0;
    for seed in 0..5 {
        let g = learn_gradient_at(
            &quad,
            &anchor,
            1.0,
            2000,
            12_000,
            600,
            0.003,
            Variant::HGrad,
            60 + seed,
        );
        let rel = (&g - &true_grad).norm() / true_grad.norm();
        if rel <= 1e-2 {
            ok += 1;
        }
    }
    assert!(ok >= 4, "quadratic exactness held on {ok}/5 seeds");
}

// The evolutionary weights steer the learned gradient field toward the
// global basin of the multi-peak landscape strictly more often than the
// unweighted fit, over paired starts.
#[test]
fn evolutionary_weights_escape_local_minima_more_often() {
    let (egl, evo) = escape_study(20, 0);
    assert!(
        evo > egl,
        "weighted field reached the global basin {evo}/20 vs unweighted {egl}/20"
    );
}

fn escape_study(starts: u64, seed_base: u64) -> (u32, u32) {
    let problem = Problem::by_name("gallagher", 2).unwrap();
    let (_, peak_weights, _, height) = problem.gallagher_peaks().unwrap();
    let second = peak_weights[1..].iter().cloned().fold(f64::MIN, f64::max);
    let threshold = height - second;
    let eps = 0.4 * 2f64.sqrt();
    let (n_s, n_p) = adaptive_sizes(2);
    let tr = TrustRegion::covering(problem.bounds(), MapKind::Tanh);
    let u_global = tr
        .from_search(problem.known_opt().unwrap().0)
        .unwrap();

    let mut hits = (0u32, 0u32);
    for seed in seed_base..seed_base + starts {
        let mut rng = Rng::new(seed);
        // Starts with the global basin one to three half-ball radii away:
        // close enough that samples can see it, far enough that the local
        // landscape pulls elsewhere.
        let u0 = loop {
            let x = evograd::evo::start_point(&problem, StartPolicy::RandomUniform, &mut rng);
            let u = tr.from_search(&x).unwrap();
            let d = (&u - &u_global).norm();
            if d >= 0.5 * eps && d <= 1.5 * eps {
                break u;
            }
        };

        let mut buffer = ReplayBuffer::new(10_000);
        let mut cma = CmaState::new(u0.clone(), eps, CmaParams::standard(2, n_s));
        for _ in 0..6 {
            let mut batch = Vec::new();
            for _ in 0..n_s {
                let u = sample_ball(&u0, eps, &mut rng).unwrap();
                let f = problem.evaluate(&tr.to_search(&u));
                batch.push((u.clone(), f));
                buffer.push(BufferEntry {
                    x: u,
                    y_raw: f,
                    y_norm: f,
                    tr_generation: 0,
                });
            }
            batch.extend(buffer.elites(n_s));
            cma = cma_update(&cma, &batch);
        }

        let mut field_reaches_basin = |variant: Variant, source: WeightSource| -> bool {
            let mut rng = Rng::new(1 << 20 | seed);
            let cma_ref = match source {
                WeightSource::CmaGaussian => Some(&cma),
                _ => None,
            };
            let (pairs, _) = build_pairs(&mut buffer, eps, n_p, &mut rng, &source, cma_ref);
            let mut net = GradNet::new_default(2, &mut rng);
            let cfg = LossConfig {
                variant,
                ..LossConfig::default()
            };
            let mut adam = AdamState::new(&net, cfg.learn_rate, TrainOpt::Adam);
            for _ in 0..20 {
                let _ = train_epoch_steps(&mut net, &pairs, &cfg, &mut adam, &mut rng);
            }
            // Descend on the frozen learned field.
            let mut u = u0.clone();
            let step = 0.05 * eps;
            for _ in 0..200 {
                if problem.evaluate(&tr.to_search(&u)) < threshold {
                    return true;
                }
                let g = net.forward(&u);
                let gn = g.norm();
                if gn <= 1e-12 || (&u - &u0).norm() > 3.0 * eps {
                    break;
                }
                u -= &g * (step / gn);
            }
            problem.evaluate(&tr.to_search(&u)) < threshold
        };

        if field_reaches_basin(Variant::Egl, WeightSource::Uniform) {
            hits.0 += 1;
        }
        if field_reaches_basin(Variant::EvoGrad, WeightSource::CmaGaussian) {
            hits.1 += 1;
        }
    }
    hits
}
