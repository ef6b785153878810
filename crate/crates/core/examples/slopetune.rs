//! Scratch: tune the ε-scaling study for the slope criterion.

use evograd::evo::WeightSource;
use evograd::optimizer::{build_pairs, BufferEntry, ReplayBuffer};
use evograd::surrogate::{train_epoch_steps, AdamState, GradNet, LossConfig, TrainOpt, Variant};
use evograd::{sample_ball, Rng, Vector};

fn learn_err(
    f: &dyn Fn(&Vector) -> f64,
    grad: &Vector,
    anchor: &Vector,
    eps: f64,
    n_points: usize,
    n_pairs: usize,
    epochs: usize,
    lr: f64,
    variant: Variant,
    seed: u64,
) -> f64 {
    let mut rng = Rng::new(seed);
    let mut buffer = ReplayBuffer::new(n_points + 1);
    // The sample cloud trails the anchor, as it does behind a moving
    // iterate: ball center offset by half a radius.
    let offset = Vector::from_vec(vec![0.5 * eps / 2f64.sqrt(), 0.5 * eps / 2f64.sqrt()]);
    let center = anchor + &offset;
    for i in 0..=n_points {
        let x = if i == 0 {
            anchor.clone()
        } else {
            sample_ball(&center, eps, &mut rng).unwrap()
        };
        let y = f(&x);
        buffer.push(BufferEntry { y_raw: y, y_norm: y, x, tr_generation: 0 });
    }
    let (pairs, _) = build_pairs(&mut buffer, eps, n_pairs, &mut rng, &WeightSource::Uniform, None);
    let mut net = GradNet::new_default(anchor.len(), &mut rng);
    let cfg = LossConfig { variant, learn_rate: lr, ..LossConfig::default() };
    let mut adam = AdamState::new(&net, lr, TrainOpt::Adam);
    for e in 0..epochs {
        if e == epochs / 2 || e == epochs * 3 / 4 || e == epochs * 9 / 10 {
            adam.lr *= 0.15;
        }
        let _ = train_epoch_steps(&mut net, &pairs, &cfg, &mut adam, &mut rng);
    }
    (net.forward(anchor) - grad).norm()
}

fn main() {
    let args: Vec<String> = std::env::args().collect();
    let n_points: usize = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(600);
    let n_pairs: usize = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(4000);
    let epochs: usize = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(300);
    let lr: f64 = args.get(4).and_then(|s| s.parse().ok()).unwrap_or(0.002);
    let seeds: u64 = args.get(5).and_then(|s| s.parse().ok()).unwrap_or(20);
    let cub: f64 = args.get(6).and_then(|s| s.parse().ok()).unwrap_or(0.8);

    // strong quadratic + moderate cubic + linear
    let f = move |x: &Vector| {
        3.0 * x[0] * x[0] + 2.0 * x[1] * x[1] + 2.0 * x[0] * x[1]
            + cub * (x[0].powi(3) + x[1].powi(3))
            + 0.75 * cub * x[0] * x[0] * x[1]
            + 2.0 * x[0]
            - x[1]
    };
    let anchor = Vector::from_vec(vec![0.3, -0.2]);
    let (ax, ay) = (0.3f64, -0.2f64);
    let grad = Vector::from_vec(vec![
        6.0 * ax + 2.0 * ay + cub * 3.0 * ax * ax + 0.75 * cub * 2.0 * ax * ay + 2.0,
        4.0 * ay + 2.0 * ax + cub * 3.0 * ay * ay + 0.75 * cub * ax * ax - 1.0,
    ]);

    let eps_grid = [0.4, 0.2, 0.1, 0.05];
    for variant in [Variant::Egl, Variant::HGrad] {
        let mut medians = Vec::new();
        for &eps in &eps_grid {
            // Finite-sample floor binds at small radii; spend samples there.
            let (np, npair, ep) = if eps <= 0.11 {
                (n_points.max(1500), n_pairs.max(10_000), epochs.max(500))
            } else {
                (n_points, n_pairs, epochs)
            };
            let mut errs: Vec<f64> = (0..seeds)
                .map(|s| learn_err(&f, &grad, &anchor, eps, np, npair, ep, lr, variant, 100 + s))
                .collect();
            errs.sort_unstable_by(|a, b| a.partial_cmp(b).unwrap());
            medians.push(errs[errs.len() / 2]);
        }
        // least-squares slope of ln(err) vs ln(eps)
        let xs: Vec<f64> = eps_grid.iter().map(|e| e.ln()).collect();
        let ys: Vec<f64> = medians.iter().map(|m| m.ln()).collect();
        let mx = xs.iter().sum::<f64>() / 4.0;
        let my = ys.iter().sum::<f64>() / 4.0;
        let slope = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum::<f64>()
            / xs.iter().map(|x| (x - mx) * (x - mx)).sum::<f64>();
        println!(
            "{variant}: medians {:?} slope {slope:.3}",
            medians.iter().map(|m| format!("{m:.2e}")).collect::<Vec<_>>()
        );
    }
}
