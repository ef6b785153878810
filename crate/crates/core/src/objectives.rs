//! Synthetic benchmark suite, budget accounting, and the normalized
//! performance metric.
//!
//! Seven function families at dimensions {2, 5, 10, 20, 40, 80}, all on
//! Ω = [-5, 5]ⁿ. Rotations, offsets and peak layouts are pseudo-random but
//! fixed by `(name, dim)`, so two processes always build the same suite.
//! `y_min` is the known optimum; `y_max` is the empirical maximum over 10⁴
//! uniform samples drawn from a dedicated seed, which makes the normalized
//! score `(y - y_min)/(y_max - y_min)` reproducible without any shared state.

use std::f64::consts::{E, PI};

use nalgebra::QR;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{Matrix, Rng, Vector};

pub const SUPPORTED_DIMS: [usize; 6] = [2, 5, 10, 20, 40, 80];
pub const DOMAIN: (f64, f64) = (-5.0, 5.0);
/// A problem counts as solved when its normalized value drops below this.
pub const SOLVED_THRESHOLD: f64 = 0.01;
const Y_MAX_SAMPLES: usize = 10_000;

pub const FUNCTION_NAMES: [&str; 7] = [
    "sphere",
    "ellipsoid",
    "rosenbrock",
    "rastrigin",
    "ackley",
    "schaffer",
    "gallagher",
];

#[derive(Debug, Clone)]
enum Landscape {
    Sphere,
    /// z = R(x - x_opt); f = Σ cond^((i-1)/(n-1)) z_i².
    RotatedEllipsoid {
        rotation: Matrix,
        offset: Vector,
        condition: f64,
    },
    Rosenbrock,
    RotatedRastrigin {
        rotation: Matrix,
        offset: Vector,
    },
    Ackley {
        offset: Vector,
    },
    SchafferF7 {
        offset: Vector,
    },
    /// f = height - max_i w_i exp(-|x-y_i|² / (2 n s_i²)); peak 0 is global.
    Gallagher {
        peaks: Vec<Vector>,
        weights: Vec<f64>,
        widths: Vec<f64>,
        height: f64,
    },
}

#[derive(Debug, Clone)]
pub struct Problem {
    name: String,
    dim: usize,
    bounds: Vec<(f64, f64)>,
    landscape: Landscape,
    known_opt: Option<(Vector, f64)>,
    y_min: f64,
    y_max: f64,
}

/// Row of the auditable suite manifest.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ManifestRow {
    pub name: String,
    pub dim: usize,
    pub bounds: Vec<(f64, f64)>,
    pub y_min: f64,
    pub y_max: f64,
}

impl Problem {
    /// Build one suite problem by name. Transform parameters depend only on
    /// `(name, dim)`.
    pub fn by_name(name: &str, dim: usize) -> Result<Self> {
        if !SUPPORTED_DIMS.contains(&dim) {
            return Err(Error::Config(format!(
                "dimension {dim} unsupported; pick one of {SUPPORTED_DIMS:?}"
            )));
        }
        let mut rng = Rng::from_tags(&[name, &dim.to_string(), "params"]);
        let landscape = match name {
            "sphere" => Landscape::Sphere,
            "ellipsoid" => Landscape::RotatedEllipsoid {
                rotation: seeded_rotation(dim, &mut rng),
                offset: seeded_offset(dim, &mut rng),
                condition: 1e4,
            },
            "rosenbrock" => Landscape::Rosenbrock,
            "rastrigin" => Landscape::RotatedRastrigin {
                rotation: seeded_rotation(dim, &mut rng),
                offset: seeded_offset(dim, &mut rng),
            },
            "ackley" => Landscape::Ackley {
                offset: seeded_offset(dim, &mut rng),
            },
            "schaffer" => Landscape::SchafferF7 {
                offset: seeded_offset(dim, &mut rng),
            },
            "gallagher" => {
                let n_peaks = 101;
                let mut peaks = Vec::with_capacity(n_peaks);
                let mut weights = Vec::with_capacity(n_peaks);
                let mut widths = Vec::with_capacity(n_peaks);
                for i in 0..n_peaks {
                    let span = if i == 0 { 4.0 } else { 4.9 };
                    peaks.push(Vector::from_fn(dim, |_, _| rng.uniform_in(-span, span)));
                    if i == 0 {
                        weights.push(10.0);
                        widths.push(1.0);
                    } else {
                        weights.push(rng.uniform_in(1.1, 9.1));
                        widths.push(rng.uniform_in(0.3, 1.2));
                    }
                }
                Landscape::Gallagher {
                    peaks,
                    weights,
                    widths,
                    height: 10.0,
                }
            }
            other => {
                return Err(Error::Config(format!(
                    "unknown problem '{other}'; known: {FUNCTION_NAMES:?}"
                )))
            }
        };

        let known_opt = match &landscape {
            Landscape::Sphere => Some((Vector::zeros(dim), 0.0)),
            Landscape::RotatedEllipsoid { offset, .. } => Some((offset.clone(), 0.0)),
            Landscape::Rosenbrock => Some((Vector::from_element(dim, 1.0), 0.0)),
            Landscape::RotatedRastrigin { offset, .. } => Some((offset.clone(), 0.0)),
            Landscape::Ackley { offset } => Some((offset.clone(), 0.0)),
            Landscape::SchafferF7 { offset } => Some((offset.clone(), 0.0)),
            Landscape::Gallagher { peaks, .. } => Some((peaks[0].clone(), 0.0)),
        };

        let mut problem = Self {
            name: name.to_string(),
            dim,
            bounds: vec![DOMAIN; dim],
            landscape,
            known_opt,
            y_min: 0.0,
            y_max: 1.0,
        };
        problem.y_min = problem.known_opt.as_ref().map(|(_, f)| *f).unwrap_or(0.0);
        problem.y_max = problem.empirical_max();
        Ok(problem)
    }

    fn empirical_max(&self) -> f64 {
        let mut rng = Rng::from_tags(&[&self.name, &self.dim.to_string(), "ymax"]);
        let mut best = f64::NEG_INFINITY;
        for _ in 0..Y_MAX_SAMPLES {
            let x = Vector::from_fn(self.dim, |i, _| {
                rng.uniform_in(self.bounds[i].0, self.bounds[i].1)
            });
            best = best.max(self.evaluate(&x));
        }
        best
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn known_opt(&self) -> Option<(&Vector, f64)> {
        self.known_opt.as_ref().map(|(x, f)| (x, *f))
    }

    pub fn y_min(&self) -> f64 {
        self.y_min
    }

    pub fn y_max(&self) -> f64 {
        self.y_max
    }

    /// Rotation and offset, for problems that have them.
    pub fn transform(&self) -> Option<(Option<&Matrix>, &Vector)> {
        match &self.landscape {
            Landscape::RotatedEllipsoid { rotation, offset, .. } => Some((Some(rotation), offset)),
            Landscape::RotatedRastrigin { rotation, offset } => Some((Some(rotation), offset)),
            Landscape::Ackley { offset } | Landscape::SchafferF7 { offset } => Some((None, offset)),
            _ => None,
        }
    }

    /// Peak layout of the multi-peak landscape: (positions, weights, widths, height).
    pub fn gallagher_peaks(&self) -> Option<(&[Vector], &[f64], &[f64], f64)> {
        match &self.landscape {
            Landscape::Gallagher {
                peaks,
                weights,
                widths,
                height,
            } => Some((peaks, weights, widths, *height)),
            _ => None,
        }
    }

    pub fn normalized(&self, y: f64) -> NormalizedScore {
        // y_max > y_min holds for every suite problem by construction.
        normalized_value(y, self.y_min, self.y_max).expect("suite problem has y_max > y_min")
    }

    pub fn manifest_row(&self) -> ManifestRow {
        ManifestRow {
            name: self.name.clone(),
            dim: self.dim,
            bounds: self.bounds.clone(),
            y_min: self.y_min,
            y_max: self.y_max,
        }
    }

    /// Deterministic, unmetered evaluation.
    pub fn evaluate(&self, x: &Vector) -> f64 {
        assert_eq!(x.len(), self.dim, "dimension mismatch in evaluate");
        match &self.landscape {
            Landscape::Sphere => x.norm_squared(),
            Landscape::RotatedEllipsoid {
                rotation,
                offset,
                condition,
            } => {
                let z = rotation * (x - offset);
                let n = z.len();
                z.iter()
                    .enumerate()
                    .map(|(i, zi)| {
                        let expo = if n > 1 { i as f64 / (n - 1) as f64 } else { 0.0 };
                        condition.powf(expo) * zi * zi
                    })
                    .sum()
            }
            Landscape::Rosenbrock => (0..self.dim - 1)
                .map(|i| {
                    let a = x[i + 1] - x[i] * x[i];
                    let b = 1.0 - x[i];
                    100.0 * a * a + b * b
                })
                .sum(),
            Landscape::RotatedRastrigin { rotation, offset } => {
                let z = rotation * (x - offset);
                10.0 * self.dim as f64
                    + z.iter()
                        .map(|zi| zi * zi - 10.0 * (2.0 * PI * zi).cos())
                        .sum::<f64>()
            }
            Landscape::Ackley { offset } => {
                let z = x - offset;
                let n = self.dim as f64;
                let rms = (z.norm_squared() / n).sqrt();
                let cos_avg = z.iter().map(|zi| (2.0 * PI * zi).cos()).sum::<f64>() / n;
                -20.0 * (-0.2 * rms).exp() - cos_avg.exp() + 20.0 + E
            }
            Landscape::SchafferF7 { offset } => {
                let z = x - offset;
                let n = self.dim;
                let avg = (0..n - 1)
                    .map(|i| {
                        let s = (z[i] * z[i] + z[i + 1] * z[i + 1]).sqrt();
                        s.sqrt() * (1.0 + (50.0 * s.powf(0.2)).sin().powi(2))
                    })
                    .sum::<f64>()
                    / (n - 1) as f64;
                avg * avg
            }
            Landscape::Gallagher {
                peaks,
                weights,
                widths,
                height,
            } => {
                let n = self.dim as f64;
                let best = peaks
                    .iter()
                    .zip(weights)
                    .zip(widths)
                    .map(|((p, w), s)| {
                        let d2 = (x - p).norm_squared();
                        w * (-d2 / (2.0 * n * s * s)).exp()
                    })
                    .fold(f64::NEG_INFINITY, f64::max);
                height - best
            }
        }
    }
}

fn seeded_offset(dim: usize, rng: &mut Rng) -> Vector {
    Vector::from_fn(dim, |_, _| rng.uniform_in(-4.0, 4.0))
}

/// Orthogonal matrix via QR of a Gaussian matrix, with column signs fixed so
/// the result is unique.
fn seeded_rotation(dim: usize, rng: &mut Rng) -> Matrix {
    let g = Matrix::from_fn(dim, dim, |_, _| rng.standard_normal());
    let qr = QR::new(g);
    let r = qr.r();
    let mut q = qr.q();
    for j in 0..dim {
        if r[(j, j)] < 0.0 {
            for i in 0..dim {
                q[(i, j)] = -q[(i, j)];
            }
        }
    }
    q
}

/// The full suite: every named function at every requested dimension.
pub fn make_suite(dims: &[usize]) -> Result<Vec<Problem>> {
    let mut problems = Vec::with_capacity(dims.len() * FUNCTION_NAMES.len());
    for &dim in dims {
        for name in FUNCTION_NAMES {
            problems.push(Problem::by_name(name, dim)?);
        }
    }
    Ok(problems)
}

pub fn suite_manifest(problems: &[Problem]) -> Vec<ManifestRow> {
    problems.iter().map(Problem::manifest_row).collect()
}

/// Normalized objective value, clamped to [0, 1].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NormalizedScore {
    pub value: f64,
}

impl NormalizedScore {
    pub fn solved(&self) -> bool {
        self.value < SOLVED_THRESHOLD
    }
}

pub fn normalized_value(y: f64, y_min: f64, y_max: f64) -> Result<NormalizedScore> {
    if !(y_max > y_min) {
        return Err(Error::Domain(format!(
            "normalization needs y_max > y_min, got [{y_min}, {y_max}]"
        )));
    }
    let value = ((y - y_min) / (y_max - y_min)).clamp(0.0, 1.0);
    Ok(NormalizedScore { value })
}

/// Evaluation counter. Every objective call an optimizer makes goes through
/// one of these; `used` never exceeds `total`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BudgetMeter {
    total: usize,
    used: usize,
}

impl BudgetMeter {
    pub fn new(total: usize) -> Self {
        Self { total, used: 0 }
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn used(&self) -> usize {
        self.used
    }

    pub fn remaining(&self) -> usize {
        self.total - self.used
    }

    pub fn exhausted(&self) -> bool {
        self.used >= self.total
    }
}

pub fn evaluate_metered(problem: &Problem, meter: &mut BudgetMeter, x: &Vector) -> Result<f64> {
    if meter.exhausted() {
        return Err(Error::BudgetExhausted);
    }
    meter.used += 1;
    Ok(problem.evaluate(x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::{prop_assert, proptest};

    #[test]
    fn sphere_zero_at_origin() {
        let p = Problem::by_name("sphere", 5).unwrap();
        assert_eq!(p.evaluate(&Vector::zeros(5)), 0.0);
    }

    #[test]
    fn rosenbrock_zero_at_ones() {
        let p = Problem::by_name("rosenbrock", 10).unwrap();
        assert_eq!(p.evaluate(&Vector::from_element(10, 1.0)), 0.0);
    }

    #[test]
    fn every_problem_attains_known_optimum() {
        for p in make_suite(&[2, 5, 10]).unwrap() {
            let (x_opt, f_opt) = p.known_opt().unwrap();
            let v = p.evaluate(x_opt);
            assert!(
                (v - f_opt).abs() <= 1e-9,
                "{} dim {}: f(x*) = {v}, expected {f_opt}",
                p.name(),
                p.dim()
            );
        }
    }

    #[test]
    fn rastrigin_matches_textbook_formula() {
        let p = Problem::by_name("rastrigin", 2).unwrap();
        let x = Vector::from_vec(vec![0.5, 0.5]);
        let (rotation, offset) = p.transform().unwrap();
        let z = rotation.unwrap() * (&x - offset);
        // Independent textbook evaluation on the transformed point.
        let oracle = 10.0 * 2.0
            + z.iter()
                .map(|zi| zi * zi - 10.0 * (2.0 * PI * zi).cos())
                .sum::<f64>();
        assert!((p.evaluate(&x) - oracle).abs() <= 1e-12);
    }

    #[test]
    fn evaluations_are_pure() {
        let p = Problem::by_name("gallagher", 2).unwrap();
        let x = Vector::from_vec(vec![0.3, -1.7]);
        let first = p.evaluate(&x);
        for _ in 0..10_000 {
            assert_eq!(p.evaluate(&x), first);
        }
    }

    #[test]
    fn suite_construction_is_deterministic() {
        let a = Problem::by_name("ellipsoid", 5).unwrap();
        let b = Problem::by_name("ellipsoid", 5).unwrap();
        assert_eq!(a.y_max(), b.y_max());
        let x = Vector::from_vec(vec![1.0, -2.0, 0.5, 3.0, -4.0]);
        assert_eq!(a.evaluate(&x), b.evaluate(&x));
    }

    #[test]
    fn unsupported_dim_is_config_error() {
        assert!(matches!(make_suite(&[3]), Err(Error::Config(_))));
    }

    #[test]
    fn unknown_name_is_config_error() {
        assert!(matches!(Problem::by_name("nope", 2), Err(Error::Config(_))));
    }

    #[test]
    fn gallagher_global_peak_dominates() {
        for dim in [2, 10] {
            let p = Problem::by_name("gallagher", dim).unwrap();
            let (peaks, weights, _, height) = p.gallagher_peaks().unwrap();
            assert_eq!(p.evaluate(&peaks[0]), 0.0);
            let second = weights[1..].iter().cloned().fold(f64::MIN, f64::max);
            assert!(second < weights[0]);
            assert!(height - second > 0.0);
        }
    }

    #[test]
    fn normalized_value_examples() {
        let s = normalized_value(0.0, 0.0, 100.0).unwrap();
        assert_eq!(s.value, 0.0);
        assert!(s.solved());

        let s = normalized_value(50.0, 0.0, 100.0).unwrap();
        assert_eq!(s.value, 0.5);

        // Paper threshold: normalized value below 0.01 counts as solved.
        let s = normalized_value(0.9, 0.0, 100.0).unwrap();
        assert!((s.value - 0.009).abs() <= 1e-15);
        assert!(s.solved());
        assert!(!normalized_value(1.0, 0.0, 100.0).unwrap().solved());

        assert!(normalized_value(1.0, 2.0, 2.0).is_err());
    }

    #[test]
    fn meter_counts_and_errors() {
        let p = Problem::by_name("sphere", 2).unwrap();
        let mut meter = BudgetMeter::new(2);
        let x = Vector::zeros(2);
        assert_eq!(evaluate_metered(&p, &mut meter, &x).unwrap(), 0.0);
        assert_eq!(meter.used(), 1);
        evaluate_metered(&p, &mut meter, &x).unwrap();
        assert!(matches!(
            evaluate_metered(&p, &mut meter, &x),
            Err(Error::BudgetExhausted)
        ));
        assert_eq!(meter.used(), 2);
    }

    #[test]
    fn meter_holds_at_full_budget_scale() {
        let p = Problem::by_name("sphere", 2).unwrap();
        let mut meter = BudgetMeter::new(150_000);
        let x = Vector::zeros(2);
        while !meter.exhausted() {
            evaluate_metered(&p, &mut meter, &x).unwrap();
        }
        assert_eq!(meter.used(), 150_000);
        assert!(evaluate_metered(&p, &mut meter, &x).is_err());
    }

    proptest! {
        #[test]
        fn normalized_value_is_monotone(y1 in -10.0f64..110.0, y2 in -10.0f64..110.0) {
            let lo = y1.min(y2);
            let hi = y1.max(y2);
            let a = normalized_value(lo, 0.0, 100.0).unwrap();
            let b = normalized_value(hi, 0.0, 100.0).unwrap();
            prop_assert!(a.value <= b.value);
        }
    }
}
