//! Deterministic linear-algebra and sampling primitives.
//!
//! Everything here is either pure or driven by [`Rng`], a seeded ChaCha stream
//! whose output is identical on every platform. Vectors and matrices are plain
//! `nalgebra` dynamic types; the dimensions in play are small (n ≲ 100), so no
//! effort is spent on sparse or blocked representations.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};

pub type Vector = DVector<f64>;
pub type Matrix = DMatrix<f64>;

/// Reproducible random stream.
///
/// ChaCha is a counter-mode generator: a seed fully determines the byte
/// stream independently of platform or word size. `split` derives an
/// independent stream from the *original* seed and a tag, so parallel
/// consumers stay reproducible regardless of how much the parent has
/// already consumed.
#[derive(Debug, Clone)]
pub struct Rng {
    seed: u64,
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            inner: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Seed derived from string parts; used for per-problem constants that
    /// must not depend on run seeds.
    pub fn from_tags(parts: &[&str]) -> Self {
        let mut h: u64 = 0xcbf2_9ce4_8422_2325; // FNV-1a offset basis
        for part in parts {
            for &b in part.as_bytes() {
                h ^= u64::from(b);
                h = h.wrapping_mul(0x0000_0100_0000_01b3);
            }
            h ^= 0xff;
            h = h.wrapping_mul(0x0000_0100_0000_01b3);
        }
        Self::new(h)
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Independent stream keyed by `(original seed, tag)`.
    pub fn split(&self, tag: u64) -> Self {
        // splitmix64 finalizer over seed ^ f(tag)
        let mut z = self
            .seed
            .wrapping_add(tag.wrapping_mul(0x9e37_79b9_7f4a_7c15));
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        Self::new(z ^ (z >> 31))
    }

    /// Uniform in `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        rand::Rng::random::<f64>(&mut self.inner)
    }

    /// Uniform in `[lo, hi)`.
    pub fn uniform_in(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    pub fn standard_normal(&mut self) -> f64 {
        StandardNormal.sample(&mut self.inner)
    }

    pub fn index(&mut self, n: usize) -> usize {
        rand::Rng::random_range(&mut self.inner, 0..n)
    }

    pub fn standard_normal_vector(&mut self, n: usize) -> Vector {
        Vector::from_fn(n, |_, _| self.standard_normal())
    }

    /// Fisher-Yates shuffle of an index slice.
    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        for i in (1..xs.len()).rev() {
            let j = self.index(i + 1);
            xs.swap(i, j);
        }
    }
}

impl RngCore for Rng {
    fn next_u32(&mut self) -> u32 {
        self.inner.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.inner.next_u64()
    }

    fn fill_bytes(&mut self, dest: &mut [u8]) {
        self.inner.fill_bytes(dest)
    }
}

/// Uniform sample from the closed ball of radius `eps` around `center`.
///
/// Direction on the sphere times radius `eps * u^(1/n)`; rejection sampling
/// is useless past n ≈ 10. The returned point satisfies
/// `(x - center).norm() <= eps` under recomputation, including the rounding
/// of `center + offset`.
pub fn sample_ball(center: &Vector, eps: f64, rng: &mut Rng) -> Result<Vector> {
    if !eps.is_finite() || eps < 0.0 {
        return Err(Error::Domain(format!("ball radius must be >= 0, got {eps}")));
    }
    let n = center.len();
    if n == 0 {
        return Err(Error::Domain("ball dimension must be >= 1".into()));
    }
    if eps == 0.0 {
        return Ok(center.clone());
    }

    let mut dir = rng.standard_normal_vector(n);
    let mut norm = dir.norm();
    while norm < 1e-300 {
        dir = rng.standard_normal_vector(n);
        norm = dir.norm();
    }
    let radius = eps * rng.uniform().powf(1.0 / n as f64);
    let mut offset = dir * (radius / norm);

    // Guard against the 1-ulp overshoot of `(center + offset) - center`.
    for _ in 0..64 {
        let x = center + &offset;
        if (&x - center).norm() <= eps {
            return Ok(x);
        }
        offset *= 0.999;
    }
    Ok(center.clone())
}

fn symmetry_defect(c: &Matrix) -> f64 {
    let mut defect: f64 = 0.0;
    let mut magnitude: f64 = 0.0;
    for i in 0..c.nrows() {
        for j in 0..c.ncols() {
            defect = defect.max((c[(i, j)] - c[(j, i)]).abs());
            magnitude = magnitude.max(c[(i, j)].abs());
        }
    }
    if magnitude > 0.0 {
        defect / magnitude
    } else {
        0.0
    }
}

/// Lower-triangular `L` with `L Lᵀ = C`.
///
/// Fails on asymmetric input and on matrices that are not positive definite;
/// callers with evolving covariances repair via [`repair_covariance`] and
/// retry.
pub fn cholesky(c: &Matrix) -> Result<Matrix> {
    if c.nrows() != c.ncols() {
        return Err(Error::Domain("cholesky needs a square matrix".into()));
    }
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("cholesky input has non-finite entries".into()));
    }
    if symmetry_defect(c) > 1e-8 {
        return Err(Error::NotSymmetric);
    }
    Cholesky::new(c.clone())
        .map(|ch| ch.l())
        .ok_or(Error::NotPositiveDefinite)
}

/// Eigenvalue flooring at `1e-12 * trace(C)/n`, the repair applied when CMA
/// covariances degenerate late in a run.
pub fn repair_covariance(c: &Matrix) -> Matrix {
    let n = c.nrows();
    let sym = (c + c.transpose()) * 0.5;
    let trace = sym.trace();
    let floor = 1e-12 * (trace / n as f64).max(f64::MIN_POSITIVE);
    let eigen = SymmetricEigen::new(sym);
    let floored = Matrix::from_diagonal(&eigen.eigenvalues.map(|v| v.max(floor)));
    let repaired = &eigen.eigenvectors * floored * eigen.eigenvectors.transpose();
    (&repaired + repaired.transpose()) * 0.5
}

/// The quadratic-form exponent `-(1/2σ²)(x-m)ᵀC⁻¹(x-m)` of a Gaussian
/// density. The normalization constant is irrelevant: weights built from
/// this are renormalized over their batch.
pub fn gaussian_log_density(x: &Vector, m: &Vector, sigma: f64, c: &Matrix) -> Result<f64> {
    if sigma <= 0.0 || !sigma.is_finite() {
        return Err(Error::Domain(format!("sigma must be > 0, got {sigma}")));
    }
    if x.len() != m.len() || c.nrows() != x.len() {
        return Err(Error::Domain("dimension mismatch in gaussian_log_density".into()));
    }
    let l = cholesky(c).map_err(|_| Error::SingularCovariance)?;
    let d = x - m;
    let y = l
        .solve_lower_triangular(&d)
        .ok_or(Error::SingularCovariance)?;
    Ok(-y.norm_squared() / (2.0 * sigma * sigma))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::{prop_assert, proptest};

    fn random_pd(n: usize, rng: &mut Rng) -> Matrix {
        let a = Matrix::from_fn(n, n, |_, _| rng.standard_normal());
        &a * a.transpose() + Matrix::identity(n, n) * 0.1
    }

    #[test]
    fn ball_degenerate_radius_returns_center() {
        let mut rng = Rng::new(7);
        let c = Vector::from_vec(vec![1.0, -2.0, 3.0]);
        let x = sample_ball(&c, 0.0, &mut rng).unwrap();
        assert_eq!(x, c);
    }

    #[test]
    fn ball_negative_radius_rejected() {
        let mut rng = Rng::new(7);
        let c = Vector::zeros(2);
        assert!(matches!(
            sample_ball(&c, -1.0, &mut rng),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn ball_one_dimensional_interval_bound() {
        let mut rng = Rng::new(11);
        let c = Vector::zeros(1);
        for _ in 0..2000 {
            let x = sample_ball(&c, 2.0, &mut rng).unwrap();
            assert!(x[0] >= -2.0 && x[0] <= 2.0, "out of interval: {}", x[0]);
        }
    }

    #[test]
    fn ball_radius_never_exceeded() {
        let mut rng = Rng::new(13);
        for &(n, eps, shift) in &[(3usize, 1.0, 0.0), (10, 0.3, 4.9), (2, 1e-4, 4.0)] {
            let c = Vector::from_element(n, shift);
            for _ in 0..2000 {
                let x = sample_ball(&c, eps, &mut rng).unwrap();
                assert!((&x - &c).norm() <= eps);
            }
        }
    }

    // E[norm] for the uniform ball is eps * n/(n+1); n=3 gives 0.75.
    #[test]
    fn ball_mean_radius_matches_closed_form() {
        let mut rng = Rng::new(17);
        let c = Vector::zeros(3);
        let draws = 100_000;
        let mean: f64 = (0..draws)
            .map(|_| sample_ball(&c, 1.0, &mut rng).unwrap().norm())
            .sum::<f64>()
            / draws as f64;
        assert!(
            (mean - 0.75).abs() < 0.02 * 0.75,
            "empirical mean {mean} too far from 0.75"
        );
    }

    #[test]
    fn cholesky_identity() {
        let l = cholesky(&Matrix::identity(4, 4)).unwrap();
        assert_relative_eq!(l, Matrix::identity(4, 4), epsilon = 1e-14);
    }

    #[test]
    fn cholesky_reconstructs_two_by_two() {
        let c = Matrix::from_row_slice(2, 2, &[4.0, 2.0, 2.0, 3.0]);
        let l = cholesky(&c).unwrap();
        let back = &l * l.transpose();
        assert!((&back - &c).abs().max() <= 1e-12);
    }

    #[test]
    fn cholesky_rejects_indefinite() {
        let c = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 1.0]);
        assert!(matches!(cholesky(&c), Err(Error::NotPositiveDefinite)));
    }

    #[test]
    fn cholesky_rejects_asymmetric() {
        let c = Matrix::from_row_slice(2, 2, &[1.0, 0.5, 0.0, 1.0]);
        assert!(matches!(cholesky(&c), Err(Error::NotSymmetric)));
    }

    #[test]
    fn cholesky_roundtrip_random_pd() {
        let mut rng = Rng::new(23);
        for i in 0..1000 {
            let n = 1 + (i % 20);
            let c = random_pd(n, &mut rng);
            let l = cholesky(&c).unwrap();
            let back = &l * l.transpose();
            let err = (&back - &c).abs().max() / c.abs().max();
            assert!(err <= 1e-10, "relative reconstruction error {err} at n={n}");
        }
    }

    #[test]
    fn repair_makes_degenerate_covariance_factorizable() {
        // Rank-one matrix: eigenvalues (2, 0), not PD.
        let c = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(cholesky(&c).is_err());
        let repaired = repair_covariance(&c);
        assert!(cholesky(&repaired).is_ok());
    }

    #[test]
    fn log_density_zero_at_mean() {
        let m = Vector::from_vec(vec![1.0, 2.0]);
        let c = random_pd(2, &mut Rng::new(29));
        assert_eq!(gaussian_log_density(&m, &m, 0.7, &c).unwrap(), 0.0);
    }

    #[test]
    fn log_density_isotropic_unit_case() {
        let m = Vector::zeros(3);
        let x = Vector::from_vec(vec![1.0, 0.0, 0.0]);
        let v = gaussian_log_density(&x, &m, 1.0, &Matrix::identity(3, 3)).unwrap();
        assert_relative_eq!(v, -0.5, epsilon = 1e-14);
    }

    #[test]
    fn log_density_matches_dense_inverse_oracle() {
        let mut rng = Rng::new(31);
        for _ in 0..50 {
            let n = 2 + rng.index(6);
            let c = random_pd(n, &mut rng);
            let m = rng.standard_normal_vector(n);
            let x = rng.standard_normal_vector(n);
            let sigma = 0.5 + rng.uniform();

            let d = &x - &m;
            let oracle = -(d.transpose() * c.clone().try_inverse().unwrap() * &d)[(0, 0)]
                / (2.0 * sigma * sigma);
            let got = gaussian_log_density(&x, &m, sigma, &c).unwrap();
            assert!(
                (got - oracle).abs() <= 1e-10 * oracle.abs().max(1.0),
                "mismatch: {got} vs {oracle}"
            );
        }
    }

    #[test]
    fn log_density_rejects_singular() {
        let c = Matrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        let m = Vector::zeros(2);
        let x = Vector::from_vec(vec![1.0, 0.0]);
        assert!(matches!(
            gaussian_log_density(&x, &m, 1.0, &c),
            Err(Error::SingularCovariance)
        ));
    }

    #[test]
    fn seeded_streams_are_identical() {
        let mut a = Rng::new(12345);
        let mut b = Rng::new(12345);
        for _ in 0..1000 {
            assert_eq!(a.next_u64(), b.next_u64());
        }
    }

    #[test]
    fn split_streams_are_stable_and_distinct() {
        let parent = Rng::new(99);
        let mut consumed = Rng::new(99);
        for _ in 0..17 {
            consumed.next_u64();
        }
        // Splitting depends only on (seed, tag), not on consumption.
        let mut s1 = parent.split(1);
        let mut s1b = consumed.split(1);
        let mut s2 = parent.split(2);
        let a: Vec<u64> = (0..8).map(|_| s1.next_u64()).collect();
        let b: Vec<u64> = (0..8).map(|_| s1b.next_u64()).collect();
        let c: Vec<u64> = (0..8).map(|_| s2.next_u64()).collect();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    proptest! {
        #[test]
        fn ball_samples_stay_inside(seed in 0u64..1000, n in 1usize..12, eps in 0.0f64..3.0) {
            let mut rng = Rng::new(seed);
            let center = rng.standard_normal_vector(n);
            let x = sample_ball(&center, eps, &mut rng).unwrap();
            prop_assert!((&x - &center).norm() <= eps);
        }
    }
}
