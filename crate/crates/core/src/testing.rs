//! Test-only fixtures and independent numeric oracles.

use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::estimators::Dataset;

pub fn normal<R: Rng>(rng: &mut R) -> f64 {
    StandardNormal.sample(rng)
}

/// Gaussian design with `y = X beta + noise_sd * z`.
pub fn random_dataset<R: Rng>(
    rng: &mut R,
    n: usize,
    p: usize,
    beta: Option<&DVector<f64>>,
    noise_sd: f64,
) -> (Dataset, DVector<f64>) {
    let x = DMatrix::from_fn(n, p, |_, _| normal(rng));
    let beta = beta.cloned().unwrap_or_else(|| DVector::from_fn(p, |_, _| normal(rng)));
    let y = &x * &beta + DVector::from_fn(n, |_, _| noise_sd * normal(rng));
    (Dataset::new(x, y).unwrap(), beta)
}

/// Random symmetric PD matrix with anisotropic scales.
pub fn random_spd<R: Rng>(rng: &mut R, p: usize) -> DMatrix<f64> {
    let a = DMatrix::from_fn(p, p, |_, _| normal(rng));
    let scales = DVector::from_fn(p, |_, _| (1.5 * normal(rng)).exp());
    let s = DMatrix::from_diagonal(&scales);
    let m = &s * (&a * a.transpose() + DMatrix::identity(p, p) * 0.1) * &s;
    (&m + m.transpose()) * 0.5
}

/// Gradient-free compass search; halves the step whenever no axis move improves.
pub fn compass_minimize<F: Fn(&[f64]) -> f64>(f: F, x0: &[f64], step: f64, tol: f64) -> Vec<f64> {
    let mut x = x0.to_vec();
    let mut fx = f(&x);
    let mut h = step;
    while h > tol {
        let mut improved = false;
        for i in 0..x.len() {
            for dir in [1.0, -1.0] {
                let mut cand = x.clone();
                cand[i] += dir * h;
                let fc = f(&cand);
                if fc < fx {
                    x = cand;
                    fx = fc;
                    improved = true;
                }
            }
        }
        if !improved {
            h *= 0.5;
        }
    }
    x
}
