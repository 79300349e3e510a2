//! Small dense linear-algebra helpers shared by the estimators and the
//! covariance pipeline. Everything operates on `nalgebra` dynamic matrices.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};

use crate::error::{Error, Result};

/// Singular values below this fraction of the largest count as zero.
pub const RANK_TOLERANCE: f64 = 1e-10;

/// Relative Cholesky pivot (`L_ii^2 / G_ii`) below which a Gram matrix is
/// treated as rank deficient. Used where only `X'X` is available.
pub const GRAM_PIVOT_TOLERANCE: f64 = 1e-12;

pub fn gram(x: &DMatrix<f64>) -> DMatrix<f64> {
    x.tr_mul(x)
}

pub fn trace(a: &DMatrix<f64>) -> f64 {
    a.diagonal().sum()
}

/// `tr(A B)` without forming the product.
pub fn trace_of_product(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let mut acc = 0.0;
    for i in 0..a.nrows() {
        for k in 0..a.ncols() {
            acc += a[(i, k)] * b[(k, i)];
        }
    }
    acc
}

pub fn frobenius(a: &DMatrix<f64>) -> f64 {
    a.norm()
}

/// Column-rank check on a design matrix through its singular values.
pub fn check_full_column_rank(x: &DMatrix<f64>) -> Result<()> {
    if x.ncols() == 0 || x.nrows() < x.ncols() {
        return Err(Error::RankDeficient { tolerance: RANK_TOLERANCE, fold: None });
    }
    let sv = x.clone().singular_values();
    let max = sv.max();
    if !(max > 0.0) || sv.iter().any(|&s| s <= RANK_TOLERANCE * max) {
        return Err(Error::RankDeficient { tolerance: RANK_TOLERANCE, fold: None });
    }
    Ok(())
}

/// Cholesky factorization of a symmetric PD matrix. On failure a single
/// diagonal jitter of `1e-12 * tr / p` is added before giving up.
pub fn cholesky_with_jitter(a: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    if let Some(c) = Cholesky::new(a.clone()) {
        return Some(c);
    }
    let p = a.nrows();
    let tr = trace(a);
    if !(tr > 0.0) {
        return None;
    }
    let mut jittered = a.clone();
    let eps = 1e-12 * tr / p as f64;
    for i in 0..p {
        jittered[(i, i)] += eps;
    }
    Cholesky::new(jittered)
}

pub fn solve_spd(a: &DMatrix<f64>, b: &DVector<f64>) -> Result<DVector<f64>> {
    let chol = cholesky_with_jitter(a).ok_or(Error::SingularSystem)?;
    Ok(chol.solve(b))
}

pub fn spd_inverse(a: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = cholesky_with_jitter(a).ok_or(Error::SingularSystem)?;
    Ok(symmetrize(&chol.inverse()))
}

/// General (non-symmetric) square solve via partial-pivot LU.
pub fn solve_general(a: &DMatrix<f64>, b: &DVector<f64>) -> Option<DVector<f64>> {
    let lu = a.clone().lu();
    let x = lu.solve(b)?;
    if x.iter().all(|v| v.is_finite()) {
        Some(x)
    } else {
        None
    }
}

pub fn inverse_general(a: &DMatrix<f64>) -> Option<DMatrix<f64>> {
    let inv = a.clone().try_inverse()?;
    if inv.iter().all(|v| v.is_finite()) {
        Some(inv)
    } else {
        None
    }
}

/// True when `g` factors with every relative pivot above
/// [`GRAM_PIVOT_TOLERANCE`]. Returns the factor on success.
pub fn gram_factor(g: &DMatrix<f64>) -> Option<Cholesky<f64, Dyn>> {
    let chol = Cholesky::new(g.clone())?;
    let l = chol.l_dirty();
    for i in 0..g.nrows() {
        let gii = g[(i, i)];
        if !(gii > 0.0) || l[(i, i)] * l[(i, i)] < GRAM_PIVOT_TOLERANCE * gii {
            return None;
        }
    }
    Some(chol)
}

pub fn symmetrize(a: &DMatrix<f64>) -> DMatrix<f64> {
    (a + a.transpose()) * 0.5
}

/// Largest `|A_ij - A_ji|` relative to the largest entry magnitude.
pub fn relative_asymmetry(a: &DMatrix<f64>) -> f64 {
    let scale = a.amax();
    if scale == 0.0 {
        return 0.0;
    }
    let mut worst: f64 = 0.0;
    for i in 0..a.nrows() {
        for j in (i + 1)..a.ncols() {
            worst = worst.max((a[(i, j)] - a[(j, i)]).abs());
        }
    }
    worst / scale
}

pub fn symmetric_eigen(a: &DMatrix<f64>) -> SymmetricEigen<f64, Dyn> {
    SymmetricEigen::new(a.clone())
}

pub fn outer(v: &DVector<f64>) -> DMatrix<f64> {
    v * v.transpose()
}

/// Log-spaced grid of `count` points between `10^lo` and `10^hi`.
pub fn logspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![10f64.powf(lo)],
        _ => (0..count).map(|k| 10f64.powf(lo + (hi - lo) * k as f64 / (count - 1) as f64)).collect(),
    }
}
