//! Small dense linear-algebra helpers shared by the other modules.

#[allow(unused_imports)] // inherent float methods shadow these when std is linked
use num_traits::Float;
use alloc::vec::Vec;
use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{bail, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

pub fn trace(m: &Matrix) -> f64 {
    m.diagonal().sum()
}

/// Frobenius inner product `<A, B> = Tr(AᵀB)`.
pub fn inner(a: &Matrix, b: &Matrix) -> f64 {
    a.dot(b)
}

pub fn frob_sq(m: &Matrix) -> f64 {
    m.norm_squared()
}

pub fn symmetrize(m: &Matrix) -> Matrix {
    (m + m.transpose()) * 0.5
}

/// Largest absolute entry of `m - mᵀ`.
pub fn asymmetry(m: &Matrix) -> f64 {
    let mut worst = 0.0_f64;
    for j in 0..m.ncols() {
        for i in 0..j {
            worst = worst.max((m[(i, j)] - m[(j, i)]).abs());
        }
    }
    worst
}

pub fn is_finite(m: &Matrix) -> bool {
    m.iter().all(|x| x.is_finite())
}

/// Eigen-decomposition of a symmetric matrix with eigenvalues sorted in
/// descending order. Ties keep the solver's order (stable sort).
pub fn eigh_desc(m: &Matrix) -> Result<(Vector, Matrix)> {
    if m.nrows() != m.ncols() {
        bail!(Argument, "eigh on non-square {}x{} matrix", m.nrows(), m.ncols());
    }
    if !is_finite(m) {
        bail!(Numeric, "eigh on matrix with non-finite entries");
    }
    let n = m.nrows();
    if n == 0 {
        return Ok((Vector::zeros(0), Matrix::zeros(0, 0)));
    }
    let eig = SymmetricEigen::new(symmetrize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| {
        eig.eigenvalues[b]
            .partial_cmp(&eig.eigenvalues[a])
            .unwrap_or(core::cmp::Ordering::Equal)
    });
    let values = Vector::from_iterator(n, order.iter().map(|&k| eig.eigenvalues[k]));
    let mut vectors = Matrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    Ok((values, vectors))
}

pub fn eigvals_desc(m: &Matrix) -> Result<Vector> {
    Ok(eigh_desc(m)?.0)
}

/// Spectral norm of a symmetric matrix.
pub fn op_norm_sym(m: &Matrix) -> Result<f64> {
    let vals = eigvals_desc(m)?;
    Ok(vals.iter().fold(0.0_f64, |acc, v| acc.max(v.abs())))
}

/// Applies `f` to the spectrum of a symmetric matrix.
pub fn sym_apply(m: &Matrix, f: impl Fn(f64) -> f64) -> Result<Matrix> {
    let (vals, vecs) = eigh_desc(m)?;
    let mapped = Vector::from_iterator(vals.len(), vals.iter().map(|&v| f(v)));
    let scaled = &vecs * Matrix::from_diagonal(&mapped);
    Ok(symmetrize(&(scaled * vecs.transpose())))
}

/// Symmetric square root of a PSD matrix; tiny negative eigenvalues from
/// round-off are clamped to zero.
pub fn sym_sqrt(m: &Matrix) -> Result<Matrix> {
    let (vals, _) = eigh_desc(m)?;
    let scale = vals.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()));
    if vals.iter().any(|&v| v < -1e-10 * scale) {
        bail!(Assumption, "matrix is not positive semidefinite (min eigenvalue {:e})", vals.min());
    }
    sym_apply(m, |v| v.max(0.0).sqrt())
}

/// Inverse symmetric square root of a positive definite matrix.
pub fn sym_inv_sqrt(m: &Matrix) -> Result<Matrix> {
    let (vals, _) = eigh_desc(m)?;
    if vals.iter().any(|&v| v <= 0.0) {
        bail!(Assumption, "matrix is not positive definite (min eigenvalue {:e})", vals.min());
    }
    sym_apply(m, |v| 1.0 / v.sqrt())
}

pub fn cholesky(m: &Matrix) -> Result<Cholesky<f64, Dyn>> {
    match Cholesky::new(symmetrize(m)) {
        Some(c) => Ok(c),
        None => bail!(Numeric, "Cholesky factorization failed (matrix not positive definite)"),
    }
}

/// Solves `(U + ridge I) x = v` for symmetric positive (semi)definite `U`,
/// multiplying the ridge by ten on each failed factorization.
pub fn spd_solve(u: &Matrix, v: &Vector, ridge: f64) -> Result<Vector> {
    let n = u.nrows();
    let floor = if ridge > 0.0 { ridge } else { 1e-14 * (trace(u).abs() / n.max(1) as f64).max(1e-300) };
    let mut lambda = ridge.max(0.0);
    for _ in 0..12 {
        let mut shifted = symmetrize(u);
        for i in 0..n {
            shifted[(i, i)] += lambda;
        }
        if let Some(chol) = Cholesky::new(shifted) {
            let x = chol.solve(v);
            if x.iter().all(|t| t.is_finite()) {
                return Ok(x);
            }
        }
        lambda = if lambda == 0.0 { floor } else { lambda * 10.0 };
    }
    bail!(Numeric, "positive-definite solve failed after ridge escalation to {:e}", lambda)
}

/// Projector onto the orthogonal complement of the column space of `w`
/// (full column rank required).
pub fn complement_projector(w: &Matrix) -> Result<Matrix> {
    let d = w.nrows();
    let gram = w.transpose() * w;
    let chol = match Cholesky::new(symmetrize(&gram)) {
        Some(c) => c,
        None => bail!(Numeric, "weight matrix is rank deficient"),
    };
    let proj = w * chol.solve(&w.transpose());
    Ok(symmetrize(&(Matrix::identity(d, d) - proj)))
}

pub fn gaussian_matrix<R: Rng + ?Sized>(rng: &mut R, rows: usize, cols: usize) -> Matrix {
    // column-major fill so the draw order is fixed for a given shape
    let mut m = Matrix::zeros(rows, cols);
    for j in 0..cols {
        for i in 0..rows {
            m[(i, j)] = rng.sample(StandardNormal);
        }
    }
    m
}

/// Haar-distributed orthogonal matrix (QR of a Gaussian matrix with the
/// sign of `R`'s diagonal absorbed into `Q`).
pub fn random_orthogonal<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Matrix {
    if n == 0 {
        return Matrix::zeros(0, 0);
    }
    let g = gaussian_matrix(rng, n, n);
    let qr = g.qr();
    let mut q = qr.q();
    let r = qr.r();
    for j in 0..n {
        if r[(j, j)] < 0.0 {
            let mut col = q.column_mut(j);
            col.neg_mut();
        }
    }
    q
}
