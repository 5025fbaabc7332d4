//! Thin complex linear-algebra helpers on top of nalgebra.

use nalgebra::{Cholesky, DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;
pub type CVec = DVector<Complex64>;

/// Condition-number threshold above which Gram matrices get a ridge.
pub const CONDITION_LIMIT: f64 = 1e12;

pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn frob_sq(m: &CMat) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

pub fn vec_norm_sq(v: &CVec) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum()
}

/// Real part of the Frobenius inner product `Re tr(a^H b)`.
pub fn inner_re(a: &CMat, b: &CMat) -> f64 {
    debug_assert_eq!(a.shape(), b.shape());
    a.iter().zip(b.iter()).map(|(x, y)| (x.conj() * y).re).sum()
}

/// `a^H b` for two column vectors.
pub fn dot_h(a: &CVec, b: &CVec) -> Complex64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues sorted descending.
pub fn hermitian_eig(m: &CMat) -> (Vec<f64>, CMat) {
    let n = m.nrows();
    // symmetrize to keep the solver on the Hermitian path
    let h = (m + m.adjoint()) * c(0.5, 0.0);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[j].total_cmp(&eig.eigenvalues[i]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMat::from_fn(n, n, |r, k| eig.eigenvectors[(r, order[k])]);
    (values, vectors)
}

/// Largest eigenvalue of a Hermitian positive semidefinite matrix.
pub fn spectral_norm_psd(m: &CMat) -> f64 {
    if m.nrows() == 0 {
        return 0.0;
    }
    hermitian_eig(m).0[0].max(0.0)
}

fn real_trace(m: &CMat) -> f64 {
    m.diagonal().iter().map(|z| z.re).sum()
}

/// Inverse of a Hermitian positive (semi)definite Gram matrix. A ridge of
/// `1e-10 * trace / n` is added when the matrix is singular or its
/// condition number exceeds [`CONDITION_LIMIT`].
pub fn gram_inverse(g: &CMat) -> CMat {
    let n = g.nrows();
    let (vals, _) = hermitian_eig(g);
    let max = vals.first().copied().unwrap_or(0.0);
    let min = vals.last().copied().unwrap_or(0.0);
    let ill = max <= 0.0 || min <= max / CONDITION_LIMIT;
    let mut work = g.clone();
    if ill {
        let ridge = 1e-10 * real_trace(g).max(f64::MIN_POSITIVE) / n as f64;
        for i in 0..n {
            work[(i, i)] += c(ridge, 0.0);
        }
    }
    match Cholesky::new(work.clone()) {
        Some(ch) => ch.inverse(),
        None => work
            .try_inverse()
            .unwrap_or_else(|| CMat::zeros(n, n)),
    }
}

/// Column `k` of `m` as an owned vector.
pub fn col(m: &CMat, k: usize) -> CVec {
    m.column(k).into_owned()
}
