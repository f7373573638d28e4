//! Small dense complex linear-algebra helpers on top of nalgebra.

use nalgebra::{DMatrix, Schur, SymmetricEigen};
use num_complex::Complex64 as C64;

pub type CMatrix = DMatrix<C64>;

pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

pub fn max_abs_deviation(a: &CMatrix, b: &CMatrix) -> f64 {
    assert_eq!(a.shape(), b.shape(), "shape mismatch");
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn max_abs_deviation_from_identity(m: &CMatrix) -> f64 {
    let (r, c) = m.shape();
    let mut dev = 0.0f64;
    for i in 0..r {
        for j in 0..c {
            let target = if i == j { 1.0 } else { 0.0 };
            dev = dev.max((m[(i, j)] - C64::new(target, 0.0)).norm());
        }
    }
    dev
}

/// `m m†`, computed from the real and imaginary parts so the products run through
/// the optimized real kernel.
pub fn mul_adjoint(m: &CMatrix) -> CMatrix {
    let a = m.map(|z| z.re);
    let b = m.map(|z| z.im);
    let re = &a * a.transpose() + &b * b.transpose();
    let im = &b * a.transpose() - &a * b.transpose();
    re.zip_map(&im, C64::new)
}

/// `‖m m† − I‖_max`.
pub fn unitarity_deviation(m: &CMatrix) -> f64 {
    max_abs_deviation_from_identity(&mul_adjoint(m))
}

pub fn hermiticity_deviation(m: &CMatrix) -> f64 {
    max_abs_deviation(m, &m.adjoint())
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

/// Eigen-decomposition of a Hermitian matrix; eigenvalues ascending, eigenvectors as
/// matching columns.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let h = (m + m.adjoint()).scale(0.5);
    let eig = SymmetricEigen::new(h);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = CMatrix::from_fn(m.nrows(), order.len(), |r, c| eig.eigenvectors[(r, order[c])]);
    (values, vectors)
}

/// Eigen-decomposition of a normal (in practice unitary) matrix through its complex
/// Schur form, which is diagonal for normal input. Returns eigenvalues, the unitary
/// whose columns are eigenvectors, and the largest off-diagonal magnitude left in the
/// triangular factor.
pub fn normal_eigen(m: &CMatrix) -> (Vec<C64>, CMatrix, f64) {
    let (q, t) = Schur::new(m.clone()).unpack();
    let n = t.nrows();
    let mut off = 0.0f64;
    for i in 0..n {
        for j in (i + 1)..n {
            off = off.max(t[(i, j)].norm());
        }
    }
    let values = (0..n).map(|i| t[(i, i)]).collect();
    (values, q, off)
}

/// Matrix exponential (scaling and squaring with Padé approximants).
pub fn expm(m: &CMatrix) -> CMatrix {
    m.exp()
}
