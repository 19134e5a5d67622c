//! Dense complex helpers for the handful of small matrices the simulator
//! touches (at most 12x12).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

pub type C64 = Complex64;
pub type CMatrix = DMatrix<C64>;
pub type CVector = DVector<C64>;

/// Tolerance for algebraic identities (hermiticity, trace, norms).
pub const ALGEBRA_TOL: f64 = 1e-12;
/// Floor below which an eigenvalue counts as negative.
pub const PSD_TOL: f64 = 1e-10;

#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

#[inline]
pub fn cr(re: f64) -> C64 {
    C64::new(re, 0.0)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

pub fn kron_vec(a: &CVector, b: &CVector) -> CVector {
    a.kronecker(b)
}

/// `|u><v|`
pub fn outer(u: &CVector, v: &CVector) -> CMatrix {
    u * v.adjoint()
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().iter().sum()
}

pub fn is_hermitian(m: &CMatrix, tol: f64) -> bool {
    m.is_square() && (0..m.nrows()).all(|i| (0..=i).all(|j| (m[(i, j)] - m[(j, i)].conj()).norm() <= tol))
}

/// `(m + m^dagger) / 2`
pub fn hermitian_part(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()).scale(0.5)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
/// Column `k` of the returned matrix is the eigenvector for eigenvalue `k`.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let eig = SymmetricEigen::new(hermitian_part(m));
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(m.nrows(), m.ncols());
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    hermitian_eigen(m).0
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_map(m: &CMatrix, f: impl Fn(f64) -> f64) -> CMatrix {
    let (values, vectors) = hermitian_eigen(m);
    let diag = CMatrix::from_diagonal(&CVector::from_iterator(values.len(), values.iter().map(|&x| cr(f(x)))));
    &vectors * diag * vectors.adjoint()
}

/// Mixed-radix digits of `index`, most significant factor first.
pub(crate) fn digits(mut index: usize, dims: &[usize]) -> Vec<usize> {
    let mut out = vec![0; dims.len()];
    for (slot, &d) in out.iter_mut().zip(dims).rev() {
        *slot = index % d;
        index /= d;
    }
    out
}

pub(crate) fn compose(digits: &[usize], dims: &[usize]) -> usize {
    digits.iter().zip(dims).fold(0, |acc, (&x, &d)| acc * d + x)
}

/// Lifts an operator acting on the factors at `targets` (in the listed order)
/// to the full tensor space. `local` maps the product of `in_dims[targets]`
/// onto the product of `local_out`; non-target factors pass through.
pub(crate) fn lift(local: &CMatrix, in_dims: &[usize], targets: &[usize], local_out: &[usize]) -> CMatrix {
    let out_dims: Vec<usize> = {
        let mut d = in_dims.to_vec();
        for (&t, &o) in targets.iter().zip(local_out) {
            d[t] = o;
        }
        d
    };
    let local_in: Vec<usize> = targets.iter().map(|&t| in_dims[t]).collect();
    let d_in: usize = in_dims.iter().product();
    let d_out: usize = out_dims.iter().product();
    let mut full = CMatrix::zeros(d_out, d_in);
    for col in 0..d_in {
        let dig = digits(col, in_dims);
        let t_in: Vec<usize> = targets.iter().map(|&t| dig[t]).collect();
        let t_col = compose(&t_in, &local_in);
        for t_row in 0..local.nrows() {
            let amp = local[(t_row, t_col)];
            if amp == C64::default() {
                continue;
            }
            let mut out = dig.clone();
            for (&t, &x) in targets.iter().zip(digits(t_row, local_out).iter()) {
                out[t] = x;
            }
            full[(compose(&out, &out_dims), col)] += amp;
        }
    }
    full
}
