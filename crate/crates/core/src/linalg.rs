//! Dense eigensolver wrappers and a matrix-free conjugate gradient.

use nalgebra::{ComplexField, DMatrix, SymmetricEigen};
use num_complex::Complex64;

use crate::error::{Error, Result};

/// Eigen-pairs of a real symmetric matrix, eigenvalues descending.
pub fn sym_eigen_desc(m: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    check_finite(m.iter().copied())?;
    let sym = (m + m.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    Ok(sort_pairs(&eig, true))
}

/// Eigen-pairs of a Hermitian matrix, eigenvalues ascending.
pub fn herm_eigen_asc(m: &DMatrix<Complex64>) -> Result<(Vec<f64>, DMatrix<Complex64>)> {
    check_finite(m.iter().map(|v| v.re + v.im))?;
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    Ok(sort_pairs(&eig, false))
}

fn sort_pairs<T: ComplexField<RealField = f64>>(
    eig: &SymmetricEigen<T, nalgebra::Dyn>,
    descending: bool,
) -> (Vec<f64>, DMatrix<T>) {
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&a, &b| {
        let ord = eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]);
        if descending {
            ord.reverse()
        } else {
            ord
        }
    });
    let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let vectors = DMatrix::from_fn(eig.eigenvectors.nrows(), order.len(), |r, c| {
        eig.eigenvectors[(r, order[c])].clone()
    });
    (values, vectors)
}

/// `U f(diag(s)) U^T` for a symmetric eigendecomposition.
pub fn spectral_apply(values: &[f64], vectors: &DMatrix<f64>, f: impl Fn(f64) -> f64) -> DMatrix<f64> {
    let scaled = DMatrix::from_fn(vectors.nrows(), vectors.ncols(), |r, c| vectors[(r, c)] * f(values[c]));
    let out = scaled * vectors.transpose();
    (&out + out.transpose()) * 0.5
}

fn check_finite(mut it: impl Iterator<Item = f64>) -> Result<()> {
    if it.all(f64::is_finite) {
        Ok(())
    } else {
        Err(Error::NumericalFailure("matrix has non-finite entries".into()))
    }
}

/// Outcome of a conjugate-gradient solve.
#[derive(Debug, Clone)]
pub struct CgOutcome {
    pub x: DMatrix<f64>,
    pub iterations: usize,
    pub relative_residual: f64,
    pub converged: bool,
}

fn dot(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| x * y).sum()
}

fn axpy(y: &mut DMatrix<f64>, a: f64, x: &DMatrix<f64>) {
    y.zip_apply(x, |yi, xi| *yi += a * xi);
}

/// Conjugate gradient for `op(X) = rhs` with `op` symmetric positive
/// semidefinite under the Frobenius inner product. Returns the iterate with
/// the smallest residual seen when the tolerance is not reached.
pub fn conjugate_gradient(
    mut op: impl FnMut(&DMatrix<f64>) -> DMatrix<f64>,
    rhs: &DMatrix<f64>,
    x0: &DMatrix<f64>,
    tol: f64,
    max_iters: usize,
) -> CgOutcome {
    let rhs_norm = rhs.norm();
    if rhs_norm == 0.0 {
        return CgOutcome {
            x: DMatrix::zeros(rhs.nrows(), rhs.ncols()),
            iterations: 0,
            relative_residual: 0.0,
            converged: true,
        };
    }
    let mut x = x0.clone();
    let mut r = rhs - op(&x);
    let mut rs = dot(&r, &r);
    let mut best = (rs.sqrt() / rhs_norm, x.clone());
    if best.0 < tol {
        return CgOutcome {
            x,
            iterations: 0,
            relative_residual: best.0,
            converged: true,
        };
    }
    let mut p = r.clone();
    for it in 1..=max_iters {
        let ap = op(&p);
        let pap = dot(&p, &ap);
        #[allow(clippy::neg_cmp_op_on_partial_ord)]
        if !(pap > 0.0) {
            break;
        }
        let alpha = rs / pap;
        axpy(&mut x, alpha, &p);
        axpy(&mut r, -alpha, &ap);
        let rs_new = dot(&r, &r);
        let rel = rs_new.sqrt() / rhs_norm;
        if rel < best.0 {
            best = (rel, x.clone());
        }
        if rel < tol {
            return CgOutcome {
                x,
                iterations: it,
                relative_residual: rel,
                converged: true,
            };
        }
        let beta = rs_new / rs;
        p.zip_apply(&r, |pi, ri| *pi = ri + beta * *pi);
        rs = rs_new;
    }
    CgOutcome {
        x: best.1,
        iterations: max_iters,
        relative_residual: best.0,
        converged: false,
    }
}
