//! Independent dense oracles built from the local projector matrices.
#![allow(dead_code)]

use ffprep::num::Complex;
use ffprep::LayeredModel;
use nalgebra::DMatrix;

pub type C = Complex<f64>;

pub fn c(re: f64) -> C {
    Complex::new(re, 0.0)
}

/// A local operator on `support` lifted to the model's sector by pairing configurations.
pub fn embed(m: &LayeredModel, support: &[usize], local: &DMatrix<C>) -> DMatrix<C> {
    let b = m.basis();
    let n = b.len();
    DMatrix::from_fn(n, n, |r, col| {
        let (a, z) = (b.config(r), b.config(col));
        let outside_equal = (0..b.n_sites()).filter(|s| !support.contains(s)).all(|s| a.get(s) == z.get(s));
        if outside_equal {
            local[(a.extract(support), z.extract(support))]
        } else {
            c(0.0)
        }
    })
}

/// Global matrix of term `i`.
pub fn term_matrix(m: &LayeredModel, i: usize) -> DMatrix<C> {
    let t = &m.terms()[i];
    embed(m, &t.support, &t.local_matrix())
}

/// Global matrix of term `i`'s feedback correction.
pub fn correction_matrix(m: &LayeredModel, i: usize) -> DMatrix<C> {
    let t = &m.terms()[i];
    embed(m, &t.support, &t.correction_matrix())
}

pub fn dense_h(m: &LayeredModel) -> DMatrix<C> {
    let n = m.dim();
    (0..m.terms().len()).fold(DMatrix::zeros(n, n), |acc, i| acc + term_matrix(m, i))
}

pub fn as_vector(amps: &[C]) -> nalgebra::DVector<C> {
    nalgebra::DVector::from_column_slice(amps)
}

pub fn expectation(h: &DMatrix<C>, amps: &[C]) -> f64 {
    let v = as_vector(amps);
    (v.adjoint() * h * &v)[(0, 0)].re
}

/// Ascending real eigenvalues of a hermitian matrix.
pub fn eigenvalues(h: &DMatrix<C>) -> Vec<f64> {
    let mut e: Vec<f64> = h.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
    e.sort_by(f64::total_cmp);
    e
}
