//! Dense reference solutions shared by the integration tests.
#![allow(dead_code)]

use korn_shell::discretization::AssembledForms;
use nalgebra::{DMatrix, DVector};

/// Smallest eigenvalue of the dense symmetric-definite pencil `(a, b)`.
pub fn dense_min(a: &DMatrix<f64>, b: &DMatrix<f64>) -> f64 {
    let l = b.clone().cholesky().expect("denominator must be positive definite");
    let li = l.l().try_inverse().expect("invertible factor");
    let c = &li * a * li.transpose();
    (0.5 * (&c + c.transpose())).symmetric_eigenvalues().min()
}

/// `B − (2/|Ω|) Σ c_k c_kᵀ`.
pub fn dense_corrected_b(forms: &AssembledForms) -> DMatrix<f64> {
    let mut bp = forms.b.to_dense();
    for c in &forms.skew {
        let cv = DVector::from_column_slice(c);
        bp -= (2.0 / forms.volume) * &cv * cv.transpose();
    }
    bp
}

/// Korn pencil minimum by dense linear algebra: directly on clamped shells,
/// on the M-orthogonal complement of `rigid` on closed ones.
pub fn dense_korn(forms: &AssembledForms, rigid: &[Vec<f64>]) -> f64 {
    let a = forms.a.to_dense();
    if rigid.is_empty() {
        return dense_min(&a, &forms.b.to_dense());
    }
    let n = forms.dim();
    let k = rigid.len();
    let r = DMatrix::from_fn(n, k, |i, j| rigid[j][i]);
    let mr = forms.m.to_dense() * r;
    let e = (&mr * mr.transpose()).symmetric_eigen();
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by(|&i, &j| e.eigenvalues[i].total_cmp(&e.eigenvalues[j]));
    let q = DMatrix::from_fn(n, n - k, |i, j| e.eigenvectors[(i, idx[j])]);
    let ar = q.transpose() * a * &q;
    let br = q.transpose() * dense_corrected_b(forms) * &q;
    dense_min(&ar, &br)
}
