//! Sparse Cholesky of a [`SymCsr`], optionally with pinned rows removed.

use faer::linalg::solvers::SolveCore;
use faer::sparse::linalg::solvers::{Llt, SymbolicLlt};
use faer::{Mat, Side};

use crate::discretization::SymCsr;
use crate::error::{KornError, Result};

pub(crate) struct Factor {
    llt: Llt<u32, f64>,
    /// Full index → factored index; `None` for pinned rows.
    map: Option<Vec<Option<usize>>>,
    n_full: usize,
    n_red: usize,
}

impl Factor {
    pub(crate) fn new(a: &SymCsr, pinned: &[usize]) -> Result<Self> {
        let n_full = a.dim();
        let (mat, map) = if pinned.is_empty() {
            (None, None)
        } else {
            let mut keep = vec![true; n_full];
            for &p in pinned {
                keep[p] = false;
            }
            let (sub, map) = a.principal_submatrix(&keep)?;
            (Some(sub), Some(map))
        };
        let target = mat.as_ref().unwrap_or(a);
        let view = target.as_faer_upper();
        let symbolic = SymbolicLlt::try_new(view.symbolic(), Side::Upper)
            .map_err(|e| KornError::Factorization(format!("{e:?}")))?;
        let llt = Llt::try_new_with_symbolic(symbolic, view, Side::Upper).map_err(|e| {
            KornError::Factorization(format!(
                "numerator form is not positive definite on the admissible space ({e:?})"
            ))
        })?;
        Ok(Factor {
            llt,
            map,
            n_full,
            n_red: target.dim(),
        })
    }

    /// Solve for each column; pinned entries of the result are zero.
    pub(crate) fn solve_block(&self, rhs: &[Vec<f64>]) -> Vec<Vec<f64>> {
        let b = rhs.len();
        let mut m = Mat::<f64>::zeros(self.n_red, b);
        for (j, col) in rhs.iter().enumerate() {
            match &self.map {
                None => {
                    for (i, &x) in col.iter().enumerate() {
                        m[(i, j)] = x;
                    }
                }
                Some(map) => {
                    for (i, &x) in col.iter().enumerate() {
                        if let Some(r) = map[i] {
                            m[(r, j)] = x;
                        }
                    }
                }
            }
        }
        self.llt.solve_in_place_with_conj(faer::Conj::No, m.as_mut());
        (0..b)
            .map(|j| {
                let mut out = vec![0.0; self.n_full];
                match &self.map {
                    None => {
                        for (i, o) in out.iter_mut().enumerate() {
                            *o = m[(i, j)];
                        }
                    }
                    Some(map) => {
                        for (i, o) in out.iter_mut().enumerate() {
                            if let Some(r) = map[i] {
                                *o = m[(r, j)];
                            }
                        }
                    }
                }
                out
            })
            .collect()
    }
}

/// Rows on which the columns of `basis` are best conditioned (greedy
/// column-pivoted QR on the transposed basis).
pub(crate) fn pivot_rows(basis: &[Vec<f64>]) -> Vec<usize> {
    let k = basis.len();
    if k == 0 {
        return Vec::new();
    }
    let n = basis[0].len();
    // rows as k-vectors
    let mut rows: Vec<Vec<f64>> = (0..n).map(|i| basis.iter().map(|b| b[i]).collect()).collect();
    let mut chosen = Vec::with_capacity(k);
    for _ in 0..k {
        let (best, _) = rows
            .iter()
            .enumerate()
            .filter(|(i, _)| !chosen.contains(i))
            .map(|(i, r)| (i, r.iter().map(|x| x * x).sum::<f64>()))
            .fold((usize::MAX, -1.0), |acc, x| if x.1 > acc.1 { x } else { acc });
        chosen.push(best);
        let norm = rows[best].iter().map(|x| x * x).sum::<f64>().sqrt();
        let q: Vec<f64> = rows[best].iter().map(|x| x / norm).collect();
        for r in rows.iter_mut() {
            let s: f64 = r.iter().zip(&q).map(|(a, b)| a * b).sum();
            for (x, y) in r.iter_mut().zip(&q) {
                *x -= s * y;
            }
        }
    }
    chosen.sort_unstable();
    chosen
}
