//! Symmetric sparse matrices stored as their lower triangle in CSR form.
//!
//! The lower triangle in CSR order is the upper triangle in CSC order, so the
//! index arrays can be handed to the sparse Cholesky without copying.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};

use crate::error::{KornError, Result};

/// Lower-triangular sparsity pattern with sorted column indices.
#[derive(Debug)]
pub struct SymPattern {
    n: usize,
    row_ptr: Vec<u32>,
    col_idx: Vec<u32>,
}

impl SymPattern {
    /// Build from per-row sorted, deduplicated column lists (all `≤ row`).
    pub fn from_rows(rows: Vec<Vec<u32>>) -> Result<Self> {
        let n = rows.len();
        let nnz: usize = rows.iter().map(|r| r.len()).sum();
        if nnz > u32::MAX as usize {
            return Err(KornError::Unsupported(format!("{nnz} nonzeros exceed 32-bit indexing")));
        }
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut col_idx = Vec::with_capacity(nnz);
        row_ptr.push(0u32);
        for (r, cols) in rows.into_iter().enumerate() {
            debug_assert!(cols.windows(2).all(|w| w[0] < w[1]));
            debug_assert!(cols.last().is_none_or(|&c| c as usize <= r));
            col_idx.extend_from_slice(&cols);
            row_ptr.push(col_idx.len() as u32);
        }
        Ok(SymPattern { n, row_ptr, col_idx })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    pub fn row(&self, r: usize) -> &[u32] {
        &self.col_idx[self.row_ptr[r] as usize..self.row_ptr[r + 1] as usize]
    }

    pub fn row_start(&self, r: usize) -> usize {
        self.row_ptr[r] as usize
    }

    /// Storage position of entry `(r, c)`, `c ≤ r`.
    #[inline]
    pub fn position(&self, r: usize, c: usize) -> Option<usize> {
        let start = self.row_ptr[r] as usize;
        self.row(r)
            .binary_search(&(c as u32))
            .ok()
            .map(|p| start + p)
    }
}

/// Symmetric matrix over a shared pattern.
#[derive(Clone, Debug)]
pub struct SymCsr {
    pattern: Arc<SymPattern>,
    values: Vec<f64>,
}

impl SymCsr {
    pub fn zeros(pattern: Arc<SymPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        SymCsr { pattern, values }
    }

    pub fn from_parts(pattern: Arc<SymPattern>, values: Vec<f64>) -> Result<Self> {
        if values.len() != pattern.nnz() {
            return Err(KornError::Data("value count does not match the pattern".into()));
        }
        Ok(SymCsr { pattern, values })
    }

    pub fn dim(&self) -> usize {
        self.pattern.n
    }

    pub fn nnz_lower(&self) -> usize {
        self.values.len()
    }

    pub fn pattern(&self) -> &Arc<SymPattern> {
        &self.pattern
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub(crate) fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Entry `(r, c)` of the full symmetric matrix.
    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (r, c) = if r >= c { (r, c) } else { (c, r) };
        self.pattern.position(r, c).map_or(0.0, |p| self.values[p])
    }

    /// `y = A x`.
    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        y.fill(0.0);
        let p = &self.pattern;
        for r in 0..p.n {
            let start = p.row_ptr[r] as usize;
            let end = p.row_ptr[r + 1] as usize;
            let xr = x[r];
            let mut acc = 0.0;
            for k in start..end {
                let c = p.col_idx[k] as usize;
                let a = self.values[k];
                if c == r {
                    acc += a * xr;
                } else {
                    acc += a * x[c];
                    y[c] += a * xr;
                }
            }
            y[r] += acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.dim()];
        self.mul_vec(x, &mut y);
        y
    }

    /// `xᵀ A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        let p = &self.pattern;
        let mut s = 0.0;
        for r in 0..p.n {
            for k in p.row_ptr[r] as usize..p.row_ptr[r + 1] as usize {
                let c = p.col_idx[k] as usize;
                let a = self.values[k];
                if c == r {
                    s += a * x[r] * y[r];
                } else {
                    s += a * (x[r] * y[c] + x[c] * y[r]);
                }
            }
        }
        s
    }

    pub fn quad(&self, x: &[f64]) -> f64 {
        self.bilinear(x, x)
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.dim()).map(|r| self.get(r, r)).collect()
    }

    /// Upper-triangle CSC view for the sparse Cholesky.
    pub fn as_faer_upper(&self) -> SparseColMatRef<'_, u32, f64> {
        let p = &self.pattern;
        let sym = SymbolicSparseColMatRef::new_checked(p.n, p.n, &p.row_ptr, None, &p.col_idx);
        SparseColMatRef::new(sym, &self.values)
    }

    /// Principal submatrix on the rows/columns with `keep[i]`, plus the
    /// old → new index map.
    pub fn principal_submatrix(&self, keep: &[bool]) -> Result<(SymCsr, Vec<Option<usize>>)> {
        let mut map = vec![None; self.dim()];
        let mut next = 0usize;
        for (i, &k) in keep.iter().enumerate() {
            if k {
                map[i] = Some(next);
                next += 1;
            }
        }
        let p = &self.pattern;
        let mut rows = Vec::with_capacity(next);
        let mut vals = Vec::with_capacity(self.values.len());
        for r in 0..p.n {
            if map[r].is_none() {
                continue;
            }
            let mut cols = Vec::new();
            for k in p.row_ptr[r] as usize..p.row_ptr[r + 1] as usize {
                if let Some(nc) = map[p.col_idx[k] as usize] {
                    cols.push(nc as u32);
                    vals.push(self.values[k]);
                }
            }
            rows.push(cols);
        }
        let pattern = Arc::new(SymPattern::from_rows(rows)?);
        Ok((SymCsr { pattern, values: vals }, map))
    }

    /// Dense copy (tests and small oracles only).
    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let n = self.dim();
        let mut d = nalgebra::DMatrix::zeros(n, n);
        let p = &self.pattern;
        for r in 0..n {
            for k in p.row_ptr[r] as usize..p.row_ptr[r + 1] as usize {
                let c = p.col_idx[k] as usize;
                d[(r, c)] = self.values[k];
                d[(c, r)] = self.values[k];
            }
        }
        d
    }

    /// Plain-text coordinate dump: a header line `rows cols nnz`, then one
    /// `row col value` line per stored lower-triangle entry (1-based).
    pub fn write_coordinate(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        let mut w = std::io::BufWriter::new(file);
        let p = &self.pattern;
        writeln!(w, "{} {} {}", p.n, p.n, self.values.len())?;
        for r in 0..p.n {
            for k in p.row_ptr[r] as usize..p.row_ptr[r + 1] as usize {
                writeln!(w, "{} {} {:.17e}", r + 1, p.col_idx[k] + 1, self.values[k])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> SymCsr {
        // [[4, 1, 0], [1, 3, 2], [0, 2, 5]]
        let pattern = Arc::new(SymPattern::from_rows(vec![vec![0], vec![0, 1], vec![1, 2]]).unwrap());
        SymCsr::from_parts(pattern, vec![4.0, 1.0, 3.0, 2.0, 5.0]).unwrap()
    }

    #[test]
    fn symmetric_products() {
        let a = sample();
        let x = [1.0, -2.0, 0.5];
        assert_eq!(a.apply(&x), vec![2.0, -4.0, -1.5]);
        let d = a.to_dense();
        let dx = &d * nalgebra::DVector::from_column_slice(&x);
        assert!((a.quad(&x) - dx.dot(&nalgebra::DVector::from_column_slice(&x))).abs() < 1e-14);
        assert_eq!(a.get(0, 1), 1.0);
        assert_eq!(a.get(0, 2), 0.0);
    }

    #[test]
    fn submatrix_and_dump() {
        let a = sample();
        let (s, map) = a.principal_submatrix(&[true, false, true]).unwrap();
        assert_eq!(map, vec![Some(0), None, Some(1)]);
        assert_eq!(s.to_dense(), nalgebra::DMatrix::from_row_slice(2, 2, &[4.0, 0.0, 0.0, 5.0]));
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("a.coo");
        a.write_coordinate(&path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("3 3 5\n1 1 "));
        assert_eq!(text.lines().count(), 6);
    }
}
