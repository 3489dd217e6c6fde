//! Coordinate-format sparse operators, CSR matvec, and an SPD solver:
//! Jacobi-preconditioned conjugate gradients with a dense Cholesky fallback
//! for small systems.

use crate::error::{Error, Result};
use nalgebra::{DMatrix, DVector};

/// Relative residual target for iterative solves. Tight enough that the
/// discrete energy identity sees only round-off.
pub const CG_TOL: f64 = 1e-12;

/// Systems at or below this size are solved densely.
pub const DENSE_LIMIT: usize = 600;

/// Sparse operator in coordinate format with duplicate entries allowed
/// (assembly accumulates element contributions; duplicates sum).
#[derive(Debug, Clone)]
pub struct SparseOperator {
    pub nrows: usize,
    pub ncols: usize,
    pub entries: Vec<(usize, usize, f64)>,
}

/// Compressed sparse row form with summed duplicates.
#[derive(Debug, Clone)]
pub struct CsrMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub row_ptr: Vec<usize>,
    pub col_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseOperator {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        SparseOperator { nrows, ncols, entries: Vec::new() }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        if value != 0.0 {
            self.entries.push((row, col, value));
        }
    }

    pub fn to_csr(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.nrows + 1];
        for &(r, _, _) in &self.entries {
            counts[r + 1] += 1;
        }
        for i in 0..self.nrows {
            counts[i + 1] += counts[i];
        }
        let mut col_idx = vec![0usize; self.entries.len()];
        let mut values = vec![0.0; self.entries.len()];
        let mut cursor = counts.clone();
        for &(r, c, v) in &self.entries {
            let k = cursor[r];
            col_idx[k] = c;
            values[k] = v;
            cursor[r] += 1;
        }
        // Sort each row and merge duplicates.
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut out_col = Vec::with_capacity(col_idx.len());
        let mut out_val = Vec::with_capacity(values.len());
        for r in 0..self.nrows {
            let (lo, hi) = (counts[r], counts[r + 1]);
            let mut row: Vec<(usize, f64)> =
                col_idx[lo..hi].iter().copied().zip(values[lo..hi].iter().copied()).collect();
            row.sort_unstable_by_key(|&(c, _)| c);
            for (c, v) in row {
                if let Some(last) = out_col.last() {
                    if *last == c && out_col.len() > row_ptr[r] {
                        *out_val.last_mut().unwrap() += v;
                        continue;
                    }
                }
                out_col.push(c);
                out_val.push(v);
            }
            row_ptr[r + 1] = out_col.len();
        }
        CsrMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            row_ptr,
            col_idx: out_col,
            values: out_val,
        }
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for &(r, c, v) in &self.entries {
            m[(r, c)] += v;
        }
        m
    }

    /// Relative asymmetry `|A - A^T| / |A|` measured entrywise through CSR.
    pub fn asymmetry(&self) -> f64 {
        let a = self.to_csr();
        let mut t = SparseOperator::new(self.ncols, self.nrows);
        for &(r, c, v) in &self.entries {
            t.push(c, r, v);
        }
        let at = t.to_csr();
        let mut num: f64 = 0.0;
        let mut den: f64 = 0.0;
        for r in 0..a.nrows {
            let mut i = a.row_ptr[r];
            let mut j = at.row_ptr[r];
            while i < a.row_ptr[r + 1] || j < at.row_ptr[r + 1] {
                let ci = if i < a.row_ptr[r + 1] { a.col_idx[i] } else { usize::MAX };
                let cj = if j < at.row_ptr[r + 1] { at.col_idx[j] } else { usize::MAX };
                if ci == cj {
                    num = num.max((a.values[i] - at.values[j]).abs());
                    den = den.max(a.values[i].abs());
                    i += 1;
                    j += 1;
                } else if ci < cj {
                    num = num.max(a.values[i].abs());
                    den = den.max(a.values[i].abs());
                    i += 1;
                } else {
                    num = num.max(at.values[j].abs());
                    den = den.max(at.values[j].abs());
                    j += 1;
                }
            }
        }
        if den == 0.0 {
            0.0
        } else {
            num / den
        }
    }
}

impl CsrMatrix {
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.ncols);
        debug_assert_eq!(y.len(), self.nrows);
        for r in 0..self.nrows {
            let mut acc = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                acc += self.values[k] * x[self.col_idx[k]];
            }
            y[r] = acc;
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec(x, &mut y);
        y
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.nrows];
        for r in 0..self.nrows {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.col_idx[k] == r {
                    d[r] = self.values[k];
                }
            }
        }
        d
    }

    /// Quadratic form `x^T A x`.
    pub fn quad_form(&self, x: &[f64]) -> f64 {
        let mut acc = 0.0;
        for r in 0..self.nrows {
            let mut row = 0.0;
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                row += self.values[k] * x[self.col_idx[k]];
            }
            acc += x[r] * row;
        }
        acc
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solve an SPD system. Small systems are eliminated densely (Cholesky with
/// an LU fallback for semidefinite-but-consistent cases); larger ones run
/// Jacobi-preconditioned CG to relative residual `tol`.
pub fn solve_spd(a: &CsrMatrix, b: &[f64], x0: Option<&[f64]>, tol: f64) -> Result<Vec<f64>> {
    let n = a.nrows;
    if n == 0 {
        return Ok(Vec::new());
    }
    if n <= DENSE_LIMIT {
        let mut m = DMatrix::zeros(n, n);
        for r in 0..n {
            for k in a.row_ptr[r]..a.row_ptr[r + 1] {
                m[(r, a.col_idx[k])] += a.values[k];
            }
        }
        let rhs = DVector::from_column_slice(b);
        // Two rounds of iterative refinement push the residual to true
        // round-off even when the operator mixes 1/tau^2 inertia constants
        // with O(1) stiffness entries.
        let refine = |solve: &dyn Fn(&DVector<f64>) -> DVector<f64>| -> Vec<f64> {
            let mut x = solve(&rhs);
            for _ in 0..2 {
                let mut r = rhs.clone();
                for row in 0..n {
                    let mut acc = 0.0;
                    for k in a.row_ptr[row]..a.row_ptr[row + 1] {
                        acc += a.values[k] * x[a.col_idx[k]];
                    }
                    r[row] -= acc;
                }
                x += solve(&r);
            }
            x.as_slice().to_vec()
        };
        if let Some(chol) = m.clone().cholesky() {
            return Ok(refine(&|r| chol.solve(r)));
        }
        let lu = m.lu();
        if lu.solve(&rhs).is_some() {
            return Ok(refine(&|r| lu.solve(r).unwrap()));
        }
        return Err(Error::LinearSolve { residual: f64::INFINITY, iterations: 0 });
    }
    cg_jacobi(a, b, x0, tol, 20 * n)
}

/// Jacobi-preconditioned conjugate gradients.
pub fn cg_jacobi(
    a: &CsrMatrix,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = a.nrows;
    let bnorm = dot(b, b).sqrt();
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let diag = a.diagonal();
    let inv_diag: Vec<f64> =
        diag.iter().map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut x = match x0 {
        Some(v) => v.to_vec(),
        None => vec![0.0; n],
    };
    let mut r = vec![0.0; n];
    a.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    for it in 0..max_iter {
        let rn = dot(&r, &r).sqrt();
        if rn <= tol * bnorm {
            return Ok(x);
        }
        a.matvec(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            // Semidefinite direction: give up with the current residual.
            return Err(Error::LinearSolve { residual: rn / bnorm, iterations: it });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let rn = dot(&r, &r).sqrt();
    if rn <= tol * bnorm {
        Ok(x)
    } else {
        Err(Error::LinearSolve { residual: rn / bnorm, iterations: max_iter })
    }
}
