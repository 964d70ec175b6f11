//! Linear solvers used by the schemes: SPD tridiagonal elimination for the
//! 1D systems, dense LU with a minimum-norm fallback for the coupled
//! mass-conserving system and the test oracles, and Jacobi-preconditioned
//! conjugate gradients for the 2D sparse systems.

use std::fmt;

use nalgebra::{DMatrix, DVector};

use crate::assembly1d::TriDiagMatrix;

#[derive(Debug, Clone, PartialEq)]
pub enum LinalgError {
    /// Elimination hit a non-positive pivot: the matrix is not positive
    /// definite (signals an (A1)/(A2) breakdown upstream).
    NonPositivePivot { index: usize, value: f64 },
    CgDidNotConverge { iterations: usize, residual: f64 },
    DimensionMismatch { expected: usize, got: usize },
}

impl fmt::Display for LinalgError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LinalgError::NonPositivePivot { index, value } => {
                write!(f, "non-positive pivot {value} at index {index}")
            }
            LinalgError::CgDidNotConverge { iterations, residual } => {
                write!(f, "CG did not converge in {iterations} iterations (residual {residual})")
            }
            LinalgError::DimensionMismatch { expected, got } => {
                write!(f, "dimension mismatch: expected {expected}, got {got}")
            }
        }
    }
}

impl std::error::Error for LinalgError {}

/// Thomas elimination for a symmetric positive definite tridiagonal system.
pub fn solve_tridiag_spd(a: &TriDiagMatrix, b: &[f64]) -> Result<Vec<f64>, LinalgError> {
    let n = a.size();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    let mut c = vec![0.0; n];
    let mut d = vec![0.0; n];
    let mut pivot = a.main[0];
    if !(pivot > 0.0) {
        return Err(LinalgError::NonPositivePivot { index: 0, value: pivot });
    }
    if n > 1 {
        c[0] = a.sup[0] / pivot;
    }
    d[0] = b[0] / pivot;
    for i in 1..n {
        pivot = a.main[i] - a.sub[i - 1] * c[i - 1];
        if !(pivot > 0.0) {
            return Err(LinalgError::NonPositivePivot { index: i, value: pivot });
        }
        if i + 1 < n {
            c[i] = a.sup[i] / pivot;
        }
        d[i] = (b[i] - a.sub[i - 1] * d[i - 1]) / pivot;
    }
    let mut x = d;
    for i in (0..n - 1).rev() {
        x[i] -= c[i] * x[i + 1];
    }
    Ok(x)
}

/// Dense solve result; `min_norm_fallback` marks a rank-deficient (or
/// residual-failing) system resolved by the minimum-norm least-squares
/// solution.
#[derive(Debug, Clone)]
pub struct DenseSolve {
    pub x: Vec<f64>,
    pub min_norm_fallback: bool,
}

/// LU with partial pivoting; on rank deficiency (or a residual above
/// `1e-10 * |b|`) the minimum-norm least-squares solution is returned and
/// flagged.
pub fn solve_dense_lu(a: &DMatrix<f64>, b: &[f64]) -> Result<DenseSolve, LinalgError> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: a.ncols() });
    }
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    let bv = DVector::from_column_slice(b);
    let b_norm = bv.amax();
    if let Some(x) = a.clone().lu().solve(&bv) {
        let resid = (a * &x - &bv).amax();
        if resid <= 1e-10 * b_norm.max(f64::MIN_POSITIVE) || b_norm == 0.0 {
            return Ok(DenseSolve { x: x.as_slice().to_vec(), min_norm_fallback: false });
        }
    }
    let svd = a.clone().svd(true, true);
    let max_sv = svd.singular_values.amax();
    let eps = 1e-12 * max_sv.max(1.0);
    let x = svd
        .solve(&bv, eps)
        .map_err(|_| LinalgError::DimensionMismatch { expected: n, got: n })?;
    Ok(DenseSolve { x: x.as_slice().to_vec(), min_norm_fallback: true })
}

/// Symmetric sparse matrix in CSR form storing the lower triangle only.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseSym {
    /// Build from (i, j, v) triplets; entries are mirrored into the lower
    /// triangle and duplicates accumulated.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, f64)>) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets
            .into_iter()
            .map(|(i, j, v)| if i >= j { (i, j, v) } else { (j, i, v) })
            .collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_counts = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < n, "row {i} out of bounds");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_counts[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..n {
            row_counts[r + 1] += row_counts[r];
        }
        SparseSym { n, row_ptr: row_counts, col_idx, vals }
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                let v = self.vals[k];
                y[i] += v * x[j];
                if i != j {
                    y[j] += v * x[i];
                }
            }
        }
        y
    }

    pub fn diag(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                if self.col_idx[k] == i {
                    d[i] += self.vals[k];
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                m[(i, j)] += self.vals[k];
                if i != j {
                    m[(j, i)] += self.vals[k];
                }
            }
        }
        m
    }
}

/// Rectangular sparse matrix in CSR form (general pattern, no symmetry).
#[derive(Debug, Clone, PartialEq)]
pub struct SparseRect {
    rows: usize,
    cols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseRect {
    pub fn from_triplets(
        rows: usize,
        cols: usize,
        triplets: impl IntoIterator<Item = (usize, usize, f64)>,
    ) -> Self {
        let mut entries: Vec<(usize, usize, f64)> = triplets.into_iter().collect();
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_counts = vec![0usize; rows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut vals: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in entries {
            assert!(i < rows && j < cols, "({i},{j}) out of bounds");
            if last == Some((i, j)) {
                *vals.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                vals.push(v);
                row_counts[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for r in 0..rows {
            row_counts[r + 1] += row_counts[r];
        }
        SparseRect { rows, cols, row_ptr: row_counts, col_idx, vals }
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    /// `y = A x`, length `rows`.
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.cols);
        let mut y = vec![0.0; self.rows];
        for i in 0..self.rows {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.vals[k] * x[self.col_idx[k]];
            }
            y[i] = acc;
        }
        y
    }

    /// `y = A^T x`, length `cols`.
    pub fn matvec_t(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.rows);
        let mut y = vec![0.0; self.cols];
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.col_idx[k]] += self.vals[k] * x[i];
            }
        }
        y
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k])] += self.vals[k];
            }
        }
        m
    }
}

/// Conjugate gradient solve result.
#[derive(Debug, Clone)]
pub struct CgSolve {
    pub x: Vec<f64>,
    pub iterations: usize,
    pub residual: f64,
}

/// Jacobi-preconditioned conjugate gradients; converges when the 2-norm
/// residual drops below `tol * |b|`.
pub fn solve_cg(
    a: &SparseSym,
    b: &[f64],
    tol: f64,
    max_iter: usize,
) -> Result<CgSolve, LinalgError> {
    let n = a.size();
    if b.len() != n {
        return Err(LinalgError::DimensionMismatch { expected: n, got: b.len() });
    }
    let b_norm = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if b_norm == 0.0 {
        return Ok(CgSolve { x: vec![0.0; n], iterations: 0, residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a
        .diag()
        .iter()
        .map(|&d| if d.abs() > 0.0 { 1.0 / d } else { 1.0 })
        .collect();

    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, di)| ri * di).collect();
    let mut p = z.clone();
    let mut rz: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();

    for it in 1..=max_iter {
        let ap = a.matvec(&p);
        let pap: f64 = p.iter().zip(&ap).map(|(a, b)| a * b).sum();
        if pap <= 0.0 {
            return Err(LinalgError::NonPositivePivot { index: it, value: pap });
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
        if r_norm <= tol * b_norm {
            return Ok(CgSolve { x, iterations: it, residual: r_norm / b_norm });
        }
        for i in 0..n {
            z[i] = r[i] * inv_diag[i];
        }
        let rz_new: f64 = r.iter().zip(&z).map(|(a, b)| a * b).sum();
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    let r_norm = r.iter().map(|v| v * v).sum::<f64>().sqrt();
    Err(LinalgError::CgDidNotConverge { iterations: max_iter, residual: r_norm / b_norm })
}

/// Infinity-norm relative residual `|Ax - b| / max(|b|, tiny)` for a
/// tridiagonal system; used by the schemes to certify each solve.
pub fn tridiag_residual(a: &TriDiagMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let num = ax
        .iter()
        .zip(b)
        .map(|(p, q)| (p - q).abs())
        .fold(0.0, f64::max);
    let den = b.iter().map(|v| v.abs()).fold(0.0, f64::max);
    num / den.max(f64::MIN_POSITIVE)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::assembly1d::assemble_mass;
    use crate::mesh1d::Mesh1D;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    // deterministic pseudo-random stream for test matrices
    struct SplitMix(u64);
    impl SplitMix {
        fn next_f64(&mut self) -> f64 {
            self.0 = self.0.wrapping_add(0x9e3779b97f4a7c15);
            let mut z = self.0;
            z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
            z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
            z ^= z >> 31;
            (z >> 11) as f64 / (1u64 << 53) as f64
        }
    }

    #[test]
    fn tridiag_identity_scaled() {
        let mut a = TriDiagMatrix::zeros(4);
        for v in a.main.iter_mut() {
            *v = 3.0;
        }
        let b = vec![3.0, 6.0, 9.0, 12.0];
        let x = solve_tridiag_spd(&a, &b).unwrap();
        assert_eq!(x, vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn tridiag_two_cell_lambda_solve() {
        let m = assemble_mass(&Mesh1D::new(vec![0.0, 1.0, 2.0]).unwrap());
        let x = solve_tridiag_spd(&m, &[4.0 / 3.0]).unwrap();
        assert!(close(x[0], 2.0, 1e-14));
    }

    #[test]
    fn tridiag_matches_dense_oracle() {
        let mut rng = SplitMix(42);
        for n in [3usize, 7, 20] {
            let mut a = TriDiagMatrix::zeros(n);
            for i in 0..n - 1 {
                let off = 0.2 + 0.3 * rng.next_f64();
                a.sub[i] = off;
                a.sup[i] = off;
            }
            for i in 0..n {
                // diagonally dominant => SPD
                a.main[i] = 2.0 + rng.next_f64();
            }
            let b: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
            let x = solve_tridiag_spd(&a, &b).unwrap();
            let oracle = solve_dense_lu(&a.to_dense(), &b).unwrap();
            assert!(!oracle.min_norm_fallback);
            for (p, q) in x.iter().zip(&oracle.x) {
                assert!(close(*p, *q, 1e-12));
            }
            assert!(tridiag_residual(&a, &x, &b) < 1e-12);
        }
    }

    #[test]
    fn tridiag_reports_pivot_index() {
        let mut a = TriDiagMatrix::zeros(3);
        a.main = vec![1.0, 0.0, 1.0];
        match solve_tridiag_spd(&a, &[1.0, 1.0, 1.0]) {
            Err(LinalgError::NonPositivePivot { index: 1, .. }) => {}
            other => panic!("expected pivot error at index 1, got {other:?}"),
        }
    }

    #[test]
    fn dense_one_by_one() {
        let a = DMatrix::from_row_slice(1, 1, &[2.0]);
        let s = solve_dense_lu(&a, &[4.0]).unwrap();
        assert_eq!(s.x, vec![2.0]);
        assert!(!s.min_norm_fallback);
    }

    #[test]
    fn dense_singular_min_norm() {
        // all-zero row: rank deficient, minimum-norm least squares solution
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        let s = solve_dense_lu(&a, &[3.0, 0.0]).unwrap();
        assert!(s.min_norm_fallback);
        assert!(close(s.x[0], 3.0, 1e-12));
        assert!(close(s.x[1], 0.0, 1e-12));

        let zero = DMatrix::zeros(3, 3);
        let s = solve_dense_lu(&zero, &[0.0, 0.0, 0.0]).unwrap();
        assert!(s.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cg_diagonal_converges_fast() {
        let a = SparseSym::from_triplets(3, [(0, 0, 2.0), (1, 1, 4.0), (2, 2, 8.0)]);
        let s = solve_cg(&a, &[2.0, 4.0, 8.0], 1e-12, 100).unwrap();
        assert!(s.iterations <= 2, "iterations {}", s.iterations);
        for v in &s.x {
            assert!(close(*v, 1.0, 1e-12));
        }
    }

    #[test]
    fn cg_zero_rhs() {
        let a = SparseSym::from_triplets(4, [(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0), (3, 3, 1.0)]);
        let s = solve_cg(&a, &[0.0; 4], 1e-12, 10).unwrap();
        assert_eq!(s.iterations, 0);
        assert!(s.x.iter().all(|&v| v == 0.0));
    }

    #[test]
    fn cg_matches_dense_oracle() {
        // 1D stiffness-plus-mass SPD matrix as a stand-in sparse system
        let n = 25;
        let mut trips = Vec::new();
        for i in 0..n {
            trips.push((i, i, 2.5));
            if i + 1 < n {
                trips.push((i + 1, i, -1.0));
            }
        }
        let a = SparseSym::from_triplets(n, trips);
        let mut rng = SplitMix(7);
        let b: Vec<f64> = (0..n).map(|_| rng.next_f64() - 0.5).collect();
        let s = solve_cg(&a, &b, 1e-13, 1000).unwrap();
        let oracle = solve_dense_lu(&a.to_dense(), &b).unwrap();
        for (p, q) in s.x.iter().zip(&oracle.x) {
            assert!(close(*p, *q, 1e-10));
        }
    }

    #[test]
    fn cg_deterministic() {
        let a = SparseSym::from_triplets(
            5,
            [(0, 0, 3.0), (1, 1, 3.0), (2, 2, 3.0), (3, 3, 3.0), (4, 4, 3.0), (1, 0, -0.7), (3, 2, -0.4)],
        );
        let b = [1.0, -2.0, 3.0, 0.5, 0.25];
        let s1 = solve_cg(&a, &b, 1e-12, 100).unwrap();
        let s2 = solve_cg(&a, &b, 1e-12, 100).unwrap();
        assert_eq!(s1.x, s2.x);
        assert_eq!(s1.iterations, s2.iterations);
    }

    #[test]
    fn sparse_from_triplets_accumulates() {
        let a = SparseSym::from_triplets(2, [(0, 0, 1.0), (0, 0, 2.0), (0, 1, 0.5), (1, 0, 0.25)]);
        let d = a.to_dense();
        assert!(close(d[(0, 0)], 3.0, 1e-15));
        assert!(close(d[(1, 0)], 0.75, 1e-15));
        assert!(close(d[(0, 1)], 0.75, 1e-15));
    }
}
