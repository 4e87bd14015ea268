//! Weight storage and the linear solvers shared by every module.

use nalgebra::{DMatrix, DVector, Dyn, LU};
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Compressed sparse row matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    ncols: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Rows must list each column at most once.
    pub fn from_rows(ncols: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        row_ptr.push(0);
        let nnz = rows.iter().map(Vec::len).sum();
        let mut cols = Vec::with_capacity(nnz);
        let mut vals = Vec::with_capacity(nnz);
        for mut row in rows {
            row.sort_by_key(|e| e.0);
            for (c, v) in row {
                cols.push(c);
                vals.push(v);
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix {
            ncols,
            row_ptr,
            cols,
            vals,
        }
    }

    pub fn from_dense(m: &DMatrix<f64>) -> Self {
        let rows = (0..m.nrows())
            .map(|i| {
                (0..m.ncols())
                    .filter_map(|j| {
                        let v = m[(i, j)];
                        (v != 0.0).then_some((j, v))
                    })
                    .collect()
            })
            .collect();
        CsrMatrix::from_rows(m.ncols(), rows)
    }

    pub fn nrows(&self) -> usize {
        self.row_ptr.len() - 1
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.nrows())
            .into_par_iter()
            .map(|i| self.row(i).map(|(j, v)| v * x[j]).sum())
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows(), self.ncols);
        for i in 0..self.nrows() {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

/// Nonnegative off-diagonal interaction weights `w_ij`, dense or CSR.
#[derive(Clone, Debug, PartialEq)]
pub enum Weights {
    Dense(DMatrix<f64>),
    Sparse(CsrMatrix),
}

impl Weights {
    /// Fill fraction above which storage switches to dense.
    pub const DENSE_FILL: f64 = 0.35;

    pub fn zeros(n: usize) -> Self {
        Weights::Sparse(CsrMatrix::from_rows(n, vec![Vec::new(); n]))
    }

    pub fn n(&self) -> usize {
        match self {
            Weights::Dense(m) => m.nrows(),
            Weights::Sparse(c) => c.nrows(),
        }
    }

    pub fn nnz(&self) -> usize {
        match self {
            Weights::Dense(m) => m.iter().filter(|v| **v != 0.0).count(),
            Weights::Sparse(c) => c.nnz(),
        }
    }

    pub fn is_dense(&self) -> bool {
        matches!(self, Weights::Dense(_))
    }

    /// Re-chooses the storage by the fill threshold.
    pub fn normalized(self) -> Self {
        let n = self.n();
        let fill = if n == 0 { 0.0 } else { self.nnz() as f64 / (n * n) as f64 };
        match self {
            Weights::Dense(m) if fill <= Self::DENSE_FILL => Weights::Sparse(CsrMatrix::from_dense(&m)),
            Weights::Sparse(c) if fill > Self::DENSE_FILL => Weights::Dense(c.to_dense()),
            w => w,
        }
    }

    pub fn row(&self, i: usize) -> Vec<(usize, f64)> {
        match self {
            Weights::Dense(m) => (0..m.ncols())
                .filter_map(|j| {
                    let v = m[(i, j)];
                    (v != 0.0).then_some((j, v))
                })
                .collect(),
            Weights::Sparse(c) => c.row(i).collect(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        match self {
            Weights::Dense(m) => m[(i, j)],
            Weights::Sparse(c) => c.row(i).find(|e| e.0 == j).map(|e| e.1).unwrap_or(0.0),
        }
    }

    pub fn row_sums(&self) -> Vec<f64> {
        match self {
            Weights::Dense(m) => (0..m.nrows()).map(|i| m.row(i).iter().sum()).collect(),
            Weights::Sparse(c) => (0..c.nrows()).map(|i| c.row(i).map(|e| e.1).sum()).collect(),
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        match self {
            Weights::Dense(m) => {
                let v = m * DVector::from_column_slice(x);
                v.as_slice().to_vec()
            }
            Weights::Sparse(c) => c.matvec(x),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        match self {
            Weights::Dense(m) => Weights::Dense(m * c),
            Weights::Sparse(m) => {
                let mut m = m.clone();
                m.vals.iter_mut().for_each(|v| *v *= c);
                Weights::Sparse(m)
            }
        }
    }

    /// Principal submatrix on `keep` (indices in increasing order).
    pub fn submatrix(&self, keep: &[usize]) -> Self {
        let mut map = vec![usize::MAX; self.n()];
        for (k, &i) in keep.iter().enumerate() {
            map[i] = k;
        }
        let rows = keep
            .iter()
            .map(|&i| {
                self.row(i)
                    .into_iter()
                    .filter(|(j, _)| map[*j] != usize::MAX)
                    .map(|(j, v)| (map[j], v))
                    .collect()
            })
            .collect();
        Weights::Sparse(CsrMatrix::from_rows(keep.len(), rows)).normalized()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        match self {
            Weights::Dense(m) => m.clone(),
            Weights::Sparse(c) => c.to_dense(),
        }
    }
}

/// The matrix `diag(diag) − c·W`. Every system in the crate has this shape:
/// `A − λI`, `I + Δt A`, and their localized variants.
#[derive(Clone, Debug)]
pub struct ShiftedSystem<'a> {
    pub weights: &'a Weights,
    pub diag: Vec<f64>,
    pub c: f64,
}

impl ShiftedSystem<'_> {
    pub fn n(&self) -> usize {
        self.diag.len()
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        let wx = self.weights.matvec(x);
        self.diag
            .iter()
            .zip(x)
            .zip(wx)
            .map(|((d, xi), w)| d * xi - self.c * w)
            .collect()
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = self.weights.to_dense() * (-self.c);
        for (i, d) in self.diag.iter().enumerate() {
            m[(i, i)] += d;
        }
        m
    }

    pub fn relative_residual(&self, x: &[f64], b: &[f64]) -> f64 {
        let r = self.apply(x);
        let num: f64 = r.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den = norm2(b);
        if den == 0.0 {
            num
        } else {
            num / den
        }
    }
}

pub fn norm2(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn sup_norm(x: &[f64]) -> f64 {
    x.iter().fold(0.0, |m, v| m.max(v.abs()))
}

pub const RESIDUAL_TOL: f64 = 1e-10;

/// Systems up to this size are factored whatever the weight storage.
pub const DIRECT_MAX_N: usize = 2500;

/// Direct LU for dense weights or small systems, Jacobi-preconditioned
/// BiCGSTAB otherwise. Both are held to [`RESIDUAL_TOL`].
pub struct LinearSolver<'a> {
    sys: ShiftedSystem<'a>,
    lu: Option<LU<f64, Dyn, Dyn>>,
    pub tol: f64,
    pub max_iter: usize,
}

impl<'a> LinearSolver<'a> {
    pub fn new(sys: ShiftedSystem<'a>) -> Result<Self> {
        if sys.weights.is_dense() || sys.diag.len() <= DIRECT_MAX_N {
            Self::dense(sys)
        } else {
            Ok(Self::iterative(sys))
        }
    }

    /// Forces BiCGSTAB.
    pub fn iterative(sys: ShiftedSystem<'a>) -> Self {
        LinearSolver {
            sys,
            lu: None,
            tol: RESIDUAL_TOL,
            max_iter: 20_000,
        }
    }

    /// Forces a dense factorization regardless of the weight storage.
    pub fn dense(sys: ShiftedSystem<'a>) -> Result<Self> {
        let lu = sys.to_dense().lu();
        if !lu.is_invertible() {
            return Err(Error::numerical("singular system matrix", f64::INFINITY));
        }
        Ok(LinearSolver {
            sys,
            lu: Some(lu),
            tol: RESIDUAL_TOL,
            max_iter: 20_000,
        })
    }

    pub fn system(&self) -> &ShiftedSystem<'a> {
        &self.sys
    }

    pub fn is_direct(&self) -> bool {
        self.lu.is_some()
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        if b.iter().all(|v| *v == 0.0) {
            return Ok(vec![0.0; b.len()]);
        }
        match &self.lu {
            Some(lu) => self.solve_direct(lu, b),
            None => {
                let diag = &self.sys.diag;
                let x = bicgstab(
                    |x| self.sys.apply(x),
                    |r| r.iter().zip(diag).map(|(r, d)| r / d).collect(),
                    b,
                    None,
                    self.tol,
                    self.max_iter,
                )?;
                Ok(x)
            }
        }
    }

    /// Applies the stored inverse without the residual check (preconditioner use).
    pub fn apply_inverse(&self, b: &[f64]) -> Vec<f64> {
        match &self.lu {
            Some(lu) => lu
                .solve(&DVector::from_column_slice(b))
                .map(|v| v.as_slice().to_vec())
                .unwrap_or_else(|| b.to_vec()),
            None => b.iter().zip(&self.sys.diag).map(|(r, d)| r / d).collect(),
        }
    }

    fn solve_direct(&self, lu: &LU<f64, Dyn, Dyn>, b: &[f64]) -> Result<Vec<f64>> {
        let bv = DVector::from_column_slice(b);
        let mut x = lu
            .solve(&bv)
            .ok_or_else(|| Error::numerical("singular system matrix", f64::INFINITY))?;
        let mut res = self.sys.relative_residual(x.as_slice(), b);
        // a few rounds of iterative refinement for badly scaled rows
        for _ in 0..3 {
            if res <= self.tol {
                break;
            }
            let r: Vec<f64> = self.sys.apply(x.as_slice()).iter().zip(b).map(|(a, b)| b - a).collect();
            if let Some(dx) = lu.solve(&DVector::from_vec(r)) {
                x += dx;
            }
            res = self.sys.relative_residual(x.as_slice(), b);
        }
        if !(res <= self.tol) {
            return Err(Error::numerical("direct solve missed the residual target", res));
        }
        Ok(x.as_slice().to_vec())
    }
}

/// Right-preconditioned BiCGSTAB. Returns an error carrying the final relative
/// residual if `tol` is not reached within `max_iter` iterations.
pub fn bicgstab(
    apply: impl Fn(&[f64]) -> Vec<f64>,
    precond: impl Fn(&[f64]) -> Vec<f64>,
    b: &[f64],
    x0: Option<&[f64]>,
    tol: f64,
    max_iter: usize,
) -> Result<Vec<f64>> {
    let n = b.len();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    let mut x = x0.map(|v| v.to_vec()).unwrap_or_else(|| vec![0.0; n]);
    let ax = apply(&x);
    let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let r_hat = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(x, y)| x * y).sum::<f64>();
    let mut res = norm2(&r) / bnorm;
    for _ in 0..max_iter {
        if res <= tol {
            return Ok(x);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new == 0.0 || omega == 0.0 {
            break;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        let p_hat = precond(&p);
        v = apply(&p_hat);
        let denom = dot(&r_hat, &v);
        if denom == 0.0 {
            break;
        }
        alpha = rho / denom;
        let s: Vec<f64> = r.iter().zip(&v).map(|(r, v)| r - alpha * v).collect();
        if norm2(&s) / bnorm <= tol {
            for i in 0..n {
                x[i] += alpha * p_hat[i];
            }
            res = relative(&apply(&x), b, bnorm);
            continue;
        }
        let s_hat = precond(&s);
        let t = apply(&s_hat);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &s) / tt };
        for i in 0..n {
            x[i] += alpha * p_hat[i] + omega * s_hat[i];
            r[i] = s[i] - omega * t[i];
        }
        res = norm2(&r) / bnorm;
        if res <= tol {
            // guard against drift of the recursive residual
            res = relative(&apply(&x), b, bnorm);
        }
    }
    if res <= tol {
        return Ok(x);
    }
    Err(Error::numerical("BiCGSTAB did not reach the residual target", res))
}

fn relative(ax: &[f64], b: &[f64], bnorm: f64) -> f64 {
    ax.iter().zip(b).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() / bnorm
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_weights() -> Weights {
        Weights::Sparse(CsrMatrix::from_rows(
            3,
            vec![vec![(1, 1.0)], vec![(0, 1.0), (2, 0.5)], vec![(1, 2.0)]],
        ))
    }

    #[test]
    fn dense_and_iterative_agree() {
        let w = sample_weights();
        let sys = ShiftedSystem {
            weights: &w,
            diag: vec![3.0, 4.0, 5.0],
            c: 1.0,
        };
        let b = [1.0, -2.0, 0.5];
        let x_it = LinearSolver::iterative(sys.clone()).solve(&b).unwrap();
        let x_lu = LinearSolver::dense(sys.clone()).unwrap().solve(&b).unwrap();
        for (a, c) in x_it.iter().zip(&x_lu) {
            assert!((a - c).abs() < 1e-10);
        }
        assert!(sys.relative_residual(&x_lu, &b) <= RESIDUAL_TOL);
    }

    #[test]
    fn fill_threshold_switches_storage() {
        let w = sample_weights().normalized();
        // 4 of 9 entries
        assert!(w.is_dense());
        assert!(!Weights::zeros(4).normalized().is_dense());
        assert_eq!(w.submatrix(&[0, 2]).nnz(), 0);
    }

    #[test]
    fn singular_system_is_numerical_error() {
        let w = Weights::Dense(DMatrix::from_row_slice(2, 2, &[0.0, 1.0, 1.0, 0.0]));
        let sys = ShiftedSystem {
            weights: &w,
            diag: vec![1.0, 1.0],
            c: 1.0,
        };
        assert!(matches!(LinearSolver::dense(sys), Err(Error::Numerical { .. })));
    }
}
