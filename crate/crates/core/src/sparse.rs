//! Compressed-row sparse matrices and the Krylov solvers used by the time-steppers.

use std::fmt::Write as _;

use crate::error::{Error, Result};

/// Square sparse matrix in compressed-row storage. Column indices are sorted
/// and unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

/// Row-by-row builder; duplicate columns within a row are summed.
#[derive(Debug)]
pub struct RowAssembler {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
    pending: Vec<(usize, f64)>,
}

impl RowAssembler {
    pub fn new(n: usize, nnz_hint: usize) -> Self {
        let mut row_ptr = Vec::with_capacity(n + 1);
        row_ptr.push(0);
        Self {
            n,
            row_ptr,
            cols: Vec::with_capacity(nnz_hint),
            vals: Vec::with_capacity(nnz_hint),
            pending: Vec::with_capacity(16),
        }
    }

    #[inline]
    pub fn add(&mut self, col: usize, val: f64) {
        debug_assert!(col < self.n);
        self.pending.push((col, val));
    }

    /// Closes the current row. Explicit zeros produced by cancellation are kept
    /// so the sparsity pattern depends only on the stencil.
    pub fn finish_row(&mut self) {
        self.pending.sort_unstable_by_key(|e| e.0);
        let mut last = usize::MAX;
        for &(c, v) in &self.pending {
            if c == last {
                *self.vals.last_mut().unwrap() += v;
            } else {
                self.cols.push(c);
                self.vals.push(v);
                last = c;
            }
        }
        self.pending.clear();
        self.row_ptr.push(self.cols.len());
    }

    pub fn build(self) -> CsrMatrix {
        assert_eq!(self.row_ptr.len(), self.n + 1, "every row must be finished");
        CsrMatrix { n: self.n, row_ptr: self.row_ptr, cols: self.cols, vals: self.vals }
    }
}

impl CsrMatrix {
    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(d: &[f64]) -> Self {
        Self {
            n: d.len(),
            row_ptr: (0..=d.len()).collect(),
            cols: (0..d.len()).collect(),
            vals: d.to_vec(),
        }
    }

    pub fn zeros(n: usize) -> Self {
        Self { n, row_ptr: vec![0; n + 1], cols: Vec::new(), vals: Vec::new() }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.cols[r.clone()].iter().copied().zip(self.vals[r].iter().copied())
    }

    pub fn row_len(&self, i: usize) -> usize {
        self.row_ptr[i + 1] - self.row_ptr[i]
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.cols[r.clone()].binary_search(&j) {
            Ok(k) => self.vals[r.start + k],
            Err(_) => 0.0,
        }
    }

    /// Iterates all stored entries as `(row, col, value)`.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    pub fn mul_vec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.vals[k] * x[self.cols[k]];
            }
            *yi = s;
        }
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.mul_vec_into(x, &mut y);
        y
    }

    pub fn mul_transpose_vec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                y[self.cols[k]] += self.vals[k] * x[i];
            }
        }
        y
    }

    /// `alpha * self + beta * other`, with the union sparsity pattern.
    pub fn linear_combination(&self, alpha: f64, other: &CsrMatrix, beta: f64) -> CsrMatrix {
        assert_eq!(self.n, other.n);
        let mut asm = RowAssembler::new(self.n, self.nnz().max(other.nnz()));
        for i in 0..self.n {
            for (j, v) in self.row(i) {
                asm.add(j, alpha * v);
            }
            for (j, v) in other.row(i) {
                asm.add(j, beta * v);
            }
            asm.finish_row();
        }
        asm.build()
    }

    pub fn sub(&self, other: &CsrMatrix) -> CsrMatrix {
        self.linear_combination(1.0, other, -1.0)
    }

    pub fn add(&self, other: &CsrMatrix) -> CsrMatrix {
        self.linear_combination(1.0, other, 1.0)
    }

    /// `I + s * self`.
    pub fn shifted_identity(&self, s: f64) -> CsrMatrix {
        CsrMatrix::identity(self.n).linear_combination(1.0, self, s)
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest entrywise absolute difference over the union pattern.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        self.sub(other).max_abs()
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0_f64, |m, v| m.max(v.abs()))
    }

    /// Largest `|a_ij − a_ji|`.
    pub fn asymmetry(&self) -> f64 {
        self.entries()
            .map(|(i, j, v)| (v - self.get(j, i)).abs())
            .fold(0.0, f64::max)
    }

    /// Scales row `i` by `d[i]`.
    pub fn scale_rows(&self, d: &[f64]) -> CsrMatrix {
        let mut out = self.clone();
        for i in 0..self.n {
            for k in out.row_ptr[i]..out.row_ptr[i + 1] {
                out.vals[k] *= d[i];
            }
        }
        out
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut m = vec![vec![0.0; self.n]; self.n];
        for (i, j, v) in self.entries() {
            m[i][j] = v;
        }
        m
    }

    /// Coordinate text dump, one `row col value` triple per line (zero-based).
    pub fn to_coordinate_text(&self) -> String {
        let mut s = String::with_capacity(32 * self.nnz());
        for (i, j, v) in self.entries() {
            let _ = writeln!(s, "{i} {j} {v:e}");
        }
        s
    }

    /// L²→L² operator norm estimate by power iteration on `AᵀA`.
    pub fn operator_norm(&self, iterations: usize) -> f64 {
        if self.n == 0 || self.max_abs() == 0.0 {
            return 0.0;
        }
        // deterministic, non-symmetric start so no mode is missed by parity
        let mut x: Vec<f64> = (0..self.n).map(|i| 1.0 + 0.37 * ((i * 7919) % 101) as f64 / 101.0).collect();
        let mut norm = 0.0;
        for _ in 0..iterations.max(1) {
            let nx = dot(&x, &x).sqrt();
            x.iter_mut().for_each(|v| *v /= nx);
            let y = self.mul_transpose_vec(&self.mul_vec(&x));
            norm = dot(&x, &y).max(0.0).sqrt();
            x = y;
            if dot(&x, &x) == 0.0 {
                return 0.0;
            }
        }
        norm
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

/// Convergence record of an iterative solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolveStats {
    pub iterations: usize,
    pub rel_residual: f64,
}

/// Iterative solver settings. The residual is measured relative to `‖b‖`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub rel_tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self { rel_tol: 1e-10, max_iter: 5000 }
    }
}

fn true_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let mut r = a.mul_vec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    norm2(&r)
}

/// Jacobi-preconditioned conjugate gradients for symmetric positive definite systems.
/// `x` holds the initial guess on entry.
pub fn conjugate_gradient(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: SolverOptions) -> Result<SolveStats> {
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, rel_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diag().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let mut r = a.mul_vec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut z: Vec<f64> = r.iter().zip(&inv_diag).map(|(ri, d)| ri * d).collect();
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; a.dim()];
    for it in 0..opts.max_iter {
        let rel = norm2(&r) / bnorm;
        if rel <= opts.rel_tol {
            let rel = true_residual(a, x, b) / bnorm;
            if rel <= opts.rel_tol {
                return Ok(SolveStats { iterations: it, rel_residual: rel });
            }
        }
        a.mul_vec_into(&p, &mut ap);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rz / pap;
        axpy(alpha, &p, x);
        axpy(-alpha, &ap, &mut r);
        z.iter_mut().zip(r.iter().zip(&inv_diag)).for_each(|(zi, (ri, d))| *zi = ri * d);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        p.iter_mut().zip(&z).for_each(|(pi, zi)| *pi = zi + beta * *pi);
    }
    let rel = true_residual(a, x, b) / bnorm;
    if rel <= opts.rel_tol {
        return Ok(SolveStats { iterations: opts.max_iter, rel_residual: rel });
    }
    Err(Error::Solver { iterations: opts.max_iter, residual: rel })
}

/// Jacobi-preconditioned BiCGSTAB for general square systems.
/// `x` holds the initial guess on entry.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], x: &mut [f64], opts: SolverOptions) -> Result<SolveStats> {
    let n = a.dim();
    let bnorm = norm2(b);
    if bnorm == 0.0 {
        x.iter_mut().for_each(|v| *v = 0.0);
        return Ok(SolveStats { iterations: 0, rel_residual: 0.0 });
    }
    let inv_diag: Vec<f64> = a.diag().iter().map(|d| if *d != 0.0 { 1.0 / d } else { 1.0 }).collect();
    let precond = |v: &[f64], out: &mut [f64]| {
        out.iter_mut().zip(v.iter().zip(&inv_diag)).for_each(|(o, (vi, d))| *o = vi * d);
    };

    let mut r = a.mul_vec(x);
    r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
    let mut r_hat = r.clone();
    let mut rho = 1.0;
    let mut alpha = 1.0;
    let mut omega = 1.0;
    let mut v = vec![0.0; n];
    let mut p = vec![0.0; n];
    let mut y = vec![0.0; n];
    let mut z = vec![0.0; n];
    let mut s = vec![0.0; n];
    let mut t = vec![0.0; n];

    let mut restarts = 0;
    for it in 0..opts.max_iter {
        let rel = norm2(&r) / bnorm;
        if rel <= opts.rel_tol {
            let rel = true_residual(a, x, b) / bnorm;
            if rel <= opts.rel_tol {
                return Ok(SolveStats { iterations: it, rel_residual: rel });
            }
            // recurrence drifted from the true residual; restart from x
            r = a.mul_vec(x);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
        }
        let rho_new = dot(&r_hat, &r);
        if rho_new.abs() < 1e-300 || omega == 0.0 {
            // breakdown: restart with the current residual as shadow vector
            restarts += 1;
            if restarts > 20 {
                break;
            }
            r = a.mul_vec(x);
            r.iter_mut().zip(b).for_each(|(ri, bi)| *ri = bi - *ri);
            r_hat = r.clone();
            rho = 1.0;
            alpha = 1.0;
            omega = 1.0;
            v.iter_mut().for_each(|e| *e = 0.0);
            p.iter_mut().for_each(|e| *e = 0.0);
            continue;
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        precond(&p, &mut y);
        a.mul_vec_into(&y, &mut v);
        let rv = dot(&r_hat, &v);
        if rv == 0.0 {
            omega = 0.0;
            continue;
        }
        alpha = rho / rv;
        for i in 0..n {
            s[i] = r[i] - alpha * v[i];
        }
        if norm2(&s) / bnorm <= opts.rel_tol {
            axpy(alpha, &y, x);
            r.copy_from_slice(&s);
            continue;
        }
        precond(&s, &mut z);
        a.mul_vec_into(&z, &mut t);
        let tt = dot(&t, &t);
        omega = if tt > 0.0 { dot(&t, &s) / tt } else { 0.0 };
        for i in 0..n {
            x[i] += alpha * y[i] + omega * z[i];
            r[i] = s[i] - omega * t[i];
        }
    }
    let rel = true_residual(a, x, b) / bnorm;
    if rel <= opts.rel_tol {
        return Ok(SolveStats { iterations: opts.max_iter, rel_residual: rel });
    }
    Err(Error::Solver { iterations: opts.max_iter, residual: rel })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn laplace_1d(n: usize) -> CsrMatrix {
        let mut asm = RowAssembler::new(n, 3 * n);
        for i in 0..n {
            if i > 0 {
                asm.add(i - 1, -1.0);
            }
            asm.add(i, 2.0);
            if i + 1 < n {
                asm.add(i + 1, -1.0);
            }
            asm.finish_row();
        }
        asm.build()
    }

    #[test]
    fn duplicates_are_merged() {
        let mut asm = RowAssembler::new(2, 4);
        asm.add(1, 1.0);
        asm.add(0, 2.0);
        asm.add(1, 0.5);
        asm.finish_row();
        asm.finish_row();
        let m = asm.build();
        assert_eq!(m.row_len(0), 2);
        assert_eq!(m.get(0, 1), 1.5);
        assert_eq!(m.get(1, 1), 0.0);
    }

    #[test]
    fn cg_and_bicgstab_agree_with_tridiagonal_solution() {
        let n = 50;
        let a = laplace_1d(n);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let xs: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b = a.mul_vec(&xs);
        let mut x = vec![0.0; n];
        let st = conjugate_gradient(&a, &b, &mut x, SolverOptions::default()).unwrap();
        assert!(st.rel_residual <= 1e-10);
        let err = x.iter().zip(&xs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");

        // non-symmetric perturbation
        let skew = {
            let mut asm = RowAssembler::new(n, 2 * n);
            for i in 0..n {
                if i + 1 < n {
                    asm.add(i + 1, 0.3);
                }
                asm.finish_row();
            }
            asm.build()
        };
        let m = a.add(&skew);
        let b = m.mul_vec(&xs);
        let mut x = vec![0.0; n];
        let st = bicgstab(&m, &b, &mut x, SolverOptions::default()).unwrap();
        assert!(st.rel_residual <= 1e-10);
        let err = x.iter().zip(&xs).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "{err}");
    }

    #[test]
    fn zero_rhs_gives_zero_solution() {
        let a = laplace_1d(5);
        let mut x = vec![1.0; 5];
        bicgstab(&a, &[0.0; 5], &mut x, SolverOptions::default()).unwrap();
        assert!(x.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn operator_norm_of_1d_laplacian() {
        let n = 30;
        let a = laplace_1d(n);
        let exact = 4.0 * (std::f64::consts::PI * n as f64 / (2.0 * (n + 1) as f64)).sin().powi(2);
        let est = a.operator_norm(2000);
        assert!((est - exact).abs() / exact < 1e-3, "{est} vs {exact}");
        assert_eq!(CsrMatrix::zeros(4).operator_norm(50), 0.0);
    }

    #[test]
    fn coordinate_dump_lists_entries() {
        let d = CsrMatrix::diagonal(&[2.0, 3.0]).to_coordinate_text();
        assert_eq!(d.lines().count(), 2);
        assert!(d.starts_with("0 0 2e0"));
    }
}
