//! Sparse matrices and the two linear solvers used by Newton's method.

use alloc::string::ToString;
use alloc::vec::Vec;

use libm::sqrt;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Compressed sparse rows with sorted, unique column indices.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicate entries in a row are summed.
    pub fn from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> Self {
        assert_eq!(rows.len(), n);
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        for mut r in rows {
            r.sort_by_key(|e| e.0);
            for (c, v) in r {
                assert!(c < n, "column out of range");
                if cols.len() > *row_ptr.last().unwrap() && *cols.last().unwrap() == c {
                    *vals.last_mut().unwrap() += v;
                } else {
                    cols.push(c);
                    vals.push(v);
                }
            }
            row_ptr.push(cols.len());
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        (&self.cols[r.clone()], &self.vals[r])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn mul_vec(&self, x: &[f64], y: &mut [f64]) {
        for i in 0..self.n {
            let (c, v) = self.row(i);
            y[i] = c.iter().zip(v).map(|(j, a)| a * x[*j]).sum();
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    /// Largest |i − j| over stored entries.
    pub fn bandwidth(&self) -> usize {
        (0..self.n).flat_map(|i| self.row(i).0.iter().map(move |j| i.abs_diff(*j))).max().unwrap_or(0)
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    sqrt(dot(a, a))
}

/// LU without pivoting inside the symmetric envelope of the matrix. Row i of
/// L and column i of U are stored densely from `first[i]` to i − 1; fill never
/// leaves the envelope, so cost is Σ wᵢ² for envelope widths wᵢ.
#[derive(Clone, Debug)]
pub struct EnvelopeLu {
    first: Vec<usize>,
    offset: Vec<usize>,
    l: Vec<f64>,
    u: Vec<f64>,
    d: Vec<f64>,
}

/// Pivots smaller than this times max|A| abort the factorization.
pub const PIVOT_TOL: f64 = 1e-14;

impl EnvelopeLu {
    pub fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.dim();
        let mut first: Vec<usize> = (0..n).collect();
        for i in 0..n {
            for &j in a.row(i).0 {
                let (lo, hi) = if j < i { (j, i) } else { (i, j) };
                first[hi] = first[hi].min(lo);
            }
        }
        let mut offset = Vec::with_capacity(n + 1);
        offset.push(0);
        for i in 0..n {
            offset.push(offset[i] + (i - first[i]));
        }
        let size = offset[n];
        let mut l = alloc::vec![0.0; size];
        let mut u = alloc::vec![0.0; size];
        let mut d = alloc::vec![0.0; n];
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if j < i {
                    l[offset[i] + j - first[i]] = x;
                } else if j > i {
                    u[offset[j] + i - first[j]] = x;
                } else {
                    d[i] = x;
                }
            }
        }
        let scale = a.max_abs();
        for i in 0..n {
            let fi = first[i];
            let oi = offset[i];
            for j in fi..i {
                let fj = first[j];
                let oj = offset[j];
                let k0 = fi.max(fj);
                let s = dot(&l[oi + k0 - fi..oi + j - fi], &u[oj + k0 - fj..oj + j - fj]);
                l[oi + j - fi] = (l[oi + j - fi] - s) / d[j];
                let s = dot(&l[oj + k0 - fj..oj + j - fj], &u[oi + k0 - fi..oi + j - fi]);
                u[oi + j - fi] -= s;
            }
            d[i] -= dot(&l[oi..oi + i - fi], &u[oi..oi + i - fi]);
            if !(d[i].abs() > PIVOT_TOL * scale) {
                return Err(Error::LinearSolveFailure(alloc::format!("pivot {:e} at row {i}", d[i])));
            }
        }
        Ok(EnvelopeLu { first, offset, l, u, d })
    }

    /// Stored entries of L plus U.
    pub fn envelope_size(&self) -> usize {
        2 * self.l.len() + self.d.len()
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.d.len();
        let mut y = b.to_vec();
        for i in 0..n {
            let fi = self.first[i];
            let oi = self.offset[i];
            y[i] -= dot(&self.l[oi..oi + i - fi], &y[fi..i]);
        }
        for i in (0..n).rev() {
            y[i] /= self.d[i];
            let xi = y[i];
            let fi = self.first[i];
            let oi = self.offset[i];
            for (k, uk) in self.u[oi..oi + i - fi].iter().enumerate() {
                y[fi + k] -= uk * xi;
            }
        }
        y
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Preconditioner {
    Jacobi,
    Ilu0,
}

/// Incomplete LU on the sparsity pattern of A.
#[derive(Clone, Debug)]
struct Ilu0 {
    a: CsrMatrix,
    diag_pos: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let mut m = a.clone();
        let n = m.n;
        let mut diag_pos = Vec::with_capacity(n);
        for i in 0..n {
            let (c, _) = m.row(i);
            let k = c.binary_search(&i).map_err(|_| Error::LinearSolveFailure("ILU(0) needs a full diagonal".to_string()))?;
            diag_pos.push(m.row_ptr[i] + k);
        }
        for i in 1..n {
            let (start, end) = (m.row_ptr[i], m.row_ptr[i + 1]);
            for kk in start..end {
                let k = m.cols[kk];
                if k >= i {
                    break;
                }
                let piv = m.vals[diag_pos[k]];
                if piv == 0.0 {
                    return Err(Error::LinearSolveFailure("zero pivot in ILU(0)".to_string()));
                }
                let f = m.vals[kk] / piv;
                m.vals[kk] = f;
                // row i −= f · (row k, columns > k), restricted to the pattern of row i
                let (ks, ke) = (diag_pos[k] + 1, m.row_ptr[k + 1]);
                let mut p = kk + 1;
                for q in ks..ke {
                    let col = m.cols[q];
                    while p < end && m.cols[p] < col {
                        p += 1;
                    }
                    if p < end && m.cols[p] == col {
                        m.vals[p] -= f * m.vals[q];
                    }
                }
            }
        }
        Ok(Ilu0 { a: m, diag_pos })
    }

    fn apply(&self, r: &[f64], z: &mut [f64]) {
        let n = self.a.n;
        for i in 0..n {
            let mut s = r[i];
            for kk in self.a.row_ptr[i]..self.diag_pos[i] {
                s -= self.a.vals[kk] * z[self.a.cols[kk]];
            }
            z[i] = s;
        }
        for i in (0..n).rev() {
            let mut s = z[i];
            for kk in self.diag_pos[i] + 1..self.a.row_ptr[i + 1] {
                s -= self.a.vals[kk] * z[self.a.cols[kk]];
            }
            z[i] = s / self.a.vals[self.diag_pos[i]];
        }
    }
}

enum Precond {
    Jacobi(Vec<f64>),
    Ilu(Ilu0),
}

impl Precond {
    fn apply(&self, r: &[f64], z: &mut [f64]) {
        match self {
            Precond::Jacobi(d) => {
                for i in 0..r.len() {
                    z[i] = r[i] / d[i];
                }
            }
            Precond::Ilu(m) => m.apply(r, z),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterativeStats {
    pub iterations: usize,
    pub relative_residual: f64,
}

/// Right-preconditioned BiCGStab; stops when ‖b − Ax‖ ≤ tol·‖b‖.
pub fn bicgstab(a: &CsrMatrix, b: &[f64], pre: Preconditioner, tol: f64, max_iter: usize) -> Result<(Vec<f64>, IterativeStats)> {
    let n = a.dim();
    let m = match pre {
        Preconditioner::Jacobi => {
            let d = a.diagonal();
            if d.contains(&0.0) {
                return Err(Error::LinearSolveFailure("zero diagonal entry".to_string()));
            }
            Precond::Jacobi(d)
        }
        Preconditioner::Ilu0 => Precond::Ilu(Ilu0::new(a)?),
    };
    let bn = norm(b);
    let mut x = alloc::vec![0.0; n];
    if bn == 0.0 {
        return Ok((x, IterativeStats { iterations: 0, relative_residual: 0.0 }));
    }
    let mut r = b.to_vec();
    let r0 = r.clone();
    let (mut rho, mut alpha, mut omega) = (1.0, 1.0, 1.0);
    let mut v = alloc::vec![0.0; n];
    let mut p = alloc::vec![0.0; n];
    let mut phat = alloc::vec![0.0; n];
    let mut shat = alloc::vec![0.0; n];
    let mut t = alloc::vec![0.0; n];
    for it in 1..=max_iter {
        let rho_new = dot(&r0, &r);
        if rho_new == 0.0 || omega == 0.0 {
            return Err(Error::LinearSolveFailure(alloc::format!("BiCGStab breakdown at iteration {it}")));
        }
        let beta = (rho_new / rho) * (alpha / omega);
        rho = rho_new;
        for i in 0..n {
            p[i] = r[i] + beta * (p[i] - omega * v[i]);
        }
        m.apply(&p, &mut phat);
        a.mul_vec(&phat, &mut v);
        alpha = rho / dot(&r0, &v);
        for i in 0..n {
            x[i] += alpha * phat[i];
            r[i] -= alpha * v[i];
        }
        let rn = norm(&r);
        if rn <= tol * bn {
            return Ok((x, IterativeStats { iterations: it, relative_residual: rn / bn }));
        }
        m.apply(&r, &mut shat);
        a.mul_vec(&shat, &mut t);
        let tt = dot(&t, &t);
        omega = if tt == 0.0 { 0.0 } else { dot(&t, &r) / tt };
        for i in 0..n {
            x[i] += omega * shat[i];
            r[i] -= omega * t[i];
        }
        let rn = norm(&r);
        if !rn.is_finite() {
            return Err(Error::LinearSolveFailure("BiCGStab diverged".to_string()));
        }
        if rn <= tol * bn {
            return Ok((x, IterativeStats { iterations: it, relative_residual: rn / bn }));
        }
    }
    let mut ax = alloc::vec![0.0; n];
    a.mul_vec(&x, &mut ax);
    let res = ax.iter().zip(b).map(|(p, q)| (p - q) * (p - q)).sum::<f64>();
    Err(Error::LinearSolveFailure(alloc::format!(
        "BiCGStab did not converge in {max_iter} iterations (relative residual {:e})",
        sqrt(res) / bn
    )))
}
