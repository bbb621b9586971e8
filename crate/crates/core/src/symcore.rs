//! Small symmetric matrices (n = 2, 3): eigen-decomposition, elementary
//! symmetric functions and cone margins for Γ_k and P_k.

use alloc::vec::Vec;
use core::f64::consts::PI;
use core::ops::{Add, Mul, Neg, Sub};

use libm::{acos, atan2, cos, fabs, hypot, sin, sqrt};
use serde::{Serialize, Serializer};

use crate::error::{Error, Result};

pub const MAX_DIM: usize = 3;

/// Slack allowed when asking for membership in the closed cone.
pub const CLOSED_CONE_TOL: f64 = 1e-12;

/// Spread (relative to the matrix scale) below which the 3×3 eigensolver
/// switches from the trigonometric formula to Jacobi rotations.
const DEGENERATE_TOL: f64 = 1e-12;

#[inline]
fn upper_index(n: usize, i: usize, j: usize) -> usize {
    let (i, j) = if i <= j { (i, j) } else { (j, i) };
    i * n - (i * i - i) / 2 + (j - i)
}

/// Symmetric n×n matrix storing the upper triangle row by row.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SymMat {
    n: usize,
    e: [f64; 6],
}

impl SymMat {
    pub fn zeros(n: usize) -> Self {
        assert!(n == 2 || n == 3, "SymMat supports n = 2 or 3, got {n}");
        SymMat { n, e: [0.0; 6] }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { 1.0 } else { 0.0 })
    }

    pub fn from_diag(d: &[f64]) -> Self {
        Self::from_fn(d.len(), |i, j| if i == j { d[i] } else { 0.0 })
    }

    /// Builds from the entries with `i <= j`; `f(i, j)` is never called with `i > j`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            for j in i..n {
                m.e[upper_index(n, i, j)] = f(i, j);
            }
        }
        m
    }

    /// Row-major upper triangle, e.g. `[a, b, c]` for `[[a, b], [b, c]]`.
    pub fn from_upper(n: usize, entries: &[f64]) -> Result<Self> {
        if n != 2 && n != 3 {
            return Err(Error::InvalidMatrix("dimension must be 2 or 3"));
        }
        if entries.len() != n * (n + 1) / 2 {
            return Err(Error::InvalidMatrix("wrong number of entries"));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidMatrix("non-finite entry"));
        }
        let mut m = Self::zeros(n);
        m.e[..entries.len()].copy_from_slice(entries);
        Ok(m)
    }

    pub fn outer(v: &[f64]) -> Self {
        Self::from_fn(v.len(), |i, j| v[i] * v[j])
    }

    /// (a bᵀ + b aᵀ) / 2
    pub fn sym_outer(a: &[f64], b: &[f64]) -> Self {
        Self::from_fn(a.len(), |i, j| 0.5 * (a[i] * b[j] + a[j] * b[i]))
    }

    pub fn from_spectrum(lambda: &[f64], frame: &Frame) -> Self {
        let n = lambda.len();
        Self::from_fn(n, |i, j| (0..n).map(|k| lambda[k] * frame.cols[k][i] * frame.cols[k][j]).sum())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.e[upper_index(self.n, i, j)]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.e[upper_index(self.n, i, j)] = v;
    }

    pub fn upper(&self) -> &[f64] {
        &self.e[..self.n * (self.n + 1) / 2]
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn is_finite(&self) -> bool {
        self.upper().iter().all(|v| v.is_finite())
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.get(i, i)).sum()
    }

    /// Frobenius inner product trace(self · other).
    pub fn dot(&self, other: &SymMat) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += self.get(i, j) * other.get(i, j);
            }
        }
        s
    }

    pub fn norm(&self) -> f64 {
        sqrt(self.dot(self))
    }

    pub fn max_abs(&self) -> f64 {
        self.upper().iter().fold(0.0, |a, v| a.max(fabs(*v)))
    }

    /// ξᵀ M η
    pub fn bilinear(&self, xi: &[f64], eta: &[f64]) -> f64 {
        let mut s = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                s += xi[i] * self.get(i, j) * eta[j];
            }
        }
        s
    }

    pub fn quad(&self, xi: &[f64]) -> f64 {
        self.bilinear(xi, xi)
    }

    pub fn mul_vec(&self, v: &[f64]) -> [f64; MAX_DIM] {
        let mut out = [0.0; MAX_DIM];
        for (i, o) in out.iter_mut().enumerate().take(self.n) {
            *o = (0..self.n).map(|j| self.get(i, j) * v[j]).sum();
        }
        out
    }

    pub fn scaled(&self, s: f64) -> Self {
        let mut m = *self;
        m.e.iter_mut().for_each(|v| *v *= s);
        m
    }

    /// M + s·I
    pub fn shifted(&self, s: f64) -> Self {
        let mut m = *self;
        for i in 0..self.n {
            m.e[upper_index(self.n, i, i)] += s;
        }
        m
    }

    /// Q M Qᵀ
    pub fn conjugate(&self, q: &Frame) -> Self {
        let n = self.n;
        Self::from_fn(n, |i, j| {
            let mut s = 0.0;
            for k in 0..n {
                for l in 0..n {
                    s += q.cols[k][i] * self.get(k, l) * q.cols[l][j];
                }
            }
            s
        })
    }

    fn det3(&self) -> f64 {
        let (a, b, c) = (self.get(0, 0), self.get(0, 1), self.get(0, 2));
        let (d, e, f) = (self.get(1, 1), self.get(1, 2), self.get(2, 2));
        a * (d * f - e * e) - b * (b * f - e * c) + c * (b * e - d * c)
    }

    fn full(&self) -> [[f64; 3]; 3] {
        let mut a = [[0.0; 3]; 3];
        for (i, row) in a.iter_mut().enumerate().take(self.n) {
            for (j, v) in row.iter_mut().enumerate().take(self.n) {
                *v = self.get(i, j);
            }
        }
        a
    }
}

impl Add for SymMat {
    type Output = SymMat;
    fn add(mut self, rhs: SymMat) -> SymMat {
        debug_assert_eq!(self.n, rhs.n);
        self.e.iter_mut().zip(rhs.e).for_each(|(a, b)| *a += b);
        self
    }
}

impl Sub for SymMat {
    type Output = SymMat;
    fn sub(mut self, rhs: SymMat) -> SymMat {
        debug_assert_eq!(self.n, rhs.n);
        self.e.iter_mut().zip(rhs.e).for_each(|(a, b)| *a -= b);
        self
    }
}

impl Neg for SymMat {
    type Output = SymMat;
    fn neg(self) -> SymMat {
        self.scaled(-1.0)
    }
}

impl Mul<f64> for SymMat {
    type Output = SymMat;
    fn mul(self, s: f64) -> SymMat {
        self.scaled(s)
    }
}

impl Serialize for SymMat {
    fn serialize<S: Serializer>(&self, s: S) -> core::result::Result<S::Ok, S::Error> {
        self.rows().serialize(s)
    }
}

/// Orthonormal frame; `cols[k]` is the k-th column.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Frame {
    n: usize,
    cols: [[f64; 3]; 3],
}

impl Frame {
    pub fn identity(n: usize) -> Self {
        let mut cols = [[0.0; 3]; 3];
        for (k, c) in cols.iter_mut().enumerate().take(n) {
            c[k] = 1.0;
        }
        Frame { n, cols }
    }

    /// Columns are taken as given; callers are responsible for orthonormality.
    pub fn from_columns(n: usize, columns: &[[f64; 3]]) -> Self {
        let mut cols = [[0.0; 3]; 3];
        cols[..n].copy_from_slice(&columns[..n]);
        Frame { n, cols }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn col(&self, k: usize) -> &[f64] {
        &self.cols[k][..self.n]
    }

    /// max |QᵀQ − I|
    pub fn orthogonality_error(&self) -> f64 {
        let mut err: f64 = 0.0;
        for a in 0..self.n {
            for b in 0..self.n {
                let d = dot(self.col(a), self.col(b)) - if a == b { 1.0 } else { 0.0 };
                err = err.max(fabs(d));
            }
        }
        err
    }
}

/// Eigenvalues in ascending order with matching orthonormal eigenvectors.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Spectrum {
    n: usize,
    lambda: [f64; 3],
    frame: Frame,
}

impl Spectrum {
    pub fn lambda(&self) -> &[f64] {
        &self.lambda[..self.n]
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        self.frame.col(k)
    }

    pub fn frame(&self) -> &Frame {
        &self.frame
    }

    pub fn reconstruct(&self) -> SymMat {
        SymMat::from_spectrum(self.lambda(), &self.frame)
    }
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[1] * b[2] - a[2] * b[1], a[2] * b[0] - a[0] * b[2], a[0] * b[1] - a[1] * b[0]]
}

fn normalized(v: [f64; 3]) -> [f64; 3] {
    let r = sqrt(dot(&v, &v));
    [v[0] / r, v[1] / r, v[2] / r]
}

/// Flip so the largest-magnitude component is positive, making frames deterministic.
fn canonical_sign(v: &mut [f64]) {
    let mut best = 0;
    for i in 1..v.len() {
        if fabs(v[i]) > fabs(v[best]) {
            best = i;
        }
    }
    if v[best] < 0.0 {
        v.iter_mut().for_each(|x| *x = -*x);
    }
}

pub fn eigen(m: &SymMat) -> Result<Spectrum> {
    if !m.is_finite() {
        return Err(Error::InvalidMatrix("non-finite entry"));
    }
    let mut pairs = match m.n {
        2 => {
            let (l, v) = eigen2(m.get(0, 0), m.get(0, 1), m.get(1, 1));
            [(l[0], [v[0][0], v[0][1], 0.0]), (l[1], [v[1][0], v[1][1], 0.0]), (0.0, [0.0; 3])]
        }
        _ => eigen3(m),
    };
    let n = m.n;
    pairs[..n].sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut lambda = [0.0; 3];
    let mut cols = [[0.0; 3]; 3];
    for k in 0..n {
        lambda[k] = pairs[k].0;
        cols[k] = pairs[k].1;
        canonical_sign(&mut cols[k][..n]);
    }
    Ok(Spectrum { n, lambda, frame: Frame { n, cols } })
}

/// Closed form for [[a, b], [b, c]]: ascending eigenvalues and their unit vectors.
fn eigen2(a: f64, b: f64, c: f64) -> ([f64; 2], [[f64; 2]; 2]) {
    let mean = 0.5 * (a + c);
    let d = 0.5 * (a - c);
    let r = hypot(d, b);
    let th = 0.5 * atan2(b, d);
    let (s, co) = (sin(th), cos(th));
    ([mean - r, mean + r], [[-s, co], [co, s]])
}

fn eigen3(m: &SymMat) -> [(f64, [f64; 3]); 3] {
    let scale = m.max_abs();
    if scale == 0.0 {
        return [(0.0, [1.0, 0.0, 0.0]), (0.0, [0.0, 1.0, 0.0]), (0.0, [0.0, 0.0, 1.0])];
    }
    let q = m.trace() / 3.0;
    let b = m.shifted(-q);
    let sq = |i, j| b.get(i, j) * b.get(i, j);
    let p2 = sq(0, 0) + sq(1, 1) + sq(2, 2) + 2.0 * (sq(0, 1) + sq(0, 2) + sq(1, 2));
    let p = sqrt(p2 / 6.0);
    if p <= DEGENERATE_TOL * scale {
        return jacobi3(m);
    }
    let r = (b.scaled(1.0 / p).det3() / 2.0).clamp(-1.0, 1.0);
    if 1.0 - fabs(r) < DEGENERATE_TOL {
        return jacobi3(m);
    }
    let phi = acos(r) / 3.0;
    let top = 2.0 * p * cos(phi);
    let bottom = 2.0 * p * cos(phi + 2.0 * PI / 3.0);
    let mid = -top - bottom;
    let iso = if top - mid >= mid - bottom { top } else { bottom };

    // Null vector of (B − iso·I) from the best-conditioned cross product of rows.
    let a = b.shifted(-iso).full();
    let cands = [cross(&a[0], &a[1]), cross(&a[0], &a[2]), cross(&a[1], &a[2])];
    let mut v = cands[0];
    for c in &cands[1..] {
        if dot(c, c) > dot(&v, &v) {
            v = *c;
        }
    }
    if dot(&v, &v) == 0.0 {
        return jacobi3(m);
    }
    let v = normalized(v);

    // Orthonormal complement, then the projected 2×2 problem.
    let mut axis = 0;
    for i in 1..3 {
        if fabs(v[i]) < fabs(v[axis]) {
            axis = i;
        }
    }
    let mut e = [0.0; 3];
    e[axis] = 1.0;
    let ev = dot(&e, &v);
    let u1 = normalized([e[0] - ev * v[0], e[1] - ev * v[1], e[2] - ev * v[2]]);
    let u2 = cross(&v, &u1);
    let (mu, w) = eigen2(m.quad(&u1), m.bilinear(&u1, &u2), m.quad(&u2));
    let comb = |c: [f64; 2]| -> [f64; 3] { [c[0] * u1[0] + c[1] * u2[0], c[0] * u1[1] + c[1] * u2[1], c[0] * u1[2] + c[1] * u2[2]] };
    [(m.quad(&v), v), (mu[0], comb(w[0])), (mu[1], comb(w[1]))]
}

/// Cyclic Jacobi rotations on the full 3×3 array.
fn jacobi3(m: &SymMat) -> [(f64, [f64; 3]); 3] {
    let mut a = m.full();
    let mut v = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    let norm2 = m.dot(m);
    for _ in 0..64 {
        let off = a[0][1] * a[0][1] + a[0][2] * a[0][2] + a[1][2] * a[1][2];
        if off <= 1e-34 * norm2 {
            break;
        }
        for (p, q) in [(0, 1), (0, 2), (1, 2)] {
            if a[p][q] == 0.0 {
                continue;
            }
            let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
            let t = theta.signum() / (fabs(theta) + sqrt(theta * theta + 1.0));
            let c = 1.0 / sqrt(t * t + 1.0);
            let s = t * c;
            for row in a.iter_mut() {
                let (kp, kq) = (row[p], row[q]);
                row[p] = c * kp - s * kq;
                row[q] = s * kp + c * kq;
            }
            for k in 0..3 {
                let (pk, qk) = (a[p][k], a[q][k]);
                a[p][k] = c * pk - s * qk;
                a[q][k] = s * pk + c * qk;
            }
            for row in v.iter_mut() {
                let (kp, kq) = (row[p], row[q]);
                row[p] = c * kp - s * kq;
                row[q] = s * kp + c * kq;
            }
        }
    }
    let col = |k: usize| [v[0][k], v[1][k], v[2][k]];
    [(a[0][0], col(0)), (a[1][1], col(1)), (a[2][2], col(2))]
}

/// S_k(λ) = Σ_{i₁<…<i_k} λ_{i₁}⋯λ_{i_k}, for 1 ≤ k ≤ n.
pub fn elem_sym(lambda: &[f64], k: usize) -> Result<f64> {
    if k == 0 || k > lambda.len() {
        return Err(Error::InvalidOrder { k, n: lambda.len() });
    }
    Ok(sym_poly(lambda, k))
}

/// S_k with the conventions S_0 = 1 and S_k = 0 for k > n.
pub(crate) fn sym_poly(lambda: &[f64], k: usize) -> f64 {
    if k > lambda.len() {
        return 0.0;
    }
    let mut e = [1.0, 0.0, 0.0, 0.0];
    for (i, &l) in lambda.iter().enumerate() {
        for j in (1..=(i + 1).min(k)).rev() {
            e[j] += l * e[j - 1];
        }
    }
    e[k]
}

/// S_k(λ | i): the same function with λ_i removed.
pub(crate) fn sym_poly_without(lambda: &[f64], i: usize, k: usize) -> f64 {
    let mut rest = [0.0; MAX_DIM];
    let mut m = 0;
    for (j, &l) in lambda.iter().enumerate() {
        if j != i {
            rest[m] = l;
            m += 1;
        }
    }
    sym_poly(&rest[..m], k)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConeKind {
    /// S_1, …, S_k > 0
    GammaK,
    /// every sum of k eigenvalues > 0
    PK,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
pub struct ConeSpec {
    pub kind: ConeKind,
    pub k: usize,
    pub n: usize,
}

impl ConeSpec {
    pub fn new(kind: ConeKind, k: usize, n: usize) -> Result<Self> {
        if !(2..=MAX_DIM).contains(&n) || k == 0 || k > n {
            return Err(Error::InvalidCone { k, n });
        }
        Ok(ConeSpec { kind, k, n })
    }

    pub fn gamma(k: usize, n: usize) -> Result<Self> {
        Self::new(ConeKind::GammaK, k, n)
    }

    pub fn p_cone(k: usize, n: usize) -> Result<Self> {
        Self::new(ConeKind::PK, k, n)
    }

    /// True for the positive-definite cone, where no member has a negative eigenvalue.
    pub fn is_positive_cone(&self) -> bool {
        self.k == self.n
    }

    /// Margin computed from eigenvalues; positive iff inside the open cone.
    pub fn margin_eigs(&self, lambda: &[f64]) -> f64 {
        match self.kind {
            ConeKind::GammaK => (1..=self.k).map(|j| sym_poly(lambda, j)).fold(f64::INFINITY, f64::min),
            ConeKind::PK => {
                let n = lambda.len();
                let mut worst = f64::INFINITY;
                for mask in 0u32..(1 << n) {
                    if mask.count_ones() as usize == self.k {
                        let s: f64 = (0..n).filter(|i| mask & (1 << i) != 0).map(|i| lambda[i]).sum();
                        worst = worst.min(s);
                    }
                }
                worst
            }
        }
    }
}

pub fn cone_margin(m: &SymMat, cone: &ConeSpec) -> Result<f64> {
    if m.n != cone.n {
        return Err(Error::InvalidArgument(alloc::format!("matrix is {0}×{0} but cone has n = {1}", m.n, cone.n)));
    }
    Ok(cone.margin_eigs(eigen(m)?.lambda()))
}

pub fn in_open_cone(margin: f64) -> bool {
    margin > 0.0
}

pub fn in_closed_cone(margin: f64) -> bool {
    margin >= -CLOSED_CONE_TOL
}

/// Smallest eigenvalue and a unit eigenvector for it. Only the first `n`
/// components of the vector are meaningful.
pub fn min_eig_direction(m: &SymMat) -> Result<(f64, [f64; MAX_DIM])> {
    let s = eigen(m)?;
    let mut v = [0.0; MAX_DIM];
    v[..m.n].copy_from_slice(s.vector(0));
    Ok((s.lambda()[0], v))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn index_layout_is_row_major_upper() {
        let m = SymMat::from_upper(3, &[1.0, 2.0, 3.0, 4.0, 5.0, 6.0]).unwrap();
        assert_eq!(m.get(1, 0), 2.0);
        assert_eq!(m.get(2, 0), 3.0);
        assert_eq!(m.get(1, 1), 4.0);
        assert_eq!(m.get(2, 1), 5.0);
        assert_eq!(m.get(2, 2), 6.0);
        assert_eq!(m.trace(), 11.0);
    }

    #[test]
    fn eigen_trivial_cases() {
        let s = eigen(&SymMat::identity(2)).unwrap();
        assert_eq!(s.lambda(), &[1.0, 1.0]);
        let s = eigen(&SymMat::from_upper(2, &[0.0, 1.0, 0.0]).unwrap()).unwrap();
        assert!(fabs(s.lambda()[0] + 1.0) < 1e-15 && fabs(s.lambda()[1] - 1.0) < 1e-15);
        let s = eigen(&SymMat::identity(3).scaled(2.0)).unwrap();
        assert_eq!(s.lambda(), &[2.0, 2.0, 2.0]);
    }

    #[test]
    fn eigen_rejects_nan() {
        let mut m = SymMat::identity(3);
        m.set(0, 2, f64::NAN);
        assert!(matches!(eigen(&m), Err(Error::InvalidMatrix(_))));
    }

    #[test]
    fn elem_sym_examples() {
        assert_eq!(elem_sym(&[1.0, 1.0, 1.0], 2).unwrap(), 3.0);
        assert_eq!(elem_sym(&[2.0, 3.0], 2).unwrap(), 6.0);
        assert!(matches!(elem_sym(&[1.0, 2.0], 3), Err(Error::InvalidOrder { .. })));
        assert!(matches!(elem_sym(&[1.0, 2.0], 0), Err(Error::InvalidOrder { .. })));
    }

    #[test]
    fn cone_margin_examples() {
        for n in 2..=3 {
            for k in 1..=n {
                let g = ConeSpec::gamma(k, n).unwrap();
                // min_j C(n, j) over j ≤ k is attained at j = 1 (= n) or j = n (= 1)
                let expect = (1..=k).map(|j| binom(n, j) as f64).fold(f64::INFINITY, f64::min);
                assert_eq!(cone_margin(&SymMat::identity(n), &g).unwrap(), expect);
            }
        }
        let m = SymMat::from_diag(&[1.0, -1.0]);
        let margin = cone_margin(&m, &ConeSpec::gamma(1, 2).unwrap()).unwrap();
        assert_eq!(margin, 0.0);
        assert!(!in_open_cone(margin) && in_closed_cone(margin));
    }

    #[test]
    fn p_cone_uses_smallest_partial_sum() {
        let m = SymMat::from_diag(&[3.0, -1.0, 0.5]);
        assert_eq!(cone_margin(&m, &ConeSpec::p_cone(1, 3).unwrap()).unwrap(), -1.0);
        assert_eq!(cone_margin(&m, &ConeSpec::p_cone(2, 3).unwrap()).unwrap(), -0.5);
        assert_eq!(cone_margin(&m, &ConeSpec::p_cone(3, 3).unwrap()).unwrap(), 2.5);
    }

    #[test]
    fn invalid_cones() {
        assert!(ConeSpec::gamma(0, 2).is_err());
        assert!(ConeSpec::gamma(3, 2).is_err());
        assert!(ConeSpec::p_cone(1, 4).is_err());
    }

    #[test]
    fn min_direction_examples() {
        let (l, v) = min_eig_direction(&SymMat::from_diag(&[3.0, 5.0])).unwrap();
        assert_eq!(l, 3.0);
        assert!(fabs(v[0] - 1.0) < 1e-15 && fabs(v[1]) < 1e-15);
        let (l, v) = min_eig_direction(&SymMat::from_diag(&[-2.0, 1.0, 1.0])).unwrap();
        assert!(fabs(l + 2.0) < 1e-14);
        assert!(fabs(v[0] - 1.0) < 1e-14 && fabs(v[1]) < 1e-14 && fabs(v[2]) < 1e-14);
    }

    #[test]
    fn jacobi_handles_repeated_pair() {
        let m = SymMat::from_upper(3, &[2.0, 1.0, 0.0, 2.0, 0.0, 3.0]).unwrap();
        let s = eigen(&m).unwrap();
        assert!(fabs(s.lambda()[0] - 1.0) < 1e-14);
        assert!(fabs(s.lambda()[1] - 3.0) < 1e-14);
        assert!(fabs(s.lambda()[2] - 3.0) < 1e-14);
        assert!((s.reconstruct() - m).max_abs() < 1e-14);
    }

    fn binom(n: usize, k: usize) -> usize {
        (1..=k).fold(1, |acc, i| acc * (n + 1 - i) / i)
    }
}
