//! Seeded random sampling: uniform reals, directions, orthogonal frames and
//! admissible matrices. Everything is deterministic in the seed.

use core::f64::consts::PI;

use libm::{cos, log, pow, sin, sqrt};
use rand_chacha::ChaCha8Rng;
use rand_core::{RngCore, SeedableRng};

use crate::symcore::{dot, ConeSpec, Frame, SymMat, MAX_DIM};

pub struct Sampler {
    rng: ChaCha8Rng,
}

impl Sampler {
    pub fn new(seed: u64) -> Self {
        Sampler { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform on [0, 1) with 53 random bits.
    pub fn uniform(&mut self) -> f64 {
        (self.rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
    }

    pub fn range(&mut self, lo: f64, hi: f64) -> f64 {
        lo + (hi - lo) * self.uniform()
    }

    /// 10^U(lo_exp, hi_exp)
    pub fn log_uniform(&mut self, lo_exp: f64, hi_exp: f64) -> f64 {
        pow(10.0, self.range(lo_exp, hi_exp))
    }

    pub fn index(&mut self, len: usize) -> usize {
        ((self.uniform() * len as f64) as usize).min(len - 1)
    }

    /// Standard normal by Box–Muller.
    pub fn normal(&mut self) -> f64 {
        let u1 = 1.0 - self.uniform();
        let u2 = self.uniform();
        sqrt(-2.0 * log(u1)) * cos(2.0 * PI * u2)
    }

    pub fn unit_vector(&mut self, n: usize) -> [f64; MAX_DIM] {
        loop {
            let mut v = [0.0; MAX_DIM];
            for x in v.iter_mut().take(n) {
                *x = self.normal();
            }
            let r = sqrt(dot(&v, &v));
            if r > 1e-8 {
                v.iter_mut().for_each(|x| *x /= r);
                return v;
            }
        }
    }

    /// Unit vectors ξ ⊥ η.
    pub fn orthonormal_pair(&mut self, n: usize) -> ([f64; MAX_DIM], [f64; MAX_DIM]) {
        let xi = self.unit_vector(n);
        loop {
            let mut eta = self.unit_vector(n);
            let c = dot(&xi, &eta);
            eta.iter_mut().zip(&xi).for_each(|(e, x)| *e -= c * x);
            let r = sqrt(dot(&eta, &eta));
            if r > 1e-6 {
                eta.iter_mut().for_each(|e| *e /= r);
                return (xi, eta);
            }
        }
    }

    /// Random rotation: an angle for n = 2, a unit quaternion for n = 3.
    pub fn rotation(&mut self, n: usize) -> Frame {
        if n == 2 {
            let th = self.range(0.0, 2.0 * PI);
            let (c, s) = (cos(th), sin(th));
            return Frame::from_columns(2, &[[c, s, 0.0], [-s, c, 0.0]]);
        }
        let mut q = [0.0; 4];
        loop {
            q.iter_mut().for_each(|x| *x = self.normal());
            let r = sqrt(q.iter().map(|x| x * x).sum());
            if r > 1e-8 {
                q.iter_mut().for_each(|x| *x /= r);
                break;
            }
        }
        let [w, x, y, z] = q;
        Frame::from_columns(
            3,
            &[
                [1.0 - 2.0 * (y * y + z * z), 2.0 * (x * y + w * z), 2.0 * (x * z - w * y)],
                [2.0 * (x * y - w * z), 1.0 - 2.0 * (x * x + z * z), 2.0 * (y * z + w * x)],
                [2.0 * (x * z + w * y), 2.0 * (y * z - w * x), 1.0 - 2.0 * (x * x + y * y)],
            ],
        )
    }

    /// Symmetric matrix with independent entries uniform in [−1, 1].
    pub fn symmetric(&mut self, n: usize) -> SymMat {
        SymMat::from_fn(n, |_, _| self.range(-1.0, 1.0))
    }

    /// Eigenvalues drawn from `EIG_BOX` times a log-uniform scale in
    /// 10^[lo_exp, hi_exp], rotated by a random orthogonal frame.
    pub fn box_matrix(&mut self, n: usize, lo_exp: f64, hi_exp: f64) -> SymMat {
        let s = self.log_uniform(lo_exp, hi_exp);
        let mut lam = [0.0; MAX_DIM];
        for l in lam.iter_mut().take(n) {
            *l = s * self.range(EIG_BOX.0, EIG_BOX.1);
        }
        let q = self.rotation(n);
        SymMat::from_diag(&lam[..n]).conjugate(&q)
    }

    /// Like [`Sampler::box_matrix`], rejected until it lies strictly inside `cone`.
    /// Gives up after `max_tries` draws.
    pub fn cone_matrix(&mut self, cone: &ConeSpec, lo_exp: f64, hi_exp: f64, max_tries: usize) -> Option<SymMat> {
        for _ in 0..max_tries {
            let s = self.log_uniform(lo_exp, hi_exp);
            let mut lam = [0.0; MAX_DIM];
            for l in lam.iter_mut().take(cone.n) {
                *l = s * self.range(EIG_BOX.0, EIG_BOX.1);
            }
            if cone.margin_eigs(&lam[..cone.n]) > 0.0 {
                let q = self.rotation(cone.n);
                return Some(SymMat::from_diag(&lam[..cone.n]).conjugate(&q));
            }
        }
        None
    }
}

/// Box each eigenvalue is drawn from before scaling. Skewed positive so that
/// every cone has a reasonable acceptance rate, while still producing negative
/// eigenvalues for the Γ_k with k < n.
pub const EIG_BOX: (f64, f64) = (-1.0, 2.0);
