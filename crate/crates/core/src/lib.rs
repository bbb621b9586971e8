//! Numerical core for augmented Hessian equations
//!
//! ```text
//! F[D²u − A(x,u,Du)] = B(x,u,Du)  in Ω,    u = φ  on ∂Ω
//! ```
//!
//! The crate is `no_std` (with `alloc`). Operators `F` are defined through their
//! eigenvalue function on a Gårding cone; `A` and `B` come with first and second
//! derivatives; the PDE is solved on masked 2-D Cartesian grids by damped Newton
//! inside a continuation in `t`. Condition checkers and barrier certificates are
//! sampling- or grid-based, and every sampling routine takes an explicit seed.
#![no_std]

extern crate alloc;

pub mod augmentation;
pub mod catalog;
pub mod error;
pub mod griddisc;
pub mod linalg;
pub mod operator;
pub mod report;
pub mod sampling;
pub mod solver;
pub mod symcore;
pub mod verify;

pub use error::{Error, Result};
