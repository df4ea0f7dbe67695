//! Inexact sequential homotopy method for bound-constrained nonlinear PDE
//! optimal control.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only the numerical
//! pieces: sparse and dense kernels, a structured P1 discretization of the
//! quasilinear elliptic benchmark, Krylov solvers, geometric multigrid, the
//! double saddle-point preconditioners and the outer homotopy driver. File
//! formats and the command line live in `seqhom-cli`.
#![no_std]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod error;
pub mod fem;
pub mod homotopy;
pub mod krylov;
pub mod linalg;
pub mod multigrid;
pub mod saddle;
pub mod spectral;

mod math;

pub use error::{Error, Result};
