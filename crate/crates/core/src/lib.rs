//! Time-dependent thermodynamic processes in driven free-fermion lattices.

// `!(x > 0.0)` rejects NaN along with non-positive values
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod drive;
pub mod error;
pub mod fock;
pub mod harness;
pub mod linalg;
pub mod observables;
pub mod propagator;
pub mod quadratic;
pub mod thermo;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/fock-space.md")]
    mod fock_space {}
    #[doc = include_str!("../../../book/src/propagators.md")]
    mod propagators {}
    #[doc = include_str!("../../../book/src/thermodynamics.md")]
    mod thermodynamics {}
    #[doc = include_str!("../../../book/src/free-fermions.md")]
    mod free_fermions {}
    #[doc = include_str!("../../../book/src/processes.md")]
    mod processes {}
    #[doc = include_str!("../../../book/src/smallness-norm.md")]
    mod smallness_norm {}
    #[doc = include_str!("../../../book/src/running.md")]
    mod running {}
}
