//! Implicit diagonal solvers behind the OLM and LSM maps.

pub mod dplus;
pub mod dstar;

pub use dplus::{dplus, dplus_backward, dplus_traced, dplus_unrolled_backward, DplusConfig, DplusResult};
pub use dstar::{dstar, dstar_backward, dstar_from, dstar_unrolled_backward, DstarConfig, DstarMode, DstarResult};
