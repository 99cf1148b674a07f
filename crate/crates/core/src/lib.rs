//! No-dimensional Carathéodory and Helly machinery in `l_p` and Schatten-`p`
//! spaces.
//!
//! The crate covers greedy approximate Carathéodory selection, the
//! dimension-back substitution of `l_inf`/`l_1` (and `S_inf`/`S_1`) by
//! `l_p`/`S_p` with `p = ln d`, and three applications built on them:
//! additive sketching of bounded signals, local-to-global Chebyshev
//! regression over the `l_1` ball, and density-matrix feasibility from
//! locally consistent measurements.
// Negated comparisons double as NaN rejection in argument checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]


pub mod error;
pub mod feasibility;
pub mod helly;
pub mod instances;
pub mod caratheodory;
pub mod numkernel;
pub mod quantum;
pub mod report;
pub mod rng;
pub mod sketch;
pub mod spaces;

pub use error::{Error, Result};
