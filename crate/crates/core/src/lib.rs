//! p-adic balls and compact opens, graphs embedded in `Q_p`, the vertex,
//! gradient, divergence and edge operators built on them, and heat-trace
//! index estimates.

// `!(x > 0.0)` is used on purpose so that NaN is rejected too.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod embedding;
pub mod graph;
pub mod heat;
pub mod io;
pub mod mumford;
pub mod operators;
pub mod padic;
pub mod spectral;
