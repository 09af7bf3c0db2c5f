// `!(x >= 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod channels;
pub mod cli;
pub mod error;
pub mod generators;
pub mod integrator;
pub mod output;
pub mod propagate;
pub mod quadrature;
pub mod rdm;
pub mod representability;
pub mod scenario;
