//! Continuous-time Markov chains on weighted graphs: adapted path metrics,
//! volume-growth escape rates, edge subdivision, a Schrödinger
//! super-solution and a Monte Carlo harness for the minimal chain.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod ctmc;
pub mod error;
pub mod experiments;
pub mod families;
pub mod graph;
pub mod heat;
pub mod io;
pub mod modify;
pub mod rate;
pub mod schrodinger;

pub use error::{Error, Result};
