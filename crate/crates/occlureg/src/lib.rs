//! Files, experiments and the command line around [`occlureg_core`].

// `!(x > 0.0)` is how NaN gets rejected alongside nonpositive values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod io;

pub use error::{Error, Result};
pub mod bench;
pub mod commands;
pub mod config;
pub mod harness;
pub mod report;
