//! Digit-distribution forensics for per-area election vote tables.
//!
//! The crate is organised bottom-up:
//!
//! * [`vote_data`]: parsing, validation and querying of the per-area table.
//! * [`benford`]: digit extraction, log folding and the reference digit models.
//! * [`stat_tests`]: Poisson tails, chi-square, exact two-sample KS, Spearman,
//!   log skewness and multiple-comparison corrections.
//! * [`scatter_sim`]: seeded, parallel Monte Carlo null models.
//! * [`anomaly`]: the post-hoc analyses and the end-to-end report.
//! * [`report`]: figure-data emitters, number formatting and serialisation.
//! * [`cli`]: the command-line front end behind the `digit-forensics` binary.

// `!(x > 0.0)` is used on purpose so that NaN fails the check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod anomaly;
pub mod benford;
pub mod cli;
mod error;
pub mod report;
pub mod scatter_sim;
pub mod stat_tests;
pub mod vote_data;

pub use error::{Error, Result};
