//! File formats, corpus loading and the experiment runner around
//! [`ensemblekit_core`].
//!
//! * [`corpus`] reads and writes opcode corpora (`root/<family>/<sample>`);
//! * [`synthetic`] generates Markov-chain corpora in that layout;
//! * [`config`] parses and validates experiment configs;
//! * [`run`] trains, evaluates and writes reports; it also drives [`grid`]
//!   searches;
//! * [`persist`] stores trained models as versioned JSON.

pub mod config;
pub mod corpus;
pub mod dataset;
pub mod error;
pub mod files;
pub mod grid;
pub mod persist;
pub mod presets;
pub mod run;
pub mod synthetic;

pub use ensemblekit_core as core;
pub use error::{ConfigIssue, Error, Result};
