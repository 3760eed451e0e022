//! Train word-level vanilla RNN and LSTM language models, then study them as
//! iterative maps: closed-loop orbits, output-period detection and
//! verification, sink analysis, period statistics and PCA orbit plots.

pub mod cells;
pub mod cli;
pub mod corpus;
pub mod error;
pub mod exec;
pub mod numerics;
pub mod orbit;
pub mod report;
pub mod trainer;

pub use error::{Error, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");
