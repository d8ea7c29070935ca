//! Heavy-tailed model fitting for file-size corpora.
//!
//! File sizes are binned into 1 KB bins (`k = floor(bytes / 1024) + 1`) and the
//! tail of each per-category histogram is fitted with a discrete power law, a
//! discrete log-normal and a discrete exponential. Each family's parameters are
//! estimated by maximum likelihood for every candidate lower bound `k_min`; the
//! lower bound is then chosen by minimizing the residual sum of squares between
//! the empirical and model complementary cumulative distributions.
//!
//! The [`maxent`] module holds the maximum-entropy family
//! `p(k) ∝ exp(−λ_s·k − λ₁·ln k − λ₂·ln² k)` that contains all three fitted
//! families as corner cases, a dual Newton solver for its multipliers, and a
//! corpus synthesizer used to generate verification data.

pub mod cli;
pub mod distributions;
pub mod error;
pub mod fitting;
pub mod graphstats;
pub mod histogram;
pub mod ingestion;
pub mod maxent;
mod optimize;
mod series;

pub use distributions::{BinIndex, Family, TailModel};
pub use error::{Error, Result};
pub use histogram::SizeHistogram;

/// Bytes per histogram bin.
pub const BIN_BYTES: u64 = 1024;

/// Default cap on file sizes considered for fitting (10 GiB).
pub const DEFAULT_CAP_BYTES: u64 = 10 * (1 << 30);
