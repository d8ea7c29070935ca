use std::io;

use thiserror::Error;

/// Errors produced anywhere in the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("divergent series: {0}")]
    Divergent(String),

    #[error("empty tail: no mass at or above k_min = {k_min}")]
    EmptyTail { k_min: u64 },

    #[error("insufficient tail data: {count} counts at k >= {k_min}, need at least {required}")]
    InsufficientTail { k_min: u64, count: u64, required: u64 },

    #[error("degenerate tail: {0}")]
    Degenerate(String),

    #[error("no candidate k_min produced a fit: {}", format_failures(.0))]
    NoFit(Vec<(u64, String)>),

    #[error("infeasible moment targets: {0}")]
    Infeasible(String),

    #[error("solver did not converge after {iterations} iterations (residual {residual:e})")]
    NoConvergence { iterations: usize, residual: f64 },

    #[error("malformed input: {0}")]
    Format(String),

    #[error("I/O error: {0}")]
    Io(#[from] io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

fn format_failures(failures: &[(u64, String)]) -> String {
    const SHOWN: usize = 8;
    let mut out = failures
        .iter()
        .take(SHOWN)
        .map(|(k, why)| format!("k_min={k}: {why}"))
        .collect::<Vec<_>>()
        .join("; ");
    if failures.len() > SHOWN {
        out.push_str(&format!("; ... {} more", failures.len() - SHOWN));
    }
    out
}

pub(crate) fn domain(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}
