//! Discrete tail models on 1 KB bin indices.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::histogram::SizeHistogram;
use crate::maxent::MaxEntModel;

mod exponential;
mod lognormal;
mod powerlaw;
mod sampler;

pub use exponential::ExponentialModel;
pub use lognormal::{lognormal_normalizer, LogNormalModel};
pub use powerlaw::{powerlaw_normalizer, PowerLawModel};
pub use sampler::{sample, Sampler};

/// A 1 KB bin index, always `≥ 1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u64", into = "u64")]
#[repr(transparent)]
pub struct BinIndex(u64);

impl BinIndex {
    pub const ONE: BinIndex = BinIndex(1);

    pub fn new(k: u64) -> Result<Self> {
        if k == 0 {
            return Err(domain("bin index must be >= 1"));
        }
        Ok(BinIndex(k))
    }

    /// Bin holding a file of `bytes` bytes: `floor(bytes / 1024) + 1`.
    pub fn from_size_bytes(bytes: u64) -> Self {
        BinIndex(bytes / crate::BIN_BYTES + 1)
    }

    #[inline]
    pub fn get(self) -> u64 {
        self.0
    }

    /// Smallest byte size mapped to this bin.
    pub fn lower_edge_bytes(self) -> u64 {
        (self.0 - 1).saturating_mul(crate::BIN_BYTES)
    }
}

impl TryFrom<u64> for BinIndex {
    type Error = Error;
    fn try_from(k: u64) -> Result<Self> {
        BinIndex::new(k)
    }
}

impl From<BinIndex> for u64 {
    fn from(k: BinIndex) -> u64 {
        k.0
    }
}

impl fmt::Display for BinIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        self.0.fmt(f)
    }
}

/// The fitted model families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    PowerLaw,
    LogNormal,
    Exponential,
}

impl Family {
    pub const ALL: [Family; 3] = [Family::PowerLaw, Family::LogNormal, Family::Exponential];

    pub fn label(self) -> &'static str {
        match self {
            Family::PowerLaw => "powerlaw",
            Family::LogNormal => "lognormal",
            Family::Exponential => "exponential",
        }
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Family {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "powerlaw" | "power-law" => Ok(Family::PowerLaw),
            "lognormal" | "log-normal" => Ok(Family::LogNormal),
            "exponential" => Ok(Family::Exponential),
            other => Err(domain(format!("unknown family '{other}'"))),
        }
    }
}

/// Any discrete tail model. All variants are immutable once built and carry
/// their normalizer.
#[derive(Debug, Clone, PartialEq)]
pub enum TailModel {
    PowerLaw(PowerLawModel),
    LogNormal(LogNormalModel),
    Exponential(ExponentialModel),
    MaxEnt(MaxEntModel),
}

impl TailModel {
    pub fn k_min(&self) -> BinIndex {
        match self {
            TailModel::PowerLaw(m) => m.k_min(),
            TailModel::LogNormal(m) => m.k_min(),
            TailModel::Exponential(m) => m.k_min(),
            TailModel::MaxEnt(m) => m.k_min(),
        }
    }

    /// Upper end of the support, if finite.
    pub fn k_max(&self) -> Option<BinIndex> {
        match self {
            TailModel::MaxEnt(m) => m.k_max(),
            _ => None,
        }
    }

    pub fn family(&self) -> Option<Family> {
        match self {
            TailModel::PowerLaw(_) => Some(Family::PowerLaw),
            TailModel::LogNormal(_) => Some(Family::LogNormal),
            TailModel::Exponential(_) => Some(Family::Exponential),
            TailModel::MaxEnt(_) => None,
        }
    }

    /// Named parameters, in a fixed order per family.
    pub fn parameters(&self) -> Vec<(&'static str, f64)> {
        match self {
            TailModel::PowerLaw(m) => vec![("alpha", m.alpha())],
            TailModel::LogNormal(m) => vec![("mu", m.mu()), ("sigma", m.sigma())],
            TailModel::Exponential(m) => vec![("lambda", m.lambda())],
            TailModel::MaxEnt(m) => {
                let [s, l1, l2] = m.multipliers();
                vec![("lambda_s", s), ("lambda_1", l1), ("lambda_2", l2)]
            }
        }
    }

    pub fn parameter(&self, name: &str) -> Option<f64> {
        self.parameters().into_iter().find(|(n, _)| *n == name).map(|(_, v)| v)
    }

    /// `ln p(k)` for `k` in the support; no range check.
    #[inline]
    pub(crate) fn ln_pmf_raw(&self, k: u64) -> f64 {
        match self {
            TailModel::PowerLaw(m) => m.ln_pmf_raw(k),
            TailModel::LogNormal(m) => m.ln_pmf_raw(k),
            TailModel::Exponential(m) => m.ln_pmf_raw(k),
            TailModel::MaxEnt(m) => m.ln_pmf_raw(k),
        }
    }

    /// Same as `ln_pmf_raw` with `ln k` supplied by the caller.
    #[inline]
    pub(crate) fn ln_pmf_at(&self, k: u64, ln_k: f64) -> f64 {
        match self {
            TailModel::PowerLaw(m) => -m.alpha() * ln_k - m.ln_normalizer(),
            TailModel::LogNormal(m) => m.ln_pmf_at_log(ln_k),
            TailModel::Exponential(m) => m.ln_pmf_raw(k),
            TailModel::MaxEnt(m) => m.ln_pmf_raw(k),
        }
    }

    /// `Pr(K ≥ k)` for `k ≥ k_min`; no range check.
    pub(crate) fn ccdf_raw(&self, k: u64) -> f64 {
        match self {
            TailModel::PowerLaw(m) => m.ccdf_raw(k),
            TailModel::LogNormal(m) => m.ccdf_raw(k),
            TailModel::Exponential(m) => m.ccdf_raw(k),
            TailModel::MaxEnt(m) => m.ccdf_raw(k),
        }
    }

    fn check_support(&self, k: BinIndex) -> Result<()> {
        if k < self.k_min() {
            return Err(domain(format!("k = {k} is below k_min = {}", self.k_min())));
        }
        Ok(())
    }

    pub fn pmf(&self, k: BinIndex) -> Result<f64> {
        self.check_support(k)?;
        if self.k_max().is_some_and(|hi| k > hi) {
            return Ok(0.0);
        }
        Ok(self.ln_pmf_raw(k.get()).exp())
    }

    pub fn ccdf(&self, k: BinIndex) -> Result<f64> {
        self.check_support(k)?;
        if self.k_max().is_some_and(|hi| k > hi) {
            return Ok(0.0);
        }
        Ok(self.ccdf_raw(k.get()))
    }

    /// `Σ_{k ≥ k_min} n_k·ln p(k)`.
    pub fn log_likelihood(&self, hist: &SizeHistogram) -> Result<f64> {
        let k_min = self.k_min().get();
        let mut total = 0u64;
        let mut ll = crate::series::KahanSum::default();
        for (k, n) in hist.bins_from(k_min) {
            total += n;
            if self.k_max().is_some_and(|hi| k > hi.get()) {
                ll.add(f64::NEG_INFINITY);
                continue;
            }
            ll.add(n as f64 * self.ln_pmf_raw(k));
        }
        if total == 0 {
            return Err(Error::EmptyTail { k_min });
        }
        Ok(ll.value())
    }
}

impl From<PowerLawModel> for TailModel {
    fn from(m: PowerLawModel) -> Self {
        TailModel::PowerLaw(m)
    }
}

impl From<LogNormalModel> for TailModel {
    fn from(m: LogNormalModel) -> Self {
        TailModel::LogNormal(m)
    }
}

impl From<ExponentialModel> for TailModel {
    fn from(m: ExponentialModel) -> Self {
        TailModel::Exponential(m)
    }
}

impl From<MaxEntModel> for TailModel {
    fn from(m: MaxEntModel) -> Self {
        TailModel::MaxEnt(m)
    }
}

/// Model pmf at `k`.
pub fn pmf(model: &TailModel, k: BinIndex) -> Result<f64> {
    model.pmf(k)
}

/// Model complementary cumulative distribution `Pr(K ≥ k)`.
pub fn ccdf(model: &TailModel, k: BinIndex) -> Result<f64> {
    model.ccdf(k)
}

/// Log-likelihood of the histogram bins at or above the model's `k_min`.
pub fn log_likelihood(model: &TailModel, hist: &SizeHistogram) -> Result<f64> {
    model.log_likelihood(hist)
}

pub(crate) fn check_finite(name: &str, value: f64) -> Result<()> {
    if !value.is_finite() {
        return Err(domain(format!("{name} must be finite, got {value}")));
    }
    Ok(())
}
