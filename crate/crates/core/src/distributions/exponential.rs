use crate::distributions::{check_finite, BinIndex};
use crate::error::{domain, Result};

/// Shifted geometric `p(k) = (1 − e^(−λ))·e^(−λ(k − k_min))` on `k ≥ k_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct ExponentialModel {
    lambda: f64,
    k_min: BinIndex,
    // ln(1 − e^(−λ))
    ln_head: f64,
}

impl ExponentialModel {
    pub fn new(lambda: f64, k_min: BinIndex) -> Result<Self> {
        check_finite("lambda", lambda)?;
        if lambda <= 0.0 {
            return Err(domain(format!("lambda must be > 0, got {lambda}")));
        }
        let ln_head = (-(-lambda).exp_m1()).ln();
        Ok(Self { lambda, k_min, ln_head })
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn k_min(&self) -> BinIndex {
        self.k_min
    }

    /// `Σ_{k ≥ k_min} e^(−λk)`.
    pub fn normalizer(&self) -> f64 {
        (-self.lambda * self.k_min.get() as f64 - self.ln_head).exp()
    }

    #[inline]
    pub(crate) fn ln_pmf_raw(&self, k: u64) -> f64 {
        self.ln_head - self.lambda * (k - self.k_min.get()) as f64
    }

    pub(crate) fn ccdf_raw(&self, k: u64) -> f64 {
        if k <= self.k_min.get() {
            return 1.0;
        }
        (-self.lambda * (k - self.k_min.get()) as f64).exp()
    }
}
