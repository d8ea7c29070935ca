use crate::distributions::{check_finite, BinIndex};
use crate::error::{Error, Result};
use crate::series::LogQuadKernel;

/// `Σ_{k ≥ k_min} k^(−alpha)`, relative error below 1e-10.
///
/// Sums directly up to a crossover index and closes the tail with an
/// Euler–Maclaurin expansion (integral term plus six Bernoulli corrections).
pub fn powerlaw_normalizer(alpha: f64, k_min: BinIndex) -> Result<f64> {
    Ok(ln_normalizer(alpha, k_min)?.exp())
}

fn ln_normalizer(alpha: f64, k_min: BinIndex) -> Result<f64> {
    check_finite("alpha", alpha)?;
    if alpha <= 1.0 {
        return Err(Error::Divergent(format!(
            "sum of k^-alpha diverges for alpha = {alpha} <= 1"
        )));
    }
    Ok(LogQuadKernel::new(-alpha, 0.0).ln_tail_sum(k_min.get()))
}

/// Discrete power law `p(k) = k^(−alpha) / Z` on `k ≥ k_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerLawModel {
    alpha: f64,
    k_min: BinIndex,
    ln_z: f64,
}

impl PowerLawModel {
    pub fn new(alpha: f64, k_min: BinIndex) -> Result<Self> {
        let ln_z = ln_normalizer(alpha, k_min)?;
        Ok(Self { alpha, k_min, ln_z })
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn k_min(&self) -> BinIndex {
        self.k_min
    }

    pub fn normalizer(&self) -> f64 {
        self.ln_z.exp()
    }

    pub fn ln_normalizer(&self) -> f64 {
        self.ln_z
    }

    #[inline]
    pub(crate) fn ln_pmf_raw(&self, k: u64) -> f64 {
        -self.alpha * (k as f64).ln() - self.ln_z
    }

    pub(crate) fn ccdf_raw(&self, k: u64) -> f64 {
        if k <= self.k_min.get() {
            return 1.0;
        }
        let tail = LogQuadKernel::new(-self.alpha, 0.0).ln_tail_sum(k);
        (tail - self.ln_z).exp()
    }
}
