use crate::distributions::{check_finite, BinIndex};
use crate::error::{domain, Result};
use crate::series::LogQuadKernel;

/// Kernel `(1/k)·exp(−(ln k − μ)²/(2σ²))` rewritten as `exp(a·ln k + b·ln² k + c)`.
fn kernel(mu: f64, sigma: f64) -> (LogQuadKernel, f64) {
    let var = sigma * sigma;
    let a = -1.0 + mu / var;
    let b = -1.0 / (2.0 * var);
    let c = -mu * mu / (2.0 * var);
    (LogQuadKernel::new(a, b), c)
}

fn validate(mu: f64, sigma: f64) -> Result<()> {
    check_finite("mu", mu)?;
    check_finite("sigma", sigma)?;
    if sigma <= 0.0 {
        return Err(domain(format!("sigma must be > 0, got {sigma}")));
    }
    Ok(())
}

/// `Σ_{k ≥ k_min} (1/k)·exp(−(ln k − μ)²/(2σ²))`, relative error below 1e-10.
pub fn lognormal_normalizer(mu: f64, sigma: f64, k_min: BinIndex) -> Result<f64> {
    validate(mu, sigma)?;
    let (kernel, c) = kernel(mu, sigma);
    Ok((c + kernel.ln_tail_sum(k_min.get())).exp())
}

/// Discrete log-normal `p(k) ∝ (1/k)·exp(−(ln k − μ)²/(2σ²))` on `k ≥ k_min`.
///
/// `mu` and `sigma` live on the natural-log scale of bin indices (log-KB).
#[derive(Debug, Clone, PartialEq)]
pub struct LogNormalModel {
    mu: f64,
    sigma: f64,
    k_min: BinIndex,
    kernel: LogQuadKernel,
    // ln of the kernel sum without the constant factor exp(c)
    ln_kernel_z: f64,
    c: f64,
}

impl LogNormalModel {
    pub fn new(mu: f64, sigma: f64, k_min: BinIndex) -> Result<Self> {
        validate(mu, sigma)?;
        let (kernel, c) = kernel(mu, sigma);
        let ln_kernel_z = kernel.ln_tail_sum(k_min.get());
        Ok(Self { mu, sigma, k_min, kernel, ln_kernel_z, c })
    }

    pub fn mu(&self) -> f64 {
        self.mu
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    pub fn k_min(&self) -> BinIndex {
        self.k_min
    }

    pub fn normalizer(&self) -> f64 {
        (self.c + self.ln_kernel_z).exp()
    }

    #[inline]
    pub(crate) fn ln_pmf_raw(&self, k: u64) -> f64 {
        self.kernel.ln_term(k as f64) - self.ln_kernel_z
    }

    #[inline]
    pub(crate) fn ln_pmf_at_log(&self, u: f64) -> f64 {
        self.kernel.ln_term_at_log(u) - self.ln_kernel_z
    }

    pub(crate) fn ccdf_raw(&self, k: u64) -> f64 {
        if k <= self.k_min.get() {
            return 1.0;
        }
        (self.kernel.ln_tail_sum(k) - self.ln_kernel_z).exp()
    }
}
