// Independent reference computations: plain summation with a closed-form
// integral remainder, no shared code with the library's series machinery.
#![allow(dead_code)]

use tailfit::distributions::{ExponentialModel, LogNormalModel, PowerLawModel};
use tailfit::{BinIndex, TailModel};

pub const BRUTE_TERMS: u64 = 1_000_000;

pub fn bin(k: u64) -> BinIndex {
    BinIndex::new(k).unwrap()
}

/// Neumaier-compensated sum of `f(k)` for `k` in `lo..=hi`, largest index first.
pub fn sum_desc(lo: u64, hi: u64, f: impl Fn(f64) -> f64) -> f64 {
    let (mut s, mut c) = (0.0f64, 0.0f64);
    for k in (lo..=hi).rev() {
        let x = f(k as f64);
        let t = s + x;
        if s.abs() >= x.abs() {
            c += (s - t) + x;
        } else {
            c += (x - t) + s;
        }
        s = t;
    }
    s + c
}

/// `Σ_{k ≥ k_min} k^{−α}`: direct sum up to `k_min + BRUTE_TERMS`, then the
/// midpoint integral `∫_{N+½}^∞ x^{−α} dx`.
pub fn powerlaw_z(alpha: f64, k_min: u64) -> f64 {
    let n = k_min + BRUTE_TERMS;
    let head = sum_desc(k_min, n, |k| k.powf(-alpha));
    let edge = n as f64 + 0.5;
    head + edge.powf(1.0 - alpha) / (alpha - 1.0)
}

/// `Σ_{k ≥ k_min} (1/k)·exp(−(ln k − μ)²/(2σ²))` with the Gaussian integral
/// tail `σ·√(π/2)·erfc((ln(N+½) − μ)/(σ√2))`.
pub fn lognormal_z(mu: f64, sigma: f64, k_min: u64) -> f64 {
    let n = k_min + BRUTE_TERMS;
    let kern = |k: f64| {
        let z = (k.ln() - mu) / sigma;
        (-0.5 * z * z).exp() / k
    };
    let head = sum_desc(k_min, n, kern);
    let edge = (n as f64 + 0.5).ln();
    let tail = sigma * (std::f64::consts::PI / 2.0).sqrt() * libm::erfc((edge - mu) / (sigma * std::f64::consts::SQRT_2));
    head + tail
}

pub fn powerlaw(alpha: f64, k_min: u64) -> TailModel {
    PowerLawModel::new(alpha, bin(k_min)).unwrap().into()
}

pub fn lognormal(mu: f64, sigma: f64, k_min: u64) -> TailModel {
    LogNormalModel::new(mu, sigma, bin(k_min)).unwrap().into()
}

pub fn exponential(lambda: f64, k_min: u64) -> TailModel {
    ExponentialModel::new(lambda, bin(k_min)).unwrap().into()
}

/// Kolmogorov–Smirnov distance between draws and a model, over bins.
pub fn ks_distance(draws: &tailfit::SizeHistogram, model: &TailModel) -> f64 {
    let n = draws.total() as f64;
    let mut above = n;
    let mut worst: f64 = 0.0;
    for (k, c) in draws.bins() {
        let emp = above / n;
        let model_ccdf = model.ccdf(bin(k)).unwrap();
        worst = worst.max((emp - model_ccdf).abs());
        above -= c as f64;
        let next = model.ccdf(bin(k + 1)).unwrap();
        worst = worst.max((above / n - next).abs());
    }
    worst
}
