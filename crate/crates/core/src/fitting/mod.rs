//! Tail fitting in two steps: maximum-likelihood parameters for every
//! candidate lower bound, then the lower bound whose fit has the smallest
//! residual sum of squares between empirical and model CCDFs.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::distributions::{BinIndex, ExponentialModel, Family, LogNormalModel, PowerLawModel, TailModel};
use crate::error::{domain, Error, Result};
use crate::histogram::SizeHistogram;
use crate::optimize::{brent_min, nelder_mead};
use crate::series::{KahanSum, LogQuadKernel};
use crate::BIN_BYTES;

mod report;

pub use report::{empirical_ccdf, fit_to_json, model_ccdf_curve, write_ccdf_csv, ComparisonReport, FamilyOutcome};

/// Fewest tail counts a candidate `k_min` needs before it is fitted.
pub const MIN_TAIL_COUNT: u64 = 100;
/// Upper end of the power-law exponent search; the lower end is 1 (exclusive).
pub const ALPHA_MAX: f64 = 6.0;
/// Admissible log-normal `sigma`; estimates pinned to either end are flagged.
pub const SIGMA_BOUNDS: (f64, f64) = (1e-3, 1e3);
/// Smallest admissible log-normal `mu` (median of 1 KB). Below it the fitted
/// curve is a power law in disguise: `mu → −∞`, `sigma → ∞` with `mu/sigma²`
/// fixed reproduces `k^(−alpha)` exactly.
pub const MU_MIN: f64 = 0.0;

const ALPHA_FLOOR: f64 = 1.0 + 1e-9;
const PARAM_TOL: f64 = 1e-6;
const SIMPLEX_RESTARTS: usize = 3;
const LN_TABLE_MAX: u64 = 1 << 23;

/// Default candidate grid: 256 log-spaced bins from 1 KB to 100 MB.
pub fn default_grid() -> Vec<BinIndex> {
    log_grid(BinIndex::ONE, BinIndex::from_size_bytes(100 * 1024 * 1024 - 1), 256)
        .expect("static grid bounds are valid")
}

/// `points` log-spaced integer bins on `[lo, hi]`, rounded and deduplicated.
pub fn log_grid(lo: BinIndex, hi: BinIndex, points: usize) -> Result<Vec<BinIndex>> {
    if lo > hi {
        return Err(domain(format!("grid bounds out of order: {lo} > {hi}")));
    }
    if points == 0 {
        return Err(domain("grid needs at least one point"));
    }
    let (a, b) = ((lo.get() as f64).ln(), (hi.get() as f64).ln());
    let mut grid: Vec<BinIndex> = (0..points)
        .map(|i| {
            let t = if points == 1 { 0.0 } else { i as f64 / (points - 1) as f64 };
            let k = (a + t * (b - a)).exp().round() as u64;
            BinIndex::new(k.clamp(lo.get(), hi.get())).expect("clamped into [lo, hi]")
        })
        .collect();
    grid.dedup();
    Ok(grid)
}

/// Drops every bin whose lower edge lies above `cap_bytes`.
pub fn truncate(hist: &SizeHistogram, cap_bytes: u64) -> Result<SizeHistogram> {
    if cap_bytes == 0 {
        return Err(domain("cap_bytes must be > 0"));
    }
    let last = cap_bytes / BIN_BYTES + 1;
    Ok(SizeHistogram::from_sorted_counts(hist.bins().take_while(|&(k, _)| k <= last)))
}

/// Maximum-likelihood parameters at one fixed `k_min`.
#[derive(Debug, Clone, PartialEq)]
pub struct Estimate {
    pub model: TailModel,
    pub log_likelihood: f64,
    /// The optimum sits on the edge of the admissible parameter range.
    pub at_boundary: bool,
}

impl Estimate {
    pub fn param(&self, name: &str) -> Option<f64> {
        self.model.parameter(name)
    }
}

/// A fitted tail together with its goodness of fit.
#[derive(Debug, Clone, PartialEq)]
pub struct FitResult {
    pub model: TailModel,
    pub k_min: BinIndex,
    pub rss: f64,
    /// Share of all counts at `k ≥ k_min`.
    pub tail_fraction: f64,
    pub tail_count: u64,
    pub log_likelihood: f64,
    pub at_boundary: bool,
}

impl FitResult {
    pub fn family(&self) -> Option<Family> {
        self.model.family()
    }

    pub fn param(&self, name: &str) -> Option<f64> {
        self.model.parameter(name)
    }
}

#[derive(Debug, Clone, Copy)]
struct TailStats {
    count: u64,
    // Σ n·k, exact
    sum_k: u128,
    distinct: usize,
    // index of the first bin in the tail
    start: usize,
}

/// Fits one histogram. Per-`k_min` sufficient statistics are precomputed once
/// so that scanning many candidates stays cheap.
pub struct Fitter<'h> {
    hist: &'h SizeHistogram,
    min_tail: u64,
    keys: Vec<u64>,
    counts: Vec<u64>,
    // suffix[i] covers keys[i..]
    suffix: Vec<TailStats>,
    ln_table: OnceLock<Vec<f64>>,
}

impl<'h> Fitter<'h> {
    pub fn new(hist: &'h SizeHistogram) -> Self {
        let (keys, counts): (Vec<u64>, Vec<u64>) = hist.bins().unzip();
        let mut suffix = Vec::with_capacity(keys.len() + 1);
        let mut st = TailStats { count: 0, sum_k: 0, distinct: 0, start: keys.len() };
        suffix.push(st);
        for (i, (&k, &n)) in keys.iter().zip(&counts).enumerate().rev() {
            st = TailStats {
                count: st.count + n,
                sum_k: st.sum_k + n as u128 * k as u128,
                distinct: st.distinct + 1,
                start: i,
            };
            suffix.push(st);
        }
        suffix.reverse();
        Self { hist, min_tail: MIN_TAIL_COUNT, keys, counts, suffix, ln_table: OnceLock::new() }
    }

    /// Overrides the minimum tail support (default [`MIN_TAIL_COUNT`]).
    pub fn with_min_tail(mut self, min_tail: u64) -> Self {
        self.min_tail = min_tail.max(1);
        self
    }

    pub fn histogram(&self) -> &SizeHistogram {
        self.hist
    }

    fn first_at_or_above(&self, k: u64) -> usize {
        self.keys.partition_point(|&x| x < k)
    }

    /// Tail means of `ln k` and `ln² k`. Weights are `n_k / N`, which are
    /// bit-for-bit unchanged when every count is scaled by the same integer,
    /// so fits are exactly count-scale invariant.
    fn log_moments(&self, st: &TailStats) -> (f64, f64) {
        let total = st.count as f64;
        let (mut s1, mut s2) = (KahanSum::default(), KahanSum::default());
        for i in (st.start..self.keys.len()).rev() {
            let w = self.counts[i] as f64 / total;
            let u = self.ln_k(self.keys[i]);
            s1.add(w * u);
            s2.add(w * u * u);
        }
        (s1.value(), s2.value())
    }

    fn tail(&self, k_min: BinIndex) -> Result<TailStats> {
        let st = self.suffix[self.first_at_or_above(k_min.get())];
        if st.count == 0 {
            return Err(Error::EmptyTail { k_min: k_min.get() });
        }
        if st.count < self.min_tail {
            return Err(Error::InsufficientTail { k_min: k_min.get(), count: st.count, required: self.min_tail });
        }
        Ok(st)
    }

    pub fn powerlaw(&self, k_min: BinIndex) -> Result<Estimate> {
        let st = self.tail(k_min)?;
        if st.distinct == 1 {
            return Err(Error::Degenerate(format!(
                "all tail mass at a single bin (k_min = {k_min}); the exponent is unbounded"
            )));
        }
        let n = st.count as f64;
        let (mean_ln, _) = self.log_moments(&st);
        let from = k_min.get();
        let neg_mean_ll = |alpha: f64| alpha * mean_ln + LogQuadKernel::new(-alpha, 0.0).ln_tail_sum(from);
        let best = brent_min(neg_mean_ll, ALPHA_FLOOR, ALPHA_MAX, PARAM_TOL / 10.0);
        let at_boundary = best.x > ALPHA_MAX - 10.0 * PARAM_TOL || best.x < 1.0 + 10.0 * PARAM_TOL;
        if at_boundary {
            log::warn!("power-law exponent at the edge of (1, {ALPHA_MAX}] for k_min = {k_min}: {}", best.x);
        }
        Ok(Estimate {
            model: PowerLawModel::new(best.x, k_min)?.into(),
            log_likelihood: -n * best.value,
            at_boundary,
        })
    }

    pub fn lognormal(&self, k_min: BinIndex) -> Result<Estimate> {
        let st = self.tail(k_min)?;
        let n = st.count as f64;
        let (m1, m2) = self.log_moments(&st);
        let var = m2 - m1 * m1;
        if st.distinct == 1 || var <= 0.0 {
            return Err(Error::Degenerate(format!(
                "all tail mass at a single bin (k_min = {k_min}); sigma collapses to 0"
            )));
        }
        let sd = var.sqrt();
        let from = k_min.get();
        let b_lo = -1.0 / (2.0 * SIGMA_BOUNDS.0 * SIGMA_BOUNDS.0);
        let b_hi = -1.0 / (2.0 * SIGMA_BOUNDS.1 * SIGMA_BOUNDS.1);

        // The likelihood is concave in the natural parameters (a, b) of the
        // kernel exp(a·ln k + b·ln² k). The simplex works on a centred and
        // scaled copy of them so both coordinates are O(1) and weakly coupled.
        let natural = |x: &[f64]| {
            let b = x[1] / var;
            (x[0] / sd - 2.0 * b * m1, b)
        };
        let objective = |x: &[f64]| {
            let (a, b) = natural(x);
            // mu = (a + 1)·sigma² ≥ MU_MIN
            if !(b_lo..=b_hi).contains(&b) || (a + 1.0) < -2.0 * b * MU_MIN {
                return f64::INFINITY;
            }
            let v = LogQuadKernel::new(a, b).ln_tail_sum(from) - a * m1 - b * m2;
            if v.is_finite() {
                v
            } else {
                f64::INFINITY
            }
        };

        // moment-matched start: mu = m1, sigma = sd
        let mut x = vec![-sd, -0.5];
        let mut value = objective(&x);
        for round in 0..=SIMPLEX_RESTARTS {
            let r = nelder_mead(objective, &x, &[0.1, 0.05], PARAM_TOL / 10.0, 4000);
            let moved = r.x.iter().zip(&x).map(|(p, q)| (p - q).abs()).fold(0.0, f64::max);
            if r.value <= value {
                x = r.x;
                value = r.value;
            }
            if round > 0 && moved < PARAM_TOL {
                break;
            }
        }
        if !value.is_finite() {
            return Err(Error::NoConvergence { iterations: SIMPLEX_RESTARTS + 1, residual: value });
        }
        let (a, b) = natural(&x);
        let var_fit = -1.0 / (2.0 * b);
        let sigma = var_fit.sqrt();
        let mu = (a + 1.0) * var_fit;
        let at_boundary =
            sigma > SIGMA_BOUNDS.1 * 0.99 || sigma < SIGMA_BOUNDS.0 * 1.01 || mu < MU_MIN + 1e-3 * sigma;
        if at_boundary {
            log::debug!("log-normal fit on the parameter boundary at k_min = {k_min}: mu {mu}, sigma {sigma}");
        }
        Ok(Estimate {
            model: LogNormalModel::new(mu, sigma, k_min)?.into(),
            log_likelihood: -n * value,
            at_boundary,
        })
    }

    pub fn exponential(&self, k_min: BinIndex) -> Result<Estimate> {
        let st = self.tail(k_min)?;
        // Σ n·(k − k_min), exact
        let excess = st.sum_k - st.count as u128 * k_min.get() as u128;
        if excess == 0 {
            return Err(Error::Degenerate(format!(
                "tail mean equals k_min = {k_min}; the decay rate is unbounded"
            )));
        }
        let n = st.count as f64;
        let g = gcd(st.count as u128, excess);
        let lambda = ((st.count as u128 / g) as f64 / (excess / g) as f64).ln_1p();
        let excess = excess as f64;
        let model = ExponentialModel::new(lambda, k_min)?;
        let log_likelihood = n * (-(-lambda).exp_m1()).ln() - lambda * excess;
        Ok(Estimate { model: model.into(), log_likelihood, at_boundary: false })
    }

    pub fn estimate(&self, family: Family, k_min: BinIndex) -> Result<Estimate> {
        match family {
            Family::PowerLaw => self.powerlaw(k_min),
            Family::LogNormal => self.lognormal(k_min),
            Family::Exponential => self.exponential(k_min),
        }
    }

    fn ln_k(&self, k: u64) -> f64 {
        let table = self.ln_table.get_or_init(|| {
            let top = self.keys.last().copied().unwrap_or(0).min(LN_TABLE_MAX);
            (0..=top).map(|k| (k as f64).ln()).collect()
        });
        match table.get(k as usize) {
            Some(&v) => v,
            None => (k as f64).ln(),
        }
    }

    /// Squared distance between the renormalized empirical tail CCDF and the
    /// model CCDF, summed over every integer bin in `[model.k_min, k_max_observed]`.
    pub fn rss(&self, model: &TailModel) -> Result<f64> {
        let k_min = model.k_min().get();
        let first = self.first_at_or_above(k_min);
        let total = self.suffix[first].count;
        if total == 0 {
            return Err(Error::EmptyTail { k_min });
        }
        let k_max = *self.keys.last().expect("non-empty tail");
        let support_end = model.k_max().map(BinIndex::get);
        let beyond = |k: u64| support_end.is_some_and(|hi| k > hi);

        let mut model_tail = KahanSum::default();
        model_tail.add(if beyond(k_max + 1) { 0.0 } else { model.ccdf_raw(k_max + 1) });
        let n = total as f64;
        let mut at_or_above = 0u64;
        let mut next = self.keys.len();
        let mut acc = KahanSum::default();
        for k in (k_min..=k_max).rev() {
            if next > first && self.keys[next - 1] == k {
                next -= 1;
                at_or_above += self.counts[next];
            }
            if !beyond(k) {
                model_tail.add(model.ln_pmf_at(k, self.ln_k(k)).exp());
            }
            let d = at_or_above as f64 / n - model_tail.value();
            acc.add(d * d);
        }
        Ok(acc.value())
    }

    /// Estimate plus goodness of fit at one `k_min`.
    pub fn fit_at(&self, family: Family, k_min: BinIndex) -> Result<FitResult> {
        let est = self.estimate(family, k_min)?;
        let rss = self.rss(&est.model)?;
        let tail_count = self.suffix[self.first_at_or_above(k_min.get())].count;
        Ok(FitResult {
            model: est.model,
            k_min,
            rss,
            tail_fraction: tail_count as f64 / self.hist.total() as f64,
            tail_count,
            log_likelihood: est.log_likelihood,
            at_boundary: est.at_boundary,
        })
    }

    /// Fits every grid candidate (concurrently) and keeps the one with the
    /// smallest rss; ties go to the smaller `k_min`.
    pub fn scan(&self, family: Family, grid: &[BinIndex]) -> Result<FitResult> {
        let mut grid = grid.to_vec();
        grid.sort_unstable();
        grid.dedup();
        if grid.is_empty() {
            return Err(domain("k_min grid is empty"));
        }
        let outcomes: Vec<Result<FitResult>> = grid.par_iter().map(|&k| self.fit_at(family, k)).collect();
        let mut best: Option<FitResult> = None;
        let mut failures = Vec::new();
        for (k, outcome) in grid.iter().zip(outcomes) {
            match outcome {
                Ok(fit) if fit.rss.is_finite() => {
                    if best.as_ref().is_none_or(|b| fit.rss < b.rss) {
                        best = Some(fit);
                    }
                }
                Ok(fit) => failures.push((k.get(), format!("rss is not finite ({})", fit.rss))),
                Err(e) => failures.push((k.get(), e.to_string())),
            }
        }
        best.ok_or(Error::NoFit(failures))
    }

    /// Scans each family and ranks the outcomes by rss.
    pub fn compare(&self, families: &[Family], grid: &[BinIndex]) -> Result<ComparisonReport> {
        if grid.is_empty() {
            return Err(domain("k_min grid is empty"));
        }
        let outcomes = families
            .iter()
            .map(|&family| FamilyOutcome {
                family,
                result: self.scan(family, grid).map_err(|e| e.to_string()),
            })
            .collect();
        Ok(ComparisonReport::new(outcomes))
    }
}

pub fn fit_powerlaw_alpha(hist: &SizeHistogram, k_min: BinIndex) -> Result<Estimate> {
    Fitter::new(hist).powerlaw(k_min)
}

pub fn fit_lognormal(hist: &SizeHistogram, k_min: BinIndex) -> Result<Estimate> {
    Fitter::new(hist).lognormal(k_min)
}

pub fn fit_exponential(hist: &SizeHistogram, k_min: BinIndex) -> Result<Estimate> {
    Fitter::new(hist).exponential(k_min)
}

pub fn rss(hist: &SizeHistogram, model: &TailModel) -> Result<f64> {
    Fitter::new(hist).rss(model)
}

pub fn scan_kmin(hist: &SizeHistogram, family: Family, grid: &[BinIndex]) -> Result<FitResult> {
    Fitter::new(hist).scan(family, grid)
}

pub fn compare_models(hist: &SizeHistogram, grid: &[BinIndex]) -> Result<ComparisonReport> {
    Fitter::new(hist).compare(&Family::ALL, grid)
}

fn gcd(mut a: u128, mut b: u128) -> u128 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a
}
