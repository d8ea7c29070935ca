//! Maximum-entropy distributions under linear, logarithmic and log-squared
//! costs: `p(k) = exp(−λ_s·k − λ₁·ln k − λ₂·ln² k) / Z`.
//!
//! Maximizing `−Σ p ln p` subject to normalization and fixed expected costs
//! gives exactly this exponential family; its multipliers are recovered from
//! target moments by minimizing the convex dual `ln Z(λ) + Σ λᵢ·tᵢ`.
//! The family contains the power law (`λ₁ = α`), the log-normal
//! (`λ₁ = 1 − μ/σ²`, `λ₂ = 1/(2σ²)`) and the exponential (`λ_s = λ`).

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::distributions::{check_finite, BinIndex, Sampler, TailModel};
use crate::error::{domain, Error, Result};
use crate::ingestion::{Category, FileRecord};
use crate::series::{KahanSum, LogQuadKernel};

/// Largest finite support handled by the dual solver.
pub const MAX_SOLVER_SUPPORT: u64 = 10_000_000;
const MAX_DIRECT_TERMS: u64 = 100_000_000;

/// A cost term whose expectation can be constrained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Moment {
    /// `E[k]`, paired with `λ_s`.
    Linear,
    /// `E[ln k]`, paired with `λ₁`.
    Log,
    /// `E[ln² k]`, paired with `λ₂`.
    LogSquared,
}

impl Moment {
    pub const ALL: [Moment; 3] = [Moment::Linear, Moment::Log, Moment::LogSquared];

    #[inline]
    fn cost(self, k: f64, u: f64) -> f64 {
        match self {
            Moment::Linear => k,
            Moment::Log => u,
            Moment::LogSquared => u * u,
        }
    }

    fn index(self) -> usize {
        self as usize
    }
}

/// Which moment constraints a model was solved against.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActiveSet {
    pub linear: bool,
    pub log: bool,
    pub log_squared: bool,
}

impl ActiveSet {
    pub fn contains(&self, m: Moment) -> bool {
        match m {
            Moment::Linear => self.linear,
            Moment::Log => self.log,
            Moment::LogSquared => self.log_squared,
        }
    }

    pub fn moments(&self) -> Vec<Moment> {
        Moment::ALL.into_iter().filter(|&m| self.contains(m)).collect()
    }

    fn from_moments(moments: &[Moment]) -> Self {
        let mut set = ActiveSet::default();
        for m in moments {
            match m {
                Moment::Linear => set.linear = true,
                Moment::Log => set.log = true,
                Moment::LogSquared => set.log_squared = true,
            }
        }
        set
    }
}

/// Target expectations; `None` leaves that moment unconstrained.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MomentTargets {
    pub e_s: Option<f64>,
    pub e_log: Option<f64>,
    pub e_log2: Option<f64>,
}

impl MomentTargets {
    pub fn get(&self, m: Moment) -> Option<f64> {
        match m {
            Moment::Linear => self.e_s,
            Moment::Log => self.e_log,
            Moment::LogSquared => self.e_log2,
        }
    }

    fn active(&self) -> Vec<(Moment, f64)> {
        Moment::ALL.into_iter().filter_map(|m| self.get(m).map(|t| (m, t))).collect()
    }
}

/// Exact moments `(E[k], E[ln k], E[ln² k])` of a model on finite support.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Moments {
    pub e_s: f64,
    pub e_log: f64,
    pub e_log2: f64,
}

impl Moments {
    pub fn get(&self, m: Moment) -> f64 {
        match m {
            Moment::Linear => self.e_s,
            Moment::Log => self.e_log,
            Moment::LogSquared => self.e_log2,
        }
    }
}

/// `p(k) ∝ exp(−λ_s·k − λ₁·ln k − λ₂·ln² k)` on `[k_min, k_max]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MaxEntModel {
    lambda_s: f64,
    lambda_1: f64,
    lambda_2: f64,
    k_min: BinIndex,
    k_max: Option<BinIndex>,
    ln_z: f64,
    active: ActiveSet,
}

impl MaxEntModel {
    /// Builds a model directly from multipliers. Nonzero multipliers are
    /// recorded as active constraints.
    ///
    /// On infinite support the sum converges iff `λ_s > 0`, or `λ_s = 0` and
    /// `λ₂ > 0`, or `λ_s = λ₂ = 0` and `λ₁ > 1`; negative `λ_s` or `λ₂` are
    /// rejected there. Finite supports accept any finite multipliers.
    pub fn new(
        lambda_s: f64,
        lambda_1: f64,
        lambda_2: f64,
        k_min: BinIndex,
        k_max: Option<BinIndex>,
    ) -> Result<Self> {
        let active = ActiveSet {
            linear: lambda_s != 0.0,
            log: lambda_1 != 0.0,
            log_squared: lambda_2 != 0.0,
        };
        Self::with_active(lambda_s, lambda_1, lambda_2, k_min, k_max, active)
    }

    /// Same as [`MaxEntModel::new`] with an explicit constraint set.
    pub fn with_active(
        lambda_s: f64,
        lambda_1: f64,
        lambda_2: f64,
        k_min: BinIndex,
        k_max: Option<BinIndex>,
        active: ActiveSet,
    ) -> Result<Self> {
        check_finite("lambda_s", lambda_s)?;
        check_finite("lambda_1", lambda_1)?;
        check_finite("lambda_2", lambda_2)?;
        if let Some(hi) = k_max {
            if hi < k_min {
                return Err(domain(format!("k_max = {hi} is below k_min = {k_min}")));
            }
            if hi.get() - k_min.get() >= MAX_DIRECT_TERMS {
                return Err(domain(format!(
                    "finite support of {} bins exceeds the {MAX_DIRECT_TERMS}-bin limit",
                    hi.get() - k_min.get() + 1
                )));
            }
        } else {
            if lambda_s < 0.0 {
                return Err(Error::Divergent(format!(
                    "lambda_s = {lambda_s} < 0 diverges on infinite support"
                )));
            }
            if lambda_2 < 0.0 {
                return Err(Error::Divergent(format!(
                    "lambda_2 = {lambda_2} < 0 diverges on infinite support"
                )));
            }
            if lambda_s == 0.0 && lambda_2 == 0.0 && lambda_1 <= 1.0 {
                return Err(Error::Divergent(format!(
                    "with lambda_s = lambda_2 = 0 convergence needs lambda_1 > 1, got {lambda_1}"
                )));
            }
        }
        let mut model =
            Self { lambda_s, lambda_1, lambda_2, k_min, k_max, ln_z: 0.0, active };
        model.ln_z = model.ln_tail(k_min.get())?;
        Ok(model)
    }

    pub fn lambda_s(&self) -> f64 {
        self.lambda_s
    }

    pub fn lambda_1(&self) -> f64 {
        self.lambda_1
    }

    pub fn lambda_2(&self) -> f64 {
        self.lambda_2
    }

    pub fn k_min(&self) -> BinIndex {
        self.k_min
    }

    pub fn k_max(&self) -> Option<BinIndex> {
        self.k_max
    }

    pub fn active(&self) -> ActiveSet {
        self.active
    }

    pub fn normalizer(&self) -> f64 {
        self.ln_z.exp()
    }

    pub fn ln_normalizer(&self) -> f64 {
        self.ln_z
    }

    /// Same multipliers with `λ₁` replaced; the constraint set is kept.
    pub fn with_lambda_1(&self, lambda_1: f64) -> Result<Self> {
        Self::with_active(self.lambda_s, lambda_1, self.lambda_2, self.k_min, self.k_max, self.active)
    }

    #[inline]
    fn ln_term(&self, k: u64) -> f64 {
        let kf = k as f64;
        let u = kf.ln();
        -self.lambda_s * kf - self.lambda_1 * u - self.lambda_2 * u * u
    }

    #[inline]
    pub(crate) fn ln_pmf_raw(&self, k: u64) -> f64 {
        self.ln_term(k) - self.ln_z
    }

    pub(crate) fn ccdf_raw(&self, k: u64) -> f64 {
        if k <= self.k_min.get() {
            return 1.0;
        }
        match self.ln_tail(k) {
            Ok(t) => (t - self.ln_z).exp(),
            Err(_) => 0.0,
        }
    }

    /// `ln Σ_{j ≥ from} exp(ln_term(j))` over the support.
    fn ln_tail(&self, from: u64) -> Result<f64> {
        if let Some(hi) = self.k_max {
            if from > hi.get() {
                return Ok(f64::NEG_INFINITY);
            }
            return Ok(self.ln_direct_sum(from, Some(hi.get())));
        }
        if self.lambda_s == 0.0 {
            return Ok(LogQuadKernel::new(-self.lambda_1, -self.lambda_2).ln_tail_sum(from));
        }
        if self.lambda_1 == 0.0 && self.lambda_2 == 0.0 {
            // geometric series
            return Ok(-self.lambda_s * from as f64 - (-(-self.lambda_s).exp_m1()).ln());
        }
        let ln = self.ln_direct_sum(from, None);
        if ln.is_nan() {
            return Err(domain(format!(
                "normalizer did not reach tolerance within {MAX_DIRECT_TERMS} terms (lambda_s = {} too small)",
                self.lambda_s
            )));
        }
        Ok(ln)
    }

    /// Direct log-sum-exp from `from`; on infinite support stops once a
    /// rigorous bound on the remainder is negligible. NaN on budget overrun.
    fn ln_direct_sum(&self, from: u64, to: Option<u64>) -> f64 {
        let mut shift = self.ln_term(from);
        let mut sum = KahanSum::default();
        sum.add(1.0);
        let mut k = from;
        let mut next_check = from + 16;
        loop {
            if let Some(hi) = to {
                if k >= hi {
                    return shift + sum.value().ln();
                }
            } else if k >= next_check {
                next_check = k + ((k - from) / 8).max(16);
                let bound = self.ln_remainder_bound(k);
                if bound - shift < (1e-17 * sum.value()).ln() {
                    return shift + sum.value().ln();
                }
            }
            if k - from > MAX_DIRECT_TERMS {
                return f64::NAN;
            }
            k += 1;
            let t = self.ln_term(k);
            if t > shift {
                let rescale = (shift - t).exp();
                let v = sum.value() * rescale;
                sum = KahanSum::default();
                sum.add(v);
                shift = t;
            }
            sum.add((t - shift).exp());
        }
    }

    /// `ln` of an upper bound on `Σ_{j > k} exp(ln_term(j))` for infinite
    /// support with `λ_s > 0`.
    fn ln_remainder_bound(&self, k: u64) -> f64 {
        let next = k + 1;
        let u = (next as f64).ln();
        let mut best = f64::INFINITY;
        if self.lambda_1 > 1.0 {
            let zeta = LogQuadKernel::new(-self.lambda_1, 0.0).ln_tail_sum(next);
            best = best.min(-self.lambda_s * next as f64 - self.lambda_2 * u * u + zeta);
        }
        if self.lambda_2 > 0.0 {
            let ln_sum = LogQuadKernel::new(-self.lambda_1, -self.lambda_2).ln_tail_sum(next);
            best = best.min(-self.lambda_s * next as f64 + ln_sum);
        }
        let growth = (-self.lambda_1).max(0.0) * (1.0 / k as f64).ln_1p();
        let ln_ratio = -self.lambda_s + growth;
        if ln_ratio < 0.0 {
            best = best.min(self.ln_term(k) + ln_ratio - (-ln_ratio.exp_m1()).ln());
        }
        best
    }

    /// Probability vector over a finite support, starting at `k_min`.
    pub fn pmf_vector(&self) -> Result<Vec<f64>> {
        let hi = self.k_max.ok_or_else(|| domain("pmf vector needs finite support"))?;
        Ok((self.k_min.get()..=hi.get()).map(|k| self.ln_pmf_raw(k).exp()).collect())
    }

    /// Exact moments on finite support.
    pub fn moments(&self) -> Result<Moments> {
        let hi = self.k_max.ok_or_else(|| domain("moments need finite support"))?;
        let mut acc = [KahanSum::default(); 3];
        for k in self.k_min.get()..=hi.get() {
            let p = self.ln_pmf_raw(k).exp();
            let kf = k as f64;
            let u = kf.ln();
            acc[0].add(p * kf);
            acc[1].add(p * u);
            acc[2].add(p * u * u);
        }
        Ok(Moments { e_s: acc[0].value(), e_log: acc[1].value(), e_log2: acc[2].value() })
    }

    /// Shannon entropy in nats (finite support).
    pub fn entropy(&self) -> Result<f64> {
        shannon_entropy(&self.pmf_vector()?)
    }

    fn multiplier(&self, m: Moment) -> f64 {
        match m {
            Moment::Linear => self.lambda_s,
            Moment::Log => self.lambda_1,
            Moment::LogSquared => self.lambda_2,
        }
    }
}

/// `p(k)` of the maximum-entropy family.
pub fn maxent_pmf(model: &MaxEntModel, k: BinIndex) -> Result<f64> {
    TailModel::MaxEnt(model.clone()).pmf(k)
}

/// `−Σ p ln p` in nats, with `0·ln 0 = 0`.
pub fn shannon_entropy(p: &[f64]) -> Result<f64> {
    let mut total = KahanSum::default();
    let mut h = KahanSum::default();
    for &x in p {
        if !(x >= 0.0) || !x.is_finite() {
            return Err(domain(format!("probabilities must be finite and >= 0, got {x}")));
        }
        total.add(x);
        if x > 0.0 {
            h.add(-x * x.ln());
        }
    }
    if (total.value() - 1.0).abs() > 1e-9 {
        return Err(domain(format!("pmf sums to {}, not 1", total.value())));
    }
    Ok(h.value())
}

/// Support of the dual problem with an optional base measure.
struct DualProblem<'a> {
    k_min: u64,
    k_max: u64,
    moments: Vec<Moment>,
    targets: Vec<f64>,
    ln_base: Option<&'a [f64]>,
}

struct DualEval {
    value: f64,
    // t − E[c]
    gradient: DVector<f64>,
    hessian: DMatrix<f64>,
}

impl DualProblem<'_> {
    #[inline]
    fn exponent(&self, k: u64, lambda: &[f64]) -> f64 {
        let kf = k as f64;
        let u = kf.ln();
        let mut e = match self.ln_base {
            Some(b) => b[(k - self.k_min) as usize],
            None => 0.0,
        };
        for ((m, t), l) in self.moments.iter().zip(&self.targets).zip(lambda) {
            e -= l * (m.cost(kf, u) - t);
        }
        e
    }

    /// Dual value `ln Σ b_k exp(−Σ λᵢ(cᵢ(k) − tᵢ))` only.
    fn value(&self, lambda: &[f64]) -> f64 {
        let shift = (self.k_min..=self.k_max)
            .map(|k| self.exponent(k, lambda))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut s = KahanSum::default();
        for k in self.k_min..=self.k_max {
            s.add((self.exponent(k, lambda) - shift).exp());
        }
        shift + s.value().ln()
    }

    fn eval(&self, lambda: &[f64]) -> DualEval {
        let m = self.moments.len();
        let shift = (self.k_min..=self.k_max)
            .map(|k| self.exponent(k, lambda))
            .fold(f64::NEG_INFINITY, f64::max);
        let mut z = KahanSum::default();
        let mut first = vec![KahanSum::default(); m];
        for k in self.k_min..=self.k_max {
            let w = (self.exponent(k, lambda) - shift).exp();
            z.add(w);
            let kf = k as f64;
            let u = kf.ln();
            for (i, mo) in self.moments.iter().enumerate() {
                first[i].add(w * (mo.cost(kf, u) - self.targets[i]));
            }
        }
        let z = z.value();
        let mean: Vec<f64> = first.iter().map(|s| s.value() / z).collect();
        // second pass: covariance about the mean
        let mut second = vec![KahanSum::default(); m * m];
        for k in self.k_min..=self.k_max {
            let w = (self.exponent(k, lambda) - shift).exp() / z;
            let kf = k as f64;
            let u = kf.ln();
            let dev: Vec<f64> = self
                .moments
                .iter()
                .enumerate()
                .map(|(i, mo)| mo.cost(kf, u) - self.targets[i] - mean[i])
                .collect();
            for i in 0..m {
                for j in i..m {
                    second[i * m + j].add(w * dev[i] * dev[j]);
                }
            }
        }
        let mut hessian = DMatrix::zeros(m, m);
        for i in 0..m {
            for j in i..m {
                hessian[(i, j)] = second[i * m + j].value();
                hessian[(j, i)] = hessian[(i, j)];
            }
        }
        DualEval {
            value: shift + z.ln(),
            gradient: DVector::from_iterator(m, mean.iter().map(|x| -x)),
            hessian,
        }
    }

    /// Damped Newton on the convex dual, starting from zero multipliers.
    fn solve(&self, tol: f64) -> Result<Vec<f64>> {
        const MAX_ITER: usize = 200;
        let m = self.moments.len();
        let mut lambda = vec![0.0; m];
        if m == 0 {
            return Ok(lambda);
        }
        let mut residual = f64::INFINITY;
        for _ in 0..MAX_ITER {
            let ev = self.eval(&lambda);
            residual = ev.gradient.amax();
            if residual <= tol {
                return Ok(lambda);
            }
            // Jacobi-scaled Newton system
            let scale: Vec<f64> =
                (0..m).map(|i| 1.0 / ev.hessian[(i, i)].max(f64::MIN_POSITIVE).sqrt()).collect();
            let mut h = ev.hessian.clone();
            for i in 0..m {
                for j in 0..m {
                    h[(i, j)] *= scale[i] * scale[j];
                }
            }
            let eig = SymmetricEigen::new(h.clone());
            let max_eig = eig.eigenvalues.max();
            let min_eig = eig.eigenvalues.min();
            if !(min_eig > 0.0) || max_eig / min_eig > 1e12 {
                let damping = max_eig.abs() * 1e-12 + f64::MIN_POSITIVE;
                for i in 0..m {
                    h[(i, i)] += damping - min_eig.min(0.0);
                }
            }
            let rhs = DVector::from_iterator(m, (0..m).map(|i| -ev.gradient[i] * scale[i]));
            let y = match h.clone().cholesky() {
                Some(ch) => ch.solve(&rhs),
                None => rhs.clone(),
            };
            let step: Vec<f64> = (0..m).map(|i| y[i] * scale[i]).collect();
            // gradient of the dual w.r.t. λ is (t − E[c]) = ev.gradient
            let slope: f64 = (0..m).map(|i| ev.gradient[i] * step[i]).sum();
            let mut t = 1.0;
            let mut accepted = false;
            for _ in 0..60 {
                let trial: Vec<f64> = lambda.iter().zip(&step).map(|(l, s)| l + t * s).collect();
                let v = self.value(&trial);
                if v.is_finite() && v <= ev.value + 1e-4 * t * slope + 1e-15 * ev.value.abs() {
                    lambda = trial;
                    accepted = true;
                    break;
                }
                t *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        let ev = self.eval(&lambda);
        residual = residual.min(ev.gradient.amax());
        if ev.gradient.amax() <= tol.max(1e-8) {
            return Ok(lambda);
        }
        Err(Error::NoConvergence { iterations: MAX_ITER, residual })
    }
}

fn check_feasible(targets: &[(Moment, f64)], k_min: u64, k_max: u64) -> Result<()> {
    let lo = k_min as f64;
    let hi = k_max as f64;
    for &(m, t) in targets {
        check_finite("moment target", t)?;
        let (cmin, cmax) = (m.cost(lo, lo.ln()), m.cost(hi, hi.ln()));
        if k_min == k_max {
            if (t - cmin).abs() > 1e-12 * cmin.abs().max(1.0) {
                return Err(Error::Infeasible(format!(
                    "{m:?} target {t} differs from the single support value {cmin}"
                )));
            }
        } else if t <= cmin || t >= cmax {
            return Err(Error::Infeasible(format!(
                "{m:?} target {t} outside the open interval ({cmin}, {cmax})"
            )));
        }
    }
    let log = targets.iter().find(|(m, _)| *m == Moment::Log).map(|x| x.1);
    let log2 = targets.iter().find(|(m, _)| *m == Moment::LogSquared).map(|x| x.1);
    if let (Some(l), Some(l2)) = (log, log2) {
        if k_min < k_max && l2 <= l * l {
            return Err(Error::Infeasible(format!(
                "E[ln^2 k] = {l2} must exceed E[ln k]^2 = {}",
                l * l
            )));
        }
    }
    Ok(())
}

/// Recovers multipliers whose moments match every active target, on the
/// finite support `[k_min, k_max]`.
pub fn solve_lagrange(targets: &MomentTargets, k_min: BinIndex, k_max: BinIndex) -> Result<MaxEntModel> {
    if k_max < k_min {
        return Err(domain(format!("k_max = {k_max} is below k_min = {k_min}")));
    }
    let (lo, hi) = (k_min.get(), k_max.get());
    if hi - lo + 1 > MAX_SOLVER_SUPPORT {
        return Err(domain(format!("support of {} bins exceeds {MAX_SOLVER_SUPPORT}", hi - lo + 1)));
    }
    let active = targets.active();
    check_feasible(&active, lo, hi)?;
    let moments: Vec<Moment> = active.iter().map(|x| x.0).collect();
    let mut lambdas = [0.0; 3];
    if lo < hi {
        let problem = DualProblem {
            k_min: lo,
            k_max: hi,
            moments: moments.clone(),
            targets: active.iter().map(|x| x.1).collect(),
            ln_base: None,
        };
        let solved = problem.solve(1e-11)?;
        for (m, l) in moments.iter().zip(solved) {
            lambdas[m.index()] = l;
        }
    }
    MaxEntModel::with_active(
        lambdas[0],
        lambdas[1],
        lambdas[2],
        k_min,
        Some(k_max),
        ActiveSet::from_moments(&moments),
    )
}

/// Exponentially tilts `base` (a pmf on `[k_min, k_min + len)`) so that its
/// active moments match `targets`; the minimum relative-entropy projection
/// onto the constraint set.
pub fn project_onto_moments(base: &[f64], k_min: BinIndex, targets: &MomentTargets) -> Result<Vec<f64>> {
    if base.is_empty() {
        return Err(domain("empty base measure"));
    }
    let lo = k_min.get();
    let hi = lo + base.len() as u64 - 1;
    let active = targets.active();
    check_feasible(&active, lo, hi)?;
    let ln_base: Vec<f64> = base.iter().map(|&b| b.ln()).collect();
    let problem = DualProblem {
        k_min: lo,
        k_max: hi,
        moments: active.iter().map(|x| x.0).collect(),
        targets: active.iter().map(|x| x.1).collect(),
        ln_base: Some(&ln_base),
    };
    let lambda = problem.solve(1e-11)?;
    let exps: Vec<f64> = (lo..=hi).map(|k| problem.exponent(k, &lambda)).collect();
    let shift = exps.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = exps.iter().map(|e| (e - shift).exp()).collect();
    let z: f64 = {
        let mut s = KahanSum::default();
        w.iter().for_each(|&x| s.add(x));
        s.value()
    };
    Ok(w.into_iter().map(|x| x / z).collect())
}

/// Dual objective `ln Z(λ) + Σ λᵢ·tᵢ` on a finite support, all three
/// multipliers free. Exposed for convexity checks.
pub fn dual_objective(lambdas: [f64; 3], targets: [f64; 3], k_min: BinIndex, k_max: BinIndex) -> f64 {
    DualProblem {
        k_min: k_min.get(),
        k_max: k_max.get(),
        moments: Moment::ALL.to_vec(),
        targets: targets.to_vec(),
        ln_base: None,
    }
    .value(&lambdas)
}

/// Outcome of a stationarity check.
#[derive(Debug, Clone, Serialize)]
pub struct StationarityReport {
    pub trials: usize,
    /// Largest `|∇H·d|` over unit directions `d` tangent to the constraints.
    pub max_first_order: f64,
    /// Largest `dᵀ∇²H d`; negative means entropy decreases to second order.
    pub max_second_order: f64,
    pub stationary: bool,
}

/// First-order change threshold for [`verify_stationarity`].
pub const STATIONARITY_TOL: f64 = 1e-8;

/// Probes the entropy along random directions that preserve normalization
/// and every active moment. At a constrained maximum the first-order change
/// vanishes and the second-order change is negative.
pub fn verify_stationarity(model: &MaxEntModel, trials: usize, seed: u64) -> Result<StationarityReport> {
    // probe only where p is representable: directions into underflowed bins
    // have unbounded curvature and say nothing about the first order
    let lo = model.k_min().get();
    let (ks, p): (Vec<u64>, Vec<f64>) =
        model.pmf_vector()?.into_iter().zip(lo..).filter(|&(x, _)| x > 0.0).map(|(x, k)| (k, x)).unzip();
    let n = p.len();
    let mut rows: Vec<Vec<f64>> = vec![vec![1.0; n]];
    for m in model.active().moments() {
        rows.push(
            ks.iter()
                .map(|&k| {
                    let kf = k as f64;
                    m.cost(kf, kf.ln())
                })
                .collect(),
        );
    }
    let basis = orthonormalize(rows);
    // ∇H = −(ln p + 1), with ln p taken analytically
    let grad: Vec<f64> = ks.iter().map(|&k| -(model.ln_pmf_raw(k) + 1.0)).collect();

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut max_first: f64 = 0.0;
    let mut max_second = f64::NEG_INFINITY;
    for _ in 0..trials {
        let mut d: Vec<f64> = (0..n)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &d);
                d.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let norm = dot(&d, &d).sqrt();
        if !(norm > 1e-12) {
            max_second = max_second.max(0.0);
            continue;
        }
        d.iter_mut().for_each(|x| *x /= norm);
        max_first = max_first.max(dot(&grad, &d).abs());
        let second: f64 = p.iter().zip(&d).map(|(x, di)| -di * di / x).sum();
        max_second = max_second.max(second);
    }
    if trials == 0 {
        max_second = 0.0;
    }
    Ok(StationarityReport {
        trials,
        max_first_order: max_first,
        max_second_order: max_second,
        stationary: max_first < STATIONARITY_TOL && max_second <= 0.0,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    let mut s = KahanSum::default();
    a.iter().zip(b).for_each(|(x, y)| s.add(x * y));
    s.value()
}

/// Modified Gram–Schmidt with reorthogonalization; drops dependent rows.
fn orthonormalize(rows: Vec<Vec<f64>>) -> Vec<Vec<f64>> {
    let mut basis: Vec<Vec<f64>> = Vec::new();
    for mut v in rows {
        let original = dot(&v, &v).sqrt();
        for _ in 0..2 {
            for q in &basis {
                let c = dot(q, &v);
                v.iter_mut().zip(q).for_each(|(x, qi)| *x -= c * qi);
            }
        }
        let norm = dot(&v, &v).sqrt();
        if norm > 1e-10 * original {
            v.iter_mut().for_each(|x| *x /= norm);
            basis.push(v);
        }
    }
    basis
}

/// Streams `n` file records whose sizes follow `model`: each draw `k` becomes
/// `(k − 1)·1024 + u` bytes with `u` uniform on `[0, 1023]`.
pub fn synthesize_corpus(model: &MaxEntModel, n: usize, seed: u64, category: Category) -> Corpus {
    Corpus::new(&TailModel::MaxEnt(model.clone()), n, seed, category)
}

/// Iterator over synthetic [`FileRecord`]s; deterministic per seed.
pub struct Corpus {
    sampler: Option<Sampler>,
    rng: ChaCha8Rng,
    remaining: usize,
    index: usize,
    category: Category,
}

const SYNTH_HOSTS: u64 = 64;

impl Corpus {
    /// Same as [`synthesize_corpus`] for any tail model.
    pub fn new(model: &TailModel, n: usize, seed: u64, category: Category) -> Self {
        let sampler = (n > 0).then(|| Sampler::new(model));
        Self { sampler, rng: ChaCha8Rng::seed_from_u64(seed), remaining: n, index: 0, category }
    }
}

impl Iterator for Corpus {
    type Item = FileRecord;

    fn next(&mut self) -> Option<FileRecord> {
        use rand::Rng;
        if self.remaining == 0 {
            return None;
        }
        let sampler = self.sampler.as_ref()?;
        self.remaining -= 1;
        let k = sampler.draw_with(&mut self.rng).get();
        let offset = self.rng.random_range(0..crate::BIN_BYTES);
        let host = self.rng.random_range(0..SYNTH_HOSTS);
        let (mime, ext) = self.category.synthetic_mime();
        let record = FileRecord {
            host: format!("host{host:02}.synth.example"),
            path: format!("/{}/{:09}.{ext}", self.category.label(), self.index),
            mime: mime.to_string(),
            size_bytes: (k - 1).saturating_mul(crate::BIN_BYTES).saturating_add(offset),
        };
        self.index += 1;
        Some(record)
    }

    fn size_hint(&self) -> (usize, Option<usize>) {
        (self.remaining, Some(self.remaining))
    }
}

impl MaxEntModel {
    /// Moment residuals `|E[c] − t|` for each active target.
    pub fn moment_residuals(&self, targets: &MomentTargets) -> Result<Vec<(Moment, f64)>> {
        let mom = self.moments()?;
        Ok(targets.active().into_iter().map(|(m, t)| (m, (mom.get(m) - t).abs())).collect())
    }

    /// Multipliers as `(λ_s, λ₁, λ₂)`.
    pub fn multipliers(&self) -> [f64; 3] {
        Moment::ALL.map(|m| self.multiplier(m))
    }
}
