//! Tail sums of log-quadratic kernels.
//!
//! Every heavy-tailed family in this crate has an unnormalized pmf of the form
//! `f(k) = exp(a·ln k + b·ln² k)` with `b ≤ 0`. The tail sum
//! `Σ_{k ≥ from} f(k)` is evaluated by direct summation up to a crossover
//! index `N`, followed by an Euler–Maclaurin expansion whose integral term has
//! a closed form (a power for `b = 0`, a complementary error function for
//! `b < 0`).
//!
//! Derivatives needed by the expansion follow from `f(x) = exp(φ(ln x))`:
//! writing `f⁽ⁿ⁾(x) = x⁻ⁿ·Qₙ(w)·f(x)` with `w = φ'(ln x) = a + 2b·ln x`,
//! the polynomials obey `Qₙ₊₁(w) = 2b·Qₙ'(w) + (w − n)·Qₙ(w)`, `Q₀ = 1`.

use std::f64::consts::PI;

/// Bernoulli numbers B₂, B₄, …, B₁₂.
const BERNOULLI: [f64; 6] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
];
const EM_TERMS: usize = BERNOULLI.len();

/// Largest admissible `(|w| + …)/(2πN)` at the crossover index.
const CROSSOVER_RATIO: f64 = 0.05;
/// Direct summation stops once a rigorous tail bound drops below this share.
const NEGLIGIBLE: f64 = 1e-17;
/// The last Euler–Maclaurin correction must be below this share of the sum.
const EM_ACCEPT: f64 = 1e-14;

/// Compensated (Neumaier) summation.
#[derive(Debug, Default, Clone, Copy)]
pub(crate) struct KahanSum {
    sum: f64,
    comp: f64,
}

impl KahanSum {
    #[inline]
    pub(crate) fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.comp += (self.sum - t) + x;
        } else {
            self.comp += (x - t) + self.sum;
        }
        self.sum = t;
    }

    #[inline]
    pub(crate) fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

/// `erfc(z)·exp(z²)`, accurate in relative terms for `z ≥ 0`.
pub(crate) fn erfcx(z: f64) -> f64 {
    if z < 5.0 {
        return libm::erfc(z) * (z * z).exp();
    }
    // Continued fraction, evaluated with the modified Lentz method:
    // erfcx(z) = (1/√π) · 1/(z + (1/2)/(z + 1/(z + (3/2)/(z + …))))
    let tiny = 1e-300;
    let mut f = z;
    let mut c = z;
    let mut d = 0.0;
    for n in 1..200 {
        let an = n as f64 * 0.5;
        d = z + an * d;
        if d.abs() < tiny {
            d = tiny;
        }
        c = z + an / c;
        if c.abs() < tiny {
            c = tiny;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < 1e-16 {
            break;
        }
    }
    1.0 / (f * PI.sqrt())
}

/// Unnormalized kernel `exp(a·ln k + b·ln² k)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) struct LogQuadKernel {
    pub a: f64,
    pub b: f64,
}

impl LogQuadKernel {
    /// Caller guarantees convergence: `b < 0`, or `b == 0 && a < -1`.
    pub(crate) fn new(a: f64, b: f64) -> Self {
        debug_assert!(b < 0.0 || (b == 0.0 && a < -1.0));
        Self { a, b }
    }

    #[inline]
    pub(crate) fn ln_term_at_log(&self, u: f64) -> f64 {
        self.a * u + self.b * u * u
    }

    #[inline]
    pub(crate) fn ln_term(&self, k: f64) -> f64 {
        self.ln_term_at_log(k.ln())
    }

    /// Slope `φ'(u)`; the kernel decreases in `x` wherever this is negative.
    #[inline]
    fn slope(&self, u: f64) -> f64 {
        self.a + 2.0 * self.b * u
    }

    fn max_ln_term(&self, from: u64) -> f64 {
        let u0 = (from as f64).ln();
        if self.b < 0.0 {
            let peak = -self.a / (2.0 * self.b);
            if peak > u0 {
                return -self.a * self.a / (4.0 * self.b);
            }
        }
        self.ln_term_at_log(u0)
    }

    /// `ln ∫_x^∞ f(t) dt`.
    fn ln_integral(&self, x: f64) -> f64 {
        let u = x.ln();
        let c = self.a + 1.0;
        if self.b == 0.0 {
            return c * u - (-c).ln();
        }
        let s = (-self.b).sqrt();
        let peak = -c / (2.0 * self.b);
        let z = s * (u - peak);
        let scale = (PI.sqrt() / (2.0 * s)).ln();
        if z < 0.5 {
            let psi_peak = -c * c / (4.0 * self.b);
            psi_peak + scale + libm::erfc(z).ln()
        } else {
            let psi_u = c * u + self.b * u * u;
            psi_u + scale + erfcx(z).ln()
        }
    }

    fn crossover(&self, from: u64) -> u64 {
        let curvature = 2.0 * EM_TERMS as f64 * (2.0 * self.b.abs()).sqrt();
        let mut n = from.max(8);
        loop {
            let x = n as f64;
            let w = self.slope(x.ln()).abs();
            let ratio = (2.0 * EM_TERMS as f64 + w + curvature) / (2.0 * PI * x);
            if ratio <= CROSSOVER_RATIO || n > (1u64 << 52) {
                return n;
            }
            n = n.saturating_mul(2);
        }
    }

    /// Euler–Maclaurin tail `Σ_{k ≥ n} f(k)` scaled by `exp(-shift)`, with the
    /// magnitude of its last correction term.
    fn em_tail(&self, n: u64, shift: f64) -> (f64, f64) {
        let x = n as f64;
        let u = x.ln();
        let w = self.slope(u);
        let f_n = (self.ln_term_at_log(u) - shift).exp();
        let integral = (self.ln_integral(x) - shift).exp();

        // Q polynomials in w, coefficients in ascending powers.
        let mut q: Vec<f64> = vec![1.0];
        let mut corrections = 0.0;
        let mut last = 0.0;
        let mut x_pow = 1.0;
        let mut factorial = 1.0;
        for order in 0..(2 * EM_TERMS - 1) {
            let mut next = vec![0.0; q.len() + 1];
            for (i, &c) in q.iter().enumerate() {
                next[i + 1] += c;
                next[i] -= order as f64 * c;
                if i > 0 {
                    next[i - 1] += 2.0 * self.b * i as f64 * c;
                }
            }
            q = next;
            let deriv_order = order + 1;
            x_pow *= x;
            factorial *= deriv_order as f64;
            if deriv_order % 2 == 1 {
                let j = (deriv_order + 1) / 2;
                let qw = q.iter().rev().fold(0.0, |acc, &c| acc * w + c);
                // B_{2j}/(2j)! · f^{(2j-1)}(N)
                let term = BERNOULLI[j - 1] / (factorial * (deriv_order + 1) as f64) * qw / x_pow
                    * f_n;
                corrections += term;
                last = term.abs();
            }
        }
        (integral + 0.5 * f_n - corrections, last)
    }

    /// `ln Σ_{k ≥ from} exp(a·ln k + b·ln² k)`.
    pub(crate) fn ln_tail_sum(&self, from: u64) -> f64 {
        let from = from.max(1);
        let shift = self.max_ln_term(from);
        let mut sum = KahanSum::default();
        let mut k = from;
        let mut n_em = self.crossover(from);
        let mut next_check = from.saturating_add(4);
        for _ in 0..64 {
            while k < n_em {
                let kf = k as f64;
                let u = kf.ln();
                sum.add((self.ln_term_at_log(u) - shift).exp());
                k += 1;
                if k >= next_check {
                    next_check = k + (k / 4).max(4);
                    // Decreasing from k-1 onward: Σ_{j ≥ k} f(j) ≤ ∫_{k-1}^∞ f.
                    if self.slope(u) <= 0.0 {
                        let bound = (self.ln_integral(kf) - shift).exp();
                        if bound <= NEGLIGIBLE * sum.value() {
                            return shift + sum.value().ln();
                        }
                    }
                }
            }
            let (tail, last) = self.em_tail(k, shift);
            let total = sum.value() + tail;
            if last <= EM_ACCEPT * total || k > (1u64 << 50) {
                return shift + total.ln();
            }
            n_em = k.saturating_mul(2);
        }
        shift + sum.value().ln()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn brute(kernel: &LogQuadKernel, from: u64, to: u64) -> f64 {
        let mut s = KahanSum::default();
        for k in from..=to {
            s.add(kernel.ln_term(k as f64).exp());
        }
        s.value()
    }

    #[test]
    fn erfcx_matches_direct_form_across_switch() {
        for &z in &[4.0, 4.9, 5.0, 5.1, 6.0] {
            let direct = libm::erfc(z) * (z * z).exp();
            let cf = erfcx(z);
            assert!((direct - cf).abs() / direct < 1e-12, "z={z}: {direct} vs {cf}");
        }
        // Large-argument asymptote 1/(z√π)·(1 − 1/(2z²)).
        let z = 1e4;
        let asym = 1.0 / (z * PI.sqrt()) * (1.0 - 0.5 / (z * z));
        assert!((erfcx(z) - asym).abs() / asym < 1e-12);
    }

    #[test]
    fn zeta_two() {
        let k = LogQuadKernel::new(-2.0, 0.0);
        let z = k.ln_tail_sum(1).exp();
        assert!((z - PI * PI / 6.0).abs() < 1e-14);
    }

    #[test]
    fn narrow_lognormal_peak_far_from_origin() {
        // sigma = 0.05 around e^10: mass sits on ~1000 bins near 22026.
        let sigma: f64 = 0.05;
        let mu = 10.0;
        let k = LogQuadKernel::new(-1.0 + mu / (sigma * sigma), -1.0 / (2.0 * sigma * sigma));
        let shift = k.max_ln_term(1);
        let got = (k.ln_tail_sum(1) - shift).exp();
        let mut s = KahanSum::default();
        for j in 1..200_000u64 {
            s.add((k.ln_term(j as f64) - shift).exp());
        }
        assert!((got - s.value()).abs() / s.value() < 1e-11);
    }

    #[test]
    fn matches_brute_force_with_large_start() {
        let k = LogQuadKernel::new(-2.5, -0.01);
        let got = k.ln_tail_sum(5000).exp();
        let head = brute(&k, 5000, 2_000_000);
        let rest = k.ln_tail_sum(2_000_001).exp();
        assert!(((head + rest) - got).abs() / got < 1e-11);
    }
}
