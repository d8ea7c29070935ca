use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::distributions::{BinIndex, TailModel};
use crate::histogram::SizeHistogram;

const MAX_TABLE: u64 = 1 << 22;
const MAX_FINITE_TABLE: u64 = 1 << 24;
const TABLE_TAIL: f64 = 1e-12;
const GUIDE_BUCKETS: usize = 1 << 14;

/// Inverse-CCDF sampler.
///
/// A draw `v ∈ (0, 1]` maps to the smallest `k` with `F(k + 1) < v`, where `F`
/// is the model CCDF, so `Pr(K ≥ k) = F(k)` exactly. The CCDF is tabulated over
/// the bulk of the support (accumulated backwards from an exactly computed
/// tail, so small values keep full relative precision) and searched through a
/// guide table; draws landing beyond the table binary-search the model CCDF.
#[derive(Debug, Clone)]
pub struct Sampler {
    model: TailModel,
    k_min: u64,
    // tail[i] = F(k_min + i), i = 0..=len
    tail: Vec<f64>,
    guide: Vec<usize>,
}

impl Sampler {
    pub fn new(model: &TailModel) -> Self {
        let k_min = model.k_min().get();
        let len = match model.k_max() {
            Some(hi) => (hi.get() - k_min + 1).min(MAX_FINITE_TABLE),
            None => {
                let mut len = 1024u64;
                while len < MAX_TABLE && model.ccdf_raw(k_min + len) > TABLE_TAIL {
                    len *= 2;
                }
                len
            }
        };
        let end = k_min + len;
        let end_tail = match model.k_max() {
            Some(hi) if end > hi.get() => 0.0,
            _ => model.ccdf_raw(end),
        };
        let mut tail = vec![0.0; len as usize + 1];
        tail[len as usize] = end_tail;
        for i in (0..len as usize).rev() {
            tail[i] = tail[i + 1] + model.ln_pmf_raw(k_min + i as u64).exp();
        }
        let above = &tail[1..];
        let guide = (0..=GUIDE_BUCKETS)
            .map(|j| {
                let x = j as f64 / GUIDE_BUCKETS as f64;
                above.partition_point(|&t| t >= x)
            })
            .collect();
        Self { model: model.clone(), k_min, tail, guide }
    }

    pub fn model(&self) -> &TailModel {
        &self.model
    }

    fn table_len(&self) -> usize {
        self.tail.len() - 1
    }

    #[inline]
    fn draw<R: Rng>(&self, rng: &mut R) -> u64 {
        let v = 1.0 - rng.random::<f64>();
        let bucket = ((v * GUIDE_BUCKETS as f64) as usize).min(GUIDE_BUCKETS - 1);
        let lo = self.guide[bucket + 1];
        let hi = self.guide[bucket];
        let idx = lo + self.tail[1 + lo..1 + hi].partition_point(|&t| t >= v);
        if idx < self.table_len() {
            self.k_min + idx as u64
        } else {
            self.beyond_table(v)
        }
    }

    fn beyond_table(&self, v: f64) -> u64 {
        // F(lo) ≥ v is known; find hi with F(hi) < v, then bisect.
        let cap = u64::MAX / 4;
        let mut lo = self.k_min + self.table_len() as u64;
        if let Some(k_max) = self.model.k_max() {
            // finite support larger than the table
            let mut hi = k_max.get() + 1;
            while hi - lo > 1 {
                let mid = lo + (hi - lo) / 2;
                if self.model.ccdf_raw(mid) >= v {
                    lo = mid;
                } else {
                    hi = mid;
                }
            }
            return lo;
        }
        let mut step = self.table_len() as u64;
        let mut hi = lo.saturating_add(step);
        while self.model.ccdf_raw(hi) >= v {
            if hi >= cap {
                return cap;
            }
            lo = hi;
            step = step.saturating_mul(2);
            hi = hi.saturating_add(step).min(cap);
        }
        while hi - lo > 1 {
            let mid = lo + (hi - lo) / 2;
            if self.model.ccdf_raw(mid) >= v {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        lo
    }

    /// `n` i.i.d. draws, deterministic in `seed`.
    pub fn sample(&self, n: usize, seed: u64) -> Vec<BinIndex> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..n).map(|_| BinIndex(self.draw(&mut rng))).collect()
    }

    /// Histogram of `n` draws; identical to binning [`Sampler::sample`].
    pub fn sample_histogram(&self, n: usize, seed: u64) -> SizeHistogram {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut dense: Vec<u64> = Vec::new();
        let mut sparse = BTreeMap::new();
        for _ in 0..n {
            let k = self.draw(&mut rng);
            let off = (k - self.k_min) as usize;
            if off < self.table_len() {
                if off >= dense.len() {
                    dense.resize(off + 1, 0);
                }
                dense[off] += 1;
            } else {
                *sparse.entry(k).or_insert(0u64) += 1;
            }
        }
        let dense_bins = dense
            .into_iter()
            .enumerate()
            .filter(|&(_, c)| c > 0)
            .map(|(off, c)| (self.k_min + off as u64, c));
        SizeHistogram::from_sorted_counts(dense_bins.chain(sparse))
    }

    /// Draws a single bin index from the given generator.
    pub fn draw_with<R: Rng>(&self, rng: &mut R) -> BinIndex {
        BinIndex(self.draw(rng))
    }
}

/// `n` i.i.d. draws from `model`, deterministic in `seed`.
pub fn sample(model: &TailModel, n: usize, seed: u64) -> Vec<BinIndex> {
    if n == 0 {
        return Vec::new();
    }
    Sampler::new(model).sample(n, seed)
}
