use serde::Serialize;
use tdigest::TDigest;

use super::Category;

/// Records per category kept for an exact median before switching to a
/// quantile sketch.
pub const DEFAULT_EXACT_MEDIAN_LIMIT: usize = 10_000_000;
const SKETCH_SIZE: usize = 400;

/// How a reported median was computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum MedianMode {
    Exact,
    Sketch,
}

/// `(files per host | mean KB | median KB)` for one category, plus its share
/// of all accepted files.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CategorySummary {
    pub category: Category,
    pub file_count: u64,
    pub share: f64,
    pub files_per_host: f64,
    pub mean_kb: f64,
    pub median_kb: f64,
    pub median_mode: MedianMode,
}

#[derive(Debug, Clone)]
enum Sizes {
    Exact(Vec<u64>),
    Sketch(TDigest, Vec<f64>),
}

const SKETCH_BUFFER: usize = 1 << 16;

fn flushed(digest: TDigest, buffer: Vec<f64>) -> TDigest {
    if buffer.is_empty() {
        digest
    } else {
        digest.merge_unsorted(buffer)
    }
}

/// Running count, byte total and median state for one category.
#[derive(Debug, Clone)]
pub struct SummaryAccumulator {
    count: u64,
    bytes: u128,
    sizes: Sizes,
    limit: usize,
}

fn sketch_of(values: Vec<u64>) -> TDigest {
    let v: Vec<f64> = values.into_iter().map(|x| x as f64).collect();
    TDigest::new_with_size(SKETCH_SIZE).merge_unsorted(v)
}

impl SummaryAccumulator {
    pub fn new(exact_limit: usize) -> Self {
        Self { count: 0, bytes: 0, sizes: Sizes::Exact(Vec::new()), limit: exact_limit }
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn push(&mut self, size_bytes: u64) {
        self.count += 1;
        self.bytes += size_bytes as u128;
        match &mut self.sizes {
            Sizes::Exact(v) => {
                v.push(size_bytes);
                if v.len() > self.limit {
                    let v = std::mem::take(v);
                    self.sizes = Sizes::Sketch(sketch_of(v), Vec::new());
                }
            }
            Sizes::Sketch(d, buf) => {
                buf.push(size_bytes as f64);
                if buf.len() >= SKETCH_BUFFER {
                    let digest = std::mem::replace(d, TDigest::new_with_size(SKETCH_SIZE));
                    *d = flushed(digest, std::mem::take(buf));
                }
            }
        }
    }

    pub fn merge(&mut self, other: SummaryAccumulator) {
        self.count += other.count;
        self.bytes += other.bytes;
        let mine = std::mem::replace(&mut self.sizes, Sizes::Exact(Vec::new()));
        self.sizes = match (mine, other.sizes) {
            (Sizes::Exact(mut a), Sizes::Exact(b)) => {
                a.extend(b);
                if a.len() > self.limit {
                    Sizes::Sketch(sketch_of(a), Vec::new())
                } else {
                    Sizes::Exact(a)
                }
            }
            (Sizes::Exact(a), Sizes::Sketch(d, buf)) => Sizes::Sketch(
                TDigest::merge_digests(vec![sketch_of(a), flushed(d, buf)]),
                Vec::new(),
            ),
            (Sizes::Sketch(d, buf), Sizes::Exact(b)) => Sizes::Sketch(
                TDigest::merge_digests(vec![flushed(d, buf), sketch_of(b)]),
                Vec::new(),
            ),
            (Sizes::Sketch(a, abuf), Sizes::Sketch(b, bbuf)) => Sizes::Sketch(
                TDigest::merge_digests(vec![flushed(a, abuf), flushed(b, bbuf)]),
                Vec::new(),
            ),
        };
    }

    /// Median in bytes and how it was obtained.
    pub fn median_bytes(&self) -> (f64, MedianMode) {
        match &self.sizes {
            Sizes::Exact(v) => {
                if v.is_empty() {
                    return (0.0, MedianMode::Exact);
                }
                let mut v = v.clone();
                let mid = v.len() / 2;
                let (_, &mut hi, _) = v.select_nth_unstable(mid);
                let median = if v.len() % 2 == 1 {
                    hi as f64
                } else {
                    let lo = *v[..mid].iter().max().expect("nonempty lower half");
                    (lo as f64 + hi as f64) / 2.0
                };
                (median, MedianMode::Exact)
            }
            Sizes::Sketch(d, buf) => {
                let d = flushed(d.clone(), buf.clone());
                (d.estimate_quantile(0.5), MedianMode::Sketch)
            }
        }
    }

    pub(crate) fn finish(&self, category: Category, hosts: usize, total: u64) -> CategorySummary {
        let (median, mode) = self.median_bytes();
        let kb = crate::BIN_BYTES as f64;
        CategorySummary {
            category,
            file_count: self.count,
            share: if total > 0 { self.count as f64 / total as f64 } else { 0.0 },
            files_per_host: if hosts > 0 { self.count as f64 / hosts as f64 } else { 0.0 },
            mean_kb: if self.count > 0 { self.bytes as f64 / self.count as f64 / kb } else { 0.0 },
            median_kb: median / kb,
            median_mode: mode,
        }
    }
}
