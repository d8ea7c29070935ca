//! Sparse per-bin count histograms.

use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::ops::Bound;

use crate::distributions::BinIndex;
use crate::error::{Error, Result};

/// Counts per 1 KB bin. Only occupied bins are stored, so memory grows with
/// the number of distinct bins rather than the number of records.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct SizeHistogram {
    counts: BTreeMap<u64, u64>,
    total: u64,
}

impl SizeHistogram {
    pub fn new() -> Self {
        Self::default()
    }

    /// Builds from `(k, count)` pairs; zero counts are dropped and repeated
    /// bins accumulate.
    pub fn from_counts<I>(pairs: I) -> Result<Self>
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        let mut hist = Self::new();
        for (k, n) in pairs {
            hist.add(BinIndex::new(k)?, n);
        }
        Ok(hist)
    }

    /// Pairs must be strictly increasing in `k ≥ 1` with positive counts.
    pub(crate) fn from_sorted_counts<I>(pairs: I) -> Self
    where
        I: IntoIterator<Item = (u64, u64)>,
    {
        let counts: BTreeMap<u64, u64> = pairs.into_iter().collect();
        let total = counts.values().sum();
        Self { counts, total }
    }

    pub fn from_bins(bins: &[BinIndex]) -> Self {
        let mut sorted: Vec<u64> = bins.iter().map(|k| k.get()).collect();
        sorted.sort_unstable();
        let mut pairs: Vec<(u64, u64)> = Vec::new();
        for k in sorted {
            match pairs.last_mut() {
                Some((last, n)) if *last == k => *n += 1,
                _ => pairs.push((k, 1)),
            }
        }
        Self::from_sorted_counts(pairs)
    }

    pub fn add(&mut self, k: BinIndex, n: u64) {
        if n == 0 {
            return;
        }
        *self.counts.entry(k.get()).or_insert(0) += n;
        self.total += n;
    }

    pub fn add_size_bytes(&mut self, bytes: u64) {
        self.add(BinIndex::from_size_bytes(bytes), 1);
    }

    /// Adds every count of `other` into `self`.
    pub fn merge(&mut self, other: &SizeHistogram) {
        for (&k, &n) in &other.counts {
            *self.counts.entry(k).or_insert(0) += n;
        }
        self.total += other.total;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn is_empty(&self) -> bool {
        self.total == 0
    }

    pub fn occupied_bins(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, k: BinIndex) -> u64 {
        self.counts.get(&k.get()).copied().unwrap_or(0)
    }

    pub fn k_max_observed(&self) -> Option<BinIndex> {
        self.counts.keys().next_back().map(|&k| BinIndex::new(k).expect("stored bins are >= 1"))
    }

    pub fn k_min_observed(&self) -> Option<BinIndex> {
        self.counts.keys().next().map(|&k| BinIndex::new(k).expect("stored bins are >= 1"))
    }

    /// Occupied bins in increasing order.
    pub fn bins(&self) -> impl DoubleEndedIterator<Item = (u64, u64)> + '_ {
        self.counts.iter().map(|(&k, &n)| (k, n))
    }

    /// Occupied bins with `k ≥ from`.
    pub fn bins_from(&self, from: u64) -> impl DoubleEndedIterator<Item = (u64, u64)> + '_ {
        self.counts
            .range((Bound::Included(from), Bound::Unbounded))
            .map(|(&k, &n)| (k, n))
    }

    /// Number of counts at `k ≥ from`.
    pub fn tail_count(&self, from: u64) -> u64 {
        self.bins_from(from).map(|(_, n)| n).sum()
    }

    /// Multiplies every count by `factor`.
    pub fn scaled(&self, factor: u64) -> SizeHistogram {
        Self::from_sorted_counts(self.bins().map(|(k, n)| (k, n * factor)).filter(|&(_, n)| n > 0))
    }

    /// Keeps only bins with `k ≥ from`.
    pub fn restricted_from(&self, from: u64) -> SizeHistogram {
        Self::from_sorted_counts(self.bins_from(from))
    }

    /// Writes `k,count` rows sorted by `k`, with a header line.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "k,count")?;
        for (k, n) in self.bins() {
            writeln!(out, "{k},{n}")?;
        }
        Ok(())
    }

    /// Reads the `k,count` CSV written by [`SizeHistogram::write_csv`].
    pub fn read_csv<R: BufRead>(input: R) -> Result<Self> {
        let mut hist = Self::new();
        for (lineno, line) in input.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if line.is_empty() || (lineno == 0 && line == "k,count") {
                continue;
            }
            let bad = || Error::Format(format!("line {}: expected 'k,count', got '{line}'", lineno + 1));
            let (k, n) = line.split_once(',').ok_or_else(bad)?;
            let k: u64 = k.trim().parse().map_err(|_| bad())?;
            let n: u64 = n.trim().parse().map_err(|_| bad())?;
            hist.add(BinIndex::new(k).map_err(|_| bad())?, n);
        }
        Ok(hist)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_and_header() {
        let hist = SizeHistogram::from_counts([(1, 5), (7, 2), (300, 1)]).unwrap();
        let mut buf = Vec::new();
        hist.write_csv(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "k,count\n1,5\n7,2\n300,1\n");
        assert_eq!(SizeHistogram::read_csv(&buf[..]).unwrap(), hist);
    }

    #[test]
    fn rejects_bin_zero() {
        assert!(SizeHistogram::from_counts([(0, 1)]).is_err());
        assert!(SizeHistogram::read_csv("k,count\n0,3\n".as_bytes()).is_err());
    }

    #[test]
    fn totals_and_extremes() {
        let hist = SizeHistogram::from_counts([(4, 0), (2, 3), (9, 1), (2, 1)]).unwrap();
        assert_eq!(hist.total(), 5);
        assert_eq!(hist.occupied_bins(), 2);
        assert_eq!(hist.k_max_observed().unwrap().get(), 9);
        assert_eq!(hist.tail_count(3), 1);
        assert_eq!(SizeHistogram::new().k_max_observed(), None);
    }

    #[test]
    fn from_bins_matches_incremental() {
        let ks = [3u64, 1, 3, 8, 1, 1];
        let bins: Vec<BinIndex> = ks.iter().map(|&k| BinIndex::new(k).unwrap()).collect();
        let mut inc = SizeHistogram::new();
        for &b in &bins {
            inc.add(b, 1);
        }
        assert_eq!(SizeHistogram::from_bins(&bins), inc);
    }
}
