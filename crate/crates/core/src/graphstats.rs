//! Host-level link statistics: the in-degree distribution and how the number
//! of hosted files varies with in-degree.

use std::collections::BTreeMap;
use std::io::{BufRead, Read, Write};

use serde::{Deserialize, Serialize};

use crate::distributions::{BinIndex, Family};
use crate::error::{domain, Error, Result};
use crate::fitting::{default_grid, FitResult, Fitter, MIN_TAIL_COUNT};
use crate::histogram::SizeHistogram;
use crate::ingestion::{JsonLines, Record};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HostRecord {
    pub host: String,
    pub in_degree: u64,
    pub file_count: u64,
}

impl Record for HostRecord {}

/// Streams host records from a line-delimited JSON manifest (plain or gzip).
pub fn parse_host_manifest<R: Read + 'static>(input: R) -> Result<JsonLines<Box<dyn BufRead>, HostRecord>> {
    JsonLines::open(input)
}

/// Hosts per in-degree. Degree 0 has no bin (and no logarithm), so those
/// hosts are only counted.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DegreeHistogram {
    pub degrees: SizeHistogram,
    pub zero_degree: u64,
}

impl DegreeHistogram {
    pub fn add(&mut self, in_degree: u64) {
        match BinIndex::new(in_degree) {
            Ok(k) => self.degrees.add(k, 1),
            Err(_) => self.zero_degree += 1,
        }
    }

    pub fn merge(&mut self, other: &DegreeHistogram) {
        self.degrees.merge(&other.degrees);
        self.zero_degree += other.zero_degree;
    }
}

pub fn indegree_histogram<I: IntoIterator<Item = HostRecord>>(hosts: I) -> DegreeHistogram {
    let mut h = DegreeHistogram::default();
    for host in hosts {
        h.add(host.in_degree);
    }
    h
}

/// Power-law fit of an in-degree histogram.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeFit {
    pub fit: FitResult,
    /// Log-log slope of the pmf, `−alpha`.
    pub slope: f64,
}

/// Scans `k_min` over the default grid with the power-law family.
pub fn fit_indegree_slope(hist: &SizeHistogram) -> Result<SlopeFit> {
    fit_indegree_slope_on(hist, &default_grid())
}

pub fn fit_indegree_slope_on(hist: &SizeHistogram, grid: &[BinIndex]) -> Result<SlopeFit> {
    if hist.total() < MIN_TAIL_COUNT {
        return Err(Error::InsufficientTail { k_min: 1, count: hist.total(), required: MIN_TAIL_COUNT });
    }
    let fit = Fitter::new(hist).scan(Family::PowerLaw, grid)?;
    let alpha = fit.param("alpha").expect("power-law fit has alpha");
    Ok(SlopeFit { fit, slope: -alpha })
}

/// `0` for zero, else `1 + ⌊log_base v⌋`, by repeated multiplication so exact
/// powers land in the right bin.
fn log_bin(v: u64, base: f64) -> usize {
    if v == 0 {
        return 0;
    }
    let v = v as f64;
    let (mut edge, mut i) = (1.0f64, 1usize);
    while edge * base <= v {
        edge *= base;
        i += 1;
    }
    i
}

/// Host counts on a log-binned (in-degree, file count) grid.
#[derive(Debug, Clone, PartialEq)]
pub struct JointHistogram {
    base: f64,
    cells: BTreeMap<(usize, usize), u64>,
    total: u64,
}

impl JointHistogram {
    pub fn new(log_base: f64) -> Result<Self> {
        if !(log_base.is_finite() && log_base > 1.0) {
            return Err(domain(format!("log_base must be > 1, got {log_base}")));
        }
        Ok(Self { base: log_base, cells: BTreeMap::new(), total: 0 })
    }

    pub fn base(&self) -> f64 {
        self.base
    }

    pub fn add(&mut self, host: &HostRecord) {
        let cell = (log_bin(host.in_degree, self.base), log_bin(host.file_count, self.base));
        *self.cells.entry(cell).or_insert(0) += 1;
        self.total += 1;
    }

    pub fn merge(&mut self, other: &JointHistogram) -> Result<()> {
        if other.base != self.base {
            return Err(domain(format!("cannot merge log bases {} and {}", self.base, other.base)));
        }
        for (&cell, &n) in &other.cells {
            *self.cells.entry(cell).or_insert(0) += n;
        }
        self.total += other.total;
        Ok(())
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Count in cell `(in-degree bin, file-count bin)`.
    pub fn get(&self, degree_bin: usize, files_bin: usize) -> u64 {
        self.cells.get(&(degree_bin, files_bin)).copied().unwrap_or(0)
    }

    /// `(rows, columns)` of the dense matrix; at least `(1, 1)`.
    pub fn shape(&self) -> (usize, usize) {
        let rows = self.cells.keys().map(|c| c.0).max().unwrap_or(0) + 1;
        let cols = self.cells.keys().map(|c| c.1).max().unwrap_or(0) + 1;
        (rows, cols)
    }

    pub fn to_matrix(&self) -> Vec<Vec<u64>> {
        let (rows, cols) = self.shape();
        let mut m = vec![vec![0; cols]; rows];
        for (&(i, j), &n) in &self.cells {
            m[i][j] = n;
        }
        m
    }

    /// Smallest value that falls in bin `i`.
    pub fn lower_edge(&self, i: usize) -> f64 {
        match i {
            0 => 0.0,
            _ => self.base.powi(i as i32 - 1),
        }
    }

    /// Dense CSV: first row holds the file-count bin lower edges, first
    /// column the in-degree bin lower edges.
    pub fn write_csv<W: Write>(&self, mut out: W) -> Result<()> {
        let (rows, cols) = self.shape();
        let matrix = self.to_matrix();
        write!(out, "in_degree\\file_count")?;
        for j in 0..cols {
            write!(out, ",{}", self.lower_edge(j))?;
        }
        writeln!(out)?;
        for (i, row) in matrix.iter().enumerate().take(rows) {
            write!(out, "{}", self.lower_edge(i))?;
            for n in row {
                write!(out, ",{n}")?;
            }
            writeln!(out)?;
        }
        Ok(())
    }

    /// Spearman correlation between the in-degree bin and the file-count bin,
    /// each host weighted once, ties given mid-ranks. `None` if either
    /// marginal is constant.
    pub fn rank_correlation(&self) -> Option<f64> {
        fn midranks(marginal: &BTreeMap<usize, u64>) -> BTreeMap<usize, f64> {
            let mut below = 0u64;
            marginal
                .iter()
                .map(|(&bin, &n)| {
                    let r = below as f64 + (n as f64 + 1.0) / 2.0;
                    below += n;
                    (bin, r)
                })
                .collect()
        }
        let (mut rows, mut cols) = (BTreeMap::new(), BTreeMap::new());
        for (&(i, j), &n) in &self.cells {
            *rows.entry(i).or_insert(0u64) += n;
            *cols.entry(j).or_insert(0u64) += n;
        }
        let (ri, rj) = (midranks(&rows), midranks(&cols));
        let n = self.total as f64;
        let mean = (n + 1.0) / 2.0;
        let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
        for (&(i, j), &c) in &self.cells {
            let (x, y) = (ri[&i] - mean, rj[&j] - mean);
            let w = c as f64;
            sxy += w * x * y;
            sxx += w * x * x;
            syy += w * y * y;
        }
        (sxx > 0.0 && syy > 0.0).then(|| sxy / (sxx * syy).sqrt())
    }
}

pub fn joint_histogram<I: IntoIterator<Item = HostRecord>>(hosts: I, log_base: f64) -> Result<JointHistogram> {
    let mut j = JointHistogram::new(log_base)?;
    for h in hosts {
        j.add(&h);
    }
    Ok(j)
}
