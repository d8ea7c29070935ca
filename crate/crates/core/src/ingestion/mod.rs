//! File metadata ingestion: manifests, filesystem scans, MIME classification,
//! per-category histograms and summary statistics.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{domain, Error, Result};
use crate::histogram::SizeHistogram;

mod manifest;
mod summary;
mod walk;

pub use manifest::{parse_manifest, JsonLines, ManifestStats, Record, MAX_LINE_BYTES};
pub use summary::{CategorySummary, MedianMode, SummaryAccumulator, DEFAULT_EXACT_MEDIAN_LIMIT};
pub use walk::{scan_filesystem, FsScan};

/// One file's metadata.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileRecord {
    pub host: String,
    pub path: String,
    pub mime: String,
    pub size_bytes: u64,
}

pub const UNKNOWN_MIME: &str = "unknown/unknown";

fn is_token(s: &str) -> bool {
    !s.is_empty()
        && s.bytes().all(|b| {
            b.is_ascii_graphic() && !b"()<>@,;:\\\"/[]?=".contains(&b)
        })
}

/// `true` for `token/token` MIME strings (including the unknown sentinel).
pub fn is_valid_mime(mime: &str) -> bool {
    match mime.split_once('/') {
        Some((top, sub)) => is_token(top) && is_token(sub),
        None => false,
    }
}

impl Record for FileRecord {
    fn validate(&self) -> std::result::Result<(), String> {
        if !is_valid_mime(&self.mime) {
            return Err(format!("invalid mime '{}'", self.mime));
        }
        Ok(())
    }
}

impl FileRecord {
    /// Serializes as one manifest line (no trailing newline).
    pub fn to_manifest_line(&self) -> String {
        serde_json::to_string(self).expect("FileRecord always serializes")
    }
}

/// Top-level MIME categories, in report order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Category {
    Application,
    Audio,
    Image,
    Text,
    Video,
    Other,
}

impl Category {
    pub const ALL: [Category; 6] = [
        Category::Application,
        Category::Audio,
        Category::Image,
        Category::Text,
        Category::Video,
        Category::Other,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Category::Application => "application",
            Category::Audio => "audio",
            Category::Image => "image",
            Category::Text => "text",
            Category::Video => "video",
            Category::Other => "other",
        }
    }

    fn from_top_level(top: &str) -> Option<Category> {
        match top.to_ascii_lowercase().as_str() {
            "application" => Some(Category::Application),
            "audio" => Some(Category::Audio),
            "image" => Some(Category::Image),
            "text" => Some(Category::Text),
            "video" => Some(Category::Video),
            _ => None,
        }
    }

    /// MIME string and file extension used for synthetic records.
    pub fn synthetic_mime(self) -> (&'static str, &'static str) {
        match self {
            Category::Application => ("application/pdf", "pdf"),
            Category::Audio => ("audio/mpeg", "mp3"),
            Category::Image => ("image/jpeg", "jpg"),
            Category::Text => ("text/html", "html"),
            Category::Video => ("video/mp4", "mp4"),
            Category::Other => (UNKNOWN_MIME, "dat"),
        }
    }
}

impl fmt::Display for Category {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for Category {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim_end_matches('/');
        if s == "other" {
            return Ok(Category::Other);
        }
        Category::from_top_level(s).ok_or_else(|| domain(format!("unknown category '{s}'")))
    }
}

const EXTENSION_TABLE: &str = include_str!("../../data/extensions.tsv");

fn extension_table() -> &'static HashMap<&'static str, &'static str> {
    static TABLE: OnceLock<HashMap<&'static str, &'static str>> = OnceLock::new();
    TABLE.get_or_init(|| {
        EXTENSION_TABLE
            .lines()
            .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
            .filter_map(|l| l.split_once('\t'))
            .map(|(ext, mime)| (ext.trim(), mime.trim()))
            .collect()
    })
}

/// MIME type for a path, by extension; `None` when the extension is unknown.
pub fn mime_for_path(path: &str) -> Option<&'static str> {
    let name = path.rsplit(['/', '\\']).next().unwrap_or(path);
    let (_, ext) = name.rsplit_once('.')?;
    extension_table().get(ext.to_ascii_lowercase().as_str()).copied()
}

/// MIME category of a record: the MIME top level when it is one of the five
/// known categories, else the extension table, else [`Category::Other`].
pub fn classify(record: &FileRecord) -> Category {
    if let Some((top, _)) = record.mime.split_once('/') {
        if let Some(cat) = Category::from_top_level(top) {
            return cat;
        }
    }
    mime_for_path(&record.path)
        .and_then(|m| m.split_once('/'))
        .and_then(|(top, _)| Category::from_top_level(top))
        .unwrap_or(Category::Other)
}

/// Per-category histograms, built in a single pass.
pub fn build_histograms<I>(records: I) -> BTreeMap<Category, SizeHistogram>
where
    I: IntoIterator<Item = FileRecord>,
{
    let mut out: BTreeMap<Category, SizeHistogram> = BTreeMap::new();
    for r in records {
        out.entry(classify(&r)).or_default().add_size_bytes(r.size_bytes);
    }
    out
}

/// Adds every histogram of `other` into `into`.
pub fn merge_histograms(
    into: &mut BTreeMap<Category, SizeHistogram>,
    other: &BTreeMap<Category, SizeHistogram>,
) {
    for (cat, hist) in other {
        into.entry(*cat).or_default().merge(hist);
    }
}

/// Per-category summaries in report order.
pub fn summarize<I>(records: I) -> Vec<CategorySummary>
where
    I: IntoIterator<Item = FileRecord>,
{
    let mut ingest = Ingest::new(true);
    for r in records {
        ingest.push(r);
    }
    ingest.summaries()
}

/// Mergeable single-pass accumulator for histograms and (optionally)
/// summary statistics.
#[derive(Debug, Clone)]
pub struct Ingest {
    histograms: BTreeMap<Category, SizeHistogram>,
    summaries: Option<BTreeMap<Category, SummaryAccumulator>>,
    hosts: HashSet<String>,
    accepted: u64,
    exact_median_limit: usize,
}

const CHUNK_RECORDS: usize = 1 << 15;

impl Ingest {
    pub fn new(with_summaries: bool) -> Self {
        Self {
            histograms: BTreeMap::new(),
            summaries: with_summaries.then(BTreeMap::new),
            hosts: HashSet::new(),
            accepted: 0,
            exact_median_limit: DEFAULT_EXACT_MEDIAN_LIMIT,
        }
    }

    /// Records per category above which medians come from a quantile sketch.
    pub fn with_exact_median_limit(mut self, limit: usize) -> Self {
        self.exact_median_limit = limit;
        self
    }

    pub fn push(&mut self, record: FileRecord) {
        let cat = classify(&record);
        self.histograms.entry(cat).or_default().add_size_bytes(record.size_bytes);
        if let Some(s) = self.summaries.as_mut() {
            let limit = self.exact_median_limit;
            s.entry(cat)
                .or_insert_with(|| SummaryAccumulator::new(limit))
                .push(record.size_bytes);
            if !self.hosts.contains(&record.host) {
                self.hosts.insert(record.host);
            }
        }
        self.accepted += 1;
    }

    /// Folds `other` into `self`. Merging partials in stream order reproduces
    /// the single-pass result.
    pub fn merge(&mut self, other: Ingest) {
        merge_histograms(&mut self.histograms, &other.histograms);
        if let (Some(mine), Some(theirs)) = (self.summaries.as_mut(), other.summaries) {
            for (cat, acc) in theirs {
                match mine.get_mut(&cat) {
                    Some(m) => m.merge(acc),
                    None => {
                        mine.insert(cat, acc);
                    }
                }
            }
        }
        self.hosts.extend(other.hosts);
        self.accepted += other.accepted;
    }

    /// Consumes a record stream in fixed-size chunks processed on the rayon
    /// pool. Chunk boundaries do not depend on the worker count and partials
    /// are merged in stream order, so results are identical for any pool size.
    pub fn extend_parallel<I>(&mut self, records: I)
    where
        I: IntoIterator<Item = FileRecord>,
    {
        let batch_chunks = rayon::current_num_threads().max(1) * 2;
        let mut iter = records.into_iter();
        loop {
            let mut chunks: Vec<Vec<FileRecord>> = Vec::with_capacity(batch_chunks);
            for _ in 0..batch_chunks {
                let chunk: Vec<FileRecord> = iter.by_ref().take(CHUNK_RECORDS).collect();
                if chunk.is_empty() {
                    break;
                }
                chunks.push(chunk);
            }
            if chunks.is_empty() {
                break;
            }
            let with_summaries = self.summaries.is_some();
            let limit = self.exact_median_limit;
            let partials: Vec<Ingest> = chunks
                .into_par_iter()
                .map(|chunk| {
                    let mut part = Ingest::new(with_summaries).with_exact_median_limit(limit);
                    for r in chunk {
                        part.push(r);
                    }
                    part
                })
                .collect();
            for p in partials {
                self.merge(p);
            }
        }
    }

    pub fn histograms(&self) -> &BTreeMap<Category, SizeHistogram> {
        &self.histograms
    }

    pub fn into_histograms(self) -> BTreeMap<Category, SizeHistogram> {
        self.histograms
    }

    pub fn accepted(&self) -> u64 {
        self.accepted
    }

    pub fn host_count(&self) -> usize {
        self.hosts.len()
    }

    /// Summaries in report order; empty when summaries were not requested.
    pub fn summaries(&self) -> Vec<CategorySummary> {
        let Some(accs) = self.summaries.as_ref() else {
            return Vec::new();
        };
        let hosts = self.hosts.len();
        let total: u64 = accs.values().map(|a| a.count()).sum();
        Category::ALL
            .iter()
            .filter_map(|cat| accs.get(cat).map(|a| a.finish(*cat, hosts, total)))
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(host: &str, path: &str, mime: &str, size: u64) -> FileRecord {
        FileRecord { host: host.into(), path: path.into(), mime: mime.into(), size_bytes: size }
    }

    #[test]
    fn classification_examples() {
        assert_eq!(classify(&rec("h", "/a", "image/jpeg", 1)), Category::Image);
        assert_eq!(classify(&rec("h", "/clip.mp4", UNKNOWN_MIME, 1)), Category::Video);
        assert_eq!(classify(&rec("h", "/data.bin9z", UNKNOWN_MIME, 1)), Category::Other);
        assert_eq!(classify(&rec("h", "/x.PDF", "unknown/unknown", 1)), Category::Application);
        assert_eq!(classify(&rec("h", "/x.jpg", "model/stl", 1)), Category::Image);
        assert_eq!(classify(&rec("h", "/dir.mp4/file", UNKNOWN_MIME, 1)), Category::Other);
    }

    #[test]
    fn mime_token_rules() {
        assert!(is_valid_mime("image/jpeg"));
        assert!(is_valid_mime("application/vnd.ms-excel"));
        assert!(is_valid_mime(UNKNOWN_MIME));
        assert!(!is_valid_mime("image"));
        assert!(!is_valid_mime("image/"));
        assert!(!is_valid_mime("text/html; charset=utf-8"));
        assert!(!is_valid_mime("a/b/c"));
    }

    #[test]
    fn extension_table_is_reasonably_sized() {
        let n = extension_table().len();
        assert!((60..=100).contains(&n), "{n}");
    }

    #[test]
    fn bin_mapping_examples() {
        let hists = build_histograms([0, 500, 1023].map(|s| rec("h", "/f", "text/plain", s)));
        assert_eq!(hists[&Category::Text], SizeHistogram::from_counts([(1, 3)]).unwrap());
        let hists = build_histograms([1024, 2047].map(|s| rec("h", "/f", "text/plain", s)));
        assert_eq!(hists[&Category::Text], SizeHistogram::from_counts([(2, 2)]).unwrap());
    }

    #[test]
    fn summary_examples() {
        let s = summarize([1024, 2048, 3072].map(|b| rec("h1", "/f", "image/png", b)));
        assert_eq!(s.len(), 1);
        assert_eq!(s[0].files_per_host, 3.0);
        assert_eq!(s[0].mean_kb, 2.0);
        assert_eq!(s[0].median_kb, 2.0);

        // two hosts, one holds 4 videos and the other none
        let mut records: Vec<FileRecord> =
            (0..4).map(|i| rec("a", &format!("/{i}.mp4"), "video/mp4", 10)).collect();
        records.push(rec("b", "/x.txt", "text/plain", 10));
        let s = summarize(records);
        let video = s.iter().find(|c| c.category == Category::Video).unwrap();
        assert_eq!(video.files_per_host, 2.0);
        assert_eq!(s[0].category, Category::Text);
        assert_eq!(s[1].category, Category::Video);
    }

    #[test]
    fn parallel_matches_sequential() {
        let records: Vec<FileRecord> = (0..100_000u64)
            .map(|i| rec(&format!("h{}", i % 37), &format!("/{i}.jpg"), "image/jpeg", (i * 7919) % 5_000_000))
            .collect();
        let seq = build_histograms(records.clone());
        let mut par = Ingest::new(true);
        par.extend_parallel(records.clone());
        assert_eq!(par.histograms(), &seq);
        assert_eq!(par.summaries(), summarize(records));
    }
}
