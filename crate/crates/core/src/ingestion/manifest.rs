use std::collections::VecDeque;
use std::io::{BufRead, BufReader, Read};
use std::marker::PhantomData;

use flate2::read::MultiGzDecoder;
use serde::de::DeserializeOwned;

use super::FileRecord;
use crate::error::{Error, Result};

/// Lines longer than this are rejected as malformed.
pub const MAX_LINE_BYTES: usize = 64 * 1024;
const PROBE_LINES: usize = 1000;
const KEPT_DIAGNOSTICS: usize = 20;

/// A line-delimited JSON record with semantic checks beyond its schema.
pub trait Record: DeserializeOwned {
    fn validate(&self) -> std::result::Result<(), String> {
        Ok(())
    }
}

/// Counters for one manifest stream.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ManifestStats {
    pub lines: u64,
    pub accepted: u64,
    pub malformed: u64,
    /// First few `(line number, reason)` pairs.
    pub diagnostics: Vec<(u64, String)>,
}

/// Streaming reader over line-delimited JSON records. Malformed lines are
/// counted and skipped; blank lines are ignored.
pub struct JsonLines<R, T> {
    reader: R,
    pending: VecDeque<T>,
    stats: ManifestStats,
    buf: Vec<u8>,
    done: bool,
    _record: PhantomData<T>,
}

/// Wraps `input`, transparently decompressing gzip (detected by magic bytes).
fn open_maybe_gzip<R: Read + 'static>(input: R) -> Result<Box<dyn BufRead>> {
    let mut buffered = BufReader::with_capacity(1 << 16, input);
    let head = buffered.fill_buf()?;
    if head.len() >= 2 && head[0] == 0x1f && head[1] == 0x8b {
        Ok(Box::new(BufReader::with_capacity(1 << 16, MultiGzDecoder::new(buffered))))
    } else {
        Ok(Box::new(buffered))
    }
}

/// Opens a file-record manifest (plain or gzip).
///
/// Fails with a format error when more than half of the first 1000 non-blank
/// lines are malformed.
pub fn parse_manifest<R: Read + 'static>(input: R) -> Result<JsonLines<Box<dyn BufRead>, FileRecord>> {
    JsonLines::open(input)
}

impl<T: Record> JsonLines<Box<dyn BufRead>, T> {
    pub fn open<R: Read + 'static>(input: R) -> Result<Self> {
        JsonLines::new(open_maybe_gzip(input)?)
    }
}

enum Line<T> {
    Eof,
    Blank,
    Good(T),
    Bad,
}

impl<R: BufRead, T: Record> JsonLines<R, T> {
    pub fn new(reader: R) -> Result<Self> {
        let mut this = Self {
            reader,
            pending: VecDeque::new(),
            stats: ManifestStats::default(),
            buf: Vec::new(),
            done: false,
            _record: PhantomData,
        };
        let mut probed = 0usize;
        while probed < PROBE_LINES {
            match this.read_line()? {
                Line::Eof => {
                    this.done = true;
                    break;
                }
                Line::Blank => {}
                Line::Good(r) => {
                    probed += 1;
                    this.pending.push_back(r);
                }
                Line::Bad => probed += 1,
            }
        }
        if probed > 0 && this.stats.malformed * 2 > probed as u64 {
            let detail = this
                .stats
                .diagnostics
                .first()
                .map(|(n, why)| format!("; line {n}: {why}"))
                .unwrap_or_default();
            return Err(Error::Format(format!(
                "{} of the first {probed} lines are malformed, not a manifest{detail}",
                this.stats.malformed
            )));
        }
        Ok(this)
    }

    fn read_line(&mut self) -> Result<Line<T>> {
        self.buf.clear();
        let n = self.reader.read_until(b'\n', &mut self.buf)?;
        if n == 0 {
            return Ok(Line::Eof);
        }
        let mut line: &[u8] = &self.buf;
        while let [rest @ .., b'\n' | b'\r'] = line {
            line = rest;
        }
        if line.iter().all(u8::is_ascii_whitespace) {
            return Ok(Line::Blank);
        }
        self.stats.lines += 1;
        let outcome = if line.len() > MAX_LINE_BYTES {
            Err(format!("line exceeds {MAX_LINE_BYTES} bytes"))
        } else {
            serde_json::from_slice::<T>(line)
                .map_err(|e| e.to_string())
                .and_then(|r| r.validate().map(|_| r))
        };
        Ok(match outcome {
            Ok(r) => {
                self.stats.accepted += 1;
                Line::Good(r)
            }
            Err(why) => {
                self.stats.malformed += 1;
                if self.stats.diagnostics.len() < KEPT_DIAGNOSTICS {
                    self.stats.diagnostics.push((self.stats.lines, why));
                }
                Line::Bad
            }
        })
    }

    pub fn stats(&self) -> &ManifestStats {
        &self.stats
    }

    /// Next valid record, or an I/O error.
    pub fn try_next(&mut self) -> Result<Option<T>> {
        if let Some(r) = self.pending.pop_front() {
            return Ok(Some(r));
        }
        while !self.done {
            match self.read_line()? {
                Line::Eof => self.done = true,
                Line::Good(r) => return Ok(Some(r)),
                Line::Blank | Line::Bad => {}
            }
        }
        Ok(None)
    }
}

impl<R: BufRead, T: Record> Iterator for JsonLines<R, T> {
    type Item = Result<T>;

    fn next(&mut self) -> Option<Result<T>> {
        self.try_next().transpose()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::io::Write;

    fn read_all(text: &str) -> Result<(Vec<FileRecord>, ManifestStats)> {
        let mut m = parse_manifest(std::io::Cursor::new(text.as_bytes().to_vec()))?;
        let mut out = Vec::new();
        while let Some(r) = m.try_next()? {
            out.push(r);
        }
        Ok((out, m.stats().clone()))
    }

    #[test]
    fn parses_example_line() {
        let line = r#"{"host":"a.example","path":"/x.jpg","mime":"image/jpeg","size_bytes":189000}"#;
        let (recs, stats) = read_all(&format!("{line}\n")).unwrap();
        assert_eq!(
            recs,
            vec![FileRecord {
                host: "a.example".into(),
                path: "/x.jpg".into(),
                mime: "image/jpeg".into(),
                size_bytes: 189000
            }]
        );
        assert_eq!(stats.malformed, 0);
        assert_eq!(recs[0].to_manifest_line(), line);
    }

    #[test]
    fn negative_size_counted_malformed() {
        let good = r#"{"host":"a","path":"/x","mime":"text/plain","size_bytes":1}"#;
        let bad = r#"{"host":"a","path":"/y","mime":"text/plain","size_bytes":-5}"#;
        let (recs, stats) = read_all(&format!("{good}\n{good}\n{bad}\n")).unwrap();
        assert_eq!(recs.len(), 2);
        assert_eq!(stats.malformed, 1);
        assert_eq!(stats.diagnostics[0].0, 3);
    }

    #[test]
    fn empty_input() {
        let (recs, stats) = read_all("").unwrap();
        assert!(recs.is_empty());
        assert_eq!(stats, ManifestStats::default());
    }

    #[test]
    fn mostly_garbage_is_a_format_error() {
        let good = r#"{"host":"a","path":"/x","mime":"text/plain","size_bytes":1}"#;
        let text = format!("{good}\nk,count\n1,5\n2,7\n");
        assert!(matches!(read_all(&text), Err(Error::Format(_))));
    }

    #[test]
    fn overlong_and_bad_mime_rejected() {
        let good = r#"{"host":"a","path":"/x","mime":"text/plain","size_bytes":1}"#;
        let long_path = "p".repeat(MAX_LINE_BYTES);
        let long = format!(r#"{{"host":"a","path":"{long_path}","mime":"text/plain","size_bytes":1}}"#);
        let mime = r#"{"host":"a","path":"/x","mime":"textplain","size_bytes":1}"#;
        let (recs, stats) = read_all(&format!("{good}\n{good}\n{good}\n{long}\n{mime}\n\n")).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(stats.malformed, 2);
    }

    #[test]
    fn gzip_is_transparent() {
        let line = r#"{"host":"a","path":"/x","mime":"text/plain","size_bytes":4096}"#;
        let text = format!("{line}\n{line}\n");
        let mut enc = flate2::write::GzEncoder::new(Vec::new(), flate2::Compression::default());
        enc.write_all(text.as_bytes()).unwrap();
        let gz = enc.finish().unwrap();
        let mut m = parse_manifest(std::io::Cursor::new(gz)).unwrap();
        let mut n = 0;
        while let Some(r) = m.try_next().unwrap() {
            assert_eq!(r.size_bytes, 4096);
            n += 1;
        }
        assert_eq!(n, 2);
    }
}
