use std::io::Write;

use flate2::write::GzEncoder;
use flate2::Compression;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use tailfit::ingestion::{
    build_histograms, classify, merge_histograms, parse_manifest, scan_filesystem, summarize, Category, FileRecord,
    Ingest, MedianMode, SummaryAccumulator,
};
use tailfit::{Error, SizeHistogram};

fn rec(host: &str, path: &str, mime: &str, size: u64) -> FileRecord {
    FileRecord { host: host.into(), path: path.into(), mime: mime.into(), size_bytes: size }
}

fn random_records(n: usize, seed: u64) -> Vec<FileRecord> {
    let mimes = ["image/png", "video/mp4", "text/plain", "application/zip", "audio/ogg", "unknown/unknown"];
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            let size = (rng.random::<f64>().powf(-1.3) * 500.0) as u64;
            rec(&format!("h{}", rng.random_range(0..40)), &format!("/f{i}.dat"), mimes[rng.random_range(0..6)], size)
        })
        .collect()
}

#[test]
fn manifest_line_parses() {
    let line = r#"{"host":"a.example","path":"/x.jpg","mime":"image/jpeg","size_bytes":189000}"#;
    let recs: Vec<FileRecord> = parse_manifest(line.as_bytes()).unwrap().map(Result::unwrap).collect();
    assert_eq!(recs, vec![rec("a.example", "/x.jpg", "image/jpeg", 189_000)]);
}

#[test]
fn malformed_lines_are_counted() {
    let text = "{\"host\":\"a\",\"path\":\"/a\",\"mime\":\"text/plain\",\"size_bytes\":1}\n\
                {\"host\":\"a\",\"path\":\"/b\",\"mime\":\"text/plain\",\"size_bytes\":-5}\n\
                {\"host\":\"a\",\"path\":\"/c\",\"mime\":\"text/plain\",\"size_bytes\":2}\n\
                {\"host\":\"a\",\"path\":\"/d\",\"mime\":\"text/plain\",\"size_bytes\":3}\n";
    let mut stream = parse_manifest(text.as_bytes()).unwrap();
    let recs: Vec<FileRecord> = stream.by_ref().map(Result::unwrap).collect();
    assert_eq!(recs.len(), 3);
    assert_eq!(stream.stats().malformed, 1);
    assert_eq!(stream.stats().diagnostics[0].0, 2);
}

#[test]
fn empty_and_garbage_input() {
    let mut empty = parse_manifest(&b""[..]).unwrap();
    assert!(empty.next().is_none());
    assert_eq!(empty.stats().malformed, 0);
    let garbage = "not json\n".repeat(10);
    assert!(matches!(parse_manifest(std::io::Cursor::new(garbage)), Err(Error::Format(_))));
}

#[test]
fn gzip_is_transparent() {
    let plain: String = random_records(500, 1).iter().map(|r| r.to_manifest_line() + "\n").collect();
    let mut enc = GzEncoder::new(Vec::new(), Compression::default());
    enc.write_all(plain.as_bytes()).unwrap();
    let gz = enc.finish().unwrap();
    let a: Vec<FileRecord> = parse_manifest(std::io::Cursor::new(plain.into_bytes())).unwrap().map(Result::unwrap).collect();
    let b: Vec<FileRecord> = parse_manifest(std::io::Cursor::new(gz)).unwrap().map(Result::unwrap).collect();
    assert_eq!(a, b);
}

#[test]
fn classification() {
    assert_eq!(classify(&rec("h", "/a", "image/jpeg", 1)), Category::Image);
    assert_eq!(classify(&rec("h", "/clip.mp4", "unknown/unknown", 1)), Category::Video);
    assert_eq!(classify(&rec("h", "/data.bin9z", "unknown/unknown", 1)), Category::Other);
    assert_eq!(classify(&rec("h", "/x.jpg", "chemical/x-pdb", 1)), Category::Image);
    let r = rec("h", "/report.PDF", "x-foo/bar", 1);
    assert_eq!(classify(&r), classify(&r));
    assert_eq!(classify(&r), Category::Application);
}

#[test]
fn binning() {
    let h = build_histograms([0, 500, 1023].map(|s| rec("h", "/a.txt", "text/plain", s)));
    assert_eq!(h[&Category::Text], SizeHistogram::from_counts([(1, 3)]).unwrap());
    let h = build_histograms([1024, 2047].map(|s| rec("h", "/a.txt", "text/plain", s)));
    assert_eq!(h[&Category::Text], SizeHistogram::from_counts([(2, 2)]).unwrap());
}

#[test]
fn split_streams_merge_exactly() {
    let records = random_records(20_000, 2);
    let whole = build_histograms(records.clone());
    let total: u64 = whole.values().map(SizeHistogram::total).sum();
    assert_eq!(total, records.len() as u64);
    for cut in [0, 1, 7_777, 20_000] {
        let mut left = build_histograms(records[..cut].to_vec());
        merge_histograms(&mut left, &build_histograms(records[cut..].to_vec()));
        assert_eq!(left, whole);
        // and in the other order
        let mut right = build_histograms(records[cut..].to_vec());
        merge_histograms(&mut right, &build_histograms(records[..cut].to_vec()));
        assert_eq!(right, whole);
    }
}

#[test]
fn single_host_summary() {
    let s = summarize([1024, 2048, 3072].map(|b| rec("h", "/a.png", "image/png", b)));
    assert_eq!(s.len(), 1);
    assert_eq!(s[0].category, Category::Image);
    assert_eq!((s[0].file_count, s[0].files_per_host, s[0].mean_kb, s[0].median_kb), (3, 3.0, 2.0, 2.0));
    assert_eq!(s[0].share, 1.0);
    assert_eq!(s[0].median_mode, MedianMode::Exact);
}

#[test]
fn files_per_host_counts_every_host() {
    let mut records: Vec<FileRecord> = (0..4).map(|i| rec("a", &format!("/{i}.mp3"), "audio/mpeg", 10)).collect();
    records.push(rec("b", "/notes.txt", "text/plain", 10));
    let s = summarize(records);
    let audio = s.iter().find(|c| c.category == Category::Audio).unwrap();
    assert_eq!(audio.files_per_host, 2.0);
}

#[test]
fn sketched_median_rank_error() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let sizes: Vec<u64> = (0..100_000).map(|_| (rng.random::<f64>().powi(3) * 1e9) as u64).collect();
    let mut acc = SummaryAccumulator::new(1000);
    sizes.iter().for_each(|&s| acc.push(s));
    let (median, mode) = acc.median_bytes();
    assert_eq!(mode, MedianMode::Sketch);
    let below = sizes.iter().filter(|&&s| (s as f64) < median).count() as f64;
    let rank_error = (below / sizes.len() as f64 - 0.5).abs();
    assert!(rank_error <= 0.005, "rank error {rank_error}");
}

#[test]
fn parallel_ingest_is_exact() {
    let records = random_records(150_000, 3);
    let mut serial = Ingest::new(true);
    records.iter().cloned().for_each(|r| serial.push(r));
    let mut parallel = Ingest::new(true);
    parallel.extend_parallel(records.iter().cloned());
    assert_eq!(serial.histograms(), parallel.histograms());
    assert_eq!(serial.summaries(), parallel.summaries());
    assert_eq!(serial.accepted(), 150_000);
    assert_eq!(serial.host_count(), 40);
}

#[test]
fn filesystem_scan_feeds_histograms() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("a.txt"), vec![b'x'; 100]).unwrap();
    std::fs::create_dir(dir.path().join("sub")).unwrap();
    std::fs::write(dir.path().join("sub/b.png"), vec![0u8; 5000]).unwrap();
    let h = build_histograms(scan_filesystem(dir.path()).unwrap());
    assert_eq!(h[&Category::Text], SizeHistogram::from_counts([(1, 1)]).unwrap());
    assert_eq!(h[&Category::Image], SizeHistogram::from_counts([(5, 1)]).unwrap());
}
