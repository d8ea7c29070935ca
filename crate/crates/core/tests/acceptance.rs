//! End-to-end acceptance checks. Runs as a plain binary (no libtest harness)
//! so each check prints exactly one PASS/FAIL line; exits nonzero if any fail.

mod common;

use std::collections::BTreeMap;
use std::io::{self, Read};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::{bin, exponential, lognormal, lognormal_z, powerlaw, powerlaw_z};
use tailfit::distributions::{lognormal_normalizer, powerlaw_normalizer, Sampler};
use tailfit::fitting::{compare_models, default_grid, scan_kmin, Fitter};
use tailfit::graphstats::fit_indegree_slope;
use tailfit::ingestion::{parse_manifest, FileRecord, Ingest};
use tailfit::maxent::{maxent_pmf, solve_lagrange, verify_stationarity, MaxEntModel, MomentTargets};
use tailfit::{Family, SizeHistogram, TailModel};

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

// ---------------------------------------------------------------- normalizers

fn normalizer_oracle() -> Outcome {
    let basel = powerlaw_normalizer(2.0, bin(1)).map_err(|e| e.to_string())?;
    let pi2_6 = std::f64::consts::PI.powi(2) / 6.0;
    let basel_rel = (basel - pi2_6).abs() / pi2_6;

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let (mut worst_pl, mut worst_ln) = (0.0f64, 0.0f64);
    for _ in 0..20 {
        let alpha = rng.random_range(1.3..4.0);
        let k_min = rng.random_range(1..200u64);
        let got = powerlaw_normalizer(alpha, bin(k_min)).map_err(|e| e.to_string())?;
        let want = powerlaw_z(alpha, k_min);
        worst_pl = worst_pl.max((got - want).abs() / want);

        let mu = rng.random_range(-1.0..9.0);
        let sigma = rng.random_range(0.2..3.0);
        let k_min = rng.random_range(1..200u64);
        let got = lognormal_normalizer(mu, sigma, bin(k_min)).map_err(|e| e.to_string())?;
        let want = lognormal_z(mu, sigma, k_min);
        worst_ln = worst_ln.max((got - want).abs() / want);
    }
    check(
        basel_rel < 1e-9 && worst_pl < 1e-9 && worst_ln < 1e-9,
        format!("zeta(2) rel {basel_rel:.1e}; power-law worst rel {worst_pl:.1e}; log-normal worst rel {worst_ln:.1e} (tol 1e-9)"),
    )
}

// ---------------------------------------------------------------- corners

fn corner_identities() -> Outcome {
    let cases: Vec<(&str, TailModel, MaxEntModel)> = vec![
        ("power-law", powerlaw(2.5, 3), MaxEntModel::new(0.0, 2.5, 0.0, bin(3), None).unwrap()),
        ("power-law", powerlaw(1.7, 1), MaxEntModel::new(0.0, 1.7, 0.0, bin(1), None).unwrap()),
        (
            "log-normal",
            lognormal(4.0, 1.3, 2),
            MaxEntModel::new(0.0, 1.0 - 4.0 / 1.69, 1.0 / (2.0 * 1.69), bin(2), None).unwrap(),
        ),
        ("exponential", exponential(0.01, 5), MaxEntModel::new(0.01, 0.0, 0.0, bin(5), None).unwrap()),
    ];
    let mut worst_abs = 0.0f64;
    let mut worst_rel = 0.0f64;
    let mut lines = Vec::new();
    for (name, family, corner) in &cases {
        let k_min = family.k_min().get();
        let mut abs = 0.0f64;
        for k in k_min..=10_000 {
            let a = family.pmf(bin(k)).map_err(|e| e.to_string())?;
            let b = maxent_pmf(corner, bin(k)).map_err(|e| e.to_string())?;
            abs = abs.max((a - b).abs());
            if a > 0.0 {
                worst_rel = worst_rel.max((a - b).abs() / a);
            }
        }
        worst_abs = worst_abs.max(abs);
        lines.push(format!("{name} {abs:.1e}"));
    }
    check(
        worst_abs < 1e-12,
        format!("max |Δpmf| {worst_abs:.1e} (tol 1e-12), max rel {worst_rel:.1e}; {}", lines.join(", ")),
    )
}

// ---------------------------------------------------------------- refit

fn synthesize_and_refit() -> Outcome {
    const RUNS: u64 = 100;
    const N: usize = 1_000_000;
    let pl = Sampler::new(&powerlaw(2.5, 8));
    let ln = Sampler::new(&lognormal(7.0, 1.5, 1));
    let ex = Sampler::new(&exponential(std::f64::consts::LN_2, 1));
    let (mut ok_pl, mut ok_ln, mut ok_ex) = (0, 0, 0);
    let (mut dev_pl, mut dev_mu, mut dev_sigma, mut dev_ex) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for seed in 0..RUNS {
        let h = pl.sample_histogram(N, 1000 + seed);
        let alpha = Fitter::new(&h).powerlaw(bin(8)).map_err(|e| e.to_string())?.param("alpha").unwrap();
        dev_pl = dev_pl.max((alpha - 2.5).abs());
        ok_pl += ((alpha - 2.5).abs() <= 0.02) as u32;

        let h = ln.sample_histogram(N, 2000 + seed);
        let est = Fitter::new(&h).lognormal(bin(1)).map_err(|e| e.to_string())?;
        let (mu, sigma) = (est.param("mu").unwrap(), est.param("sigma").unwrap());
        dev_mu = dev_mu.max((mu - 7.0).abs());
        dev_sigma = dev_sigma.max((sigma - 1.5).abs());
        ok_ln += ((mu - 7.0).abs() <= 0.02 && (sigma - 1.5).abs() <= 0.02) as u32;

        let h = ex.sample_histogram(N, 3000 + seed);
        let lambda = Fitter::new(&h).exponential(bin(1)).map_err(|e| e.to_string())?.param("lambda").unwrap();
        dev_ex = dev_ex.max((lambda - std::f64::consts::LN_2).abs());
        ok_ex += ((lambda - std::f64::consts::LN_2).abs() <= 0.005) as u32;
    }
    check(
        ok_pl >= 95 && ok_ln >= 95 && ok_ex >= 95,
        format!(
            "power-law {ok_pl}/100 (max |Δα| {dev_pl:.4}), log-normal {ok_ln}/100 (max |Δμ| {dev_mu:.4}, |Δσ| {dev_sigma:.4}), \
             exponential {ok_ex}/100 (max |Δλ| {dev_ex:.5}); need 95"
        ),
    )
}

// ---------------------------------------------------------------- ordering

fn ordering_reproduction() -> Outcome {
    const SEEDS: u64 = 50;
    const N: usize = 100_000;
    let grid = default_grid();
    let video = Sampler::new(&lognormal(7.0, 1.5, 1));
    let app = Sampler::new(&powerlaw(2.2, 1));
    let (mut ok_video, mut ok_app) = (0, 0);
    let (mut worst_video, mut worst_app) = (0.0f64, 0.0f64);
    for seed in 0..SEEDS {
        let h = video.sample_histogram(N, 4000 + seed);
        let r = compare_models(&h, &grid).map_err(|e| e.to_string())?;
        let (ln, pl) = (r.get(Family::LogNormal), r.get(Family::PowerLaw));
        if let (Some(ln), Some(pl)) = (ln, pl) {
            let ratio = ln.rss / pl.rss;
            worst_video = worst_video.max(ratio);
            ok_video += (ratio < 0.1) as u32;
        }

        let h = app.sample_histogram(N, 5000 + seed);
        let r = compare_models(&h, &grid).map_err(|e| e.to_string())?;
        match (r.get(Family::PowerLaw), r.get(Family::LogNormal)) {
            (Some(pl), Some(ln)) => {
                worst_app = worst_app.max(pl.rss / ln.rss);
                ok_app += (pl.rss < ln.rss) as u32;
            }
            (Some(_), None) => ok_app += 1,
            _ => {}
        }
    }
    check(
        ok_video >= 48 && ok_app >= 48,
        format!(
            "video-like rss_ln < 0.1·rss_pl {ok_video}/50 (worst ratio {worst_video:.2e}); \
             application-like rss_pl < rss_ln {ok_app}/50 (worst ratio {worst_app:.2e}); need 48"
        ),
    )
}

// ---------------------------------------------------------------- k_min scan

fn kmin_scan() -> Outcome {
    const SEEDS: u64 = 50;
    let grid = default_grid();
    let tail = Sampler::new(&powerlaw(2.5, 50));
    let mut ok = 0;
    let mut picks = Vec::new();
    for seed in 0..SEEDS {
        let mut h = tail.sample_histogram(100_000, 6000 + seed);
        let mut rng = ChaCha8Rng::seed_from_u64(7000 + seed);
        for _ in 0..50_000 {
            h.add(bin(rng.random_range(1..50)), 1);
        }
        let fit = scan_kmin(&h, Family::PowerLaw, &grid).map_err(|e| e.to_string())?;
        let k = fit.k_min.get();
        ok += (25..=100).contains(&k) as u32;
        picks.push(k);
    }
    picks.sort_unstable();
    check(
        ok >= 45,
        format!("selected k_min in [25, 100] for {ok}/50 (range {}..{}); need 45", picks[0], picks[picks.len() - 1]),
    )
}

// ---------------------------------------------------------------- maxent

fn maxent_solver() -> Outcome {
    let hi = bin(100_000);
    let forward = |m: &MaxEntModel| m.moments().map_err(|e| e.to_string());
    let mut worst: f64 = 0.0;
    let mut worst_stationary: f64 = 0.0;

    let truth = MaxEntModel::new(0.0, 2.0, 0.0, bin(1), Some(hi)).unwrap();
    let m = forward(&truth)?;
    let solved = solve_lagrange(&MomentTargets { e_log: Some(m.e_log), ..Default::default() }, bin(1), hi)
        .map_err(|e| e.to_string())?;
    worst = worst.max((solved.lambda_1() - 2.0).abs());
    let mut models = vec![solved];

    let truth = MaxEntModel::new(0.0, -2.0, 0.5, bin(1), Some(hi)).unwrap();
    let m = forward(&truth)?;
    let solved = solve_lagrange(
        &MomentTargets { e_log: Some(m.e_log), e_log2: Some(m.e_log2), ..Default::default() },
        bin(1),
        hi,
    )
    .map_err(|e| e.to_string())?;
    worst = worst.max((solved.lambda_1() + 2.0).abs()).max((solved.lambda_2() - 0.5).abs());
    models.push(solved);

    let truth = MaxEntModel::new(0.01, 0.0, 0.0, bin(1), Some(hi)).unwrap();
    let m = forward(&truth)?;
    let solved = solve_lagrange(&MomentTargets { e_s: Some(m.e_s), ..Default::default() }, bin(1), hi)
        .map_err(|e| e.to_string())?;
    worst = worst.max((solved.lambda_s() - 0.01).abs());
    models.push(solved);

    for (i, model) in models.iter().enumerate() {
        let r = verify_stationarity(model, 32, 90 + i as u64).map_err(|e| e.to_string())?;
        worst_stationary = worst_stationary.max(r.max_first_order);
    }
    // λ₁ is not constrained in the exponential solve, so moving it leaves the
    // constrained maximum
    let perturbed = models[2].with_lambda_1(0.1).map_err(|e| e.to_string())?;
    let control = verify_stationarity(&perturbed, 32, 99).map_err(|e| e.to_string())?.max_first_order;
    check(
        worst < 1e-5 && worst_stationary < 1e-8 && control > 1e-4,
        format!(
            "max multiplier error {worst:.1e} (tol 1e-5); stationarity {worst_stationary:.1e} (tol 1e-8); \
             perturbed control {control:.1e}"
        ),
    )
}

// ---------------------------------------------------------------- in-degree

fn indegree_slope() -> Outcome {
    const SEEDS: u64 = 20;
    let degrees = Sampler::new(&powerlaw(2.2, 1));
    let mut ok = 0;
    let mut worst: f64 = 0.0;
    for seed in 0..SEEDS {
        let h = degrees.sample_histogram(1_000_000, 8000 + seed);
        let slope = fit_indegree_slope(&h).map_err(|e| e.to_string())?.slope;
        worst = worst.max((slope + 2.2).abs());
        ok += ((slope + 2.2).abs() <= 0.05) as u32;
    }
    check(ok >= 19, format!("slope within −2.2 ± 0.05 for {ok}/{SEEDS} (max |Δ| {worst:.4}); need 19"))
}

// ---------------------------------------------------------------- pipeline

fn run_pipeline(dir: &Path, threads: &str) -> Result<BTreeMap<String, Vec<u8>>, String> {
    let exe = env!("CARGO_BIN_EXE_tailfit");
    // relative paths: the summary records its input path
    let steps: Vec<Vec<&str>> = vec![
        vec!["synth", "--family", "lognormal", "--mu", "5", "--sigma", "1.2", "-n", "20000", "--category", "video", "--out", "."],
        vec!["hist", "--input", "manifest.jsonl", "--out", "."],
        vec!["fit", "--input", "hist_video.csv", "--out", "."],
    ];
    for args in steps {
        let status = Command::new(exe)
            .args(&args)
            .current_dir(dir)
            .env("TAILFIT_THREADS", threads)
            .output()
            .map_err(|e| e.to_string())?;
        if !status.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&status.stderr)));
        }
    }
    let mut files = BTreeMap::new();
    for entry in std::fs::read_dir(dir).map_err(|e| e.to_string())? {
        let entry = entry.map_err(|e| e.to_string())?;
        let bytes = std::fs::read(entry.path()).map_err(|e| e.to_string())?;
        files.insert(entry.file_name().to_string_lossy().into_owned(), bytes);
    }
    Ok(files)
}

fn pipeline_determinism() -> Outcome {
    let root = tempfile::tempdir().map_err(|e| e.to_string())?;
    let mut runs = Vec::new();
    for (i, threads) in ["1", "1", "8"].iter().enumerate() {
        let dir = root.path().join(format!("run{i}"));
        std::fs::create_dir(&dir).map_err(|e| e.to_string())?;
        runs.push(run_pipeline(&dir, threads)?);
    }
    let names: Vec<&String> = runs[0].keys().collect();
    let has_report = runs[0].contains_key("report.json") && runs[0].contains_key("fit_video.json");
    check(
        has_report && runs[0] == runs[1] && runs[0] == runs[2],
        format!(
            "{} files identical across repeat run and 1 vs 8 workers: {}",
            names.len(),
            names.iter().map(|s| s.as_str()).collect::<Vec<_>>().join(" ")
        ),
    )
}

// ---------------------------------------------------------------- ingestion

/// Lazily generated manifest: never holds more than one line.
struct GeneratedManifest {
    sampler: Sampler,
    rng: ChaCha8Rng,
    remaining: u64,
    index: u64,
    line: Vec<u8>,
    pos: usize,
}

const MIMES: [&str; 6] = ["application/pdf", "audio/mpeg", "image/jpeg", "text/html", "video/mp4", "x-weird/thing"];

impl GeneratedManifest {
    fn new(lines: u64, seed: u64) -> Self {
        Self {
            sampler: Sampler::new(&lognormal(5.0, 2.0, 1)),
            rng: ChaCha8Rng::seed_from_u64(seed),
            remaining: lines,
            index: 0,
            line: Vec::with_capacity(256),
            pos: 0,
        }
    }

    fn record(&mut self) -> FileRecord {
        let k = self.sampler.draw_with(&mut self.rng).get();
        let offset: u64 = self.rng.random_range(0..1024);
        let mime = MIMES[self.rng.random_range(0..MIMES.len())];
        let r = FileRecord {
            host: format!("h{}.example", self.rng.random_range(0..1000u32)),
            path: format!("/d/{}", self.index),
            mime: mime.to_string(),
            size_bytes: (k - 1) * 1024 + offset,
        };
        self.index += 1;
        r
    }
}

impl Iterator for GeneratedManifest {
    type Item = FileRecord;
    fn next(&mut self) -> Option<FileRecord> {
        if self.remaining == 0 {
            return None;
        }
        self.remaining -= 1;
        Some(self.record())
    }
}

impl Read for GeneratedManifest {
    fn read(&mut self, buf: &mut [u8]) -> io::Result<usize> {
        if self.pos == self.line.len() {
            if self.remaining == 0 {
                return Ok(0);
            }
            self.remaining -= 1;
            let r = self.record();
            self.line.clear();
            self.line.extend_from_slice(r.to_manifest_line().as_bytes());
            self.line.push(b'\n');
            self.pos = 0;
        }
        let n = buf.len().min(self.line.len() - self.pos);
        buf[..n].copy_from_slice(&self.line[self.pos..self.pos + n]);
        self.pos += n;
        Ok(n)
    }
}

fn peak_rss_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    let line = status.lines().find(|l| l.starts_with("VmHWM:"))?;
    let kb: u64 = line.split_whitespace().nth(1)?.parse().ok()?;
    Some(kb * 1024)
}

fn ingestion_scale() -> Outcome {
    const LINES: u64 = 10_000_000;
    let before = peak_rss_bytes();
    let started = Instant::now();
    let mut records = parse_manifest(GeneratedManifest::new(LINES, 42)).map_err(|e| e.to_string())?;
    let mut ingest = Ingest::new(false);
    ingest.extend_parallel(records.by_ref().map_while(|r| r.ok()));
    let elapsed = started.elapsed();
    let stats = records.stats().clone();
    let after = peak_rss_bytes();

    let occupied: usize = ingest.histograms().values().map(SizeHistogram::occupied_bins).sum();
    let total: u64 = ingest.histograms().values().map(SizeHistogram::total).sum();
    let budget = 64 * (1 << 20) + 256 * occupied as u64;
    let growth = match (before, after) {
        (Some(b), Some(a)) => Some(a.saturating_sub(b)),
        _ => None,
    };
    let memory_ok = growth.is_none_or(|g| g <= budget);

    // merge law on a smaller stream: uneven split, merged in order
    let records: Vec<FileRecord> = GeneratedManifest::new(1_000_000, 43).collect();
    let mut whole = Ingest::new(true);
    records.iter().cloned().for_each(|r| whole.push(r));
    let mut merged = Ingest::new(true);
    for part in [&records[..1], &records[1..333_333], &records[333_333..]] {
        let mut p = Ingest::new(true);
        part.iter().cloned().for_each(|r| p.push(r));
        merged.merge(p);
    }
    let mut parallel = Ingest::new(true);
    parallel.extend_parallel(records.iter().cloned());
    let merge_ok = merged.histograms() == whole.histograms()
        && parallel.histograms() == whole.histograms()
        && serde_json::to_string(&merged.summaries()).unwrap() == serde_json::to_string(&whole.summaries()).unwrap();

    check(
        total == LINES && stats.accepted == LINES && elapsed < Duration::from_secs(60) && memory_ok && merge_ok,
        format!(
            "{total} records in {:.1} s (limit 60 s); peak memory growth {} for {occupied} occupied bins (budget {:.1} MiB); merge law {}",
            elapsed.as_secs_f64(),
            growth.map_or("unavailable".into(), |g| format!("{:.1} MiB", g as f64 / (1 << 20) as f64)),
            budget as f64 / (1 << 20) as f64,
            if merge_ok { "holds" } else { "VIOLATED" }
        ),
    )
}

// ---------------------------------------------------------------- driver

fn main() {
    // ingestion first, so its peak-memory reading starts from a small baseline
    let checks: [(&str, fn() -> Outcome, u64); 9] = [
        ("ingestion_scale", ingestion_scale, 60),
        ("normalizer_oracle", normalizer_oracle, 10),
        ("corner_identities", corner_identities, 5),
        ("synthesize_and_refit", synthesize_and_refit, 300),
        ("ordering_reproduction", ordering_reproduction, 600),
        ("kmin_scan", kmin_scan, 0),
        ("maxent_solver", maxent_solver, 0),
        ("indegree_slope", indegree_slope, 0),
        ("pipeline_determinism", pipeline_determinism, 0),
    ];
    let mut failed = 0;
    for (name, f, limit) in checks {
        let started = Instant::now();
        let outcome = f();
        let secs = started.elapsed().as_secs_f64();
        let slow = limit > 0 && secs > limit as f64;
        let (verdict, detail) = match outcome {
            Ok(d) if !slow => ("PASS", d),
            Ok(d) => ("FAIL", format!("{d}; took longer than {limit} s")),
            Err(d) => ("FAIL", d),
        };
        if verdict == "FAIL" {
            failed += 1;
        }
        println!("{verdict} {name:<22} [{secs:7.1} s] {detail}");
    }
    if failed > 0 {
        println!("{failed} acceptance check(s) failed");
        std::process::exit(1);
    }
    println!("all acceptance checks passed");
}
