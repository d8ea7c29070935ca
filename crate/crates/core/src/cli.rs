//! Command-line front end: `hist`, `fit`, `synth`, `graph` and `maxent-solve`.
//!
//! Exit codes: 0 on success, 2 for input or configuration errors, 3 when a
//! fit cannot be produced. Files written by a failing run are removed.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::distributions::{BinIndex, Family};
use crate::error::{Error, Result};
use crate::fitting::{self, empirical_ccdf, log_grid, model_ccdf_curve, write_ccdf_csv, Fitter};
use crate::graphstats::{self, DegreeHistogram, JointHistogram};
use crate::histogram::SizeHistogram;
use crate::ingestion::{parse_manifest, scan_filesystem, Category, Ingest, ManifestStats};
use crate::maxent::{self, MaxEntModel, MomentTargets};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INPUT: i32 = 2;
pub const EXIT_FIT: i32 = 3;

/// Seed used when `--seed` is not given.
pub const DEFAULT_SEED: u64 = 20_100_401;

#[derive(Debug, Parser)]
#[command(name = "tailfit", version, about = "Fit heavy-tailed file-size distributions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Per-category size histograms and summary statistics.
    Hist(HistArgs),
    /// Fit tail models and compare them by rss.
    Fit(FitArgs),
    /// Write a synthetic manifest drawn from a maximum-entropy model.
    Synth(SynthArgs),
    /// In-degree slope and files-vs-in-degree matrix from host records.
    Graph(GraphArgs),
    /// Solve for Lagrange multipliers matching target moments.
    MaxentSolve(SolveArgs),
}

#[derive(Debug, Args)]
struct Common {
    /// Output directory.
    #[arg(long, default_value = ".")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_SEED)]
    seed: u64,
}

#[derive(Debug, Args)]
struct HistArgs {
    /// Manifest file (plain or gzip) or directory to scan; repeatable.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    category: Option<String>,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FamilyChoice {
    Powerlaw,
    Lognormal,
    Exponential,
    All,
}

impl FamilyChoice {
    fn families(self) -> Vec<Family> {
        match self {
            FamilyChoice::Powerlaw => vec![Family::PowerLaw],
            FamilyChoice::Lognormal => vec![Family::LogNormal],
            FamilyChoice::Exponential => vec![Family::Exponential],
            FamilyChoice::All => Family::ALL.to_vec(),
        }
    }
}

#[derive(Debug, Args)]
struct GridArgs {
    /// Smallest candidate k_min, in KB.
    #[arg(long, default_value_t = 1)]
    kmin_lo: u64,
    /// Largest candidate k_min, in KB.
    #[arg(long, default_value_t = 102_400)]
    kmin_hi: u64,
    /// Number of log-spaced candidates before deduplication.
    #[arg(long, default_value_t = 256)]
    grid_points: usize,
}

impl GridArgs {
    fn grid(&self) -> Result<Vec<BinIndex>> {
        let lo = BinIndex::new(self.kmin_lo).map_err(|_| config("--kmin-lo must be >= 1"))?;
        let hi = BinIndex::new(self.kmin_hi).map_err(|_| config("--kmin-hi must be >= 1"))?;
        if lo > hi {
            return Err(config("--kmin-lo must not exceed --kmin-hi"));
        }
        log_grid(lo, hi, self.grid_points)
    }
}

#[derive(Debug, Args)]
struct FitArgs {
    /// Histogram CSV (`k,count`), manifest, or directory; repeatable.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long)]
    category: Option<String>,
    #[arg(long, value_enum, default_value_t = FamilyChoice::All)]
    family: FamilyChoice,
    #[command(flatten)]
    grid: GridArgs,
    /// Files above this many GB are ignored.
    #[arg(long, default_value_t = 10)]
    cap_gb: u64,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SynthArgs {
    /// Named corner of the maximum-entropy family; omit to give raw multipliers.
    #[arg(long, value_enum)]
    family: Option<FamilyChoice>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    mu: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda_s: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda_1: f64,
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    lambda_2: f64,
    /// Smallest bin of the model support.
    #[arg(long, default_value_t = 1)]
    kmin: u64,
    /// Largest bin of the support; unbounded when omitted.
    #[arg(long)]
    kmax: Option<u64>,
    /// Number of records.
    #[arg(short = 'n', long, default_value_t = 100_000)]
    count: usize,
    #[arg(long, default_value = "application")]
    category: String,
    /// Manifest file name inside `--out`.
    #[arg(long, default_value = "manifest.jsonl")]
    name: String,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct GraphArgs {
    /// Host-record manifest; repeatable.
    #[arg(long, required = true)]
    input: Vec<PathBuf>,
    #[arg(long, default_value_t = 2.0)]
    log_base: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct SolveArgs {
    #[arg(long)]
    e_s: Option<f64>,
    #[arg(long, allow_negative_numbers = true)]
    e_log: Option<f64>,
    #[arg(long)]
    e_log2: Option<f64>,
    #[arg(long, default_value_t = 1)]
    kmin: u64,
    #[arg(long)]
    kmax: u64,
    /// Random directions for the stationarity check.
    #[arg(long, default_value_t = 64)]
    trials: usize,
    #[command(flatten)]
    common: Common,
}

fn config(msg: impl Into<String>) -> Error {
    Error::Domain(msg.into())
}

/// Exit code for an error: fitting failures are 3, everything else 2.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::NoFit(_)
        | Error::EmptyTail { .. }
        | Error::InsufficientTail { .. }
        | Error::Degenerate(_)
        | Error::NoConvergence { .. } => EXIT_FIT,
        _ => EXIT_INPUT,
    }
}

/// Tracks files written by the current command so a failure can remove them.
struct Outputs {
    dir: PathBuf,
    written: Vec<PathBuf>,
}

impl Outputs {
    fn new(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), written: Vec::new() })
    }

    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        let path = self.dir.join(name);
        let file = File::create(&path)?;
        self.written.push(path);
        Ok(BufWriter::new(file))
    }

    fn write_json(&mut self, name: &str, value: &Value) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value).map_err(std::io::Error::from)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn discard(self) {
        for p in self.written {
            let _ = fs::remove_file(p);
        }
    }
}

/// Runs `f` with an output directory, removing everything it wrote if it fails.
fn with_outputs<F>(dir: &Path, f: F) -> Result<()>
where
    F: FnOnce(&mut Outputs) -> Result<()>,
{
    let mut out = Outputs::new(dir)?;
    match f(&mut out) {
        Ok(()) => Ok(()),
        Err(e) => {
            out.discard();
            Err(e)
        }
    }
}

fn configure_threads() -> Result<()> {
    let Ok(raw) = std::env::var("TAILFIT_THREADS") else {
        return Ok(());
    };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| config(format!("TAILFIT_THREADS must be a positive integer, got '{raw}'")))?;
    // a second call in the same process keeps the first pool
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

/// Parses `args` (including the program name) and runs the command. Returns
/// the process exit code; diagnostics go to stderr.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INPUT } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    let outcome = configure_threads().and_then(|_| match cli.command {
        Command::Hist(a) => cmd_hist(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Synth(a) => cmd_synth(&a),
        Command::Graph(a) => cmd_graph(&a),
        Command::MaxentSolve(a) => cmd_maxent_solve(&a),
    });
    match outcome {
        Ok(()) => EXIT_OK,
        Err(e) => {
            eprintln!("tailfit: {e}");
            exit_code(&e)
        }
    }
}

fn open_input(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| config(format!("cannot open {}: {e}", path.display())))
}

fn report_stats(path: &Path, stats: &ManifestStats) {
    if stats.malformed > 0 {
        eprintln!("tailfit: {}: skipped {} malformed of {} lines", path.display(), stats.malformed, stats.lines);
        for (line, why) in stats.diagnostics.iter().take(5) {
            eprintln!("  line {line}: {why}");
        }
    }
}

/// Feeds every record from manifests and directory scans into `ingest`.
fn ingest_inputs(inputs: &[PathBuf], ingest: &mut Ingest) -> Result<Value> {
    let mut per_input = Vec::new();
    for path in inputs {
        if path.is_dir() {
            let mut scan = scan_filesystem(path)?;
            ingest.extend_parallel(scan.by_ref());
            for (p, why) in scan.skipped() {
                eprintln!("tailfit: skipped {}: {why}", p.display());
            }
            per_input.push(json!({ "input": path.display().to_string(), "skipped": scan.skipped().len() }));
        } else {
            let mut manifest = parse_manifest(open_input(path)?)?;
            let mut failure = None;
            let records = std::iter::from_fn(|| match manifest.try_next() {
                Ok(r) => r,
                Err(e) => {
                    failure = Some(e);
                    None
                }
            });
            ingest.extend_parallel(records);
            if let Some(e) = failure {
                return Err(e);
            }
            let stats = manifest.stats();
            report_stats(path, stats);
            per_input.push(json!({
                "input": path.display().to_string(),
                "lines": stats.lines,
                "accepted": stats.accepted,
                "malformed": stats.malformed,
            }));
        }
    }
    Ok(Value::Array(per_input))
}

fn parse_category(name: &str) -> Result<Category> {
    name.parse::<Category>().map_err(|_| {
        let known: Vec<&str> = Category::ALL.iter().map(|c| c.label()).collect();
        config(format!("unknown category '{name}' (expected one of {})", known.join(", ")))
    })
}

fn cmd_hist(a: &HistArgs) -> Result<()> {
    let filter = a.category.as_deref().map(parse_category).transpose()?;
    let mut ingest = Ingest::new(true);
    let inputs = ingest_inputs(&a.input, &mut ingest)?;
    with_outputs(&a.common.out, |out| {
        for (cat, hist) in ingest.histograms() {
            if filter.is_some_and(|f| f != *cat) || hist.is_empty() {
                continue;
            }
            let mut w = out.create(&format!("hist_{}.csv", cat.label()))?;
            hist.write_csv(&mut w)?;
            w.flush()?;
        }
        let summaries: Vec<_> = ingest
            .summaries()
            .into_iter()
            .filter(|s| filter.is_none_or(|f| f == s.category))
            .collect();
        let mut table = String::from("category\tfiles\tshare\tfiles/host\tmean_kb\tmedian_kb\n");
        for s in &summaries {
            table.push_str(&format!(
                "{}\t{}\t{:.4}\t{:.2}\t{:.1}\t{:.1}\n",
                s.category, s.file_count, s.share, s.files_per_host, s.mean_kb, s.median_kb
            ));
        }
        print!("{table}");
        out.write_json(
            "summary.json",
            &json!({
                "records": ingest.accepted(),
                "hosts": ingest.host_count(),
                "inputs": inputs,
                "categories": summaries,
            }),
        )
    })
}

fn looks_like_histogram_csv(path: &Path) -> Result<bool> {
    let mut head = [0u8; 7];
    let mut f = open_input(path)?;
    let n = f.read(&mut head)?;
    Ok(&head[..n] == b"k,count")
}

/// Histograms to fit, keyed by a label: the category, or the file stem for
/// standalone histogram CSVs.
fn load_fit_inputs(a: &FitArgs) -> Result<BTreeMap<String, SizeHistogram>> {
    let mut hists: BTreeMap<String, SizeHistogram> = BTreeMap::new();
    let mut records = Vec::new();
    for path in &a.input {
        if path.is_file() && looks_like_histogram_csv(path)? {
            let h = SizeHistogram::read_csv(BufReader::new(open_input(path)?))?;
            let label = path
                .file_stem()
                .map(|s| s.to_string_lossy().trim_start_matches("hist_").to_string())
                .unwrap_or_else(|| "histogram".into());
            hists.entry(label).or_default().merge(&h);
        } else {
            records.push(path.clone());
        }
    }
    if !records.is_empty() {
        let mut ingest = Ingest::new(false);
        ingest_inputs(&records, &mut ingest)?;
        for (cat, h) in ingest.into_histograms() {
            hists.entry(cat.label().to_string()).or_default().merge(&h);
        }
    }
    Ok(hists)
}

fn cmd_fit(a: &FitArgs) -> Result<()> {
    let grid = a.grid.grid()?;
    if a.cap_gb == 0 {
        return Err(config("--cap-gb must be > 0"));
    }
    let cap = a.cap_gb.saturating_mul(1 << 30);
    let families = a.family.families();
    let mut hists = load_fit_inputs(a)?;
    hists.retain(|_, h| !h.is_empty());
    if let Some(want) = &a.category {
        let available: Vec<String> = hists.keys().cloned().collect();
        hists.retain(|label, _| label == want);
        if hists.is_empty() {
            return Err(Error::NoFit(vec![(
                0,
                format!(
                    "category '{want}' matches no input (available: {})",
                    if available.is_empty() { "none".to_string() } else { available.join(", ") }
                ),
            )]));
        }
    }
    if hists.is_empty() {
        return Err(Error::NoFit(vec![(0, "no records to fit".into())]));
    }

    with_outputs(&a.common.out, |out| {
        let mut combined = serde_json::Map::new();
        let mut failed = Vec::new();
        for (label, raw) in &hists {
            let hist = fitting::truncate(raw, cap)?;
            let report = Fitter::new(&hist).compare(&families, &grid)?;
            for line in report.failures() {
                eprintln!("tailfit: {label}: {line}");
            }
            let mut entry = report.to_json();
            entry["total"] = json!(hist.total());
            combined.insert(label.clone(), entry.clone());
            out.write_json(&format!("fit_{label}.json"), &entry)?;

            let mut w = out.create(&format!("ccdf_{label}_empirical.csv"))?;
            write_ccdf_csv(&mut w, &empirical_ccdf(&hist))?;
            w.flush()?;
            let k_max = hist.k_max_observed().unwrap_or(BinIndex::ONE);
            for outcome in &report.outcomes {
                if let Ok(fit) = &outcome.result {
                    let mut w = out.create(&format!("ccdf_{label}_{}.csv", outcome.family.label()))?;
                    write_ccdf_csv(&mut w, &model_ccdf_curve(fit, k_max, 200)?)?;
                    w.flush()?;
                }
            }
            match report.selected_family {
                Some(f) => println!(
                    "{label}: {f} (rss ratio {})",
                    report.rss_ratio.map_or("n/a".to_string(), |r| format!("{r:.4}"))
                ),
                None => failed.push((0, format!("{label}: {}", report.failures().join("; ")))),
            }
        }
        if !failed.is_empty() {
            return Err(Error::NoFit(failed));
        }
        out.write_json("report.json", &Value::Object(combined))
    })
}

fn synth_model(a: &SynthArgs) -> Result<MaxEntModel> {
    let k_min = BinIndex::new(a.kmin).map_err(|_| config("--kmin must be >= 1"))?;
    let k_max = a.kmax.map(BinIndex::new).transpose().map_err(|_| config("--kmax must be >= 1"))?;
    let need = |v: Option<f64>, flag: &str| v.ok_or_else(|| config(format!("--{flag} is required for this family")));
    let (ls, l1, l2) = match a.family {
        None => (a.lambda_s, a.lambda_1, a.lambda_2),
        Some(FamilyChoice::Powerlaw) => (0.0, need(a.alpha, "alpha")?, 0.0),
        Some(FamilyChoice::Exponential) => (need(a.lambda, "lambda")?, 0.0, 0.0),
        Some(FamilyChoice::Lognormal) => {
            let (mu, sigma) = (need(a.mu, "mu")?, need(a.sigma, "sigma")?);
            if !(sigma > 0.0 && sigma.is_finite()) {
                return Err(config(format!("sigma must be > 0, got {sigma}")));
            }
            let var = sigma * sigma;
            (0.0, 1.0 - mu / var, 1.0 / (2.0 * var))
        }
        Some(FamilyChoice::All) => return Err(config("synth needs a single family")),
    };
    MaxEntModel::new(ls, l1, l2, k_min, k_max)
}

fn cmd_synth(a: &SynthArgs) -> Result<()> {
    let category = parse_category(&a.category)?;
    let model = synth_model(a)?;
    with_outputs(&a.common.out, |out| {
        let mut w = out.create(&a.name)?;
        for record in maxent::synthesize_corpus(&model, a.count, a.common.seed, category) {
            writeln!(w, "{}", record.to_manifest_line())?;
        }
        w.flush()?;
        Ok(())
    })
}

fn cmd_graph(a: &GraphArgs) -> Result<()> {
    let grid = a.grid.grid()?;
    let mut degrees = DegreeHistogram::default();
    let mut joint = JointHistogram::new(a.log_base)?;
    for path in &a.input {
        let mut hosts = graphstats::parse_host_manifest(open_input(path)?)?;
        while let Some(h) = hosts.try_next()? {
            degrees.add(h.in_degree);
            joint.add(&h);
        }
        report_stats(path, hosts.stats());
    }
    with_outputs(&a.common.out, |out| {
        let mut w = out.create("indegree.csv")?;
        degrees.degrees.write_csv(&mut w)?;
        w.flush()?;
        let mut w = out.create("joint.csv")?;
        joint.write_csv(&mut w)?;
        w.flush()?;
        let slope = graphstats::fit_indegree_slope_on(&degrees.degrees, &grid)?;
        let mut fit = fitting::fit_to_json(&slope.fit);
        fit["slope"] = json!(slope.slope);
        println!("in-degree slope {:.4} (k_min = {})", slope.slope, slope.fit.k_min);
        out.write_json(
            "graph.json",
            &json!({
                "hosts": joint.total(),
                "zero_in_degree": degrees.zero_degree,
                "log_base": joint.base(),
                "rank_correlation": joint.rank_correlation(),
                "fit": fit,
            }),
        )
    })
}

fn cmd_maxent_solve(a: &SolveArgs) -> Result<()> {
    let k_min = BinIndex::new(a.kmin).map_err(|_| config("--kmin must be >= 1"))?;
    let k_max = BinIndex::new(a.kmax).map_err(|_| config("--kmax must be >= 1"))?;
    let targets = MomentTargets { e_s: a.e_s, e_log: a.e_log, e_log2: a.e_log2 };
    let model = maxent::solve_lagrange(&targets, k_min, k_max)?;
    let stationarity = maxent::verify_stationarity(&model, a.trials, a.common.seed)?;
    let residuals: serde_json::Map<String, Value> = model
        .moment_residuals(&targets)?
        .into_iter()
        .map(|(m, r)| (format!("{m:?}").to_lowercase(), json!(r)))
        .collect();
    let [ls, l1, l2] = model.multipliers();
    println!("lambda_s = {ls:e}, lambda_1 = {l1:e}, lambda_2 = {l2:e}");
    with_outputs(&a.common.out, |out| {
        out.write_json(
            "maxent.json",
            &json!({
                "k_min": k_min.get(),
                "k_max": k_max.get(),
                "targets": targets,
                "multipliers": { "lambda_s": ls, "lambda_1": l1, "lambda_2": l2 },
                "moments": model.moments()?,
                "residuals": residuals,
                "entropy": model.entropy()?,
                "stationarity": stationarity,
            }),
        )
    })
}
