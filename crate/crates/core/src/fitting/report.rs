use std::io::Write;

use serde_json::{json, Map, Value};

use super::FitResult;
use crate::distributions::{BinIndex, Family};
use crate::error::Result;
use crate::histogram::SizeHistogram;

/// Outcome of scanning one family: the best fit, or why none was possible.
#[derive(Debug, Clone, PartialEq)]
pub struct FamilyOutcome {
    pub family: Family,
    pub result: std::result::Result<FitResult, String>,
}

/// Per-family best fits ranked by rss.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonReport {
    pub outcomes: Vec<FamilyOutcome>,
    /// Family with the smallest rss; `None` if every family failed.
    pub selected_family: Option<Family>,
    /// Smallest rss over the second smallest (≤ 1); `None` with fewer than two fits.
    pub rss_ratio: Option<f64>,
}

impl ComparisonReport {
    pub(crate) fn new(outcomes: Vec<FamilyOutcome>) -> Self {
        let mut ranked: Vec<(Family, f64)> = outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().ok().map(|f| (o.family, f.rss)))
            .collect();
        // stable: equal rss keeps the listed family order
        ranked.sort_by(|a, b| a.1.total_cmp(&b.1));
        let selected_family = ranked.first().map(|r| r.0);
        let rss_ratio = match ranked.as_slice() {
            [(_, best), (_, second), ..] => Some(if *second > 0.0 { best / second } else { 1.0 }),
            _ => None,
        };
        Self { outcomes, selected_family, rss_ratio }
    }

    pub fn get(&self, family: Family) -> Option<&FitResult> {
        self.outcomes.iter().find(|o| o.family == family).and_then(|o| o.result.as_ref().ok())
    }

    pub fn selected(&self) -> Option<&FitResult> {
        self.selected_family.and_then(|f| self.get(f))
    }

    /// One line per failed family.
    pub fn failures(&self) -> Vec<String> {
        self.outcomes
            .iter()
            .filter_map(|o| o.result.as_ref().err().map(|e| format!("{}: {e}", o.family)))
            .collect()
    }

    pub fn to_json(&self) -> Value {
        let families: Map<String, Value> = self
            .outcomes
            .iter()
            .map(|o| {
                let entry = match &o.result {
                    Ok(fit) => fit_to_json(fit),
                    Err(e) => json!({ "error": e }),
                };
                (o.family.label().to_string(), entry)
            })
            .collect();
        json!({
            "families": families,
            "selected_family": self.selected_family.map(Family::label),
            "rss_ratio": self.rss_ratio,
        })
    }
}

/// Parameters and goodness of fit as a JSON object.
pub fn fit_to_json(fit: &FitResult) -> Value {
    let mut m = Map::new();
    for (name, v) in fit.model.parameters() {
        m.insert(name.to_string(), json!(v));
    }
    m.insert("k_min".into(), json!(fit.k_min.get()));
    m.insert("rss".into(), json!(fit.rss));
    m.insert("tail_fraction".into(), json!(fit.tail_fraction));
    m.insert("tail_count".into(), json!(fit.tail_count));
    m.insert("log_likelihood".into(), json!(fit.log_likelihood));
    m.insert("at_boundary".into(), json!(fit.at_boundary));
    Value::Object(m)
}

/// `Pr(K ≥ k)` over the whole histogram at each occupied bin.
pub fn empirical_ccdf(hist: &SizeHistogram) -> Vec<(u64, f64)> {
    let total = hist.total() as f64;
    let mut above = 0u64;
    let mut rows: Vec<(u64, f64)> = hist
        .bins()
        .rev()
        .map(|(k, n)| {
            above += n;
            (k, above as f64 / total)
        })
        .collect();
    rows.reverse();
    rows
}

/// Model CCDF on about `points` log-spaced bins from the fit's `k_min` to
/// `k_max`, scaled by the tail fraction so it overlays [`empirical_ccdf`].
pub fn model_ccdf_curve(fit: &FitResult, k_max: BinIndex, points: usize) -> Result<Vec<(u64, f64)>> {
    let hi = k_max.max(fit.k_min);
    super::log_grid(fit.k_min, hi, points.max(2))?
        .into_iter()
        .map(|k| Ok((k.get(), fit.tail_fraction * fit.model.ccdf(k)?)))
        .collect()
}

/// Two-column CSV `k,ccdf`.
pub fn write_ccdf_csv<W: Write>(mut out: W, rows: &[(u64, f64)]) -> Result<()> {
    writeln!(out, "k,ccdf")?;
    for (k, p) in rows {
        writeln!(out, "{k},{p:e}")?;
    }
    Ok(())
}
