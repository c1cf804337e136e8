//! Trial records, aggregate statistics, and deterministic renderers.
//!
//! Output must be byte-identical across runs and thread counts, so every
//! aggregate is computed from sorted per-trial values, floats are printed
//! through Rust's shortest-roundtrip `Display`, and JSON objects serialize
//! with sorted keys.

use crate::error::Result;
use serde::Serialize;

/// Analyzer results attached to one trial. A field is `None` when the
/// corresponding analyzer was not requested.
#[derive(Clone, Debug, Default, Serialize)]
pub struct TrialEvents {
    /// Fraction of internal nodes flagged bad.
    pub bad_node_fraction: Option<f64>,
    /// Whether a full bad-subtree witness was found.
    pub bad_subtree_found: Option<bool>,
    /// Whether the root's in-degree reached its height.
    pub root_fully_loaded: Option<bool>,
    /// Per-label badness of the first root edge of that label.
    pub bad_permutation_by_label: Option<Vec<bool>>,
}

/// Outcome of a single trial.
#[derive(Clone, Debug, Serialize)]
pub struct TrialReport {
    /// Trial index within the run.
    pub trial: u64,
    /// Derived seed of the trial's arrival-order stream; identifies the
    /// trial for replay.
    pub seed: u64,
    /// Maximum machine load produced by the algorithm.
    pub makespan: f64,
    /// Reference optimum (or its lower bound) used for the ratio.
    pub opt: f64,
    /// `makespan / opt`; 1 when both are zero.
    pub ratio: f64,
    /// Final per-machine loads. Kept in memory for analysis but omitted
    /// from rendered output, which would otherwise balloon on large trees.
    #[serde(skip)]
    pub loads: Vec<f64>,
    /// Analyzer results.
    pub events: TrialEvents,
}

/// Summary statistics over all trials of a run.
#[derive(Clone, Debug, Serialize)]
pub struct Aggregate {
    pub trials: u64,
    pub mean_makespan: f64,
    /// Population standard deviation of the makespan.
    pub std_makespan: f64,
    pub min_makespan: f64,
    pub max_makespan: f64,
    /// Nearest-rank percentiles of the makespan.
    pub p50_makespan: f64,
    pub p90_makespan: f64,
    pub p99_makespan: f64,
    pub mean_ratio: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mean_bad_node_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub min_bad_node_fraction: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_bad_subtree: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_root_fully_loaded: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub freq_bad_permutation_by_label: Option<Vec<f64>>,
}

/// A full run: per-trial reports in trial order plus their aggregate.
#[derive(Clone, Debug, Serialize)]
pub struct RunOutcome {
    pub reports: Vec<TrialReport>,
    pub aggregate: Aggregate,
}

/// Nearest-rank percentile of an ascending list.
fn percentile(sorted: &[f64], q: f64) -> f64 {
    if sorted.is_empty() {
        return 0.0;
    }
    let rank = (q * sorted.len() as f64).ceil() as usize;
    sorted[rank.clamp(1, sorted.len()) - 1]
}

fn sorted_values<F: Fn(&TrialReport) -> f64>(reports: &[TrialReport], f: F) -> Vec<f64> {
    let mut values: Vec<f64> = reports.iter().map(f).collect();
    values.sort_by(|a, b| a.partial_cmp(b).expect("report values are finite"));
    values
}

fn mean(sorted: &[f64]) -> f64 {
    if sorted.is_empty() {
        0.0
    } else {
        sorted.iter().sum::<f64>() / sorted.len() as f64
    }
}

/// Frequency of `true` among trials that carry the flag.
fn frequency<F: Fn(&TrialEvents) -> Option<bool>>(reports: &[TrialReport], f: F) -> Option<f64> {
    let flags: Vec<bool> = reports.iter().filter_map(|r| f(&r.events)).collect();
    if flags.is_empty() {
        None
    } else {
        Some(flags.iter().filter(|&&b| b).count() as f64 / flags.len() as f64)
    }
}

/// Computes summary statistics from per-trial reports.
pub fn aggregate(reports: &[TrialReport]) -> Aggregate {
    let makespans = sorted_values(reports, |r| r.makespan);
    let ratios = sorted_values(reports, |r| r.ratio);
    let mean_makespan = mean(&makespans);
    let variance = mean(
        &makespans.iter().map(|x| (x - mean_makespan) * (x - mean_makespan)).collect::<Vec<_>>(),
    );

    let fractions: Vec<f64> =
        reports.iter().filter_map(|r| r.events.bad_node_fraction).collect();
    let (mean_fraction, min_fraction) = if fractions.is_empty() {
        (None, None)
    } else {
        let mut sorted = fractions.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("fractions are finite"));
        (Some(mean(&sorted)), Some(sorted[0]))
    };

    let by_label: Vec<&Vec<bool>> =
        reports.iter().filter_map(|r| r.events.bad_permutation_by_label.as_ref()).collect();
    let freq_by_label = by_label.first().map(|first| {
        let mut sums = vec![0u64; first.len()];
        for flags in &by_label {
            for (d, &flag) in flags.iter().enumerate() {
                sums[d] += u64::from(flag);
            }
        }
        sums.iter().map(|&s| s as f64 / by_label.len() as f64).collect()
    });

    Aggregate {
        trials: reports.len() as u64,
        mean_makespan,
        std_makespan: variance.sqrt(),
        min_makespan: makespans.first().copied().unwrap_or(0.0),
        max_makespan: makespans.last().copied().unwrap_or(0.0),
        p50_makespan: percentile(&makespans, 0.50),
        p90_makespan: percentile(&makespans, 0.90),
        p99_makespan: percentile(&makespans, 0.99),
        mean_ratio: mean(&ratios),
        mean_bad_node_fraction: mean_fraction,
        min_bad_node_fraction: min_fraction,
        freq_bad_subtree: frequency(reports, |e| e.bad_subtree_found),
        freq_root_fully_loaded: frequency(reports, |e| e.root_fully_loaded),
        freq_bad_permutation_by_label: freq_by_label,
    }
}

fn fmt(value: f64) -> String {
    format!("{value}")
}

fn fmt_flag(flag: bool) -> &'static str {
    if flag {
        "1"
    } else {
        "0"
    }
}

/// Renders a run as CSV with commented header and trailing aggregate row.
///
/// `config` is the resolved run configuration as JSON (with the instance
/// referenced by path and fingerprint rather than inlined). Event columns
/// appear only for analyzers that actually ran. Flags render as `1`/`0`.
pub fn render_csv(config: &serde_json::Value, master_seed: u64, outcome: &RunOutcome) -> String {
    let probe = outcome.reports.first();
    let has_fraction = probe.is_some_and(|r| r.events.bad_node_fraction.is_some());
    let has_subtree = probe.is_some_and(|r| r.events.bad_subtree_found.is_some());
    let has_loaded = probe.is_some_and(|r| r.events.root_fully_loaded.is_some());
    let labels = probe
        .and_then(|r| r.events.bad_permutation_by_label.as_ref())
        .map_or(0, Vec::len);

    let mut out = String::new();
    out.push_str("# loadbal results v1\n");
    out.push_str(&format!("# config: {config}\n"));
    out.push_str(&format!("# master_seed: {master_seed}\n"));

    out.push_str("trial,seed,makespan,opt,ratio");
    if has_fraction {
        out.push_str(",bad_node_fraction");
    }
    if has_subtree {
        out.push_str(",bad_subtree");
    }
    if has_loaded {
        out.push_str(",root_fully_loaded");
    }
    for d in 0..labels {
        out.push_str(&format!(",bad_perm_label_{d}"));
    }
    out.push('\n');

    for r in &outcome.reports {
        out.push_str(&format!(
            "{},{},{},{},{}",
            r.trial,
            r.seed,
            fmt(r.makespan),
            fmt(r.opt),
            fmt(r.ratio)
        ));
        if let Some(fraction) = r.events.bad_node_fraction {
            out.push_str(&format!(",{}", fmt(fraction)));
        }
        if let Some(found) = r.events.bad_subtree_found {
            out.push_str(&format!(",{}", fmt_flag(found)));
        }
        if let Some(loaded) = r.events.root_fully_loaded {
            out.push_str(&format!(",{}", fmt_flag(loaded)));
        }
        if let Some(flags) = &r.events.bad_permutation_by_label {
            for &flag in flags {
                out.push_str(&format!(",{}", fmt_flag(flag)));
            }
        }
        out.push('\n');
    }

    let a = &outcome.aggregate;
    out.push_str(&format!(
        "#agg,trials={},mean_makespan={},std_makespan={},min_makespan={},max_makespan={},\
         p50_makespan={},p90_makespan={},p99_makespan={},mean_ratio={}",
        a.trials,
        fmt(a.mean_makespan),
        fmt(a.std_makespan),
        fmt(a.min_makespan),
        fmt(a.max_makespan),
        fmt(a.p50_makespan),
        fmt(a.p90_makespan),
        fmt(a.p99_makespan),
        fmt(a.mean_ratio)
    ));
    if let Some(v) = a.mean_bad_node_fraction {
        out.push_str(&format!(",mean_bad_node_fraction={}", fmt(v)));
    }
    if let Some(v) = a.min_bad_node_fraction {
        out.push_str(&format!(",min_bad_node_fraction={}", fmt(v)));
    }
    if let Some(v) = a.freq_bad_subtree {
        out.push_str(&format!(",freq_bad_subtree={}", fmt(v)));
    }
    if let Some(v) = a.freq_root_fully_loaded {
        out.push_str(&format!(",freq_root_fully_loaded={}", fmt(v)));
    }
    if let Some(freqs) = &a.freq_bad_permutation_by_label {
        for (d, &v) in freqs.iter().enumerate() {
            out.push_str(&format!(",freq_bad_perm_label_{d}={}", fmt(v)));
        }
    }
    out.push('\n');
    out
}

/// Renders a run as a single JSON document with sorted keys.
pub fn render_json(config: &serde_json::Value, master_seed: u64, outcome: &RunOutcome) -> Result<String> {
    let value = serde_json::json!({
        "format": "loadbal-results-v1",
        "master_seed": master_seed,
        "config": config,
        "trials": outcome.reports,
        "aggregate": outcome.aggregate,
    });
    Ok(serde_json::to_string_pretty(&value)? + "\n")
}
