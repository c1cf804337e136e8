//! Argument parsing and the four commands: `gen`, `run`, `sweep`, `verify`.
//!
//! Every command that draws randomness takes a `--seed`; the `LOADBAL_SEED`
//! environment variable, when set, takes precedence over the flag. Outputs
//! embed the resolved configuration and master seed so a result file is
//! reproducible from its own header.

use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use loadbal::error::{Error, Result};
use loadbal::generators::{
    gen_classic_pairs_tree, gen_fat_tree, gen_full_tree, gen_planted, gen_recursive_tree,
    PlantedSpec,
};
use loadbal::graphbal::Tree;
use loadbal::sim::report::{render_csv, render_json, Aggregate};
use loadbal::sim::rng::stream_rng;
use loadbal::sim::runner::{
    run_trials, AdversaryParams, AdversarySource, Algorithm, Analyzer, InstanceSource, OrderMode,
    RunConfig,
};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::verify;

/// Load balancing experiments: generators, seeded trial runs, parameter
/// sweeps, and a self-checking acceptance suite.
#[derive(Debug, Parser)]
#[command(name = "loadbal", version, about)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Write an instance or tree file.
    #[command(subcommand)]
    Gen(GenCommand),
    /// Run seeded trials against an instance file and write CSV or JSON
    /// results.
    Run(RunArgs),
    /// Run every point of a parameter grid and write one results row per
    /// point.
    Sweep(SweepArgs),
    /// Run the acceptance suite and report each criterion.
    Verify,
}

#[derive(Debug, Subcommand)]
pub enum GenCommand {
    /// Full k^4-ary tree of depth k.
    FatTree {
        #[arg(long)]
        k: u32,
        #[arg(long)]
        out: PathBuf,
        /// Permit instances above the soft node limit.
        #[arg(long)]
        allow_large: bool,
    },
    /// Recursively labeled tree: a node labeled d has 2^(D - d') children
    /// labeled d' for every d' < d, with the exponent taken from the global
    /// root label D.
    Recursive {
        /// Root label.
        #[arg(long = "D")]
        root_label: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_large: bool,
    },
    /// Full arity^depth tree without labels.
    FullTree {
        #[arg(long)]
        arity: usize,
        #[arg(long)]
        depth: u32,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_large: bool,
    },
    /// Labeled pairing-tournament tree on m machines, m a power of two.
    ClassicPairs {
        #[arg(long)]
        m: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        allow_large: bool,
    },
    /// Random job instance with a hidden assignment of makespan at most
    /// --opt, so the true optimum is known by construction.
    Planted {
        /// Machine count.
        #[arg(long)]
        m: usize,
        /// Job count.
        #[arg(long)]
        n: usize,
        /// Upper bound on the optimum makespan.
        #[arg(long)]
        opt: f64,
        /// Finite machines per job, the hidden one included.
        #[arg(long, default_value_t = 3)]
        finite: usize,
        /// Lower bound on every job's size.
        #[arg(long, default_value_t = 0.0)]
        min_size: f64,
        /// Generation seed (LOADBAL_SEED takes precedence).
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Args)]
pub struct RunArgs {
    /// Instance file: a tree, a job instance, or an adversary spec.
    #[arg(long)]
    pub instance: PathBuf,
    #[arg(long = "algo", value_enum)]
    pub algo: CliAlgorithm,
    #[arg(long, default_value_t = 100)]
    pub trials: u64,
    /// Master seed (LOADBAL_SEED takes precedence).
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, value_enum, default_value_t = CliOrder::Permutation)]
    pub order: CliOrder,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CliFormat::Csv)]
    pub format: CliFormat,
    /// Worker threads; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Per-trial analyses, comma separated.
    #[arg(long, value_enum, value_delimiter = ',')]
    pub analyzers: Vec<CliAnalyzer>,
    /// Relabel tree nodes uniformly at random each trial.
    #[arg(long)]
    pub shuffle_labels: bool,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    /// Grid file: a config template plus one entry per point.
    #[arg(long)]
    pub grid: PathBuf,
    /// Output file; stdout when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = CliFormat::Csv)]
    pub format: CliFormat,
    /// Worker threads per point; 0 uses every core.
    #[arg(long, default_value_t = 0)]
    pub threads: usize,
    /// Permit generated instances above the soft node limit.
    #[arg(long)]
    pub allow_large: bool,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CliAlgorithm {
    Softmax,
    Greedy,
    Opt,
}

impl From<CliAlgorithm> for Algorithm {
    fn from(value: CliAlgorithm) -> Self {
        match value {
            CliAlgorithm::Softmax => Algorithm::Softmax,
            CliAlgorithm::Greedy => Algorithm::Greedy,
            CliAlgorithm::Opt => Algorithm::Opt,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CliOrder {
    Permutation,
    Times,
    BottomUp,
    Adversarial,
}

impl From<CliOrder> for OrderMode {
    fn from(value: CliOrder) -> Self {
        match value {
            CliOrder::Permutation => OrderMode::Permutation,
            CliOrder::Times => OrderMode::Times,
            CliOrder::BottomUp => OrderMode::BottomUp,
            CliOrder::Adversarial => OrderMode::Adversarial,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum CliAnalyzer {
    BadNodes,
    BadSubtree,
    BadPermutation,
    FullyLoaded,
}

impl From<CliAnalyzer> for Analyzer {
    fn from(value: CliAnalyzer) -> Self {
        match value {
            CliAnalyzer::BadNodes => Analyzer::BadNodes,
            CliAnalyzer::BadSubtree => Analyzer::BadSubtree,
            CliAnalyzer::BadPermutation => Analyzer::BadPermutation,
            CliAnalyzer::FullyLoaded => Analyzer::FullyLoaded,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum CliFormat {
    Csv,
    Json,
}

/// Runs a parsed command line and returns the process exit code.
pub fn execute(cli: Cli) -> i32 {
    match dispatch(cli) {
        Ok(code) => code,
        Err(error) => {
            eprintln!("error: {error}");
            exit_code(&error)
        }
    }
}

fn dispatch(cli: Cli) -> Result<i32> {
    match cli.command {
        Command::Gen(kind) => cmd_gen(kind)?,
        Command::Run(args) => cmd_run(&args)?,
        Command::Sweep(args) => cmd_sweep(&args)?,
        Command::Verify => return Ok(cmd_verify()),
    }
    Ok(0)
}

/// Exit codes: 1 for I/O failures, 2 for malformed configs or inputs, 3 for
/// size-limit refusals, 4 for infeasible instances.
pub fn exit_code(error: &Error) -> i32 {
    match error {
        Error::TooLarge(_) | Error::SearchSpaceTooLarge { .. } => 3,
        Error::NoFiniteLoad { .. } | Error::UnassignedJob { .. } | Error::InfiniteAssignment { .. } => 4,
        Error::Io(_) => 1,
        _ => 2,
    }
}

/// The `--seed` value, unless `LOADBAL_SEED` is set, which wins.
pub fn resolve_seed(flag_seed: u64) -> Result<u64> {
    match std::env::var("LOADBAL_SEED") {
        Ok(text) => text.trim().parse::<u64>().map_err(|_| {
            Error::InvalidInput(format!("LOADBAL_SEED must be an unsigned 64-bit integer, got {text:?}"))
        }),
        Err(std::env::VarError::NotPresent) => Ok(flag_seed),
        Err(error) => Err(Error::InvalidInput(format!("LOADBAL_SEED is not readable: {error}"))),
    }
}

/// FNV-1a 64-bit hash, used to fingerprint input files in output headers.
pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &byte in bytes {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Reads a file, naming it in the error: the raw `io::Error` carries no
/// path, which leaves sweep error rows saying only "no such file".
fn read_named(path: &Path) -> Result<Vec<u8>> {
    std::fs::read(path).map_err(|error| {
        Error::Io(std::io::Error::new(error.kind(), format!("{}: {error}", path.display())))
    })
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    let write = |path: &Path| -> std::io::Result<()> {
        let mut file = std::fs::File::create(path)?;
        file.write_all(text.as_bytes())
    };
    write(path).map_err(|error| {
        Error::Io(std::io::Error::new(error.kind(), format!("{}: {error}", path.display())))
    })
}

fn emit(out: Option<&Path>, rendered: &str, summary: &str) -> Result<()> {
    match out {
        Some(path) => {
            write_text(path, rendered)?;
            println!("{summary} -> {}", path.display());
        }
        None => {
            print!("{rendered}");
            std::io::stdout().flush()?;
            eprintln!("{summary}");
        }
    }
    Ok(())
}

fn cmd_gen(kind: GenCommand) -> Result<()> {
    match kind {
        GenCommand::FatTree { k, out, allow_large } => {
            let tree = gen_fat_tree(k, allow_large)?;
            write_tree(&tree, &out, &format!("fat tree k={k}"))
        }
        GenCommand::Recursive { root_label, out, allow_large } => {
            let tree = gen_recursive_tree(root_label, allow_large)?;
            write_tree(&tree, &out, &format!("recursive tree D={root_label}"))
        }
        GenCommand::FullTree { arity, depth, out, allow_large } => {
            let tree = gen_full_tree(arity, depth, allow_large)?;
            write_tree(&tree, &out, &format!("full {arity}-ary tree of depth {depth}"))
        }
        GenCommand::ClassicPairs { m, out, allow_large } => {
            let tree = gen_classic_pairs_tree(m, allow_large)?;
            write_tree(&tree, &out, &format!("classic pairs tree m={m}"))
        }
        GenCommand::Planted { m, n, opt, finite, min_size, seed, out } => {
            let seed = resolve_seed(seed)?;
            let spec = PlantedSpec {
                machines: m,
                jobs: n,
                opt_value: opt,
                finite_machines: finite,
                min_job_size: min_size,
            };
            let planted = gen_planted(&spec, &mut stream_rng(seed, 0, 0))?;
            let mut text = planted.instance.to_json()?;
            text.push('\n');
            write_text(&out, &text)?;
            println!(
                "wrote planted instance: {m} machines, {n} jobs, optimum <= {opt}, seed {seed} -> {}",
                out.display()
            );
            Ok(())
        }
    }
}

fn write_tree(tree: &Tree, out: &Path, what: &str) -> Result<()> {
    let mut text = tree.to_json()?;
    text.push('\n');
    write_text(out, &text)?;
    println!(
        "wrote {what}: {} nodes, {} edges -> {}",
        tree.node_count(),
        tree.edge_count(),
        out.display()
    );
    Ok(())
}

/// Loads an instance file and returns the parsed source plus the value that
/// stands in for it inside output headers: the path and a content hash, not
/// the instance body, which can run to megabytes.
fn load_instance(path: &Path) -> Result<(InstanceSource, serde_json::Value)> {
    let bytes = read_named(path)?;
    let source: InstanceSource = serde_json::from_slice(&bytes)?;
    let display = json!({
        "path": path.display().to_string(),
        "fingerprint": format!("fnv1a64:{:016x}", fnv1a64(&bytes)),
    });
    Ok((source, display))
}

fn cmd_run(args: &RunArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let (source, instance_display) = load_instance(&args.instance)?;
    let config = RunConfig {
        instance: source,
        algorithm: args.algo.into(),
        trials: args.trials,
        seed,
        order: args.order.into(),
        analyzers: args.analyzers.iter().copied().map(Into::into).collect(),
        shuffle_labels: args.shuffle_labels,
    };
    let mut display = serde_json::to_value(&config)?;
    display["instance"] = instance_display;
    let outcome = run_trials(&config, args.threads)?;
    let rendered = match args.format {
        CliFormat::Csv => render_csv(&display, seed, &outcome),
        CliFormat::Json => render_json(&display, seed, &outcome)?,
    };
    emit(args.out.as_deref(), &rendered, &aggregate_line(&outcome.aggregate))
}

/// One key=value line summarizing a run, printed after the results land.
pub fn aggregate_line(aggregate: &Aggregate) -> String {
    let mut line = format!(
        "aggregate: trials={} mean_makespan={} mean_ratio={}",
        aggregate.trials, aggregate.mean_makespan, aggregate.mean_ratio
    );
    if let Some(value) = aggregate.mean_bad_node_fraction {
        write!(line, " mean_bad_node_fraction={value}").unwrap();
    }
    if let Some(value) = aggregate.freq_bad_subtree {
        write!(line, " freq_bad_subtree={value}").unwrap();
    }
    if let Some(value) = aggregate.freq_root_fully_loaded {
        write!(line, " freq_root_fully_loaded={value}").unwrap();
    }
    if let Some(values) = &aggregate.freq_bad_permutation_by_label {
        let joined: Vec<String> = values.iter().map(f64::to_string).collect();
        write!(line, " freq_bad_permutation_by_label={}", joined.join(";")).unwrap();
    }
    line
}

/// A sweep grid: shared config fields plus one entry per point. Each point
/// names either a generator or an instance file and may override any
/// template field. Generated instances are rebuilt from their spec, so a
/// grid file alone reproduces the whole sweep.
#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepGrid {
    pub template: SweepTemplate,
    pub points: Vec<SweepPoint>,
}

#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(deny_unknown_fields)]
pub struct SweepTemplate {
    pub algorithm: Algorithm,
    pub trials: u64,
    pub seed: u64,
    pub order: OrderMode,
    #[serde(default)]
    pub analyzers: Vec<Analyzer>,
    #[serde(default)]
    pub shuffle_labels: bool,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepPoint {
    pub label: String,
    #[serde(default)]
    pub generate: Option<GenerateSpec>,
    /// Path to an instance file, resolved against the working directory.
    #[serde(default)]
    pub instance: Option<PathBuf>,
    #[serde(default)]
    pub overrides: Option<SweepOverrides>,
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepOverrides {
    pub algorithm: Option<Algorithm>,
    pub trials: Option<u64>,
    pub seed: Option<u64>,
    pub order: Option<OrderMode>,
    pub analyzers: Option<Vec<Analyzer>>,
    pub shuffle_labels: Option<bool>,
}

/// Instance builders a sweep point can ask for, mirroring `gen`.
#[derive(Clone, Debug, Deserialize, Serialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum GenerateSpec {
    FatTree {
        k: u32,
    },
    Recursive {
        #[serde(rename = "D")]
        root_label: u32,
    },
    FullTree {
        arity: usize,
        depth: u32,
    },
    ClassicPairs {
        m: usize,
    },
    Planted {
        m: usize,
        n: usize,
        opt: f64,
        #[serde(default = "default_finite")]
        finite: usize,
        #[serde(default)]
        min_size: f64,
        #[serde(default)]
        seed: u64,
    },
    Adversary {
        machines: usize,
    },
}

fn default_finite() -> usize {
    3
}

impl GenerateSpec {
    fn build(&self, allow_large: bool) -> Result<InstanceSource> {
        match *self {
            GenerateSpec::FatTree { k } => Ok(InstanceSource::Tree(gen_fat_tree(k, allow_large)?)),
            GenerateSpec::Recursive { root_label } => {
                Ok(InstanceSource::Tree(gen_recursive_tree(root_label, allow_large)?))
            }
            GenerateSpec::FullTree { arity, depth } => {
                Ok(InstanceSource::Tree(gen_full_tree(arity, depth, allow_large)?))
            }
            GenerateSpec::ClassicPairs { m } => {
                Ok(InstanceSource::Tree(gen_classic_pairs_tree(m, allow_large)?))
            }
            GenerateSpec::Planted { m, n, opt, finite, min_size, seed } => {
                let spec = PlantedSpec {
                    machines: m,
                    jobs: n,
                    opt_value: opt,
                    finite_machines: finite,
                    min_job_size: min_size,
                };
                let planted = gen_planted(&spec, &mut stream_rng(seed, 0, 0))?;
                Ok(InstanceSource::Unrelated(planted.instance))
            }
            GenerateSpec::Adversary { machines } => Ok(InstanceSource::Adversary(AdversarySource {
                adversary: AdversaryParams { machines },
            })),
        }
    }
}

/// One finished sweep point: the config it resolved to and its aggregate,
/// or the error that stopped it. Errors stay in the row so the rest of the
/// sweep still runs.
pub struct SweepRow {
    pub label: String,
    pub config: Option<serde_json::Value>,
    pub aggregate: Option<Aggregate>,
    pub error: Option<String>,
}

/// Builds a point's run config from the template plus its overrides, along
/// with the display form embedded in output: the full resolved config with
/// the instance replaced by its generator spec or file fingerprint.
fn resolve_point(
    point: &SweepPoint,
    template: &SweepTemplate,
    allow_large: bool,
) -> Result<(RunConfig, serde_json::Value)> {
    let (source, instance_display) = match (&point.generate, &point.instance) {
        (Some(spec), None) => (spec.build(allow_large)?, serde_json::to_value(spec)?),
        (None, Some(path)) => load_instance(path)?,
        (Some(_), Some(_)) => {
            return Err(Error::InvalidInput(format!(
                "point {:?} names both a generator and an instance file",
                point.label
            )))
        }
        (None, None) => {
            return Err(Error::InvalidInput(format!(
                "point {:?} names neither a generator nor an instance file",
                point.label
            )))
        }
    };
    let overrides = point.overrides.as_ref();
    let config = RunConfig {
        instance: source,
        algorithm: overrides.and_then(|o| o.algorithm).unwrap_or(template.algorithm),
        trials: overrides.and_then(|o| o.trials).unwrap_or(template.trials),
        seed: overrides.and_then(|o| o.seed).unwrap_or(template.seed),
        order: overrides.and_then(|o| o.order).unwrap_or(template.order),
        analyzers: overrides
            .and_then(|o| o.analyzers.clone())
            .unwrap_or_else(|| template.analyzers.clone()),
        shuffle_labels: overrides.and_then(|o| o.shuffle_labels).unwrap_or(template.shuffle_labels),
    };
    let mut display = serde_json::to_value(&config)?;
    display["instance"] = instance_display;
    Ok((config, display))
}

fn cmd_sweep(args: &SweepArgs) -> Result<()> {
    let bytes = read_named(&args.grid)?;
    let grid: SweepGrid = serde_json::from_slice(&bytes)?;
    let fingerprint = format!("fnv1a64:{:016x}", fnv1a64(&bytes));
    let mut rows = Vec::with_capacity(grid.points.len());
    let mut failures = 0usize;
    for point in &grid.points {
        let outcome = resolve_point(point, &grid.template, args.allow_large).and_then(
            |(config, display)| Ok((display, run_trials(&config, args.threads)?.aggregate)),
        );
        match outcome {
            Ok((config, aggregate)) => rows.push(SweepRow {
                label: point.label.clone(),
                config: Some(config),
                aggregate: Some(aggregate),
                error: None,
            }),
            Err(error) => {
                failures += 1;
                rows.push(SweepRow {
                    label: point.label.clone(),
                    config: None,
                    aggregate: None,
                    error: Some(error.to_string()),
                });
            }
        }
    }
    let rendered = match args.format {
        CliFormat::Csv => render_sweep_csv(&args.grid, &fingerprint, &grid.template, &rows)?,
        CliFormat::Json => render_sweep_json(&args.grid, &fingerprint, &grid.template, &rows)?,
    };
    let summary = format!("sweep: {} points, {} failed", rows.len(), failures);
    emit(args.out.as_deref(), &rendered, &summary)
}

/// Quotes a CSV field when it holds a separator, quote, or line break.
fn csv_field(text: &str) -> String {
    if text.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", text.replace('"', "\"\""))
    } else {
        text.to_string()
    }
}

fn opt_cell(value: Option<f64>) -> String {
    value.map(|v| v.to_string()).unwrap_or_default()
}

const SWEEP_COLUMNS: &str = "label,trials,mean_makespan,std_makespan,min_makespan,max_makespan,\
p50_makespan,p90_makespan,p99_makespan,mean_ratio,mean_bad_node_fraction,min_bad_node_fraction,\
freq_bad_subtree,freq_root_fully_loaded,freq_bad_permutation_by_label,error";

fn render_sweep_csv(
    grid_path: &Path,
    fingerprint: &str,
    template: &SweepTemplate,
    rows: &[SweepRow],
) -> Result<String> {
    let mut out = String::new();
    writeln!(out, "# loadbal sweep v1").unwrap();
    writeln!(out, "# grid: {} {}", grid_path.display(), fingerprint).unwrap();
    writeln!(out, "# template: {}", serde_json::to_string(template)?).unwrap();
    for row in rows {
        if let Some(config) = &row.config {
            writeln!(out, "# point {}: {}", csv_field(&row.label), serde_json::to_string(config)?)
                .unwrap();
        }
    }
    writeln!(out, "{SWEEP_COLUMNS}").unwrap();
    for row in rows {
        match (&row.aggregate, &row.error) {
            (Some(agg), None) => {
                let labels = agg
                    .freq_bad_permutation_by_label
                    .as_ref()
                    .map(|values| {
                        values.iter().map(f64::to_string).collect::<Vec<_>>().join(";")
                    })
                    .unwrap_or_default();
                writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},",
                    csv_field(&row.label),
                    agg.trials,
                    agg.mean_makespan,
                    agg.std_makespan,
                    agg.min_makespan,
                    agg.max_makespan,
                    agg.p50_makespan,
                    agg.p90_makespan,
                    agg.p99_makespan,
                    agg.mean_ratio,
                    opt_cell(agg.mean_bad_node_fraction),
                    opt_cell(agg.min_bad_node_fraction),
                    opt_cell(agg.freq_bad_subtree),
                    opt_cell(agg.freq_root_fully_loaded),
                    labels,
                )
                .unwrap();
            }
            (_, Some(error)) => {
                writeln!(
                    out,
                    "{},,,,,,,,,,,,,,,{}",
                    csv_field(&row.label),
                    csv_field(error)
                )
                .unwrap();
            }
            (None, None) => unreachable!("sweep rows carry an aggregate or an error"),
        }
    }
    Ok(out)
}

fn render_sweep_json(
    grid_path: &Path,
    fingerprint: &str,
    template: &SweepTemplate,
    rows: &[SweepRow],
) -> Result<String> {
    let points: Vec<serde_json::Value> = rows
        .iter()
        .map(|row| match (&row.aggregate, &row.error) {
            (Some(agg), None) => {
                Ok(json!({"label": row.label, "config": row.config, "aggregate": agg}))
            }
            (_, Some(error)) => Ok(json!({"label": row.label, "error": error})),
            (None, None) => unreachable!("sweep rows carry an aggregate or an error"),
        })
        .collect::<Result<_>>()?;
    let document = json!({
        "format": "loadbal-sweep-v1",
        "grid": {
            "path": grid_path.display().to_string(),
            "fingerprint": fingerprint,
        },
        "template": serde_json::to_value(template)?,
        "points": points,
    });
    let mut text = serde_json::to_string_pretty(&document)?;
    text.push('\n');
    Ok(text)
}

fn cmd_verify() -> i32 {
    let reports = verify::run_all();
    let passed = reports.iter().filter(|report| report.pass).count();
    for report in &reports {
        let status = if report.pass { "PASS" } else { "FAIL" };
        println!("criterion {:2} {status} {}: {}", report.index, report.name, report.detail);
        eprintln!("criterion {:2} finished in {:.2}s", report.index, report.seconds);
    }
    println!("verify: {passed}/{} criteria passed", reports.len());
    if passed == reports.len() {
        0
    } else {
        1
    }
}
