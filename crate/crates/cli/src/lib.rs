// Licensed under the Apache License, Version 2.0 (the "License"); you may
// not use this file except in compliance with the License. You may obtain
// a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS, WITHOUT
// WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied. See the
// License for the specific language governing permissions and limitations
// under the License.

//! Command-line front end: `featurize`, `train`, `synth` and `oracle`.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use sha2::{Digest, Sha256};

use nct_efa::encode::{EncodingMode, EncodingSpec, HistogramScope, DEFAULT_BINS};
use nct_efa::features::{featurize, FeatureFile};
use nct_efa::gnn::{train_and_evaluate, CvReport, ModelKind, TrainConfig};
use nct_efa::graph::{join_targets_csv, parse_edge_list_json, to_edge_list_json, to_targets_csv, GraphDataset};
use nct_efa::json;
use nct_efa::oracle::{run_oracle_suite, Fault, Implementations, OracleOptions, OracleReport};
use nct_efa::par::{resolve_threads, with_threads, Schedule};
use nct_efa::synth::{regular_pair_dataset, RegularPairConfig};
use nct_efa::{Error, ErrorKind};

pub const EXIT_USAGE: i32 = 1;
pub const EXIT_DATA: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;

#[derive(Debug, Parser)]
#[command(name = "nct-efa", version, about = "Network-control-theory node features for graph classification")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compute node features for every graph of an edge-list file.
    Featurize(FeaturizeArgs),
    /// Cross-validate a reference GNN on precomputed features.
    Train(TrainArgs),
    /// Write the synthetic regular-pair dataset.
    Synth(SynthArgs),
    /// Run the brute-force self-checks.
    Oracle(OracleArgs),
}

#[derive(Debug, Args)]
pub struct FeaturizeArgs {
    /// Edge-list JSON: {"<id>": [[u, v], ...], ...}.
    #[arg(long)]
    pub graphs: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "nct-efa-raw")]
    pub encoding: EncodingMode,
    #[arg(long, default_value_t = DEFAULT_BINS)]
    pub bins: usize,
    /// Z-score raw features over the dataset.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub standardize: bool,
    /// Degree one-hot width is cap + 1; defaults to the dataset maximum.
    #[arg(long)]
    pub degree_cap: Option<usize>,
    #[arg(long)]
    pub clamp_degree: bool,
    /// One histogram over all nodes of the dataset instead of one per graph.
    #[arg(long)]
    pub dataset_histogram: bool,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[arg(long)]
    pub graphs: PathBuf,
    /// CSV with `id` and `target` columns.
    #[arg(long)]
    pub targets: PathBuf,
    /// Feature file written by `featurize`.
    #[arg(long)]
    pub features: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value = "gcn")]
    pub model: ModelKind,
    #[arg(long, default_value_t = 10)]
    pub folds: usize,
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 5e-2)]
    pub weight_decay: f64,
    #[arg(long, default_value_t = 32)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, default_value_t = 30)]
    pub k_sort: usize,
    #[arg(long)]
    pub threads: Option<usize>,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Output edge-list JSON.
    #[arg(long)]
    pub graphs: PathBuf,
    /// Output target CSV.
    #[arg(long)]
    pub targets: PathBuf,
    #[arg(long, default_value_t = 200)]
    pub count: usize,
    #[arg(long, default_value_t = 12)]
    pub min_nodes: usize,
    #[arg(long, default_value_t = 24)]
    pub max_nodes: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct OracleArgs {
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Largest graph size covered by exhaustive enumeration.
    #[arg(long, default_value_t = 7)]
    pub max_nodes: usize,
    /// Optional JSON copy of the report.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, hide = true)]
    pub inject_fault: Option<Fault>,
}

/// Failure with the process exit code it maps to.
#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidConfig(_) | Error::ZeroBins => EXIT_USAGE,
            ref other => match other.kind() {
                ErrorKind::Data => EXIT_DATA,
                ErrorKind::Numerical => EXIT_NUMERICAL,
            },
        };
        CliError { code, message: e.to_string() }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

/// Provenance block embedded in every artifact. Only content that changes
/// the output goes in: no paths, thread counts or timestamps.
#[derive(Debug, Clone, Serialize, PartialEq)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    /// Input role to `sha256:<hex>` of the file bytes.
    pub inputs: BTreeMap<String, String>,
    pub conventions: BTreeMap<String, String>,
    pub deviations: Vec<String>,
    pub tool_version: String,
}

impl RunManifest {
    fn new(command: &str, config: &impl Serialize) -> CliResult<Self> {
        Ok(RunManifest {
            command: command.to_owned(),
            config: serde_json::to_value(config).map_err(Error::from)?,
            inputs: BTreeMap::new(),
            conventions: BTreeMap::new(),
            deviations: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
        })
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    format!("sha256:{:x}", Sha256::digest(bytes))
}

fn read(path: &Path) -> CliResult<Vec<u8>> {
    std::fs::read(path).map_err(|e| Error::io(path, e).into())
}

fn write(path: &Path, contents: &str) -> CliResult<()> {
    std::fs::write(path, contents).map_err(|e| Error::io(path, e).into())
}

fn log(msg: impl std::fmt::Display) {
    eprintln!("nct-efa: {msg}");
}

pub fn run(cli: Cli) -> CliResult<()> {
    match cli.command {
        Command::Featurize(args) => cmd_featurize(&args),
        Command::Train(args) => cmd_train(&args),
        Command::Synth(args) => cmd_synth(&args),
        Command::Oracle(args) => cmd_oracle(&args),
    }
}

pub fn cmd_featurize(args: &FeaturizeArgs) -> CliResult<()> {
    let spec = EncodingSpec {
        mode: args.encoding,
        bins: args.bins,
        degree_cap: args.degree_cap,
        clamp_degree: args.clamp_degree,
        standardize: args.standardize,
        histogram_scope: if args.dataset_histogram { HistogramScope::Dataset } else { HistogramScope::PerGraph },
    };
    let bytes = read(&args.graphs)?;
    let ds = parse_edge_list_json(&bytes)?;
    log(format_args!("featurizing {} graphs with {}", ds.len(), spec.mode.as_str()));
    let start = Instant::now();
    let mut file = with_threads(resolve_threads(args.threads), || featurize(&ds, &spec, Schedule::default()))?;
    log(format_args!("featurized {} graphs in {:.3} s", ds.len(), start.elapsed().as_secs_f64()));

    let mut manifest = RunManifest::new("featurize", &file.encoding)?;
    manifest.inputs.insert("graphs".into(), sha256_hex(&bytes));
    manifest.conventions = file.conventions.clone();
    file.manifest = Some(serde_json::to_value(&manifest).map_err(Error::from)?);
    write(&args.out, &file.to_json()?)
}

#[derive(Debug, Serialize)]
struct TrainOutput<'a> {
    manifest: &'a RunManifest,
    encoding: &'a EncodingSpec,
    report: &'a CvReport,
}

pub fn cmd_train(args: &TrainArgs) -> CliResult<()> {
    let cfg = TrainConfig {
        epochs: args.epochs,
        learning_rate: args.lr,
        weight_decay: args.weight_decay,
        folds: args.folds,
        batch_size: args.batch_size,
        seed: args.seed,
        model: args.model,
        k_sort: args.k_sort,
        ..TrainConfig::default()
    };
    cfg.validate()?;
    let graph_bytes = read(&args.graphs)?;
    let target_bytes = read(&args.targets)?;
    let feature_bytes = read(&args.features)?;
    let ds: GraphDataset = join_targets_csv(&target_bytes, parse_edge_list_json(&graph_bytes)?)?;
    let features = FeatureFile::from_json(&feature_bytes)?;
    let matrices = features.matrices()?;

    log(format_args!("training {} on {} graphs, {} folds", cfg.model.as_str(), ds.len(), cfg.folds));
    let start = Instant::now();
    let report = with_threads(resolve_threads(args.threads), || train_and_evaluate(&ds, &matrices, &cfg, Schedule::default()))?;
    log(format_args!("trained in {:.3} s", start.elapsed().as_secs_f64()));

    let mut manifest = RunManifest::new("train", &cfg)?;
    manifest.inputs.insert("graphs".into(), sha256_hex(&graph_bytes));
    manifest.inputs.insert("targets".into(), sha256_hex(&target_bytes));
    manifest.inputs.insert("features".into(), sha256_hex(&feature_bytes));
    manifest.conventions = features.conventions.clone();
    manifest.deviations = report.deviations.clone();
    let out = TrainOutput { manifest: &manifest, encoding: &features.encoding, report: &report };
    write(&args.out, &json::to_string_pretty(&out)?)?;

    match (report.mean_auc, report.std_auc) {
        (Some(m), Some(s)) => println!("mean AUC {m:.4} ± {s:.4} over {} folds", report.valid_folds),
        _ => println!("no fold produced a valid AUC"),
    }
    Ok(())
}

pub fn cmd_synth(args: &SynthArgs) -> CliResult<()> {
    let cfg = RegularPairConfig { count: args.count, min_nodes: args.min_nodes, max_nodes: args.max_nodes, seed: args.seed };
    let ds = regular_pair_dataset(&cfg)?;
    write(&args.graphs, &to_edge_list_json(ds.entries.iter().map(|e| (&e.id, &e.graph))))?;
    write(&args.targets, &to_targets_csv(&ds))?;
    log(format_args!("wrote {} regular-pair graphs", ds.len()));
    Ok(())
}

pub fn cmd_oracle(args: &OracleArgs) -> CliResult<()> {
    let imp = match args.inject_fault {
        Some(f) => Implementations::with_fault(f),
        None => Implementations::default(),
    };
    let opts = OracleOptions { seed: args.seed, max_nodes: args.max_nodes, ..OracleOptions::default() };
    if !(1..=nct_efa::oracle::MAX_ENUMERATION_NODES).contains(&opts.max_nodes) {
        return Err(Error::InvalidConfig(format!("--max-nodes must be in 1..={}", nct_efa::oracle::MAX_ENUMERATION_NODES)).into());
    }
    let report: OracleReport = run_oracle_suite(&imp, &opts)?;
    for c in &report.checks {
        println!(
            "{} {} cases={} max_deviation={:.3e} tolerance={:.0e}",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.cases,
            c.max_deviation,
            c.tolerance
        );
    }
    if let Some(out) = &args.out {
        write(out, &json::to_string_pretty(&report)?)?;
    }
    if report.passed {
        Ok(())
    } else {
        let failed: Vec<&str> = report.checks.iter().filter(|c| !c.passed).map(|c| c.name.as_str()).collect();
        Err(CliError { code: EXIT_NUMERICAL, message: format!("oracle mismatch: {}", failed.join(", ")) })
    }
}
