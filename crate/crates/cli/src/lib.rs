//! Command-line front end: fit, score, attribute and simulate.
//!
//! Every command is a pure function of its input files and flags. Each output
//! file gets a `<out>.manifest.json` sidecar recording the resolved
//! configuration, seed, input digests and tool version.

mod manifest;

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};

use rca_core::attribution::{shapley_attribution, AttributionConfig, AttributionReport, ShapleyMode};
use rca_core::causal_model::{fit_fcm, format_f64, Dag, DagSpec, Dataset, Fcm, FitDiagnostics, Observation, Regressor, ScoreMode};
use rca_core::synth::{run_experiment, ExperimentReport, SynthConfig};
use rca_core::{z_to_it, FeatureKind, RcaError};

pub use manifest::{sidecar_path, InputDigest, RunManifest};
use manifest::write_json;

/// Default conditional z threshold for flagging outliers.
pub const DEFAULT_Z_THRESHOLD: f64 = 2.5;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] RcaError),
    #[error("{0}")]
    Usage(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CliError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io { path: path.to_path_buf(), source }
    }

    /// Stable prefix for `error[<code>]: ...` lines.
    pub fn code(&self) -> &'static str {
        match self {
            CliError::Core(e) => e.code(),
            CliError::Usage(_) => "usage",
            CliError::Io { .. } => "io",
        }
    }

    /// One-line message, with a hint where the fix is a flag.
    pub fn message(&self) -> String {
        match self {
            CliError::Core(e @ RcaError::TooManySubsets { .. }) => {
                format!("{e} (pass --permutations N to sample orderings)")
            }
            other => other.to_string(),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

#[derive(Debug, Parser)]
#[command(name = "rca", version, about = "Root-cause analysis of outliers in causal graphs")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit an additive-noise model to a DAG and a CSV.
    Fit(FitArgs),
    /// Score every row and node, conditionally and unconditionally.
    Score(ScoreArgs),
    /// Shapley attribution of one row's target score to ancestor noise.
    Attribute(AttributeArgs),
    /// Run the random-graph perturbation study.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModelKind {
    Linear,
    Knn,
}

impl ModelKind {
    fn regressor(self, k: Option<usize>) -> Regressor {
        match self {
            ModelKind::Linear => Regressor::Linear,
            ModelKind::Knn => Regressor::NearestNeighbor { k },
        }
    }
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FitArgs {
    /// DAG JSON: {"nodes": [...], "edges": [[parent, child], ...]}
    #[arg(long)]
    pub dag: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "linear")]
    pub model: ModelKind,
    /// Neighbours for --model knn; defaults to ceil(sqrt(rows)).
    #[arg(long)]
    pub k: Option<usize>,
    /// Fit on rows [0, split) only.
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ModeArg {
    Z,
    It,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ScoreArgs {
    #[arg(long)]
    pub fcm: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, value_enum, default_value = "z")]
    pub mode: ModeArg,
    /// Flag threshold on the conditional score; 2.5 in z mode, its IT
    /// equivalent in it mode.
    #[arg(long)]
    pub threshold: Option<f64>,
    /// Score rows [split, end) only.
    #[arg(long)]
    pub split: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureArg {
    Right,
    Left,
    Abs,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct AttributeArgs {
    #[arg(long)]
    pub fcm: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long)]
    pub target: String,
    /// Zero-based row index after dropping incomplete rows.
    #[arg(long)]
    pub row: usize,
    #[arg(long, default_value_t = rca_core::attribution::DEFAULT_MC_SAMPLES)]
    pub samples: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Sample this many orderings instead of enumerating all subsets.
    #[arg(long)]
    pub permutations: Option<usize>,
    #[arg(long, default_value_t = rca_core::attribution::DEFAULT_EXACT_LIMIT)]
    pub exact_limit: usize,
    /// Target tail: right, left, or two-sided around the target's data mean.
    #[arg(long, value_enum, default_value = "right")]
    pub feature: FeatureArg,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// JSON file with SynthConfig fields; flags below override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long, default_value_t = 20)]
    pub graphs: usize,
    #[arg(long, value_delimiter = ',', default_value = "0,1,2,3,4,5")]
    pub lambdas: Vec<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum, default_value = "knn")]
    pub model: ModelKind,
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub num_nodes: Option<usize>,
    #[arg(long)]
    pub num_roots: Option<usize>,
    #[arg(long)]
    pub linear_prob: Option<f64>,
    #[arg(long)]
    pub rows: Option<usize>,
    #[arg(long)]
    pub perturb_prob: Option<f64>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    #[arg(long)]
    pub max_parents: Option<usize>,
    /// Report JSON; the per-trial CSV goes next to it with a .csv extension.
    #[arg(long)]
    pub out: PathBuf,
}

/// Serialized output of `rca fit`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitOutput {
    pub fcm: Fcm,
    pub diagnostics: FitDiagnostics,
}

pub fn run(cli: Cli) -> CliResult<()> {
    let mut stdout = std::io::stdout().lock();
    match cli.command {
        Command::Fit(args) => cmd_fit(&args, &mut stdout),
        Command::Score(args) => cmd_score(&args, &mut stdout),
        Command::Attribute(args) => cmd_attribute(&args, &mut stdout),
        Command::Simulate(args) => cmd_simulate(&args, &mut stdout),
    }
}

fn read_dag(path: &Path) -> CliResult<Dag> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let spec: DagSpec = serde_json::from_str(&text).map_err(RcaError::from)?;
    Ok(Dag::try_from(spec)?)
}

fn read_data(path: &Path, dag: &Dag) -> CliResult<Dataset> {
    let file = fs::File::open(path).map_err(|e| CliError::io(path, e))?;
    Ok(Dataset::from_csv_reader(std::io::BufReader::new(file), Some(dag.names()))?)
}

/// Loads either a `rca fit` output or a bare serialized [`Fcm`].
pub fn load_fcm(path: &Path) -> CliResult<Fcm> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text).map_err(RcaError::from)?;
    let inner = match value.get_mut("fcm") {
        Some(v) => v.take(),
        None => value,
    };
    Ok(serde_json::from_value(inner).map_err(RcaError::from)?)
}

fn split_rows(data: &Dataset, split: Option<usize>, fit_side: bool) -> CliResult<Dataset> {
    let Some(split) = split else { return Ok(data.clone()) };
    if split > data.len() {
        return Err(CliError::Usage(format!("--split {split} exceeds the {} usable rows", data.len())));
    }
    Ok(if fit_side { data.slice(0..split) } else { data.slice(split..data.len()) })
}

pub fn cmd_fit(args: &FitArgs, out: &mut impl std::io::Write) -> CliResult<()> {
    let dag = read_dag(&args.dag)?;
    let data = read_data(&args.data, &dag)?;
    let train = split_rows(&data, args.split, true)?;
    let (fcm, diagnostics) = fit_fcm(&dag, &train, args.model.regressor(args.k))?;

    let mut manifest = RunManifest::new("fit", None, args)?;
    manifest.input("dag", &args.dag)?;
    manifest.input("data", &args.data)?;
    manifest.outputs.push(args.out.clone());
    write_json(&args.out, &FitOutput { fcm, diagnostics: diagnostics.clone() })?;
    manifest.write_beside(&args.out)?;

    let _ = writeln!(out, "fitted {} nodes on {} rows ({} incomplete rows dropped)", dag.len(), train.len(), data.dropped_rows());
    let _ = writeln!(out, "{:<16} {:<18} {:>12} {:>12}", "node", "mechanism", "resid_std", "indep");
    for d in &diagnostics.nodes {
        let indep = d.independence.map_or("-".to_string(), |v| format!("{v:.4}"));
        let _ = writeln!(out, "{:<16} {:<18} {:>12.6} {:>12}", d.node, d.mechanism, d.residual_std, indep);
    }
    Ok(())
}

pub fn cmd_score(args: &ScoreArgs, out: &mut impl std::io::Write) -> CliResult<()> {
    let fcm = load_fcm(&args.fcm)?;
    let dag = fcm.dag();
    let data = read_data(&args.data, dag)?.aligned_to(dag)?;
    let offset = args.split.unwrap_or(0);
    let rows = split_rows(&data, args.split, false)?;
    let mode = match args.mode {
        ModeArg::Z => ScoreMode::Z,
        ModeArg::It => ScoreMode::It,
    };
    let threshold = match (args.threshold, mode) {
        (Some(t), _) => t,
        (None, ScoreMode::Z) => DEFAULT_Z_THRESHOLD,
        (None, ScoreMode::It) => z_to_it(DEFAULT_Z_THRESHOLD)?,
    };

    let mut header = vec!["row".to_string()];
    for name in dag.names() {
        header.extend([format!("{name}_cond"), format!("{name}_uncond"), format!("{name}_flag")]);
    }
    header.push("conv_cond".into());
    let mut buf = Vec::new();
    let mut flagged = vec![0usize; dag.len()];
    {
        let mut w = csv::Writer::from_writer(&mut buf);
        w.write_record(&header).map_err(RcaError::from)?;
        for (i, row) in rows.rows().iter().enumerate() {
            let obs = Observation::new(dag, row.clone())?;
            let mut record = vec![(offset + i).to_string()];
            for (j, count) in flagged.iter_mut().enumerate() {
                let c = fcm.conditional_score(j, &obs, mode)?;
                let u = fcm.unconditional_score(j, &obs, mode)?;
                let flag = c > threshold;
                *count += usize::from(flag);
                record.extend([format_f64(c), format_f64(u), u8::from(flag).to_string()]);
            }
            record.push(format_f64(fcm.convolve_conditional(&obs)?));
            w.write_record(&record).map_err(RcaError::from)?;
        }
        w.flush().map_err(|e| CliError::io(&args.out, e))?;
    }
    fs::write(&args.out, &buf).map_err(|e| CliError::io(&args.out, e))?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        #[serde(flatten)]
        args: &'a ScoreArgs,
        resolved_threshold: f64,
    }
    let mut manifest = RunManifest::new("score", None, &Resolved { args, resolved_threshold: threshold })?;
    manifest.input("fcm", &args.fcm)?;
    manifest.input("data", &args.data)?;
    manifest.outputs.push(args.out.clone());
    manifest.write_beside(&args.out)?;

    let _ = writeln!(out, "scored {} rows; conditional score > {threshold:.4} counts:", rows.len());
    for (name, count) in dag.names().iter().zip(&flagged) {
        let _ = writeln!(out, "  {name:<16} {count}");
    }
    Ok(())
}

pub fn cmd_attribute(args: &AttributeArgs, out: &mut impl std::io::Write) -> CliResult<()> {
    let fcm = load_fcm(&args.fcm)?;
    let dag = fcm.dag();
    let target = dag.node(&args.target)?;
    let data = read_data(&args.data, dag)?.aligned_to(dag)?;
    let row = data.rows().get(args.row).ok_or_else(|| {
        CliError::Usage(format!("--row {} out of range; {} usable rows", args.row, data.len()))
    })?;
    let obs = Observation::new(dag, row.clone())?;
    let target_feature = match args.feature {
        FeatureArg::Right => FeatureKind::RightTail,
        FeatureArg::Left => FeatureKind::LeftTail,
        FeatureArg::Abs => {
            let center = fcm.node(target).marginal.as_ref().map(|m| m.mean()).ok_or_else(|| {
                CliError::Usage(format!("--feature abs needs marginal statistics for '{}'", args.target))
            })?;
            FeatureKind::AbsDeviation { center }
        }
    };
    let cfg = AttributionConfig {
        mc_samples: args.samples,
        mode: match args.permutations {
            Some(num_permutations) => ShapleyMode::PermutationSampling { num_permutations },
            None => ShapleyMode::ExactSubsets,
        },
        exact_limit: args.exact_limit,
        seed: args.seed,
        target_feature,
    };
    let report = shapley_attribution(&fcm, &args.target, &obs, &cfg)?;
    write_json(&args.out, &report)?;

    let mut manifest = RunManifest::new("attribute", Some(args.seed), &(args, &cfg))?;
    manifest.input("fcm", &args.fcm)?;
    manifest.input("data", &args.data)?;
    manifest.outputs.push(args.out.clone());
    manifest.write_beside(&args.out)?;

    print_attribution(&report, out);
    Ok(())
}

fn print_attribution(report: &AttributionReport, out: &mut impl std::io::Write) {
    let _ = writeln!(out, "target {} score {:.6} (residual {:.3e})", report.target, report.target_score, report.residual);
    let _ = writeln!(out, "{:>4} {:<16} {:>14} {:>8}", "rank", "node", "contribution", "share");
    for (rank, (node, c)) in report.ranked().into_iter().enumerate() {
        let share = if report.target_score > 0.0 { c / report.target_score } else { 0.0 };
        let _ = writeln!(out, "{:>4} {:<16} {:>14.6} {:>7.1}%", rank + 1, node, c, 100.0 * share);
    }
}

/// Resolves `--config` plus flag overrides into a validated [`SynthConfig`].
pub fn resolve_synth_config(args: &SimulateArgs) -> CliResult<SynthConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
            serde_json::from_str(&text)
                .map_err(|e| CliError::Usage(format!("config {}: {e}", path.display())))?
        }
        None => SynthConfig::default(),
    };
    macro_rules! apply {
        ($($field:ident),*) => {$(
            if let Some(v) = args.$field { cfg.$field = v; }
        )*};
    }
    apply!(num_nodes, num_roots, linear_prob, rows, perturb_prob, train_fraction, seed);
    if args.max_parents.is_some() {
        cfg.max_parents = args.max_parents;
    }
    cfg.validate()?;
    Ok(cfg)
}

pub fn csv_path_for(json_out: &Path) -> PathBuf {
    let candidate = json_out.with_extension("csv");
    if candidate == json_out {
        let mut name = json_out.as_os_str().to_owned();
        name.push(".csv");
        PathBuf::from(name)
    } else {
        candidate
    }
}

pub fn cmd_simulate(args: &SimulateArgs, out: &mut impl std::io::Write) -> CliResult<()> {
    let cfg = resolve_synth_config(args)?;
    let report: ExperimentReport = run_experiment(&cfg, args.graphs, &args.lambdas, args.model.regressor(args.k))?;
    let csv_out = csv_path_for(&args.out);
    write_json(&args.out, &report)?;
    fs::write(&csv_out, report.to_csv()).map_err(|e| CliError::io(&csv_out, e))?;

    #[derive(Serialize)]
    struct Resolved<'a> {
        #[serde(flatten)]
        args: &'a SimulateArgs,
        resolved: &'a SynthConfig,
    }
    let mut manifest = RunManifest::new("simulate", Some(cfg.seed), &Resolved { args, resolved: &cfg })?;
    if let Some(path) = &args.config {
        manifest.input("config", path)?;
    }
    manifest.outputs.extend([args.out.clone(), csv_out]);
    manifest.write_beside(&args.out)?;

    let _ = writeln!(out, "{} graphs, {} redraws", report.num_graphs, report.redraws);
    let _ = writeln!(out, "{:>8} {:>16} {:>16}", "lambda", "auc_conditional", "auc_uncond");
    for s in &report.summary {
        let _ = writeln!(
            out,
            "{:>8.3} {:>9.4} ±{:>5.3} {:>9.4} ±{:>5.3}",
            s.lambda, s.mean_conditional, s.std_conditional, s.mean_unconditional, s.std_unconditional
        );
    }
    Ok(())
}
