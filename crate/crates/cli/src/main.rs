//! `san`: command-line front end for the spectral attention pipeline.
//!
//! Every subcommand accepts `--config <file.json>` whose keys mirror the
//! subcommand's flags (flags override the file; unknown keys are rejected)
//! and is deterministic given `--seed`. Timestamps appear only in the
//! `metadata` field of JSON summaries.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::Deserialize;
use serde_json::json;

use san_core::graph::{
    enumerate_connected, gen_cycle, load_graphs, save_graphs, Dataset, Graph, Split, Task,
};
use san_core::san::{
    san_forward, AttentionKind, LpeKind, ModelConfig, Readout, SanInput, SanParams,
    SelfLoopBranch,
};
use san_core::spectral::{
    biharmonic_distance_sq, diffusion_distance_sq, eigendecompose, greens_function,
    select_eigpairs, LaplacianKind,
};
use san_core::train::{
    data_dims, evaluate, make_cluster_dataset, train_model_full, RunRecord, TrainConfig,
};
use san_core::wl::discrimination_report;
use san_core::{autodiff, Error, Result};

const EXIT_HELP: &str = "\
Exit codes:
  0  success
  1  runtime failure (numerical, io, invalid input data)
  2  usage error (unknown flag or bad flag value)
  3  malformed config or data file
  4  task mismatch between data and requested operation
  5  size guard exceeded";

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Parse { .. } | Error::Json(_) => 3,
        Error::TaskMismatch(_) => 4,
        Error::SizeGuard(_) => 5,
        _ => 1,
    }
}

/// 17 significant digits: round-trip exact for f64.
fn fmt17(x: f64) -> String {
    format!("{x:.16e}")
}

#[derive(Parser)]
#[command(name = "san", version, about = "Spectral attention network pipeline", after_help = EXIT_HELP)]
struct Cli {
    /// JSON file whose keys mirror the subcommand flags; flags override it
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Seed for every randomized operation
    #[arg(long, global = true)]
    seed: Option<u64>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a graph dataset file
    GenData(GenDataArgs),
    /// Eigenvalues/eigenvectors/multiplicities of one graph as JSON
    Spectra(SpectraArgs),
    /// Pairwise spectral distances of one graph as CSV
    Distances(DistancesArgs),
    /// 1-WL vs spectra discrimination report over a graph corpus as CSV
    WlCompare(WlCompareArgs),
    /// Train a model; writes run records, epoch curves, and a checkpoint
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset; metrics as JSON
    Eval(EvalArgs),
    /// Finite-difference check of the full model gradient
    Gradcheck(GradcheckArgs),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn run(cli: Cli) -> Result<u8> {
    let seed = cli.seed.unwrap_or(0);
    let config = cli.config.as_deref();
    match cli.cmd {
        Cmd::GenData(a) => cmd_gen_data(a, config, seed),
        Cmd::Spectra(a) => cmd_spectra(a, config),
        Cmd::Distances(a) => cmd_distances(a, config),
        Cmd::WlCompare(a) => cmd_wl_compare(a, config),
        Cmd::Train(a) => cmd_train(a, config, seed),
        Cmd::Eval(a) => cmd_eval(a),
        Cmd::Gradcheck(a) => cmd_gradcheck(a, config, seed),
    }
}

/// Parse the optional `--config` JSON into a partial-settings struct.
fn load_partial<T: DeserializeOwned + Default>(path: Option<&Path>) -> Result<T> {
    match path {
        None => Ok(T::default()),
        Some(p) => {
            let text = std::fs::read_to_string(p)?;
            serde_json::from_str(&text).map_err(|e| Error::Parse {
                line: e.line(),
                message: format!("config {}: {e}", p.display()),
            })
        }
    }
}

fn write_or_stdout(out: Option<&Path>, content: &str) -> Result<()> {
    match out {
        Some(p) => std::fs::write(p, content)?,
        None => print!("{content}"),
    }
    Ok(())
}

fn unix_now_secs() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

// ---------------------------------------------------------------- gen-data

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum GenKind {
    /// SBM community-labelled node-classification graphs
    Sbm,
    /// Cycles C3..Cmax
    Cycles,
    /// C_n next to the disjoint union of two C_{n/2}
    RingPairs,
    /// All connected graphs up to max-n nodes, one per isomorphism class
    EnumerateSmall,
}

#[derive(Args)]
struct GenDataArgs {
    #[arg(long, value_enum)]
    kind: Option<GenKind>,
    /// Output dataset path (JSON lines; splits in a sibling .splits.json)
    #[arg(long)]
    out: PathBuf,
    #[arg(long)]
    num_graphs: Option<usize>,
    /// Nodes per graph (sbm) or cycle length (ring-pairs)
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    communities: Option<usize>,
    #[arg(long)]
    p_in: Option<f64>,
    #[arg(long)]
    p_out: Option<f64>,
    /// Largest size for cycles / enumerate-small
    #[arg(long)]
    max_n: Option<usize>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GenDataFile {
    kind: Option<GenKind>,
    num_graphs: Option<usize>,
    n: Option<usize>,
    communities: Option<usize>,
    p_in: Option<f64>,
    p_out: Option<f64>,
    max_n: Option<usize>,
    seed: Option<u64>,
}

/// Disjoint union of two cycles C_k.
fn two_cycles(k: usize) -> Result<Graph> {
    let mut edges: Vec<(usize, usize)> = (0..k).map(|i| (i, (i + 1) % k)).collect();
    edges.extend((0..k).map(|i| (k + i, k + (i + 1) % k)));
    Graph::new(2 * k, edges)
}

fn cmd_gen_data(a: GenDataArgs, config: Option<&Path>, seed: u64) -> Result<u8> {
    let f: GenDataFile = load_partial(config)?;
    let kind = a.kind.or(f.kind).ok_or_else(|| {
        Error::InvalidArgument("gen-data needs --kind (or 'kind' in --config)".into())
    })?;
    let seed = f.seed.map_or(seed, |s| a_seed_override(seed, s));
    let ds = match kind {
        GenKind::Sbm => make_cluster_dataset(
            a.num_graphs.or(f.num_graphs).unwrap_or(250),
            a.n.or(f.n).unwrap_or(40),
            a.communities.or(f.communities).unwrap_or(4),
            a.p_in.or(f.p_in).unwrap_or(0.5),
            a.p_out.or(f.p_out).unwrap_or(0.05),
            seed,
        )?,
        GenKind::Cycles => {
            let max_n = a.max_n.or(f.max_n).unwrap_or(8);
            let graphs = (3..=max_n).map(gen_cycle).collect::<Result<Vec<_>>>()?;
            Dataset::new(graphs, Task::GraphClassification, Split::default())?
        }
        GenKind::RingPairs => {
            let n = a.n.or(f.n).unwrap_or(6);
            if n < 6 || n % 2 != 0 {
                return Err(Error::InvalidArgument(format!(
                    "ring-pairs needs an even n >= 6, got {n}"
                )));
            }
            let graphs = vec![gen_cycle(n)?, two_cycles(n / 2)?];
            Dataset::new(graphs, Task::GraphClassification, Split::default())?
        }
        GenKind::EnumerateSmall => {
            let max_n = a.max_n.or(f.max_n).unwrap_or(6);
            Dataset::new(
                enumerate_connected(max_n)?,
                Task::GraphClassification,
                Split::default(),
            )?
        }
    };
    save_graphs(&ds, &a.out)?;
    println!("wrote {} graphs to {}", ds.graphs.len(), a.out.display());
    Ok(0)
}

/// Config-file seed loses to an explicit --seed; the CLI default (0) loses
/// to the config file.
fn a_seed_override(flag_seed: u64, file_seed: u64) -> u64 {
    if flag_seed != 0 {
        flag_seed
    } else {
        file_seed
    }
}

// ---------------------------------------------------------------- spectra

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum KindArg {
    Combinatorial,
    Symmetric,
}

impl From<KindArg> for LaplacianKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Combinatorial => LaplacianKind::Combinatorial,
            KindArg::Symmetric => LaplacianKind::SymmetricNormalized,
        }
    }
}

#[derive(Args)]
struct SpectraArgs {
    /// Dataset file holding the graph
    #[arg(long)]
    data: PathBuf,
    /// Which graph in the dataset
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, value_enum)]
    kind: Option<KindArg>,
    /// Also report the m-eigenpair selection used by the positional encoders
    #[arg(long)]
    m: Option<usize>,
    /// Output path; stdout when omitted
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct SpectraFile {
    index: Option<usize>,
    kind: Option<KindArg>,
    m: Option<usize>,
}

fn pick_graph(ds: &Dataset, index: usize) -> Result<&Graph> {
    ds.graphs.get(index).ok_or_else(|| {
        Error::InvalidArgument(format!(
            "graph index {index} out of range ({} graphs)",
            ds.graphs.len()
        ))
    })
}

fn cmd_spectra(a: SpectraArgs, config: Option<&Path>) -> Result<u8> {
    let f: SpectraFile = load_partial(config)?;
    let ds = load_graphs(&a.data)?;
    let g = pick_graph(&ds, a.index.or(f.index).unwrap_or(0))?;
    let kind: LaplacianKind = a.kind.or(f.kind).unwrap_or(KindArg::Combinatorial).into();
    let sd = eigendecompose(g, kind)?;
    let mut doc = json!({
        "kind": format!("{kind:?}"),
        "n": sd.n(),
        "eigenvalues": sd.eigenvalues,
        "eigenvectors": sd.eigenvectors,
        "multiplicity_groups": sd.multiplicity_groups,
        "num_zero_modes": sd.num_zero_modes,
    });
    if let Some(m) = a.m.or(f.m) {
        let sel = select_eigpairs(&sd, m)?;
        doc["selection"] = json!({
            "m": sel.m(),
            "num_real": sel.num_real(),
            "eigenvalues": sel.eigenvalues,
            "eigenvectors": sel.eigenvectors,
            "mask": sel.mask,
        });
    }
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    write_or_stdout(a.out.as_deref(), &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- distances

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum MeasureArg {
    Diffusion,
    Biharmonic,
    Greens,
}

#[derive(Args)]
struct DistancesArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    index: Option<usize>,
    #[arg(long, value_enum)]
    measure: Option<MeasureArg>,
    /// Diffusion time (diffusion measure only)
    #[arg(long)]
    t: Option<f64>,
    /// Greens only: apply the degree scalings in the literal written order
    #[arg(long)]
    as_written: bool,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct DistancesFile {
    index: Option<usize>,
    measure: Option<MeasureArg>,
    t: Option<f64>,
    as_written: Option<bool>,
}

fn cmd_distances(a: DistancesArgs, config: Option<&Path>) -> Result<u8> {
    let f: DistancesFile = load_partial(config)?;
    let ds = load_graphs(&a.data)?;
    let g = pick_graph(&ds, a.index.or(f.index).unwrap_or(0))?;
    let measure = a.measure.or(f.measure).ok_or_else(|| {
        Error::InvalidArgument("distances needs --measure (or 'measure' in --config)".into())
    })?;
    let t = a.t.or(f.t).unwrap_or(1.0);
    let n = g.num_nodes;
    let mut csv = String::from("i,j,value\n");
    match measure {
        MeasureArg::Diffusion => {
            for i in 0..n {
                for j in (i + 1)..n {
                    csv.push_str(&format!("{i},{j},{}\n", fmt17(diffusion_distance_sq(g, i, j, t)?)));
                }
            }
        }
        MeasureArg::Biharmonic => {
            for i in 0..n {
                for j in (i + 1)..n {
                    csv.push_str(&format!("{i},{j},{}\n", fmt17(biharmonic_distance_sq(g, i, j)?)));
                }
            }
        }
        MeasureArg::Greens => {
            let as_written = a.as_written || f.as_written.unwrap_or(false);
            let gf = greens_function(g, as_written)?;
            for (i, row) in gf.iter().enumerate() {
                for (j, &v) in row.iter().enumerate() {
                    csv.push_str(&format!("{i},{j},{}\n", fmt17(v)));
                }
            }
        }
    }
    write_or_stdout(a.out.as_deref(), &csv)?;
    Ok(0)
}

// ---------------------------------------------------------------- wl-compare

#[derive(Args)]
struct WlCompareArgs {
    #[arg(long)]
    data: PathBuf,
    /// Spectral comparison tolerance
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct WlCompareFile {
    tol: Option<f64>,
}

fn cmd_wl_compare(a: WlCompareArgs, config: Option<&Path>) -> Result<u8> {
    let f: WlCompareFile = load_partial(config)?;
    let ds = load_graphs(&a.data)?;
    let tol = a.tol.or(f.tol).unwrap_or(1e-6);
    let report = discrimination_report(&ds.graphs, tol)?;
    let mut csv = String::from("g1,g2,isomorphic,wl1_distinct,spectra_distinct\n");
    for r in &report.rows {
        csv.push_str(&format!(
            "{},{},{},{},{}\n",
            r.g1, r.g2, r.isomorphic, r.wl1_distinct, r.spectra_distinct
        ));
    }
    let summary = format!(
        "pairs={} wl_blind_spectra_separated={} unsound_pairs={}\n",
        report.rows.len(),
        report.wl_blind_spectra_separated,
        report.unsound_pairs
    );
    match &a.out {
        Some(p) => {
            std::fs::write(p, &csv)?;
            print!("{summary}");
        }
        None => print!("{csv}"),
    }
    Ok(0)
}

// ---------------------------------------------------------------- train

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum ReadoutArg {
    Mean,
    Sum,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum BranchArg {
    Real,
    Added,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum LpeArg {
    Node,
    Edge,
    None,
}

#[derive(Clone, Copy, ValueEnum, Deserialize)]
#[serde(rename_all = "lowercase")]
enum AttentionArg {
    Full,
    Sparse,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Directory for run records, epoch curves, and checkpoints
    #[arg(long)]
    out_dir: PathBuf,

    // model
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    k_lpe: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long, value_enum)]
    readout: Option<ReadoutArg>,
    #[arg(long, value_enum)]
    self_loop_branch: Option<BranchArg>,
    #[arg(long, value_enum)]
    lpe: Option<LpeArg>,
    #[arg(long, value_enum)]
    attention: Option<AttentionArg>,

    // training
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    lr_reduce_factor: Option<f64>,
    #[arg(long)]
    patience: Option<usize>,
    #[arg(long)]
    lr_min: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    batch_size: Option<usize>,
    #[arg(long)]
    epochs: Option<usize>,
    /// Random eigenvector sign flips on the training split
    #[arg(long)]
    augment: Option<bool>,
    /// Comma-separated gamma values; one full run per value
    #[arg(long)]
    gamma_sweep: Option<String>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialModel {
    #[serde(rename = "L")]
    num_layers: Option<usize>,
    #[serde(rename = "H")]
    num_heads: Option<usize>,
    d: Option<usize>,
    k_lpe: Option<usize>,
    m: Option<usize>,
    gamma: Option<f64>,
    readout: Option<ReadoutArg>,
    self_loop_branch: Option<BranchArg>,
    lpe_kind: Option<LpeArg>,
    attention: Option<AttentionArg>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct PartialTrain {
    lr_init: Option<f64>,
    lr_reduce_factor: Option<f64>,
    patience: Option<usize>,
    lr_min: Option<f64>,
    weight_decay: Option<f64>,
    dropout: Option<f64>,
    batch_size: Option<usize>,
    max_epochs: Option<usize>,
    seed: Option<u64>,
    sign_flip_augment: Option<bool>,
    gamma_sweep: Option<Vec<f64>>,
    stop_when_floored: Option<bool>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct TrainFile {
    #[serde(default)]
    model: PartialModel,
    #[serde(default)]
    train: PartialTrain,
}

fn resolve_model(a: &TrainArgs, f: &PartialModel) -> ModelConfig {
    let def = ModelConfig::default();
    ModelConfig {
        num_layers: a.layers.or(f.num_layers).unwrap_or(def.num_layers),
        num_heads: a.heads.or(f.num_heads).unwrap_or(def.num_heads),
        d: a.d.or(f.d).unwrap_or(def.d),
        k_lpe: a.k_lpe.or(f.k_lpe).unwrap_or(def.k_lpe),
        m: a.m.or(f.m).unwrap_or(def.m),
        gamma: a.gamma.or(f.gamma).unwrap_or(def.gamma),
        readout: match a.readout.or(f.readout) {
            Some(ReadoutArg::Mean) => Readout::Mean,
            Some(ReadoutArg::Sum) => Readout::Sum,
            None => def.readout,
        },
        self_loop_branch: match a.self_loop_branch.or(f.self_loop_branch) {
            Some(BranchArg::Real) => SelfLoopBranch::Real,
            Some(BranchArg::Added) => SelfLoopBranch::Added,
            None => def.self_loop_branch,
        },
        lpe_kind: match a.lpe.or(f.lpe_kind) {
            Some(LpeArg::Node) => LpeKind::Node,
            Some(LpeArg::Edge) => LpeKind::Edge,
            Some(LpeArg::None) => LpeKind::None,
            None => def.lpe_kind,
        },
        attention: match a.attention.or(f.attention) {
            Some(AttentionArg::Full) => AttentionKind::Full,
            Some(AttentionArg::Sparse) => AttentionKind::Sparse,
            None => def.attention,
        },
    }
}

fn parse_gamma_list(s: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|p| {
            p.trim().parse::<f64>().map_err(|_| {
                Error::InvalidArgument(format!("bad gamma value {p:?} in --gamma-sweep"))
            })
        })
        .collect()
}

fn resolve_train(a: &TrainArgs, f: &PartialTrain, seed: u64) -> Result<TrainConfig> {
    let def = TrainConfig::default();
    let gamma_sweep = match &a.gamma_sweep {
        Some(s) => Some(parse_gamma_list(s)?),
        None => f.gamma_sweep.clone(),
    };
    Ok(TrainConfig {
        lr_init: a.lr.or(f.lr_init).unwrap_or(def.lr_init),
        lr_reduce_factor: a.lr_reduce_factor.or(f.lr_reduce_factor).unwrap_or(def.lr_reduce_factor),
        patience: a.patience.or(f.patience).unwrap_or(def.patience),
        lr_min: a.lr_min.or(f.lr_min).unwrap_or(def.lr_min),
        weight_decay: a.weight_decay.or(f.weight_decay).unwrap_or(def.weight_decay),
        dropout: a.dropout.or(f.dropout).unwrap_or(def.dropout),
        batch_size: a.batch_size.or(f.batch_size).unwrap_or(def.batch_size),
        max_epochs: a.epochs.or(f.max_epochs).unwrap_or(def.max_epochs),
        seed: f.seed.map_or(seed, |s| a_seed_override(seed, s)),
        sign_flip_augment: a.augment.or(f.sign_flip_augment).unwrap_or(def.sign_flip_augment),
        gamma_sweep,
        stop_when_floored: f.stop_when_floored.unwrap_or(def.stop_when_floored),
    })
}

fn write_run(
    dir: &Path,
    suffix: &str,
    record: &RunRecord,
    params: &SanParams,
    model: &ModelConfig,
    train: &TrainConfig,
    dims: (usize, usize, usize),
) -> Result<()> {
    let doc = json!({
        "metadata": { "created_unix_secs": unix_now_secs() },
        "model": model,
        "train": train,
        "dims": { "d_in": dims.0, "edge_dim": dims.1, "out_dim": dims.2 },
        "record": record,
    });
    let mut text = serde_json::to_string_pretty(&doc)?;
    text.push('\n');
    std::fs::write(dir.join(format!("run{suffix}.json")), text)?;
    std::fs::write(dir.join(format!("epochs{suffix}.csv")), record.to_csv())?;
    autodiff::save_params(&dir.join(format!("checkpoint{suffix}.json")), &params.named_params())?;
    Ok(())
}

fn cmd_train(a: TrainArgs, config: Option<&Path>, seed: u64) -> Result<u8> {
    let f: TrainFile = load_partial(config)?;
    let model = resolve_model(&a, &f.model);
    let train = resolve_train(&a, &f.train, seed)?;
    let ds = load_graphs(&a.data)?;
    let dims = data_dims(&ds)?;
    std::fs::create_dir_all(&a.out_dir)?;

    match train.gamma_sweep.clone() {
        None => {
            let (record, params) = train_model_full(&ds, &model, &train)?;
            write_run(&a.out_dir, "", &record, &params, &model, &train, dims)?;
            println!(
                "test_metric={} nonneighbor_mass={} best_epoch={}",
                fmt17(record.test_metric),
                fmt17(record.nonneighbor_mass),
                record.best_epoch
            );
        }
        Some(gammas) => {
            let mut csv =
                String::from("gamma,nonneighbor_mass,test_metric,final_train_loss,best_epoch\n");
            for (i, &gamma) in gammas.iter().enumerate() {
                let mut m = model.clone();
                m.gamma = gamma;
                let (record, params) = train_model_full(&ds, &m, &train)?;
                csv.push_str(&format!(
                    "{},{},{},{},{}\n",
                    fmt17(gamma),
                    fmt17(record.nonneighbor_mass),
                    fmt17(record.test_metric),
                    fmt17(record.final_train_loss),
                    record.best_epoch
                ));
                write_run(&a.out_dir, &format!("_{i}"), &record, &params, &m, &train, dims)?;
            }
            std::fs::write(a.out_dir.join("sweep.csv"), &csv)?;
            print!("{csv}");
        }
    }
    Ok(0)
}

// ---------------------------------------------------------------- eval

#[derive(Args)]
struct EvalArgs {
    /// run.json emitted by `san train` (provides the model configuration)
    #[arg(long)]
    run: PathBuf,
    /// checkpoint.json emitted by `san train`
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Deserialize)]
struct RunDoc {
    model: ModelConfig,
    dims: RunDims,
}

#[derive(Deserialize)]
struct RunDims {
    d_in: usize,
    edge_dim: usize,
    out_dim: usize,
}

fn cmd_eval(a: EvalArgs) -> Result<u8> {
    use rand::SeedableRng;
    let text = std::fs::read_to_string(&a.run)?;
    let doc: RunDoc = serde_json::from_str(&text).map_err(|e| Error::Parse {
        line: e.line(),
        message: format!("run file {}: {e}", a.run.display()),
    })?;
    let ds = load_graphs(&a.data)?;
    let dims = data_dims(&ds)?;
    if dims != (doc.dims.d_in, doc.dims.edge_dim, doc.dims.out_dim) {
        return Err(Error::TaskMismatch(format!(
            "dataset implies dims (d_in, edge_dim, out_dim) = {dims:?} \
             but the checkpoint was trained with ({}, {}, {})",
            doc.dims.d_in, doc.dims.edge_dim, doc.dims.out_dim
        )));
    }
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
    let params =
        SanParams::new(doc.model, doc.dims.d_in, doc.dims.edge_dim, doc.dims.out_dim, &mut rng)?;
    autodiff::load_params(&a.checkpoint, &params.named_params())?;
    let summary = evaluate(&ds, &params)?;
    let mut text = serde_json::to_string_pretty(&serde_json::to_value(&summary)?)?;
    text.push('\n');
    write_or_stdout(a.out.as_deref(), &text)?;
    Ok(0)
}

// ---------------------------------------------------------------- gradcheck

#[derive(Args)]
struct GradcheckArgs {
    #[arg(long)]
    n_nodes: Option<usize>,
    #[arg(long)]
    d: Option<usize>,
    #[arg(long)]
    layers: Option<usize>,
    #[arg(long)]
    heads: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    #[arg(long)]
    k_lpe: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    /// Coordinates sampled per parameter tensor
    #[arg(long)]
    coords: Option<usize>,
    #[arg(long)]
    tol: Option<f64>,
}

#[derive(Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct GradcheckFile {
    n_nodes: Option<usize>,
    d: Option<usize>,
    layers: Option<usize>,
    heads: Option<usize>,
    m: Option<usize>,
    k_lpe: Option<usize>,
    gamma: Option<f64>,
    coords: Option<usize>,
    tol: Option<f64>,
    seed: Option<u64>,
}

fn cmd_gradcheck(a: GradcheckArgs, config: Option<&Path>, seed: u64) -> Result<u8> {
    use rand::{Rng, SeedableRng};
    let f: GradcheckFile = load_partial(config)?;
    let n = a.n_nodes.or(f.n_nodes).unwrap_or(6);
    let cfg = ModelConfig {
        num_layers: a.layers.or(f.layers).unwrap_or(2),
        num_heads: a.heads.or(f.heads).unwrap_or(2),
        d: a.d.or(f.d).unwrap_or(32),
        k_lpe: a.k_lpe.or(f.k_lpe).unwrap_or(8),
        m: a.m.or(f.m).unwrap_or(4),
        gamma: a.gamma.or(f.gamma).unwrap_or(0.1),
        ..ModelConfig::default()
    };
    cfg.validate()?;
    let seed = f.seed.map_or(seed, |s| a_seed_override(seed, s));
    let coords = a.coords.or(f.coords).unwrap_or(2);
    let tol = a.tol.or(f.tol).unwrap_or(1e-5);

    // connected graph: isolated nodes park the encoder on exact relu /
    // layer-norm kinks where finite differences carry no information
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let g = loop {
        let g = san_core::graph::gen_erdos_renyi(n, 0.5, rng.gen())?;
        if g.is_connected() {
            break g;
        }
    };
    let feats: Vec<Vec<f64>> =
        (0..n).map(|_| (0..2).map(|_| rng.gen::<f64>() - 0.5).collect()).collect();
    let g = g.with_node_features(feats)?;
    let sd = eigendecompose(&g, LaplacianKind::Combinatorial)?;
    let sel = select_eigpairs(&sd, cfg.m)?;
    let params = SanParams::new(cfg, 2, 1, 1, &mut rng)?;
    let named = params.named_params();

    let report = autodiff::gradcheck(
        &named,
        || {
            san_forward(&SanInput { graph: &g, sel: Some(&sel) }, &params, Task::GraphRegression)
                .expect("forward over fixed shapes cannot fail")
                .pred
                .sum_all()
        },
        1e-5,
        coords,
        seed,
    );
    print!("{report}");
    if report.passed(tol) {
        println!("PASS max_rel_err {} (< {})", fmt17(report.max_rel_err), tol);
        Ok(0)
    } else {
        println!("FAIL max_rel_err {} (>= {})", fmt17(report.max_rel_err), tol);
        Ok(1)
    }
}
