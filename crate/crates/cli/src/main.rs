use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use dropedge_core::graph::generate::{random_connected, SbmConfig};
use dropedge_core::graph::{normalize, Graph, NormalizationScheme};
use dropedge_core::harness::{
    ablation_dropout_vs_dropedge, ablation_layerwise, load_dataset, oversmoothing_probe,
    write_metrics_csv, write_summary_json, DataSource, ProbeConfig, RunReport, TrainConfig,
    Trainer,
};
use dropedge_core::spectral::{
    analyze, theorem1_trajectory, verify_resistance_bound, DEFAULT_CLUSTER_TOL,
};
use dropedge_core::{Backbone, Error};

#[derive(Parser)]
#[command(name = "dropedge", version, about = "Deep GCN training with random edge removal")]
struct Cli {
    /// Repeat for more log output.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a model and write metrics.csv and summary.json.
    Train(RunArgs),
    /// Consecutive-layer distances before and after a short training run.
    ProbeOversmoothing(ProbeArgs),
    /// Spectrum of the normalized adjacency and the resistance bound.
    AnalyzeSpectral(SpectralArgs),
    /// Edge-removal trajectories on random connected graphs.
    TheoremCheck(TheoremArgs),
    /// Regularizer ablations.
    Ablate(AblateArgs),
}

#[derive(Args)]
struct DataArgs {
    /// Directory with graph.edges, features.csv, labels.csv and splits.json.
    /// Without it a stochastic block model is generated.
    #[arg(long)]
    data_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 200)]
    synthetic_nodes: usize,
    #[arg(long, default_value_t = 4)]
    synthetic_blocks: usize,
    #[arg(long, default_value_t = 0.08)]
    synthetic_p_in: f64,
    #[arg(long, default_value_t = 0.01)]
    synthetic_p_out: f64,
    #[arg(long, default_value_t = 64)]
    synthetic_features: usize,
    #[arg(long, default_value_t = 0)]
    synthetic_seed: u64,
}

impl DataArgs {
    fn synthetic(&self) -> DataSource {
        DataSource::Synthetic(SbmConfig {
            n_nodes: self.synthetic_nodes,
            n_blocks: self.synthetic_blocks,
            p_in: self.synthetic_p_in,
            p_out: self.synthetic_p_out,
            n_features: self.synthetic_features,
            seed: self.synthetic_seed,
            ..SbmConfig::default()
        })
    }

    fn source(&self) -> DataSource {
        match &self.data_dir {
            Some(dir) => DataSource::Dir(dir.clone()),
            None => self.synthetic(),
        }
    }
}

#[derive(Args)]
struct RunArgs {
    /// JSON training config; flags given explicitly override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    backbone: Option<Backbone>,
    #[arg(long)]
    nlayers: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    weight_decay: Option<f64>,
    /// Fraction of edges kept per draw; the drop rate is one minus this.
    #[arg(long)]
    sampling_percent: Option<f64>,
    #[arg(long)]
    dropout: Option<f64>,
    #[arg(long)]
    normalization: Option<NormalizationScheme>,
    #[arg(long)]
    withloop: bool,
    #[arg(long)]
    withbn: bool,
    #[arg(long)]
    no_bias: bool,
    /// Draw a separate edge subset for every layer.
    #[arg(long)]
    layerwise_dropedge: bool,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Use the raw features instead of row-normalized ones.
    #[arg(long)]
    raw_features: bool,
    #[command(flatten)]
    data: DataArgs,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl RunArgs {
    fn train_config(&self) -> Result<TrainConfig, CliError> {
        let mut cfg = match &self.config {
            Some(path) => TrainConfig::from_json_file(path).map_err(CliError::usage)?,
            None => TrainConfig {
                data: self.data.synthetic(),
                ..TrainConfig::default()
            },
        };
        let m = &mut cfg.model;
        if let Some(b) = self.backbone {
            m.backbone = b;
        }
        if let Some(n) = self.nlayers {
            m.n_layers = n;
        }
        if let Some(h) = self.hidden {
            m.hidden_dim = h;
        }
        if let Some(d) = self.dropout {
            m.dropout = d;
        }
        if let Some(s) = self.normalization {
            m.scheme = s;
            m.dropedge.scheme = s;
        }
        if let Some(sp) = self.sampling_percent {
            if !(0.0..=1.0).contains(&sp) {
                return Err(CliError::Usage(format!(
                    "--sampling-percent must lie in [0, 1], got {sp}"
                )));
            }
            m.dropedge.p = 1.0 - sp;
        }
        m.withloop |= self.withloop;
        m.withbn |= self.withbn;
        m.bias &= !self.no_bias;
        m.dropedge.layer_wise |= self.layerwise_dropedge;
        if let Some(lr) = self.lr {
            cfg.lr = lr;
        }
        if let Some(wd) = self.weight_decay {
            cfg.weight_decay = wd;
        }
        if let Some(e) = self.epochs {
            cfg.epochs = e;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
            cfg.model.dropedge.seed = seed;
        }
        cfg.normalize_features &= !self.raw_features;
        if let Some(dir) = &self.data.data_dir {
            cfg.data = DataSource::Dir(dir.clone());
        }
        if let Some(dir) = &self.out_dir {
            cfg.out_dir = Some(dir.clone());
        }
        cfg.validate().map_err(CliError::usage)?;
        Ok(cfg)
    }
}

#[derive(Args)]
struct ProbeArgs {
    #[command(flatten)]
    run: RunArgs,
    #[arg(long, default_value_t = 2)]
    first_layer: usize,
    /// Defaults to the last hidden layer.
    #[arg(long)]
    last_layer: Option<usize>,
    #[arg(long, default_value_t = 150)]
    probe_epochs: usize,
    /// Also report distances to the top eigenspace of the full graph.
    #[arg(long)]
    spectral: bool,
}

#[derive(Args)]
struct SpectralArgs {
    #[command(flatten)]
    data: DataArgs,
    #[arg(long, default_value = "AugNormAdj")]
    normalization: NormalizationScheme,
    #[arg(long, default_value_t = DEFAULT_CLUSTER_TOL)]
    tol: f64,
    /// Include the top-eigenspace basis in the report.
    #[arg(long)]
    with_basis: bool,
    /// Check the resistance bound over every connected node pair.
    #[arg(long)]
    resistance: bool,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Args)]
struct TheoremArgs {
    #[arg(long, default_value_t = 50)]
    graphs: usize,
    #[arg(long, default_value_t = 15)]
    max_nodes: usize,
    #[arg(long, default_value_t = 0.3)]
    edge_prob: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum AblationKind {
    DropoutVsDropedge,
    Layerwise,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, value_enum)]
    kind: AblationKind,
    #[command(flatten)]
    run: RunArgs,
}

enum CliError {
    Usage(String),
    Run(anyhow::Error),
}

impl CliError {
    fn usage(e: Error) -> Self {
        CliError::Usage(e.to_string())
    }
}

impl From<anyhow::Error> for CliError {
    fn from(e: anyhow::Error) -> Self {
        CliError::Run(e)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Run(e.into())
    }
}

/// Writes `value` as `dir/name` when an output directory was given.
fn write_json<T: Serialize>(value: &T, dir: Option<&Path>, name: &str) -> Result<()> {
    let Some(dir) = dir else {
        return Ok(());
    };
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let path = dir.join(name);
    fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    Ok(())
}

fn save_run(report: &RunReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    write_metrics_csv(report, dir.join("metrics.csv"))?;
    write_summary_json(report, dir.join("summary.json"))?;
    Ok(())
}

fn load(source: &DataSource) -> Result<Graph> {
    if let DataSource::Dir(dir) = source {
        log::info!("loading dataset from {}", dir.display());
    }
    Ok(load_dataset(source)?)
}

fn cmd_train(args: &RunArgs) -> Result<(), CliError> {
    let cfg = args.train_config()?;
    let graph = load(&cfg.data)?;
    let report = Trainer::new(cfg.clone(), graph)?.run()?;
    if let Some(dir) = &cfg.out_dir {
        save_run(&report, dir)?;
    }
    println!(
        "best epoch {} val acc {:.4} test acc {:.4} ({:.1}s)",
        report.best_epoch, report.best_val_acc, report.test_acc, report.wall_seconds
    );
    Ok(())
}

fn cmd_probe(args: &ProbeArgs) -> Result<(), CliError> {
    let train = args.run.train_config()?;
    let mut cfg = ProbeConfig::new(train);
    cfg.first_layer = args.first_layer;
    if let Some(last) = args.last_layer {
        cfg.last_layer = last;
    }
    cfg.probe_epochs = args.probe_epochs;
    cfg.spectral = args.spectral;
    if cfg.spectral && !cfg.train.model.scheme.is_symmetric() {
        return Err(CliError::Usage(format!(
            "--spectral needs a symmetric normalization, not {}",
            cfg.train.model.scheme
        )));
    }
    let graph = load(&cfg.train.data)?;
    let report = oversmoothing_probe(&cfg, graph).map_err(|e| match e {
        Error::Config(_) => CliError::usage(e),
        other => other.into(),
    })?;
    for (name, snap) in [("before", &report.before), ("after", &report.after)] {
        let cells: Vec<String> = snap
            .layers
            .iter()
            .zip(&snap.distances)
            .map(|(l, d)| format!("{l}:{d:.4e}"))
            .collect();
        println!("{name} ({} epochs): {}", snap.epochs_trained, cells.join(" "));
    }
    write_json(&report, cfg.train.out_dir.as_deref(), "probe.json")?;
    Ok(())
}

#[derive(Serialize)]
struct SpectralOutput {
    nodes: usize,
    edges: usize,
    normalization: NormalizationScheme,
    eigenvalues: Vec<f64>,
    top_multiplicity: usize,
    second_largest: Option<f64>,
    component_count: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    basis: Option<dropedge_core::Matrix>,
    #[serde(skip_serializing_if = "Option::is_none")]
    resistance_bound: Option<dropedge_core::spectral::ResistanceBoundReport>,
}

fn cmd_spectral(args: &SpectralArgs) -> Result<(), CliError> {
    if !args.normalization.is_symmetric() {
        return Err(CliError::Usage(format!(
            "{} is not symmetric; spectral analysis needs FirstOrderGCN, AugNormAdj or BingGeNormAdj",
            args.normalization
        )));
    }
    let graph = load(&args.data.source())?;
    let a_hat = normalize(graph.adjacency(), args.normalization)?;
    let report = analyze(&a_hat, args.tol)?;
    let resistance_bound = if args.resistance {
        Some(verify_resistance_bound(graph.adjacency())?)
    } else {
        None
    };
    println!(
        "N={} M={} lambda={} components={}",
        graph.n_nodes(),
        report.top_multiplicity,
        report
            .second_largest
            .map_or_else(|| "none".to_string(), |l| format!("{l:.6}")),
        report.component_count
    );
    if let Some(rb) = &resistance_bound {
        println!(
            "resistance bound: {} pairs, {} violations, worst margin {:.3e}",
            rb.pairs_checked, rb.violations, rb.worst_margin
        );
    }
    let out = SpectralOutput {
        nodes: graph.n_nodes(),
        edges: graph.n_edges(),
        normalization: args.normalization,
        eigenvalues: report.eigenvalues,
        top_multiplicity: report.top_multiplicity,
        second_largest: report.second_largest,
        component_count: report.component_count,
        basis: args.with_basis.then_some(report.basis),
        resistance_bound,
    };
    write_json(&out, args.out_dir.as_deref(), "spectral.json")?;
    Ok(())
}

fn cmd_theorem(args: &TheoremArgs) -> Result<(), CliError> {
    if args.max_nodes < 2 {
        return Err(CliError::Usage("--max-nodes must be at least 2".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(args.seed);
    let mut reports = Vec::with_capacity(args.graphs);
    for _ in 0..args.graphs {
        let n = rng.random_range(2..=args.max_nodes);
        let a = random_connected(n, args.edge_prob, &mut rng);
        reports.push(theorem1_trajectory(&a, rng.random())?);
    }
    let failed: Vec<_> = reports.iter().filter(|r| !r.passed()).collect();
    println!(
        "{} trajectories, {} failed",
        reports.len(),
        failed.len()
    );
    for r in &failed {
        for v in &r.violations {
            println!("seed {}: {v}", r.seed);
        }
    }
    write_json(&reports, args.out_dir.as_deref(), "theorem.json")?;
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::Run(anyhow::anyhow!(
            "{} trajectories violated the checked properties",
            failed.len()
        )))
    }
}

fn cmd_ablate(args: &AblateArgs) -> Result<(), CliError> {
    let cfg = args.run.train_config()?;
    let graph = load(&cfg.data)?;
    let runs = match args.kind {
        AblationKind::DropoutVsDropedge => ablation_dropout_vs_dropedge(&cfg, &graph)?,
        AblationKind::Layerwise => ablation_layerwise(&cfg, &graph)?,
    };
    for run in &runs {
        let last = run.report.final_row();
        println!(
            "{:<10} final train loss {:.4} val loss {:.4} test acc {:.4}",
            run.label, last.train_loss, last.val_loss, run.report.test_acc
        );
        if let Some(dir) = &cfg.out_dir {
            save_run(&run.report, &dir.join(&run.label))?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();

    let result = match &cli.command {
        Command::Train(a) => cmd_train(a),
        Command::ProbeOversmoothing(a) => cmd_probe(a),
        Command::AnalyzeSpectral(a) => cmd_spectral(a),
        Command::TheoremCheck(a) => cmd_theorem(a),
        Command::Ablate(a) => cmd_ablate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Run(e)) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
