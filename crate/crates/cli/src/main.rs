//! splab: train, attack, and analyze toy models of superposition from the
//! command line.
//!
//! Exit codes: 0 on success, 1 on usage/configuration errors, 2 on runtime
//! failures. Long-running subcommands stream progress to stderr; results go
//! to stdout as JSON (reports) or land as files (checkpoints, CSV, DOT).

use clap::{Args, Parser, Subcommand};
use splab_core::attacks::{attack_batch, AttackConfig, AttackVariant};
use splab_core::config::RunConfig;
use splab_core::experiments::{
    analyze_interference_exploitation, export_exploitation_report, rows_from_csv,
    run_paired_robustness_experiment, run_sweep, superposition_number_line, SweepSpec,
};
use splab_core::io;
use splab_core::metrics::{
    build_graph, features_per_dimension, interference_matrix, DEFAULT_EDGE_THRESHOLD,
    DEFAULT_NODE_THRESHOLD,
};
use splab_core::numkit::Rng;
use splab_core::sae::{
    collect_activations, eval_sae, l0_ratio, standardize_like, standardize_with_mode, train_sae,
    ActivationDataset, SaeTrainConfig, SaeVariant, StandardizeMode,
};
use splab_core::toymodel::sample_batch;
use splab_core::training::{train_adversarial, train_standard, Optimizer, TrainConfig};
use std::path::PathBuf;

#[derive(Parser)]
#[command(
    name = "splab",
    version,
    about = "Toy-model laboratory for superposition and adversarial robustness",
    after_help = "Sweep CSV header:\n  \
        density,seed,robust,features_per_dimension,clean_loss,adv_loss,\
        relative_vulnerability,mean_offdiag,checkpoint\n\
        Thread count defaults to the SPLAB_THREADS environment variable."
)]
struct Cli {
    /// TOML run configuration supplying defaults (see `config print-defaults`).
    #[arg(long, global = true, value_name = "FILE")]
    config: Option<PathBuf>,

    /// Worker threads for sweeps (default: SPLAB_THREADS or all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a standard toy model and save its checkpoint.
    Train(TrainArgs),
    /// Adversarially train a toy model (mixture of clean and attacked batches).
    Advtrain(AdvTrainArgs),
    /// Evaluate an attack against a checkpointed model.
    Attack(AttackArgs),
    /// Density sweep of standard models: CSV + manifest + checkpoints.
    Sweep(SweepArgs),
    /// Paired sweep: standard + adversarially trained model per density.
    PairedSweep(SweepArgs),
    /// Export interference graph (DOT + JSON) and heatmap; with a robust
    /// counterpart, the clean/adversarial exploitation quadruple.
    Graph(GraphArgs),
    /// Train a sparse autoencoder on toy-model or ingested activations.
    SaeTrain(SaeTrainArgs),
    /// Evaluate a sparse autoencoder (MSE, L0, dead fraction).
    SaeEval(SaeEvalArgs),
    /// Ratio of SAE L0 on attacked vs clean inputs.
    L0Ratio(L0RatioArgs),
    /// Superposition number-line bundle from a (paired) sweep directory.
    Report(ReportArgs),
    /// Configuration inspection.
    Config(ConfigArgs),
}

#[derive(Args)]
struct ShapeArgs {
    /// Number of input features n.
    #[arg(long)]
    n_features: Option<usize>,
    /// Number of hidden dimensions m.
    #[arg(long)]
    n_hidden: Option<usize>,
}

#[derive(Args)]
struct TrainArgs {
    /// Feature density (probability a feature is active), in (0, 1].
    #[arg(long)]
    density: f64,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// adam | sgd
    #[arg(long)]
    optimizer: Option<String>,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Checkpoint output path.
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    /// Suppress progress lines on stderr.
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct AdvTrainArgs {
    #[command(flatten)]
    train: TrainArgs,
    /// Mixture weight on the clean loss term.
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    attack: AttackFlagArgs,
}

#[derive(Args)]
struct AttackFlagArgs {
    /// gradient | elhage | random
    #[arg(long, value_name = "VARIANT")]
    variant: Option<String>,
    /// ε as a fraction of the average input norm.
    #[arg(long)]
    eps_frac: Option<f64>,
    /// Pre-attack Gaussian jitter relative to ‖x‖₂.
    #[arg(long)]
    noise_scale: Option<f64>,
}

#[derive(Args)]
struct AttackArgs {
    /// Toy-model checkpoint to attack.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[command(flatten)]
    attack: AttackFlagArgs,
    /// Density of the evaluation batch.
    #[arg(long, default_value_t = 1.0)]
    density: f64,
    #[arg(long, default_value_t = 1024)]
    eval_batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SweepArgs {
    /// Output directory (created if missing; reruns resume from checkpoints).
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Number of log-spaced densities.
    #[arg(long)]
    densities: Option<usize>,
    /// Explicit comma-separated density list (overrides --densities).
    #[arg(long, value_name = "LIST")]
    density_list: Option<String>,
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    d_min: Option<f64>,
    /// Master seed for the whole sweep.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    eval_batch: Option<usize>,
    #[command(flatten)]
    shape: ShapeArgs,
    /// Standard-training step count override.
    #[arg(long)]
    steps: Option<usize>,
    /// Adversarial-training step count override (paired-sweep only).
    #[arg(long)]
    adv_steps: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[command(flatten)]
    attack: AttackFlagArgs,
}

#[derive(Args)]
struct GraphArgs {
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    /// Robust counterpart; triggers the exploitation quadruple.
    #[arg(long, value_name = "FILE")]
    robust_model: Option<PathBuf>,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    #[arg(long, default_value_t = DEFAULT_NODE_THRESHOLD)]
    node_threshold: f64,
    #[arg(long, default_value_t = DEFAULT_EDGE_THRESHOLD)]
    edge_threshold: f64,
    /// Density for the highlight batch (quadruple only).
    #[arg(long, default_value_t = 0.2)]
    density: f64,
    #[arg(long, default_value_t = 256)]
    eval_batch: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    attack: AttackFlagArgs,
}

#[derive(Args)]
struct ActivationSourceArgs {
    /// Activation dump (.spac) to ingest.
    #[arg(long, value_name = "FILE")]
    activations: Option<PathBuf>,
    /// Toy-model checkpoint to collect activations from.
    #[arg(long, value_name = "FILE")]
    model: Option<PathBuf>,
    /// Density of the sampled inputs (with --model).
    #[arg(long)]
    density: Option<f64>,
    /// Number of samples to collect (with --model).
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Args)]
struct SaeTrainArgs {
    #[command(flatten)]
    source: ActivationSourceArgs,
    /// topk | l1
    #[arg(long)]
    variant: Option<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    k_aux: Option<usize>,
    #[arg(long)]
    aux_weight: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    steps: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    #[arg(long)]
    expansion: Option<usize>,
    /// Standardize with one global scalar instead of per-dimension stats.
    #[arg(long)]
    global_standardize: bool,
    #[arg(long, value_name = "FILE")]
    out: PathBuf,
    #[arg(long)]
    quiet: bool,
}

#[derive(Args)]
struct SaeEvalArgs {
    #[arg(long, value_name = "FILE")]
    sae: PathBuf,
    #[command(flatten)]
    source: ActivationSourceArgs,
}

#[derive(Args)]
struct L0RatioArgs {
    #[arg(long, value_name = "FILE")]
    sae: PathBuf,
    /// Toy-model checkpoint whose inputs get attacked.
    #[arg(long, value_name = "FILE")]
    model: PathBuf,
    #[arg(long)]
    density: f64,
    #[arg(long, default_value_t = 10_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    attack: AttackFlagArgs,
}

#[derive(Args)]
struct ReportArgs {
    /// Sweep output directory (holding sweep.csv and checkpoints).
    #[arg(long, value_name = "DIR")]
    sweep_dir: PathBuf,
    #[arg(long, value_name = "DIR")]
    out: PathBuf,
    /// Comma-separated densities whose graphs get embedded.
    #[arg(long, value_name = "LIST")]
    select: Option<String>,
}

#[derive(Args)]
struct ConfigArgs {
    #[command(subcommand)]
    action: ConfigAction,
}

#[derive(Subcommand)]
enum ConfigAction {
    /// Print the full default configuration as TOML.
    PrintDefaults,
}

// ── Error / exit-code plumbing ───────────────────────────────────────────────

enum CliError {
    Usage(String),
    Runtime(splab_core::Error),
}

impl From<splab_core::Error> for CliError {
    fn from(e: splab_core::Error) -> Self {
        use splab_core::Error::*;
        match e {
            InvalidConfig(_) | InvalidDensity(_) | ConfigParse(_) => CliError::Usage(e.to_string()),
            other => CliError::Runtime(other),
        }
    }
}

type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            use clap::error::ErrorKind;
            if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) {
                print!("{e}");
                std::process::exit(0);
            }
            eprint!("{e}");
            std::process::exit(1);
        }
    };
    configure_threads(cli.threads);
    match dispatch(cli) {
        Ok(()) => {}
        Err(CliError::Usage(msg)) => {
            eprintln!("usage error: {msg}");
            std::process::exit(1);
        }
        Err(CliError::Runtime(e)) => {
            eprintln!("error: {e}");
            std::process::exit(2);
        }
    }
}

fn configure_threads(flag: Option<usize>) {
    let n = flag.or_else(|| {
        std::env::var("SPLAB_THREADS")
            .ok()
            .and_then(|v| v.parse().ok())
    });
    if let Some(n) = n {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
}

fn load_config(path: &Option<PathBuf>) -> CliResult<RunConfig> {
    match path {
        Some(p) => Ok(RunConfig::load(p)?),
        None => Ok(RunConfig::default()),
    }
}

fn parse_optimizer(s: &str) -> CliResult<Optimizer> {
    match s {
        "adam" => Ok(Optimizer::default()),
        "sgd" => Ok(Optimizer::Sgd),
        other => Err(usage(format!("unknown optimizer '{other}' (adam | sgd)"))),
    }
}

fn parse_variant(s: &str) -> CliResult<AttackVariant> {
    match s {
        "gradient" => Ok(AttackVariant::Gradient),
        "elhage" => Ok(AttackVariant::Elhage),
        "random" => Ok(AttackVariant::Random),
        other => Err(usage(format!(
            "unknown attack variant '{other}' (gradient | elhage | random)"
        ))),
    }
}

fn apply_attack_flags(base: AttackConfig, flags: &AttackFlagArgs) -> CliResult<AttackConfig> {
    let mut cfg = base;
    if let Some(v) = &flags.variant {
        cfg.variant = parse_variant(v)?;
    }
    if let Some(e) = flags.eps_frac {
        cfg.epsilon_fraction = e;
    }
    if let Some(n) = flags.noise_scale {
        cfg.noise_scale = n;
    }
    Ok(cfg)
}

fn print_json<T: serde::Serialize>(value: &T) {
    println!("{}", serde_json::to_string_pretty(value).expect("report serializes"));
}

fn dispatch(cli: Cli) -> CliResult<()> {
    let run_cfg = load_config(&cli.config)?;
    match cli.command {
        Command::Train(args) => cmd_train(&run_cfg, args),
        Command::Advtrain(args) => cmd_advtrain(&run_cfg, args),
        Command::Attack(args) => cmd_attack(&run_cfg, args),
        Command::Sweep(args) => cmd_sweep(&run_cfg, args, false),
        Command::PairedSweep(args) => cmd_sweep(&run_cfg, args, true),
        Command::Graph(args) => cmd_graph(&run_cfg, args),
        Command::SaeTrain(args) => cmd_sae_train(&run_cfg, args),
        Command::SaeEval(args) => cmd_sae_eval(args),
        Command::L0Ratio(args) => cmd_l0_ratio(&run_cfg, args),
        Command::Report(args) => cmd_report(args),
        Command::Config(args) => match args.action {
            ConfigAction::PrintDefaults => {
                print!("{}", RunConfig::default().to_toml());
                Ok(())
            }
        },
    }
}

// ── Commands ─────────────────────────────────────────────────────────────────

fn resolve_train_cfg(base: TrainConfig, args: &TrainArgs) -> CliResult<TrainConfig> {
    let mut cfg = base;
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    if let Some(lr) = args.lr {
        cfg.learning_rate = lr;
    }
    if let Some(b) = args.batch {
        cfg.batch_size = b;
    }
    if let Some(opt) = &args.optimizer {
        cfg.optimizer = parse_optimizer(opt)?;
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn shape_of(run_cfg: &RunConfig, shape: &ShapeArgs) -> (usize, usize) {
    (
        shape.n_features.unwrap_or(run_cfg.model.n_features),
        shape.n_hidden.unwrap_or(run_cfg.model.n_hidden),
    )
}

fn progress_hook(quiet: bool) -> Option<splab_core::training::ProgressFn<'static>> {
    if quiet {
        None
    } else {
        Some(&|step, clean, adv| match adv {
            Some(a) => eprintln!("step {step}: clean {clean:.6} adv {a:.6}"),
            None => eprintln!("step {step}: clean {clean:.6}"),
        })
    }
}

fn cmd_train(run_cfg: &RunConfig, args: TrainArgs) -> CliResult<()> {
    let mut cfg = resolve_train_cfg(run_cfg.standard_train, &args)?;
    cfg.attack = None;
    let (n, m) = shape_of(run_cfg, &args.shape);
    let (model, report) = train_standard(&cfg, n, m, args.density, progress_hook(args.quiet))?;
    io::save_toy_checkpoint(&args.out, &model)?;
    print_json(&serde_json::json!({
        "checkpoint": args.out.display().to_string(),
        "density": args.density,
        "seed": cfg.seed,
        "final_clean_loss": report.final_clean_loss,
        "features_per_dimension": features_per_dimension(&model),
    }));
    Ok(())
}

fn cmd_advtrain(run_cfg: &RunConfig, args: AdvTrainArgs) -> CliResult<()> {
    let mut cfg = resolve_train_cfg(run_cfg.adversarial_train.to_train_config(), &args.train)?;
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    cfg.attack = Some(apply_attack_flags(
        cfg.attack.unwrap_or(run_cfg.adversarial_train.attack),
        &args.attack,
    )?);
    let (n, m) = shape_of(run_cfg, &args.train.shape);
    let (model, report) =
        train_adversarial(&cfg, n, m, args.train.density, progress_hook(args.train.quiet))?;
    io::save_toy_checkpoint(&args.train.out, &model)?;
    print_json(&serde_json::json!({
        "checkpoint": args.train.out.display().to_string(),
        "density": args.train.density,
        "seed": cfg.seed,
        "alpha": cfg.alpha,
        "final_clean_loss": report.final_clean_loss,
        "final_adv_loss": report.final_adv_loss,
        "features_per_dimension": features_per_dimension(&model),
    }));
    Ok(())
}

fn cmd_attack(run_cfg: &RunConfig, args: AttackArgs) -> CliResult<()> {
    let model = io::load_toy_checkpoint(&args.model)?;
    let cfg = apply_attack_flags(run_cfg.attack, &args.attack)?;
    let mut rng = Rng::new(args.seed, 100);
    let batch = sample_batch(&mut rng, args.eval_batch, model.n_features, args.density)?;
    let outcome = attack_batch(&model, &batch, &cfg, &mut rng)?;
    let mean_norm = outcome.perturbation_norms.as_slice().iter().sum::<f64>()
        / outcome.perturbation_norms.len() as f64;
    let max_norm = outcome
        .perturbation_norms
        .as_slice()
        .iter()
        .fold(0.0f64, |a, &b| a.max(b));
    print_json(&serde_json::json!({
        "model": args.model.display().to_string(),
        "variant": cfg.variant.to_string(),
        "density": args.density,
        "epsilon": outcome.epsilon,
        "clean_loss": outcome.clean_loss,
        "adv_loss": outcome.adv_loss,
        "mean_perturbation_norm": mean_norm,
        "max_perturbation_norm": max_norm,
        "masking_events": outcome.masking_events,
    }));
    Ok(())
}

fn cmd_sweep(run_cfg: &RunConfig, args: SweepArgs, paired: bool) -> CliResult<()> {
    let mut cfg = run_cfg.clone();
    if let Some(n) = args.densities {
        cfg.sweep.n_densities = n;
    }
    if let Some(list) = &args.density_list {
        cfg.sweep.densities = Some(parse_density_list(list)?);
    }
    if let Some(d) = args.d_max {
        cfg.sweep.density_max = d;
    }
    if let Some(d) = args.d_min {
        cfg.sweep.density_min = d;
    }
    if let Some(s) = args.seed {
        cfg.sweep.master_seed = s;
    }
    if let Some(b) = args.eval_batch {
        cfg.sweep.eval_batch_size = b;
    }
    if let Some(n) = args.shape.n_features {
        cfg.model.n_features = n;
    }
    if let Some(m) = args.shape.n_hidden {
        cfg.model.n_hidden = m;
    }
    if let Some(s) = args.steps {
        cfg.standard_train.steps = s;
    }
    if let Some(s) = args.adv_steps {
        cfg.adversarial_train.steps = s;
    }
    if let Some(a) = args.alpha {
        cfg.adversarial_train.alpha = a;
    }
    cfg.attack = apply_attack_flags(cfg.attack, &args.attack)?;
    cfg.adversarial_train.attack = cfg.attack;

    let spec = SweepSpec::from_run_config(&cfg, paired)?;
    eprintln!(
        "{} sweep: {} densities, n={} m={}, out {}",
        if paired { "paired" } else { "standard" },
        spec.densities.len(),
        spec.n_features,
        spec.n_hidden,
        args.out.display()
    );
    if paired {
        let out = run_paired_robustness_experiment(&spec, &args.out)?;
        print_json(&serde_json::json!({
            "out_dir": args.out.display().to_string(),
            "csv": out.sweep.csv_path.display().to_string(),
            "manifest": out.sweep.manifest_path.display().to_string(),
            "pairs": out.pairs_path.display().to_string(),
            "rows": out.sweep.rows.len(),
            "failures": out.sweep.failures.len(),
        }));
    } else {
        let out = run_sweep(&spec, &args.out)?;
        print_json(&serde_json::json!({
            "out_dir": args.out.display().to_string(),
            "csv": out.csv_path.display().to_string(),
            "manifest": out.manifest_path.display().to_string(),
            "rows": out.rows.len(),
            "failures": out.failures.len(),
        }));
    }
    Ok(())
}

fn parse_density_list(list: &str) -> CliResult<Vec<f64>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|e| usage(format!("bad density '{s}': {e}")))
        })
        .collect()
}

fn cmd_graph(run_cfg: &RunConfig, args: GraphArgs) -> CliResult<()> {
    let model = io::load_toy_checkpoint(&args.model)?;
    std::fs::create_dir_all(&args.out).map_err(splab_core::Error::Io)?;
    match &args.robust_model {
        None => {
            let graph = build_graph(&model, args.node_threshold, args.edge_threshold);
            io::atomic_write(
                &args.out.join("graph.dot"),
                io::graph_to_dot(&graph).as_bytes(),
            )?;
            io::write_json(&args.out.join("graph.json"), &graph)?;
            io::write_matrix_csv(&args.out.join("interference.csv"), &interference_matrix(&model))?;
            print_json(&serde_json::json!({
                "out_dir": args.out.display().to_string(),
                "nodes": graph.nodes.len(),
                "edges": graph.edges.len(),
                "features_per_dimension": features_per_dimension(&model),
            }));
        }
        Some(robust_path) => {
            let robust = io::load_toy_checkpoint(robust_path)?;
            let cfg = apply_attack_flags(run_cfg.attack, &args.attack)?;
            let mut rng = Rng::new(args.seed, 101);
            let batch = sample_batch(&mut rng, args.eval_batch, model.n_features, args.density)?;
            let report = analyze_interference_exploitation(&model, &robust, &batch, &cfg, &mut rng)?;
            export_exploitation_report(&report, &model, &robust, &args.out)?;
            print_json(&serde_json::json!({
                "out_dir": args.out.display().to_string(),
                "overlay_stats": report.overlay_stats,
            }));
        }
    }
    Ok(())
}

/// Raw (unstandardized) activations per the source flags.
fn load_raw_activations(source: &ActivationSourceArgs) -> CliResult<ActivationDataset> {
    match (&source.activations, &source.model) {
        (Some(path), None) => Ok(io::read_activation_dump(path)?),
        (None, Some(model_path)) => {
            let model = io::load_toy_checkpoint(model_path)?;
            let density = source
                .density
                .ok_or_else(|| usage("--density is required with --model"))?;
            let mut rng = Rng::new(source.seed, 102);
            let batch = sample_batch(&mut rng, source.samples, model.n_features, density)?;
            Ok(collect_activations(&model, &batch.data))
        }
        (Some(_), Some(_)) => Err(usage("--activations and --model are mutually exclusive")),
        (None, None) => Err(usage("one of --activations or --model is required")),
    }
}

fn resolve_sae_cfg(base: SaeTrainConfig, args: &SaeTrainArgs) -> CliResult<SaeTrainConfig> {
    let mut cfg = base;
    if let Some(v) = &args.variant {
        cfg.variant = match v.as_str() {
            "topk" => SaeVariant::TopK {
                k: 16,
                k_aux: 512,
                aux_weight: 1.0,
            },
            "l1" => SaeVariant::L1 { lambda: 3e-4 },
            other => return Err(usage(format!("unknown SAE variant '{other}' (topk | l1)"))),
        };
    }
    cfg.variant = match cfg.variant {
        SaeVariant::TopK { k, k_aux, aux_weight } => SaeVariant::TopK {
            k: args.k.unwrap_or(k),
            k_aux: args.k_aux.unwrap_or(k_aux),
            aux_weight: args.aux_weight.unwrap_or(aux_weight),
        },
        SaeVariant::L1 { lambda } => SaeVariant::L1 {
            lambda: args.lambda.unwrap_or(lambda),
        },
    };
    if let Some(s) = args.steps {
        cfg.steps = s;
    }
    if let Some(lr) = args.lr {
        cfg.learning_rate = lr;
    }
    if let Some(b) = args.batch {
        cfg.batch_size = b;
    }
    if let Some(e) = args.expansion {
        cfg.expansion_factor = e;
    }
    cfg.seed = args.source.seed;
    Ok(cfg)
}

fn cmd_sae_train(run_cfg: &RunConfig, args: SaeTrainArgs) -> CliResult<()> {
    let raw = load_raw_activations(&args.source)?;
    let mode = if args.global_standardize {
        StandardizeMode::GlobalScalar
    } else {
        StandardizeMode::PerDimension
    };
    let ds = standardize_with_mode(&raw, mode)?;
    let cfg = resolve_sae_cfg(run_cfg.sae, &args)?;
    let progress: splab_core::sae::SaeProgressFn = &|step, loss| {
        eprintln!("sae step {step}: loss {loss:.6}");
    };
    let sae = train_sae(&ds, &cfg, if args.quiet { None } else { Some(progress) })?;
    io::save_sae_checkpoint(&args.out, &sae)?;
    let report = eval_sae(&sae, &ds);
    print_json(&serde_json::json!({
        "checkpoint": args.out.display().to_string(),
        "input_dim": sae.input_dim,
        "dict_size": sae.dict_size,
        "train_mse": report.mse,
        "train_mean_l0": report.mean_l0,
        "dead_fraction": report.dead_fraction,
    }));
    Ok(())
}

fn cmd_sae_eval(args: SaeEvalArgs) -> CliResult<()> {
    let sae = io::load_sae_checkpoint(&args.sae)?;
    let raw = load_raw_activations(&args.source)?;
    let stats = sae
        .standardization
        .clone()
        .ok_or_else(|| usage("this SAE checkpoint carries no standardization stats"))?;
    if raw.dim() != sae.input_dim {
        return Err(CliError::Runtime(splab_core::Error::ShapeMismatch(format!(
            "SAE expects dim {}, activations have dim {}",
            sae.input_dim,
            raw.dim()
        ))));
    }
    let ds = standardize_like(&raw, &stats);
    let report = eval_sae(&sae, &ds);
    print_json(&serde_json::json!({
        "sae": args.sae.display().to_string(),
        "n_samples": ds.n_samples(),
        "mse": report.mse,
        "mean_l0": report.mean_l0,
        "dead_fraction": report.dead_fraction,
    }));
    Ok(())
}

fn cmd_l0_ratio(run_cfg: &RunConfig, args: L0RatioArgs) -> CliResult<()> {
    let sae = io::load_sae_checkpoint(&args.sae)?;
    let model = io::load_toy_checkpoint(&args.model)?;
    let stats = sae
        .standardization
        .clone()
        .ok_or_else(|| usage("this SAE checkpoint carries no standardization stats"))?;
    let cfg = apply_attack_flags(run_cfg.attack, &args.attack)?;
    let mut rng = Rng::new(args.seed, 103);
    let batch = sample_batch(&mut rng, args.samples, model.n_features, args.density)?;
    let outcome = attack_batch(&model, &batch, &cfg, &mut rng)?;
    let clean = standardize_like(&collect_activations(&model, &batch.data), &stats);
    let adv = standardize_like(&collect_activations(&model, &outcome.x_adv), &stats);
    let ratio = l0_ratio(&sae, &clean, &adv)?;
    let clean_l0 = eval_sae(&sae, &clean).mean_l0;
    let adv_l0 = eval_sae(&sae, &adv).mean_l0;
    print_json(&serde_json::json!({
        "sae": args.sae.display().to_string(),
        "model": args.model.display().to_string(),
        "variant": cfg.variant.to_string(),
        "density": args.density,
        "clean_mean_l0": clean_l0,
        "adv_mean_l0": adv_l0,
        "l0_ratio": ratio,
    }));
    Ok(())
}

fn cmd_report(args: ReportArgs) -> CliResult<()> {
    let csv_text =
        std::fs::read_to_string(args.sweep_dir.join("sweep.csv")).map_err(splab_core::Error::Io)?;
    let rows = rows_from_csv(&csv_text)?;
    let selected = match &args.select {
        Some(list) => parse_density_list(list)?,
        None => Vec::new(),
    };
    let report = superposition_number_line(&rows, &selected, &args.sweep_dir, &args.out)?;
    print_json(&serde_json::json!({
        "out_dir": args.out.display().to_string(),
        "points": report.points.len(),
        "graphs": report.graphs.len(),
    }));
    Ok(())
}
