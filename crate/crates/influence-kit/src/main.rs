//! Command-line front end.
//!
//! Thin orchestration only: every command resolves its flags against an
//! optional JSON config file (flag > file > default), runs one library
//! workflow, writes pretty-printed sorted-key JSON (and optionally CSV)
//! artifacts that embed the resolved config, and prints a single-line
//! JSON headline to stdout. Exit codes: 0 ok, 1 usage or data problems,
//! 2 numerical failures.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::{json, Map, Value};

use influence_kit::applications::{
    check_nonconvergence_identity, run_loo_validation, run_mislabel_triage, run_smooth_hinge_sweep,
    run_training_attack, AttackConfig, LooPredictor, SweepConfig, TriageRun, TriageStrategy,
};
use influence_kit::artifact::{load_model, ModelArtifact};
use influence_kit::data::{parse_csv, parse_svmlight, write_csv, Dataset};
use influence_kit::influence::{influence_up_loss_batch, self_influence_batch, InfluenceReport};
use influence_kit::report::{to_sorted_line, to_sorted_pretty, write_csv_table};
use influence_kit::synth::{self, SynthRole};
use influence_kit::trainer::{train, TrainConfig, TrainMethod};
use influence_kit::{Error, Family, IhvpConfig, IhvpMethod, ModelSpec, Result};

#[derive(Parser)]
#[command(
    name = "influence-kit",
    version,
    about = "Influence-function analysis for convex classifiers"
)]
struct Cli {
    /// Cap worker threads (env fallback: INFLUENCE_KIT_THREADS).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// JSON file of flag defaults; explicit flags win.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Omit the generated_at_unix field so reruns are byte-identical.
    #[arg(long, global = true)]
    no_timestamp: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model and write the artifact JSON.
    Train(TrainArgs),
    /// Score every training point's influence on one test point.
    Influence(InfluenceArgs),
    /// Rank training points by self-influence.
    SelfInfluence(SelfInfluenceArgs),
    /// Compare influence predictions against leave-one-out retraining.
    LooValidate(LooValidateArgs),
    /// Sweep the smooth-hinge temperature against true-hinge deltas.
    SweepHinge(SweepHingeArgs),
    /// Simulate flipped-label triage with a chosen inspection strategy.
    FixLabels(FixLabelsArgs),
    /// Run the quantization-preserving training-set attack.
    Attack(AttackArgs),
    /// Check the damped Newton-step identity on an early-stopped model.
    IdentityCheck(IdentityCheckArgs),
}

#[derive(Args)]
struct TrainArgs {
    /// Data file, or synth:<kind>:k=v,... pseudo-path.
    #[arg(long)]
    data: Option<String>,
    /// csv or svmlight.
    #[arg(long)]
    format: Option<String>,
    /// Family: binary_logistic, multinomial_logistic, smooth_hinge[:t],
    /// ridge.
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    l2: Option<f64>,
    /// Gradient-norm stopping tolerance.
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    /// Output model path.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct InfluenceArgs {
    /// Trained model artifact path.
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    train_data: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    test_data: Option<String>,
    #[arg(long)]
    test_idx: Option<usize>,
    /// explicit, cg, or lissa.
    #[arg(long)]
    ihvp: Option<String>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lissa_depth: Option<usize>,
    #[arg(long)]
    lissa_repeats: Option<usize>,
    #[arg(long)]
    lissa_scale: Option<f64>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV score table.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct SelfInfluenceArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    train_data: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    ihvp: Option<String>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lissa_depth: Option<usize>,
    #[arg(long)]
    lissa_repeats: Option<usize>,
    #[arg(long)]
    lissa_scale: Option<f64>,
    #[arg(long)]
    cg_tol: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct LooValidateArgs {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    test_data: Option<String>,
    #[arg(long)]
    test_idx: Option<usize>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    ihvp: Option<String>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    lissa_depth: Option<usize>,
    #[arg(long)]
    lissa_repeats: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    /// linearized or newton_step.
    #[arg(long)]
    predictor: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV of (train_idx, predicted, actual) pairs.
    #[arg(long)]
    out_scatter: Option<PathBuf>,
}

#[derive(Args)]
struct SweepHingeArgs {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    test_data: Option<String>,
    #[arg(long)]
    test_idx: Option<usize>,
    /// Comma-separated smoothing temperatures.
    #[arg(long)]
    temperatures: Option<String>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    top_k: Option<usize>,
    /// Skip the zero-filled-subgradient diagnostic.
    #[arg(long)]
    no_zero_fill: bool,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV of per-temperature correlations.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct FixLabelsArgs {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    flip_frac: Option<f64>,
    /// influence, loss, or random.
    #[arg(long)]
    strategy: Option<String>,
    #[arg(long)]
    repeats: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Comma-separated inspection fractions.
    #[arg(long)]
    grid: Option<String>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV of the mean curve.
    #[arg(long)]
    out_csv: Option<PathBuf>,
}

#[derive(Args)]
struct AttackArgs {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    format: Option<String>,
    /// Target test points (file or synth:attack:... pseudo-path).
    #[arg(long)]
    targets: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    l2: Option<f64>,
    #[arg(long)]
    tol: Option<f64>,
    #[arg(long)]
    max_iters: Option<usize>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Attack iterations.
    #[arg(long)]
    iters: Option<usize>,
    /// Number of training points the attack may perturb.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Optional CSV per-iteration log.
    #[arg(long)]
    out_csv: Option<PathBuf>,
    /// Optional CSV dump of the poisoned training set.
    #[arg(long)]
    out_poisoned: Option<PathBuf>,
}

#[derive(Args)]
struct IdentityCheckArgs {
    #[arg(long)]
    data: Option<String>,
    #[arg(long)]
    format: Option<String>,
    #[arg(long)]
    model: Option<String>,
    #[arg(long)]
    l2: Option<f64>,
    /// Train until the gradient norm first drops to this value.
    #[arg(long)]
    stop_grad_norm: Option<f64>,
    #[arg(long)]
    damping: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Comma-separated training indices to check.
    #[arg(long)]
    sample_points: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            if matches!(
                err.kind(),
                clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion
            ) {
                let _ = err.print();
                return ExitCode::SUCCESS;
            }
            eprintln!("{err}");
            return ExitCode::from(1);
        }
    };
    if let Err(err) = setup_threads(cli.threads) {
        eprintln!("error: {err}");
        return ExitCode::from(1);
    }
    let file = match FileConfig::load(cli.config.as_deref()) {
        Ok(file) => file,
        Err(err) => {
            eprintln!("error: {err}");
            return ExitCode::from(1);
        }
    };
    let is_train = matches!(cli.command, Command::Train(_));
    let stamp = if cli.no_timestamp {
        None
    } else {
        Some(unix_now())
    };
    let outcome = match cli.command {
        Command::Train(args) => cmd_train(args, &file, stamp),
        Command::Influence(args) => cmd_influence(args, &file, stamp),
        Command::SelfInfluence(args) => cmd_self_influence(args, &file, stamp),
        Command::LooValidate(args) => cmd_loo_validate(args, &file, stamp),
        Command::SweepHinge(args) => cmd_sweep_hinge(args, &file, stamp),
        Command::FixLabels(args) => cmd_fix_labels(args, &file, stamp),
        Command::Attack(args) => cmd_attack(args, &file, stamp),
        Command::IdentityCheck(args) => cmd_identity_check(args, &file, stamp),
    };
    match outcome {
        Ok(headline) => match to_sorted_line(&headline) {
            Ok(line) => {
                println!("{line}");
                ExitCode::SUCCESS
            }
            Err(err) => {
                eprintln!("error: {err}");
                ExitCode::from(1)
            }
        },
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(exit_code_for(&err, is_train))
        }
    }
}

/// Usage and data problems exit 1; numerical failures exit 2. Training
/// that runs out of iterations counts as numerical everywhere except
/// `train` itself, where a model that cannot be fit is the user's problem
/// statement failing, not an internal solver breakdown.
fn exit_code_for(err: &Error, command_is_train: bool) -> u8 {
    match err {
        Error::DidNotConverge { .. } if command_is_train => 1,
        Error::NotPositiveDefinite { .. }
        | Error::NegativeCurvature { .. }
        | Error::LissaDiverged { .. }
        | Error::DidNotConverge { .. }
        | Error::LineSearchFailed { .. }
        | Error::ConstantInput
        | Error::NonFinite { .. } => 2,
        _ => 1,
    }
}

/// Whole seconds since the Unix epoch; 0 if the clock reads pre-epoch.
fn unix_now() -> u64 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

fn setup_threads(flag: Option<usize>) -> Result<()> {
    let n = match flag {
        Some(n) => Some(n),
        None => match std::env::var("INFLUENCE_KIT_THREADS") {
            Ok(raw) => Some(raw.parse::<usize>().map_err(|_| Error::InvalidValue {
                what: "INFLUENCE_KIT_THREADS",
                message: format!("expected a positive integer, got {raw:?}"),
            })?),
            Err(_) => None,
        },
    };
    if let Some(n) = n {
        if n == 0 {
            return Err(Error::InvalidValue {
                what: "threads",
                message: "must be >= 1".into(),
            });
        }
        // Ignore "already initialized": tests may call main-equivalent
        // paths repeatedly in one process.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    Ok(())
}

/// Values from the optional `--config` JSON file, consulted when a flag
/// is absent.
struct FileConfig(Map<String, Value>);

impl FileConfig {
    fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(FileConfig(Map::new()));
        };
        let text = std::fs::read_to_string(path).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let value: Value = serde_json::from_str(&text).map_err(|e| Error::Schema {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        match value {
            Value::Object(map) => Ok(FileConfig(map)),
            _ => Err(Error::Schema {
                path: path.display().to_string(),
                message: "config file must be a JSON object of flag values".into(),
            }),
        }
    }

    fn get<T: serde::de::DeserializeOwned>(&self, key: &'static str) -> Result<Option<T>> {
        match self.0.get(key) {
            None => Ok(None),
            Some(v) => {
                serde_json::from_value(v.clone())
                    .map(Some)
                    .map_err(|e| Error::InvalidValue {
                        what: key,
                        message: format!("bad config-file value: {e}"),
                    })
            }
        }
    }
}

fn resolve<T: serde::de::DeserializeOwned>(
    flag: Option<T>,
    file: &FileConfig,
    key: &'static str,
    default: T,
) -> Result<T> {
    match flag {
        Some(v) => Ok(v),
        None => Ok(file.get(key)?.unwrap_or(default)),
    }
}

fn resolve_opt<T: serde::de::DeserializeOwned>(
    flag: Option<T>,
    file: &FileConfig,
    key: &'static str,
) -> Result<Option<T>> {
    match flag {
        Some(v) => Ok(Some(v)),
        None => file.get(key),
    }
}

fn resolve_required<T: serde::de::DeserializeOwned>(
    flag: Option<T>,
    file: &FileConfig,
    key: &'static str,
) -> Result<T> {
    resolve_opt(flag, file, key)?.ok_or(Error::InvalidValue {
        what: key,
        message: "required (pass the flag or set it in --config)".into(),
    })
}

fn parse_family(s: &str) -> Result<Family> {
    if let Some(t) = s.strip_prefix("smooth_hinge:") {
        let temperature: f64 = t.parse().map_err(|_| Error::InvalidValue {
            what: "model",
            message: format!("bad smooth_hinge temperature {t:?}"),
        })?;
        return Ok(Family::SmoothHinge { temperature });
    }
    match s {
        "binary_logistic" | "logistic" => Ok(Family::BinaryLogistic),
        "multinomial_logistic" | "multinomial" => Ok(Family::MultinomialLogistic),
        "smooth_hinge" => Ok(Family::SmoothHinge { temperature: 0.001 }),
        "hinge" => Ok(Family::Hinge),
        "ridge" => Ok(Family::Ridge),
        other => Err(Error::InvalidValue {
            what: "model",
            message: format!(
                "unknown family {other:?}; expected binary_logistic, \
                 multinomial_logistic, smooth_hinge[:t], hinge, or ridge"
            ),
        }),
    }
}

fn parse_ihvp_method(s: &str) -> Result<IhvpMethod> {
    match s {
        "explicit" => Ok(IhvpMethod::Explicit),
        "cg" => Ok(IhvpMethod::Cg),
        "lissa" => Ok(IhvpMethod::Lissa),
        other => Err(Error::InvalidValue {
            what: "ihvp",
            message: format!("unknown backend {other:?}; expected explicit, cg, or lissa"),
        }),
    }
}

fn parse_predictor(s: &str) -> Result<LooPredictor> {
    match s {
        "linearized" => Ok(LooPredictor::Linearized),
        "newton_step" => Ok(LooPredictor::NewtonStep),
        other => Err(Error::InvalidValue {
            what: "predictor",
            message: format!("unknown predictor {other:?}; expected linearized or newton_step"),
        }),
    }
}

fn parse_strategy(s: &str) -> Result<TriageStrategy> {
    match s {
        "influence" => Ok(TriageStrategy::Influence),
        "loss" => Ok(TriageStrategy::Loss),
        "random" => Ok(TriageStrategy::Random),
        other => Err(Error::InvalidValue {
            what: "strategy",
            message: format!("unknown strategy {other:?}; expected influence, loss, or random"),
        }),
    }
}

fn parse_f64_list(s: &str, what: &'static str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|part| {
            part.trim().parse::<f64>().map_err(|_| Error::InvalidValue {
                what,
                message: format!("bad number {part:?} in list"),
            })
        })
        .collect()
}

fn parse_usize_list(s: &str, what: &'static str) -> Result<Vec<usize>> {
    s.split(',')
        .map(|part| {
            part.trim()
                .parse::<usize>()
                .map_err(|_| Error::InvalidValue {
                    what,
                    message: format!("bad index {part:?} in list"),
                })
        })
        .collect()
}

fn load_data(path: &str, format: &str, role: SynthRole) -> Result<Dataset> {
    if synth::is_pseudo_path(path) {
        return synth::from_pseudo_path(path, role);
    }
    match format {
        "csv" => parse_csv(path),
        "svmlight" => parse_svmlight(path),
        other => Err(Error::InvalidValue {
            what: "format",
            message: format!("unknown format {other:?}; expected csv or svmlight"),
        }),
    }
}

/// Assemble the output document: resolved config plus the payload fields,
/// all under sorted keys. With the timestamp suppressed (--no-timestamp)
/// identical runs produce byte-identical reports.
fn output_doc(config: Map<String, Value>, payload: Value, stamp: Option<u64>) -> Value {
    let mut doc = match payload {
        Value::Object(map) => map,
        other => {
            let mut map = Map::new();
            map.insert("result".into(), other);
            map
        }
    };
    doc.insert("config".into(), Value::Object(config));
    if let Some(secs) = stamp {
        doc.insert("generated_at_unix".into(), json!(secs));
    }
    Value::Object(doc)
}

fn write_output(path: &Path, doc: &Value) -> Result<()> {
    let text = to_sorted_pretty(doc)?;
    std::fs::write(path, text).map_err(|e| Error::Io {
        path: path.display().to_string(),
        source: e,
    })
}

struct IhvpFlags {
    ihvp: Option<String>,
    damping: Option<f64>,
    seed: Option<u64>,
    lissa_depth: Option<usize>,
    lissa_repeats: Option<usize>,
    lissa_scale: Option<f64>,
    cg_tol: Option<f64>,
}

fn resolve_ihvp(
    flags: IhvpFlags,
    file: &FileConfig,
    config_echo: &mut Map<String, Value>,
) -> Result<IhvpConfig> {
    let method_name = resolve(flags.ihvp, file, "ihvp", "explicit".to_string())?;
    let mut config = IhvpConfig::default();
    config.method = parse_ihvp_method(&method_name)?;
    config.damping = resolve(flags.damping, file, "damping", config.damping)?;
    config.seed = resolve(flags.seed, file, "seed", config.seed)?;
    config.lissa_depth = resolve(flags.lissa_depth, file, "lissa_depth", config.lissa_depth)?;
    config.lissa_repeats = resolve(
        flags.lissa_repeats,
        file,
        "lissa_repeats",
        config.lissa_repeats,
    )?;
    config.lissa_scale = resolve_opt(flags.lissa_scale, file, "lissa_scale")?;
    config.cg_tol_residual = resolve(flags.cg_tol, file, "cg_tol", config.cg_tol_residual)?;
    config_echo.insert("ihvp".into(), json!(method_name));
    config_echo.insert("damping".into(), json!(config.damping));
    config_echo.insert("seed".into(), json!(config.seed));
    if config.method == IhvpMethod::Lissa {
        config_echo.insert("lissa_depth".into(), json!(config.lissa_depth));
        config_echo.insert("lissa_repeats".into(), json!(config.lissa_repeats));
        if let Some(scale) = config.lissa_scale {
            config_echo.insert("lissa_scale".into(), json!(scale));
        }
    }
    if config.method == IhvpMethod::Cg {
        config_echo.insert("cg_tol".into(), json!(config.cg_tol_residual));
    }
    Ok(config)
}

fn report_csv(report: &InfluenceReport, path: &Path) -> Result<()> {
    write_csv_table(
        &["train_idx", "i_up_loss", "predicted_loo_delta"],
        report.scores.iter().map(|s| {
            vec![
                s.train_idx.to_string(),
                format!("{}", s.i_up_loss),
                format!("{}", s.predicted_loo_delta),
            ]
        }),
        path,
    )
}

fn cmd_train(args: TrainArgs, file: &FileConfig, stamp: Option<u64>) -> Result<Value> {
    let data_path: String = resolve_required(args.data, file, "data")?;
    let format = resolve(args.format, file, "format", "csv".to_string())?;
    let family_name = resolve(args.model, file, "model", "binary_logistic".to_string())?;
    let l2 = resolve(args.l2, file, "l2", 0.01)?;
    let tol = resolve(args.tol, file, "tol", 1e-8)?;
    let max_iters = resolve(args.max_iters, file, "max_iters", 100)?;
    let out: PathBuf = resolve_required(args.out, file, "out")?;

    let spec = ModelSpec::new(parse_family(&family_name)?, l2)?;
    let data = load_data(&data_path, &format, SynthRole::Train)?;
    log::info!("training {} on {} examples", spec.family.name(), data.n());
    let config = TrainConfig {
        tol_grad: tol,
        max_iters,
        method: TrainMethod::NewtonCg,
        warm_start: None,
    };
    let artifact = train(&spec, &data, &config)?;

    let mut echo = Map::new();
    echo.insert("data".into(), json!(data_path));
    echo.insert("format".into(), json!(format));
    echo.insert("model".into(), json!(family_name));
    echo.insert("l2".into(), json!(l2));
    echo.insert("tol".into(), json!(tol));
    echo.insert("max_iters".into(), json!(max_iters));
    let doc = output_doc(echo, artifact.to_json_value(), stamp);
    write_output(&out, &doc)?;
    Ok(json!({
        "command": "train",
        "objective": artifact.train_meta.objective,
        "grad_norm": artifact.train_meta.grad_norm,
        "iterations": artifact.train_meta.iterations,
        "out": out.display().to_string(),
    }))
}

struct LoadedModel {
    artifact: ModelArtifact,
    data: Dataset,
}

fn load_model_and_data(
    model: Option<PathBuf>,
    train_data: Option<String>,
    format: Option<String>,
    file: &FileConfig,
    echo: &mut Map<String, Value>,
) -> Result<LoadedModel> {
    let model_path: PathBuf = resolve_required(model, file, "model")?;
    let data_path: String = resolve_required(train_data, file, "train_data")?;
    let format = resolve(format, file, "format", "csv".to_string())?;
    let artifact = load_model(&model_path)?;
    let data = load_data(&data_path, &format, SynthRole::Train)?;
    echo.insert("model".into(), json!(model_path.display().to_string()));
    echo.insert("train_data".into(), json!(data_path));
    echo.insert("format".into(), json!(format));
    Ok(LoadedModel { artifact, data })
}

fn cmd_influence(args: InfluenceArgs, file: &FileConfig, stamp: Option<u64>) -> Result<Value> {
    let mut echo = Map::new();
    let loaded = load_model_and_data(args.model, args.train_data, args.format, file, &mut echo)?;
    let test_path: String = resolve_required(args.test_data, file, "test_data")?;
    let test_idx = resolve(args.test_idx, file, "test_idx", 0)?;
    let ihvp_config = resolve_ihvp(
        IhvpFlags {
            ihvp: args.ihvp,
            damping: args.damping,
            seed: args.seed,
            lissa_depth: args.lissa_depth,
            lissa_repeats: args.lissa_repeats,
            lissa_scale: args.lissa_scale,
            cg_tol: args.cg_tol,
        },
        file,
        &mut echo,
    )?;
    let out: PathBuf = resolve_required(args.out, file, "out")?;
    let csv = resolve_opt(args.csv, file, "csv")?;
    echo.insert("test_data".into(), json!(test_path));
    echo.insert("test_idx".into(), json!(test_idx));

    let test_set = load_data(
        &test_path,
        echo["format"].as_str().unwrap_or("csv"),
        SynthRole::Test,
    )?;
    if test_idx >= test_set.n() {
        return Err(Error::InvalidValue {
            what: "test_idx",
            message: format!("{test_idx} out of range for {} test points", test_set.n()),
        });
    }
    let spec = loaded.artifact.spec;
    log::info!(
        "scoring influence of {} training points on test point {}",
        loaded.data.n(),
        test_idx
    );
    let report = influence_up_loss_batch(
        &spec,
        &loaded.artifact,
        &loaded.data,
        test_set.example(test_idx),
        Some(test_idx),
        &ihvp_config,
    )?;
    if let Some(csv_path) = &csv {
        report_csv(&report, csv_path)?;
        echo.insert("csv".into(), json!(csv_path.display().to_string()));
    }
    let payload = serde_json::to_value(&report).map_err(|e| Error::InvalidValue {
        what: "report",
        message: e.to_string(),
    })?;
    let doc = output_doc(echo, payload, stamp);
    write_output(&out, &doc)?;
    let top = report.scores.first();
    Ok(json!({
        "command": "influence",
        "method": report.method,
        "n_scored": report.scores.len(),
        "top_train_idx": top.map(|s| s.train_idx),
        "top_i_up_loss": top.map(|s| s.i_up_loss),
        "out": out.display().to_string(),
    }))
}

fn cmd_self_influence(
    args: SelfInfluenceArgs,
    file: &FileConfig,
    stamp: Option<u64>,
) -> Result<Value> {
    let mut echo = Map::new();
    let loaded = load_model_and_data(args.model, args.train_data, args.format, file, &mut echo)?;
    let ihvp_config = resolve_ihvp(
        IhvpFlags {
            ihvp: args.ihvp,
            damping: args.damping,
            seed: args.seed,
            lissa_depth: args.lissa_depth,
            lissa_repeats: args.lissa_repeats,
            lissa_scale: args.lissa_scale,
            cg_tol: args.cg_tol,
        },
        file,
        &mut echo,
    )?;
    let out: PathBuf = resolve_required(args.out, file, "out")?;
    let csv = resolve_opt(args.csv, file, "csv")?;

    let spec = loaded.artifact.spec;
    log::info!(
        "ranking {} training points by self-influence",
        loaded.data.n()
    );
    let report = self_influence_batch(&spec, &loaded.artifact, &loaded.data, &ihvp_config)?;
    if let Some(csv_path) = &csv {
        report_csv(&report, csv_path)?;
        echo.insert("csv".into(), json!(csv_path.display().to_string()));
    }
    let payload = serde_json::to_value(&report).map_err(|e| Error::InvalidValue {
        what: "report",
        message: e.to_string(),
    })?;
    let doc = output_doc(echo, payload, stamp);
    write_output(&out, &doc)?;
    let top = report.scores.first();
    Ok(json!({
        "command": "self_influence",
        "method": report.method,
        "n_scored": report.scores.len(),
        "top_train_idx": top.map(|s| s.train_idx),
        "top_i_up_loss": top.map(|s| s.i_up_loss),
        "out": out.display().to_string(),
    }))
}

fn cmd_loo_validate(args: LooValidateArgs, file: &FileConfig, stamp: Option<u64>) -> Result<Value> {
    let data_path: String = resolve_required(args.data, file, "data")?;
    let format = resolve(args.format, file, "format", "csv".to_string())?;
    let test_path: String = resolve_required(args.test_data, file, "test_data")?;
    let test_idx = resolve(args.test_idx, file, "test_idx", 0)?;
    let family_name = resolve(args.model, file, "model", "binary_logistic".to_string())?;
    let l2 = resolve(args.l2, file, "l2", 0.01)?;
    let tol = resolve(args.tol, file, "tol", 1e-8)?;
    let max_iters = resolve(args.max_iters, file, "max_iters", 100)?;
    let top_k = resolve(args.top_k, file, "top_k", 100)?;
    let predictor_name = resolve(args.predictor, file, "predictor", "linearized".to_string())?;
    let mut echo = Map::new();
    let ihvp_config = resolve_ihvp(
        IhvpFlags {
            ihvp: args.ihvp,
            damping: args.damping,
            seed: args.seed,
            lissa_depth: args.lissa_depth,
            lissa_repeats: args.lissa_repeats,
            lissa_scale: None,
            cg_tol: None,
        },
        file,
        &mut echo,
    )?;
    let out: PathBuf = resolve_required(args.out, file, "out")?;
    let out_scatter = resolve_opt(args.out_scatter, file, "out_scatter")?;

    let spec = ModelSpec::new(parse_family(&family_name)?, l2)?;
    let data = load_data(&data_path, &format, SynthRole::Train)?;
    let test_set = load_data(&test_path, &format, SynthRole::Test)?;
    if test_idx >= test_set.n() {
        return Err(Error::InvalidValue {
            what: "test_idx",
            message: format!("{test_idx} out of range for {} test points", test_set.n()),
        });
    }
    let train_config = TrainConfig {
        tol_grad: tol,
        max_iters,
        method: TrainMethod::NewtonCg,
        warm_start: None,
    };
    log::info!(
        "validating top-{top_k} influence predictions by leave-one-out retraining \
         over {} examples",
        data.n()
    );
    let run = run_loo_validation(
        &spec,
        &data,
        test_set.example(test_idx),
        &ihvp_config,
        top_k,
        &train_config,
        parse_predictor(&predictor_name)?,
    )?;

    echo.insert("data".into(), json!(data_path));
    echo.insert("format".into(), json!(format));
    echo.insert("test_data".into(), json!(test_path));
    echo.insert("test_idx".into(), json!(test_idx));
    echo.insert("model".into(), json!(family_name));
    echo.insert("l2".into(), json!(l2));
    echo.insert("tol".into(), json!(tol));
    echo.insert("max_iters".into(), json!(max_iters));
    echo.insert("top_k".into(), json!(top_k));
    echo.insert("predictor".into(), json!(predictor_name));
    if let Some(path) = &out_scatter {
        write_csv_table(
            &["train_idx", "predicted_loo_delta", "actual_loo_delta"],
            run.pairs.iter().map(|p| {
                vec![
                    p.train_idx.to_string(),
                    format!("{}", p.predicted_loo_delta),
                    format!("{}", p.actual_loo_delta),
                ]
            }),
            path,
        )?;
        echo.insert("out_scatter".into(), json!(path.display().to_string()));
    }
    let payload = serde_json::to_value(&run).map_err(|e| Error::InvalidValue {
        what: "validation run",
        message: e.to_string(),
    })?;
    let doc = output_doc(echo, payload, stamp);
    write_output(&out, &doc)?;
    Ok(json!({
        "command": "loo_validate",
        "pearson_r": run.pearson_r,
        "spearman_r": run.spearman_r,
        "top_k": run.top_k,
        "failures": run.failures.len(),
        "out": out.display().to_string(),
    }))
}

fn cmd_sweep_hinge(args: SweepHingeArgs, file: &FileConfig, stamp: Option<u64>) -> Result<Value> {
    let data_path: String = resolve_required(args.data, file, "data")?;
    let format = resolve(args.format, file, "format", "csv".to_string())?;
    let test_path: String = resolve_required(args.test_data, file, "test_data")?;
    let test_idx = resolve(args.test_idx, file, "test_idx", 0)?;
    let temps_raw = resolve(
        args.temperatures,
        file,
        "temperatures",
        "0.001,0.01,0.1".to_string(),
    )?;
    let temperatures = parse_f64_list(&temps_raw, "temperatures")?;
    let l2 = resolve(args.l2, file, "l2", 0.01)?;
    let tol = resolve(args.tol, file, "tol", 1e-7)?;
    let max_iters = resolve(args.max_iters, file, "max_iters", 100)?;
    let top_k = resolve(args.top_k, file, "top_k", 40)?;
    let out: PathBuf = resolve_required(args.out, file, "out")?;
    let out_csv = resolve_opt(args.out_csv, file, "out_csv")?;

    let data = load_data(&data_path, &format, SynthRole::Train)?;
    let test_set = load_data(&test_path, &format, SynthRole::Test)?;
    if test_idx >= test_set.n() {
        return Err(Error::InvalidValue {
            what: "test_idx",
            message: format!("{test_idx} out of range for {} test points", test_set.n()),
        });
    }
    let config = SweepConfig {
        train: TrainConfig {
            tol_grad: tol,
            max_iters,
            method: TrainMethod::NewtonCg,
            warm_start: None,
        },
        ihvp: IhvpConfig::explicit(),
        subgradient_baseline: !args.no_zero_fill,
    };
    log::info!(
        "sweeping {} smoothing temperatures against true-hinge deltas",
        temperatures.len()
    );
    let run = run_smooth_hinge_sweep(
        &data,
        &temperatures,
        l2,
        test_set.example(test_idx),
        top_k,
        &config,
    )?;

    let mut echo = Map::new();
    echo.insert("data".into(), json!(data_path));
    echo.insert("format".into(), json!(format));
    echo.insert("test_data".into(), json!(test_path));
    echo.insert("test_idx".into(), json!(test_idx));
    echo.insert("temperatures".into(), json!(temperatures));
    echo.insert("l2".into(), json!(l2));
    echo.insert("tol".into(), json!(tol));
    echo.insert("max_iters".into(), json!(max_iters));
    echo.insert("top_k".into(), json!(top_k));
    echo.insert("zero_fill".into(), json!(!args.no_zero_fill));
    if let Some(path) = &out_csv {
        let mut rows: Vec<Vec<String>> = run
            .runs
            .iter()
            .map(|t| {
                vec![
                    format!("{}", t.temperature),
                    format!("{}", t.validation.pearson_r),
                    format!("{}", t.validation.spearman_r),
                ]
            })
            .collect();
        if let Some(zero) = &run.zero_fill {
            rows.push(vec![
                "zero_fill".to_string(),
                format!("{}", zero.pearson_r),
                format!("{}", zero.spearman_r),
            ]);
        }
        write_csv_table(&["temperature", "pearson_r", "spearman_r"], rows, path)?;
        echo.insert("out_csv".into(), json!(path.display().to_string()));
    }
    let payload = serde_json::to_value(&run).map_err(|e| Error::InvalidValue {
        what: "sweep run",
        message: e.to_string(),
    })?;
    let doc = output_doc(echo, payload, stamp);
    write_output(&out, &doc)?;
    let r_by_temperature: Vec<Value> = run
        .runs
        .iter()
        .map(|t| json!({"temperature": t.temperature, "pearson_r": t.validation.pearson_r}))
        .collect();
    Ok(json!({
        "command": "sweep_hinge",
        "r_by_temperature": r_by_temperature,
        "zero_fill_r": run.zero_fill.as_ref().map(|z| z.pearson_r),
        "out": out.display().to_string(),
    }))
}

fn cmd_fix_labels(args: FixLabelsArgs, file: &FileConfig, stamp: Option<u64>) -> Result<Value> {
    let data_path: String = resolve_required(args.data, file, "data")?;
    let format = resolve(args.format, file, "format", "csv".to_string())?;
    let family_name = resolve(args.model, file, "model", "binary_logistic".to_string())?;
    let l2 = resolve(args.l2, file, "l2", 0.01)?;
    let tol = resolve(args.tol, file, "tol", 1e-8)?;
    let max_iters = resolve(args.max_iters, file, "max_iters", 100)?;
    let flip_frac = resolve(args.flip_frac, file, "flip_frac", 0.1)?;
    let strategy_name = resolve(args.strategy, file, "strategy", "influence".to_string())?;
    let repeats = resolve(args.repeats, file, "repeats", 1)?;
    let seed = resolve(args.seed, file, "seed", 0u64)?;
    let grid_raw = resolve(
        args.grid,
        file,
        "grid",
        "0.0,0.05,0.1,0.15,0.2,0.25,0.3".to_string(),
    )?;
    let grid = parse_f64_list(&grid_raw, "grid")?;
    let damping = resolve(args.damping, file, "damping", 0.0)?;
    let out: PathBuf = resolve_required(args.out, file, "out")?;
    let out_csv = resolve_opt(args.out_csv, file, "out_csv")?;
    if repeats == 0 {
        return Err(Error::InvalidValue {
            what: "repeats",
            message: "must be >= 1".into(),
        });
    }

    let spec = ModelSpec::new(parse_family(&family_name)?, l2)?;
    let data = load_data(&data_path, &format, SynthRole::Train)?;
    let strategy = parse_strategy(&strategy_name)?;
    let train_config = TrainConfig {
        tol_grad: tol,
        max_iters,
        method: TrainMethod::NewtonCg,
        warm_start: None,
    };
    let ihvp_config = IhvpConfig::explicit().with_damping(damping);
    log::info!(
        "running {repeats} triage repeat(s), strategy {}, {:.0}% labels flipped",
        strategy.name(),
        flip_frac * 100.0
    );
    let mut runs: Vec<TriageRun> = Vec::with_capacity(repeats);
    for r in 0..repeats {
        runs.push(run_mislabel_triage(
            &spec,
            &data,
            flip_frac,
            strategy,
            seed + r as u64,
            &grid,
            &train_config,
            &ihvp_config,
        )?);
    }
    let mean_curve = aggregate_curves(&runs);

    let mut echo = Map::new();
    echo.insert("data".into(), json!(data_path));
    echo.insert("format".into(), json!(format));
    echo.insert("model".into(), json!(family_name));
    echo.insert("l2".into(), json!(l2));
    echo.insert("tol".into(), json!(tol));
    echo.insert("max_iters".into(), json!(max_iters));
    echo.insert("flip_frac".into(), json!(flip_frac));
    echo.insert("strategy".into(), json!(strategy_name));
    echo.insert("repeats".into(), json!(repeats));
    echo.insert("seed".into(), json!(seed));
    echo.insert("grid".into(), json!(grid));
    echo.insert("damping".into(), json!(damping));
    if let Some(path) = &out_csv {
        write_csv_table(
            &[
                "fraction_checked",
                "mean_fraction_flips_found",
                "se_fraction_flips_found",
                "mean_test_accuracy",
            ],
            mean_curve.iter().map(|p| {
                vec![
                    format!("{}", p["fraction_checked"].as_f64().unwrap_or(f64::NAN)),
                    format!(
                        "{}",
                        p["mean_fraction_flips_found"].as_f64().unwrap_or(f64::NAN)
                    ),
                    format!(
                        "{}",
                        p["se_fraction_flips_found"].as_f64().unwrap_or(f64::NAN)
                    ),
                    format!("{}", p["mean_test_accuracy"].as_f64().unwrap_or(f64::NAN)),
                ]
            }),
            path,
        )?;
        echo.insert("out_csv".into(), json!(path.display().to_string()));
    }
    let final_mean = mean_curve
        .last()
        .and_then(|p| p["mean_fraction_flips_found"].as_f64());
    let payload = json!({
        "runs": runs,
        "mean_curve": mean_curve,
    });
    let doc = output_doc(echo, payload, stamp);
    write_output(&out, &doc)?;
    Ok(json!({
        "command": "fix_labels",
        "strategy": strategy_name,
        "repeats": repeats,
        "flip_frac": flip_frac,
        "mean_fraction_found_final": final_mean,
        "out": out.display().to_string(),
    }))
}

/// Per grid point: mean and standard error of flips-found, mean accuracy.
fn aggregate_curves(runs: &[TriageRun]) -> Vec<Value> {
    let Some(first) = runs.first() else {
        return Vec::new();
    };
    let r = runs.len() as f64;
    (0..first.curve.len())
        .map(|i| {
            let found: Vec<f64> = runs
                .iter()
                .map(|run| run.curve[i].fraction_flips_found)
                .collect();
            let acc_mean = runs
                .iter()
                .map(|run| run.curve[i].test_accuracy)
                .sum::<f64>()
                / r;
            let mean = found.iter().sum::<f64>() / r;
            let se = if runs.len() > 1 {
                let var = found.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (r - 1.0);
                (var / r).sqrt()
            } else {
                0.0
            };
            json!({
                "fraction_checked": first.curve[i].fraction_checked,
                "mean_fraction_flips_found": mean,
                "se_fraction_flips_found": se,
                "mean_test_accuracy": acc_mean,
            })
        })
        .collect()
}

fn cmd_attack(args: AttackArgs, file: &FileConfig, stamp: Option<u64>) -> Result<Value> {
    let data_path: String = resolve_required(args.data, file, "data")?;
    let format = resolve(args.format, file, "format", "csv".to_string())?;
    let targets_path: String = resolve_required(args.targets, file, "targets")?;
    let family_name = resolve(args.model, file, "model", "binary_logistic".to_string())?;
    let l2 = resolve(args.l2, file, "l2", 0.01)?;
    let tol = resolve(args.tol, file, "tol", 1e-8)?;
    let max_iters = resolve(args.max_iters, file, "max_iters", 100)?;
    let alpha = resolve(args.alpha, file, "alpha", 0.02)?;
    let levels = resolve(args.levels, file, "levels", 256)?;
    let iters = resolve(args.iters, file, "iters", 100)?;
    let budget = resolve(args.budget, file, "budget", 1)?;
    let damping = resolve(args.damping, file, "damping", 0.0)?;
    let out: PathBuf = resolve_required(args.out, file, "out")?;
    let out_csv = resolve_opt(args.out_csv, file, "out_csv")?;
    let out_poisoned = resolve_opt(args.out_poisoned, file, "out_poisoned")?;

    let spec = ModelSpec::new(parse_family(&family_name)?, l2)?;
    let data = load_data(&data_path, &format, SynthRole::Train)?;
    let targets = load_data(&targets_path, &format, SynthRole::Test)?;
    let config = AttackConfig {
        train: TrainConfig {
            tol_grad: tol,
            max_iters,
            method: TrainMethod::NewtonCg,
            warm_start: None,
        },
        ihvp: IhvpConfig::explicit().with_damping(damping),
    };
    log::info!(
        "attacking {} target(s) with budget {budget}, alpha {alpha}, {iters} iterations",
        targets.n()
    );
    let state = run_training_attack(
        &spec, &data, &targets, alpha, levels, iters, budget, &config,
    )?;

    let mut echo = Map::new();
    echo.insert("data".into(), json!(data_path));
    echo.insert("format".into(), json!(format));
    echo.insert("targets".into(), json!(targets_path));
    echo.insert("model".into(), json!(family_name));
    echo.insert("l2".into(), json!(l2));
    echo.insert("tol".into(), json!(tol));
    echo.insert("max_iters".into(), json!(max_iters));
    echo.insert("alpha".into(), json!(alpha));
    echo.insert("levels".into(), json!(levels));
    echo.insert("iters".into(), json!(iters));
    echo.insert("budget".into(), json!(budget));
    echo.insert("damping".into(), json!(damping));
    if let Some(path) = &out_csv {
        write_csv_table(
            &[
                "iteration",
                "mean_target_loss",
                "n_flipped",
                "max_sup_displacement",
                "quantization_ok",
            ],
            state.log.iter().map(|entry| {
                vec![
                    entry.iteration.to_string(),
                    format!("{}", entry.mean_target_loss),
                    entry.flipped.len().to_string(),
                    format!("{}", entry.max_sup_displacement),
                    entry.quantization_ok.to_string(),
                ]
            }),
            path,
        )?;
        echo.insert("out_csv".into(), json!(path.display().to_string()));
    }
    if let Some(path) = &out_poisoned {
        write_csv(&state.poisoned_data, path)?;
        echo.insert("out_poisoned".into(), json!(path.display().to_string()));
    }
    let poisoned_rows: Vec<Value> = state
        .perturbed_indices
        .iter()
        .map(|&idx| {
            json!({
                "train_idx": idx,
                "original": data.features().row(idx).to_vec(),
                "poisoned": state.poisoned_data.features().row(idx).to_vec(),
            })
        })
        .collect();
    let payload = json!({
        "alpha": state.alpha,
        "levels": state.levels,
        "iteration": state.iteration,
        "perturbed_indices": state.perturbed_indices,
        "flips": state.flips,
        "log": state.log,
        "poisoned_rows": poisoned_rows,
    });
    let doc = output_doc(echo, payload, stamp);
    write_output(&out, &doc)?;
    Ok(json!({
        "command": "attack",
        "n_flips": state.flips.len(),
        "flips": state.flips,
        "iterations": state.iteration,
        "out": out.display().to_string(),
    }))
}

fn cmd_identity_check(
    args: IdentityCheckArgs,
    file: &FileConfig,
    stamp: Option<u64>,
) -> Result<Value> {
    let data_path: String = resolve_required(args.data, file, "data")?;
    let format = resolve(args.format, file, "format", "csv".to_string())?;
    let family_name = resolve(args.model, file, "model", "binary_logistic".to_string())?;
    let l2 = resolve(args.l2, file, "l2", 0.01)?;
    let stop_grad_norm = resolve(args.stop_grad_norm, file, "stop_grad_norm", 1e-2)?;
    let damping = resolve(args.damping, file, "damping", 0.01)?;
    let out: PathBuf = resolve_required(args.out, file, "out")?;

    let spec = ModelSpec::new(parse_family(&family_name)?, l2)?;
    let data = load_data(&data_path, &format, SynthRole::Train)?;
    let epsilon = resolve(args.epsilon, file, "epsilon", 1.0 / data.n() as f64)?;
    let sample_points = match resolve_opt(args.sample_points, file, "sample_points")? {
        Some(raw) => parse_usize_list(&raw, "sample_points")?,
        None => (0..data.n().min(10)).collect(),
    };
    let train_config = TrainConfig {
        tol_grad: 1e-10,
        max_iters: 10_000,
        method: TrainMethod::NewtonCg,
        warm_start: None,
    };
    log::info!("checking the damped Newton-step identity at gradient norm {stop_grad_norm}");
    let check = check_nonconvergence_identity(
        &spec,
        &data,
        stop_grad_norm,
        damping,
        epsilon,
        &sample_points,
        &train_config,
    )?;

    let mut echo = Map::new();
    echo.insert("data".into(), json!(data_path));
    echo.insert("format".into(), json!(format));
    echo.insert("model".into(), json!(family_name));
    echo.insert("l2".into(), json!(l2));
    echo.insert("stop_grad_norm".into(), json!(stop_grad_norm));
    echo.insert("damping".into(), json!(damping));
    echo.insert("epsilon".into(), json!(epsilon));
    echo.insert("sample_points".into(), json!(sample_points));
    let payload = serde_json::to_value(&check).map_err(|e| Error::InvalidValue {
        what: "identity check",
        message: e.to_string(),
    })?;
    let doc = output_doc(echo, payload, stamp);
    write_output(&out, &doc)?;
    Ok(json!({
        "command": "identity_check",
        "grad_norm": check.grad_norm,
        "max_relative_deviation": check.max_relative_deviation,
        "out": out.display().to_string(),
    }))
}
