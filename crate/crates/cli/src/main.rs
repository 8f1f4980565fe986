//! `hpefp`: collect event traces, build datasets, train and evaluate
//! classifiers, and measure countermeasures.
//!
//! Exit codes: 0 success, 1 runtime failure, 2 configuration error, 3 data
//! error, 4 permission or perf-interface error.

mod config;

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::{Duration, SystemTime, UNIX_EPOCH};

use clap::{Args, Parser, Subcommand};
use hpefp::classifiers::{load_model, save_model, NormalizingTrainer, Registry, Trainer};
use hpefp::collector::{await_target_process, collect, detect_access_level, is_privileged, DEFAULT_POLL_INTERVAL_MS};
use hpefp::dataset::{concatenate, downsample, load, normalize_apply, save, split, Dataset, Measurement};
use hpefp::evaluation::{
    cross_validate, evaluate, learning_curve, write_curve_csv, write_folds_csv, write_per_class_csv, write_topk_csv,
};
use hpefp::event::preset;
use hpefp::mitigation::{leakage_report, LeakageReport, MitigationPolicy, PolicyKind};
use hpefp::synth::{gen_dataset, gen_profiles, NoiseModel};
use hpefp::{Error, ErrorCategory, Result};
use serde::Serialize;
use serde_json::{json, Value};

use config::{required, resolve_scenario, ScenarioConfig, ScenarioSpec};

#[derive(Parser)]
#[command(name = "hpefp", version, about = "Hardware performance event fingerprinting")]
struct Cli {
    /// JSON scenario configuration; flags override its values.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print a scenario preset as JSON.
    Preset { name: String },
    /// Report the perf access level granted by perf_event_paranoid.
    Access,
    /// Record one measurement and append it to a dataset file.
    Collect(CollectArgs),
    /// Write a synthetic dataset and print its SHA-256 digest.
    Synth(SynthArgs),
    /// Block-mean downsample every feature vector.
    Downsample {
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long)]
        factor: usize,
        #[arg(long)]
        out: PathBuf,
    },
    /// Per-class train/test split without replacement.
    Split(SplitArgs),
    /// Fit min-max normalization on a training set and apply it to others.
    Normalize {
        #[arg(long)]
        train: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
        /// Further datasets scaled with the training parameters, as
        /// `input=output` pairs.
        #[arg(long = "apply", value_parser = parse_pair)]
        apply: Vec<(PathBuf, PathBuf)>,
    },
    /// Train a classifier and write a model file.
    Train(TrainArgs),
    /// Evaluate a model file on a test set.
    Evaluate(EvaluateArgs),
    /// Stratified k-fold cross-validation.
    Crossval(CrossvalArgs),
    /// Success rate against training set size.
    Curve(CurveArgs),
    /// Before/after success rates for countermeasure policies.
    Mitigate(MitigateArgs),
}

#[derive(Args)]
struct CollectArgs {
    /// Preset name or a JSON file with a preset or collector config.
    #[arg(long)]
    scenario: Option<String>,
    #[arg(long)]
    label: Option<String>,
    /// Dataset file to append to; created when absent.
    #[arg(long)]
    out: PathBuf,
    /// Wait for a new process matching this pattern and profile it.
    /// Process-specific presets default to their own target pattern.
    #[arg(long = "await")]
    await_process: Option<String>,
    /// Seconds to wait for the target process.
    #[arg(long, default_value_t = 60.0)]
    timeout: f64,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    per_class: Option<usize>,
    #[arg(long)]
    events: Option<usize>,
    /// Samples per event.
    #[arg(long)]
    samples: Option<usize>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    shift: Option<f64>,
    #[arg(long)]
    jitter: Option<f64>,
    #[arg(long)]
    floor: Option<f64>,
    /// Seed of the class profiles.
    #[arg(long)]
    seed: Option<u64>,
    /// Seed of the per-measurement noise; defaults to seed + 1.
    #[arg(long)]
    data_seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SplitArgs {
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    train_out: PathBuf,
    #[arg(long)]
    test_out: PathBuf,
}

#[derive(Args, Clone)]
struct ClassifierArgs {
    /// knn, dt, svm or net.
    #[arg(long)]
    kind: Option<String>,
    /// Hyperparameters as a JSON object.
    #[arg(long)]
    hyperparameters: Option<String>,
    /// Skip the min-max normalization fitted on each training set.
    #[arg(long)]
    no_normalize: bool,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[arg(long)]
    train: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    test: Option<PathBuf>,
    /// Deepest guess count of the top-k curve.
    #[arg(long, default_value_t = 1)]
    topk: usize,
    /// JSON report; per-class and top-k CSVs are written beside it.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CrossvalArgs {
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[arg(long)]
    dataset: Option<PathBuf>,
    #[arg(long)]
    folds: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CurveArgs {
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Comma-separated training sizes per class.
    #[arg(long, value_delimiter = ',')]
    sizes: Option<Vec<usize>>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct MitigateArgs {
    #[command(flatten)]
    classifier: ClassifierArgs,
    #[arg(long)]
    dataset: Option<PathBuf>,
    /// Noise levels to sweep, comma-separated.
    #[arg(long, value_delimiter = ',', conflicts_with_all = ["degrade", "deny"])]
    noise: Option<Vec<f64>>,
    /// Sampling degradation factor.
    #[arg(long, conflicts_with = "deny")]
    degrade: Option<usize>,
    /// Remove all event access.
    #[arg(long)]
    deny: bool,
    #[arg(long)]
    policy_seed: Option<u64>,
    #[arg(long)]
    train_per_class: Option<usize>,
    #[arg(long)]
    test_per_class: Option<usize>,
    #[arg(long)]
    split_seed: Option<u64>,
    /// JSON report; a sweep CSV is written beside it.
    #[arg(long)]
    out: PathBuf,
}

fn parse_pair(s: &str) -> std::result::Result<(PathBuf, PathBuf), String> {
    let (a, b) = s.split_once('=').ok_or_else(|| format!("expected input=output, got `{s}`"))?;
    Ok((a.into(), b.into()))
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(match e.category() {
                ErrorCategory::Runtime => 1,
                ErrorCategory::Config => 2,
                ErrorCategory::Data => 3,
                ErrorCategory::Permission => 4,
            })
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    let cfg = match &cli.config {
        Some(path) => ScenarioConfig::load(path)?,
        None => ScenarioConfig::default(),
    };
    match cli.command {
        Command::Preset { name } => print_json(&preset(&name)?),
        Command::Access => cmd_access(),
        Command::Collect(a) => cmd_collect(a, &cfg),
        Command::Synth(a) => cmd_synth(a, &cfg),
        Command::Downsample { input, factor, out } => {
            let d = load_input(input.or(cfg.dataset.clone()), "--input", "dataset")?;
            save(&downsample(&d, factor)?, &out)
        }
        Command::Split(a) => cmd_split(a, &cfg),
        Command::Normalize { train, out, apply } => {
            let d = load_input(train.or(cfg.train.clone()), "--train", "train")?;
            let scaled = hpefp::dataset::normalize_fit(&d)?;
            let params = scaled.normalization.clone().expect("fitted normalization");
            save(&scaled, &out)?;
            for (input, output) in apply {
                save(&normalize_apply(&params, &load(&input)?)?, &output)?;
            }
            Ok(())
        }
        Command::Train(a) => cmd_train(a, &cfg),
        Command::Evaluate(a) => cmd_evaluate(a, &cfg),
        Command::Crossval(a) => cmd_crossval(a, &cfg),
        Command::Curve(a) => cmd_curve(a, &cfg),
        Command::Mitigate(a) => cmd_mitigate(a, &cfg),
    }
}

fn print_json(v: &impl Serialize) -> Result<()> {
    println!("{}", serde_json::to_string_pretty(v)?);
    Ok(())
}

fn write_json(path: &Path, v: &impl Serialize) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, v)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_csv(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> Result<()>) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    f(&mut w)?;
    w.flush()?;
    Ok(())
}

/// `report.json` -> `report.<suffix>.csv`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map_or("report".into(), |s| s.to_string_lossy().into_owned());
    path.with_file_name(format!("{stem}.{suffix}.csv"))
}

fn load_input(path: Option<PathBuf>, flag: &str, key: &str) -> Result<Dataset> {
    let path = required(path, flag, key)?;
    if !path.exists() {
        return Err(Error::Config(format!("{} does not exist", path.display())));
    }
    load(&path)
}

fn cmd_access() -> Result<()> {
    let level = detect_access_level()?;
    print_json(&json!({
        "access_level": level,
        "privileged": is_privileged(),
    }))
}

fn cmd_collect(a: CollectArgs, cfg: &ScenarioConfig) -> Result<()> {
    let spec = match a.scenario {
        Some(s) => ScenarioSpec::Name(s),
        None => required(cfg.scenario.clone(), "--scenario", "scenario")?,
    };
    let scenario = resolve_scenario(&spec)?;
    let label = required(a.label.or(cfg.label.clone()), "--label", "label")?;
    let mut config = scenario.config.clone();
    config.validate()?;
    let preset_pattern = scenario
        .target_process_pattern
        .clone()
        .filter(|_| config.scope.syscall_pid().is_none());
    if let Some(pattern) = a.await_process.or(cfg.await_process.clone()).or(preset_pattern) {
        let pid = await_target_process(
            &pattern,
            Duration::from_millis(DEFAULT_POLL_INTERVAL_MS),
            Duration::from_secs_f64(a.timeout),
        )?;
        config.scope = config.scope.with_pid(pid);
    }
    let raw = collect(&config)?;
    let captured_at_ms = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_millis() as u64);
    let m = concatenate(&raw, &label, captured_at_ms, &scenario.name)?;
    let mut d = if a.out.exists() {
        load(&a.out)?
    } else {
        empty_like(&scenario.name, &m, &config)?
    };
    d.push(m)?;
    save(&d, &a.out)?;
    log::info!("{} now holds {} measurements", a.out.display(), d.len());
    Ok(())
}

fn empty_like(scenario: &str, m: &Measurement, config: &hpefp::event::CollectorConfig) -> Result<Dataset> {
    let layout = hpefp::dataset::FeatureLayout::uniform(m.meta.events.clone(), config.expected_samples());
    Dataset::new(scenario, layout, Vec::new())
}

fn cmd_synth(a: SynthArgs, cfg: &ScenarioConfig) -> Result<()> {
    let s = &cfg.synth;
    let classes = required(a.classes.or(s.classes), "--classes", "synth.classes")?;
    let per_class = required(a.per_class.or(s.per_class), "--per-class", "synth.per_class")?;
    let events = a.events.or(s.events).unwrap_or(3);
    let samples = a.samples.or(s.samples).unwrap_or(1000);
    let base = s.noise.unwrap_or_default();
    let noise = NoiseModel {
        additive_sigma: a.sigma.unwrap_or(base.additive_sigma),
        max_shift: a.shift.unwrap_or(base.max_shift),
        amplitude_jitter: a.jitter.unwrap_or(base.amplitude_jitter),
        background_floor: a.floor.unwrap_or(base.background_floor),
    };
    let seed = a.seed.or(cfg.seed).unwrap_or(0);
    let data_seed = a.data_seed.or(s.data_seed).unwrap_or(seed.wrapping_add(1));
    let profiles = gen_profiles(classes, events, samples, seed)?;
    let d = gen_dataset(&profiles, per_class, &noise, data_seed)?;
    save(&d, &a.out)?;
    let digest = d.digest();
    let record = json!({
        "classes": classes,
        "per_class": per_class,
        "events": events,
        "samples": samples,
        "noise": noise,
        "seed": seed,
        "data_seed": data_seed,
        "measurements": d.len(),
        "digest": digest,
    });
    let mut meta = a.out.clone().into_os_string();
    meta.push(".meta.json");
    write_json(Path::new(&meta), &record)?;
    println!("{digest}");
    Ok(())
}

fn cmd_split(a: SplitArgs, cfg: &ScenarioConfig) -> Result<()> {
    let d = load_input(a.input.or(cfg.dataset.clone()), "--input", "dataset")?;
    let n_train = required(
        a.train_per_class.or(cfg.split.train_per_class),
        "--train-per-class",
        "split.train_per_class",
    )?;
    let n_test = required(
        a.test_per_class.or(cfg.split.test_per_class),
        "--test-per-class",
        "split.test_per_class",
    )?;
    let seed = a.seed.or(cfg.split.seed).or(cfg.seed).unwrap_or(0);
    let (train, test) = split(&d, n_train, n_test, seed)?;
    save(&train, &a.train_out)?;
    save(&test, &a.test_out)
}

struct ChosenClassifier {
    kind: String,
    hyperparameters: Value,
    trainer: Box<dyn Trainer>,
}

fn classifier(a: &ClassifierArgs, cfg: &ScenarioConfig) -> Result<ChosenClassifier> {
    let kind = required(
        a.kind.clone().or(cfg.classifier.as_ref().map(|c| c.kind.clone())),
        "--kind",
        "classifier.kind",
    )?;
    let hyperparameters = match &a.hyperparameters {
        Some(text) => serde_json::from_str(text).map_err(|e| Error::Config(format!("--hyperparameters: {e}")))?,
        None => cfg
            .classifier
            .as_ref()
            .map_or(Value::Null, |c| c.hyperparameters.clone()),
    };
    let inner = Registry::builtin().trainer(&kind, &hyperparameters)?;
    let normalize = !a.no_normalize && cfg.normalize.unwrap_or(true);
    let trainer = if normalize {
        Box::new(NormalizingTrainer::new(inner))
    } else {
        inner
    };
    Ok(ChosenClassifier {
        kind,
        hyperparameters,
        trainer,
    })
}

fn cmd_train(a: TrainArgs, cfg: &ScenarioConfig) -> Result<()> {
    let c = classifier(&a.classifier, cfg)?;
    let path = required(a.train.or(cfg.train.clone()), "--train", "train")?;
    let d = load_input(Some(path.clone()), "--train", "train")?;
    let model = c.trainer.train(&d)?;
    let provenance = BTreeMap::from([
        ("train_path".to_string(), path.display().to_string()),
        ("train_digest".to_string(), d.digest()),
        ("train_scenario".to_string(), d.scenario.clone()),
    ]);
    save_model(model.as_ref(), &a.out, provenance)?;
    log::info!("trained {} on {} measurements", c.kind, d.len());
    Ok(())
}

fn cmd_evaluate(a: EvaluateArgs, cfg: &ScenarioConfig) -> Result<()> {
    let model_path = required(a.model.or(cfg.model.clone()), "--model", "model")?;
    if !model_path.exists() {
        return Err(Error::Config(format!("{} does not exist", model_path.display())));
    }
    let model = load_model(&model_path, &Registry::builtin())?;
    let test = load_input(a.test.or(cfg.test.clone()), "--test", "test")?;
    let report = evaluate(model.as_ref(), &test, a.topk)?;
    write_json(&a.out, &report)?;
    write_csv(&sibling(&a.out, "per_class"), |w| write_per_class_csv(&report, w))?;
    write_csv(&sibling(&a.out, "topk"), |w| write_topk_csv(&report, w))?;
    println!("{}", report.success_rate);
    Ok(())
}

/// Reproduction data wrapped around crossval, curve and mitigate results.
#[derive(Serialize)]
struct Envelope<'a, T: Serialize> {
    kind: &'a str,
    hyperparameters: &'a Value,
    dataset_digest: String,
    result: T,
}

fn cmd_crossval(a: CrossvalArgs, cfg: &ScenarioConfig) -> Result<()> {
    let c = classifier(&a.classifier, cfg)?;
    let d = load_input(a.dataset.or(cfg.dataset.clone()), "--dataset", "dataset")?;
    let k = a.folds.or(cfg.split.folds).unwrap_or(10);
    let seed = a.seed.or(cfg.split.seed).or(cfg.seed).unwrap_or(0);
    let cv = cross_validate(c.trainer.as_ref(), &d, k, seed)?;
    write_csv(&sibling(&a.out, "folds"), |w| write_folds_csv(&cv, w))?;
    println!("{}", cv.mean);
    write_json(
        &a.out,
        &Envelope {
            kind: &c.kind,
            hyperparameters: &c.hyperparameters,
            dataset_digest: d.digest(),
            result: cv,
        },
    )
}

fn cmd_curve(a: CurveArgs, cfg: &ScenarioConfig) -> Result<()> {
    let c = classifier(&a.classifier, cfg)?;
    let d = load_input(a.dataset.or(cfg.dataset.clone()), "--dataset", "dataset")?;
    let sizes = required(a.sizes.or(cfg.split.sizes.clone()), "--sizes", "split.sizes")?;
    let n_test = required(
        a.test_per_class.or(cfg.split.test_per_class),
        "--test-per-class",
        "split.test_per_class",
    )?;
    let seed = a.seed.or(cfg.split.seed).or(cfg.seed).unwrap_or(0);
    let curve = learning_curve(c.trainer.as_ref(), &d, &sizes, n_test, seed)?;
    write_csv(&sibling(&a.out, "curve"), |w| write_curve_csv(&curve, w))?;
    write_json(
        &a.out,
        &Envelope {
            kind: &c.kind,
            hyperparameters: &c.hyperparameters,
            dataset_digest: d.digest(),
            result: curve,
        },
    )
}

fn policies(a: &MitigateArgs, cfg: &ScenarioConfig) -> Result<Vec<MitigationPolicy>> {
    let seed = a
        .policy_seed
        .or(cfg.mitigation.map(|m| m.seed))
        .or(cfg.seed)
        .unwrap_or(0);
    let kinds: Vec<PolicyKind> = if let Some(sigmas) = &a.noise {
        sigmas.iter().map(|&sigma| PolicyKind::NoiseInjection { sigma }).collect()
    } else if let Some(factor) = a.degrade {
        vec![PolicyKind::SamplingDegradation { factor }]
    } else if a.deny {
        vec![PolicyKind::AccessDenied]
    } else {
        let m = required(cfg.mitigation, "--noise, --degrade or --deny", "mitigation")?;
        vec![m.kind]
    };
    Ok(kinds.into_iter().map(|k| MitigationPolicy::new(k, seed)).collect())
}

fn cmd_mitigate(a: MitigateArgs, cfg: &ScenarioConfig) -> Result<()> {
    let c = classifier(&a.classifier, cfg)?;
    let d = load_input(a.dataset.clone().or(cfg.dataset.clone()), "--dataset", "dataset")?;
    let n_train = required(
        a.train_per_class.or(cfg.split.train_per_class),
        "--train-per-class",
        "split.train_per_class",
    )?;
    let n_test = required(
        a.test_per_class.or(cfg.split.test_per_class),
        "--test-per-class",
        "split.test_per_class",
    )?;
    let split_seed = a.split_seed.or(cfg.split.seed).or(cfg.seed).unwrap_or(0);
    let reports = policies(&a, cfg)?
        .iter()
        .map(|p| leakage_report(c.trainer.as_ref(), &d, p, n_train, n_test, split_seed))
        .collect::<Result<Vec<LeakageReport>>>()?;
    write_csv(&sibling(&a.out, "sweep"), |w| {
        writeln!(w, "policy,before,after,delta")?;
        for r in &reports {
            writeln!(w, "{},{},{},{}", policy_name(&r.policy), r.before.success_rate, r.after.success_rate, r.delta)?;
        }
        Ok(())
    })?;
    for r in &reports {
        println!("{}\t{}\t{}\t{}", policy_name(&r.policy), r.before.success_rate, r.after.success_rate, r.delta);
    }
    write_json(
        &a.out,
        &Envelope {
            kind: &c.kind,
            hyperparameters: &c.hyperparameters,
            dataset_digest: d.digest(),
            result: reports,
        },
    )
}

fn policy_name(p: &MitigationPolicy) -> String {
    match p.kind {
        PolicyKind::NoiseInjection { sigma } => format!("noise-injection:{sigma}"),
        PolicyKind::SamplingDegradation { factor } => format!("sampling-degradation:{factor}"),
        PolicyKind::AccessDenied => "access-denied".to_string(),
    }
}
