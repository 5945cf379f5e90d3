//! Command-line front end. Every command writes its artifacts under
//! `<out>/seed<seed>/` together with a manifest naming the command, the
//! resolved configuration, the seed and content hashes of inputs and
//! outputs.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::autoencoder::AutoencoderModel;
use crate::classifiers::{append_eval_csv, run_setting, ClassifierKind, Setting};
use crate::data::{encode, load_table, EncodedDataset, Schema};
use crate::error::{Error, Result};
use crate::experiments::{
    load_real, prepare_real, pretrain_for_seed, run_adult, run_toy, stage_rng, summarize, train_fairgan_branches,
    worker_count, write_sweep_csv, AdultReport, RunConfig, Stage, ToyConfig,
};
use crate::fairness::{audit, dimensionwise_probability, write_dimensionwise_csv, AuditOptions};
use crate::gan::{synthesize, FairGanModel, TrainConfig, Trainer, Variant};
use crate::theory::Scenario;

#[derive(Debug, Parser)]
#[command(name = "fairgan", version, about = "Fairness-aware GANs for tabular data")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long)]
    pub config: PathBuf,
    /// Seed of this run; defaults to the first configured seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Fairness weight; overrides the configured value.
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Model variant: gan, nfgan1, nfgan2 or fairgan.
    #[arg(long)]
    pub variant: Option<Variant>,
    /// Phases of 300/300 epochs on an 8,000-row subsample.
    #[arg(long)]
    pub fast: bool,
    /// Output directory; overrides the configured one.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Pretrain the autoencoder on the real records.
    Pretrain(Common),
    /// Train one model variant from the pretrained autoencoder.
    Train(Common),
    /// Generate a synthetic dataset from a trained model.
    Synthesize {
        #[command(flatten)]
        common: Common,
        /// Rows to generate; defaults to the real row count.
        #[arg(long)]
        rows: Option<usize>,
    },
    /// Fairness report of a dataset, measured against the real data.
    Audit {
        #[command(flatten)]
        common: Common,
        /// Dataset CSV conforming to the schema; defaults to the real data.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Classifier accuracy and risk difference on real and synthetic data.
    Classify {
        #[command(flatten)]
        common: Common,
        /// Synthetic dataset CSV; without it only REAL2REAL runs.
        #[arg(long)]
        input: Option<PathBuf>,
    },
    /// Train one FairGAN per fairness weight and seed.
    SweepLambda {
        #[command(flatten)]
        common: Common,
        /// Comma-separated weights; defaults to the configured list.
        #[arg(long, value_delimiter = ',')]
        lambdas: Option<Vec<f64>>,
    },
    /// Every variant, audit and evaluation for every configured seed.
    Experiment(Common),
    /// One-dimensional two-group comparison of the variants.
    Toy {
        /// Toy configuration (JSON); built-in defaults otherwise.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Exact game values for a finite scenario file.
    Theory {
        #[arg(long)]
        scenario: PathBuf,
        /// Report path; printed to stdout otherwise.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// SHA-256 over `blob <len>\0<content>`, as git computes object ids.
pub fn blob_hash(content: &[u8]) -> String {
    let mut h = Sha256::new();
    h.update(format!("blob {}\0", content.len()).as_bytes());
    h.update(content);
    h.finalize().iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FileHash {
    pub path: PathBuf,
    pub sha256: String,
}

impl FileHash {
    pub fn of(path: &Path) -> Result<Self> {
        Ok(FileHash {
            path: path.to_path_buf(),
            sha256: blob_hash(&std::fs::read(path)?),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub version: String,
    pub seed: Option<u64>,
    pub config: serde_json::Value,
    pub inputs: Vec<FileHash>,
    pub outputs: Vec<FileHash>,
}

pub fn manifest_path(artifact: &Path) -> PathBuf {
    let mut name = artifact.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    artifact.with_file_name(name)
}

fn write_manifest(
    command: &str,
    config: &impl Serialize,
    seed: Option<u64>,
    inputs: &[&Path],
    outputs: &[PathBuf],
) -> Result<PathBuf> {
    let manifest = Manifest {
        command: command.to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        seed,
        config: serde_json::to_value(config)?,
        inputs: inputs.iter().map(|p| FileHash::of(p)).collect::<Result<_>>()?,
        outputs: outputs.iter().map(|p| FileHash::of(p)).collect::<Result<_>>()?,
    };
    let path = manifest_path(&outputs[0]);
    std::fs::write(&path, serde_json::to_string_pretty(&manifest)?)?;
    Ok(path)
}

fn require(path: &Path, command: &str) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::MissingArtifact {
            path: path.to_path_buf(),
            command: command.to_string(),
        })
    }
}

/// Configuration with command-line overrides applied.
struct Resolved {
    config_path: PathBuf,
    cfg: RunConfig,
    seed: u64,
    variant: Variant,
}

impl Resolved {
    fn new(c: &Common) -> Result<Self> {
        let mut cfg = RunConfig::load(&c.config)?;
        if c.fast {
            cfg.apply_fast();
        }
        if let Some(l) = c.lambda {
            cfg.train.lambda = l;
        }
        if let Some(out) = &c.out {
            cfg.out = out.clone();
        }
        if let Some(v) = c.variant {
            cfg.variant = v;
        }
        if let Some(s) = c.seed {
            cfg.seeds = vec![s];
        }
        cfg.validate()?;
        let seed = cfg.seeds[0];
        cfg.train.seed = seed;
        Ok(Resolved {
            config_path: c.config.clone(),
            variant: cfg.variant,
            seed,
            cfg,
        })
    }

    fn dir(&self) -> Result<PathBuf> {
        let d = self.cfg.out.join(format!("seed{}", self.seed));
        std::fs::create_dir_all(&d)?;
        Ok(d)
    }

    fn autoencoder_path(&self) -> Result<PathBuf> {
        Ok(self.dir()?.join("autoencoder.json"))
    }

    /// `fairgan_l1`, `nfgan2_l0.5`, `gan`, `nfgan1`.
    fn tag(&self) -> String {
        if self.variant.has_d2() {
            format!("{}_l{}", self.variant, self.cfg.train.lambda)
        } else {
            self.variant.to_string()
        }
    }

    fn model_path(&self) -> Result<PathBuf> {
        Ok(self.dir()?.join(format!("model_{}.json", self.tag())))
    }

    fn real(&self) -> Result<EncodedDataset> {
        prepare_real(&self.cfg, &load_real(&self.cfg)?, self.seed)
    }

    fn data_inputs(&self) -> Vec<&Path> {
        vec![self.config_path.as_path(), self.cfg.schema.as_path(), self.cfg.data.as_path()]
    }
}

fn read_dataset(path: &Path, schema: &Schema) -> Result<EncodedDataset> {
    Ok(encode(&load_table(path, schema)?))
}

fn cmd_pretrain(c: &Common) -> Result<Vec<PathBuf>> {
    let r = Resolved::new(c)?;
    let real = r.real()?;
    let ae = pretrain_for_seed(&r.cfg, &real, r.seed)?;
    let path = r.autoencoder_path()?;
    ae.save(&path)?;
    let outputs = vec![path];
    let m = write_manifest("pretrain", &r.cfg, Some(r.seed), &r.data_inputs(), &outputs)?;
    Ok([outputs, vec![m]].concat())
}

/// Trains the resolved variant. The plain GAN is FairGAN's phase 1 with
/// the fairness discriminator dropped.
pub fn train_variant(
    real: &EncodedDataset,
    ae: &AutoencoderModel,
    variant: Variant,
    cfg: &TrainConfig,
) -> Result<(FairGanModel, Vec<crate::gan::TraceRow>)> {
    if variant == Variant::Gan {
        let mut t = Trainer::new(real, Variant::Fairgan, ae, cfg)?;
        t.run_phase1(real, cfg.phase1_epochs)?;
        return Ok((t.snapshot_as(Variant::Gan)?, t.trace().to_vec()));
    }
    let mut t = Trainer::new(real, variant, ae, cfg)?;
    t.run_phase1(real, cfg.phase1_epochs)?;
    if variant.has_d2() {
        t.run_phase2(real, cfg.phase2_epochs)?;
    }
    let out = t.into_outcome();
    Ok((out.model, out.trace))
}

fn cmd_train(c: &Common) -> Result<Vec<PathBuf>> {
    let r = Resolved::new(c)?;
    let ae_path = r.autoencoder_path()?;
    require(&ae_path, "pretrain")?;
    let ae = AutoencoderModel::load(&ae_path)?;
    let real = r.real()?;
    let (model, trace) = train_variant(&real, &ae, r.variant, &r.cfg.train)?;
    let path = r.model_path()?;
    model.save(&path)?;
    let trace_path = r.dir()?.join(format!("trace_{}.csv", r.tag()));
    crate::gan::write_trace_csv(&trace, std::fs::File::create(&trace_path)?)?;
    let outputs = vec![path, trace_path];
    let mut inputs = r.data_inputs();
    inputs.push(&ae_path);
    let m = write_manifest("train", &r.cfg, Some(r.seed), &inputs, &outputs)?;
    Ok([outputs, vec![m]].concat())
}

fn cmd_synthesize(c: &Common, rows: Option<usize>) -> Result<Vec<PathBuf>> {
    let r = Resolved::new(c)?;
    let model_path = r.model_path()?;
    require(&model_path, "train")?;
    let model = FairGanModel::load(&model_path)?;
    let real = r.real()?;
    let n = rows.or(r.cfg.synthetic_rows).unwrap_or(real.len());
    let syn = synthesize(&model, real.schema.clone(), n, &mut stage_rng(r.seed, Stage::Synthesis, 0))?;
    let path = r.dir()?.join(format!("synthetic_{}.csv", r.tag()));
    syn.to_raw().save_csv(&path)?;
    let outputs = vec![path];
    let mut inputs = r.data_inputs();
    inputs.push(&model_path);
    let m = write_manifest("synthesize", &r.cfg, Some(r.seed), &inputs, &outputs)?;
    Ok([outputs, vec![m]].concat())
}

fn input_name(input: Option<&PathBuf>) -> String {
    input
        .and_then(|p| p.file_stem())
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "real".into())
}

fn cmd_audit(c: &Common, input: Option<&PathBuf>) -> Result<Vec<PathBuf>> {
    let r = Resolved::new(c)?;
    let real = r.real()?;
    let ds = match input {
        Some(p) => read_dataset(p, &real.schema)?,
        None => real.clone(),
    };
    let report = audit(
        &ds,
        Some(&real),
        &AuditOptions {
            epsilon: r.cfg.epsilon,
            attacker: true,
            seed: r.seed,
        },
    )?;
    let name = input_name(input);
    let dir = r.dir()?;
    let path = dir.join(format!("audit_{name}.json"));
    report.save(&path)?;
    let dim_path = dir.join(format!("dimensionwise_{name}.csv"));
    write_dimensionwise_csv(
        &dimensionwise_probability(&real),
        &report.dimensionwise,
        std::fs::File::create(&dim_path)?,
    )?;
    let outputs = vec![path, dim_path];
    let mut inputs = r.data_inputs();
    if let Some(p) = input {
        inputs.push(p);
    }
    let m = write_manifest("audit", &r.cfg, Some(r.seed), &inputs, &outputs)?;
    Ok([outputs, vec![m]].concat())
}

fn cmd_classify(c: &Common, input: Option<&PathBuf>) -> Result<Vec<PathBuf>> {
    let r = Resolved::new(c)?;
    let real = r.real()?;
    let syn = input.map(|p| read_dataset(p, &real.schema)).transpose()?;
    let settings: &[Setting] = if syn.is_some() { &Setting::ALL } else { &[Setting::Real2Real] };
    let mut results = Vec::new();
    for &setting in settings {
        for kind in ClassifierKind::ALL {
            results.push(run_setting(setting, kind, &real, syn.as_ref(), r.seed)?);
        }
    }
    let path = r.dir()?.join(format!("eval_{}.csv", input_name(input)));
    if path.exists() {
        std::fs::remove_file(&path)?;
    }
    append_eval_csv(&results, &path)?;
    let outputs = vec![path];
    let mut inputs = r.data_inputs();
    if let Some(p) = input {
        inputs.push(p);
    }
    let m = write_manifest("classify", &r.cfg, Some(r.seed), &inputs, &outputs)?;
    Ok([outputs, vec![m]].concat())
}

fn cmd_sweep(c: &Common, lambdas: Option<&Vec<f64>>) -> Result<Vec<PathBuf>> {
    let mut r = Resolved::new(c)?;
    let lambdas = lambdas.cloned().unwrap_or_else(|| r.cfg.lambdas.clone());
    if lambdas.len() < 2 {
        return Err(Error::Config(format!("a sweep needs at least two weights, got {lambdas:?}")));
    }
    r.cfg.lambdas = lambdas.clone();
    r.cfg.validate()?;
    let full = load_real(&r.cfg)?;
    let cfg = &r.cfg;
    let seeds = crate::experiments::parallel_map(&cfg.seeds, worker_count(), |&seed| {
        let real = prepare_real(cfg, &full, seed)?;
        let ae = pretrain_for_seed(cfg, &real, seed)?;
        let train_cfg = TrainConfig {
            seed,
            ..cfg.train.clone()
        };
        let models = train_fairgan_branches(&real, &ae, &train_cfg, &lambdas)?;
        let synthetic = models
            .iter()
            .enumerate()
            .skip(1)
            .map(|(k, m)| summarize(m, &real, cfg, seed, k as u64))
            .collect::<Result<Vec<_>>>()?;
        Ok(crate::experiments::AdultSeedResult {
            seed,
            real_rows: real.len(),
            real_risk_difference: crate::fairness::risk_difference_data(&real)?,
            real_ber: f64::NAN,
            real2real: Vec::new(),
            synthetic,
            seconds: 0.0,
        })
    })?;
    let report = AdultReport {
        config: cfg.clone(),
        seeds,
    };
    std::fs::create_dir_all(&cfg.out)?;
    let path = cfg.out.join("sweep_lambda.csv");
    write_sweep_csv(&report.sweep_rows(), std::fs::File::create(&path)?)?;
    let outputs = vec![path];
    let m = write_manifest("sweep-lambda", cfg, None, &r.data_inputs(), &outputs)?;
    Ok([outputs, vec![m]].concat())
}

fn cmd_experiment(c: &Common) -> Result<Vec<PathBuf>> {
    let r = Resolved::new(c)?;
    let report = run_adult(&r.cfg, worker_count(), true)?;
    let out = &r.cfg.out;
    std::fs::create_dir_all(out)?;
    let report_path = out.join("experiment.json");
    std::fs::write(&report_path, serde_json::to_string_pretty(&report)?)?;
    let sweep_path = out.join("sweep_lambda.csv");
    write_sweep_csv(&report.sweep_rows(), std::fs::File::create(&sweep_path)?)?;
    let eval_path = out.join("eval.csv");
    if eval_path.exists() {
        std::fs::remove_file(&eval_path)?;
    }
    for s in &report.seeds {
        append_eval_csv(&s.real2real, &eval_path)?;
        for syn in &s.synthetic {
            append_eval_csv(&syn.evaluations, &eval_path)?;
        }
    }
    let outputs = vec![report_path, sweep_path, eval_path];
    let m = write_manifest("experiment", &r.cfg, None, &r.data_inputs(), &outputs)?;
    Ok([outputs, vec![m]].concat())
}

fn cmd_toy(config: Option<&PathBuf>, seed: Option<u64>, out: Option<&PathBuf>) -> Result<Vec<PathBuf>> {
    let mut cfg = match config {
        Some(p) => ToyConfig::load(p)?,
        None => ToyConfig::default(),
    };
    if let Some(s) = seed {
        cfg.seeds = vec![s];
    }
    if let Some(o) = out {
        cfg.out = o.clone();
    }
    let report = run_toy(&cfg, worker_count())?;
    let outputs = report.save(&cfg.out)?;
    let inputs: Vec<&Path> = config.iter().map(|p| p.as_path()).collect();
    let m = write_manifest("toy", &cfg, None, &inputs, &outputs)?;
    Ok([outputs, vec![m]].concat())
}

fn cmd_theory(scenario: &Path, out: Option<&PathBuf>) -> Result<Vec<PathBuf>> {
    let report = Scenario::load(scenario)?.evaluate()?;
    let text = serde_json::to_string_pretty(&report)?;
    match out {
        Some(p) => {
            std::fs::write(p, text)?;
            Ok(vec![p.clone()])
        }
        None => {
            println!("{text}");
            Ok(Vec::new())
        }
    }
}

/// Executes one parsed command and returns the files it wrote.
pub fn execute(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Pretrain(c) => cmd_pretrain(c),
        Command::Train(c) => cmd_train(c),
        Command::Synthesize { common, rows } => cmd_synthesize(common, *rows),
        Command::Audit { common, input } => cmd_audit(common, input.as_ref()),
        Command::Classify { common, input } => cmd_classify(common, input.as_ref()),
        Command::SweepLambda { common, lambdas } => cmd_sweep(common, lambdas.as_ref()),
        Command::Experiment(c) => cmd_experiment(c),
        Command::Toy { config, seed, out } => cmd_toy(config.as_ref(), *seed, out.as_ref()),
        Command::Theory { scenario, out } => cmd_theory(scenario, out.as_ref()),
    }
}

/// Entry point: parses `args`, runs the command, reports written files on
/// stdout and failures as one JSON object on stderr. Returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(files) => {
            let mut stdout = std::io::stdout().lock();
            for f in files {
                let _ = writeln!(stdout, "wrote {}", f.display());
            }
            0
        }
        Err(e) => {
            let diag = serde_json::json!({ "error": e.kind(), "message": e.to_string() });
            eprintln!("{diag}");
            1
        }
    }
}
