use std::collections::BTreeMap;
use std::io::Write;

use serde::{Deserialize, Serialize};

use super::{median, parallel_map, spearman, stage_rng, RunConfig, Stage};
use crate::autoencoder::{pretrain, AutoencoderModel};
use crate::classifiers::{run_setting, ClassifierKind, EvalResult, Setting};
use crate::data::{encode, load_table, stratified_subsample, EncodedDataset, Schema};
use crate::error::Result;
use crate::fairness::{epsilon_fair, pmf_distance, risk_difference_data, PmfMode};
use crate::gan::{synthesize, FairGanModel, TrainConfig, Trainer, Variant};

/// Reads and encodes the configured real data (all rows).
pub fn load_real(cfg: &RunConfig) -> Result<EncodedDataset> {
    let schema = Schema::load(&cfg.schema)?;
    Ok(encode(&load_table(&cfg.data, &schema)?))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSummary {
    pub variant: Variant,
    /// `λ` of the fairness phase; `None` for variants without one.
    pub lambda: Option<f64>,
    pub rows: usize,
    pub risk_difference: f64,
    /// Balanced error rate of the s-attacker on `(x̂, ŝ)`; computed for the
    /// variants whose records are generated for a given `ŝ`.
    pub ber: Option<f64>,
    pub pmf_distances: BTreeMap<String, f64>,
    pub evaluations: Vec<EvalResult>,
}

impl SyntheticSummary {
    pub fn eval(&self, setting: Setting, kind: ClassifierKind) -> Option<&EvalResult> {
        self.evaluations.iter().find(|e| e.setting == setting && e.classifier == kind)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdultSeedResult {
    pub seed: u64,
    pub real_rows: usize,
    pub real_risk_difference: f64,
    pub real_ber: f64,
    pub real2real: Vec<EvalResult>,
    pub synthetic: Vec<SyntheticSummary>,
    pub seconds: f64,
}

impl AdultSeedResult {
    pub fn find(&self, variant: Variant, lambda: Option<f64>) -> Option<&SyntheticSummary> {
        self.synthetic.iter().find(|s| s.variant == variant && s.lambda == lambda)
    }

    pub fn real2real(&self, kind: ClassifierKind) -> Option<&EvalResult> {
        self.real2real.iter().find(|e| e.classifier == kind)
    }
}

/// Synthesizes from `model` (the `index`-th model of the replicate) and
/// measures the result against the real rows.
pub fn summarize(
    model: &FairGanModel,
    real: &EncodedDataset,
    cfg: &RunConfig,
    seed: u64,
    index: u64,
) -> Result<SyntheticSummary> {
    let rows = cfg.synthetic_rows.unwrap_or(real.len());
    let syn = synthesize(model, real.schema.clone(), rows, &mut stage_rng(seed, Stage::Synthesis, index))?;
    let ber = if model.variant.conditions_on_s() {
        Some(epsilon_fair(&syn.x, &syn.s, cfg.epsilon, seed)?.ber)
    } else {
        None
    };
    let mut pmf_distances = BTreeMap::new();
    for mode in PmfMode::ALL {
        pmf_distances.insert(mode.to_string(), pmf_distance(real, &syn, mode)?);
    }
    let mut evaluations = Vec::new();
    for setting in [Setting::Syn2Syn, Setting::Syn2Real] {
        for kind in ClassifierKind::ALL {
            evaluations.push(run_setting(setting, kind, real, Some(&syn), seed)?);
        }
    }
    Ok(SyntheticSummary {
        variant: model.variant,
        lambda: model.variant.has_d2().then_some(model.lambda),
        rows,
        risk_difference: risk_difference_data(&syn)?,
        ber,
        pmf_distances,
        evaluations,
    })
}

fn train_straight(ds: &EncodedDataset, variant: Variant, ae: &AutoencoderModel, cfg: &TrainConfig) -> Result<FairGanModel> {
    let mut t = Trainer::new(ds, variant, ae, cfg)?;
    t.run_phase1(ds, cfg.phase1_epochs)?;
    if variant.has_d2() {
        t.run_phase2(ds, cfg.phase2_epochs)?;
    }
    Ok(t.into_outcome().model)
}

/// The real rows used by one replicate: the configured stratified
/// subsample, drawn from the seed's data stream.
pub fn prepare_real(cfg: &RunConfig, full: &EncodedDataset, seed: u64) -> Result<EncodedDataset> {
    match cfg.subsample {
        Some(n) if n < full.len() => stratified_subsample(full, n, &mut stage_rng(seed, Stage::Data, 0)),
        _ => Ok(full.clone()),
    }
}

pub fn pretrain_for_seed(cfg: &RunConfig, real: &EncodedDataset, seed: u64) -> Result<AutoencoderModel> {
    Ok(pretrain(
        &real.features_with_decision(),
        &cfg.autoencoder,
        &mut stage_rng(seed, Stage::Autoencoder, 0),
    )?
    .model)
}

/// The plain GAN (FairGAN at the end of phase 1) followed by one FairGAN
/// per `λ`, every branch continuing from that shared phase 1.
pub fn train_fairgan_branches(
    real: &EncodedDataset,
    ae: &AutoencoderModel,
    train_cfg: &TrainConfig,
    lambdas: &[f64],
) -> Result<Vec<FairGanModel>> {
    let mut shared = Trainer::new(real, Variant::Fairgan, ae, train_cfg)?;
    shared.run_phase1(real, train_cfg.phase1_epochs)?;
    let mut models = vec![shared.snapshot_as(Variant::Gan)?];
    for &lambda in lambdas {
        let mut branch = shared.clone();
        branch.set_lambda(lambda)?;
        branch.run_phase2(real, train_cfg.phase2_epochs)?;
        models.push(branch.into_outcome().model);
    }
    Ok(models)
}

/// One replicate: subsample, pretrain, train, synthesize, audit and
/// evaluate. `with_naive` adds the two variants that ignore `s` in the
/// generator.
pub fn run_adult_seed(cfg: &RunConfig, full: &EncodedDataset, seed: u64, with_naive: bool) -> Result<AdultSeedResult> {
    let start = std::time::Instant::now();
    let real = prepare_real(cfg, full, seed)?;
    let ae = pretrain_for_seed(cfg, &real, seed)?;
    let train_cfg = TrainConfig {
        seed,
        ..cfg.train.clone()
    };

    let mut models = train_fairgan_branches(&real, &ae, &train_cfg, &cfg.sweep_lambdas())?;
    if with_naive {
        models.push(train_straight(&real, Variant::Nfgan1, &ae, &train_cfg)?);
        models.push(train_straight(&real, Variant::Nfgan2, &ae, &train_cfg)?);
    }

    let synthetic = models
        .iter()
        .enumerate()
        .map(|(k, m)| summarize(m, &real, cfg, seed, k as u64))
        .collect::<Result<Vec<_>>>()?;
    let real2real = ClassifierKind::ALL
        .iter()
        .map(|&k| run_setting(Setting::Real2Real, k, &real, None, seed))
        .collect::<Result<Vec<_>>>()?;
    Ok(AdultSeedResult {
        seed,
        real_rows: real.len(),
        real_risk_difference: risk_difference_data(&real)?,
        real_ber: epsilon_fair(&real.x, &real.s, cfg.epsilon, seed)?.ber,
        real2real,
        synthetic,
        seconds: start.elapsed().as_secs_f64(),
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdultReport {
    pub config: RunConfig,
    pub seeds: Vec<AdultSeedResult>,
}

pub fn run_adult(cfg: &RunConfig, workers: usize, with_naive: bool) -> Result<AdultReport> {
    cfg.validate()?;
    let full = load_real(cfg)?;
    let seeds = parallel_map(&cfg.seeds, workers, |&s| run_adult_seed(cfg, &full, s, with_naive))?;
    Ok(AdultReport {
        config: cfg.clone(),
        seeds,
    })
}

impl AdultReport {
    /// Median over seeds of `f`, skipping seeds where it is undefined.
    pub fn median_of(&self, f: impl Fn(&AdultSeedResult) -> Option<f64>) -> f64 {
        median(&self.seeds.iter().filter_map(f).collect::<Vec<_>>())
    }

    pub fn sweep_rows(&self) -> Vec<SweepRow> {
        let mut rows = Vec::new();
        for r in &self.seeds {
            for s in r.synthetic.iter().filter(|s| s.variant == Variant::Fairgan) {
                let e = s.eval(Setting::Syn2Real, ClassifierKind::LinearSvm);
                rows.push(SweepRow {
                    lambda: s.lambda.unwrap_or(0.0),
                    seed: r.seed,
                    risk_difference: s.risk_difference,
                    pmf_joint_xys: s.pmf_distances.get(PmfMode::JointXys.as_str()).copied().unwrap_or(f64::NAN),
                    syn2real_svm_accuracy: e.map_or(f64::NAN, |e| e.accuracy),
                    syn2real_svm_risk_difference: e.map_or(f64::NAN, |e| e.risk_difference),
                });
            }
        }
        rows.sort_by(|a, b| a.lambda.total_cmp(&b.lambda).then(a.seed.cmp(&b.seed)));
        rows
    }

    /// Spearman correlation between `λ` and the median data risk difference
    /// at each `λ`.
    pub fn lambda_rd_spearman(&self) -> f64 {
        let rows = self.sweep_rows();
        let mut lambdas: Vec<f64> = rows.iter().map(|r| r.lambda).collect();
        lambdas.dedup();
        let medians: Vec<f64> = lambdas
            .iter()
            .map(|&l| median(&rows.iter().filter(|r| r.lambda == l).map(|r| r.risk_difference).collect::<Vec<_>>()))
            .collect();
        spearman(&lambdas, &medians)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub lambda: f64,
    pub seed: u64,
    pub risk_difference: f64,
    pub pmf_joint_xys: f64,
    pub syn2real_svm_accuracy: f64,
    pub syn2real_svm_risk_difference: f64,
}

pub fn write_sweep_csv(rows: &[SweepRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}
