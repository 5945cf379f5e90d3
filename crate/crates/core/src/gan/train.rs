use std::io::Write;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use super::losses::{d1_input, d1_record_grad, generator_terms, v1_terms, v2_terms, GeneratorLoss};
use super::model::GeneratorPass;
use super::{FairGanModel, Variant};
use crate::autoencoder::AutoencoderModel;
use crate::data::EncodedDataset;
use crate::error::{Error, Result};
use crate::nn::{adam_step, seeded_stream, AdamConfig, AdamState, Matrix, Mlp, Rng};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub phase1_epochs: usize,
    pub phase2_epochs: usize,
    /// Minibatch size `m`.
    pub batch: usize,
    pub lambda: f64,
    pub noise_dim: usize,
    pub learning_rate: f64,
    /// Adam's first-moment decay for every network in the game.
    #[serde(default = "default_beta1")]
    pub adam_beta1: f64,
    #[serde(default)]
    pub generator_loss: GeneratorLoss,
    /// Append the minibatch mean to every D1 input row.
    #[serde(default)]
    pub minibatch_averaging: bool,
    /// Show D1 real records after an autoencoder round trip, so that real
    /// and generated records share the decoder's soft outputs.
    #[serde(default)]
    pub reconstructed_real: bool,
    /// Keep the pretrained decoder fixed during adversarial training.
    #[serde(default)]
    pub freeze_decoder: bool,
    pub seed: u64,
    pub g_hidden: Vec<usize>,
    pub d_hidden: Vec<usize>,
}

fn default_beta1() -> f64 {
    AdamConfig::default().beta1
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            phase1_epochs: 2000,
            phase2_epochs: 2000,
            batch: 128,
            lambda: 1.0,
            noise_dim: 100,
            learning_rate: 0.001,
            adam_beta1: default_beta1(),
            generator_loss: GeneratorLoss::Minimax,
            minibatch_averaging: false,
            reconstructed_real: false,
            freeze_decoder: false,
            seed: 0,
            g_hidden: vec![128, 128],
            d_hidden: vec![256, 128],
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.batch < 2 || self.batch % 2 != 0 {
            return Err(Error::Config(format!("batch {} must be even and at least 2", self.batch)));
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!("learning rate {} must be positive", self.learning_rate)));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) {
            return Err(Error::Config(format!("adam_beta1 {} outside [0, 1)", self.adam_beta1)));
        }
        if self.noise_dim == 0 {
            return Err(Error::Config("noise_dim must be positive".into()));
        }
        Ok(())
    }
}

/// Epoch means of the training objectives. `lambda_term` is `λ·V2`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub d1_loss: f64,
    pub g_loss: f64,
    pub d2_loss: Option<f64>,
    pub lambda_term: Option<f64>,
}

pub fn write_trace_csv(trace: &[TraceRow], writer: impl Write) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["epoch", "d1_loss", "g_loss", "d2_loss", "lambda_term"])?;
    let opt = |v: Option<f64>| v.map(|x| x.to_string()).unwrap_or_default();
    for r in trace {
        w.write_record([
            r.epoch.to_string(),
            r.d1_loss.to_string(),
            r.g_loss.to_string(),
            opt(r.d2_loss),
            opt(r.lambda_term),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
struct GeneratorState {
    g: AdamState,
    dec: AdamState,
}

impl GeneratorState {
    fn new(model: &FairGanModel, cfg: AdamConfig) -> Self {
        GeneratorState {
            g: AdamState::new(&model.generator.g, cfg),
            dec: AdamState::new(&model.generator.dec, cfg),
        }
    }
}

/// Stateful minibatch training. Phases can be run separately, and a trainer
/// can be cloned after phase 1 to branch several phase-2 runs (for example
/// one per `λ`) from a shared starting point.
#[derive(Clone, Debug)]
pub struct Trainer {
    model: FairGanModel,
    batch: usize,
    generator_loss: GeneratorLoss,
    /// Encoder for the round trip of real records, when enabled.
    encoder: Option<Mlp>,
    freeze_decoder: bool,
    d1_state: AdamState,
    d2_state: Option<AdamState>,
    g_state: GeneratorState,
    /// The fairness step keeps its own moments so that it never perturbs the
    /// adversarial step's.
    g_fair_state: GeneratorState,
    rng: Rng,
    fair_rng: Rng,
    trace: Vec<TraceRow>,
}

const INIT_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;
const FAIR_STREAM: u64 = 2;

impl Trainer {
    pub fn new(ds: &EncodedDataset, variant: Variant, ae: &AutoencoderModel, cfg: &TrainConfig) -> Result<Self> {
        cfg.validate()?;
        if ae.width() != ds.width() + 1 || ae.decoder.output_dim() != ds.width() + 1 {
            return Err(Error::dims("autoencoder width vs [x | y]", ds.width() + 1, ae.width()));
        }
        if ds.is_empty() {
            return Err(Error::Degenerate("cannot train on an empty dataset".into()));
        }
        let mut init_rng = seeded_stream(cfg.seed, INIT_STREAM);
        let model = FairGanModel::init_with_averaging(
            variant,
            ae,
            cfg.noise_dim,
            &cfg.g_hidden,
            &cfg.d_hidden,
            cfg.lambda,
            ds.protected_rate(),
            cfg.minibatch_averaging,
            &mut init_rng,
        )?;
        let adam = AdamConfig {
            beta1: cfg.adam_beta1,
            ..AdamConfig::with_learning_rate(cfg.learning_rate)
        };
        Ok(Trainer {
            d1_state: AdamState::new(&model.d1, adam),
            d2_state: model.d2.as_ref().map(|d2| AdamState::new(d2, adam)),
            g_state: GeneratorState::new(&model, adam),
            g_fair_state: GeneratorState::new(&model, adam),
            batch: cfg.batch,
            generator_loss: cfg.generator_loss,
            freeze_decoder: cfg.freeze_decoder,
            encoder: cfg.reconstructed_real.then(|| ae.encoder.clone()),
            model,
            rng: seeded_stream(cfg.seed, TRAIN_STREAM),
            fair_rng: seeded_stream(cfg.seed, FAIR_STREAM),
            trace: Vec::new(),
        })
    }

    pub fn model(&self) -> &FairGanModel {
        &self.model
    }

    pub fn trace(&self) -> &[TraceRow] {
        &self.trace
    }

    /// Changes `λ` for subsequent phase-2 epochs.
    pub fn set_lambda(&mut self, lambda: f64) -> Result<()> {
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {lambda} must be finite and >= 0")));
        }
        self.model.lambda = lambda;
        Ok(())
    }

    /// Converts the trainer's model into another variant's record, used to
    /// report the plain conditional GAN as the phase-1 state of a FairGAN run.
    pub fn snapshot_as(&self, variant: Variant) -> Result<FairGanModel> {
        let mut m = self.model.clone();
        if variant.conditions_on_s() != m.variant.conditions_on_s() {
            return Err(Error::Config(format!("cannot view {} as {variant}", m.variant)));
        }
        m.variant = variant;
        if !variant.has_d2() {
            m.d2 = None;
        }
        m.validate()?;
        Ok(m)
    }

    pub fn into_outcome(self) -> TrainOutcome {
        TrainOutcome {
            model: self.model,
            trace: self.trace,
        }
    }

    /// D1 and G steps only.
    pub fn run_phase1(&mut self, ds: &EncodedDataset, epochs: usize) -> Result<()> {
        for _ in 0..epochs {
            self.epoch(ds, false)?;
        }
        Ok(())
    }

    /// D1/G steps plus the D2 and G fairness steps on every minibatch.
    pub fn run_phase2(&mut self, ds: &EncodedDataset, epochs: usize) -> Result<()> {
        if !self.model.variant.has_d2() {
            return Err(Error::Config(format!("variant {} has no fairness phase", self.model.variant)));
        }
        for _ in 0..epochs {
            self.epoch(ds, true)?;
        }
        Ok(())
    }

    fn epoch(&mut self, ds: &EncodedDataset, fair: bool) -> Result<()> {
        let records = match &self.encoder {
            Some(enc) => self.model.generator.dec.predict(&enc.predict(&ds.features_with_decision())?)?,
            None => ds.features_with_decision(),
        };
        let mut order: Vec<usize> = (0..ds.len()).collect();
        order.shuffle(&mut self.rng);
        let (mut d1_sum, mut g_sum, mut d2_sum, mut lt_sum) = (0.0, 0.0, 0.0, 0.0);
        let mut batches = 0usize;
        let mut fair_batches = 0usize;
        for chunk in order.chunks(self.batch) {
            if self.model.variant == Variant::Nfgan2 && !has_both_groups(chunk, &ds.s) {
                continue;
            }
            let real = records.select_rows(chunk);
            let real_s: Vec<u8> = chunk.iter().map(|&i| ds.s[i]).collect();
            let (d1_loss, g_loss) = self.adversarial_step(&real, &real_s)?;
            d1_sum += d1_loss;
            g_sum += g_loss;
            batches += 1;
            if fair && self.model.lambda > 0.0 {
                let (d2_loss, lambda_term) = self.fairness_step()?;
                d2_sum += d2_loss;
                lt_sum += lambda_term;
                fair_batches += 1;
            }
        }
        let mean = |sum: f64, n: usize| if n == 0 { f64::NAN } else { sum / n as f64 };
        self.trace.push(TraceRow {
            epoch: self.trace.len() + 1,
            d1_loss: mean(d1_sum, batches),
            g_loss: mean(g_sum, batches),
            d2_loss: (fair && fair_batches > 0).then(|| mean(d2_sum, fair_batches)),
            lambda_term: fair.then(|| if fair_batches > 0 { mean(lt_sum, fair_batches) } else { 0.0 }),
        });
        Ok(())
    }

    fn draw_s(&mut self, n: usize) -> Vec<u8> {
        let p = self.model.p_s1;
        (0..n).map(|_| u8::from(self.rng.random_bool(p))).collect()
    }

    /// One D1 ascent step followed by one G_Dec descent step on the same
    /// generated batch.
    fn adversarial_step(&mut self, real: &Matrix, real_s: &[u8]) -> Result<(f64, f64)> {
        let variant = self.model.variant;
        let mut fake_s = self.draw_s(real.rows());
        if variant == Variant::Nfgan2 && !fake_s.contains(&0) {
            fake_s[0] = 0;
        }
        if variant == Variant::Nfgan2 && !fake_s.contains(&1) {
            fake_s[0] = 1;
        }
        let pass = self.model.forward_generator(&fake_s, &mut self.rng)?;
        let averaging = self.model.minibatch_averaging;
        let real_in = d1_input(real, real_s, variant, averaging)?;
        let fake_in = d1_input(pass.records(), &fake_s, variant, averaging)?;

        let both = real_in.vstack(&fake_in)?;
        let cache = self.model.d1.forward(&both)?;
        let out = cache.output().as_slice();
        let (d_real, d_fake) = out.split_at(real.rows());
        let terms = v1_terms(d_real, real_s, d_fake, &fake_s, variant)?;
        let upstream = Matrix::from_vec(both.rows(), 1, terms.discriminator_grad)?;
        let grads = self.model.d1.backward_params(&cache, &upstream)?;
        adam_step(&mut self.model.d1, &grads, &mut self.d1_state)?;

        let cache = self.model.d1.forward(&fake_in)?;
        let (g_loss, g_grad) = generator_terms(cache.output().as_slice(), &fake_s, variant, self.generator_loss)?;
        let upstream = Matrix::from_vec(fake_in.rows(), 1, g_grad)?;
        let input_grad = self.model.d1.backward_input(&cache, &upstream)?;
        let record_grad = d1_record_grad(&input_grad, self.model.record_width(), variant, averaging);
        let gs = &mut self.g_state;
        update_generator(&mut self.model.generator.g, &mut self.model.generator.dec, &pass, &record_grad, gs, self.freeze_decoder)?;
        Ok((terms.discriminator_loss, g_loss))
    }

    /// One D2 step on `m/2` generated rows per group, then one G_Dec step
    /// that raises D2's classification loss.
    fn fairness_step(&mut self) -> Result<(f64, f64)> {
        let half = self.batch / 2;
        let s: Vec<u8> = std::iter::repeat_n(1, half).chain(std::iter::repeat_n(0, half)).collect();
        let pass = self.model.forward_generator(&s, &mut self.fair_rng)?;
        let lambda = self.model.lambda;
        let d2 = self.model.d2.as_mut().expect("variant has d2");
        let d2_state = self.d2_state.as_mut().expect("variant has d2");

        let cache = d2.forward(pass.records())?;
        let (d2_loss, terms) = v2_terms(cache.output().as_slice(), &s, lambda)?;
        let upstream = Matrix::from_vec(s.len(), 1, terms.discriminator_grad)?;
        let grads = d2.backward_params(&cache, &upstream)?;
        adam_step(d2, &grads, d2_state)?;

        let cache = d2.forward(pass.records())?;
        let (_, terms_g) = v2_terms(cache.output().as_slice(), &s, lambda)?;
        let upstream = Matrix::from_vec(s.len(), 1, terms_g.generator_grad)?;
        let record_grad = d2.backward_input(&cache, &upstream)?;
        let gs = &mut self.g_fair_state;
        update_generator(&mut self.model.generator.g, &mut self.model.generator.dec, &pass, &record_grad, gs, self.freeze_decoder)?;
        Ok((d2_loss, terms_g.generator_loss))
    }
}

fn has_both_groups(chunk: &[usize], s: &[u8]) -> bool {
    let first = s[chunk[0]];
    chunk.iter().any(|&i| s[i] != first)
}

fn update_generator(
    g: &mut Mlp,
    dec: &mut Mlp,
    pass: &GeneratorPass,
    record_grad: &Matrix,
    state: &mut GeneratorState,
    freeze_decoder: bool,
) -> Result<()> {
    let (dec_grads, hidden_grad) = dec.backward(&pass.dec, record_grad)?;
    let g_grads = g.backward_params(&pass.g, &hidden_grad)?;
    if !freeze_decoder {
        adam_step(dec, &dec_grads, &mut state.dec)?;
    }
    adam_step(g, &g_grads, &mut state.g)?;
    Ok(())
}

#[derive(Clone, Debug, PartialEq)]
pub struct TrainOutcome {
    pub model: FairGanModel,
    pub trace: Vec<TraceRow>,
}

impl TrainOutcome {
    pub fn save_trace(&self, path: impl AsRef<Path>) -> Result<()> {
        write_trace_csv(&self.trace, std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Phase 1 for every variant; phase 2 for variants with a group
/// discriminator.
pub fn train(ds: &EncodedDataset, variant: Variant, ae: &AutoencoderModel, cfg: &TrainConfig) -> Result<TrainOutcome> {
    let mut t = Trainer::new(ds, variant, ae, cfg)?;
    t.run_phase1(ds, cfg.phase1_epochs)?;
    if variant.has_d2() {
        t.run_phase2(ds, cfg.phase2_epochs)?;
    }
    Ok(t.into_outcome())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::seeded;

    fn setup() -> (EncodedDataset, AutoencoderModel, TrainConfig) {
        let ds = crate::data::sample_toy(64, &mut seeded(1)).unwrap();
        let ae = AutoencoderModel::init(2, 4, &mut seeded(2)).unwrap();
        let cfg = TrainConfig {
            phase1_epochs: 2,
            phase2_epochs: 2,
            batch: 16,
            noise_dim: 3,
            g_hidden: vec![6],
            d_hidden: vec![6],
            ..Default::default()
        };
        (ds, ae, cfg)
    }

    #[test]
    fn zero_epochs_return_initialization() {
        let (ds, ae, cfg) = setup();
        let cfg = TrainConfig {
            phase1_epochs: 0,
            phase2_epochs: 0,
            ..cfg
        };
        let out = train(&ds, Variant::Fairgan, &ae, &cfg).unwrap();
        let init = FairGanModel::init(
            Variant::Fairgan,
            &ae,
            3,
            &[6],
            &[6],
            1.0,
            ds.protected_rate(),
            &mut seeded_stream(cfg.seed, INIT_STREAM),
        )
        .unwrap();
        assert_eq!(out.model, init);
        assert!(out.trace.is_empty());
    }

    #[test]
    fn training_is_reproducible_and_finite() {
        let (ds, ae, cfg) = setup();
        for v in Variant::ALL {
            let a = train(&ds, v, &ae, &cfg).unwrap();
            let b = train(&ds, v, &ae, &cfg).unwrap();
            assert_eq!(a, b);
            let expected = if v.has_d2() { 4 } else { 2 };
            assert_eq!(a.trace.len(), expected);
            assert!(a.trace.iter().all(|r| r.d1_loss.is_finite() && r.g_loss.is_finite()));
        }
    }

    #[test]
    fn zero_lambda_phase2_matches_plain_phase1() {
        let (ds, ae, cfg) = setup();
        let cfg = TrainConfig { lambda: 0.0, ..cfg };
        let mut a = Trainer::new(&ds, Variant::Fairgan, &ae, &cfg).unwrap();
        a.run_phase1(&ds, 1).unwrap();
        a.run_phase2(&ds, 2).unwrap();
        let mut b = Trainer::new(&ds, Variant::Fairgan, &ae, &cfg).unwrap();
        b.run_phase1(&ds, 3).unwrap();
        assert_eq!(a.model().generator, b.model().generator);
        assert_eq!(a.model().d1, b.model().d1);
    }

    #[test]
    fn branching_matches_straight_run() {
        let (ds, ae, cfg) = setup();
        let straight = train(&ds, Variant::Fairgan, &ae, &cfg).unwrap();
        let mut t = Trainer::new(&ds, Variant::Fairgan, &ae, &TrainConfig { lambda: 5.0, ..cfg.clone() }).unwrap();
        t.run_phase1(&ds, 2).unwrap();
        let mut branch = t.clone();
        branch.set_lambda(1.0).unwrap();
        branch.run_phase2(&ds, 2).unwrap();
        assert_eq!(branch.into_outcome(), straight);
        assert_eq!(t.snapshot_as(Variant::Gan).unwrap().d2, None);
        assert!(t.snapshot_as(Variant::Nfgan1).is_err());
    }

    #[test]
    fn rejects_bad_config() {
        let (ds, ae, cfg) = setup();
        assert!(Trainer::new(&ds, Variant::Gan, &ae, &TrainConfig { batch: 3, ..cfg.clone() }).is_err());
        assert!(Trainer::new(&ds, Variant::Gan, &ae, &TrainConfig { lambda: -1.0, ..cfg.clone() }).is_err());
        let wide = AutoencoderModel::init(5, 4, &mut seeded(2)).unwrap();
        assert!(Trainer::new(&ds, Variant::Gan, &wide, &cfg).is_err());
    }

    #[test]
    fn trace_csv_columns() {
        let rows = [TraceRow {
            epoch: 1,
            d1_loss: 1.5,
            g_loss: -0.5,
            d2_loss: None,
            lambda_term: None,
        }];
        let mut out = Vec::new();
        write_trace_csv(&rows, &mut out).unwrap();
        assert_eq!(String::from_utf8(out).unwrap(), "epoch,d1_loss,g_loss,d2_loss,lambda_term\n1,1.5,-0.5,,\n");
    }
}
