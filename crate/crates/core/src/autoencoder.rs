//! Encoder/decoder pretraining. The decoder is later fine-tuned as the last
//! stage of the generator; the encoder is not used after pretraining.

use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::nn::{adam_step, Activation, AdamConfig, AdamState, Matrix, Mlp, Rng};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderConfig {
    pub hidden: usize,
    pub epochs: usize,
    pub batch: usize,
    pub learning_rate: f64,
}

impl Default for AutoencoderConfig {
    fn default() -> Self {
        AutoencoderConfig {
            hidden: 128,
            epochs: 200,
            batch: 128,
            learning_rate: 0.001,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderModel {
    pub encoder: Mlp,
    pub decoder: Mlp,
    pub h: usize,
}

impl AutoencoderModel {
    /// Encoder `d → h` (tanh), decoder `h → d` (sigmoid).
    pub fn init(d: usize, h: usize, rng: &mut Rng) -> Result<Self> {
        Ok(AutoencoderModel {
            encoder: Mlp::init(&[d, h], &[Activation::Tanh], rng)?,
            decoder: Mlp::init(&[h, d], &[Activation::Sigmoid], rng)?,
            h,
        })
    }

    pub fn width(&self) -> usize {
        self.encoder.input_dim()
    }

    pub fn reconstruct(&self, x: &Matrix) -> Result<Matrix> {
        self.decoder.predict(&self.encoder.predict(x)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let model: AutoencoderModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if model.encoder.output_dim() != model.h
            || model.decoder.input_dim() != model.h
            || model.decoder.output_dim() != model.encoder.input_dim()
        {
            return Err(Error::Config("autoencoder checkpoint dimensions do not chain".into()));
        }
        Ok(model)
    }
}

/// Mean over rows of the squared Euclidean distance between `x` and `x_rec`.
pub fn reconstruction_loss(x: &Matrix, x_rec: &Matrix) -> Result<f64> {
    if x.shape() != x_rec.shape() {
        return Err(Error::dims(
            "reconstruction shape",
            x.rows() * x.cols(),
            x_rec.rows() * x_rec.cols(),
        ));
    }
    let total: f64 = x
        .as_slice()
        .iter()
        .zip(x_rec.as_slice())
        .map(|(a, b)| (b - a) * (b - a))
        .sum();
    Ok(total / x.rows().max(1) as f64)
}

#[derive(Clone, Debug, PartialEq)]
pub struct PretrainOutcome {
    pub model: AutoencoderModel,
    pub initial_loss: f64,
    /// Mean minibatch loss of each epoch.
    pub trace: Vec<f64>,
}

/// Adam on the reconstruction loss over shuffled minibatches of the rows
/// of `data` (the generator's output space, `[x | y]`).
pub fn pretrain(data: &Matrix, cfg: &AutoencoderConfig, rng: &mut Rng) -> Result<PretrainOutcome> {
    if data.rows() == 0 {
        return Err(Error::Degenerate("cannot pretrain on an empty dataset".into()));
    }
    if cfg.epochs == 0 || cfg.batch == 0 || cfg.hidden == 0 {
        return Err(Error::Config("autoencoder epochs, batch and hidden must be positive".into()));
    }
    let mut model = AutoencoderModel::init(data.cols(), cfg.hidden, rng)?;
    let initial_loss = reconstruction_loss(data, &model.reconstruct(data)?)?;
    let adam = AdamConfig::with_learning_rate(cfg.learning_rate);
    let mut enc_state = AdamState::new(&model.encoder, adam);
    let mut dec_state = AdamState::new(&model.decoder, adam);
    let mut order: Vec<usize> = (0..data.rows()).collect();
    let mut trace = Vec::with_capacity(cfg.epochs);

    for _ in 0..cfg.epochs {
        order.shuffle(rng);
        let mut epoch_loss = 0.0;
        let mut batches = 0;
        for chunk in order.chunks(cfg.batch) {
            let x = data.select_rows(chunk);
            let enc = model.encoder.forward(&x)?;
            let dec = model.decoder.forward(enc.output())?;
            let rec = dec.output();
            epoch_loss += reconstruction_loss(&x, rec)?;
            batches += 1;

            let scale = 2.0 / x.rows() as f64;
            let mut upstream = rec.clone();
            for (u, t) in upstream.as_mut_slice().iter_mut().zip(x.as_slice()) {
                *u = scale * (*u - t);
            }
            let (dec_grads, hidden_grad) = model.decoder.backward(&dec, &upstream)?;
            let enc_grads = model.encoder.backward_params(&enc, &hidden_grad)?;
            adam_step(&mut model.decoder, &dec_grads, &mut dec_state)?;
            adam_step(&mut model.encoder, &enc_grads, &mut enc_state)?;
        }
        trace.push(epoch_loss / batches as f64);
    }
    Ok(PretrainOutcome {
        model,
        initial_loss,
        trace,
    })
}
