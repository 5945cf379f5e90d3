use std::path::Path;
use std::sync::Arc;

use rand::Rng as _;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::Variant;
use crate::autoencoder::AutoencoderModel;
use crate::data::{EncodedDataset, FeatureMap, Schema};
use crate::error::{Error, Result};
use crate::nn::{Activation, ForwardCache, Matrix, Mlp, Rng};

/// Latent generator `G` followed by the decoder: `Dec(G(z, s))`, or
/// `Dec(G(z))` for variants that do not condition on `s`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GeneratorGDec {
    pub g: Mlp,
    pub dec: Mlp,
}

pub(crate) struct GeneratorPass {
    pub g: ForwardCache,
    pub dec: ForwardCache,
}

impl GeneratorPass {
    pub fn records(&self) -> &Matrix {
        self.dec.output()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct GeneratedBatch {
    pub x: Matrix,
    /// Continuous decision probabilities.
    pub y: Vec<f64>,
    pub s: Vec<u8>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairGanModel {
    pub variant: Variant,
    pub lambda: f64,
    pub p_s1: f64,
    pub noise_dim: usize,
    pub generator: GeneratorGDec,
    pub d1: Mlp,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub d2: Option<Mlp>,
    /// D1 sees each row next to the mean of its minibatch.
    #[serde(default)]
    pub minibatch_averaging: bool,
}

fn stack(input: usize, hidden: &[usize], output: usize, last: Activation) -> (Vec<usize>, Vec<Activation>) {
    let mut sizes = vec![input];
    sizes.extend_from_slice(hidden);
    sizes.push(output);
    let mut acts = vec![Activation::Relu; hidden.len()];
    acts.push(last);
    (sizes, acts)
}

/// D1 input: the record, the protected value when D1 sees it, and the
/// minibatch mean of the records when averaging.
pub(crate) fn d1_width(record_width: usize, variant: Variant, minibatch_averaging: bool) -> usize {
    record_width * (1 + usize::from(minibatch_averaging)) + usize::from(variant.d1_sees_s())
}

impl FairGanModel {
    /// Fresh networks around a pretrained decoder. `G` ends in `tanh` to
    /// match the encoder's representation range.
    #[allow(clippy::too_many_arguments)]
    pub fn init(
        variant: Variant,
        ae: &AutoencoderModel,
        noise_dim: usize,
        g_hidden: &[usize],
        d_hidden: &[usize],
        lambda: f64,
        p_s1: f64,
        rng: &mut Rng,
    ) -> Result<Self> {
        Self::init_with_averaging(variant, ae, noise_dim, g_hidden, d_hidden, lambda, p_s1, false, rng)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn init_with_averaging(
        variant: Variant,
        ae: &AutoencoderModel,
        noise_dim: usize,
        g_hidden: &[usize],
        d_hidden: &[usize],
        lambda: f64,
        p_s1: f64,
        minibatch_averaging: bool,
        rng: &mut Rng,
    ) -> Result<Self> {
        let record_width = ae.decoder.output_dim();
        let s_dim = usize::from(variant.conditions_on_s());
        let (sizes, acts) = stack(noise_dim + s_dim, g_hidden, ae.h, Activation::Tanh);
        let g = Mlp::init(&sizes, &acts, rng)?;
        let d1_in = d1_width(record_width, variant, minibatch_averaging);
        let (sizes, acts) = stack(d1_in, d_hidden, 1, Activation::Sigmoid);
        let d1 = Mlp::init(&sizes, &acts, rng)?;
        let d2 = if variant.has_d2() {
            let (sizes, acts) = stack(record_width, d_hidden, 1, Activation::Sigmoid);
            Some(Mlp::init(&sizes, &acts, rng)?)
        } else {
            None
        };
        let model = FairGanModel {
            variant,
            lambda,
            p_s1,
            noise_dim,
            generator: GeneratorGDec {
                g,
                dec: ae.decoder.clone(),
            },
            d1,
            d2,
            minibatch_averaging,
        };
        model.validate()?;
        Ok(model)
    }

    /// Width of a generated record `[x | y]`.
    pub fn record_width(&self) -> usize {
        self.generator.dec.output_dim()
    }

    pub fn validate(&self) -> Result<()> {
        let s_dim = usize::from(self.variant.conditions_on_s());
        let gen = &self.generator;
        if gen.g.input_dim() != self.noise_dim + s_dim {
            return Err(Error::dims("generator input", self.noise_dim + s_dim, gen.g.input_dim()));
        }
        if gen.g.output_dim() != gen.dec.input_dim() {
            return Err(Error::dims("decoder input", gen.g.output_dim(), gen.dec.input_dim()));
        }
        let w = self.record_width();
        let d1_in = d1_width(w, self.variant, self.minibatch_averaging);
        if self.d1.input_dim() != d1_in || self.d1.output_dim() != 1 {
            return Err(Error::dims("d1 input", d1_in, self.d1.input_dim()));
        }
        match (&self.d2, self.variant.has_d2()) {
            (Some(d2), true) if d2.input_dim() != w || d2.output_dim() != 1 => {
                return Err(Error::dims("d2 input", w, d2.input_dim()))
            }
            (None, true) => return Err(Error::Config(format!("variant {} needs d2", self.variant))),
            (Some(_), false) => return Err(Error::Config(format!("variant {} has no d2", self.variant))),
            _ => {}
        }
        if !(self.lambda >= 0.0 && self.lambda.is_finite()) {
            return Err(Error::Config(format!("lambda {} must be finite and >= 0", self.lambda)));
        }
        if !(0.0..=1.0).contains(&self.p_s1) {
            return Err(Error::Config(format!("p_s1 {} outside [0, 1]", self.p_s1)));
        }
        Ok(())
    }

    pub(crate) fn noise(&self, n: usize, rng: &mut Rng) -> Matrix {
        let data = (0..n * self.noise_dim).map(|_| rng.sample(StandardNormal)).collect();
        Matrix::from_vec(n, self.noise_dim, data).expect("sized above")
    }

    pub(crate) fn generator_input(&self, z: Matrix, s: &[u8]) -> Result<Matrix> {
        if self.variant.conditions_on_s() {
            let col: Vec<f64> = s.iter().map(|&v| f64::from(v)).collect();
            z.append_column(&col)
        } else {
            Ok(z)
        }
    }

    pub(crate) fn forward_generator(&self, s: &[u8], rng: &mut Rng) -> Result<GeneratorPass> {
        let input = self.generator_input(self.noise(s.len(), rng), s)?;
        let g = self.generator.g.forward(&input)?;
        let dec = self.generator.dec.forward(g.output())?;
        Ok(GeneratorPass { g, dec })
    }

    /// Generated records `[x̂ | ŷ]` for the given protected values.
    pub fn generate_records(&self, s: &[u8], rng: &mut Rng) -> Result<Matrix> {
        let input = self.generator_input(self.noise(s.len(), rng), s)?;
        self.generator.dec.predict(&self.generator.g.predict(&input)?)
    }

    pub fn generate_batch(&self, s: &[u8], rng: &mut Rng) -> Result<GeneratedBatch> {
        let records = self.generate_records(s, rng)?;
        let d = self.record_width() - 1;
        Ok(GeneratedBatch {
            x: records.select_columns(0..d),
            y: records.column(d),
            s: s.to_vec(),
        })
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let model: FairGanModel = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        model.validate()?;
        Ok(model)
    }
}

const SYNTH_CHUNK: usize = 4096;

/// `n` discrete synthetic rows: `ŝ ~ Bernoulli(p_s1)`, categorical groups
/// snapped to one-hot, `ŷ` thresholded at 0.5, numerics clipped.
pub fn synthesize(model: &FairGanModel, schema: Arc<Schema>, n: usize, rng: &mut Rng) -> Result<EncodedDataset> {
    let fm = FeatureMap::from_schema(&schema);
    let d = fm.width();
    if model.record_width() != d + 1 {
        return Err(Error::dims("generator record width", d + 1, model.record_width()));
    }
    let s: Vec<u8> = (0..n).map(|_| u8::from(rng.random_bool(model.p_s1))).collect();
    let mut x = Matrix::zeros(n, d);
    let mut y = Vec::with_capacity(n);
    for (c, chunk) in s.chunks(SYNTH_CHUNK).enumerate() {
        let records = model.generate_records(chunk, rng)?;
        for (i, rec) in records.row_iter().enumerate() {
            let row = x.row_mut(c * SYNTH_CHUNK + i);
            row.copy_from_slice(&rec[..d]);
            fm.discretize(row);
            y.push(u8::from(rec[d] >= 0.5));
        }
    }
    EncodedDataset::new(schema, x, y, s)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::{toy_schema, AttributeKind};
    use crate::nn::seeded;

    fn model(variant: Variant) -> FairGanModel {
        let ae = AutoencoderModel::init(2, 4, &mut seeded(1)).unwrap();
        FairGanModel::init(variant, &ae, 3, &[5], &[6], 1.0, 0.5, &mut seeded(2)).unwrap()
    }

    #[test]
    fn widths_follow_variant() {
        assert_eq!(model(Variant::Fairgan).d1.input_dim(), 3);
        assert_eq!(model(Variant::Fairgan).generator.g.input_dim(), 4);
        assert_eq!(model(Variant::Nfgan2).d1.input_dim(), 2);
        assert_eq!(model(Variant::Nfgan2).generator.g.input_dim(), 3);
        assert!(model(Variant::Nfgan1).d2.is_none());
        assert_eq!(model(Variant::Nfgan2).d2.as_ref().unwrap().input_dim(), 2);
    }

    #[test]
    fn zero_weights_give_half() {
        let mut m = model(Variant::Fairgan);
        m.generator.g = Mlp::zeros(&[4, 5, 4], &[Activation::Relu, Activation::Tanh]).unwrap();
        m.generator.dec = Mlp::zeros(&[4, 2], &[Activation::Sigmoid]).unwrap();
        let b = m.generate_batch(&[1, 0, 1], &mut seeded(0)).unwrap();
        assert!(b.x.as_slice().iter().chain(&b.y).all(|&v| v == 0.5));
    }

    #[test]
    fn generation_is_seeded_and_keeps_s() {
        let m = model(Variant::Fairgan);
        let s = [1, 0, 0, 1, 1];
        let a = m.generate_batch(&s, &mut seeded(7)).unwrap();
        let b = m.generate_batch(&s, &mut seeded(7)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.s, s);
        assert!(a.x.as_slice().iter().all(|&v| v > 0.0 && v < 1.0));
    }

    #[test]
    fn synthesize_sizes_and_rates() {
        let m = model(Variant::Nfgan1);
        let schema = Arc::new(toy_schema());
        assert_eq!(synthesize(&m, schema.clone(), 0, &mut seeded(0)).unwrap().len(), 0);
        let n = 100_000;
        let ds = synthesize(&m, schema, n, &mut seeded(3)).unwrap();
        let frac = ds.protected_rate();
        assert!((frac - 0.5).abs() < 3.0 * (0.25 / n as f64).sqrt());
        assert!(ds.x.as_slice().iter().all(|&v| (0.0..=1.0).contains(&v)));
    }

    #[test]
    fn synthesized_groups_are_one_hot() {
        let raw = crate::data::read_table(
            "c,v,y,s\na,1,n,p\nb,2,y,q\n".as_bytes(),
            &Schema::new(
                vec![
                    crate::data::Attribute::categorical("c", &["a", "b", "c"]),
                    crate::data::Attribute::numeric("v", 0.0, 4.0),
                    crate::data::Attribute::categorical("y", &["n", "y"]),
                    crate::data::Attribute::categorical("s", &["p", "q"]),
                ],
                crate::data::DecisionSpec {
                    name: "y".into(),
                    positive: "y".into(),
                },
                crate::data::ProtectedSpec {
                    name: "s".into(),
                    protected_value: "q".into(),
                },
            )
            .unwrap(),
        )
        .unwrap();
        let ds = crate::data::encode(&raw);
        let ae = AutoencoderModel::init(5, 4, &mut seeded(1)).unwrap();
        let m = FairGanModel::init(Variant::Gan, &ae, 3, &[5], &[6], 0.0, 0.3, &mut seeded(2)).unwrap();
        let syn = synthesize(&m, ds.schema.clone(), 10_000, &mut seeded(4)).unwrap();
        for g in &syn.feature_map.groups {
            if let AttributeKind::Categorical { .. } = g.kind {
                for r in syn.x.row_iter() {
                    assert_eq!(r[g.range()].iter().sum::<f64>(), 1.0);
                }
            }
        }
    }

    #[test]
    fn checkpoint_layout_and_roundtrip() {
        let m = model(Variant::Fairgan);
        let v: serde_json::Value = serde_json::to_value(&m).unwrap();
        for key in ["variant", "lambda", "p_s1", "noise_dim", "generator", "d1", "d2"] {
            assert!(v.get(key).is_some(), "{key}");
        }
        assert!(v["generator"].get("g").is_some() && v["generator"].get("dec").is_some());
        let n1 = serde_json::to_value(model(Variant::Nfgan1)).unwrap();
        assert!(n1.get("d2").is_none());
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.json");
        m.save(&p).unwrap();
        assert_eq!(FairGanModel::load(&p).unwrap(), m);
    }
}
