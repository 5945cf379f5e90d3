//! JSON form of network parameters: an object keyed by layer index, each
//! layer holding its flat row-major weights. Floats are written in the
//! shortest form that parses back to the identical `f64`.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{Activation, Layer, Matrix, Mlp};
use crate::error::Error;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LayerRecord {
    pub rows: usize,
    pub cols: usize,
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub activation: Activation,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct MlpRecord(pub BTreeMap<usize, LayerRecord>);

impl From<Mlp> for MlpRecord {
    fn from(mlp: Mlp) -> Self {
        MlpRecord(
            mlp.layers()
                .iter()
                .enumerate()
                .map(|(i, l)| {
                    (
                        i,
                        LayerRecord {
                            rows: l.weights.rows(),
                            cols: l.weights.cols(),
                            weights: l.weights.as_slice().to_vec(),
                            bias: l.bias.clone(),
                            activation: l.activation,
                        },
                    )
                })
                .collect(),
        )
    }
}

impl TryFrom<MlpRecord> for Mlp {
    type Error = Error;

    fn try_from(record: MlpRecord) -> Result<Self, Self::Error> {
        let mut layers = Vec::with_capacity(record.0.len());
        for (expected, (index, l)) in record.0.into_iter().enumerate() {
            if index != expected {
                return Err(Error::Config(format!(
                    "checkpoint layers must be numbered contiguously from 0; found {index} at position {expected}"
                )));
            }
            layers.push(Layer {
                weights: Matrix::from_vec(l.rows, l.cols, l.weights)?,
                bias: l.bias,
                activation: l.activation,
            });
        }
        Mlp::new(layers)
    }
}

impl Serialize for Mlp {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        MlpRecord::from(self.clone()).serialize(serializer)
    }
}

impl<'de> Deserialize<'de> for Mlp {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let record = MlpRecord::deserialize(deserializer)?;
        Mlp::try_from(record).map_err(serde::de::Error::custom)
    }
}
