use std::sync::Arc;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use super::encode::EncodedDataset;
use super::schema::{Attribute, DecisionSpec, ProtectedSpec, Schema};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Rng};

pub const TOY_LOW: f64 = -1.0;
pub const TOY_HIGH: f64 = 5.0;
pub const TOY_MEAN_S1: f64 = 1.0;
pub const TOY_MEAN_S0: f64 = 3.0;
/// The second Gaussian parameter is a variance of 0.5.
pub const TOY_VARIANCE: f64 = 0.5;

pub fn toy_schema() -> Schema {
    Schema::new(
        vec![
            Attribute::numeric("x", TOY_LOW, TOY_HIGH),
            Attribute::categorical("y", &["0", "1"]),
            Attribute::categorical("s", &["0", "1"]),
        ],
        DecisionSpec {
            name: "y".into(),
            positive: "1".into(),
        },
        ProtectedSpec {
            name: "s".into(),
            protected_value: "1".into(),
        },
    )
    .expect("toy schema is valid")
}

pub fn scale_toy(x: f64) -> f64 {
    (x.clamp(TOY_LOW, TOY_HIGH) - TOY_LOW) / (TOY_HIGH - TOY_LOW)
}

pub fn unscale_toy(u: f64) -> f64 {
    TOY_LOW + u.clamp(0.0, 1.0) * (TOY_HIGH - TOY_LOW)
}

/// Two-group Gaussian mixture: `s ~ Bernoulli(0.5)`, `x | s=1 ~ N(1, 0.5)`,
/// `x | s=0 ~ N(3, 0.5)`, clipped to `[-1, 5]` and scaled to `[0, 1]`.
/// `y` is constant zero.
pub fn sample_toy(n: usize, rng: &mut Rng) -> Result<EncodedDataset> {
    if n == 0 {
        return Err(Error::Degenerate("toy sample needs n >= 1".into()));
    }
    let sd = TOY_VARIANCE.sqrt();
    let g1 = Normal::new(TOY_MEAN_S1, sd).expect("finite parameters");
    let g0 = Normal::new(TOY_MEAN_S0, sd).expect("finite parameters");
    let mut xs = Vec::with_capacity(n);
    let mut s = Vec::with_capacity(n);
    for _ in 0..n {
        let si = rng.random_bool(0.5);
        let x = if si { g1.sample(rng) } else { g0.sample(rng) };
        xs.push(scale_toy(x));
        s.push(u8::from(si));
    }
    EncodedDataset::new(Arc::new(toy_schema()), Matrix::from_vec(n, 1, xs)?, vec![0; n], s)
}
