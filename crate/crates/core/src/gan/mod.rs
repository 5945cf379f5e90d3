//! The four generator/discriminator families and their training loop.

mod losses;
mod model;
mod train;

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

pub use losses::{generator_terms, v1_losses, v1_terms, v2_losses, v2_terms, GeneratorLoss, LossTerms};
pub use model::{synthesize, FairGanModel, GeneratedBatch, GeneratorGDec};
pub use train::{train, write_trace_csv, TraceRow, TrainConfig, TrainOutcome, Trainer};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Conditional generator, one discriminator on `(x, y, s)`.
    Gan,
    /// Unconditional generator on `(x, y)`; `s` drawn independently.
    Nfgan1,
    /// Unconditional generator; real conditionals weighted equally, plus a
    /// group discriminator on generated samples.
    Nfgan2,
    /// Conditional generator with the group discriminator.
    Fairgan,
}

impl Variant {
    pub const ALL: [Variant; 4] = [Variant::Gan, Variant::Nfgan1, Variant::Nfgan2, Variant::Fairgan];

    pub fn conditions_on_s(self) -> bool {
        matches!(self, Variant::Gan | Variant::Fairgan)
    }

    /// D1 sees the protected column.
    pub fn d1_sees_s(self) -> bool {
        self.conditions_on_s()
    }

    pub fn has_d2(self) -> bool {
        matches!(self, Variant::Nfgan2 | Variant::Fairgan)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Variant::Gan => "gan",
            Variant::Nfgan1 => "nfgan1",
            Variant::Nfgan2 => "nfgan2",
            Variant::Fairgan => "fairgan",
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .into_iter()
            .find(|v| v.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}` (expected gan, nfgan1, nfgan2 or fairgan)")))
    }
}
