use std::path::Path;

use serde::{Deserialize, Serialize};

use super::game::{fairgan_value, nfgan2_value_and_optimum, GameEvaluation, Nfgan2Evaluation};
use super::pmf::{FinitePmf, Outcome};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioOutcome {
    pub x: String,
    pub y: u8,
    pub s: u8,
    /// Data mass.
    pub p: f64,
    /// Generator mass.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub g: Option<f64>,
}

/// A finite data distribution, optionally a generator distribution, and
/// the fairness weight.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    pub outcomes: Vec<ScenarioOutcome>,
    #[serde(default = "default_lambda")]
    pub lambda: f64,
}

fn default_lambda() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    /// Present when the scenario gives generator masses.
    pub fairgan: Option<GameEvaluation>,
    /// Game value at the optimum of the variant without access to `s`.
    pub nfgan2_optimum: Nfgan2Evaluation,
    pub nfgan2_optimum_table: Vec<(Outcome, f64)>,
}

impl Scenario {
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    fn space(&self) -> Vec<Outcome> {
        self.outcomes.iter().map(|o| Outcome::new(o.x.clone(), o.y, Some(o.s))).collect()
    }

    pub fn p_data(&self) -> Result<FinitePmf> {
        FinitePmf::new(self.space(), self.outcomes.iter().map(|o| o.p).collect())
    }

    pub fn p_g(&self) -> Result<Option<FinitePmf>> {
        let g: Option<Vec<f64>> = self.outcomes.iter().map(|o| o.g).collect();
        match g {
            Some(g) => Ok(Some(FinitePmf::new(self.space(), g)?)),
            None if self.outcomes.iter().any(|o| o.g.is_some()) => {
                Err(Error::InvalidPmf("generator mass given for some outcomes only".into()))
            }
            None => Ok(None),
        }
    }

    pub fn evaluate(&self) -> Result<ScenarioReport> {
        let p = self.p_data()?;
        let fairgan = self.p_g()?.map(|g| fairgan_value(&p, &g, self.lambda)).transpose()?;
        let opt = nfgan2_value_and_optimum(&p)?;
        Ok(ScenarioReport {
            fairgan,
            nfgan2_optimum: opt.evaluation,
            nfgan2_optimum_table: opt.optimum.outcomes().iter().cloned().zip(opt.optimum.probs().iter().copied()).collect(),
        })
    }
}
