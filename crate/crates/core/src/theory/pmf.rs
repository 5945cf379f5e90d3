use std::collections::HashSet;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest deviation of a PMF's total mass from 1.
pub const PMF_TOLERANCE: f64 = 1e-12;

/// A point of the finite sample space. `s` is `None` for distributions
/// over `(x, y)` only.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Outcome {
    pub x: String,
    pub y: u8,
    pub s: Option<u8>,
}

impl Outcome {
    pub fn new(x: impl Into<String>, y: u8, s: Option<u8>) -> Self {
        Outcome { x: x.into(), y, s }
    }

    fn xy(&self) -> Outcome {
        Outcome::new(self.x.clone(), self.y, None)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct FinitePmf {
    outcomes: Vec<Outcome>,
    probs: Vec<f64>,
}

impl FinitePmf {
    pub fn new(outcomes: Vec<Outcome>, probs: Vec<f64>) -> Result<Self> {
        if outcomes.len() != probs.len() {
            return Err(Error::dims("pmf outcomes", outcomes.len(), probs.len()));
        }
        if outcomes.is_empty() {
            return Err(Error::InvalidPmf("empty sample space".into()));
        }
        let mut seen = HashSet::new();
        for o in &outcomes {
            if o.y > 1 || o.s.is_some_and(|s| s > 1) {
                return Err(Error::InvalidPmf(format!("outcome {o:?} has a non-binary y or s")));
            }
            if !seen.insert(o) {
                return Err(Error::InvalidPmf(format!("outcome {o:?} listed twice")));
            }
        }
        if outcomes.iter().any(|o| o.s.is_some()) != outcomes.iter().all(|o| o.s.is_some()) {
            return Err(Error::InvalidPmf("outcomes mix (x, y) and (x, y, s) points".into()));
        }
        if let Some(p) = probs.iter().find(|p| !(p.is_finite() && **p >= 0.0)) {
            return Err(Error::InvalidPmf(format!("probability {p} is negative or not finite")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidPmf(format!("probabilities sum to {total}")));
        }
        Ok(FinitePmf { outcomes, probs })
    }

    /// Normalizes non-negative weights.
    pub fn from_weights(outcomes: Vec<Outcome>, weights: &[f64]) -> Result<Self> {
        let total: f64 = weights.iter().sum();
        if !(total > 0.0 && total.is_finite()) {
            return Err(Error::InvalidPmf(format!("weights sum to {total}")));
        }
        Self::new(outcomes, weights.iter().map(|w| w / total).collect())
    }

    pub fn outcomes(&self) -> &[Outcome] {
        &self.outcomes
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn has_protected(&self) -> bool {
        self.outcomes[0].s.is_some()
    }

    pub fn check_same_space(&self, other: &FinitePmf) -> Result<()> {
        if self.outcomes != other.outcomes {
            return Err(Error::InvalidPmf("distributions live on different outcome lists".into()));
        }
        Ok(())
    }

    /// Same distribution over new probabilities; the caller keeps the
    /// outcome list fixed.
    pub fn with_probs(&self, probs: Vec<f64>) -> Result<Self> {
        Self::new(self.outcomes.clone(), probs)
    }

    /// `P(s = 1)`
    pub fn protected_mass(&self) -> Result<f64> {
        if !self.has_protected() {
            return Err(Error::InvalidPmf("distribution has no protected attribute".into()));
        }
        Ok(self.outcomes.iter().zip(&self.probs).filter(|(o, _)| o.s == Some(1)).map(|(_, p)| p).sum())
    }

    /// `(x, y)` points in first-appearance order.
    pub fn xy_space(&self) -> Vec<Outcome> {
        let mut seen = HashSet::new();
        self.outcomes.iter().map(Outcome::xy).filter(|o| seen.insert(o.clone())).collect()
    }

    /// `P(x, y | s = 1)` and `P(x, y | s = 0)` on the shared `(x, y)` space.
    pub fn conditionals(&self) -> Result<(FinitePmf, FinitePmf)> {
        if !self.has_protected() {
            return Err(Error::InvalidPmf("distribution has no protected attribute".into()));
        }
        let space = self.xy_space();
        let mut mass = [vec![0.0; space.len()], vec![0.0; space.len()]];
        for (o, &p) in self.outcomes.iter().zip(&self.probs) {
            let k = space.iter().position(|q| q.x == o.x && q.y == o.y).expect("in space");
            mass[usize::from(o.s == Some(1))][k] += p;
        }
        let [m0, m1] = mass;
        let cond = |m: Vec<f64>, label: &str| {
            if m.iter().sum::<f64>() <= 0.0 {
                return Err(Error::EmptyGroup(format!("distribution puts no mass on {label}")));
            }
            FinitePmf::from_weights(space.clone(), &m)
        };
        Ok((cond(m1, "s = 1")?, cond(m0, "s = 0")?))
    }

    /// `P(x, y)`.
    pub fn marginal_xy(&self) -> Result<FinitePmf> {
        let space = self.xy_space();
        let mut mass = vec![0.0; space.len()];
        for (o, &p) in self.outcomes.iter().zip(&self.probs) {
            mass[space.iter().position(|q| q.x == o.x && q.y == o.y).expect("in space")] += p;
        }
        FinitePmf::from_weights(space, &mass)
    }

    /// `P(x, y, s) = P(s) · P(x, y | s)` from two conditionals on one space.
    pub fn from_conditionals(p_s1: f64, cond1: &FinitePmf, cond0: &FinitePmf) -> Result<FinitePmf> {
        cond1.check_same_space(cond0)?;
        if !(0.0..=1.0).contains(&p_s1) {
            return Err(Error::InvalidPmf(format!("P(s = 1) = {p_s1}")));
        }
        let mut outcomes = Vec::with_capacity(2 * cond1.len());
        let mut probs = Vec::with_capacity(2 * cond1.len());
        for (s, w, c) in [(1u8, p_s1, cond1), (0, 1.0 - p_s1, cond0)] {
            for (o, &p) in c.outcomes.iter().zip(&c.probs) {
                outcomes.push(Outcome::new(o.x.clone(), o.y, Some(s)));
                probs.push(w * p);
            }
        }
        FinitePmf::from_weights(outcomes, &probs)
    }
}
