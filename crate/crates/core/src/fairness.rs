//! Dataset- and classifier-level fairness measurements, and distances
//! between real and synthetic data.

use std::collections::BTreeMap;
use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::classifiers::train_linear_svm;
use crate::data::{split_indices, EncodedDataset, Value};
use crate::error::{Error, Result};
use crate::nn::{seeded_stream, Matrix};
use crate::theory::FinitePmf;

/// RNG stream for the attacker's split and training.
pub const ATTACK_STREAM: u64 = 8;

fn group_counts(s: &[u8]) -> Result<(usize, usize)> {
    let n1 = s.iter().filter(|&&v| v == 1).count();
    let n0 = s.len() - n1;
    if n1 == 0 {
        return Err(Error::EmptyGroup("s = 1".into()));
    }
    if n0 == 0 {
        return Err(Error::EmptyGroup("s = 0".into()));
    }
    Ok((n1, n0))
}

/// `P(v = 1 | s = 1) − P(v = 1 | s = 0)` for any binary vector `v`
/// (decisions or predictions).
pub fn risk_difference(v: &[u8], s: &[u8]) -> Result<f64> {
    if v.len() != s.len() {
        return Err(Error::dims("risk difference inputs", s.len(), v.len()));
    }
    let (n1, n0) = group_counts(s)?;
    let pos1 = v.iter().zip(s).filter(|&(&v, &s)| v == 1 && s == 1).count();
    let pos0 = v.iter().zip(s).filter(|&(&v, &s)| v == 1 && s == 0).count();
    Ok(pos1 as f64 / n1 as f64 - pos0 as f64 / n0 as f64)
}

pub fn risk_difference_data(ds: &EncodedDataset) -> Result<f64> {
    risk_difference(&ds.y, &ds.s)
}

pub fn risk_difference_classifier(
    predict: impl Fn(&Matrix) -> Result<Vec<u8>>,
    ds: &EncodedDataset,
) -> Result<f64> {
    risk_difference(&predict(&ds.x)?, &ds.s)
}

/// `[P(f = 0 | s = 1) + P(f = 1 | s = 0)] / 2`.
pub fn balanced_error_rate(predicted_s: &[u8], s: &[u8]) -> Result<f64> {
    if predicted_s.len() != s.len() {
        return Err(Error::dims("balanced error rate inputs", s.len(), predicted_s.len()));
    }
    let (n1, n0) = group_counts(s)?;
    let miss1 = predicted_s.iter().zip(s).filter(|&(&p, &s)| s == 1 && p == 0).count();
    let miss0 = predicted_s.iter().zip(s).filter(|&(&p, &s)| s == 0 && p == 1).count();
    Ok(0.5 * (miss1 as f64 / n1 as f64 + miss0 as f64 / n0 as f64))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EpsilonFairness {
    pub ber: f64,
    pub epsilon: f64,
    pub pass: bool,
}

/// A linear SVM (C = 1) learns `s` from the features on one half of a
/// seeded 1:1 split; its balanced error rate on the other half decides
/// whether the data is ε-fair (`ber > ε`).
pub fn epsilon_fair(x: &Matrix, s: &[u8], epsilon: f64, seed: u64) -> Result<EpsilonFairness> {
    if s.len() != x.rows() {
        return Err(Error::dims("attacker labels", x.rows(), s.len()));
    }
    let mut rng = seeded_stream(seed, ATTACK_STREAM);
    let (train, test) = split_indices(x.rows(), 0.5, &mut rng)?;
    let s_train: Vec<u8> = train.iter().map(|&i| s[i]).collect();
    let s_test: Vec<u8> = test.iter().map(|&i| s[i]).collect();
    let attacker = train_linear_svm(&x.select_rows(&train), &s_train, 1.0, &mut rng)?;
    let ber = balanced_error_rate(&attacker.predict(&x.select_rows(&test))?, &s_test)?;
    Ok(EpsilonFairness {
        ber,
        epsilon,
        pass: ber > epsilon,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionRate {
    pub column: String,
    pub p_overall: f64,
    /// Absent when the dataset has no row in that group.
    pub p_s1: Option<f64>,
    pub p_s0: Option<f64>,
}

/// Mean of each encoded column and of the decision, overall and per group.
pub fn dimensionwise_probability(ds: &EncodedDataset) -> Vec<DimensionRate> {
    let mut names = ds.feature_map.column_names();
    names.push(ds.schema.decision.name.clone());
    let width = names.len();
    let mut sums = [vec![0.0; width], vec![0.0; width]];
    let mut counts = [0usize; 2];
    for i in 0..ds.len() {
        let g = usize::from(ds.s[i]);
        counts[g] += 1;
        for (acc, v) in sums[g].iter_mut().zip(ds.x.row(i)) {
            *acc += v;
        }
        sums[g][width - 1] += f64::from(ds.y[i]);
    }
    let n = ds.len().max(1) as f64;
    let rate = |g: usize, c: usize| (counts[g] > 0).then(|| sums[g][c] / counts[g] as f64);
    names
        .into_iter()
        .enumerate()
        .map(|(c, column)| DimensionRate {
            column,
            p_overall: (sums[0][c] + sums[1][c]) / n,
            p_s1: rate(1, c),
            p_s0: rate(0, c),
        })
        .collect()
}

/// Overall rates of two datasets side by side, with the group rates of
/// the second. Absent rates are written as empty cells.
pub fn write_dimensionwise_csv(a: &[DimensionRate], b: &[DimensionRate], writer: impl Write) -> Result<()> {
    if a.len() != b.len() {
        return Err(Error::dims("dimension-wise columns", a.len(), b.len()));
    }
    let opt = |v: Option<f64>| v.map(|v| v.to_string()).unwrap_or_default();
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(["column", "p_overall_A", "p_overall_B", "p_s1", "p_s0"])?;
    for (ra, rb) in a.iter().zip(b) {
        if ra.column != rb.column {
            return Err(Error::Schema(format!("column `{}` paired with `{}`", ra.column, rb.column)));
        }
        w.write_record([
            ra.column.clone(),
            ra.p_overall.to_string(),
            rb.p_overall.to_string(),
            opt(rb.p_s1),
            opt(rb.p_s0),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PmfMode {
    /// `P(x, y)`
    JointXy,
    /// `P(x, y, s)`
    JointXys,
    /// `P(x, y | s = 1)`
    CondS1,
    /// `P(x, y | s = 0)`
    CondS0,
}

impl PmfMode {
    pub const ALL: [PmfMode; 4] = [PmfMode::JointXy, PmfMode::JointXys, PmfMode::CondS1, PmfMode::CondS0];

    pub fn as_str(self) -> &'static str {
        match self {
            PmfMode::JointXy => "joint_xy",
            PmfMode::JointXys => "joint_xys",
            PmfMode::CondS1 => "cond_s1",
            PmfMode::CondS0 => "cond_s0",
        }
    }
}

impl fmt::Display for PmfMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PmfMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown pmf mode `{s}`")))
    }
}

/// Discrete outcome of one row: decoded attribute values (category index
/// or the bit pattern of the decoded number), then `y`, then optionally `s`.
fn outcome_key(ds: &EncodedDataset, i: usize, with_s: bool) -> Vec<u64> {
    let mut key: Vec<u64> = ds
        .feature_map
        .decode(ds.x.row(i))
        .into_iter()
        .map(|v| match v {
            Value::Category(c) => c as u64,
            Value::Number(x) => x.to_bits(),
        })
        .collect();
    key.push(u64::from(ds.y[i]));
    if with_s {
        key.push(u64::from(ds.s[i]));
    }
    key
}

/// Euclidean distance between the empirical PMFs of two datasets over the
/// union of the outcomes either one contains. Outcomes are visited in a
/// fixed order so the result is reproducible to the last bit.
pub fn pmf_distance(a: &EncodedDataset, b: &EncodedDataset, mode: PmfMode) -> Result<f64> {
    if a.schema != b.schema {
        return Err(Error::Schema("datasets use different schemas".into()));
    }
    let keep = |ds: &EncodedDataset| -> Result<Vec<usize>> {
        let rows: Vec<usize> = match mode {
            PmfMode::CondS1 => (0..ds.len()).filter(|&i| ds.s[i] == 1).collect(),
            PmfMode::CondS0 => (0..ds.len()).filter(|&i| ds.s[i] == 0).collect(),
            _ => (0..ds.len()).collect(),
        };
        if rows.is_empty() {
            return Err(Error::EmptyGroup(format!("no rows for {mode}")));
        }
        Ok(rows)
    };
    let (ra, rb) = (keep(a)?, keep(b)?);
    let with_s = mode == PmfMode::JointXys;
    let mut counts: BTreeMap<Vec<u64>, [usize; 2]> = BTreeMap::new();
    for &i in &ra {
        counts.entry(outcome_key(a, i, with_s)).or_default()[0] += 1;
    }
    for &i in &rb {
        counts.entry(outcome_key(b, i, with_s)).or_default()[1] += 1;
    }
    let (na, nb) = (ra.len() as f64, rb.len() as f64);
    let sq: f64 = counts
        .values()
        .map(|[ca, cb]| (*ca as f64 / na - *cb as f64 / nb).powi(2))
        .sum();
    Ok(sq.sqrt())
}

/// Tolerance on the total mass of a PMF handed to [`jsd_values`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// Jensen-Shannon divergence in nats between two probability vectors on
/// the same support.
pub fn jsd_values(p: &[f64], q: &[f64]) -> Result<f64> {
    if p.len() != q.len() {
        return Err(Error::dims("jsd support", p.len(), q.len()));
    }
    for v in [p, q] {
        let total: f64 = v.iter().sum();
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE || v.iter().any(|&x| !(x >= 0.0)) {
            return Err(Error::InvalidPmf(format!("mass {total} is not a distribution")));
        }
    }
    let kl_to_mid = |a: f64, b: f64| if a > 0.0 { a * (2.0 * a / (a + b)).ln() } else { 0.0 };
    let value: f64 = p.iter().zip(q).map(|(&a, &b)| 0.5 * (kl_to_mid(a, b) + kl_to_mid(b, a))).sum();
    Ok(value.clamp(0.0, std::f64::consts::LN_2))
}

pub fn jsd(p: &FinitePmf, q: &FinitePmf) -> Result<f64> {
    p.check_same_space(q)?;
    jsd_values(p.probs(), q.probs())
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FairnessReport {
    pub rows: usize,
    pub risk_difference: f64,
    pub ber: Option<f64>,
    pub epsilon: f64,
    pub epsilon_fair: Option<bool>,
    pub dimensionwise: Vec<DimensionRate>,
    /// Keyed by [`PmfMode`] name; present when a reference dataset is given.
    pub pmf_distances: BTreeMap<String, f64>,
}

impl FairnessReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_json()?)?;
        Ok(())
    }
}

pub struct AuditOptions {
    pub epsilon: f64,
    /// Run the ε-fairness attacker.
    pub attacker: bool,
    pub seed: u64,
}

/// Audits `ds`; distances are measured against `reference` when given.
pub fn audit(ds: &EncodedDataset, reference: Option<&EncodedDataset>, opts: &AuditOptions) -> Result<FairnessReport> {
    let fairness = if opts.attacker {
        Some(epsilon_fair(&ds.x, &ds.s, opts.epsilon, opts.seed)?)
    } else {
        None
    };
    let mut pmf_distances = BTreeMap::new();
    if let Some(r) = reference {
        for mode in PmfMode::ALL {
            pmf_distances.insert(mode.to_string(), pmf_distance(r, ds, mode)?);
        }
    }
    Ok(FairnessReport {
        rows: ds.len(),
        risk_difference: risk_difference_data(ds)?,
        ber: fairness.map(|f| f.ber),
        epsilon: opts.epsilon,
        epsilon_fair: fairness.map(|f| f.pass),
        dimensionwise: dimensionwise_probability(ds),
        pmf_distances,
    })
}
