//! Downstream predictors and the train/test settings used to compare real
//! and synthetic data.

mod svm;
mod tree;

use std::fmt;
use std::io::Write;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

pub use svm::{train_linear_svm, LinearSvmModel, SVM_EPOCHS};
pub use tree::{train_decision_tree, DecisionTreeModel, Node, TREE_DEPTH};

use crate::data::{split_indices, EncodedDataset};
use crate::error::{Error, Result};
use crate::fairness::risk_difference;
use crate::nn::{seeded_stream, Matrix, Rng};

/// RNG stream for the evaluation split and classifier training.
pub const EVAL_STREAM: u64 = 7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ClassifierKind {
    #[serde(rename = "svm_linear")]
    LinearSvm,
    #[serde(rename = "decision_tree")]
    DecisionTree,
}

impl ClassifierKind {
    pub const ALL: [ClassifierKind; 2] = [ClassifierKind::LinearSvm, ClassifierKind::DecisionTree];

    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::LinearSvm => "svm_linear",
            ClassifierKind::DecisionTree => "decision_tree",
        }
    }
}

impl fmt::Display for ClassifierKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ClassifierKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|k| k.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown classifier `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum Classifier {
    LinearSvm(LinearSvmModel),
    DecisionTree(DecisionTreeModel),
    /// Stands in for a margin classifier when the training labels hold a
    /// single class, as happens with collapsed synthetic data.
    Constant(u8),
}

impl Classifier {
    pub fn train(kind: ClassifierKind, x: &Matrix, y: &[u8], rng: &mut Rng) -> Result<Self> {
        Ok(match kind {
            ClassifierKind::LinearSvm if !y.is_empty() && y.iter().all(|&v| v == y[0]) => Classifier::Constant(y[0]),
            ClassifierKind::LinearSvm => Classifier::LinearSvm(train_linear_svm(x, y, 1.0, rng)?),
            ClassifierKind::DecisionTree => Classifier::DecisionTree(train_decision_tree(x, y, TREE_DEPTH)?),
        })
    }

    pub fn predict(&self, x: &Matrix) -> Result<Vec<u8>> {
        match self {
            Classifier::LinearSvm(m) => m.predict(x),
            Classifier::DecisionTree(m) => m.predict(x),
            Classifier::Constant(c) => Ok(vec![*c; x.rows()]),
        }
    }

    pub fn accuracy(&self, x: &Matrix, y: &[u8]) -> Result<f64> {
        accuracy(&self.predict(x)?, y)
    }
}

pub fn accuracy(predictions: &[u8], truth: &[u8]) -> Result<f64> {
    if predictions.len() != truth.len() {
        return Err(Error::dims("accuracy labels", truth.len(), predictions.len()));
    }
    if truth.is_empty() {
        return Err(Error::Degenerate("accuracy on an empty test set".into()));
    }
    let hits = predictions.iter().zip(truth).filter(|(p, t)| p == t).count();
    Ok(hits as f64 / truth.len() as f64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Setting {
    Real2Real,
    Syn2Syn,
    Syn2Real,
}

impl Setting {
    pub const ALL: [Setting; 3] = [Setting::Real2Real, Setting::Syn2Syn, Setting::Syn2Real];

    pub fn as_str(self) -> &'static str {
        match self {
            Setting::Real2Real => "REAL2REAL",
            Setting::Syn2Syn => "SYN2SYN",
            Setting::Syn2Real => "SYN2REAL",
        }
    }
}

impl fmt::Display for Setting {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub setting: Setting,
    pub classifier: ClassifierKind,
    pub accuracy: f64,
    pub risk_difference: f64,
    pub seed: u64,
}

/// Trains on one side and scores on the other. Features are the encoded
/// unprotected attributes only; `s` is used solely to compute the risk
/// difference of the test-side predictions.
///
/// The split and the classifier's training randomness both come from
/// `seed`. In the two settings that test on real data the real rows are
/// split 1:1 and the second half tests; SYN2REAL trains on the whole
/// synthetic set instead of the first half.
pub fn run_setting(
    setting: Setting,
    kind: ClassifierKind,
    real: &EncodedDataset,
    synthetic: Option<&EncodedDataset>,
    seed: u64,
) -> Result<EvalResult> {
    let mut rng = seeded_stream(seed, EVAL_STREAM);
    let need_syn = || {
        synthetic.ok_or_else(|| Error::Config(format!("{setting} needs a synthetic dataset")))
    };
    let (train, test) = match setting {
        Setting::Real2Real => {
            let (a, b) = split_indices(real.len(), 0.5, &mut rng)?;
            (real.subset(&a), real.subset(&b))
        }
        Setting::Syn2Syn => {
            let syn = need_syn()?;
            let (a, b) = split_indices(syn.len(), 0.5, &mut rng)?;
            (syn.subset(&a), syn.subset(&b))
        }
        Setting::Syn2Real => {
            let syn = need_syn()?;
            let (_, b) = split_indices(real.len(), 0.5, &mut rng)?;
            (syn.clone(), real.subset(&b))
        }
    };
    if train.width() != test.width() {
        return Err(Error::dims("train/test feature width", train.width(), test.width()));
    }
    let model = Classifier::train(kind, &train.x, &train.y, &mut rng)?;
    let predictions = model.predict(&test.x)?;
    Ok(EvalResult {
        setting,
        classifier: kind,
        accuracy: accuracy(&predictions, &test.y)?,
        risk_difference: risk_difference(&predictions, &test.s)?,
        seed,
    })
}

pub const EVAL_HEADER: [&str; 5] = ["setting", "classifier", "accuracy", "risk_difference", "seed"];

pub fn write_eval_csv(results: &[EvalResult], writer: impl Write, header: bool) -> Result<()> {
    let mut w = csv::Writer::from_writer(writer);
    if header {
        w.write_record(EVAL_HEADER)?;
    }
    for r in results {
        w.write_record([
            r.setting.to_string(),
            r.classifier.to_string(),
            r.accuracy.to_string(),
            r.risk_difference.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

/// Appends rows, writing the header only when the file is new or empty.
pub fn append_eval_csv(results: &[EvalResult], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let file = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    write_eval_csv(results, file, fresh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::sample_toy;
    use crate::nn::seeded;

    fn dataset(n: usize, seed: u64) -> EncodedDataset {
        // y follows x; s is a coin flip.
        let mut ds = sample_toy(n, &mut seeded(seed)).unwrap();
        for i in 0..n {
            ds.y[i] = u8::from(ds.x.get(i, 0) > 0.4);
        }
        ds
    }

    #[test]
    fn syn2real_on_the_real_training_half_matches_real2real() {
        let real = dataset(200, 1);
        let mut rng = seeded_stream(9, EVAL_STREAM);
        let (a, _) = split_indices(real.len(), 0.5, &mut rng).unwrap();
        let syn = real.subset(&a);
        for kind in ClassifierKind::ALL {
            let r2r = run_setting(Setting::Real2Real, kind, &real, None, 9).unwrap();
            let s2r = run_setting(Setting::Syn2Real, kind, &real, Some(&syn), 9).unwrap();
            assert_eq!(r2r.accuracy, s2r.accuracy);
            assert_eq!(r2r.risk_difference, s2r.risk_difference);
            assert!(r2r.accuracy > 0.9);
        }
    }

    #[test]
    fn single_class_training_data_gives_a_constant_svm() {
        let real = dataset(100, 2);
        let mut syn = real.clone();
        syn.y.fill(1);
        let r = run_setting(Setting::Syn2Real, ClassifierKind::LinearSvm, &real, Some(&syn), 2).unwrap();
        assert_eq!(r.risk_difference, 0.0);
        let positives = real.y.iter().filter(|&&v| v == 1).count() as f64 / real.len() as f64;
        assert!((r.accuracy - positives).abs() < 0.15);
    }

    #[test]
    fn synthetic_settings_require_synthetic_data() {
        let real = dataset(20, 2);
        assert!(run_setting(Setting::Syn2Syn, ClassifierKind::DecisionTree, &real, None, 0).is_err());
        assert!(run_setting(Setting::Syn2Real, ClassifierKind::LinearSvm, &real, None, 0).is_err());
    }

    #[test]
    fn accuracy_errors() {
        assert!(accuracy(&[], &[]).is_err());
        assert!(accuracy(&[1], &[1, 0]).is_err());
        assert_eq!(accuracy(&[1, 0, 1, 1], &[1, 0, 0, 1]).unwrap(), 0.75);
    }

    #[test]
    fn tree_beats_majority_rate_on_training_data() {
        let ds = dataset(300, 3);
        let t = train_decision_tree(&ds.x, &ds.y, TREE_DEPTH).unwrap();
        let pos = ds.y.iter().filter(|&&v| v == 1).count() as f64 / ds.len() as f64;
        assert!(accuracy(&t.predict(&ds.x).unwrap(), &ds.y).unwrap() >= pos.max(1.0 - pos));
    }

    #[test]
    fn eval_csv_appends_one_header() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("eval.csv");
        let r = EvalResult {
            setting: Setting::Syn2Real,
            classifier: ClassifierKind::LinearSvm,
            accuracy: 0.5,
            risk_difference: -0.25,
            seed: 4,
        };
        append_eval_csv(std::slice::from_ref(&r), &path).unwrap();
        append_eval_csv(&[r], &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(
            text,
            "setting,classifier,accuracy,risk_difference,seed\nSYN2REAL,svm_linear,0.5,-0.25,4\nSYN2REAL,svm_linear,0.5,-0.25,4\n"
        );
    }
}
