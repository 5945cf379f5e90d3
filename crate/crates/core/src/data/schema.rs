use std::collections::HashSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum AttributeKind {
    Categorical { values: Vec<String> },
    Numeric { range: [f64; 2] },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Attribute {
    pub name: String,
    #[serde(flatten)]
    pub kind: AttributeKind,
}

impl Attribute {
    pub fn categorical(name: &str, values: &[&str]) -> Self {
        Attribute {
            name: name.to_string(),
            kind: AttributeKind::Categorical {
                values: values.iter().map(|v| v.to_string()).collect(),
            },
        }
    }

    pub fn numeric(name: &str, min: f64, max: f64) -> Self {
        Attribute {
            name: name.to_string(),
            kind: AttributeKind::Numeric { range: [min, max] },
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionSpec {
    pub name: String,
    pub positive: String,
}

/// `protected_value` is the category encoded as `s = 1`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProtectedSpec {
    pub name: String,
    pub protected_value: String,
}

fn default_missing() -> String {
    "?".to_string()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schema {
    pub attributes: Vec<Attribute>,
    pub decision: DecisionSpec,
    pub protected: ProtectedSpec,
    /// Cell content marking a missing value; rows containing it are dropped.
    #[serde(default = "default_missing")]
    pub missing: String,
}

impl Schema {
    pub fn new(attributes: Vec<Attribute>, decision: DecisionSpec, protected: ProtectedSpec) -> Result<Self> {
        let schema = Schema {
            attributes,
            decision,
            protected,
            missing: default_missing(),
        };
        schema.validate()?;
        Ok(schema)
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let schema: Schema = serde_json::from_str(text)?;
        schema.validate()?;
        Ok(schema)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json_str(&std::fs::read_to_string(path)?)
    }

    pub fn validate(&self) -> Result<()> {
        let mut names = HashSet::new();
        for a in &self.attributes {
            if !names.insert(a.name.as_str()) {
                return Err(Error::Schema(format!("duplicate attribute `{}`", a.name)));
            }
            match &a.kind {
                AttributeKind::Categorical { values } => {
                    if values.is_empty() {
                        return Err(Error::Schema(format!("`{}` has no categories", a.name)));
                    }
                    let mut seen = HashSet::new();
                    if let Some(dup) = values.iter().find(|v| !seen.insert(v.as_str())) {
                        return Err(Error::Schema(format!("`{}` lists `{dup}` twice", a.name)));
                    }
                }
                AttributeKind::Numeric { range: [lo, hi] } => {
                    if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                        return Err(Error::Schema(format!("`{}` has invalid range [{lo}, {hi}]", a.name)));
                    }
                }
            }
        }
        self.binary_index(&self.decision.name, &self.decision.positive, "decision")?;
        self.binary_index(&self.protected.name, &self.protected.protected_value, "protected")?;
        if self.decision.name == self.protected.name {
            return Err(Error::Schema("decision and protected attribute coincide".into()));
        }
        Ok(())
    }

    /// Index of a two-category attribute and the category index of `value`.
    fn binary_index(&self, name: &str, value: &str, role: &str) -> Result<(usize, usize)> {
        let idx = self
            .index_of(name)
            .ok_or_else(|| Error::Schema(format!("{role} attribute `{name}` is not declared")))?;
        match &self.attributes[idx].kind {
            AttributeKind::Categorical { values } if values.len() == 2 => values
                .iter()
                .position(|v| v == value)
                .map(|c| (idx, c))
                .ok_or_else(|| Error::Schema(format!("{role} value `{value}` not among {values:?}"))),
            _ => Err(Error::Schema(format!(
                "{role} attribute `{name}` must be categorical with exactly two values"
            ))),
        }
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.attributes.iter().position(|a| a.name == name)
    }

    /// (attribute index, category index that maps to 1)
    pub fn decision_binary(&self) -> (usize, usize) {
        self.binary_index(&self.decision.name, &self.decision.positive, "decision")
            .expect("validated")
    }

    pub fn protected_binary(&self) -> (usize, usize) {
        self.binary_index(&self.protected.name, &self.protected.protected_value, "protected")
            .expect("validated")
    }

    /// Attributes that make up the feature matrix, in schema order.
    pub fn feature_attributes(&self) -> impl Iterator<Item = (usize, &Attribute)> {
        let (d, _) = self.decision_binary();
        let (p, _) = self.protected_binary();
        self.attributes
            .iter()
            .enumerate()
            .filter(move |(i, _)| *i != d && *i != p)
    }
}
