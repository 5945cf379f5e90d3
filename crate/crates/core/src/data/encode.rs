use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::schema::{AttributeKind, Schema};
use super::table::{RawTable, Value};
use crate::error::{Error, Result};
use crate::nn::{Matrix, Rng};

/// One attribute's block of encoded columns, `start..start + width`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureGroup {
    pub attribute: String,
    pub kind: AttributeKind,
    pub start: usize,
    pub width: usize,
}

impl FeatureGroup {
    pub fn range(&self) -> std::ops::Range<usize> {
        self.start..self.start + self.width
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMap {
    pub groups: Vec<FeatureGroup>,
}

impl FeatureMap {
    pub fn from_schema(schema: &Schema) -> Self {
        let mut start = 0;
        let groups = schema
            .feature_attributes()
            .map(|(_, a)| {
                let width = match &a.kind {
                    AttributeKind::Categorical { values } => values.len(),
                    AttributeKind::Numeric { .. } => 1,
                };
                let g = FeatureGroup {
                    attribute: a.name.clone(),
                    kind: a.kind.clone(),
                    start,
                    width,
                };
                start += width;
                g
            })
            .collect();
        FeatureMap { groups }
    }

    pub fn width(&self) -> usize {
        self.groups.last().map_or(0, |g| g.start + g.width)
    }

    pub fn column_names(&self) -> Vec<String> {
        self.groups
            .iter()
            .flat_map(|g| match &g.kind {
                AttributeKind::Categorical { values } => values
                    .iter()
                    .map(|v| format!("{}={v}", g.attribute))
                    .collect::<Vec<_>>(),
                AttributeKind::Numeric { .. } => vec![g.attribute.clone()],
            })
            .collect()
    }

    /// Writes one record's feature values into `out` (length `width()`).
    pub fn encode_into(&self, values: &[&Value], out: &mut [f64]) {
        for (g, v) in self.groups.iter().zip(values) {
            match (&g.kind, v) {
                (AttributeKind::Categorical { .. }, Value::Category(c)) => {
                    out[g.range()].fill(0.0);
                    out[g.start + c] = 1.0;
                }
                (AttributeKind::Numeric { range: [lo, hi] }, Value::Number(x)) => {
                    out[g.start] = (x - lo) / (hi - lo);
                }
                _ => unreachable!("values are validated against the schema"),
            }
        }
    }

    /// Inverse of the encoding for possibly soft rows: argmax per
    /// categorical group (ties to the lowest column) and clipped un-scaling
    /// for numerics.
    pub fn decode(&self, row: &[f64]) -> Vec<Value> {
        self.groups
            .iter()
            .map(|g| match &g.kind {
                AttributeKind::Categorical { .. } => Value::Category(argmax(&row[g.range()])),
                AttributeKind::Numeric { range: [lo, hi] } => {
                    Value::Number((lo + row[g.start] * (hi - lo)).clamp(*lo, *hi))
                }
            })
            .collect()
    }

    /// Snaps a soft row onto the encoded domain: exact one-hot groups and
    /// numerics clipped to `[0, 1]`.
    pub fn discretize(&self, row: &mut [f64]) {
        for g in &self.groups {
            match g.kind {
                AttributeKind::Categorical { .. } => {
                    let c = argmax(&row[g.range()]);
                    row[g.range()].fill(0.0);
                    row[g.start + c] = 1.0;
                }
                AttributeKind::Numeric { .. } => row[g.start] = row[g.start].clamp(0.0, 1.0),
            }
        }
    }
}

/// Index of the largest entry; the first one wins ties.
fn argmax(xs: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate() {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Feature matrix with decision and protected vectors split off.
#[derive(Clone, Debug, PartialEq)]
pub struct EncodedDataset {
    pub schema: Arc<Schema>,
    pub feature_map: FeatureMap,
    pub x: Matrix,
    pub y: Vec<u8>,
    pub s: Vec<u8>,
}

pub fn encode(raw: &RawTable) -> EncodedDataset {
    let schema = raw.schema().clone();
    let feature_map = FeatureMap::from_schema(&schema);
    let (d_idx, d_pos) = schema.decision_binary();
    let (p_idx, p_val) = schema.protected_binary();
    let feature_idx: Vec<usize> = schema.feature_attributes().map(|(i, _)| i).collect();
    let width = feature_map.width();

    let mut x = Matrix::zeros(raw.len(), width);
    let mut y = Vec::with_capacity(raw.len());
    let mut s = Vec::with_capacity(raw.len());
    for (r, row) in raw.rows().iter().enumerate() {
        let values: Vec<&Value> = feature_idx.iter().map(|&i| &row[i]).collect();
        feature_map.encode_into(&values, x.row_mut(r));
        y.push(u8::from(row[d_idx] == Value::Category(d_pos)));
        s.push(u8::from(row[p_idx] == Value::Category(p_val)));
    }
    EncodedDataset {
        schema,
        feature_map,
        x,
        y,
        s,
    }
}

impl EncodedDataset {
    pub fn new(schema: Arc<Schema>, x: Matrix, y: Vec<u8>, s: Vec<u8>) -> Result<Self> {
        let feature_map = FeatureMap::from_schema(&schema);
        if x.cols() != feature_map.width() {
            return Err(Error::dims("encoded feature width", feature_map.width(), x.cols()));
        }
        if y.len() != x.rows() || s.len() != x.rows() {
            return Err(Error::dims("decision/protected vector length", x.rows(), y.len().min(s.len())));
        }
        if y.iter().chain(&s).any(|&v| v > 1) {
            return Err(Error::Degenerate("decision and protected values must be 0 or 1".into()));
        }
        Ok(EncodedDataset {
            schema,
            feature_map,
            x,
            y,
            s,
        })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn width(&self) -> usize {
        self.x.cols()
    }

    pub fn subset(&self, indices: &[usize]) -> EncodedDataset {
        EncodedDataset {
            schema: self.schema.clone(),
            feature_map: self.feature_map.clone(),
            x: self.x.select_rows(indices),
            y: indices.iter().map(|&i| self.y[i]).collect(),
            s: indices.iter().map(|&i| self.s[i]).collect(),
        }
    }

    /// Empirical `P(s = 1)`.
    pub fn protected_rate(&self) -> f64 {
        self.s.iter().map(|&v| f64::from(v)).sum::<f64>() / self.len().max(1) as f64
    }

    /// `[x | y]`, the space the generator produces.
    pub fn features_with_decision(&self) -> Matrix {
        let y: Vec<f64> = self.y.iter().map(|&v| f64::from(v)).collect();
        self.x.append_column(&y).expect("row counts agree")
    }

    /// Decodes every row back to a schema-conforming table.
    pub fn to_raw(&self) -> RawTable {
        let schema = &self.schema;
        let (d_idx, d_pos) = schema.decision_binary();
        let (p_idx, p_val) = schema.protected_binary();
        let feature_idx: Vec<usize> = schema.feature_attributes().map(|(i, _)| i).collect();
        let rows = (0..self.len())
            .map(|r| {
                let mut row = vec![Value::Number(0.0); schema.attributes.len()];
                for (&i, v) in feature_idx.iter().zip(self.feature_map.decode(self.x.row(r))) {
                    row[i] = v;
                }
                row[d_idx] = Value::Category(if self.y[r] == 1 { d_pos } else { 1 - d_pos });
                row[p_idx] = Value::Category(if self.s[r] == 1 { p_val } else { 1 - p_val });
                row
            })
            .collect();
        RawTable::new(schema.clone(), rows).expect("decoded values conform to the schema")
    }

    /// One column per encoded dimension, then `y` and `s`.
    pub fn write_encoded_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let mut header = self.feature_map.column_names();
        header.push("y".into());
        header.push("s".into());
        w.write_record(&header)?;
        for r in 0..self.len() {
            let mut cells: Vec<String> = self.x.row(r).iter().map(|v| v.to_string()).collect();
            cells.push(self.y[r].to_string());
            cells.push(self.s[r].to_string());
            w.write_record(&cells)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_encoded_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_encoded_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

/// Seeded shuffle into `(train, test)` with `⌊n·ratio⌋` training rows.
pub fn split(ds: &EncodedDataset, ratio: f64, rng: &mut Rng) -> Result<(EncodedDataset, EncodedDataset)> {
    let (train, test) = split_indices(ds.len(), ratio, rng)?;
    Ok((ds.subset(&train), ds.subset(&test)))
}

pub fn split_indices(n: usize, ratio: f64, rng: &mut Rng) -> Result<(Vec<usize>, Vec<usize>)> {
    if n < 2 {
        return Err(Error::Degenerate(format!("cannot split {n} rows")));
    }
    if !(ratio > 0.0 && ratio < 1.0) {
        return Err(Error::Config(format!("split ratio {ratio} outside (0, 1)")));
    }
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(rng);
    let cut = (n as f64 * ratio).floor() as usize;
    let test = idx.split_off(cut);
    Ok((idx, test))
}

/// Subsample of `n` rows that keeps each `(s, y)` cell's share of the data
/// (largest-remainder allocation), so group rates survive the subsample.
pub fn stratified_subsample(ds: &EncodedDataset, n: usize, rng: &mut Rng) -> Result<EncodedDataset> {
    if n > ds.len() {
        return Err(Error::Config(format!("subsample of {n} from {} rows", ds.len())));
    }
    let mut cells: [Vec<usize>; 4] = Default::default();
    for i in 0..ds.len() {
        cells[usize::from(ds.s[i]) * 2 + usize::from(ds.y[i])].push(i);
    }
    let total = ds.len() as f64;
    let quotas: Vec<f64> = cells.iter().map(|c| c.len() as f64 * n as f64 / total).collect();
    let mut take: Vec<usize> = quotas.iter().map(|q| q.floor() as usize).collect();
    let mut order: Vec<usize> = (0..4).collect();
    order.sort_by(|&a, &b| {
        let (ra, rb) = (quotas[a] - quotas[a].floor(), quotas[b] - quotas[b].floor());
        rb.total_cmp(&ra).then(a.cmp(&b))
    });
    let mut remaining = n - take.iter().sum::<usize>();
    for &c in &order {
        if remaining == 0 {
            break;
        }
        take[c] += 1;
        remaining -= 1;
    }
    let mut chosen = Vec::with_capacity(n);
    for (cell, k) in cells.iter_mut().zip(take) {
        cell.shuffle(rng);
        chosen.extend_from_slice(&cell[..k]);
    }
    chosen.sort_unstable();
    Ok(ds.subset(&chosen))
}
