use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use super::schema::{AttributeKind, Schema};
use crate::error::{Error, Result};

/// A validated cell: category index into the attribute's value list, or a
/// number inside the attribute's range.
#[derive(Clone, Debug, PartialEq)]
pub enum Value {
    Category(usize),
    Number(f64),
}

/// Validated records, one value per schema attribute in schema order.
#[derive(Clone, Debug, PartialEq)]
pub struct RawTable {
    schema: Arc<Schema>,
    rows: Vec<Vec<Value>>,
    /// Records skipped at load time because a cell held the missing marker.
    pub dropped_missing: usize,
}

impl RawTable {
    pub fn new(schema: Arc<Schema>, rows: Vec<Vec<Value>>) -> Result<Self> {
        for (r, row) in rows.iter().enumerate() {
            validate_row(&schema, row, r + 1)?;
        }
        Ok(RawTable {
            schema,
            rows,
            dropped_missing: 0,
        })
    }

    pub fn schema(&self) -> &Arc<Schema> {
        &self.schema
    }

    pub fn rows(&self) -> &[Vec<Value>] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Records read from the source, including dropped ones.
    pub fn records_read(&self) -> usize {
        self.rows.len() + self.dropped_missing
    }

    pub fn write_csv(&self, writer: impl Write) -> Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        w.write_record(self.schema.attributes.iter().map(|a| a.name.as_str()))?;
        for row in &self.rows {
            let cells = row.iter().zip(&self.schema.attributes).map(|(v, a)| match (v, &a.kind) {
                (Value::Category(c), AttributeKind::Categorical { values }) => values[*c].clone(),
                (Value::Number(x), _) => x.to_string(),
                (Value::Category(c), _) => c.to_string(),
            });
            w.write_record(cells)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))
    }
}

fn validate_row(schema: &Schema, row: &[Value], row_number: usize) -> Result<()> {
    if row.len() != schema.attributes.len() {
        return Err(Error::dims(
            format!("row {row_number} value count"),
            schema.attributes.len(),
            row.len(),
        ));
    }
    for (v, a) in row.iter().zip(&schema.attributes) {
        let bad = |message: String| Error::InvalidValue {
            row: row_number,
            attribute: a.name.clone(),
            message,
        };
        match (v, &a.kind) {
            (Value::Category(c), AttributeKind::Categorical { values }) if *c < values.len() => {}
            (Value::Number(x), AttributeKind::Numeric { range: [lo, hi] }) if x >= lo && x <= hi => {}
            (v, kind) => return Err(bad(format!("{v:?} does not conform to {kind:?}"))),
        }
    }
    Ok(())
}

/// Reads a headed CSV. Columns are matched to attributes by name; extra
/// columns are ignored. Rows containing the schema's missing marker are
/// dropped and counted. Row numbers in errors count data rows from 1.
pub fn read_table(reader: impl Read, schema: &Schema) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let columns = schema
        .attributes
        .iter()
        .map(|a| {
            headers
                .iter()
                .position(|h| h == a.name)
                .ok_or_else(|| Error::MissingColumn(a.name.clone()))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut rows = Vec::new();
    let mut dropped = 0;
    for (i, record) in rdr.records().enumerate() {
        let record = record?;
        let row_number = i + 1;
        let cells: Vec<&str> = columns.iter().map(|&c| record.get(c).unwrap_or("")).collect();
        if cells.iter().any(|c| *c == schema.missing) {
            dropped += 1;
            continue;
        }
        let mut row = Vec::with_capacity(cells.len());
        for (cell, a) in cells.iter().zip(&schema.attributes) {
            let bad = |message: String| Error::InvalidValue {
                row: row_number,
                attribute: a.name.clone(),
                message,
            };
            row.push(match &a.kind {
                AttributeKind::Categorical { values } => Value::Category(
                    values
                        .iter()
                        .position(|v| v == cell)
                        .ok_or_else(|| bad(format!("unknown category `{cell}`")))?,
                ),
                AttributeKind::Numeric { range: [lo, hi] } => {
                    let x: f64 = cell
                        .parse()
                        .map_err(|_| bad(format!("cannot parse `{cell}` as a number")))?;
                    if !(x >= *lo && x <= *hi) {
                        return Err(bad(format!("{x} outside [{lo}, {hi}]")));
                    }
                    Value::Number(x)
                }
            });
        }
        rows.push(row);
    }
    Ok(RawTable {
        schema: Arc::new(schema.clone()),
        rows,
        dropped_missing: dropped,
    })
}

pub fn load_table(path: impl AsRef<Path>, schema: &Schema) -> Result<RawTable> {
    let file = std::fs::File::open(path)?;
    read_table(std::io::BufReader::new(file), schema)
}
