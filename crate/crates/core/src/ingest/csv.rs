//! Plain comma-separated ADOS tables: no quoting, LF or CRLF line endings.

use std::collections::{BTreeMap, BTreeSet};

use crate::datamodel::{encode_record, AdosModule, AdosRecord, Dataset, DatasetKind, Label, Sample};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Column layout of an ADOS CSV export.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsvSchema {
    id_column: String,
    label_column: String,
    feature_columns: Vec<String>,
    positive_token: String,
    negative_token: String,
}

impl CsvSchema {
    pub fn new(
        id_column: impl Into<String>,
        label_column: impl Into<String>,
        feature_columns: Vec<String>,
        positive_token: impl Into<String>,
        negative_token: impl Into<String>,
    ) -> Result<Self> {
        let schema = CsvSchema {
            id_column: id_column.into(),
            label_column: label_column.into(),
            feature_columns,
            positive_token: positive_token.into(),
            negative_token: negative_token.into(),
        };
        if schema.feature_columns.is_empty() {
            return Err(Error::Schema("feature column list is empty".into()));
        }
        let unique: BTreeSet<&String> = schema.feature_columns.iter().collect();
        if unique.len() != schema.feature_columns.len() {
            return Err(Error::Schema("duplicate feature column".into()));
        }
        if schema.id_column == schema.label_column
            || unique.contains(&schema.id_column)
            || unique.contains(&schema.label_column)
        {
            return Err(Error::Schema(
                "id, label and feature column names must be disjoint".into(),
            ));
        }
        if schema.positive_token == schema.negative_token {
            return Err(Error::Schema("label tokens must differ".into()));
        }
        Ok(schema)
    }

    /// `id,label,<codes...>` with `ASD` / `NonASD` label tokens.
    pub fn standard(feature_columns: Vec<String>) -> Result<Self> {
        CsvSchema::new("id", "label", feature_columns, "ASD", "NonASD")
    }

    /// Standard schema whose feature columns are every header column other
    /// than `id` and `label`, in header order.
    pub fn infer_standard(text: &str) -> Result<Self> {
        let header = text
            .lines()
            .next()
            .ok_or_else(|| Error::Schema("missing header row".into()))?;
        let features = split_row(header)
            .into_iter()
            .filter(|c| *c != "id" && *c != "label")
            .map(str::to_string)
            .collect();
        CsvSchema::standard(features)
    }

    pub fn feature_columns(&self) -> &[String] {
        &self.feature_columns
    }

    fn parse_label(&self, token: &str) -> Option<Option<Label>> {
        if token == self.positive_token {
            Some(Some(Label::Asd))
        } else if token == self.negative_token {
            Some(Some(Label::NonAsd))
        } else if token.is_empty() {
            Some(None)
        } else {
            None
        }
    }

    fn label_token(&self, label: Option<Label>) -> &str {
        match label {
            Some(Label::Asd) => &self.positive_token,
            Some(Label::NonAsd) => &self.negative_token,
            None => "",
        }
    }
}

fn split_row(line: &str) -> Vec<&str> {
    line.trim_end_matches('\r').split(',').map(str::trim).collect()
}

/// Parses rows into validated records, preserving row order.
pub fn parse_ados_records(text: &str, schema: &CsvSchema, module: AdosModule) -> Result<Vec<AdosRecord>> {
    if schema.feature_columns.len() != module.feature_count() {
        return Err(Error::Schema(format!(
            "{module:?} expects {} feature columns, schema lists {}",
            module.feature_count(),
            schema.feature_columns.len()
        )));
    }
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| Error::Schema("missing header row".into()))?;
    let header = split_row(header);
    let find = |name: &str| header.iter().position(|h| *h == name);
    let mut missing = Vec::new();
    let mut column = |name: &str| {
        let idx = find(name);
        if idx.is_none() {
            missing.push(name.to_string());
        }
        idx.unwrap_or(0)
    };
    let id_idx = column(&schema.id_column);
    let label_idx = column(&schema.label_column);
    let feat_idx: Vec<usize> = schema.feature_columns.iter().map(|c| column(c)).collect();
    if !missing.is_empty() {
        return Err(Error::Schema(format!("missing columns: {}", missing.join(", "))));
    }

    let mut records = Vec::new();
    for (row, line) in lines.enumerate().map(|(i, l)| (i + 1, l)) {
        if line.trim().is_empty() {
            continue;
        }
        let cells = split_row(line);
        if cells.len() != header.len() {
            return Err(Error::Row {
                row,
                message: format!("expected {} cells, found {}", header.len(), cells.len()),
            });
        }
        let label = schema.parse_label(cells[label_idx]).ok_or_else(|| Error::Row {
            row,
            message: format!("unknown label token {:?}", cells[label_idx]),
        })?;
        let mut scores = BTreeMap::new();
        for (code, &ci) in schema.feature_columns.iter().zip(&feat_idx) {
            let raw: i64 = cells[ci].parse().map_err(|_| Error::Row {
                row,
                message: format!("score {:?} in column {code} is not an integer", cells[ci]),
            })?;
            scores.insert(code.clone(), raw);
        }
        let record = AdosRecord::new(cells[id_idx], module, scores, label)
            .map_err(|e| Error::Row { row, message: e.to_string() })?;
        records.push(record);
    }
    Ok(records)
}

/// Encodes records with `codebook` order into a tabular dataset.
pub fn records_to_dataset<T: Scalar>(records: &[AdosRecord], codebook: &[String]) -> Result<Dataset<T>> {
    let samples = records
        .iter()
        .map(|r| {
            encode_record(r, codebook).map(|x| Sample::features(r.subject_id(), x, r.label()))
        })
        .collect::<Result<Vec<_>>>()?;
    Dataset::new(DatasetKind::Tabular, samples)
}

/// Parses an ADOS CSV export into an encoded tabular dataset.
pub fn parse_ados_csv<T: Scalar>(text: &str, schema: &CsvSchema, module: AdosModule) -> Result<Dataset<T>> {
    let records = parse_ados_records(text, schema, module)?;
    records_to_dataset(&records, &schema.feature_columns)
}

/// Writes records in the schema's column order (id, label, features).
pub fn write_ados_csv(records: &[AdosRecord], schema: &CsvSchema) -> String {
    let mut out = String::new();
    out.push_str(&schema.id_column);
    out.push(',');
    out.push_str(&schema.label_column);
    for c in &schema.feature_columns {
        out.push(',');
        out.push_str(c);
    }
    out.push('\n');
    for r in records {
        out.push_str(r.subject_id());
        out.push(',');
        out.push_str(schema.label_token(r.label()));
        for c in &schema.feature_columns {
            out.push(',');
            let s = r.scores().get(c).copied().unwrap_or(0);
            out.push_str(&s.to_string());
        }
        out.push('\n');
    }
    out
}
