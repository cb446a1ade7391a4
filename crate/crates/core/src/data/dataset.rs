//! In-memory tabular dataset with typed columns and an explicit missing mask.

use std::collections::HashMap;
use std::path::Path;

use chrono::{Datelike, NaiveDateTime, Timelike};

use crate::data::schema::{ColumnKind, ColumnRole, ColumnSpec, FeatureSchema};
use crate::error::{CoreError, Result};

/// Hour-of-day and day-of-week extracted from a parsed datetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TimeParts {
    pub hour: u8,
    /// 0 = Monday .. 6 = Sunday.
    pub weekday: u8,
}

/// Typed storage for one column. Entries at missing positions hold an
/// arbitrary placeholder; the column's missing mask is authoritative.
#[derive(Debug, Clone, PartialEq)]
pub enum ColumnValues {
    Numeric(Vec<f64>),
    /// Interned strings: `codes[i]` indexes into `values`.
    Categorical { codes: Vec<u32>, values: Vec<String> },
    Boolean(Vec<bool>),
    Timestamp(Vec<TimeParts>),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Column {
    pub spec: ColumnSpec,
    missing: Vec<bool>,
    values: ColumnValues,
}

impl Dataset {
    pub(crate) fn mark_missing(&mut self, column: usize, row: usize) {
        self.columns[column].missing[row] = true;
    }
}

impl Column {
    pub fn new(spec: ColumnSpec, missing: Vec<bool>, values: ColumnValues) -> Result<Self> {
        let n = match &values {
            ColumnValues::Numeric(v) => v.len(),
            ColumnValues::Categorical { codes, .. } => codes.len(),
            ColumnValues::Boolean(v) => v.len(),
            ColumnValues::Timestamp(v) => v.len(),
        };
        if n != missing.len() {
            return Err(CoreError::InvalidParameter(format!(
                "column '{}': {} values but {} mask entries",
                spec.name,
                n,
                missing.len()
            )));
        }
        Ok(Column {
            spec,
            missing,
            values,
        })
    }

    pub fn len(&self) -> usize {
        self.missing.len()
    }

    pub fn is_empty(&self) -> bool {
        self.missing.is_empty()
    }

    pub fn is_missing(&self, row: usize) -> bool {
        self.missing[row]
    }

    pub fn missing_count(&self) -> usize {
        self.missing.iter().filter(|&&m| m).count()
    }

    pub fn values(&self) -> &ColumnValues {
        &self.values
    }

    /// Renders the cell the way `write_csv` would.
    pub fn render(&self, row: usize) -> String {
        if self.missing[row] {
            return String::new();
        }
        match &self.values {
            ColumnValues::Numeric(v) => format!("{}", v[row]),
            ColumnValues::Categorical { codes, values } => values[codes[row] as usize].clone(),
            ColumnValues::Boolean(v) => {
                if v[row] {
                    "true".into()
                } else {
                    "false".into()
                }
            }
            // Canonical datetime carrying exactly the parts we retain. The
            // date is synthetic: 2020-01-06 was a Monday, so day offsets
            // reproduce the stored weekday.
            ColumnValues::Timestamp(v) => {
                let t = v[row];
                format!("2020-01-{:02} {:02}:00:00", 6 + t.weekday, t.hour)
            }
        }
    }

    fn retain_rows(&self, keep: &[usize]) -> Column {
        let missing = keep.iter().map(|&i| self.missing[i]).collect();
        let values = match &self.values {
            ColumnValues::Numeric(v) => {
                ColumnValues::Numeric(keep.iter().map(|&i| v[i]).collect())
            }
            ColumnValues::Categorical { codes, values } => ColumnValues::Categorical {
                codes: keep.iter().map(|&i| codes[i]).collect(),
                values: values.clone(),
            },
            ColumnValues::Boolean(v) => {
                ColumnValues::Boolean(keep.iter().map(|&i| v[i]).collect())
            }
            ColumnValues::Timestamp(v) => {
                ColumnValues::Timestamp(keep.iter().map(|&i| v[i]).collect())
            }
        };
        Column {
            spec: self.spec.clone(),
            missing,
            values,
        }
    }
}

/// Result of `Dataset::preprocess`.
#[derive(Debug)]
pub struct PreprocessOutcome {
    pub dataset: Dataset,
    /// Feature columns removed for exceeding the missing-fraction threshold.
    pub dropped_columns: Vec<String>,
    /// Rows removed because a remaining cell or the label was missing.
    pub dropped_rows: usize,
}

/// A loaded dataset: feature columns in schema order plus parsed labels.
///
/// `classes` is the declared class set; it may include classes with zero
/// occurrences and survives row filtering unchanged.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    schema: FeatureSchema,
    columns: Vec<Column>,
    labels: Vec<Option<i64>>,
    classes: Vec<i64>,
    /// Original zero-based data-row index of each surviving row.
    row_ids: Vec<usize>,
}

impl Dataset {
    /// Assembles a dataset from typed columns. `classes`, when `None`, is the
    /// sorted set of distinct observed labels.
    pub fn from_columns(
        schema: FeatureSchema,
        columns: Vec<Column>,
        labels: Vec<Option<i64>>,
        classes: Option<Vec<i64>>,
    ) -> Result<Self> {
        let expected: Vec<&ColumnSpec> = schema.feature_columns().collect();
        if columns.len() != expected.len() {
            return Err(CoreError::InvalidParameter(format!(
                "schema declares {} feature columns but {} were provided",
                expected.len(),
                columns.len()
            )));
        }
        for (col, spec) in columns.iter().zip(&expected) {
            if &&col.spec != spec {
                return Err(CoreError::InvalidParameter(format!(
                    "column '{}' does not match schema order (expected '{}')",
                    col.spec.name, spec.name
                )));
            }
            if col.len() != labels.len() {
                return Err(CoreError::InvalidParameter(format!(
                    "column '{}' has {} rows but {} labels were provided",
                    col.spec.name,
                    col.len(),
                    labels.len()
                )));
            }
        }
        // An explicitly declared class set must be a usable one; a set
        // inferred from whatever labels happen to be present may be smaller
        // (even empty, for unlabeled prediction inputs). Training enforces
        // the two-class minimum when the matrix is built.
        let classes = match classes {
            Some(c) => {
                validate_classes(&c)?;
                c
            }
            None => {
                let mut seen: Vec<i64> = labels.iter().filter_map(|l| *l).collect();
                seen.sort_unstable();
                seen.dedup();
                seen
            }
        };
        let row_ids = (0..labels.len()).collect();
        Ok(Dataset {
            schema,
            columns,
            labels,
            classes,
            row_ids,
        })
    }

    /// Replaces the declared class set. Every observed label must belong.
    pub fn with_declared_classes(mut self, classes: Vec<i64>) -> Result<Self> {
        validate_classes(&classes)?;
        for label in self.labels.iter().flatten() {
            if !classes.contains(label) {
                return Err(CoreError::InvalidParameter(format!(
                    "observed label {label} is not in the declared class set"
                )));
            }
        }
        self.classes = classes;
        Ok(self)
    }

    /// Reads a CSV file against `schema`. The header must contain exactly the
    /// schema's column names, in any order. Unparseable or empty cells become
    /// missing values; rows keep going regardless.
    pub fn load_csv(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
        Self::load_csv_impl(path, schema, true)
    }

    /// Like [`Dataset::load_csv`], but the target column may be absent from
    /// the file (every label is then missing). For scoring unlabeled data.
    pub fn load_csv_for_prediction(path: &Path, schema: &FeatureSchema) -> Result<Dataset> {
        Self::load_csv_impl(path, schema, false)
    }

    fn load_csv_impl(path: &Path, schema: &FeatureSchema, require_target: bool) -> Result<Dataset> {
        let mut reader = csv::ReaderBuilder::new()
            .flexible(false)
            .from_path(path)
            .map_err(|e| CoreError::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
        let headers = reader
            .headers()
            .map_err(|e| CoreError::Csv {
                path: path.display().to_string(),
                source: e,
            })?
            .clone();

        let header_names: Vec<&str> = headers.iter().map(str::trim).collect();
        check_header(&header_names, schema, require_target)?;

        // Map each non-ignored schema column to its position in the file.
        let mut file_pos: HashMap<&str, usize> = HashMap::new();
        for (i, name) in header_names.iter().enumerate() {
            file_pos.insert(name, i);
        }
        let feature_specs: Vec<ColumnSpec> = schema.feature_columns().cloned().collect();
        let feature_pos: Vec<usize> = feature_specs
            .iter()
            .map(|c| file_pos[c.name.as_str()])
            .collect();
        let target_pos = file_pos.get(schema.target().name.as_str()).copied();

        let mut builders: Vec<ColumnBuilder> =
            feature_specs.iter().map(|c| ColumnBuilder::new(c.kind)).collect();
        let mut labels: Vec<Option<i64>> = Vec::new();

        for record in reader.records() {
            let record = record.map_err(|e| CoreError::Csv {
                path: path.display().to_string(),
                source: e,
            })?;
            for (builder, &pos) in builders.iter_mut().zip(&feature_pos) {
                builder.push(record.get(pos).unwrap_or(""));
            }
            labels.push(target_pos.and_then(|pos| parse_label(record.get(pos).unwrap_or(""))));
        }
        if labels.is_empty() {
            return Err(CoreError::EmptyDataset);
        }

        let columns = feature_specs
            .into_iter()
            .zip(builders)
            .map(|(spec, b)| b.finish(spec))
            .collect();
        Dataset::from_columns(schema.clone(), columns, labels, None)
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn n_rows(&self) -> usize {
        self.labels.len()
    }

    pub fn columns(&self) -> &[Column] {
        &self.columns
    }

    pub fn column_by_name(&self, name: &str) -> Option<&Column> {
        self.columns.iter().find(|c| c.spec.name == name)
    }

    pub fn labels(&self) -> &[Option<i64>] {
        &self.labels
    }

    pub fn classes(&self) -> &[i64] {
        &self.classes
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    /// Occurrence count for every declared class, in declared order.
    /// Classes that never occur are reported with count 0.
    pub fn class_counts(&self) -> Vec<(i64, usize)> {
        self.classes
            .iter()
            .map(|&c| {
                let n = self.labels.iter().filter(|l| **l == Some(c)).count();
                (c, n)
            })
            .collect()
    }

    /// Missing-cell fraction per feature column, in schema order.
    pub fn missing_fractions(&self) -> Vec<(String, f64)> {
        self.columns
            .iter()
            .map(|c| {
                (
                    c.spec.name.clone(),
                    c.missing_count() as f64 / c.len() as f64,
                )
            })
            .collect()
    }

    /// Two-stage cleaning: first drop feature columns whose missing fraction
    /// exceeds `column_threshold`, then drop rows with any remaining missing
    /// cell or a missing label. Idempotent; declared classes are unchanged.
    pub fn preprocess(&self, column_threshold: f64) -> Result<PreprocessOutcome> {
        if !(0.0..=1.0).contains(&column_threshold) || column_threshold.is_nan() {
            return Err(CoreError::InvalidParameter(format!(
                "column threshold must be in [0, 1], got {column_threshold}"
            )));
        }
        let n = self.n_rows() as f64;
        let mut kept_columns: Vec<&Column> = Vec::new();
        let mut dropped_columns = Vec::new();
        for col in &self.columns {
            if col.missing_count() as f64 / n > column_threshold {
                dropped_columns.push(col.spec.name.clone());
            } else {
                kept_columns.push(col);
            }
        }

        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&i| {
                self.labels[i].is_some() && kept_columns.iter().all(|c| !c.is_missing(i))
            })
            .collect();
        if keep.is_empty() {
            return Err(CoreError::EmptyAfterPreprocessing);
        }
        let dropped_rows = self.n_rows() - keep.len();

        let keep_names: Vec<String> = kept_columns.iter().map(|c| c.spec.name.clone()).collect();
        let schema = self.schema.restrict_features(&keep_names)?;
        let columns: Vec<Column> = kept_columns.iter().map(|c| c.retain_rows(&keep)).collect();
        let labels: Vec<Option<i64>> = keep.iter().map(|&i| self.labels[i]).collect();
        let row_ids: Vec<usize> = keep.iter().map(|&i| self.row_ids[i]).collect();

        Ok(PreprocessOutcome {
            dataset: Dataset {
                schema,
                columns,
                labels,
                classes: self.classes.clone(),
                row_ids,
            },
            dropped_columns,
            dropped_rows,
        })
    }

    /// Drops rows with any missing feature cell but keeps unlabeled rows:
    /// the prediction-time counterpart of [`Dataset::preprocess`].
    /// Returns the filtered dataset and the number of rows dropped; original
    /// row positions survive in `row_ids`.
    pub fn complete_feature_rows(&self) -> Result<(Dataset, usize)> {
        let keep: Vec<usize> = (0..self.n_rows())
            .filter(|&i| self.columns.iter().all(|c| !c.is_missing(i)))
            .collect();
        if keep.is_empty() {
            return Err(CoreError::EmptyAfterPreprocessing);
        }
        let dropped = self.n_rows() - keep.len();
        let columns: Vec<Column> = self.columns.iter().map(|c| c.retain_rows(&keep)).collect();
        let labels = keep.iter().map(|&i| self.labels[i]).collect();
        let row_ids = keep.iter().map(|&i| self.row_ids[i]).collect();
        Ok((
            Dataset {
                schema: self.schema.clone(),
                columns,
                labels,
                classes: self.classes.clone(),
                row_ids,
            },
            dropped,
        ))
    }

    /// Writes the dataset back out as CSV, columns in schema order with the
    /// target at its schema position. Missing cells render as empty strings.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let mut writer = csv::Writer::from_path(path).map_err(|e| CoreError::Csv {
            path: path.display().to_string(),
            source: e,
        })?;
        let target_name = self.schema.target().name.clone();
        let mut header: Vec<String> = Vec::new();
        for spec in self.schema.columns() {
            match spec.role {
                ColumnRole::Feature => header.push(spec.name.clone()),
                ColumnRole::Target => header.push(target_name.clone()),
                ColumnRole::Ignored => {}
            }
        }
        writer
            .write_record(&header)
            .map_err(|e| CoreError::Csv {
                path: path.display().to_string(),
                source: e,
            })?;

        for row in 0..self.n_rows() {
            let mut record: Vec<String> = Vec::with_capacity(header.len());
            let mut feature_idx = 0;
            for spec in self.schema.columns() {
                match spec.role {
                    ColumnRole::Feature => {
                        record.push(self.columns[feature_idx].render(row));
                        feature_idx += 1;
                    }
                    ColumnRole::Target => {
                        record.push(match self.labels[row] {
                            Some(l) => l.to_string(),
                            None => String::new(),
                        });
                    }
                    ColumnRole::Ignored => {}
                }
            }
            writer
                .write_record(&record)
                .map_err(|e| CoreError::Csv {
                    path: path.display().to_string(),
                    source: e,
                })?;
        }
        writer.flush().map_err(|e| CoreError::io(path, e))?;
        Ok(())
    }
}

fn validate_classes(classes: &[i64]) -> Result<()> {
    if classes.len() < 2 {
        return Err(CoreError::InvalidParameter(format!(
            "class set must contain at least 2 classes, got {}",
            classes.len()
        )));
    }
    let mut sorted = classes.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.len() != classes.len() || sorted != classes {
        return Err(CoreError::InvalidParameter(
            "class set must be sorted and free of duplicates".into(),
        ));
    }
    Ok(())
}

fn check_header(header: &[&str], schema: &FeatureSchema, require_target: bool) -> Result<()> {
    let mut missing: Vec<String> = Vec::new();
    for spec in schema.columns() {
        if spec.role == ColumnRole::Target && !require_target {
            continue;
        }
        if !header.contains(&spec.name.as_str()) {
            missing.push(spec.name.clone());
        }
    }
    let mut extra: Vec<String> = Vec::new();
    let mut seen = std::collections::HashSet::new();
    for &name in header {
        if schema.column(name).is_none() || !seen.insert(name) {
            extra.push(name.to_string());
        }
    }
    if missing.is_empty() && extra.is_empty() {
        Ok(())
    } else {
        Err(CoreError::HeaderMismatch { missing, extra })
    }
}

fn parse_label(cell: &str) -> Option<i64> {
    cell.trim().parse::<i64>().ok()
}

/// Accumulates one column's parsed cells while streaming CSV records.
struct ColumnBuilder {
    kind: ColumnKind,
    missing: Vec<bool>,
    numeric: Vec<f64>,
    codes: Vec<u32>,
    interner: HashMap<String, u32>,
    values: Vec<String>,
    booleans: Vec<bool>,
    times: Vec<TimeParts>,
}

impl ColumnBuilder {
    fn new(kind: ColumnKind) -> Self {
        ColumnBuilder {
            kind,
            missing: Vec::new(),
            numeric: Vec::new(),
            codes: Vec::new(),
            interner: HashMap::new(),
            values: Vec::new(),
            booleans: Vec::new(),
            times: Vec::new(),
        }
    }

    fn push(&mut self, raw: &str) {
        let cell = raw.trim();
        match self.kind {
            ColumnKind::Numeric => {
                match cell.parse::<f64>() {
                    Ok(v) if v.is_finite() => {
                        self.numeric.push(v);
                        self.missing.push(false);
                    }
                    _ => {
                        self.numeric.push(0.0);
                        self.missing.push(true);
                    }
                }
            }
            ColumnKind::Categorical => {
                if cell.is_empty() {
                    self.codes.push(0);
                    self.missing.push(true);
                } else {
                    let next = self.values.len() as u32;
                    let code = *self.interner.entry(cell.to_string()).or_insert_with(|| {
                        next
                    });
                    if code == next {
                        self.values.push(cell.to_string());
                    }
                    self.codes.push(code);
                    self.missing.push(false);
                }
            }
            ColumnKind::Boolean => match parse_boolean(cell) {
                Some(v) => {
                    self.booleans.push(v);
                    self.missing.push(false);
                }
                None => {
                    self.booleans.push(false);
                    self.missing.push(true);
                }
            },
            ColumnKind::Timestamp => match parse_timestamp(cell) {
                Some(t) => {
                    self.times.push(t);
                    self.missing.push(false);
                }
                None => {
                    self.times.push(TimeParts { hour: 0, weekday: 0 });
                    self.missing.push(true);
                }
            },
        }
    }

    fn finish(self, spec: ColumnSpec) -> Column {
        let values = match self.kind {
            ColumnKind::Numeric => ColumnValues::Numeric(self.numeric),
            ColumnKind::Categorical => ColumnValues::Categorical {
                codes: self.codes,
                values: self.values,
            },
            ColumnKind::Boolean => ColumnValues::Boolean(self.booleans),
            ColumnKind::Timestamp => ColumnValues::Timestamp(self.times),
        };
        Column::new(spec, self.missing, values).expect("builder keeps lengths aligned")
    }
}

fn parse_boolean(cell: &str) -> Option<bool> {
    if cell.eq_ignore_ascii_case("true") || cell == "1" {
        Some(true)
    } else if cell.eq_ignore_ascii_case("false") || cell == "0" {
        Some(false)
    } else {
        None
    }
}

fn parse_timestamp(cell: &str) -> Option<TimeParts> {
    const FORMATS: [&str; 4] = [
        "%Y-%m-%d %H:%M:%S",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%dT%H:%M:%S",
        "%Y-%m-%dT%H:%M:%S%.f",
    ];
    for fmt in FORMATS {
        if let Ok(dt) = NaiveDateTime::parse_from_str(cell, fmt) {
            return Some(TimeParts {
                hour: dt.hour() as u8,
                weekday: dt.weekday().num_days_from_monday() as u8,
            });
        }
    }
    None
}
