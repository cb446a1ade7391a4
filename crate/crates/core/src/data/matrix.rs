//! Dense numeric design matrix produced by encoding a clean dataset.

use rand::seq::SliceRandom;

use crate::data::dataset::{ColumnValues, Dataset};
use crate::data::schema::{ColumnKind, ColumnSpec};
use crate::error::{CoreError, Result};
use crate::seeding::rng_from_seed;

/// Per-column encoding state captured at training time so later inputs can be
/// encoded consistently.
#[derive(Debug, Clone, PartialEq)]
pub struct ColumnEncoding {
    pub name: String,
    pub kind: ColumnKind,
    /// Category values in ordinal order; empty unless `kind` is categorical.
    pub categories: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct EncodingMap {
    pub columns: Vec<ColumnEncoding>,
}

impl EncodingMap {
    pub fn column(&self, name: &str) -> Option<&ColumnEncoding> {
        self.columns.iter().find(|c| c.name == name)
    }

    /// Restricts the map to the feature columns whose encoded columns are in
    /// `encoded_names` (a timestamp source stays if either derived column is
    /// kept).
    pub fn restrict(&self, encoded_names: &[String]) -> EncodingMap {
        let columns = self
            .columns
            .iter()
            .filter(|c| {
                encoded_column_names(c)
                    .iter()
                    .any(|n| encoded_names.contains(n))
            })
            .cloned()
            .collect();
        EncodingMap { columns }
    }
}

/// Encoded column names a schema column expands to.
pub fn encoded_column_names(col: &ColumnEncoding) -> Vec<String> {
    match col.kind {
        ColumnKind::Timestamp => vec![format!("{}#hour", col.name), format!("{}#dow", col.name)],
        _ => vec![col.name.clone()],
    }
}

/// Row-major numeric matrix with zero-based class labels.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    values: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    feature_names: Vec<String>,
    labels: Vec<usize>,
    /// Class index -> original label value.
    class_values: Vec<i64>,
    encoding: EncodingMap,
}

impl FeatureMatrix {
    /// Builds a matrix directly from dense values; used by generators and
    /// tests. Feature names default to `f0..f{n-1}`.
    pub fn from_dense(
        values: Vec<f64>,
        n_rows: usize,
        n_features: usize,
        labels: Vec<usize>,
        n_classes: usize,
    ) -> Result<FeatureMatrix> {
        if values.len() != n_rows * n_features {
            return Err(CoreError::InvalidParameter(format!(
                "{} values cannot fill a {n_rows}x{n_features} matrix",
                values.len()
            )));
        }
        if labels.len() != n_rows {
            return Err(CoreError::LengthMismatch {
                left: n_rows,
                right: labels.len(),
            });
        }
        if n_classes < 2 {
            return Err(CoreError::InvalidParameter(format!(
                "need at least 2 classes, got {n_classes}"
            )));
        }
        for (i, &l) in labels.iter().enumerate() {
            if l >= n_classes {
                return Err(CoreError::InvalidClassIndex {
                    index: l,
                    n_classes,
                });
            }
            let _ = i;
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(CoreError::NonFiniteValue {
                column: format!("f{}", pos % n_features.max(1)),
                row: pos / n_features.max(1),
            });
        }
        let feature_names = (0..n_features).map(|j| format!("f{j}")).collect();
        let encoding = EncodingMap {
            columns: (0..n_features)
                .map(|j| ColumnEncoding {
                    name: format!("f{j}"),
                    kind: ColumnKind::Numeric,
                    categories: Vec::new(),
                })
                .collect(),
        };
        Ok(FeatureMatrix {
            values,
            n_rows,
            n_features,
            feature_names,
            labels,
            class_values: (0..n_classes as i64).collect(),
            encoding,
        })
    }

    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn n_classes(&self) -> usize {
        self.class_values.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.n_features + col]
    }

    pub fn labels(&self) -> &[usize] {
        &self.labels
    }

    pub fn class_values(&self) -> &[i64] {
        &self.class_values
    }

    pub fn feature_names(&self) -> &[String] {
        &self.feature_names
    }

    pub fn encoding(&self) -> &EncodingMap {
        &self.encoding
    }

    pub fn feature_index(&self, name: &str) -> Option<usize> {
        self.feature_names.iter().position(|n| n == name)
    }

    /// Occurrences of each class index.
    pub fn class_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_classes()];
        for &l in &self.labels {
            counts[l] += 1;
        }
        counts
    }

    /// New matrix containing the given rows, in the given order.
    pub fn take_rows(&self, rows: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(rows.len() * self.n_features);
        for &r in rows {
            values.extend_from_slice(self.row(r));
        }
        FeatureMatrix {
            values,
            n_rows: rows.len(),
            n_features: self.n_features,
            feature_names: self.feature_names.clone(),
            labels: rows.iter().map(|&r| self.labels[r]).collect(),
            class_values: self.class_values.clone(),
            encoding: self.encoding.clone(),
        }
    }

    /// New matrix containing the given feature columns, in the given order.
    pub(crate) fn take_columns(&self, cols: &[usize]) -> FeatureMatrix {
        let mut values = Vec::with_capacity(self.n_rows * cols.len());
        for r in 0..self.n_rows {
            let row = self.row(r);
            for &c in cols {
                values.push(row[c]);
            }
        }
        let feature_names: Vec<String> =
            cols.iter().map(|&c| self.feature_names[c].clone()).collect();
        let encoding = self.encoding.restrict(&feature_names);
        FeatureMatrix {
            values,
            n_rows: self.n_rows,
            n_features: cols.len(),
            feature_names,
            labels: self.labels.clone(),
            class_values: self.class_values.clone(),
            encoding,
        }
    }

    /// Replaces one column's values.
    #[cfg(test)]
    pub(crate) fn with_column_values(&self, col: usize, new_values: &[f64]) -> FeatureMatrix {
        assert_eq!(new_values.len(), self.n_rows);
        let mut out = self.clone();
        for (r, &v) in new_values.iter().enumerate() {
            out.values[r * self.n_features + col] = v;
        }
        out
    }

    #[cfg(test)]
    pub(crate) fn column_values(&self, col: usize) -> Vec<f64> {
        (0..self.n_rows).map(|r| self.value(r, col)).collect()
    }
}

/// Feature rows encoded for prediction; labels are not required.
#[derive(Debug, Clone)]
pub struct EncodedFeatures {
    values: Vec<f64>,
    n_rows: usize,
    n_features: usize,
    pub feature_names: Vec<String>,
}

impl EncodedFeatures {
    pub fn n_rows(&self) -> usize {
        self.n_rows
    }

    pub fn n_features(&self) -> usize {
        self.n_features
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n_features..(i + 1) * self.n_features]
    }

    /// Resolves `names` to their positions in this table's column order.
    /// Lets a model trained on a projection (which may keep only one of a
    /// timestamp's two derived columns) pick exactly the columns it consumes.
    pub fn column_positions(&self, names: &[String]) -> Result<Vec<usize>> {
        names
            .iter()
            .map(|n| {
                self.feature_names
                    .iter()
                    .position(|f| f == n)
                    .ok_or_else(|| CoreError::UnknownFeature(n.clone()))
            })
            .collect()
    }
}

/// Encodes a fully clean dataset for training.
///
/// Booleans map to 0/1, categoricals to ordinal codes in order of first
/// appearance, timestamps to an hour column and a day-of-week column.
/// Labels map to indices into the dataset's declared class set.
pub fn encode(d: &Dataset) -> Result<FeatureMatrix> {
    let (values, n_features, feature_names, encoding) = encode_columns(d, None)?;
    let class_values = d.classes().to_vec();
    if class_values.len() < 2 {
        return Err(CoreError::InvalidParameter(format!(
            "training requires at least 2 classes, got {}",
            class_values.len()
        )));
    }
    let mut labels = Vec::with_capacity(d.n_rows());
    for (row, label) in d.labels().iter().enumerate() {
        let Some(label) = label else {
            return Err(CoreError::NotPreprocessed {
                column: d.schema().target().name.clone(),
            });
        };
        let idx = class_values
            .binary_search(label)
            .map_err(|_| CoreError::InvalidParameter(format!(
                "label {label} at row {row} is not in the declared class set"
            )))?;
        labels.push(idx);
    }
    Ok(FeatureMatrix {
        values,
        n_rows: d.n_rows(),
        n_features,
        feature_names,
        labels,
        class_values,
        encoding,
    })
}

/// Encodes prediction inputs using the encoding captured at training time.
///
/// The dataset's feature columns must match the map exactly (same names and
/// kinds); categories unseen at training time extend the ordinal range.
pub fn encode_with_map(d: &Dataset, map: &EncodingMap) -> Result<EncodedFeatures> {
    let have: Vec<&ColumnSpec> = d.schema().feature_columns().collect();
    let missing: Vec<String> = map
        .columns
        .iter()
        .filter(|m| !have.iter().any(|c| c.name == m.name))
        .map(|m| m.name.clone())
        .collect();
    let extra: Vec<String> = have
        .iter()
        .filter(|c| map.column(&c.name).is_none())
        .map(|c| c.name.clone())
        .collect();
    if !missing.is_empty() || !extra.is_empty() {
        return Err(CoreError::HeaderMismatch { missing, extra });
    }
    for spec in &have {
        let m = map.column(&spec.name).expect("checked above");
        if m.kind != spec.kind {
            return Err(CoreError::InvalidParameter(format!(
                "column '{}' is {} but the model expects {}",
                spec.name, spec.kind, m.kind
            )));
        }
    }
    let (values, n_features, feature_names, _) = encode_columns(d, Some(map))?;
    Ok(EncodedFeatures {
        values,
        n_rows: d.n_rows(),
        n_features,
        feature_names,
    })
}

fn encode_columns(
    d: &Dataset,
    map: Option<&EncodingMap>,
) -> Result<(Vec<f64>, usize, Vec<String>, EncodingMap)> {
    let n = d.n_rows();
    let mut encoded: Vec<Vec<f64>> = Vec::new();
    let mut feature_names: Vec<String> = Vec::new();
    let mut out_map = EncodingMap::default();

    for col in d.columns() {
        if col.missing_count() > 0 {
            return Err(CoreError::NotPreprocessed {
                column: col.spec.name.clone(),
            });
        }
        match col.values() {
            ColumnValues::Numeric(v) => {
                if let Some(row) = v.iter().position(|x| !x.is_finite()) {
                    return Err(CoreError::NonFiniteValue {
                        column: col.spec.name.clone(),
                        row,
                    });
                }
                encoded.push(v.clone());
                feature_names.push(col.spec.name.clone());
                out_map.columns.push(ColumnEncoding {
                    name: col.spec.name.clone(),
                    kind: ColumnKind::Numeric,
                    categories: Vec::new(),
                });
            }
            ColumnValues::Boolean(v) => {
                encoded.push(v.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect());
                feature_names.push(col.spec.name.clone());
                out_map.columns.push(ColumnEncoding {
                    name: col.spec.name.clone(),
                    kind: ColumnKind::Boolean,
                    categories: Vec::new(),
                });
            }
            ColumnValues::Categorical { codes, values } => {
                // Ordinal codes by first appearance, or by the training-time
                // table when one is supplied.
                let mut categories: Vec<String> = match map {
                    Some(m) => m.column(&col.spec.name).expect("checked").categories.clone(),
                    None => Vec::new(),
                };
                let mut ordinal_of_code: Vec<Option<u32>> = vec![None; values.len()];
                for (code, value) in values.iter().enumerate() {
                    if let Some(pos) = categories.iter().position(|c| c == value) {
                        ordinal_of_code[code] = Some(pos as u32);
                    }
                }
                let mut out = Vec::with_capacity(n);
                for &code in codes {
                    let ordinal = match ordinal_of_code[code as usize] {
                        Some(o) => o,
                        None => {
                            let o = categories.len() as u32;
                            categories.push(values[code as usize].clone());
                            ordinal_of_code[code as usize] = Some(o);
                            o
                        }
                    };
                    out.push(f64::from(ordinal));
                }
                encoded.push(out);
                feature_names.push(col.spec.name.clone());
                out_map.columns.push(ColumnEncoding {
                    name: col.spec.name.clone(),
                    kind: ColumnKind::Categorical,
                    categories,
                });
            }
            ColumnValues::Timestamp(v) => {
                encoded.push(v.iter().map(|t| f64::from(t.hour)).collect());
                encoded.push(v.iter().map(|t| f64::from(t.weekday)).collect());
                feature_names.push(format!("{}#hour", col.spec.name));
                feature_names.push(format!("{}#dow", col.spec.name));
                out_map.columns.push(ColumnEncoding {
                    name: col.spec.name.clone(),
                    kind: ColumnKind::Timestamp,
                    categories: Vec::new(),
                });
            }
        }
    }

    let n_features = encoded.len();
    let mut values = Vec::with_capacity(n * n_features);
    for r in 0..n {
        for col in &encoded {
            values.push(col[r]);
        }
    }
    Ok((values, n_features, feature_names, out_map))
}

/// Uniform random split: rows are shuffled by a generator seeded with `seed`
/// and the first `floor(n * train_fraction)` go to the training side.
pub fn train_test_split(
    m: &FeatureMatrix,
    train_fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    validate_fraction(train_fraction)?;
    let n = m.n_rows();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));
    let n_train = (n as f64 * train_fraction).floor() as usize;
    if n_train == 0 || n_train == n {
        return Err(CoreError::DegenerateSplit {
            n_train,
            n_test: n - n_train,
        });
    }
    let train = m.take_rows(&order[..n_train]);
    let test = m.take_rows(&order[n_train..]);
    Ok((train, test))
}

/// Stratified split: within each class the rows are shuffled and the first
/// `floor(n_k * train_fraction)` go to the training side. Row order within
/// each side is ascending by original index.
pub fn split_stratified(
    m: &FeatureMatrix,
    train_fraction: f64,
    seed: u64,
) -> Result<(FeatureMatrix, FeatureMatrix)> {
    validate_fraction(train_fraction)?;
    let mut rng = rng_from_seed(seed);
    let mut train_rows: Vec<usize> = Vec::new();
    let mut test_rows: Vec<usize> = Vec::new();
    for class in 0..m.n_classes() {
        let mut rows: Vec<usize> = (0..m.n_rows())
            .filter(|&r| m.labels()[r] == class)
            .collect();
        rows.shuffle(&mut rng);
        let n_train = (rows.len() as f64 * train_fraction).floor() as usize;
        train_rows.extend_from_slice(&rows[..n_train]);
        test_rows.extend_from_slice(&rows[n_train..]);
    }
    if train_rows.is_empty() || test_rows.is_empty() {
        return Err(CoreError::DegenerateSplit {
            n_train: train_rows.len(),
            n_test: test_rows.len(),
        });
    }
    train_rows.sort_unstable();
    test_rows.sort_unstable();
    Ok((m.take_rows(&train_rows), m.take_rows(&test_rows)))
}

fn validate_fraction(f: f64) -> Result<()> {
    if !(f > 0.0 && f < 1.0) {
        return Err(CoreError::InvalidParameter(format!(
            "train fraction must be strictly between 0 and 1, got {f}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::data::dataset::Dataset;
    use crate::data::schema::FeatureSchema;
    use std::io::Write;

    fn load(content: &str, schema: &str) -> Dataset {
        let schema = FeatureSchema::parse(schema).unwrap();
        let mut f = tempfile::NamedTempFile::new().unwrap();
        f.write_all(content.as_bytes()).unwrap();
        Dataset::load_csv(f.path(), &schema).unwrap()
    }

    fn toy_matrix(n_rows: usize, n_classes: usize) -> FeatureMatrix {
        let values: Vec<f64> = (0..n_rows * 2).map(|i| i as f64).collect();
        let labels: Vec<usize> = (0..n_rows).map(|i| i % n_classes).collect();
        FeatureMatrix::from_dense(values, n_rows, 2, labels, n_classes).unwrap()
    }

    #[test]
    fn booleans_encode_to_zero_one() {
        let d = load(
            "Severity,Crossing\n1,true\n2,false\n1,true\n",
            "Severity,numeric,target\nCrossing,boolean,feature\n",
        );
        let m = encode(&d).unwrap();
        assert_eq!(m.column_values(0), vec![1.0, 0.0, 1.0]);
    }

    #[test]
    fn categories_encode_by_first_appearance() {
        let d = load(
            "Severity,Side\n1,R\n2,L\n1,R\n2,B\n",
            "Severity,numeric,target\nSide,categorical,feature\n",
        );
        let m = encode(&d).unwrap();
        assert_eq!(m.column_values(0), vec![0.0, 1.0, 0.0, 2.0]);
        assert_eq!(
            m.encoding().column("Side").unwrap().categories,
            vec!["R", "L", "B"]
        );
    }

    #[test]
    fn labels_map_to_sorted_class_indices() {
        let d = load(
            "Severity,Distance(mi)\n4,0.1\n2,0.2\n4,0.3\n",
            "Severity,numeric,target\nDistance(mi),numeric,feature\n",
        );
        let m = encode(&d).unwrap();
        assert_eq!(m.labels(), &[1, 0, 1]);
        assert_eq!(m.class_values(), &[2, 4]);
        assert_eq!(m.class_counts(), vec![1, 2]);
    }

    #[test]
    fn encode_rejects_missing_cells() {
        let d = load(
            "Severity,Distance(mi)\n1,\n2,0.2\n",
            "Severity,numeric,target\nDistance(mi),numeric,feature\n",
        );
        let err = encode(&d).unwrap_err();
        match err {
            CoreError::NotPreprocessed { column } => assert_eq!(column, "Distance(mi)"),
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn timestamps_expand_to_two_columns() {
        let d = load(
            "Severity,Start_Time\n1,2019-02-15 08:30:02\n2,2019-02-17 23:00:00\n",
            "Severity,numeric,target\nStart_Time,timestamp,feature\n",
        );
        let m = encode(&d).unwrap();
        assert_eq!(m.n_features(), 2);
        assert_eq!(m.feature_names(), &["Start_Time#hour", "Start_Time#dow"]);
        assert_eq!(m.column_values(0), vec![8.0, 23.0]);
        assert_eq!(m.column_values(1), vec![4.0, 6.0]);
    }

    #[test]
    fn encode_with_map_reuses_training_categories() {
        let train = load(
            "Severity,Side\n1,R\n2,L\n",
            "Severity,numeric,target\nSide,categorical,feature\n",
        );
        let m = encode(&train).unwrap();
        // New file sees L first; training order must still win, and the
        // unseen category gets the next ordinal.
        let test = load(
            "Severity,Side\n1,L\n2,R\n1,B\n",
            "Severity,numeric,target\nSide,categorical,feature\n",
        );
        let e = encode_with_map(&test, m.encoding()).unwrap();
        assert_eq!(e.row(0), &[1.0]);
        assert_eq!(e.row(1), &[0.0]);
        assert_eq!(e.row(2), &[2.0]);
    }

    #[test]
    fn encode_with_map_reports_missing_and_extra_columns() {
        let train = load(
            "Severity,Side\n1,R\n2,L\n",
            "Severity,numeric,target\nSide,categorical,feature\n",
        );
        let m = encode(&train).unwrap();
        let test = load(
            "Severity,Distance(mi)\n1,0.5\n2,0.7\n",
            "Severity,numeric,target\nDistance(mi),numeric,feature\n",
        );
        let err = encode_with_map(&test, m.encoding()).unwrap_err();
        match err {
            CoreError::HeaderMismatch { missing, extra } => {
                assert_eq!(missing, vec!["Side".to_string()]);
                assert_eq!(extra, vec!["Distance(mi)".to_string()]);
            }
            other => panic!("wrong error: {other}"),
        }
    }

    #[test]
    fn split_sizes_follow_floor_rule() {
        let m = toy_matrix(10, 2);
        let (train, test) = train_test_split(&m, 0.7, 42).unwrap();
        assert_eq!(train.n_rows(), 7);
        assert_eq!(test.n_rows(), 3);
    }

    #[test]
    fn split_partition_is_exact() {
        let m = toy_matrix(23, 3);
        let (train, test) = train_test_split(&m, 0.6, 9).unwrap();
        let mut seen: Vec<Vec<f64>> = Vec::new();
        for i in 0..train.n_rows() {
            seen.push(train.row(i).to_vec());
        }
        for i in 0..test.n_rows() {
            seen.push(test.row(i).to_vec());
        }
        seen.sort_by(|a, b| a.partial_cmp(b).unwrap());
        let mut expected: Vec<Vec<f64>> = (0..23).map(|i| m.row(i).to_vec()).collect();
        expected.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(seen, expected);
    }

    #[test]
    fn split_is_deterministic_per_seed() {
        let m = toy_matrix(20, 2);
        let (a_train, _) = train_test_split(&m, 0.7, 5).unwrap();
        let (b_train, _) = train_test_split(&m, 0.7, 5).unwrap();
        assert_eq!(a_train, b_train);
        let (c_train, _) = train_test_split(&m, 0.7, 6).unwrap();
        assert_ne!(a_train, c_train);
    }

    #[test]
    fn split_rejects_degenerate_sides() {
        let m = toy_matrix(3, 2);
        let err = train_test_split(&m, 0.1, 1).unwrap_err();
        assert!(matches!(err, CoreError::DegenerateSplit { n_train: 0, .. }));
    }

    #[test]
    fn split_rejects_bad_fraction() {
        let m = toy_matrix(10, 2);
        assert!(train_test_split(&m, 0.0, 1).is_err());
        assert!(train_test_split(&m, 1.0, 1).is_err());
        assert!(train_test_split(&m, f64::NAN, 1).is_err());
    }

    #[test]
    fn stratified_split_keeps_per_class_floor() {
        // 12 rows of class 0, 4 of class 1.
        let values: Vec<f64> = (0..32).map(|i| i as f64).collect();
        let labels = vec![0; 12].into_iter().chain(vec![1; 4]).collect();
        let m = FeatureMatrix::from_dense(values, 16, 2, labels, 2).unwrap();
        let (train, test) = split_stratified(&m, 0.75, 3).unwrap();
        assert_eq!(train.class_counts(), vec![9, 3]);
        assert_eq!(test.class_counts(), vec![3, 1]);
    }

    #[test]
    fn class_counts_are_conserved_by_splits() {
        let m = toy_matrix(29, 4);
        let (train, test) = train_test_split(&m, 0.7, 11).unwrap();
        let total: Vec<usize> = train
            .class_counts()
            .iter()
            .zip(test.class_counts())
            .map(|(a, b)| a + b)
            .collect();
        assert_eq!(total, m.class_counts());
    }

    #[test]
    fn take_columns_projects_names_and_values() {
        let m = toy_matrix(4, 2);
        let p = m.take_columns(&[1]);
        assert_eq!(p.n_features(), 1);
        assert_eq!(p.feature_names(), &["f1"]);
        assert_eq!(p.row(2), &[5.0]);
        assert_eq!(p.labels(), m.labels());
    }
}
