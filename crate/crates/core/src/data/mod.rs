//! Schemas, datasets, and the dataset-to-matrix encoding step.

pub mod dataset;
pub mod matrix;
pub mod schema;

pub use dataset::{Column, ColumnValues, Dataset, PreprocessOutcome, TimeParts};
pub use matrix::{
    encode, encode_with_map, split_stratified, train_test_split, ColumnEncoding, EncodedFeatures,
    EncodingMap, FeatureMatrix,
};
pub use schema::{ColumnKind, ColumnRole, ColumnSpec, FeatureSchema};
