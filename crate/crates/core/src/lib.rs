//! Ensemble learning for road-accident severity classification.
//!
//! The crate implements the full pipeline from raw CSV to evaluated model:
//!
//! * [`data`] — schema-driven CSV loading, missing-value preprocessing, and
//!   numeric encoding of mixed-type tables into a [`data::FeatureMatrix`].
//! * [`tree`] — CART classification trees (Gini or entropy, exhaustive or
//!   random cuts) shared by every tree-based ensemble.
//! * [`linear`] — one-vs-rest linear classifiers trained with mini-batch SGD
//!   under logistic or hinge loss.
//! * [`ensemble`] — random forests, extremely randomized trees, SAMME
//!   AdaBoost, softmax gradient boosting, and a two-member voting classifier
//!   behind one [`ensemble::EnsembleModel`] dispatch type.
//! * [`importance`] — out-of-bag permutation feature importance and top-k
//!   feature selection.
//! * [`metrics`] — confusion matrices with per-class and averaged
//!   precision/recall/F-measure.
//! * [`synth`] — a seeded generator for synthetic accident-severity tables
//!   with planted informative features.
//! * [`model_io`] — a versioned plain-text model format.
//!
//! Every stochastic component takes an explicit seed and derives independent
//! per-task streams with [`seeding::derive_seed`], so results are exactly
//! reproducible across runs and thread counts.

pub mod data;
pub mod ensemble;
pub mod error;
pub mod importance;
pub mod linear;
pub mod metrics;
pub mod model_io;
pub mod seeding;
pub mod synth;
pub mod tree;

pub use error::{CoreError, Result};
