//! Seeded synthetic tabular data with planted informative features.
//!
//! Informative numeric columns draw from class-conditional normals whose
//! means sit 2.0 standard deviations apart; informative categoricals prefer
//! one class-linked category with probability 0.7. Noise columns are drawn
//! independently of the label. Each informative column applies its own
//! random class-to-mean permutation so no two columns are redundant copies.
//!
//! A configurable fraction of rows can be made "noise-heavy", modeling
//! records whose real measurements degraded while spurious ones spiked:
//! their informative cells keep only an attenuated trace of the class
//! signal, and their noise cells are redrawn as an amplified, internally
//! coherent fake signal that mimics an informative pattern for a randomly
//! chosen class — independent of the true label, but actively misleading to
//! any model that consumes the noise columns. Labels are untouched.

use std::collections::HashMap;

use rand::seq::SliceRandom;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::data::dataset::{Column, ColumnValues, Dataset};
use crate::data::schema::{ColumnKind, ColumnRole, ColumnSpec, FeatureSchema};
use crate::error::{CoreError, Result};
use crate::seeding::{derive_seed, rng_from_seed};

/// Distance between adjacent class-conditional means, in standard
/// deviations. Strong enough for a 100-tree forest to detect reliably at a
/// couple of thousand rows.
pub const MEAN_SEPARATION: f64 = 2.0;

/// Probability that an informative categorical cell takes its class's
/// preferred category; the rest spread uniformly.
pub const CATEGORY_SKEW: f64 = 0.7;

/// Scale applied to noise cells of noise-heavy rows. Large enough that the
/// fake pattern dominates the column's normal range.
pub const NOISE_HEAVY_AMPLIFICATION: f64 = 3.0;

/// Fraction of the class signal that survives in the informative cells of a
/// noise-heavy row: mean separations and category skews shrink by this
/// factor, leaving a faint but learnable trace.
pub const NOISE_HEAVY_SIGNAL_ATTENUATION: f64 = 0.35;

/// Seed stream for the noise-heavy row machinery; everything else draws
/// from the main stream, so turning the knob changes only the noise cells
/// of the affected rows.
const NOISE_HEAVY_STREAM: u64 = 97;

#[derive(Debug, Clone, PartialEq)]
pub struct SynthSpec {
    pub n_rows: usize,
    pub n_informative: usize,
    pub n_noise: usize,
    pub n_classes: usize,
    /// Per-class sampling probabilities; must sum to 1.
    pub class_weights: Vec<f64>,
    /// Fraction of each feature group generated as categorical.
    pub categorical_fraction: f64,
    /// Fraction of rows whose informative cells keep only an attenuated
    /// class signal and whose noise cells carry an amplified coherent fake
    /// signal (see the module docs). Labels stay intact.
    pub noise_heavy_row_fraction: f64,
    pub seed: u64,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_rows: 1000,
            n_informative: 20,
            n_noise: 28,
            n_classes: 4,
            // Shaped like the source data's imbalance: one dominant class,
            // one rare class.
            class_weights: vec![0.01, 0.67, 0.28, 0.04],
            categorical_fraction: 0.25,
            noise_heavy_row_fraction: 0.0,
            seed: 0,
        }
    }
}

impl SynthSpec {
    fn validate(&self) -> Result<()> {
        if self.n_rows == 0 {
            return Err(CoreError::InvalidParameter("n_rows must be >= 1".into()));
        }
        if self.n_informative + self.n_noise == 0 {
            return Err(CoreError::InvalidParameter(
                "need at least one feature column".into(),
            ));
        }
        if self.n_classes < 2 {
            return Err(CoreError::InvalidParameter(format!(
                "need at least 2 classes, got {}",
                self.n_classes
            )));
        }
        if self.class_weights.len() != self.n_classes {
            return Err(CoreError::InvalidParameter(format!(
                "{} class weights for {} classes",
                self.class_weights.len(),
                self.n_classes
            )));
        }
        if self.class_weights.iter().any(|&w| !(w.is_finite() && w >= 0.0)) {
            return Err(CoreError::InvalidParameter(
                "class weights must be non-negative".into(),
            ));
        }
        let total: f64 = self.class_weights.iter().sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(CoreError::InvalidParameter(format!(
                "class weights sum to {total}, expected 1"
            )));
        }
        for (name, v) in [
            ("categorical_fraction", self.categorical_fraction),
            ("noise_heavy_row_fraction", self.noise_heavy_row_fraction),
        ] {
            if !(0.0..=1.0).contains(&v) || v.is_nan() {
                return Err(CoreError::InvalidParameter(format!(
                    "{name} must be in [0, 1], got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// A generated dataset plus the ground-truth planted feature names.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthData {
    pub dataset: Dataset,
    pub informative_columns: Vec<String>,
}

struct FeaturePlan {
    name: String,
    informative: bool,
    kind: ColumnKind,
}

pub fn generate(spec: &SynthSpec) -> Result<SynthData> {
    spec.validate()?;
    let mut rng = rng_from_seed(spec.seed);
    let k = spec.n_classes;

    // Class indices 0..k map to severity-style labels 1..=k.
    let labels: Vec<usize> = (0..spec.n_rows)
        .map(|_| sample_class(&spec.class_weights, &mut rng))
        .collect();

    // Noise-heavy rows and their fake classes come from a dedicated stream,
    // and every cell below consumes exactly one main-stream draw, so two
    // specs differing only in this fraction produce tables that differ only
    // in the noise cells of the heavy rows.
    let n_heavy = (spec.n_rows as f64 * spec.noise_heavy_row_fraction).floor() as usize;
    let mut heavy_class: Vec<Option<usize>> = vec![None; spec.n_rows];
    if n_heavy > 0 {
        let mut heavy_rng = rng_from_seed(derive_seed(spec.seed, NOISE_HEAVY_STREAM));
        let mut row_order: Vec<usize> = (0..spec.n_rows).collect();
        row_order.shuffle(&mut heavy_rng);
        for &row in row_order.iter().take(n_heavy) {
            heavy_class[row] = Some(heavy_rng.gen_range(0..k));
        }
    }

    let plan = feature_plan(spec);
    let mut columns = Vec::with_capacity(plan.len());
    let mut informative_columns = Vec::new();
    for feature in &plan {
        let spec_col = ColumnSpec::new(&feature.name, feature.kind, ColumnRole::Feature);
        let values = match feature.kind {
            ColumnKind::Numeric => {
                // Every numeric column gets its own class-to-mean pattern;
                // noise columns use theirs only to fake signal in heavy rows.
                let mut means: Vec<f64> = (0..k).map(|c| c as f64 * MEAN_SEPARATION).collect();
                means.shuffle(&mut rng);
                let v: Vec<f64> = (0..spec.n_rows)
                    .map(|row| {
                        let base = standard_normal(&mut rng);
                        match (feature.informative, heavy_class[row]) {
                            (true, None) => means[labels[row]] + base,
                            (true, Some(_)) => {
                                NOISE_HEAVY_SIGNAL_ATTENUATION * means[labels[row]] + base
                            }
                            (false, None) => base,
                            (false, Some(fake)) => {
                                NOISE_HEAVY_AMPLIFICATION * (means[fake] + base)
                            }
                        }
                    })
                    .collect();
                ColumnValues::Numeric(v)
            }
            ColumnKind::Categorical => {
                let mut preferred: Vec<usize> = (0..k).collect();
                preferred.shuffle(&mut rng);
                let uniform = 1.0 / k as f64;
                let weak_skew = uniform + NOISE_HEAVY_SIGNAL_ATTENUATION * (CATEGORY_SKEW - uniform);
                let codes: Vec<u32> = (0..spec.n_rows)
                    .map(|row| {
                        let u: f64 = rng.gen();
                        let cat = match (feature.informative, heavy_class[row]) {
                            (true, None) => {
                                skewed_category(preferred[labels[row]], k, u, CATEGORY_SKEW)
                            }
                            (true, Some(_)) => {
                                skewed_category(preferred[labels[row]], k, u, weak_skew)
                            }
                            (false, None) => uniform_category(k, u),
                            (false, Some(fake)) => {
                                skewed_category(preferred[fake], k, u, CATEGORY_SKEW)
                            }
                        };
                        cat as u32
                    })
                    .collect();
                ColumnValues::Categorical {
                    codes,
                    values: (0..k).map(|c| format!("c{c}")).collect(),
                }
            }
            _ => unreachable!("plan only emits numeric and categorical columns"),
        };
        if feature.informative {
            informative_columns.push(feature.name.clone());
        }
        columns.push(Column::new(spec_col, vec![false; spec.n_rows], values)?);
    }

    let mut schema_columns = vec![ColumnSpec::new(
        "Severity",
        ColumnKind::Numeric,
        ColumnRole::Target,
    )];
    schema_columns.extend(plan.iter().map(|f| ColumnSpec::new(&f.name, f.kind, ColumnRole::Feature)));
    let schema = FeatureSchema::new(schema_columns)?;

    let label_values: Vec<Option<i64>> = labels.iter().map(|&c| Some(c as i64 + 1)).collect();
    let classes: Vec<i64> = (1..=k as i64).collect();
    let dataset = Dataset::from_columns(schema, columns, label_values, Some(classes))?;
    Ok(SynthData {
        dataset,
        informative_columns,
    })
}

fn feature_plan(spec: &SynthSpec) -> Vec<FeaturePlan> {
    let group = |n: usize, informative: bool| -> Vec<FeaturePlan> {
        let n_cat = (n as f64 * spec.categorical_fraction).floor() as usize;
        let prefix = if informative { "sig" } else { "noise" };
        let mut out = Vec::with_capacity(n);
        for i in 0..n - n_cat {
            out.push(FeaturePlan {
                name: format!("{prefix}_num_{i:02}"),
                informative,
                kind: ColumnKind::Numeric,
            });
        }
        for i in 0..n_cat {
            out.push(FeaturePlan {
                name: format!("{prefix}_cat_{i:02}"),
                informative,
                kind: ColumnKind::Categorical,
            });
        }
        out
    };
    let mut plan = group(spec.n_informative, true);
    plan.extend(group(spec.n_noise, false));
    plan
}

fn sample_class(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let draw: f64 = rng.gen();
    let mut cumulative = 0.0;
    for (c, &w) in weights.iter().enumerate() {
        cumulative += w;
        if draw < cumulative {
            return c;
        }
    }
    weights.len() - 1
}

/// Maps one uniform draw in [0, 1) to a category skewed toward `preferred`:
/// probability `skew` for it, the remainder split evenly.
fn skewed_category(preferred: usize, k: usize, u: f64, skew: f64) -> usize {
    if k == 1 || u < skew {
        return preferred;
    }
    let rest = (u - skew) / (1.0 - skew);
    let other = ((rest * (k - 1) as f64) as usize).min(k - 2);
    if other >= preferred {
        other + 1
    } else {
        other
    }
}

/// Maps one uniform draw in [0, 1) to a uniform category in 0..k.
fn uniform_category(k: usize, u: f64) -> usize {
    ((u * k as f64) as usize).min(k - 1)
}

fn standard_normal(rng: &mut ChaCha8Rng) -> f64 {
    StandardNormal.sample(rng)
}

/// Marks cells missing, independently per listed feature column at the given
/// rate. Unlisted columns are untouched.
pub fn inject_missing(
    d: &Dataset,
    per_column_rates: &HashMap<String, f64>,
    seed: u64,
) -> Result<Dataset> {
    for (name, &rate) in per_column_rates {
        if !(0.0..=1.0).contains(&rate) || rate.is_nan() {
            return Err(CoreError::InvalidParameter(format!(
                "missing rate for '{name}' must be in [0, 1], got {rate}"
            )));
        }
        if !d.columns().iter().any(|c| &c.spec.name == name) {
            return Err(CoreError::UnknownFeature(name.clone()));
        }
    }
    let mut out = d.clone();
    // Iterate columns in dataset order so results do not depend on map
    // iteration order.
    let names: Vec<String> = d.columns().iter().map(|c| c.spec.name.clone()).collect();
    for (idx, name) in names.iter().enumerate() {
        let Some(&rate) = per_column_rates.get(name) else {
            continue;
        };
        if rate == 0.0 {
            continue;
        }
        let mut rng = rng_from_seed(derive_seed(seed, idx as u64));
        for row in 0..d.n_rows() {
            if rng.gen::<f64>() < rate {
                out.mark_missing(idx, row);
            }
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_spec() -> SynthSpec {
        SynthSpec {
            n_rows: 500,
            n_informative: 4,
            n_noise: 4,
            n_classes: 3,
            class_weights: vec![0.5, 0.3, 0.2],
            seed: 11,
            ..SynthSpec::default()
        }
    }

    #[test]
    fn acceptance_shape_and_metadata() {
        let spec = SynthSpec {
            n_rows: 2000,
            n_informative: 20,
            n_noise: 28,
            n_classes: 4,
            seed: 7,
            ..SynthSpec::default()
        };
        let out = generate(&spec).unwrap();
        assert_eq!(out.dataset.n_rows(), 2000);
        assert_eq!(out.dataset.columns().len(), 48);
        assert_eq!(out.informative_columns.len(), 20);
        assert_eq!(out.dataset.classes(), &[1, 2, 3, 4]);
        for name in &out.informative_columns {
            assert!(out.dataset.column_by_name(name).is_some());
        }
    }

    #[test]
    fn generation_is_deterministic_per_seed() {
        let a = generate(&small_spec()).unwrap();
        let b = generate(&small_spec()).unwrap();
        assert_eq!(a, b);
        let c = generate(&SynthSpec {
            seed: 12,
            ..small_spec()
        })
        .unwrap();
        assert_ne!(a.dataset, c.dataset);
    }

    #[test]
    fn zero_rows_is_rejected() {
        let err = generate(&SynthSpec {
            n_rows: 0,
            ..small_spec()
        })
        .unwrap_err();
        assert!(err.to_string().contains("n_rows"));
    }

    #[test]
    fn weights_must_sum_to_one() {
        let err = generate(&SynthSpec {
            class_weights: vec![0.5, 0.3, 0.3],
            ..small_spec()
        })
        .unwrap_err();
        assert!(err.to_string().contains("sum"));
    }

    /// Chi-square-style association between a column and the labels.
    fn association(d: &Dataset, name: &str) -> f64 {
        let col = d.column_by_name(name).unwrap();
        let labels: Vec<usize> = d
            .labels()
            .iter()
            .map(|l| (l.unwrap() - 1) as usize)
            .collect();
        let k = d.classes().len();
        // Bucket the column into a small number of bins.
        let bins: Vec<usize> = match col.values() {
            ColumnValues::Categorical { codes, .. } => {
                codes.iter().map(|&c| c as usize).collect()
            }
            ColumnValues::Numeric(v) => {
                let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
                let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
                let width = (hi - lo).max(1e-12) / 4.0;
                v.iter()
                    .map(|&x| (((x - lo) / width) as usize).min(3))
                    .collect()
            }
            _ => panic!("unexpected column type"),
        };
        let n_bins = bins.iter().max().unwrap() + 1;
        let n = labels.len() as f64;
        let mut joint = vec![0.0f64; n_bins * k];
        let mut bin_total = vec![0.0f64; n_bins];
        let mut class_total = vec![0.0f64; k];
        for (&b, &c) in bins.iter().zip(&labels) {
            joint[b * k + c] += 1.0;
            bin_total[b] += 1.0;
            class_total[c] += 1.0;
        }
        let mut chi = 0.0;
        for b in 0..n_bins {
            for c in 0..k {
                let expected = bin_total[b] * class_total[c] / n;
                if expected > 0.0 {
                    let diff = joint[b * k + c] - expected;
                    chi += diff * diff / expected;
                }
            }
        }
        chi
    }

    #[test]
    fn noise_columns_carry_less_label_association_than_informative() {
        let spec = SynthSpec {
            n_rows: 2000,
            n_informative: 3,
            n_noise: 3,
            n_classes: 2,
            class_weights: vec![0.5, 0.5],
            categorical_fraction: 0.34,
            seed: 3,
            ..SynthSpec::default()
        };
        let out = generate(&spec).unwrap();
        let min_informative = out
            .informative_columns
            .iter()
            .map(|n| association(&out.dataset, n))
            .fold(f64::INFINITY, f64::min);
        for col in out.dataset.columns() {
            if !out.informative_columns.contains(&col.spec.name) {
                let a = association(&out.dataset, &col.spec.name);
                assert!(
                    a < min_informative,
                    "noise column {} association {a} >= informative minimum {min_informative}",
                    col.spec.name
                );
            }
        }
    }

    #[test]
    fn noise_heavy_rows_touch_only_cells_of_the_selected_rows() {
        let clean = generate(&small_spec()).unwrap();
        let heavy = generate(&SynthSpec {
            noise_heavy_row_fraction: 0.3,
            ..small_spec()
        })
        .unwrap();
        assert_eq!(heavy.dataset.n_rows(), clean.dataset.n_rows());
        assert_eq!(heavy.dataset.labels(), clean.dataset.labels());
        assert_eq!(heavy.informative_columns, clean.informative_columns);

        let n = clean.dataset.n_rows();
        let differing = |name: &str| -> Vec<usize> {
            let a = clean.dataset.column_by_name(name).unwrap();
            let b = heavy.dataset.column_by_name(name).unwrap();
            (0..n).filter(|&row| a.render(row) != b.render(row)).collect()
        };

        // An amplified numeric cell almost surely differs from the clean
        // draw, so any numeric noise column recovers the heavy-row set.
        let heavy_rows = differing("noise_num_00");
        assert_eq!(heavy_rows.len(), (n as f64 * 0.3).floor() as usize);
        let mut informative_changes = 0usize;
        for col in clean.dataset.columns() {
            let name = &col.spec.name;
            let diff = differing(name);
            assert!(
                diff.iter().all(|row| heavy_rows.contains(row)),
                "column {name} changed outside the heavy rows"
            );
            if clean.informative_columns.contains(name) {
                informative_changes += diff.len();
            } else if col.spec.kind == ColumnKind::Numeric {
                assert_eq!(diff, heavy_rows, "numeric noise column {name}");
            }
        }
        // Heavy rows lose their informative signal, so informative cells
        // must change too (a few coincide, e.g. a dropped mean of zero).
        assert!(
            informative_changes > 0,
            "informative cells were not degraded on heavy rows"
        );
    }

    #[test]
    fn inject_missing_rate_zero_is_identity() {
        let out = generate(&small_spec()).unwrap();
        let rates: HashMap<String, f64> =
            [("sig_num_00".to_string(), 0.0)].into_iter().collect();
        let injected = inject_missing(&out.dataset, &rates, 1).unwrap();
        assert_eq!(injected, out.dataset);
    }

    #[test]
    fn inject_missing_rate_one_empties_the_column_and_preprocess_drops_it() {
        let out = generate(&small_spec()).unwrap();
        let rates: HashMap<String, f64> =
            [("noise_num_00".to_string(), 1.0)].into_iter().collect();
        let injected = inject_missing(&out.dataset, &rates, 1).unwrap();
        let col = injected.column_by_name("noise_num_00").unwrap();
        assert_eq!(col.missing_count(), injected.n_rows());
        let cleaned = injected.preprocess(0.5).unwrap();
        assert_eq!(cleaned.dropped_columns, vec!["noise_num_00".to_string()]);
        assert_eq!(cleaned.dataset.n_rows(), injected.n_rows());
    }

    #[test]
    fn inject_missing_matches_binomial_expectation() {
        let spec = SynthSpec {
            n_rows: 1000,
            ..small_spec()
        };
        let out = generate(&spec).unwrap();
        let rates: HashMap<String, f64> =
            [("sig_num_01".to_string(), 0.1)].into_iter().collect();
        let injected = inject_missing(&out.dataset, &rates, 9).unwrap();
        let count = injected.column_by_name("sig_num_01").unwrap().missing_count() as f64;
        // Binomial(1000, 0.1): mean 100, sigma ~9.49; allow 4 sigma.
        let sigma = (1000.0 * 0.1 * 0.9_f64).sqrt();
        assert!(
            (count - 100.0).abs() <= 4.0 * sigma,
            "missing count {count} outside 100 +/- {}",
            4.0 * sigma
        );
    }

    #[test]
    fn inject_missing_rejects_unknown_column_and_bad_rate() {
        let out = generate(&small_spec()).unwrap();
        let rates: HashMap<String, f64> = [("nope".to_string(), 0.1)].into_iter().collect();
        assert!(matches!(
            inject_missing(&out.dataset, &rates, 0).unwrap_err(),
            CoreError::UnknownFeature(_)
        ));
        let rates: HashMap<String, f64> =
            [("sig_num_00".to_string(), 1.5)].into_iter().collect();
        assert!(inject_missing(&out.dataset, &rates, 0).is_err());
    }

    #[test]
    fn generated_csv_round_trips_through_load() {
        let out = generate(&small_spec()).unwrap();
        let file = tempfile::NamedTempFile::new().unwrap();
        out.dataset.write_csv(file.path()).unwrap();
        let loaded = Dataset::load_csv(file.path(), out.dataset.schema()).unwrap();
        assert_eq!(loaded.n_rows(), out.dataset.n_rows());
        assert_eq!(loaded.labels(), out.dataset.labels());
        for (a, b) in loaded.columns().iter().zip(out.dataset.columns()) {
            for row in 0..loaded.n_rows() {
                assert_eq!(a.render(row), b.render(row), "column {}", a.spec.name);
            }
        }
    }
}
