//! From-scratch random forest, ROC-AUC and the bootstrap evaluation harness.

pub mod auc;
pub mod bootstrap;
pub mod experiment;
pub mod forest;

use thiserror::Error;

pub use auc::auc;
pub use bootstrap::{
    importance_for_permutation, out_of_sample_bootstrap, permutation_importance, BootstrapConfig,
    ExperimentResult,
};
pub use experiment::{design_matrix, run_experiment, run_experiment_on, Design, ExperimentSpec, RowFilter};
pub use forest::{train_forest, ForestConfig, RandomForest};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LearnError {
    #[error("labels hold a single class; AUC is undefined")]
    SingleClass,
    #[error("expected rows of {expected} features, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("{rows} rows but {labels} labels")]
    LengthMismatch { rows: usize, labels: usize },
    #[error("inputs contain NaN or infinite values")]
    NonFinite,
    #[error("need at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("no feature columns selected")]
    EmptyFeatureList,
    #[error("no rows pass the filter ({0})")]
    EmptyFilter(String),
    #[error("filter ({filter}) leaves {rows} rows, need {min_rows} with both labels present")]
    UnderPopulated {
        filter: String,
        rows: usize,
        min_rows: usize,
    },
    #[error("no resample with both classes in and out of bag after {attempts} attempts")]
    Degenerate { attempts: usize },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

/// Independent 64-bit seed for sub-stream `stream` of `master` (SplitMix64 finalizer).
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master
        .wrapping_add(0x9E37_79B9_7F4A_7C15)
        .wrapping_add(stream.wrapping_mul(0xD1B5_4A32_D192_ED69));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Median of a non-empty slice; the mean of the middle pair for even lengths.
pub fn median(values: &[f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let mid = v.len() / 2;
    if v.len() % 2 == 1 {
        v[mid]
    } else {
        (v[mid - 1] + v[mid]) / 2.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn medians() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert_eq!(median(&[7.0]), 7.0);
    }

    #[test]
    fn seeds_differ_per_stream() {
        let a: Vec<u64> = (0..100).map(|i| derive_seed(42, i)).collect();
        let mut b = a.clone();
        b.sort_unstable();
        b.dedup();
        assert_eq!(b.len(), 100);
        assert_ne!(derive_seed(1, 0), derive_seed(2, 0));
    }
}
