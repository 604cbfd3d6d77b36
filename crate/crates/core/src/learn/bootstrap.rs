//! Out-of-sample bootstrap evaluation and permutation importance.

use std::collections::BTreeMap;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::auc::auc;
use super::forest::{check_matrix, train_forest, ForestConfig, RandomForest};
use super::{derive_seed, median, LearnError};

const BOOTSTRAP_STREAM: u64 = 0xB007_5742;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct BootstrapConfig {
    pub iterations: usize,
    pub forest: ForestConfig,
    /// Permutations per feature per iteration; 0 skips importance.
    pub importance_repeats: usize,
    /// Resample attempts per iteration before giving up on the data.
    pub max_resamples: usize,
}

impl Default for BootstrapConfig {
    fn default() -> Self {
        BootstrapConfig {
            iterations: 100,
            forest: ForestConfig::default(),
            importance_repeats: 1,
            max_resamples: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub experiment_name: String,
    pub iterations: usize,
    pub rows: usize,
    pub median_auc: f64,
    pub auc_values: Vec<f64>,
    /// Feature name to every importance value collected across iterations.
    pub importances: BTreeMap<String, Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub baseline_median_auc: Option<f64>,
    /// Per-iteration AUC minus the baseline median.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auc_deltas: Option<Vec<f64>>,
    pub config: serde_json::Value,
}

impl ExperimentResult {
    pub fn compare_to_baseline(&mut self, baseline_median: f64) {
        self.baseline_median_auc = Some(baseline_median);
        self.auc_deltas = Some(self.auc_values.iter().map(|a| a - baseline_median).collect());
    }

    pub fn median_importance(&self, feature: &str) -> Option<f64> {
        self.importances
            .get(feature)
            .filter(|v| !v.is_empty())
            .map(|v| median(v))
    }
}

/// AUC drop when `feature` is rearranged by `permutation` (row `i` takes the
/// value of row `permutation[i]`).
pub fn importance_for_permutation(
    model: &RandomForest,
    rows: &[Vec<f64>],
    labels: &[bool],
    feature: usize,
    permutation: &[usize],
) -> Result<f64, LearnError> {
    if feature >= model.dim() {
        return Err(LearnError::DimensionMismatch {
            expected: model.dim(),
            got: feature + 1,
        });
    }
    if permutation.len() != rows.len() {
        return Err(LearnError::LengthMismatch {
            rows: rows.len(),
            labels: permutation.len(),
        });
    }
    let original = auc(&model.predict_many(rows)?, labels)?;
    let mut row = Vec::with_capacity(model.dim());
    let mut permuted = Vec::with_capacity(rows.len());
    for (i, r) in rows.iter().enumerate() {
        row.clear();
        row.extend_from_slice(r);
        row[feature] = rows[permutation[i]][feature];
        permuted.push(model.predict_proba(&row)?);
    }
    Ok(original - auc(&permuted, labels)?)
}

/// One importance value per random shuffle of the `feature` column.
pub fn permutation_importance<R: Rng>(
    model: &RandomForest,
    rows: &[Vec<f64>],
    labels: &[bool],
    feature: usize,
    repeats: usize,
    rng: &mut R,
) -> Result<Vec<f64>, LearnError> {
    let mut perm: Vec<usize> = (0..rows.len()).collect();
    (0..repeats)
        .map(|_| {
            perm.shuffle(rng);
            importance_for_permutation(model, rows, labels, feature, &perm)
        })
        .collect()
}

struct Iteration {
    auc: f64,
    importances: Vec<Vec<f64>>,
}

fn has_both(labels: &[bool], idx: impl Iterator<Item = usize>) -> bool {
    let (mut pos, mut neg) = (false, false);
    for i in idx {
        if labels[i] {
            pos = true;
        } else {
            neg = true;
        }
        if pos && neg {
            return true;
        }
    }
    false
}

fn run_iteration(
    rows: &[Vec<f64>],
    labels: &[bool],
    dim: usize,
    cfg: &BootstrapConfig,
    iteration: usize,
) -> Result<Iteration, LearnError> {
    let n = rows.len();
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(
        cfg.forest.seed ^ BOOTSTRAP_STREAM,
        iteration as u64,
    ));
    let mut in_bag = vec![false; n];
    let mut sample = Vec::with_capacity(n);
    let mut attempt = 0;
    loop {
        if attempt == cfg.max_resamples {
            return Err(LearnError::Degenerate {
                attempts: cfg.max_resamples,
            });
        }
        attempt += 1;
        in_bag.iter_mut().for_each(|b| *b = false);
        sample.clear();
        for _ in 0..n {
            let i = rng.random_range(0..n);
            in_bag[i] = true;
            sample.push(i);
        }
        let out_of_bag = (0..n).filter(|&i| !in_bag[i]);
        if has_both(labels, sample.iter().copied()) && has_both(labels, out_of_bag) {
            break;
        }
    }

    let train_rows: Vec<Vec<f64>> = sample.iter().map(|&i| rows[i].clone()).collect();
    let train_labels: Vec<bool> = sample.iter().map(|&i| labels[i]).collect();
    let test_idx: Vec<usize> = (0..n).filter(|&i| !in_bag[i]).collect();
    let test_rows: Vec<Vec<f64>> = test_idx.iter().map(|&i| rows[i].clone()).collect();
    let test_labels: Vec<bool> = test_idx.iter().map(|&i| labels[i]).collect();

    let forest_cfg = ForestConfig {
        seed: rng.random(),
        ..cfg.forest.clone()
    };
    let model = train_forest(&train_rows, &train_labels, &forest_cfg)?;
    let auc = auc(&model.predict_many(&test_rows)?, &test_labels)?;
    let importances = (0..dim)
        .map(|f| {
            permutation_importance(
                &model,
                &test_rows,
                &test_labels,
                f,
                cfg.importance_repeats,
                &mut rng,
            )
        })
        .collect::<Result<_, _>>()?;
    Ok(Iteration { auc, importances })
}

/// Train on a with-replacement resample, test on the rows it missed, repeat.
///
/// An iteration whose training or held-out rows lack a class is redrawn (up
/// to `max_resamples` times) so exactly `iterations` AUCs are produced.
pub fn out_of_sample_bootstrap(
    rows: &[Vec<f64>],
    labels: &[bool],
    feature_names: &[String],
    cfg: &BootstrapConfig,
) -> Result<ExperimentResult, LearnError> {
    let dim = check_matrix(rows, labels)?;
    if feature_names.len() != dim {
        return Err(LearnError::InvalidConfig(format!(
            "{} feature names for {dim} columns",
            feature_names.len()
        )));
    }
    if cfg.iterations == 0 {
        return Err(LearnError::InvalidConfig("iterations must be at least 1".into()));
    }
    if rows.len() < 2 {
        return Err(LearnError::TooFewRows(rows.len()));
    }
    if !has_both(labels, 0..labels.len()) {
        return Err(LearnError::SingleClass);
    }

    let runs: Vec<Iteration> = (0..cfg.iterations)
        .into_par_iter()
        .map(|i| run_iteration(rows, labels, dim, cfg, i))
        .collect::<Result<_, _>>()?;

    let auc_values: Vec<f64> = runs.iter().map(|r| r.auc).collect();
    let mut importances: BTreeMap<String, Vec<f64>> = BTreeMap::new();
    if cfg.importance_repeats > 0 {
        for (f, name) in feature_names.iter().enumerate() {
            importances.insert(
                name.clone(),
                runs.iter().flat_map(|r| r.importances[f].iter().copied()).collect(),
            );
        }
    }
    Ok(ExperimentResult {
        experiment_name: "bootstrap".into(),
        iterations: cfg.iterations,
        rows: rows.len(),
        median_auc: median(&auc_values),
        auc_values,
        importances,
        baseline_median_auc: None,
        auc_deltas: None,
        config: serde_json::to_value(cfg).expect("config serializes"),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Column 0 decides the label, column 1 is noise.
    fn signal_fixture(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<bool>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let rows: Vec<Vec<f64>> = (0..n)
            .map(|_| vec![rng.random::<f64>(), rng.random::<f64>()])
            .collect();
        let labels = rows.iter().map(|r| r[0] > 0.5).collect();
        (rows, labels)
    }

    fn small_cfg(seed: u64, iterations: usize) -> BootstrapConfig {
        BootstrapConfig {
            iterations,
            forest: ForestConfig {
                tree_count: 25,
                ..ForestConfig::with_seed(seed)
            },
            importance_repeats: 2,
            max_resamples: 100,
        }
    }

    fn names() -> Vec<String> {
        vec!["signal".into(), "noise".into()]
    }

    #[test]
    fn signal_gives_high_auc_and_importance() {
        let (rows, labels) = signal_fixture(200, 1);
        let res = out_of_sample_bootstrap(&rows, &labels, &names(), &small_cfg(4, 20)).unwrap();
        assert_eq!(res.auc_values.len(), 20);
        assert!(res.median_auc >= 0.95, "median {}", res.median_auc);
        assert!(res.median_importance("signal").unwrap() > 0.4);
        assert!(res.median_importance("noise").unwrap().abs() <= 0.05);
        assert_eq!(res.importances["signal"].len(), 40);
    }

    #[test]
    fn single_iteration_is_reproducible() {
        let (rows, labels) = signal_fixture(60, 2);
        let a = out_of_sample_bootstrap(&rows, &labels, &names(), &small_cfg(9, 1)).unwrap();
        let b = out_of_sample_bootstrap(&rows, &labels, &names(), &small_cfg(9, 1)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.median_auc, a.auc_values[0]);
    }

    #[test]
    fn identity_permutation_is_exactly_zero() {
        let (rows, labels) = signal_fixture(80, 3);
        let model = train_forest(&rows, &labels, &ForestConfig::with_seed(1)).unwrap();
        let identity: Vec<usize> = (0..rows.len()).collect();
        for f in 0..2 {
            assert_eq!(
                importance_for_permutation(&model, &rows, &labels, f, &identity).unwrap(),
                0.0
            );
        }
    }

    #[test]
    fn degenerate_data_errors() {
        // One positive among two rows: every out-of-bag set that holds both
        // classes needs the training sample to miss one of them.
        let rows = vec![vec![0.0], vec![1.0]];
        let labels = vec![true, false];
        let err = out_of_sample_bootstrap(&rows, &labels, &["x".into()], &small_cfg(0, 3)).unwrap_err();
        assert!(matches!(err, LearnError::Degenerate { .. }));
    }

    #[test]
    fn deltas_against_baseline() {
        let (rows, labels) = signal_fixture(60, 5);
        let mut res = out_of_sample_bootstrap(&rows, &labels, &names(), &small_cfg(1, 3)).unwrap();
        res.compare_to_baseline(0.5);
        let d = res.auc_deltas.as_ref().unwrap();
        for (a, delta) in res.auc_values.iter().zip(d) {
            assert_eq!(*delta, a - 0.5);
        }
    }
}
