//! Random forest of binary Gini-split classification trees.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{derive_seed, LearnError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestConfig {
    pub tree_count: usize,
    /// Features tried per split; `None` means `ceil(sqrt(feature count))`.
    pub features_per_split: Option<usize>,
    pub min_leaf: usize,
    pub max_depth: Option<usize>,
    pub seed: u64,
}

impl Default for ForestConfig {
    fn default() -> Self {
        ForestConfig {
            tree_count: 100,
            features_per_split: None,
            min_leaf: 1,
            max_depth: None,
            seed: 0,
        }
    }
}

impl ForestConfig {
    pub fn with_seed(seed: u64) -> Self {
        ForestConfig {
            seed,
            ..Default::default()
        }
    }

    fn mtry(&self, dim: usize) -> usize {
        self.features_per_split
            .unwrap_or_else(|| (dim as f64).sqrt().ceil() as usize)
            .clamp(1, dim.max(1))
    }

    fn validate(&self) -> Result<(), LearnError> {
        if self.tree_count == 0 {
            return Err(LearnError::InvalidConfig("tree_count must be at least 1".into()));
        }
        if self.features_per_split == Some(0) {
            return Err(LearnError::InvalidConfig(
                "features_per_split must be at least 1".into(),
            ));
        }
        if self.min_leaf == 0 {
            return Err(LearnError::InvalidConfig("min_leaf must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    /// 1.0 for a positive majority, 0.0 for negative, 0.5 on a tie.
    Leaf(f64),
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Tree {
    nodes: Vec<Node>,
}

impl Tree {
    pub fn vote(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match self.nodes[at] {
                Node::Leaf(v) => return v,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[feature] <= threshold { left } else { right },
            }
        }
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RandomForest {
    trees: Vec<Tree>,
    dim: usize,
}

impl RandomForest {
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn trees(&self) -> &[Tree] {
        &self.trees
    }

    /// Share of trees voting positive.
    pub fn predict_proba(&self, row: &[f64]) -> Result<f64, LearnError> {
        if row.len() != self.dim {
            return Err(LearnError::DimensionMismatch {
                expected: self.dim,
                got: row.len(),
            });
        }
        let votes: f64 = self.trees.iter().map(|t| t.vote(row)).sum();
        Ok(votes / self.trees.len() as f64)
    }

    pub fn predict_many(&self, rows: &[Vec<f64>]) -> Result<Vec<f64>, LearnError> {
        rows.iter().map(|r| self.predict_proba(r)).collect()
    }

    #[cfg(test)]
    pub(crate) fn from_votes(votes: &[f64], dim: usize) -> Self {
        RandomForest {
            trees: votes
                .iter()
                .map(|&v| Tree {
                    nodes: vec![Node::Leaf(v)],
                })
                .collect(),
            dim,
        }
    }
}

pub(crate) fn check_matrix(rows: &[Vec<f64>], labels: &[bool]) -> Result<usize, LearnError> {
    if rows.len() != labels.len() {
        return Err(LearnError::LengthMismatch {
            rows: rows.len(),
            labels: labels.len(),
        });
    }
    let dim = rows.first().map(Vec::len).unwrap_or(0);
    if dim == 0 {
        return Err(LearnError::EmptyFeatureList);
    }
    if let Some(bad) = rows.iter().find(|r| r.len() != dim) {
        return Err(LearnError::DimensionMismatch {
            expected: dim,
            got: bad.len(),
        });
    }
    if rows.iter().flatten().any(|v| !v.is_finite()) {
        return Err(LearnError::NonFinite);
    }
    Ok(dim)
}

/// Grow `cfg.tree_count` trees, each on a bootstrap resample of the rows.
///
/// Tree `i` draws all of its randomness from a stream derived from
/// `cfg.seed` and `i`, so the result does not depend on thread scheduling.
pub fn train_forest(
    rows: &[Vec<f64>],
    labels: &[bool],
    cfg: &ForestConfig,
) -> Result<RandomForest, LearnError> {
    cfg.validate()?;
    let dim = check_matrix(rows, labels)?;
    if rows.len() < 2 {
        return Err(LearnError::TooFewRows(rows.len()));
    }
    let positives = labels.iter().filter(|&&l| l).count();
    if positives == 0 || positives == labels.len() {
        return Err(LearnError::SingleClass);
    }

    let columns: Vec<Vec<f64>> = (0..dim)
        .map(|f| rows.iter().map(|r| r[f]).collect())
        .collect();
    let grower = Grower {
        columns: &columns,
        labels,
        mtry: cfg.mtry(dim),
        min_leaf: cfg.min_leaf,
        max_depth: cfg.max_depth,
    };
    let trees = (0..cfg.tree_count)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(cfg.seed, i as u64));
            let sample: Vec<usize> = (0..rows.len())
                .map(|_| rng.random_range(0..rows.len()))
                .collect();
            grower.grow(sample, &mut rng)
        })
        .collect();
    Ok(RandomForest { trees, dim })
}

struct Grower<'a> {
    columns: &'a [Vec<f64>],
    labels: &'a [bool],
    mtry: usize,
    min_leaf: usize,
    max_depth: Option<usize>,
}

#[derive(Clone, Copy)]
struct Candidate {
    impurity: f64,
    feature: usize,
    threshold: f64,
}

impl Candidate {
    /// Lower child impurity wins; ties go to the lower feature, then the lower threshold.
    fn beats(&self, other: &Candidate) -> bool {
        if self.impurity != other.impurity {
            return self.impurity < other.impurity;
        }
        (self.feature, self.threshold) < (other.feature, other.threshold)
    }
}

/// `n * gini` for a node with `pos` positives out of `n`.
fn weighted_gini(pos: usize, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let (p, q, n) = (pos as f64, (n - pos) as f64, n as f64);
    n - (p * p + q * q) / n
}

impl Grower<'_> {
    fn leaf(&self, pos: usize, n: usize) -> Node {
        let neg = n - pos;
        Node::Leaf(match pos.cmp(&neg) {
            std::cmp::Ordering::Greater => 1.0,
            std::cmp::Ordering::Less => 0.0,
            std::cmp::Ordering::Equal => 0.5,
        })
    }

    fn grow(&self, sample: Vec<usize>, rng: &mut ChaCha8Rng) -> Tree {
        let mut nodes = vec![Node::Leaf(0.0)];
        // (node slot, sample indices, depth)
        let mut stack = vec![(0usize, sample, 0usize)];
        let mut order: Vec<usize> = (0..self.columns.len()).collect();
        let mut scratch: Vec<(f64, bool)> = Vec::new();

        while let Some((slot, idx, depth)) = stack.pop() {
            let n = idx.len();
            let pos = idx.iter().filter(|&&i| self.labels[i]).count();
            let stop = pos == 0
                || pos == n
                || n < 2 * self.min_leaf
                || self.max_depth.is_some_and(|d| depth >= d);
            let best = if stop {
                None
            } else {
                order.shuffle(rng);
                self.best_split(&idx, pos, &order, &mut scratch)
            };
            let Some(best) = best else {
                nodes[slot] = self.leaf(pos, n);
                continue;
            };
            let column = &self.columns[best.feature];
            let (left, right): (Vec<usize>, Vec<usize>) =
                idx.into_iter().partition(|&i| column[i] <= best.threshold);
            let (l, r) = (nodes.len(), nodes.len() + 1);
            nodes.push(Node::Leaf(0.0));
            nodes.push(Node::Leaf(0.0));
            nodes[slot] = Node::Split {
                feature: best.feature,
                threshold: best.threshold,
                left: l,
                right: r,
            };
            stack.push((r, right, depth + 1));
            stack.push((l, left, depth + 1));
        }
        Tree { nodes }
    }

    /// Evaluate features in `order` until `mtry` non-constant ones have been
    /// tried (constant features do not count toward the budget).
    fn best_split(
        &self,
        idx: &[usize],
        pos: usize,
        order: &[usize],
        scratch: &mut Vec<(f64, bool)>,
    ) -> Option<Candidate> {
        let n = idx.len();
        let mut best: Option<Candidate> = None;
        let mut tried = 0;
        for &feature in order {
            if tried == self.mtry {
                break;
            }
            let column = &self.columns[feature];
            scratch.clear();
            scratch.extend(idx.iter().map(|&i| (column[i], self.labels[i])));
            scratch.sort_by(|a, b| a.0.total_cmp(&b.0));
            if scratch[0].0 == scratch[n - 1].0 {
                continue;
            }
            tried += 1;

            let mut left_pos = 0;
            for split in 1..n {
                left_pos += scratch[split - 1].1 as usize;
                let (lo, hi) = (scratch[split - 1].0, scratch[split].0);
                if lo == hi || split < self.min_leaf || n - split < self.min_leaf {
                    continue;
                }
                let impurity =
                    weighted_gini(left_pos, split) + weighted_gini(pos - left_pos, n - split);
                let mid = lo + (hi - lo) / 2.0;
                let threshold = if mid < hi { mid } else { lo };
                let cand = Candidate {
                    impurity,
                    feature,
                    threshold,
                };
                if best.as_ref().is_none_or(|b| cand.beats(b)) {
                    best = Some(cand);
                }
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn separable() -> (Vec<Vec<f64>>, Vec<bool>) {
        let rows: Vec<Vec<f64>> = (0..8).map(|i| vec![i as f64, (i * 7 % 5) as f64]).collect();
        let labels = (0..8).map(|i| i >= 4).collect();
        (rows, labels)
    }

    #[test]
    fn separable_data_is_fit_exactly() {
        let (rows, labels) = separable();
        let forest = train_forest(&rows, &labels, &ForestConfig::with_seed(3)).unwrap();
        for (r, &l) in rows.iter().zip(&labels) {
            let p = forest.predict_proba(r).unwrap();
            assert_eq!(p > 0.5, l, "row {r:?} p={p}");
        }
    }

    #[test]
    fn same_seed_same_forest() {
        let (rows, labels) = separable();
        let a = train_forest(&rows, &labels, &ForestConfig::with_seed(11)).unwrap();
        let b = train_forest(&rows, &labels, &ForestConfig::with_seed(11)).unwrap();
        assert_eq!(a, b);
        let probe = vec![3.5, 2.0];
        assert_eq!(a.predict_proba(&probe).unwrap(), b.predict_proba(&probe).unwrap());
    }

    #[test]
    fn rejects_bad_input() {
        let (rows, _) = separable();
        assert_eq!(
            train_forest(&rows, &[true; 8], &ForestConfig::default()),
            Err(LearnError::SingleClass)
        );
        let mut labels = vec![false; 8];
        labels[0] = true;
        assert!(matches!(
            train_forest(&rows[..1], &labels[..1], &ForestConfig::default()),
            Err(LearnError::TooFewRows(1))
        ));
        let cfg = ForestConfig {
            tree_count: 0,
            ..Default::default()
        };
        assert!(matches!(
            train_forest(&rows, &labels, &cfg),
            Err(LearnError::InvalidConfig(_))
        ));
        let mut ragged = rows.clone();
        ragged[3].push(1.0);
        assert!(matches!(
            train_forest(&ragged, &labels, &ForestConfig::default()),
            Err(LearnError::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn predict_checks_dimension() {
        let (rows, labels) = separable();
        let forest = train_forest(&rows, &labels, &ForestConfig::with_seed(1)).unwrap();
        assert_eq!(
            forest.predict_proba(&[1.0]),
            Err(LearnError::DimensionMismatch {
                expected: 2,
                got: 1
            })
        );
    }

    #[test]
    fn vote_shares() {
        assert_eq!(RandomForest::from_votes(&[1.0; 4], 1).predict_proba(&[0.0]).unwrap(), 1.0);
        assert_eq!(RandomForest::from_votes(&[0.0; 4], 1).predict_proba(&[0.0]).unwrap(), 0.0);
        assert_eq!(
            RandomForest::from_votes(&[1.0, 0.0, 1.0, 0.0], 1)
                .predict_proba(&[0.0])
                .unwrap(),
            0.5
        );
    }

    #[test]
    fn max_depth_and_min_leaf_limit_growth() {
        let rows: Vec<Vec<f64>> = (0..64).map(|i| vec![i as f64]).collect();
        let labels: Vec<bool> = (0..64).map(|i| i % 2 == 0).collect();
        let stump = ForestConfig {
            tree_count: 5,
            max_depth: Some(1),
            ..ForestConfig::with_seed(2)
        };
        let forest = train_forest(&rows, &labels, &stump).unwrap();
        assert!(forest.trees().iter().all(|t| t.node_count() <= 3));

        let coarse = ForestConfig {
            tree_count: 5,
            min_leaf: 16,
            ..ForestConfig::with_seed(2)
        };
        let fine = ForestConfig {
            tree_count: 5,
            ..ForestConfig::with_seed(2)
        };
        let c: usize = train_forest(&rows, &labels, &coarse).unwrap().trees().iter().map(Tree::node_count).sum();
        let f: usize = train_forest(&rows, &labels, &fine).unwrap().trees().iter().map(Tree::node_count).sum();
        assert!(c < f);
    }

    #[test]
    fn split_ties_prefer_lower_feature_then_threshold() {
        let a = Candidate {
            impurity: 1.0,
            feature: 0,
            threshold: 5.0,
        };
        let b = Candidate {
            impurity: 1.0,
            feature: 1,
            threshold: 0.0,
        };
        let c = Candidate {
            impurity: 1.0,
            feature: 0,
            threshold: 2.0,
        };
        assert!(a.beats(&b) && !b.beats(&a));
        assert!(c.beats(&a));
        let better = Candidate {
            impurity: 0.5,
            feature: 9,
            threshold: 9.0,
        };
        assert!(better.beats(&c));
    }

    #[test]
    fn gini_weights() {
        assert_eq!(weighted_gini(0, 4), 0.0);
        assert_eq!(weighted_gini(4, 4), 0.0);
        assert_eq!(weighted_gini(2, 4), 2.0);
        assert_eq!(weighted_gini(0, 0), 0.0);
    }
}
