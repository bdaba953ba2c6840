//! CART decision tree for binary labels.
//!
//! Splits are chosen greedily to minimise the weighted child impurity.
//! Candidate thresholds are midpoints between adjacent distinct feature
//! values; samples with `x <= threshold` go left. Ties go to the lowest
//! feature index, then the lowest threshold.

use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::check_training;

/// Impurities closer than this are considered equal when ranking splits.
const TIE_EPS: f64 = 1e-12;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Criterion {
    Gini,
    LogLoss,
}

impl Criterion {
    fn impurity(self, n0: usize, n1: usize) -> f64 {
        let n = (n0 + n1) as f64;
        if n == 0.0 {
            return 0.0;
        }
        let (p0, p1) = (n0 as f64 / n, n1 as f64 / n);
        match self {
            Criterion::Gini => 1.0 - p0 * p0 - p1 * p1,
            Criterion::LogLoss => [p0, p1]
                .iter()
                .filter(|&&p| p > 0.0)
                .map(|&p| -p * p.log2())
                .sum(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TreeParams {
    pub criterion: Criterion,
    pub max_depth: usize,
    #[serde(default = "default_min_split")]
    pub min_samples_split: usize,
    #[serde(default = "default_min_leaf")]
    pub min_samples_leaf: usize,
    /// Features examined per split; `None` examines all of them.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<usize>,
}

fn default_min_split() -> usize {
    2
}

fn default_min_leaf() -> usize {
    1
}

impl TreeParams {
    pub fn new(criterion: Criterion, max_depth: usize) -> Self {
        TreeParams {
            criterion,
            max_depth,
            min_samples_split: 2,
            min_samples_leaf: 1,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "node", rename_all = "snake_case")]
pub enum Node {
    Split {
        feature: usize,
        threshold: f64,
        left: usize,
        right: usize,
    },
    Leaf {
        /// Fraction of training samples in the leaf with label 1.
        p1: f64,
        n: usize,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DecisionTreeModel {
    pub nodes: Vec<Node>,
    pub criterion: Criterion,
    pub max_depth: usize,
    pub n_features: usize,
    importances: Vec<f64>,
}

impl DecisionTreeModel {
    pub fn predict_proba_one(&self, row: &[f64]) -> f64 {
        let mut at = 0;
        loop {
            match &self.nodes[at] {
                Node::Leaf { p1, .. } => return *p1,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => at = if row[*feature] <= *threshold { *left } else { *right },
            }
        }
    }

    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<u8> {
        x.iter().map(|r| u8::from(self.predict_proba_one(r) > 0.5)).collect()
    }

    /// Total impurity decrease per feature, normalised to sum to 1 (all zero
    /// for a single-leaf tree).
    pub fn feature_importances(&self) -> Vec<f64> {
        self.importances.clone()
    }

    pub fn depth(&self) -> usize {
        fn walk(nodes: &[Node], at: usize) -> usize {
            match &nodes[at] {
                Node::Leaf { .. } => 0,
                Node::Split { left, right, .. } => 1 + walk(nodes, *left).max(walk(nodes, *right)),
            }
        }
        walk(&self.nodes, 0)
    }
}

struct Split {
    feature: usize,
    threshold: f64,
    impurity: f64,
    left: Vec<usize>,
    right: Vec<usize>,
}

struct Builder<'a> {
    x: &'a [Vec<f64>],
    y: &'a [u8],
    params: &'a TreeParams,
    rng: Option<&'a mut ChaCha8Rng>,
    nodes: Vec<Node>,
    importance: Vec<f64>,
}

impl Builder<'_> {
    fn counts(&self, samples: &[usize]) -> (usize, usize) {
        let n1 = samples.iter().filter(|&&i| self.y[i] == 1).count();
        (samples.len() - n1, n1)
    }

    fn leaf(&mut self, samples: &[usize]) -> usize {
        let (_, n1) = self.counts(samples);
        self.nodes.push(Node::Leaf {
            p1: n1 as f64 / samples.len() as f64,
            n: samples.len(),
        });
        self.nodes.len() - 1
    }

    fn feature_order(&mut self) -> Vec<usize> {
        let d = self.x[0].len();
        let mut order: Vec<usize> = (0..d).collect();
        if let (Some(rng), Some(k)) = (self.rng.as_deref_mut(), self.params.max_features) {
            if k < d {
                order.shuffle(rng);
            }
        }
        order
    }

    fn best_split(&mut self, samples: &[usize]) -> Option<Split> {
        let params = self.params;
        let crit = params.criterion;
        let n = samples.len();
        let (_, total1) = self.counts(samples);
        let min_leaf = params.min_samples_leaf.max(1);
        let budget = params.max_features.unwrap_or(usize::MAX);

        let mut best: Option<(f64, usize, f64)> = None;
        let mut examined = 0;
        let mut sorted = samples.to_vec();
        for f in self.feature_order() {
            if examined >= budget {
                break;
            }
            sorted.sort_by(|&a, &b| self.x[a][f].total_cmp(&self.x[b][f]));
            let lo = self.x[sorted[0]][f];
            let hi = self.x[sorted[n - 1]][f];
            if lo == hi {
                continue;
            }
            examined += 1;
            let mut left1 = 0;
            for pos in 0..n - 1 {
                left1 += usize::from(self.y[sorted[pos]] == 1);
                let (a, b) = (self.x[sorted[pos]][f], self.x[sorted[pos + 1]][f]);
                let nl = pos + 1;
                let nr = n - nl;
                if a == b || nl < min_leaf || nr < min_leaf {
                    continue;
                }
                let right1 = total1 - left1;
                let imp = (nl as f64 * crit.impurity(nl - left1, left1)
                    + nr as f64 * crit.impurity(nr - right1, right1))
                    / n as f64;
                let mut thr = a + (b - a) / 2.0;
                if thr >= b {
                    thr = a;
                }
                let better = match best {
                    None => true,
                    Some((bi, bf, bt)) => {
                        imp < bi - TIE_EPS || ((imp - bi).abs() <= TIE_EPS && (f, thr) < (bf, bt))
                    }
                };
                if better {
                    best = Some((imp, f, thr));
                }
            }
        }
        let (impurity, feature, threshold) = best?;
        let (left, right) = samples.iter().partition(|&&i| self.x[i][feature] <= threshold);
        Some(Split {
            feature,
            threshold,
            impurity,
            left,
            right,
        })
    }

    fn grow(&mut self, samples: Vec<usize>, depth: usize) -> usize {
        let (n0, n1) = self.counts(&samples);
        let n = samples.len();
        let stop = depth >= self.params.max_depth
            || n0 == 0
            || n1 == 0
            || n < self.params.min_samples_split
            || n < 2 * self.params.min_samples_leaf.max(1);
        if stop {
            return self.leaf(&samples);
        }
        let Some(split) = self.best_split(&samples) else {
            return self.leaf(&samples);
        };
        let parent = self.params.criterion.impurity(n0, n1);
        self.importance[split.feature] += n as f64 * (parent - split.impurity);

        let at = self.nodes.len();
        self.nodes.push(Node::Leaf { p1: 0.0, n: 0 });
        let left = self.grow(split.left, depth + 1);
        let right = self.grow(split.right, depth + 1);
        self.nodes[at] = Node::Split {
            feature: split.feature,
            threshold: split.threshold,
            left,
            right,
        };
        at
    }
}

/// Grows a tree on the given sample indices (duplicates allowed).
pub(crate) fn grow_tree(
    x: &[Vec<f64>],
    y: &[u8],
    samples: Vec<usize>,
    params: &TreeParams,
    rng: Option<&mut ChaCha8Rng>,
) -> DecisionTreeModel {
    let d = x[0].len();
    let mut b = Builder {
        x,
        y,
        params,
        rng,
        nodes: Vec::new(),
        importance: vec![0.0; d],
    };
    b.grow(samples, 0);
    let total: f64 = b.importance.iter().sum();
    let importances = if total > 0.0 {
        b.importance.iter().map(|v| v / total).collect()
    } else {
        vec![0.0; d]
    };
    DecisionTreeModel {
        nodes: b.nodes,
        criterion: params.criterion,
        max_depth: params.max_depth,
        n_features: d,
        importances,
    }
}

pub fn train_decision_tree(x: &[Vec<f64>], y: &[u8], params: &TreeParams) -> Result<DecisionTreeModel> {
    check_training(x, y)?;
    if params.max_depth == 0 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    Ok(grow_tree(x, y, (0..x.len()).collect(), params, None))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::metrics::f1_and_accuracy;

    fn xor_data(reps: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut x = Vec::new();
        let mut y = Vec::new();
        for _ in 0..reps {
            for (a, b) in [(0.0, 0.0), (0.0, 1.0), (1.0, 0.0), (1.0, 1.0)] {
                x.push(vec![a, b]);
                y.push(u8::from((a > 0.5) != (b > 0.5)));
            }
        }
        (x, y)
    }

    #[test]
    fn one_split_separates_sign() {
        let x: Vec<Vec<f64>> = [-3.0, -2.0, -0.5, 0.5, 1.0, 4.0].iter().map(|&v| vec![v]).collect();
        let y = vec![0, 0, 0, 1, 1, 1];
        let t = train_decision_tree(&x, &y, &TreeParams::new(Criterion::Gini, 1)).unwrap();
        match &t.nodes[0] {
            Node::Split { feature, threshold, .. } => {
                assert_eq!(*feature, 0);
                assert_eq!(*threshold, 0.0);
            }
            other => panic!("expected a split, got {other:?}"),
        }
        assert_eq!(f1_and_accuracy(&y, &t.predict(&x)).unwrap().accuracy, 1.0);
    }

    #[test]
    fn xor_depth_three() {
        let (x, y) = xor_data(10);
        for crit in [Criterion::Gini, Criterion::LogLoss] {
            let t = train_decision_tree(&x, &y, &TreeParams::new(crit, 3)).unwrap();
            assert!(t.depth() <= 3);
            assert_eq!(t.predict(&x), y);
        }
    }

    #[test]
    fn rejects_bad_input() {
        let x = vec![vec![1.0], vec![2.0]];
        assert!(train_decision_tree(&x, &[1, 1], &TreeParams::new(Criterion::Gini, 3)).is_err());
        assert!(train_decision_tree(&[], &[], &TreeParams::new(Criterion::Gini, 3)).is_err());
        assert!(train_decision_tree(&x, &[0, 1], &TreeParams::new(Criterion::Gini, 0)).is_err());
    }

    #[test]
    fn min_samples_leaf_is_respected() {
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64]).collect();
        let y = vec![1, 0, 0, 0, 0, 0, 0, 0, 0, 1];
        let mut p = TreeParams::new(Criterion::Gini, 5);
        p.min_samples_leaf = 3;
        let t = train_decision_tree(&x, &y, &p).unwrap();
        assert!(t.nodes.iter().all(|n| match n {
            Node::Leaf { n, .. } => *n >= 3,
            _ => true,
        }));
    }

    #[test]
    fn importance_goes_to_the_informative_feature() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![((i * 7) % 5) as f64, i as f64]).collect();
        let y: Vec<u8> = (0..20).map(|i| u8::from(i >= 10)).collect();
        let t = train_decision_tree(&x, &y, &TreeParams::new(Criterion::Gini, 2)).unwrap();
        let imp = t.feature_importances();
        assert_eq!(imp, vec![0.0, 1.0]);
    }

    #[test]
    fn monotone_transform_keeps_predictions() {
        let x: Vec<Vec<f64>> = (0..30)
            .map(|i| vec![((i * 13) % 17) as f64 / 3.0, ((i * 5) % 11) as f64 - 4.0])
            .collect();
        let y: Vec<u8> = (0..30).map(|i| u8::from((i * 13) % 17 > 8 || (i * 5) % 11 < 3)).collect();
        let t = train_decision_tree(&x, &y, &TreeParams::new(Criterion::Gini, 4)).unwrap();
        let xt: Vec<Vec<f64>> = x.iter().map(|r| vec![r[0].exp(), r[1]]).collect();
        let tt = train_decision_tree(&xt, &y, &TreeParams::new(Criterion::Gini, 4)).unwrap();
        assert_eq!(t.predict(&x), tt.predict(&xt));
    }
}
