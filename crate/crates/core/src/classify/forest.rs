//! Random forest of CART trees with bootstrap resampling and per-split
//! feature subsampling.

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

use super::check_training;
use super::tree::{grow_tree, Criterion, DecisionTreeModel, TreeParams};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ForestParams {
    pub n_estimators: usize,
    pub max_depth: usize,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
    #[serde(default = "default_criterion")]
    pub criterion: Criterion,
    #[serde(default = "default_bootstrap")]
    pub bootstrap: bool,
    /// Features per split; `None` means `round(sqrt(d))`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_features: Option<usize>,
}

fn default_criterion() -> Criterion {
    Criterion::Gini
}

fn default_bootstrap() -> bool {
    true
}

impl ForestParams {
    pub fn new(n_estimators: usize, max_depth: usize) -> Self {
        ForestParams {
            n_estimators,
            max_depth,
            min_samples_leaf: 1,
            min_samples_split: 2,
            criterion: Criterion::Gini,
            bootstrap: true,
            max_features: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RandomForestModel {
    pub trees: Vec<DecisionTreeModel>,
    pub n_estimators: usize,
    pub tree_seeds: Vec<u64>,
    pub min_samples_leaf: usize,
    pub min_samples_split: usize,
}

impl RandomForestModel {
    /// Majority vote of the trees; a tied vote predicts 0.
    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<u8> {
        x.iter()
            .map(|r| {
                let votes = self.trees.iter().filter(|t| t.predict_proba_one(r) > 0.5).count();
                u8::from(2 * votes > self.trees.len())
            })
            .collect()
    }

    pub fn feature_importances(&self) -> Vec<f64> {
        let d = self.trees[0].n_features;
        let mut acc = vec![0.0; d];
        for t in &self.trees {
            for (a, v) in acc.iter_mut().zip(t.feature_importances()) {
                *a += v;
            }
        }
        acc.iter().map(|v| v / self.trees.len() as f64).collect()
    }
}

pub fn train_random_forest(x: &[Vec<f64>], y: &[u8], params: &ForestParams, seed: u64) -> Result<RandomForestModel> {
    let d = check_training(x, y)?;
    if params.n_estimators == 0 {
        return Err(Error::invalid("n_estimators must be at least 1"));
    }
    if params.max_depth == 0 {
        return Err(Error::invalid("max_depth must be at least 1"));
    }
    let max_features = params
        .max_features
        .unwrap_or_else(|| ((d as f64).sqrt().round() as usize).max(1))
        .clamp(1, d);
    let tree_params = TreeParams {
        criterion: params.criterion,
        max_depth: params.max_depth,
        min_samples_split: params.min_samples_split,
        min_samples_leaf: params.min_samples_leaf,
        max_features: Some(max_features),
    };
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let tree_seeds: Vec<u64> = (0..params.n_estimators).map(|_| master.next_u64()).collect();
    let n = x.len();
    let trees = tree_seeds
        .iter()
        .map(|&s| {
            let mut rng = ChaCha8Rng::seed_from_u64(s);
            let samples: Vec<usize> = if params.bootstrap {
                (0..n).map(|_| rng.random_range(0..n)).collect()
            } else {
                (0..n).collect()
            };
            grow_tree(x, y, samples, &tree_params, Some(&mut rng))
        })
        .collect();
    Ok(RandomForestModel {
        trees,
        n_estimators: params.n_estimators,
        tree_seeds,
        min_samples_leaf: params.min_samples_leaf,
        min_samples_split: params.min_samples_split,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::metrics::f1_and_accuracy;
    use crate::classify::tree::train_decision_tree;

    fn xor(reps: usize) -> (Vec<Vec<f64>>, Vec<u8>) {
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
    fn single_unbootstrapped_tree_equals_plain_tree() {
        let (x, y) = xor(6);
        let mut p = ForestParams::new(1, 3);
        p.bootstrap = false;
        p.max_features = Some(2);
        let f = train_random_forest(&x, &y, &p, 9).unwrap();
        let t = train_decision_tree(&x, &y, &TreeParams::new(Criterion::Gini, 3)).unwrap();
        assert_eq!(f.predict(&x), t.predict(&x));
    }

    #[test]
    fn same_seed_same_model() {
        let (x, y) = xor(8);
        let p = ForestParams::new(7, 3);
        assert_eq!(train_random_forest(&x, &y, &p, 4).unwrap(), train_random_forest(&x, &y, &p, 4).unwrap());
        assert_ne!(train_random_forest(&x, &y, &p, 4).unwrap(), train_random_forest(&x, &y, &p, 5).unwrap());
    }

    #[test]
    fn xor_ten_trees() {
        let (x, y) = xor(10);
        let f = train_random_forest(&x, &y, &ForestParams::new(10, 3), 1).unwrap();
        assert_eq!(f.trees.len(), 10);
        let acc = f1_and_accuracy(&y, &f.predict(&x)).unwrap().accuracy;
        assert!(acc >= 0.95, "accuracy {acc}");
    }
}
