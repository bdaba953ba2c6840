//! Interpretable binary classifiers and their evaluation.
//!
//! Feature matrices are passed as row slices (`&[Vec<f64>]`) with labels in
//! `{0, 1}`. Every estimator is deterministic given its parameters and seed.

pub mod cv;
pub mod fisher;
pub mod forest;
pub mod logistic;
pub mod metrics;
pub mod rfe;
pub mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub use cv::{stratified_folds, stratified_kfold_cv, ClassifierGrid, CvConfig, EvalReport, FoldResult};
pub use fisher::fisher_projection;
pub use forest::{ForestParams, RandomForestModel};
pub use logistic::{LogisticModel, LogisticParams, Penalty};
pub use metrics::{f1_and_accuracy, Scores};
pub use rfe::{rfe, RfeResult};
pub use tree::{Criterion, DecisionTreeModel, TreeParams};

/// One point of a hyperparameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum EstimatorSpec {
    DecisionTree(TreeParams),
    RandomForest(ForestParams),
    LogisticRegression(LogisticParams),
}

/// A fitted estimator.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Model {
    DecisionTree(DecisionTreeModel),
    RandomForest(RandomForestModel),
    LogisticRegression(LogisticModel),
}

impl EstimatorSpec {
    pub fn fit(&self, x: &[Vec<f64>], y: &[u8], seed: u64) -> Result<Model> {
        Ok(match self {
            EstimatorSpec::DecisionTree(p) => Model::DecisionTree(tree::train_decision_tree(x, y, p)?),
            EstimatorSpec::RandomForest(p) => Model::RandomForest(forest::train_random_forest(x, y, p, seed)?),
            EstimatorSpec::LogisticRegression(p) => Model::LogisticRegression(logistic::train_logistic(x, y, p)?),
        })
    }

    pub fn name(&self) -> &'static str {
        match self {
            EstimatorSpec::DecisionTree(_) => "decision_tree",
            EstimatorSpec::RandomForest(_) => "random_forest",
            EstimatorSpec::LogisticRegression(_) => "logistic_regression",
        }
    }
}

impl Model {
    pub fn predict(&self, x: &[Vec<f64>]) -> Vec<u8> {
        match self {
            Model::DecisionTree(m) => m.predict(x),
            Model::RandomForest(m) => m.predict(x),
            Model::LogisticRegression(m) => m.predict(x),
        }
    }

    /// Per-feature importance used by recursive feature elimination.
    pub fn importances(&self) -> Vec<f64> {
        match self {
            Model::DecisionTree(m) => m.feature_importances(),
            Model::RandomForest(m) => m.feature_importances(),
            Model::LogisticRegression(m) => m.weights.iter().map(|w| w.abs()).collect(),
        }
    }
}

/// Validates a training set: non-empty, rectangular, finite, binary labels
/// with both classes present.
pub(crate) fn check_training(x: &[Vec<f64>], y: &[u8]) -> Result<usize> {
    if x.is_empty() {
        return Err(Error::invalid("empty training matrix"));
    }
    if x.len() != y.len() {
        return Err(Error::invalid(format!("{} rows but {} labels", x.len(), y.len())));
    }
    let d = x[0].len();
    if d == 0 {
        return Err(Error::invalid("training matrix has no features"));
    }
    if x.iter().any(|r| r.len() != d) {
        return Err(Error::invalid("training matrix rows differ in length"));
    }
    if x.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::invalid("training matrix has non-finite entries"));
    }
    if y.iter().any(|&l| l > 1) {
        return Err(Error::invalid("labels must be 0 or 1"));
    }
    if y.iter().all(|&l| l == y[0]) {
        return Err(Error::invalid("labels contain a single class"));
    }
    Ok(d)
}

/// Copies the listed columns of `x`.
pub fn select_columns(x: &[Vec<f64>], cols: &[usize]) -> Vec<Vec<f64>> {
    x.iter().map(|r| cols.iter().map(|&c| r[c]).collect()).collect()
}

/// Copies the listed rows of `x` and `y`.
pub(crate) fn select_rows(x: &[Vec<f64>], y: &[u8], rows: &[usize]) -> (Vec<Vec<f64>>, Vec<u8>) {
    (rows.iter().map(|&i| x[i].clone()).collect(), rows.iter().map(|&i| y[i]).collect())
}
