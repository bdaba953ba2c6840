//! Recursive feature elimination.

use crate::error::{Error, Result};

use super::{check_training, select_columns, EstimatorSpec, Model};

#[derive(Clone, Debug, PartialEq)]
pub struct RfeResult {
    /// Selected column indices, ascending.
    pub selected: Vec<usize>,
    /// Estimator fitted on the selected columns only.
    pub model: Model,
}

/// Repeatedly fits `spec` and drops the feature with the lowest importance
/// until `target_k` remain. Ties drop the highest column index.
pub fn rfe(x: &[Vec<f64>], y: &[u8], spec: &EstimatorSpec, target_k: usize, seed: u64) -> Result<RfeResult> {
    let d = check_training(x, y)?;
    if target_k == 0 || target_k > d {
        return Err(Error::invalid(format!("target_k = {target_k} outside 1..={d}")));
    }
    let mut selected: Vec<usize> = (0..d).collect();
    loop {
        let model = spec.fit(&select_columns(x, &selected), y, seed)?;
        if selected.len() == target_k {
            return Ok(RfeResult { selected, model });
        }
        let imp = model.importances();
        let drop = (0..selected.len())
            .min_by(|&a, &b| imp[a].total_cmp(&imp[b]).then(b.cmp(&a)))
            .expect("at least one feature remains");
        selected.remove(drop);
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::classify::{Criterion, LogisticParams, Penalty, TreeParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn informative_first(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut x = Vec::new();
        let mut y = Vec::new();
        for i in 0..n {
            let label = u8::from(i % 2 == 1);
            let mut row = vec![if label == 1 { 1.0 } else { -1.0 } + rng.random_range(-0.5..0.5)];
            row.extend((0..5).map(|_| rng.random_range(-1.0..1.0)));
            x.push(row);
            y.push(label);
        }
        (x, y)
    }

    #[test]
    fn keeps_the_informative_feature() {
        let (x, y) = informative_first(60, 3);
        let specs = [
            EstimatorSpec::DecisionTree(TreeParams::new(Criterion::Gini, 3)),
            EstimatorSpec::LogisticRegression(LogisticParams::new(1.0, Penalty::L2)),
        ];
        for spec in &specs {
            assert_eq!(rfe(&x, &y, spec, 1, 0).unwrap().selected, vec![0], "{}", spec.name());
        }
    }

    #[test]
    fn full_target_is_identity() {
        let (x, y) = informative_first(30, 4);
        let spec = EstimatorSpec::DecisionTree(TreeParams::new(Criterion::Gini, 3));
        assert_eq!(rfe(&x, &y, &spec, 6, 0).unwrap().selected, (0..6).collect::<Vec<_>>());
    }

    #[test]
    fn final_model_equals_refit_on_selection() {
        let (x, y) = informative_first(40, 5);
        let spec = EstimatorSpec::DecisionTree(TreeParams::new(Criterion::LogLoss, 4));
        let r = rfe(&x, &y, &spec, 3, 9).unwrap();
        assert_eq!(r.model, spec.fit(&select_columns(&x, &r.selected), &y, 9).unwrap());
    }

    #[test]
    fn ties_drop_the_highest_index() {
        // two identical uninformative constant columns after the signal
        let x: Vec<Vec<f64>> = (0..10).map(|i| vec![i as f64, 1.0, 1.0]).collect();
        let y: Vec<u8> = (0..10).map(|i| u8::from(i >= 5)).collect();
        let spec = EstimatorSpec::DecisionTree(TreeParams::new(Criterion::Gini, 2));
        assert_eq!(rfe(&x, &y, &spec, 2, 0).unwrap().selected, vec![0, 1]);
    }

    #[test]
    fn bad_target_rejected() {
        let (x, y) = informative_first(10, 6);
        let spec = EstimatorSpec::DecisionTree(TreeParams::new(Criterion::Gini, 2));
        assert!(rfe(&x, &y, &spec, 0, 0).is_err());
        assert!(rfe(&x, &y, &spec, 7, 0).is_err());
    }
}
