//! Stratified k-fold cross-validation with nested hyperparameter search.
//!
//! Each outer training fold runs its own grid search: every grid point is
//! scored by the mean validation F1 of an inner stratified k-fold split of
//! the training fold, with feature elimination fitted inside each inner
//! training split. The winning point (first on ties) is then refit with
//! feature elimination on the whole outer training fold and scored on both
//! the training fold and the held-out fold.

use std::collections::BTreeMap;
use std::io::Write;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

use super::forest::ForestParams;
use super::logistic::{LogisticParams, Penalty};
use super::metrics::{f1_and_accuracy, Scores};
use super::rfe::rfe;
use super::tree::{Criterion, TreeParams};
use super::{select_columns, select_rows, EstimatorSpec};

pub const DEFAULT_FOLDS: usize = 5;
pub const DEFAULT_RFE_TARGET: usize = 8;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassifierGrid {
    pub specs: Vec<EstimatorSpec>,
}

const DEPTHS: [usize; 5] = [3, 4, 5, 10, 20];

impl ClassifierGrid {
    pub fn decision_trees() -> Self {
        let specs = [Criterion::Gini, Criterion::LogLoss]
            .into_iter()
            .flat_map(|c| DEPTHS.map(move |d| EstimatorSpec::DecisionTree(TreeParams::new(c, d))))
            .collect();
        ClassifierGrid { specs }
    }

    pub fn random_forests() -> Self {
        let mut specs = Vec::new();
        for n in [5, 10, 15, 20] {
            for d in DEPTHS {
                for leaf in [1, 2, 3, 4] {
                    for split in [2, 3, 4] {
                        specs.push(EstimatorSpec::RandomForest(ForestParams {
                            min_samples_leaf: leaf,
                            min_samples_split: split,
                            ..ForestParams::new(n, d)
                        }));
                    }
                }
            }
        }
        ClassifierGrid { specs }
    }

    pub fn logistic() -> Self {
        let specs = [0.1, 0.5, 0.7, 1.0]
            .into_iter()
            .flat_map(|c| [Penalty::L1, Penalty::L2].map(|p| EstimatorSpec::LogisticRegression(LogisticParams::new(c, p))))
            .collect();
        ClassifierGrid { specs }
    }

    /// Trees, forests and logistic regression.
    pub fn full() -> Self {
        Self::decision_trees().chain(Self::random_forests()).chain(Self::logistic())
    }

    /// Trees and logistic regression.
    pub fn compact() -> Self {
        Self::decision_trees().chain(Self::logistic())
    }

    /// The single depth-3 Gini tree.
    pub fn single_tree() -> Self {
        ClassifierGrid {
            specs: vec![EstimatorSpec::DecisionTree(TreeParams::new(Criterion::Gini, 3))],
        }
    }

    pub fn chain(mut self, other: Self) -> Self {
        self.specs.extend(other.specs);
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.specs.is_empty() {
            return Err(Error::invalid("classifier grid is empty"));
        }
        for s in &self.specs {
            let ok = match s {
                EstimatorSpec::DecisionTree(p) => p.max_depth >= 1 && p.min_samples_leaf >= 1 && p.min_samples_split >= 2,
                EstimatorSpec::RandomForest(p) => {
                    p.n_estimators >= 1 && p.max_depth >= 1 && p.min_samples_leaf >= 1 && p.min_samples_split >= 2
                }
                EstimatorSpec::LogisticRegression(p) => p.c > 0.0 && p.c.is_finite() && p.max_iter >= 1 && p.tol > 0.0,
            };
            if !ok {
                return Err(Error::invalid(format!("invalid grid point {s:?}")));
            }
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvConfig {
    pub folds: usize,
    pub seed: u64,
    /// Features kept by elimination; `None` disables it.
    pub rfe_target: Option<usize>,
}

impl Default for CvConfig {
    fn default() -> Self {
        CvConfig {
            folds: DEFAULT_FOLDS,
            seed: 0,
            rfe_target: Some(DEFAULT_RFE_TARGET),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldResult {
    pub fold: usize,
    pub n_train: usize,
    pub n_validation: usize,
    /// Scores of the model refit on the whole training fold.
    pub train_accuracy: f64,
    pub train_f1: f64,
    pub validation_accuracy: f64,
    pub validation_f1: f64,
    pub chosen: EstimatorSpec,
    /// Mean inner validation F1 of the chosen point, absent without a search.
    pub inner_f1: Option<f64>,
    pub selected_features: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub n_samples: usize,
    pub n_features: usize,
    pub n_folds: usize,
    pub seed: u64,
    /// `class_group` or `class`.
    pub stratification: String,
    pub folds: Vec<FoldResult>,
    pub mean_train_accuracy: f64,
    pub mean_train_f1: f64,
    pub mean_validation_accuracy: f64,
    pub mean_validation_f1: f64,
    /// Grid point chosen on the full data set.
    pub chosen: EstimatorSpec,
    pub selected_features: Vec<usize>,
    #[serde(default)]
    pub selected_feature_ids: Vec<String>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)? + "\n")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        Ok(serde_json::from_str(s)?)
    }

    /// Per-fold table: `fold,n_train,n_validation,train_accuracy,train_f1,validation_accuracy,validation_f1,estimator`.
    pub fn write_folds_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        out.write_record([
            "fold",
            "n_train",
            "n_validation",
            "train_accuracy",
            "train_f1",
            "validation_accuracy",
            "validation_f1",
            "estimator",
        ])?;
        for f in &self.folds {
            out.write_record([
                f.fold.to_string(),
                f.n_train.to_string(),
                f.n_validation.to_string(),
                f.train_accuracy.to_string(),
                f.train_f1.to_string(),
                f.validation_accuracy.to_string(),
                f.validation_f1.to_string(),
                serde_json::to_string(&f.chosen)?,
            ])?;
        }
        out.flush().map_err(|e| Error::io("<folds csv>", e))?;
        Ok(())
    }
}

fn mix(seed: u64, salt: u64) -> u64 {
    let mut z = seed ^ salt.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

struct Folds {
    assignment: Vec<usize>,
    joint: bool,
}

fn assign_folds(labels: &[u8], groups: &[String], folds: usize, seed: u64) -> Result<Folds> {
    if folds < 2 {
        return Err(Error::invalid(format!("folds = {folds} must be at least 2")));
    }
    if labels.len() != groups.len() {
        return Err(Error::invalid("labels and groups differ in length"));
    }
    if labels.len() < folds {
        return Err(Error::invalid(format!("{} samples but {folds} folds", labels.len())));
    }
    let mut cells: BTreeMap<(u8, &str), Vec<usize>> = BTreeMap::new();
    for (i, (&l, g)) in labels.iter().zip(groups).enumerate() {
        cells.entry((l, g.as_str())).or_default().push(i);
    }
    let joint = cells.values().all(|c| c.len() >= folds);
    if !joint {
        cells = BTreeMap::new();
        for (i, &l) in labels.iter().enumerate() {
            cells.entry((l, "")).or_default().push(i);
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut assignment = vec![0; labels.len()];
    let mut pos = 0;
    for members in cells.values_mut() {
        members.shuffle(&mut rng);
        for &i in members.iter() {
            assignment[i] = pos % folds;
            pos += 1;
        }
    }
    Ok(Folds { assignment, joint })
}

/// Fold index for every sample. Samples are grouped into (class, group)
/// cells, each cell is shuffled, and the concatenated cells are dealt round
/// robin. If any cell has fewer than `folds` members the groups are ignored.
pub fn stratified_folds(labels: &[u8], groups: &[String], folds: usize, seed: u64) -> Result<Vec<usize>> {
    let f = assign_folds(labels, groups, folds, seed)?;
    if !f.joint {
        log::warn!("a (class, group) cell has fewer than {folds} members; stratifying by class only");
    }
    Ok(f.assignment)
}

fn split(assignment: &[usize], fold: usize) -> (Vec<usize>, Vec<usize>) {
    (0..assignment.len()).partition(|&i| assignment[i] != fold)
}

struct Fitted {
    selected: Vec<usize>,
    model: super::Model,
}

fn fit_with_rfe(x: &[Vec<f64>], y: &[u8], spec: &EstimatorSpec, rfe_target: Option<usize>, seed: u64) -> Result<Fitted> {
    let d = x[0].len();
    match rfe_target {
        Some(k) if k < d => {
            let r = rfe(x, y, spec, k, seed)?;
            Ok(Fitted { selected: r.selected, model: r.model })
        }
        _ => Ok(Fitted { selected: (0..d).collect(), model: spec.fit(x, y, seed)? }),
    }
}

fn score(f: &Fitted, x: &[Vec<f64>], y: &[u8]) -> Result<Scores> {
    f1_and_accuracy(y, &f.model.predict(&select_columns(x, &f.selected)))
}

/// Mean inner validation F1 of every grid point, in grid order.
///
/// The inner split uses at most as many folds as the rarer class has
/// members. `None` when the grid has a single point or the training set is
/// too small for an inner split.
fn inner_scores(
    x: &[Vec<f64>],
    y: &[u8],
    groups: &[String],
    grid: &ClassifierGrid,
    cfg: &CvConfig,
    seed: u64,
) -> Result<Option<Vec<f64>>> {
    let n1 = y.iter().filter(|&&l| l == 1).count();
    let k = cfg.folds.min(n1).min(y.len() - n1);
    if grid.specs.len() == 1 {
        return Ok(None);
    }
    if k < 2 {
        log::warn!("{} training samples are too few for an inner split; using the first grid point", y.len());
        return Ok(None);
    }
    let folds = assign_folds(y, groups, k, seed)?;
    if !folds.joint {
        log::debug!("inner split stratified by class only");
    }
    let splits: Vec<_> = (0..k).map(|f| split(&folds.assignment, f)).collect();
    grid.specs
        .par_iter()
        .map(|spec| {
            let mut total = 0.0;
            for (f, (tr, va)) in splits.iter().enumerate() {
                let (xt, yt) = select_rows(x, y, tr);
                let (xv, yv) = select_rows(x, y, va);
                let fitted = fit_with_rfe(&xt, &yt, spec, cfg.rfe_target, mix(seed, f as u64))?;
                total += score(&fitted, &xv, &yv)?.f1;
            }
            Ok(total / k as f64)
        })
        .collect::<Result<Vec<f64>>>()
        .map(Some)
}

/// Index of the best grid point and its score; the first wins ties.
fn best(scores: Option<&[f64]>) -> (usize, Option<f64>) {
    let Some(scores) = scores else {
        return (0, None);
    };
    let mut b = 0;
    for (i, &s) in scores.iter().enumerate() {
        if s > scores[b] {
            b = i;
        }
    }
    (b, Some(scores[b]))
}

/// Grid search and elimination on the whole data set.
pub fn select_final_model(
    x: &[Vec<f64>],
    y: &[u8],
    groups: &[String],
    grid: &ClassifierGrid,
    cfg: &CvConfig,
) -> Result<(EstimatorSpec, Vec<usize>, super::Model)> {
    grid.validate()?;
    super::check_training(x, y)?;
    let scores = inner_scores(x, y, groups, grid, cfg, mix(cfg.seed, u64::MAX))?;
    let spec = grid.specs[best(scores.as_deref()).0].clone();
    let fitted = fit_with_rfe(x, y, &spec, cfg.rfe_target, cfg.seed)?;
    Ok((spec, fitted.selected, fitted.model))
}

pub fn stratified_kfold_cv(
    x: &[Vec<f64>],
    y: &[u8],
    groups: &[String],
    grid: &ClassifierGrid,
    cfg: &CvConfig,
) -> Result<EvalReport> {
    cv_with_final_model(x, y, groups, grid, cfg).map(|(r, _)| r)
}

/// Cross-validation report plus the model refit on all samples with the
/// grid point and features recorded in the report.
pub fn cv_with_final_model(
    x: &[Vec<f64>],
    y: &[u8],
    groups: &[String],
    grid: &ClassifierGrid,
    cfg: &CvConfig,
) -> Result<(EvalReport, super::Model)> {
    grid.validate()?;
    let d = super::check_training(x, y)?;
    if cfg.rfe_target == Some(0) {
        return Err(Error::invalid("rfe_target must be at least 1"));
    }
    let outer = assign_folds(y, groups, cfg.folds, cfg.seed)?;
    if !outer.joint {
        log::warn!("a (class, group) cell has fewer than {} members; stratifying by class only", cfg.folds);
    }
    let mut folds = Vec::with_capacity(cfg.folds);
    for f in 0..cfg.folds {
        let (tr, va) = split(&outer.assignment, f);
        let (xt, yt) = select_rows(x, y, &tr);
        let (xv, yv) = select_rows(x, y, &va);
        let gt: Vec<String> = tr.iter().map(|&i| groups[i].clone()).collect();
        let fold_seed = mix(cfg.seed, f as u64 + 1);
        let scores = inner_scores(&xt, &yt, &gt, grid, cfg, fold_seed)?;
        let (b, inner_f1) = best(scores.as_deref());
        let spec = grid.specs[b].clone();
        let fitted = fit_with_rfe(&xt, &yt, &spec, cfg.rfe_target, fold_seed)?;
        let train = score(&fitted, &xt, &yt)?;
        let val = score(&fitted, &xv, &yv)?;
        log::debug!("fold {f}: {} inner F1 {inner_f1:?}, validation F1 {:.3}", spec.name(), val.f1);
        folds.push(FoldResult {
            fold: f,
            n_train: tr.len(),
            n_validation: va.len(),
            train_accuracy: train.accuracy,
            train_f1: train.f1,
            validation_accuracy: val.accuracy,
            validation_f1: val.f1,
            chosen: spec,
            inner_f1,
            selected_features: fitted.selected,
        });
    }
    let mean = |g: fn(&FoldResult) -> f64| folds.iter().map(g).sum::<f64>() / folds.len() as f64;
    let (chosen, selected, model) = select_final_model(x, y, groups, grid, cfg)?;
    let report = EvalReport {
        n_samples: y.len(),
        n_features: d,
        n_folds: cfg.folds,
        seed: cfg.seed,
        stratification: if outer.joint { "class_group" } else { "class" }.into(),
        mean_train_accuracy: mean(|f| f.train_accuracy),
        mean_train_f1: mean(|f| f.train_f1),
        mean_validation_accuracy: mean(|f| f.validation_accuracy),
        mean_validation_f1: mean(|f| f.validation_f1),
        folds,
        chosen,
        selected_features: selected,
        selected_feature_ids: Vec::new(),
    };
    Ok((report, model))
}

/// Cross-validates a feature matrix and names the selected columns.
pub fn evaluate_matrix(fm: &FeatureMatrix, grid: &ClassifierGrid, cfg: &CvConfig) -> Result<(EvalReport, super::Model)> {
    fm.validate()?;
    let (mut report, model) = cv_with_final_model(&fm.values, &fm.labels, &fm.groups, grid, cfg)?;
    report.selected_feature_ids = report.selected_features.iter().map(|&j| fm.cols[j].clone()).collect();
    Ok((report, model))
}

/// Labels permuted with a seeded shuffle, for permutation baselines.
pub fn permuted_labels(y: &[u8], seed: u64) -> Vec<u8> {
    let mut out = y.to_vec();
    out.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::Rng;

    fn groups_of(n: usize, k: usize) -> Vec<String> {
        (0..n).map(|i| format!("g{}", i % k)).collect()
    }

    fn separable(n: usize, seed: u64) -> (Vec<Vec<f64>>, Vec<u8>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let y: Vec<u8> = (0..n).map(|i| u8::from(i % 2 == 0)).collect();
        let x = y
            .iter()
            .map(|&l| {
                vec![
                    f64::from(l) * 4.0 + rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                    rng.random_range(-1.0..1.0),
                ]
            })
            .collect();
        (x, y)
    }

    #[test]
    fn separable_data_scores_high() {
        let (x, y) = separable(40, 1);
        let cfg = CvConfig { rfe_target: Some(2), ..CvConfig::default() };
        let r = stratified_kfold_cv(&x, &y, &groups_of(40, 2), &ClassifierGrid::compact(), &cfg).unwrap();
        assert!(r.mean_validation_f1 >= 0.95, "{}", r.mean_validation_f1);
        assert_eq!(r.folds.len(), 5);
        assert!(r.selected_features.contains(&0));
    }

    #[test]
    fn shuffled_labels_score_near_chance() {
        let mut total = 0.0;
        let trials = 6;
        for t in 0..trials {
            let (x, y) = separable(60, 10 + t);
            let y = permuted_labels(&y, t);
            let cfg = CvConfig { seed: t, rfe_target: None, ..CvConfig::default() };
            total += stratified_kfold_cv(&x, &y, &groups_of(60, 1), &ClassifierGrid::single_tree(), &cfg)
                .unwrap()
                .mean_validation_f1;
        }
        let mean = total / trials as f64;
        assert!((mean - 0.5).abs() <= 0.15, "{mean}");
    }

    #[test]
    fn report_is_deterministic_and_means_are_means() {
        let (x, y) = separable(30, 2);
        let cfg = CvConfig { seed: 7, rfe_target: Some(2), folds: 3 };
        let g = groups_of(30, 2);
        let a = stratified_kfold_cv(&x, &y, &g, &ClassifierGrid::decision_trees(), &cfg).unwrap();
        let b = stratified_kfold_cv(&x, &y, &g, &ClassifierGrid::decision_trees(), &cfg).unwrap();
        assert_eq!(a, b);
        let m = a.folds.iter().map(|f| f.validation_accuracy).sum::<f64>() / 3.0;
        assert!((m - a.mean_validation_accuracy).abs() <= 1e-12);
        assert_eq!(EvalReport::from_json(&a.to_json().unwrap()).unwrap(), a);
    }

    #[test]
    fn too_few_samples() {
        let err = stratified_folds(&[0, 1, 0], &groups_of(3, 1), 5, 0).unwrap_err();
        assert!(err.to_string().contains("3 samples"));
    }

    #[test]
    fn small_cells_fall_back_to_class() {
        let y = vec![0, 0, 0, 0, 1, 1, 1, 1];
        let g: Vec<String> = ["a", "a", "a", "b", "a", "a", "a", "b"].iter().map(|s| s.to_string()).collect();
        let f = assign_folds(&y, &g, 2, 0).unwrap();
        assert!(!f.joint);
        for fold in 0..2 {
            assert_eq!(f.assignment.iter().zip(&y).filter(|(&a, &l)| a == fold && l == 1).count(), 2);
        }
    }

    #[test]
    fn grids_have_paper_sizes() {
        assert_eq!(ClassifierGrid::decision_trees().specs.len(), 10);
        assert_eq!(ClassifierGrid::random_forests().specs.len(), 240);
        assert_eq!(ClassifierGrid::logistic().specs.len(), 8);
    }

    proptest! {
        #[test]
        fn folds_preserve_class_proportions(
            labels in proptest::collection::vec(0u8..2, 10..80),
            k in 2usize..6,
            n_groups in 1usize..4,
            seed in any::<u64>(),
        ) {
            let g = groups_of(labels.len(), n_groups);
            let a = stratified_folds(&labels, &g, k, seed).unwrap();
            prop_assert_eq!(&a, &stratified_folds(&labels, &g, k, seed).unwrap());
            for fold in 0..k {
                for class in 0..2u8 {
                    let total = labels.iter().filter(|&&l| l == class).count() as f64;
                    let here = a.iter().zip(&labels).filter(|(&f, &l)| f == fold && l == class).count() as f64;
                    prop_assert!((here - total / k as f64).abs() < 1.0);
                }
            }
        }
    }
}
