//! Ranking motifs by how well they separate the two classes.
//!
//! The difference score of a motif matches it against the same channel of
//! every subject, averages the lowest `percentage` of per-subject mean match
//! distances within each class and takes the absolute gap between the two
//! class averages.

use std::collections::BTreeMap;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SubjectRecord;
use crate::error::{Error, Result};
use crate::matching::mean_match_distance;
use crate::motiflets::Motif;

/// Default share of best-matching subjects averaged per class.
pub const DEFAULT_PERCENTAGE: f64 = 0.5;

/// Default number of motifs kept per (class, group) cell.
pub const DEFAULT_N_PER_CELL: usize = 20;

/// A motif with its difference score and the class and group of the
/// subject it came from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ScoredMotif {
    #[serde(flatten)]
    pub motif: Motif,
    pub difference_score: f64,
    pub source_class: u8,
    pub source_group: String,
}

impl ScoredMotif {
    pub fn id(&self) -> &str {
        &self.motif.id
    }
}

/// Per-class lists of each subject's mean match distance to `q`, in dataset
/// order.
pub fn class_match_distances(q: &Motif, dataset: &[SubjectRecord]) -> Result<[Vec<f64>; 2]> {
    let mut out: [Vec<f64>; 2] = [Vec::new(), Vec::new()];
    for s in dataset {
        let series = s.channel_series(&q.channel)?;
        let d = mean_match_distance(&q.values, &series)
            .map_err(|e| Error::invalid(format!("motif {} on subject {}: {e}", q.id, s.id)))?;
        let label = usize::from(s.label);
        if label > 1 {
            return Err(Error::invalid(format!("subject {}: label {} is not 0/1", s.id, s.label)));
        }
        out[label].push(d);
    }
    Ok(out)
}

/// Mean of the lowest `ceil(percentage · n)` values (at least one).
pub fn mean_of_lowest(values: &[f64], percentage: f64) -> Result<f64> {
    if values.is_empty() {
        return Err(Error::invalid("no values to average"));
    }
    check_percentage(percentage)?;
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let take = ((percentage * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    Ok(sorted[..take].iter().sum::<f64>() / take as f64)
}

fn check_percentage(p: f64) -> Result<()> {
    if !(p > 0.0 && p <= 1.0) {
        return Err(Error::invalid(format!("percentage {p} must be in (0, 1]")));
    }
    Ok(())
}

/// Absolute gap between the class averages of the best-matching subjects.
pub fn difference_score(q: &Motif, dataset: &[SubjectRecord], percentage: f64) -> Result<f64> {
    check_percentage(percentage)?;
    let [zero, one] = class_match_distances(q, dataset)?;
    if zero.is_empty() || one.is_empty() {
        return Err(Error::invalid(format!(
            "difference score needs both classes; got {} / {} subjects",
            zero.len(),
            one.len()
        )));
    }
    Ok((mean_of_lowest(&zero, percentage)? - mean_of_lowest(&one, percentage)?).abs())
}

/// Scores every motif against the dataset. Output is in motif-id order.
pub fn score_motifs(motifs: &[Motif], dataset: &[SubjectRecord], percentage: f64) -> Result<Vec<ScoredMotif>> {
    let mut scored: Vec<ScoredMotif> = motifs
        .par_iter()
        .map(|m| {
            let origin = dataset.iter().find(|s| s.id == m.subject).ok_or_else(|| {
                Error::invalid(format!("motif {} comes from unknown subject {}", m.id, m.subject))
            })?;
            Ok(ScoredMotif {
                difference_score: difference_score(m, dataset, percentage)?,
                source_class: origin.label,
                source_group: origin.group_name().to_string(),
                motif: m.clone(),
            })
        })
        .collect::<Result<_>>()?;
    scored.sort_by(|a, b| a.motif.id.cmp(&b.motif.id));
    Ok(scored)
}

/// Keeps the `n_per_cell` best motifs of every (class, group) cell, ties
/// broken by motif id. The result is in motif-id order.
pub fn select_balanced(scored: &[ScoredMotif], n_per_cell: usize) -> Vec<ScoredMotif> {
    let mut cells: BTreeMap<(u8, &str), Vec<&ScoredMotif>> = BTreeMap::new();
    for s in scored {
        cells.entry((s.source_class, &s.source_group)).or_default().push(s);
    }
    let mut kept = Vec::new();
    for ((class, group), mut members) in cells {
        if members.len() < n_per_cell {
            warn!(
                "cell class={class} group={group} has {} motifs, fewer than {n_per_cell}",
                members.len()
            );
        }
        members.sort_by(|a, b| {
            b.difference_score
                .total_cmp(&a.difference_score)
                .then_with(|| a.motif.id.cmp(&b.motif.id))
        });
        kept.extend(members.into_iter().take(n_per_cell).cloned());
    }
    kept.sort_by(|a, b| a.motif.id.cmp(&b.motif.id));
    kept
}
