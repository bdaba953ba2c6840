//! Locating the occurrences of a motif inside a series.
//!
//! A window matches when its distance to the motif is at most
//! `f(D) = max(mean(D) - 2·std(D), min(D))`, where `D` is the distance
//! profile. The closest window therefore always matches. Matches are picked
//! closest first with a trivial-match exclusion zone of `m / 2`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::{distance_profile, exclusion_zone, Series};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Match {
    pub start: usize,
    pub distance: f64,
}

/// Matches sorted by ascending distance, with the threshold that admitted them.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchSet {
    pub entries: Vec<Match>,
    pub threshold: f64,
}

impl MatchSet {
    pub fn closest(&self) -> &Match {
        &self.entries[0]
    }

    pub fn mean_distance(&self) -> f64 {
        self.entries.iter().map(|m| m.distance).sum::<f64>() / self.entries.len() as f64
    }
}

/// `max(mean(D) - 2·std(D), min(D))` over the finite entries of `d`,
/// with the population standard deviation. `None` if nothing is finite.
pub fn match_threshold(d: &[f64]) -> Option<f64> {
    let finite: Vec<f64> = d.iter().copied().filter(|v| v.is_finite()).collect();
    if finite.is_empty() {
        return None;
    }
    let n = finite.len() as f64;
    let mean = finite.iter().sum::<f64>() / n;
    let var = finite.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let min = finite.iter().copied().fold(f64::INFINITY, f64::min);
    Some((mean - 2.0 * var.sqrt()).max(min))
}

/// Greedy closest-first selection of positions with `d ≤ threshold`,
/// skipping anything within `exclusion` of an accepted position. Lower index
/// wins ties.
pub fn select_matches(d: &[f64], threshold: f64, exclusion: usize) -> Vec<Match> {
    let mut cands: Vec<usize> = (0..d.len()).filter(|&i| d[i] <= threshold).collect();
    cands.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
    let mut out: Vec<Match> = Vec::new();
    for i in cands {
        if out.iter().all(|m| m.start.abs_diff(i) >= exclusion) {
            out.push(Match {
                start: i,
                distance: d[i],
            });
        }
    }
    out
}

/// Distance profile with windows that straddle a segment break set to +∞.
pub fn masked_profile(q: &[f64], t: &Series) -> Result<Vec<f64>> {
    let mut d = distance_profile(q, &t.values)?.distances;
    if !t.breaks.is_empty() {
        for (v, ok) in d.iter_mut().zip(t.window_mask(q.len())) {
            if !ok {
                *v = f64::INFINITY;
            }
        }
    }
    Ok(d)
}

/// All threshold-qualifying, non-overlapping occurrences of `q` in `t`.
pub fn find_matches(q: &[f64], t: &Series) -> Result<MatchSet> {
    let d = masked_profile(q, t)?;
    let threshold = match_threshold(&d)
        .ok_or_else(|| Error::invalid("every window of the series crosses a segment break"))?;
    let entries = select_matches(&d, threshold, exclusion_zone(q.len()));
    Ok(MatchSet { entries, threshold })
}

/// Mean distance of the matches of `q` in `t`.
pub fn mean_match_distance(q: &[f64], t: &Series) -> Result<f64> {
    find_matches(q, t).map(|m| m.mean_distance())
}
