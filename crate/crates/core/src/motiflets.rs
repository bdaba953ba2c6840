//! k-Motiflet discovery.
//!
//! A k-Motiflet is a set of exactly `k` non-overlapping windows of length `l`
//! whose largest pairwise z-normalized distance (the *extent*) is minimal.
//! The approximate search pairs every window with its `k - 1` nearest
//! non-trivial neighbours and keeps the tightest set; the exact search
//! enumerates subsets and exists to check the approximation on small inputs.
//!
//! The extent function `EF(k)` drives the two model-selection steps: elbow
//! points of `EF` pick meaningful occurrence counts, and the normalised area
//! under `EF` picks the motif length.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{check_dataset, SubjectRecord};
use crate::error::{Error, Result};
use crate::series::{exclusion_zone, z_distance, SelfJoin, Series};
use crate::signal::BandSpec;

/// Default number of subsets the exact solver may enumerate.
pub const EXACT_BUDGET: u64 = 2_000_000;

/// Default largest occurrence count considered.
pub const DEFAULT_K_MAX: usize = 20;

/// Default slope-ratio threshold for elbow detection.
pub const DEFAULT_ELBOW_ALPHA: f64 = 2.0;

/// Differences of `EF` below this are treated as flat.
pub const ELBOW_NOISE_FLOOR: f64 = 1e-9;

/// `k` window starts of length `length` and their extent.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MotifletSet {
    /// Window starts, ascending.
    pub indices: Vec<usize>,
    pub length: usize,
    pub extent: f64,
}

impl MotifletSet {
    pub fn k(&self) -> usize {
        self.indices.len()
    }
}

/// Extent curve of one series at one length, with elbow points and the
/// motiflet found for each `k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ElbowAnalysis {
    /// `ef[i]` is `EF(i + 2)`, made non-decreasing by a running maximum.
    pub ef: Vec<f64>,
    pub elbows: Vec<usize>,
    pub k_max: usize,
    /// `candidates[i]` is the motiflet behind `ef[i]`.
    pub candidates: Vec<MotifletSet>,
}

impl ElbowAnalysis {
    pub fn candidate(&self, k: usize) -> Option<&MotifletSet> {
        k.checked_sub(2).and_then(|i| self.candidates.get(i))
    }
}

fn check_windows(t: &Series, l: usize) -> Result<()> {
    if l < 2 || l > t.len() {
        return Err(Error::invalid(format!(
            "motif length {l} must be in 2..={}",
            t.len()
        )));
    }
    Ok(())
}

/// Largest pairwise z-normalized distance among the windows at `indices`.
pub fn extent(t: &[f64], indices: &[usize], l: usize) -> Result<f64> {
    if indices.len() < 2 {
        return Err(Error::invalid("extent needs at least two windows"));
    }
    if let Some(&bad) = indices.iter().find(|&&i| l == 0 || i + l > t.len()) {
        return Err(Error::invalid(format!(
            "window {bad}..{} outside series of length {}",
            bad + l,
            t.len()
        )));
    }
    let mut ext: f64 = 0.0;
    for (a, &i) in indices.iter().enumerate() {
        for &j in &indices[a + 1..] {
            ext = ext.max(z_distance(&t[i..i + l], &t[j..j + l]));
        }
    }
    Ok(ext)
}

/// Best motiflet per `k = 2..=k_max` from the greedy nearest-neighbour
/// search. Entries are `None` where no `k` non-overlapping windows exist.
fn greedy_search(t: &Series, l: usize, k_max: usize) -> Result<Vec<Option<MotifletSet>>> {
    check_windows(t, l)?;
    if k_max < 2 {
        return Err(Error::invalid(format!("k_max {k_max} must be at least 2")));
    }
    let mask = t.window_mask(l);
    let ez = exclusion_zone(l);
    let mut join = SelfJoin::new(&t.values, l)?;
    let n_windows = join.n_windows();

    // best[k - 2] = (extent, members)
    let mut best: Vec<Option<(f64, Vec<usize>)>> = vec![None; k_max - 1];
    let mut row = Vec::with_capacity(n_windows);
    let mut cands: Vec<(f64, usize)> = Vec::with_capacity(n_windows);
    let mut picks: Vec<usize> = Vec::with_capacity(k_max);
    // each accepted pick rules out fewer than 2·ez others, so at most this
    // many nearest candidates are ever consumed
    let bound = (k_max - 1) * 2 * ez;
    let by_dist = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));

    while let Some(core) = join.next_row(&mut row) {
        if !mask[core] {
            continue;
        }
        cands.clear();
        cands.extend((0..n_windows).filter(|&j| mask[j] && j.abs_diff(core) >= ez).map(|j| (row[j], j)));

        // scan a short sorted prefix first and widen it only when it runs out
        let mut prefix = (4 * k_max).min(bound);
        loop {
            let full = prefix >= cands.len();
            if full {
                cands.sort_unstable_by(by_dist);
            } else {
                cands.select_nth_unstable_by(prefix, by_dist);
                cands[..prefix].sort_unstable_by(by_dist);
            }
            let end = if full { cands.len() } else { prefix };
            picks.clear();
            picks.push(core);
            for &(_, j) in &cands[..end] {
                if picks.len() == k_max {
                    break;
                }
                if picks.iter().all(|&p| p.abs_diff(j) >= ez) {
                    picks.push(j);
                }
            }
            if full || picks.len() == k_max || prefix >= bound {
                break;
            }
            prefix = (prefix * 4).min(bound);
        }
        if picks.len() < 2 {
            continue;
        }

        // the farthest neighbour's distance to the core bounds the extent
        let top = (2..=picks.len())
            .rev()
            .find(|&k| best[k - 2].as_ref().is_none_or(|(b, _)| row[picks[k - 1]] < *b));
        let Some(top) = top else { continue };

        let mut ext = 0.0f64;
        for k in 2..=top {
            let new = k - 1;
            for old in 0..new {
                ext = ext.max(join.pair_distance(picks[old], picks[new]));
            }
            // extents only grow with k
            if best[k - 2..top - 1].iter().all(|b| b.as_ref().is_some_and(|(b, _)| ext >= *b)) {
                break;
            }
            let slot = &mut best[k - 2];
            if slot.as_ref().is_none_or(|(b, _)| ext < *b) {
                *slot = Some((ext, picks[..k].to_vec()));
            }
        }
    }

    Ok(best
        .into_iter()
        .map(|b| {
            b.map(|(_, mut indices)| {
                indices.sort_unstable();
                // recompute on the raw series so the stored extent matches `extent`
                let extent = extent(&t.values, &indices, l).unwrap_or(f64::NAN);
                MotifletSet {
                    indices,
                    length: l,
                    extent,
                }
            })
        })
        .collect())
}

/// Approximate k-Motiflet of length `l`.
pub fn approx_k_motiflet(t: &Series, l: usize, k: usize) -> Result<MotifletSet> {
    if k < 2 {
        return Err(Error::invalid(format!("k = {k} must be at least 2")));
    }
    greedy_search(t, l, k)?
        .pop()
        .flatten()
        .ok_or_else(|| Error::invalid(format!("series too short for {k} windows of length {l}")))
}

fn binomial(n: u64, k: u64) -> u64 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        acc = acc * (n - i) as u128 / (i + 1) as u128;
        if acc > u64::MAX as u128 {
            return u64::MAX;
        }
    }
    acc as u64
}

/// Exact k-Motiflet by exhaustive enumeration, limited to [`EXACT_BUDGET`]
/// subsets.
pub fn exact_k_motiflet(t: &Series, l: usize, k: usize) -> Result<MotifletSet> {
    exact_k_motiflet_with_budget(t, l, k, EXACT_BUDGET)
}

pub fn exact_k_motiflet_with_budget(t: &Series, l: usize, k: usize, budget: u64) -> Result<MotifletSet> {
    check_windows(t, l)?;
    if k < 2 {
        return Err(Error::invalid(format!("k = {k} must be at least 2")));
    }
    let mask = t.window_mask(l);
    let windows: Vec<usize> = (0..mask.len()).filter(|&i| mask[i]).collect();
    let subsets = binomial(windows.len() as u64, k as u64);
    if subsets > budget {
        return Err(Error::ResourceLimit(format!(
            "{subsets} candidate subsets exceed the budget of {budget}"
        )));
    }
    let nw = windows.len();
    let mut dist = vec![0.0; nw * nw];
    for a in 0..nw {
        for b in a + 1..nw {
            let (i, j) = (windows[a], windows[b]);
            let d = z_distance(&t.values[i..i + l], &t.values[j..j + l]);
            dist[a * nw + b] = d;
            dist[b * nw + a] = d;
        }
    }

    struct Dfs<'a> {
        windows: &'a [usize],
        dist: &'a [f64],
        ez: usize,
        k: usize,
        stack: Vec<usize>,
        best: f64,
        best_set: Option<Vec<usize>>,
    }

    impl Dfs<'_> {
        fn go(&mut self, from: usize, ext: f64) {
            if self.stack.len() == self.k {
                if ext < self.best {
                    self.best = ext;
                    self.best_set = Some(self.stack.clone());
                }
                return;
            }
            let nw = self.windows.len();
            for c in from..nw {
                if self
                    .stack
                    .iter()
                    .any(|&s| self.windows[s].abs_diff(self.windows[c]) < self.ez)
                {
                    continue;
                }
                let grown = self
                    .stack
                    .iter()
                    .map(|&s| self.dist[s * nw + c])
                    .fold(ext, f64::max);
                if grown >= self.best {
                    continue;
                }
                self.stack.push(c);
                self.go(c + 1, grown);
                self.stack.pop();
            }
        }
    }

    let mut dfs = Dfs {
        windows: &windows,
        dist: &dist,
        ez: exclusion_zone(l),
        k,
        stack: Vec::with_capacity(k),
        best: f64::INFINITY,
        best_set: None,
    };
    dfs.go(0, 0.0);
    let set = dfs
        .best_set
        .ok_or_else(|| Error::invalid(format!("series too short for {k} windows of length {l}")))?;
    let indices: Vec<usize> = set.iter().map(|&s| windows[s]).collect();
    Ok(MotifletSet {
        extent: extent(&t.values, &indices, l)?,
        indices,
        length: l,
    })
}

/// `EF(k)` for `k = 2..=k_max` with the motiflet found for each `k`.
///
/// The returned analysis has no elbows filled in; see [`find_elbows`].
pub fn extent_function(t: &Series, l: usize, k_max: usize) -> Result<ElbowAnalysis> {
    let sets = greedy_search(t, l, k_max)?;
    let mut ef = Vec::with_capacity(sets.len());
    let mut candidates = Vec::with_capacity(sets.len());
    let mut running = 0.0f64;
    for (i, set) in sets.into_iter().enumerate() {
        let set = set.ok_or_else(|| {
            Error::invalid(format!(
                "series too short for {} windows of length {l}",
                i + 2
            ))
        })?;
        running = running.max(set.extent);
        ef.push(running);
        candidates.push(set);
    }
    Ok(ElbowAnalysis {
        ef,
        elbows: Vec::new(),
        k_max,
        candidates,
    })
}

/// Occurrence counts `k` after which the extent curve steepens sharply.
///
/// `ef[i]` holds `EF(i + 2)`. `k` is an elbow when
/// `EF(k+1) - EF(k) > alpha · (EF(k) - EF(k-1))` and both differences are at
/// least [`ELBOW_NOISE_FLOOR`].
pub fn find_elbows(ef: &[f64], alpha: f64) -> Result<Vec<usize>> {
    if ef.len() < 3 {
        return Err(Error::invalid(format!(
            "elbow detection needs at least 3 extents, got {}",
            ef.len()
        )));
    }
    Ok((1..ef.len() - 1)
        .filter(|&i| {
            let before = ef[i] - ef[i - 1];
            let after = ef[i + 1] - ef[i];
            before >= ELBOW_NOISE_FLOOR && after >= ELBOW_NOISE_FLOOR && after > alpha * before
        })
        .map(|i| i + 2)
        .collect())
}

/// Area under `EF / max(EF)` over `k = 2..=k_max` by the trapezoid rule,
/// divided by `k_max - 2`. An all-zero curve scores 0.
pub fn au_ef(ef: &[f64]) -> Result<f64> {
    if ef.len() < 2 {
        return Err(Error::invalid("AU_EF needs at least two extents"));
    }
    let max = ef.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max <= 0.0 {
        return Ok(0.0);
    }
    let area: f64 = ef.windows(2).map(|w| (w[0] + w[1]) / (2.0 * max)).sum();
    Ok(area / (ef.len() - 1) as f64)
}

/// Length chosen by AU_EF together with its extent analysis.
#[derive(Clone, Debug)]
pub struct LengthChoice {
    pub length: usize,
    pub score: f64,
    pub analysis: ElbowAnalysis,
}

/// Evaluates every candidate length and returns the one with the lowest
/// AU_EF (smallest length on ties). Lengths the series cannot support are
/// skipped.
pub fn choose_motif_length(t: &Series, lengths: &[usize], k_max: usize) -> Result<LengthChoice> {
    let mut sorted = lengths.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    if sorted.is_empty() {
        return Err(Error::invalid("no candidate motif lengths"));
    }
    let scored: Vec<Option<(f64, ElbowAnalysis)>> = sorted
        .par_iter()
        .map(|&l| {
            let analysis = extent_function(t, l, k_max).ok()?;
            let score = au_ef(&analysis.ef).ok()?;
            Some((score, analysis))
        })
        .collect();
    let mut best: Option<LengthChoice> = None;
    for (&l, s) in sorted.iter().zip(scored) {
        let Some((score, analysis)) = s else { continue };
        if best.as_ref().is_none_or(|b| score < b.score) {
            best = Some(LengthChoice {
                length: l,
                score,
                analysis,
            });
        }
    }
    best.ok_or_else(|| Error::invalid(format!("no candidate length in {sorted:?} fits the series")))
}

/// Length in `lengths` minimising AU_EF.
pub fn find_best_motif_length(t: &Series, lengths: &[usize], k_max: usize) -> Result<usize> {
    choose_motif_length(t, lengths, k_max).map(|c| c.length)
}

/// Geometric grid of `count` window lengths from `min_s` to `max_s` seconds
/// at `rate` Hz, rounded to samples, at least 2 samples, duplicates removed.
pub fn length_grid(min_s: f64, max_s: f64, count: usize, rate: f64) -> Vec<usize> {
    let mut out: Vec<usize> = if count <= 1 {
        vec![(min_s * rate).round() as usize]
    } else {
        let ratio = (max_s / min_s).powf(1.0 / (count - 1) as f64);
        (0..count)
            .map(|i| (min_s * ratio.powi(i as i32) * rate).round() as usize)
            .collect()
    };
    out.iter_mut().for_each(|l| *l = (*l).max(2));
    out.sort_unstable();
    out.dedup();
    out
}

/// A discovered motif with its provenance.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Motif {
    pub id: String,
    pub subject: String,
    pub channel: String,
    pub band: String,
    pub start: usize,
    pub length_samples: usize,
    pub k: usize,
    pub values: Vec<f64>,
}

/// Discovery settings shared by every series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscoveryConfig {
    pub k_max: usize,
    pub elbow_alpha: f64,
}

impl Default for DiscoveryConfig {
    fn default() -> Self {
        DiscoveryConfig {
            k_max: DEFAULT_K_MAX,
            elbow_alpha: DEFAULT_ELBOW_ALPHA,
        }
    }
}

/// Full discovery result for one series.
#[derive(Clone, Debug)]
pub struct SeriesDiscovery {
    pub length: usize,
    pub analysis: ElbowAnalysis,
}

/// Chooses the length, computes the extent curve and its elbows.
pub fn discover_series(t: &Series, lengths: &[usize], cfg: &DiscoveryConfig) -> Result<SeriesDiscovery> {
    let choice = choose_motif_length(t, lengths, cfg.k_max)?;
    let mut analysis = choice.analysis;
    analysis.elbows = if analysis.ef.len() >= 3 {
        find_elbows(&analysis.ef, cfg.elbow_alpha)?
    } else {
        Vec::new()
    };
    Ok(SeriesDiscovery {
        length: choice.length,
        analysis,
    })
}

/// Identifier of the motif found in `subject`/`channel` at occurrence count `k`.
pub fn motif_id(band: &str, channel: &str, subject: &str, k: usize) -> String {
    format!("{band}/{channel}/{subject}/k{k:02}")
}

/// Extracts one motif per elbow of every (channel, subject) series.
///
/// The dataset must already be reduced to `band`. Output is ordered by
/// channel position, subject position, length and `k`.
pub fn extract_motifs(
    dataset: &[SubjectRecord],
    band: &BandSpec,
    lengths: &[usize],
    cfg: &DiscoveryConfig,
) -> Result<Vec<Motif>> {
    check_dataset(dataset)?;
    let min_len = *lengths
        .iter()
        .min()
        .ok_or_else(|| Error::invalid("no candidate motif lengths"))?;
    let channels = &dataset[0].recording.channels;
    let jobs: Vec<(usize, usize)> = (0..channels.len())
        .flat_map(|c| (0..dataset.len()).map(move |s| (c, s)))
        .collect();

    let found: Vec<Option<Vec<Motif>>> = jobs
        .par_iter()
        .map(|&(c, s)| {
            let subject = &dataset[s];
            let series = subject.recording.series(c);
            if series.len() < min_len {
                warn!(
                    "skipping {}/{}: {} samples is shorter than the smallest length {min_len}",
                    subject.id,
                    channels[c],
                    series.len()
                );
                return None;
            }
            let found = match discover_series(&series, lengths, cfg) {
                Ok(f) => f,
                Err(e) => {
                    warn!("skipping {}/{}: {e}", subject.id, channels[c]);
                    return None;
                }
            };
            let l = found.length;
            let motifs = found
                .analysis
                .elbows
                .iter()
                .filter_map(|&k| found.analysis.candidate(k))
                .map(|set| {
                    let start = set.indices[0];
                    Motif {
                        id: motif_id(&band.name, &channels[c], &subject.id, set.k()),
                        subject: subject.id.clone(),
                        channel: channels[c].clone(),
                        band: band.name.clone(),
                        start,
                        length_samples: l,
                        k: set.k(),
                        values: series.values[start..start + l].to_vec(),
                    }
                })
                .collect();
            Some(motifs)
        })
        .collect();

    if found.iter().all(Option::is_none) {
        return Err(Error::invalid("every series was skipped during motif discovery"));
    }
    // jobs are already in (channel, subject) order and each series has one
    // length, with elbows ascending in k
    Ok(found.into_iter().flatten().flatten().collect())
}
