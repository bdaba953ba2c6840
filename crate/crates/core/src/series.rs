//! Similarity primitives on univariate series.
//!
//! Everything here works on z-normalized subsequences: two windows are
//! compared after each has been shifted to zero mean and scaled to unit
//! population standard deviation. Dot products between a query and every
//! window of a series are computed with an FFT convolution for long queries
//! and a direct loop for short ones, then turned into distances with the
//! usual correlation identity
//!
//! ```text
//! d(Q, T_i) = sqrt(2m (1 - (Q·T_i - m μ_Q μ_i) / (m σ_Q σ_i)))
//! ```
//!
//! Windows whose standard deviation is below [`DEGENERATE_STD`] are flat. A
//! flat window is at distance `sqrt(2m)` from any non-flat window and at
//! distance 0 from another flat window.

use std::sync::Arc;

use rayon::prelude::*;
use rustfft::num_complex::Complex;
use rustfft::{Fft, FftPlanner};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Standard deviation below which a window is treated as constant.
pub const DEGENERATE_STD: f64 = 1e-8;

/// Query length from which sliding dot products go through the FFT.
pub const FFT_MIN_QUERY: usize = 32;

/// Correlations closer to 1 than this are recomputed directly, because the
/// square root amplifies cancellation error near zero distance.
const REFINE_CORR_GAP: f64 = 1e-6;

/// A univariate series with optional provenance and segment breaks.
///
/// `breaks` holds the sample indices at which a new continuous segment
/// starts (for example after artifact rejection removed the data in
/// between). Windows that straddle a break are never compared.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Series {
    pub values: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub breaks: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub band: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<String>,
}

impl Series {
    pub fn new(values: Vec<f64>) -> Self {
        Series {
            values,
            ..Default::default()
        }
    }

    pub fn with_breaks(mut self, breaks: Vec<usize>) -> Self {
        self.breaks = breaks;
        self
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// `mask[i]` is true when window `[i, i + m)` lies inside one segment.
    pub fn window_mask(&self, m: usize) -> Vec<bool> {
        window_mask(self.values.len(), &self.breaks, m)
    }
}

impl From<Vec<f64>> for Series {
    fn from(values: Vec<f64>) -> Self {
        Series::new(values)
    }
}

/// Validity mask of the length-`m` windows of an `n`-sample series with the
/// given segment breaks.
pub fn window_mask(n: usize, breaks: &[usize], m: usize) -> Vec<bool> {
    if m == 0 || m > n {
        return Vec::new();
    }
    let mut mask = vec![true; n - m + 1];
    for &b in breaks {
        // window i crosses b when i < b < i + m
        let lo = b.saturating_sub(m - 1);
        let hi = b.min(n - m + 1);
        for slot in mask.iter_mut().take(hi).skip(lo) {
            *slot = false;
        }
    }
    mask
}

/// Half-width of the trivial-match exclusion zone for windows of length `m`.
///
/// Two windows `i`, `j` overlap trivially when `|i - j| < exclusion_zone(m)`.
pub fn exclusion_zone(m: usize) -> usize {
    (m / 2).max(1)
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

fn mean_std(x: &[f64]) -> (f64, f64) {
    let mu = mean(x);
    let var = x.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / x.len() as f64;
    (mu, var.sqrt())
}

/// Scales `x` to zero mean and unit population standard deviation.
///
/// Inputs with standard deviation below [`DEGENERATE_STD`] map to zeros.
pub fn z_normalize(x: &[f64]) -> Vec<f64> {
    if x.is_empty() {
        return Vec::new();
    }
    let (mu, sd) = mean_std(x);
    if sd < DEGENERATE_STD {
        return vec![0.0; x.len()];
    }
    x.iter().map(|v| (v - mu) / sd).collect()
}

/// Per-window mean and population standard deviation.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowStats {
    pub m: usize,
    pub means: Vec<f64>,
    pub stds: Vec<f64>,
}

impl WindowStats {
    pub fn len(&self) -> usize {
        self.means.len()
    }

    pub fn is_empty(&self) -> bool {
        self.means.is_empty()
    }

    pub fn is_flat(&self, i: usize) -> bool {
        self.stds[i] < DEGENERATE_STD
    }
}

/// Mean and population standard deviation of every length-`m` window,
/// using cumulative sums over the mean-centred series.
pub fn sliding_mean_std(t: &[f64], m: usize) -> Result<WindowStats> {
    let n = t.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!(
            "window length {m} not in 1..={n}"
        )));
    }
    let shift = mean(t);
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    for (i, &v) in t.iter().enumerate() {
        let c = v - shift;
        s1[i + 1] = s1[i] + c;
        s2[i + 1] = s2[i] + c * c;
    }
    let mf = m as f64;
    let mut means = Vec::with_capacity(n - m + 1);
    let mut stds = Vec::with_capacity(n - m + 1);
    for i in 0..=n - m {
        let mu_c = (s1[i + m] - s1[i]) / mf;
        let sq = (s2[i + m] - s2[i]) / mf;
        let var = sq - mu_c * mu_c;
        // cancellation makes tiny variances unreliable; redo those directly
        if var <= 1e-7 * sq.max(f64::MIN_POSITIVE) {
            let (mu, sd) = mean_std(&t[i..i + m]);
            means.push(mu);
            stds.push(sd);
        } else {
            means.push(mu_c + shift);
            stds.push(var.sqrt());
        }
    }
    Ok(WindowStats { m, means, stds })
}

/// Distance between two windows given their dot product and statistics.
#[inline]
pub(crate) fn distance_from_dot(dot: f64, m: usize, mu_a: f64, sd_a: f64, mu_b: f64, sd_b: f64) -> f64 {
    let flat_a = sd_a < DEGENERATE_STD;
    let flat_b = sd_b < DEGENERATE_STD;
    let mf = m as f64;
    match (flat_a, flat_b) {
        (true, true) => 0.0,
        (true, false) | (false, true) => (2.0 * mf).sqrt(),
        (false, false) => {
            let corr = ((dot - mf * mu_a * mu_b) / (mf * sd_a * sd_b)).clamp(-1.0, 1.0);
            (2.0 * mf * (1.0 - corr)).max(0.0).sqrt()
        }
    }
}

/// z-normalized Euclidean distance between two equal-length windows,
/// computed directly from their z-normalized values.
pub fn z_distance(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let (mu_a, sd_a) = mean_std(a);
    let (mu_b, sd_b) = mean_std(b);
    let flat_a = sd_a < DEGENERATE_STD;
    let flat_b = sd_b < DEGENERATE_STD;
    match (flat_a, flat_b) {
        (true, true) => 0.0,
        (true, false) | (false, true) => (2.0 * a.len() as f64).sqrt(),
        (false, false) => a
            .iter()
            .zip(b)
            .map(|(x, y)| {
                let d = (x - mu_a) / sd_a - (y - mu_b) / sd_b;
                d * d
            })
            .sum::<f64>()
            .sqrt(),
    }
}

/// Sliding dot products of `q` against every window of `t` by direct loop.
pub fn sliding_dot_direct(q: &[f64], t: &[f64]) -> Vec<f64> {
    let m = q.len();
    (0..=t.len() - m)
        .map(|i| q.iter().zip(&t[i..i + m]).map(|(a, b)| a * b).sum())
        .collect()
}

/// Sliding dot products of `q` against every window of `t` via FFT.
pub fn sliding_dot_fft(q: &[f64], t: &[f64]) -> Vec<f64> {
    let n = t.len();
    let m = q.len();
    let size = (n + m).next_power_of_two();
    let mut planner = FftPlanner::new();
    let fwd = planner.plan_fft_forward(size);
    let inv = planner.plan_fft_inverse(size);
    let mut tf = to_complex(t, size);
    fwd.process(&mut tf);
    convolve_reversed(q, &tf, &fwd, &inv, n)
}

fn to_complex(x: &[f64], size: usize) -> Vec<Complex<f64>> {
    let mut out = vec![Complex::new(0.0, 0.0); size];
    for (o, &v) in out.iter_mut().zip(x) {
        o.re = v;
    }
    out
}

/// Correlates `q` with the series whose spectrum is `tf` (length-`n` series).
fn convolve_reversed(
    q: &[f64],
    tf: &[Complex<f64>],
    fwd: &Arc<dyn Fft<f64>>,
    inv: &Arc<dyn Fft<f64>>,
    n: usize,
) -> Vec<f64> {
    let m = q.len();
    let size = tf.len();
    let mut qf = vec![Complex::new(0.0, 0.0); size];
    for (o, &v) in qf.iter_mut().zip(q.iter().rev()) {
        o.re = v;
    }
    fwd.process(&mut qf);
    for (a, b) in qf.iter_mut().zip(tf) {
        *a *= b;
    }
    inv.process(&mut qf);
    let scale = 1.0 / size as f64;
    (0..=n - m).map(|i| qf[m - 1 + i].re * scale).collect()
}

/// Sliding dot products, switching to the FFT path for `m ≥ FFT_MIN_QUERY`.
pub fn sliding_dot(q: &[f64], t: &[f64]) -> Vec<f64> {
    if q.len() >= FFT_MIN_QUERY {
        sliding_dot_fft(q, t)
    } else {
        sliding_dot_direct(q, t)
    }
}

/// z-normalized Euclidean distances of a query to every window of a series.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistanceProfile {
    pub distances: Vec<f64>,
    pub query_length: usize,
}

impl DistanceProfile {
    pub fn len(&self) -> usize {
        self.distances.len()
    }

    pub fn is_empty(&self) -> bool {
        self.distances.is_empty()
    }
}

/// Distance profile of `q` against `t`.
pub fn distance_profile(q: &[f64], t: &[f64]) -> Result<DistanceProfile> {
    let m = q.len();
    if m == 0 || m > t.len() {
        return Err(Error::invalid(format!(
            "query length {m} must be in 1..={}",
            t.len()
        )));
    }
    // distances are offset invariant; centring keeps the dot products small
    let shift = mean(t);
    let tc: Vec<f64> = t.iter().map(|v| v - shift).collect();
    let q_shift = mean(q);
    let qc: Vec<f64> = q.iter().map(|v| v - q_shift).collect();
    let stats = sliding_mean_std(&tc, m)?;
    let (mu_q, sd_q) = mean_std(&qc);
    let dots = sliding_dot(&qc, &tc);
    let distances = dots
        .iter()
        .enumerate()
        .map(|(i, &dot)| {
            profile_entry(dot, &qc, mu_q, sd_q, &tc[i..i + m], stats.means[i], stats.stds[i])
        })
        .collect();
    Ok(DistanceProfile {
        distances,
        query_length: m,
    })
}

#[inline]
fn profile_entry(dot: f64, q: &[f64], mu_q: f64, sd_q: f64, w: &[f64], mu_w: f64, sd_w: f64) -> f64 {
    let m = q.len();
    if sd_q >= DEGENERATE_STD && sd_w >= DEGENERATE_STD {
        let mf = m as f64;
        let corr = (dot - mf * mu_q * mu_w) / (mf * sd_q * sd_w);
        if corr > 1.0 - REFINE_CORR_GAP {
            return z_distance(q, w);
        }
    }
    distance_from_dot(dot, m, mu_q, sd_q, mu_w, sd_w)
}

/// Symmetric matrix of z-normalized distances between all windows of a
/// series, with the trivial-match zone marked.
#[derive(Clone, Debug, PartialEq)]
pub struct PairwiseMatrix {
    pub m: usize,
    pub n_windows: usize,
    pub exclusion: usize,
    data: Vec<f64>,
}

impl PairwiseMatrix {
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.n_windows + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.n_windows..(i + 1) * self.n_windows]
    }

    /// True when `i` and `j` are trivial matches of each other.
    pub fn is_excluded(&self, i: usize, j: usize) -> bool {
        i.abs_diff(j) < self.exclusion
    }

    /// Smallest distance between two non-trivially-matching windows,
    /// lowest `(i, j)` first on ties.
    pub fn min_off_diagonal(&self) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        for i in 0..self.n_windows {
            for j in i + self.exclusion..self.n_windows {
                let d = self.get(i, j);
                if best.is_none_or(|(_, _, b)| d < b) {
                    best = Some((i, j, d));
                }
            }
        }
        best
    }
}

/// Full pairwise distance matrix for windows of length `m`.
///
/// Rows are computed in parallel; each entry depends only on its row, so the
/// output does not depend on scheduling.
pub fn pairwise_distance_matrix(t: &[f64], m: usize) -> Result<PairwiseMatrix> {
    let n = t.len();
    if m == 0 || m > n {
        return Err(Error::invalid(format!("window length {m} not in 1..={n}")));
    }
    let n_windows = n - m + 1;
    let rows: Vec<Vec<f64>> = (0..n_windows)
        .into_par_iter()
        .map(|i| distance_profile(&t[i..i + m], t).map(|p| p.distances))
        .collect::<Result<_>>()?;
    let mut data = vec![0.0; n_windows * n_windows];
    for i in 0..n_windows {
        for j in i + 1..n_windows {
            let d = rows[i][j];
            data[i * n_windows + j] = d;
            data[j * n_windows + i] = d;
        }
    }
    Ok(PairwiseMatrix {
        m,
        n_windows,
        exclusion: exclusion_zone(m),
        data,
    })
}

/// Streams the distance-profile rows of every window of one series against
/// the whole series.
///
/// Consecutive rows are derived from each other with the O(n) sliding
/// update `QT[i][j] = QT[i-1][j-1] - t[i-1]t[j-1] + t[i+m-1]t[j+m-1]`, and
/// re-anchored from an FFT product every [`SelfJoin::REANCHOR`] rows so
/// rounding error does not accumulate.
pub struct SelfJoin {
    centred: Vec<f64>,
    stats: WindowStats,
    spectrum: Vec<Complex<f64>>,
    fwd: Arc<dyn Fft<f64>>,
    inv: Arc<dyn Fft<f64>>,
    first_row: Vec<f64>,
    qt: Vec<f64>,
    next: usize,
}

impl SelfJoin {
    pub const REANCHOR: usize = 64;

    pub fn new(t: &[f64], m: usize) -> Result<Self> {
        let n = t.len();
        if m == 0 || m > n {
            return Err(Error::invalid(format!("window length {m} not in 1..={n}")));
        }
        let shift = mean(t);
        let centred: Vec<f64> = t.iter().map(|v| v - shift).collect();
        let stats = sliding_mean_std(&centred, m)?;
        let size = (n + m).next_power_of_two();
        let mut planner = FftPlanner::new();
        let fwd = planner.plan_fft_forward(size);
        let inv = planner.plan_fft_inverse(size);
        let mut spectrum = to_complex(&centred, size);
        fwd.process(&mut spectrum);
        let first_row = convolve_reversed(&centred[..m], &spectrum, &fwd, &inv, n);
        Ok(SelfJoin {
            centred,
            stats,
            spectrum,
            fwd,
            inv,
            first_row,
            qt: Vec::new(),
            next: 0,
        })
    }

    pub fn n_windows(&self) -> usize {
        self.stats.len()
    }

    pub fn window_len(&self) -> usize {
        self.stats.m
    }

    pub fn stats(&self) -> &WindowStats {
        &self.stats
    }

    /// Direct distance between windows `i` and `j`.
    pub fn pair_distance(&self, i: usize, j: usize) -> f64 {
        let m = self.stats.m;
        z_distance(&self.centred[i..i + m], &self.centred[j..j + m])
    }

    /// Writes the distance row of the next window into `out` and returns its
    /// index, or `None` once every row has been produced.
    pub fn next_row(&mut self, out: &mut Vec<f64>) -> Option<usize> {
        let i = self.next;
        let nw = self.n_windows();
        if i >= nw {
            return None;
        }
        let m = self.stats.m;
        let t = &self.centred;
        if i == 0 {
            self.qt = self.first_row.clone();
        } else if i % Self::REANCHOR == 0 {
            self.qt = convolve_reversed(&t[i..i + m], &self.spectrum, &self.fwd, &self.inv, t.len());
        } else {
            for j in (1..nw).rev() {
                self.qt[j] = self.qt[j - 1] - t[i - 1] * t[j - 1] + t[i + m - 1] * t[j + m - 1];
            }
            self.qt[0] = self.first_row[i];
        }
        let mu_i = self.stats.means[i];
        let sd_i = self.stats.stds[i];
        let q = &t[i..i + m];
        out.clear();
        out.extend(self.qt.iter().enumerate().map(|(j, &dot)| {
            profile_entry(dot, q, mu_i, sd_i, &t[j..j + m], self.stats.means[j], self.stats.stds[j])
        }));
        out[i] = 0.0;
        self.next += 1;
        Some(i)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_series(rng: &mut ChaCha8Rng, n: usize) -> Vec<f64> {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    }

    /// Brute force: z-normalize both windows and take the Euclidean norm,
    /// applying the flat-window convention explicitly.
    fn naive_distance(a: &[f64], b: &[f64]) -> f64 {
        let (_, sa) = mean_std(a);
        let (_, sb) = mean_std(b);
        match (sa < DEGENERATE_STD, sb < DEGENERATE_STD) {
            (true, true) => 0.0,
            (true, false) | (false, true) => (2.0 * a.len() as f64).sqrt(),
            _ => {
                let za = z_normalize(a);
                let zb = z_normalize(b);
                za.iter().zip(&zb).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt()
            }
        }
    }

    #[test]
    fn z_normalize_examples() {
        let z = z_normalize(&[0.0, 1.0, 0.0]);
        use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};
        let expect = [-FRAC_1_SQRT_2, SQRT_2, -FRAC_1_SQRT_2];
        for (a, b) in z.iter().zip(expect) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(z_normalize(&[5.0, 5.0, 5.0]), vec![0.0; 3]);
        let again = z_normalize(&z);
        for (a, b) in again.iter().zip(&z) {
            assert!((a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn sliding_stats_examples() {
        let s = sliding_mean_std(&[1.0, 2.0, 3.0, 4.0], 2).unwrap();
        assert_eq!(s.means, vec![1.5, 2.5, 3.5]);
        let flat = sliding_mean_std(&[3.0; 10], 4).unwrap();
        assert!(flat.stds.iter().all(|&s| s == 0.0));
        assert!(sliding_mean_std(&[1.0, 2.0], 3).is_err());
        assert!(sliding_mean_std(&[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn sliding_stats_match_naive_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let t = random_series(&mut rng, 200);
        let s = sliding_mean_std(&t, 16).unwrap();
        for i in 0..s.len() {
            let (mu, sd) = mean_std(&t[i..i + 16]);
            assert!((s.means[i] - mu).abs() < 1e-9);
            assert!((s.stds[i] - sd).abs() < 1e-9);
        }
    }

    #[test]
    fn flat_window_inside_varying_series_is_detected() {
        let mut t: Vec<f64> = (0..50).map(|i| (i as f64 * 0.3).sin() * 100.0 + 1e4).collect();
        for v in &mut t[20..30] {
            *v = 1e4 + 7.0;
        }
        let s = sliding_mean_std(&t, 8).unwrap();
        assert!(s.is_flat(21));
        assert!(!s.is_flat(0));
    }

    #[test]
    fn profile_examples() {
        let t = [0.0, 2.0, 0.0, 1.0, 3.0];
        let p = distance_profile(&[0.0, 1.0, 0.0], &t).unwrap();
        assert_eq!(p.len(), 3);
        assert!(p.distances[0].abs() < 1e-12);
        assert!(distance_profile(&[1.0; 6], &t).is_err());

        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let t = random_series(&mut rng, 64);
        let q = random_series(&mut rng, 8);
        let p = distance_profile(&q, &t).unwrap();
        for (i, d) in p.distances.iter().enumerate() {
            assert!((d - naive_distance(&q, &t[i..i + 8])).abs() < 1e-6);
        }
    }

    #[test]
    fn self_match_is_zero_on_fft_path() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let t: Vec<f64> = random_series(&mut rng, 400).iter().map(|v| v * 50.0 + 1e3).collect();
        let p = distance_profile(&t[100..164], &t).unwrap();
        assert!(p.distances[100] < 1e-6);
    }

    #[test]
    fn flat_convention() {
        let t = [1.0, 1.0, 1.0, 1.0, 0.0, 2.0, 5.0];
        let p = distance_profile(&[2.0, 2.0, 2.0], &t).unwrap();
        assert_eq!(p.distances[0], 0.0);
        assert!((p.distances[4] - 6f64.sqrt()).abs() < 1e-12);
        let p = distance_profile(&[0.0, 2.0, 5.0], &t).unwrap();
        assert!((p.distances[0] - 6f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn fft_and_direct_paths_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let t = random_series(&mut rng, 300);
        for m in [2, 31, 32, 33, 128] {
            let q = random_series(&mut rng, m);
            let a = sliding_dot_fft(&q, &t);
            let b = sliding_dot_direct(&q, &t);
            for (x, y) in a.iter().zip(&b) {
                assert!((x - y).abs() < 1e-9, "m={m}");
            }
        }
    }

    #[test]
    fn window_mask_marks_crossing_windows() {
        let mask = window_mask(10, &[5], 3);
        // windows 3 and 4 straddle sample 5
        assert_eq!(mask, vec![true, true, true, false, false, true, true, true]);
        assert!(window_mask(10, &[], 3).iter().all(|&v| v));
    }

    #[test]
    fn pairwise_matrix_properties() {
        let t: Vec<f64> = (0..120).map(|i| (i as f64 * std::f64::consts::TAU / 20.0).sin()).collect();
        let pm = pairwise_distance_matrix(&t, 10).unwrap();
        assert!(pm.get(0, 20) < 1e-6);
        assert_eq!(pm.exclusion, 5);
        assert!(pm.is_excluded(3, 7));
        assert!(!pm.is_excluded(3, 8));
        for i in 0..pm.n_windows {
            assert_eq!(pm.get(i, i), 0.0);
            for j in 0..pm.n_windows {
                assert_eq!(pm.get(i, j), pm.get(j, i));
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let t = random_series(&mut rng, 90);
        let pm = pairwise_distance_matrix(&t, 12).unwrap();
        for i in 0..pm.n_windows {
            let p = distance_profile(&t[i..i + 12], &t).unwrap();
            for j in 0..pm.n_windows {
                if i != j {
                    assert!((pm.get(i, j) - p.distances[j]).abs() < 1e-6);
                }
            }
        }
    }

    #[test]
    fn self_join_rows_match_profiles() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let t = random_series(&mut rng, 400);
        for m in [4, 40] {
            let mut join = SelfJoin::new(&t, m).unwrap();
            let mut row = Vec::new();
            while let Some(i) = join.next_row(&mut row) {
                let p = distance_profile(&t[i..i + m], &t).unwrap();
                for (j, (a, b)) in row.iter().zip(&p.distances).enumerate() {
                    if i != j {
                        assert!((a - b).abs() < 1e-6, "row {i} col {j}");
                    }
                }
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;
        use rand::Rng;

        proptest! {
            #[test]
            fn scale_offset_invariance(
                seed in 0u64..1000,
                a in 0.1f64..50.0,
                b in -100.0f64..100.0,
                m in 2usize..40,
            ) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let t = random_series(&mut rng, 120);
                let q = random_series(&mut rng, m);
                let q2: Vec<f64> = q.iter().map(|v| a * v + b).collect();
                let p1 = distance_profile(&q, &t).unwrap();
                let p2 = distance_profile(&q2, &t).unwrap();
                for (x, y) in p1.distances.iter().zip(&p2.distances) {
                    prop_assert!((x - y).abs() < 1e-6);
                }
            }

            #[test]
            fn distances_are_bounded(seed in 0u64..1000, m in 2usize..64) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let t = random_series(&mut rng, 150);
                let q = random_series(&mut rng, m);
                let p = distance_profile(&q, &t).unwrap();
                let bound = 2.0 * (m as f64).sqrt() + 1e-9;
                prop_assert!(p.distances.iter().all(|&d| (0.0..=bound).contains(&d)));
            }

            #[test]
            fn triangle_inequality(seed in 0u64..1000, m in 3usize..30) {
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let t = random_series(&mut rng, 100);
                let n = t.len() - m + 1;
                let (i, j, k) = (rng.random_range(0..n), rng.random_range(0..n), rng.random_range(0..n));
                let d = |x: usize, y: usize| z_distance(&t[x..x + m], &t[y..y + m]);
                prop_assert!(d(i, k) <= d(i, j) + d(j, k) + 1e-9);
            }
        }
    }
}
