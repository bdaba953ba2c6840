//! EEG preprocessing: decimation, edge trimming, average reference,
//! zero-phase Butterworth band-pass, artifact-window rejection and
//! per-band extraction with resampling.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;

/// A multichannel recording sampled at a fixed rate.
///
/// `breaks` lists sample indices that start a new continuous segment; they
/// are created by [`reject_artifact_windows`] and carried through later
/// resampling steps.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Recording {
    pub channels: Vec<String>,
    pub data: Vec<Vec<f64>>,
    pub rate: f64,
    #[serde(default)]
    pub breaks: Vec<usize>,
}

impl Recording {
    pub fn new(channels: Vec<String>, data: Vec<Vec<f64>>, rate: f64) -> Result<Self> {
        let rec = Recording {
            channels,
            data,
            rate,
            breaks: Vec::new(),
        };
        rec.validate()?;
        Ok(rec)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.rate > 0.0 && self.rate.is_finite()) {
            return Err(Error::invalid(format!("sampling rate {} must be positive", self.rate)));
        }
        if self.channels.len() != self.data.len() {
            return Err(Error::invalid(format!(
                "{} channel names for {} data channels",
                self.channels.len(),
                self.data.len()
            )));
        }
        if self.data.is_empty() {
            return Err(Error::invalid("recording has no channels"));
        }
        let n = self.data[0].len();
        if n == 0 {
            return Err(Error::EmptyRecording("recording has no samples".into()));
        }
        if self.data.iter().any(|c| c.len() != n) {
            return Err(Error::invalid("channels have unequal sample counts"));
        }
        let mut names: Vec<&String> = self.channels.iter().collect();
        names.sort();
        if names.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::invalid("duplicate channel names"));
        }
        Ok(())
    }

    pub fn n_samples(&self) -> usize {
        self.data.first().map_or(0, Vec::len)
    }

    pub fn n_channels(&self) -> usize {
        self.data.len()
    }

    pub fn duration(&self) -> f64 {
        self.n_samples() as f64 / self.rate
    }

    pub fn channel_index(&self, name: &str) -> Option<usize> {
        self.channels.iter().position(|c| c == name)
    }

    /// One channel as a [`Series`], keeping segment breaks.
    pub fn series(&self, channel: usize) -> Series {
        Series {
            values: self.data[channel].clone(),
            breaks: self.breaks.clone(),
            band: None,
            channel: Some(self.channels[channel].clone()),
        }
    }

    fn map_data(&self, f: impl Fn(&[f64]) -> Vec<f64>) -> Vec<Vec<f64>> {
        self.data.iter().map(|c| f(c)).collect()
    }
}

/// A named frequency band and the rate its signal is resampled to.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandSpec {
    pub name: String,
    pub low: f64,
    pub high: f64,
    pub target_rate: f64,
}

impl BandSpec {
    pub fn new(name: impl Into<String>, low: f64, high: f64, target_rate: f64) -> Result<Self> {
        let band = BandSpec {
            name: name.into(),
            low,
            high,
            target_rate,
        };
        band.validate()?;
        Ok(band)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.low > 0.0 && self.low < self.high) {
            return Err(Error::invalid(format!(
                "band {}: need 0 < low ({}) < high ({})",
                self.name, self.low, self.high
            )));
        }
        if self.target_rate < 2.0 * self.high {
            return Err(Error::invalid(format!(
                "band {}: target rate {} below Nyquist rate {}",
                self.name,
                self.target_rate,
                2.0 * self.high
            )));
        }
        Ok(())
    }

    pub fn theta() -> Self {
        BandSpec::new("theta", 4.0, 8.0, 16.0).unwrap()
    }

    pub fn alpha() -> Self {
        BandSpec::new("alpha", 8.0, 12.0, 24.0).unwrap()
    }

    pub fn beta() -> Self {
        BandSpec::new("beta", 12.0, 30.0, 60.0).unwrap()
    }
}

/// Keeps every `factor`-th sample, starting at index 0.
pub fn decimate(rec: &Recording, factor: usize) -> Result<Recording> {
    if factor == 0 {
        return Err(Error::invalid("decimation factor must be at least 1"));
    }
    if factor == 1 {
        return Ok(rec.clone());
    }
    let data = rec.map_data(|c| c.iter().step_by(factor).copied().collect());
    let breaks = rec.breaks.iter().map(|b| b.div_ceil(factor)).collect();
    Ok(Recording {
        channels: rec.channels.clone(),
        data,
        rate: rec.rate / factor as f64,
        breaks: dedup_breaks(breaks),
    })
}

fn dedup_breaks(mut breaks: Vec<usize>) -> Vec<usize> {
    breaks.sort_unstable();
    breaks.dedup();
    breaks.retain(|&b| b > 0);
    breaks
}

/// Drops `round(seconds · rate)` samples from both ends of every channel.
pub fn trim_edges(rec: &Recording, seconds: f64) -> Result<Recording> {
    if !(seconds >= 0.0 && seconds.is_finite()) {
        return Err(Error::invalid(format!("trim length {seconds} s must be non-negative")));
    }
    let cut = (seconds * rec.rate).round() as usize;
    let n = rec.n_samples();
    if 2 * cut >= n {
        return Err(Error::invalid(format!(
            "cannot trim {seconds} s from both ends of a {:.3} s recording",
            rec.duration()
        )));
    }
    let data = rec.map_data(|c| c[cut..n - cut].to_vec());
    let breaks = rec
        .breaks
        .iter()
        .filter(|&&b| b > cut && b < n - cut)
        .map(|b| b - cut)
        .collect();
    Ok(Recording {
        channels: rec.channels.clone(),
        data,
        rate: rec.rate,
        breaks,
    })
}

/// Subtracts the cross-channel mean from every channel at each time index.
pub fn average_reference(rec: &Recording) -> Result<Recording> {
    if rec.n_channels() < 2 {
        return Err(Error::invalid("average reference needs at least two channels"));
    }
    let n = rec.n_samples();
    let c = rec.n_channels() as f64;
    let mean: Vec<f64> = (0..n)
        .map(|i| rec.data.iter().map(|ch| ch[i]).sum::<f64>() / c)
        .collect();
    let data = rec.map_data(|ch| ch.iter().zip(&mean).map(|(v, m)| v - m).collect());
    Ok(Recording {
        data,
        ..rec.clone()
    })
}

/// Second-order IIR section in direct form II transposed.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Biquad {
    b: [f64; 3],
    a: [f64; 2],
}

/// Pole quality factors of a 4th-order Butterworth prototype.
const BUTTER4_Q: [f64; 2] = [0.541_196_100_146_197, 1.306_562_964_876_376_6];

impl Biquad {
    fn lowpass(cutoff: f64, rate: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b: [(1.0 - cos) / 2.0 / a0, (1.0 - cos) / a0, (1.0 - cos) / 2.0 / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn highpass(cutoff: f64, rate: f64, q: f64) -> Self {
        let w0 = 2.0 * PI * cutoff / rate;
        let (sin, cos) = w0.sin_cos();
        let alpha = sin / (2.0 * q);
        let a0 = 1.0 + alpha;
        Biquad {
            b: [(1.0 + cos) / 2.0 / a0, -(1.0 + cos) / a0, (1.0 + cos) / 2.0 / a0],
            a: [-2.0 * cos / a0, (1.0 - alpha) / a0],
        }
    }

    fn run(&self, x: &mut [f64]) {
        let (mut z1, mut z2) = (0.0, 0.0);
        for v in x.iter_mut() {
            let input = *v;
            let out = self.b[0] * input + z1;
            z1 = self.b[1] * input - self.a[0] * out + z2;
            z2 = self.b[2] * input - self.a[1] * out;
            *v = out;
        }
    }
}

/// Cascade of a 4th-order Butterworth high-pass at `low` and a 4th-order
/// Butterworth low-pass at `high`.
#[derive(Clone, Debug)]
pub struct BandpassFilter {
    sections: Vec<Biquad>,
    pad: usize,
}

impl BandpassFilter {
    pub fn new(low: f64, high: f64, rate: f64) -> Result<Self> {
        let nyquist = rate / 2.0;
        if !(low > 0.0 && low < high) {
            return Err(Error::invalid(format!("need 0 < low ({low}) < high ({high})")));
        }
        if high >= nyquist {
            return Err(Error::invalid(format!(
                "upper cutoff {high} Hz at or above Nyquist {nyquist} Hz"
            )));
        }
        let mut sections: Vec<Biquad> = BUTTER4_Q.iter().map(|&q| Biquad::highpass(low, rate, q)).collect();
        sections.extend(BUTTER4_Q.iter().map(|&q| Biquad::lowpass(high, rate, q)));
        // the slowest pole decays over roughly 1/low seconds
        let pad = (3.0 * rate / low).ceil() as usize;
        Ok(BandpassFilter { sections, pad })
    }

    /// Forward-backward application with odd-reflection padding.
    pub fn filtfilt(&self, x: &[f64]) -> Vec<f64> {
        let n = x.len();
        if n < 2 {
            return x.to_vec();
        }
        let pad = self.pad.min(n - 1);
        let mut buf = Vec::with_capacity(n + 2 * pad);
        buf.extend((1..=pad).rev().map(|i| 2.0 * x[0] - x[i]));
        buf.extend_from_slice(x);
        buf.extend((1..=pad).map(|i| 2.0 * x[n - 1] - x[n - 1 - i]));
        for s in &self.sections {
            s.run(&mut buf);
        }
        buf.reverse();
        for s in &self.sections {
            s.run(&mut buf);
        }
        buf.reverse();
        buf[pad..pad + n].to_vec()
    }
}

/// Zero-phase band-pass of every channel.
pub fn bandpass(rec: &Recording, low: f64, high: f64) -> Result<Recording> {
    let filter = BandpassFilter::new(low, high, rec.rate)?;
    Ok(Recording {
        data: rec.map_data(|c| filter.filtfilt(c)),
        ..rec.clone()
    })
}

/// Result of [`reject_artifact_windows`].
#[derive(Clone, Debug, PartialEq)]
pub struct ArtifactRejection {
    pub recording: Recording,
    /// Indices of the removed windows in the input recording.
    pub removed: Vec<usize>,
    pub window_samples: usize,
}

/// Removes non-overlapping windows whose mean-square power exceeds
/// `mean + power_z · std` of that channel's window powers in any channel.
///
/// Kept windows are concatenated and each junction between non-adjacent
/// windows is recorded as a segment break. A trailing partial window is
/// dropped. An infinite `power_z` disables rejection and returns the input
/// unchanged.
pub fn reject_artifact_windows(rec: &Recording, window_s: f64, power_z: f64) -> Result<ArtifactRejection> {
    let win = (window_s * rec.rate).round() as usize;
    if window_s.is_nan() || window_s <= 0.0 || win < 1 {
        return Err(Error::invalid(format!(
            "artifact window of {window_s} s is shorter than one sample"
        )));
    }
    if power_z.is_nan() {
        return Err(Error::invalid("power threshold is NaN"));
    }
    if power_z == f64::INFINITY {
        return Ok(ArtifactRejection {
            recording: rec.clone(),
            removed: Vec::new(),
            window_samples: win,
        });
    }
    let n_windows = rec.n_samples() / win;
    if n_windows == 0 {
        return Err(Error::EmptyRecording(format!(
            "recording of {} samples holds no complete {win}-sample window",
            rec.n_samples()
        )));
    }
    let mut reject = vec![false; n_windows];
    for ch in &rec.data {
        let powers: Vec<f64> = ch
            .chunks_exact(win)
            .map(|w| w.iter().map(|v| v * v).sum::<f64>() / win as f64)
            .collect();
        let mu = powers.iter().sum::<f64>() / n_windows as f64;
        let sd = (powers.iter().map(|p| (p - mu) * (p - mu)).sum::<f64>() / n_windows as f64).sqrt();
        let threshold = mu + power_z * sd;
        for (r, p) in reject.iter_mut().zip(&powers) {
            *r |= *p > threshold;
        }
    }
    let kept: Vec<usize> = (0..n_windows).filter(|&w| !reject[w]).collect();
    if kept.is_empty() {
        return Err(Error::EmptyRecording("every artifact window was rejected".into()));
    }
    let removed: Vec<usize> = (0..n_windows).filter(|&w| reject[w]).collect();

    let mut breaks = Vec::new();
    for (pos, pair) in kept.windows(2).enumerate() {
        if pair[1] != pair[0] + 1 {
            breaks.push((pos + 1) * win);
        }
    }
    // existing breaks that fall strictly inside a kept window
    for &b in &rec.breaks {
        let (w, off) = (b / win, b % win);
        if off != 0 {
            if let Ok(pos) = kept.binary_search(&w) {
                breaks.push(pos * win + off);
            }
        }
    }
    let data = rec.map_data(|c| kept.iter().flat_map(|&w| c[w * win..(w + 1) * win].iter().copied()).collect());
    Ok(ArtifactRejection {
        recording: Recording {
            channels: rec.channels.clone(),
            data,
            rate: rec.rate,
            breaks: dedup_breaks(breaks),
        },
        removed,
        window_samples: win,
    })
}

/// Resamples a channel from `rate` to `target` by integer decimation when the
/// ratio is integral and linear interpolation otherwise.
pub fn resample(x: &[f64], rate: f64, target: f64) -> Vec<f64> {
    let ratio = rate / target;
    if (ratio - ratio.round()).abs() < 1e-9 && ratio.round() >= 1.0 {
        return x.iter().step_by(ratio.round() as usize).copied().collect();
    }
    if x.is_empty() {
        return Vec::new();
    }
    let out_len = ((x.len() - 1) as f64 / ratio).floor() as usize + 1;
    (0..out_len)
        .map(|j| {
            let pos = j as f64 * ratio;
            let i = pos.floor() as usize;
            let frac = pos - i as f64;
            if i + 1 < x.len() {
                x[i] * (1.0 - frac) + x[i + 1] * frac
            } else {
                x[x.len() - 1]
            }
        })
        .collect()
}

/// Band-passes to `band` and resamples to its target rate.
pub fn extract_band(rec: &Recording, band: &BandSpec) -> Result<Recording> {
    band.validate()?;
    let filtered = bandpass(rec, band.low, band.high)?;
    let ratio = rec.rate / band.target_rate;
    let data = filtered.map_data(|c| resample(c, rec.rate, band.target_rate));
    let breaks = rec.breaks.iter().map(|&b| (b as f64 / ratio).ceil() as usize).collect();
    Ok(Recording {
        channels: rec.channels.clone(),
        data,
        rate: band.target_rate,
        breaks: dedup_breaks(breaks),
    })
}
