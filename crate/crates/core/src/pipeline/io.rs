//! File formats: recording CSV, JSON Lines stores and the prepared-band
//! store written by the preprocessing stage.

use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::dataset::SubjectRecord;
use crate::error::{Error, Result};
use crate::signal::{BandSpec, Recording};

pub fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(parent) = path.parent() {
        create_dir(parent)?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| Error::io(path, e))
}

fn open(path: &Path) -> Result<BufReader<File>> {
    File::open(path).map(BufReader::new).map_err(|e| Error::io(path, e))
}

fn finish(mut w: BufWriter<File>, path: &Path) -> Result<()> {
    w.flush().map_err(|e| Error::io(path, e))
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut w = create(path)?;
    w.write_all(text.as_bytes()).map_err(|e| Error::io(path, e))?;
    finish(w, path)
}

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Reads a recording: a header of channel names, then one row per sample.
pub fn read_recording_csv(path: &Path, rate: f64) -> Result<Recording> {
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(open(path)?);
    let channels: Vec<String> = reader
        .headers()
        .map_err(|e| Error::data(path, e.to_string()))?
        .iter()
        .map(str::to_string)
        .collect();
    let mut data = vec![Vec::new(); channels.len()];
    for (row, rec) in reader.records().enumerate() {
        let rec = rec.map_err(|e| Error::data(path, e.to_string()))?;
        for (c, field) in rec.iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::data(path, format!("row {}: {field:?} is not a number", row + 2)))?;
            if !v.is_finite() {
                return Err(Error::data(path, format!("row {}: non-finite sample", row + 2)));
            }
            data[c].push(v);
        }
    }
    Recording::new(channels, data, rate).map_err(|e| Error::data(path, e.to_string()))
}

pub fn write_recording_csv(path: &Path, rec: &Recording) -> Result<()> {
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(&rec.channels)?;
    for i in 0..rec.n_samples() {
        w.write_record(rec.data.iter().map(|c| c[i].to_string()))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// One JSON document per line.
pub fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut w = create(path)?;
    for item in items {
        serde_json::to_writer(&mut w, item)?;
        w.write_all(b"\n").map_err(|e| Error::io(path, e))?;
    }
    finish(w, path)
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let mut out = Vec::new();
    for (i, line) in open(path)?.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::data(path, format!("line {}: {e}", i + 1)))?);
    }
    Ok(out)
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    write_text(path, &(serde_json::to_string_pretty(value)? + "\n"))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    serde_json::from_str(&read_text(path)?).map_err(|e| Error::data(path, e.to_string()))
}

/// Metadata of one preprocessed subject.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedSubject {
    pub id: String,
    pub file: String,
    pub label: u8,
    pub group: Option<String>,
    pub rate: f64,
    pub breaks: Vec<usize>,
    pub removed_windows: Vec<usize>,
}

/// Index of a prepared band directory.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PreparedIndex {
    pub band: BandSpec,
    pub subjects: Vec<PreparedSubject>,
}

pub fn band_dir(out_dir: &Path, band: &str) -> PathBuf {
    out_dir.join("prep").join(band)
}

/// Writes every subject's band recording and the band index.
pub fn write_prepared(out_dir: &Path, band: &BandSpec, subjects: &[(SubjectRecord, Vec<usize>)]) -> Result<()> {
    let dir = band_dir(out_dir, &band.name);
    create_dir(&dir)?;
    let mut index = PreparedIndex {
        band: band.clone(),
        subjects: Vec::with_capacity(subjects.len()),
    };
    for (s, removed) in subjects {
        let file = format!("{}.csv", s.id);
        write_recording_csv(&dir.join(&file), &s.recording)?;
        index.subjects.push(PreparedSubject {
            id: s.id.clone(),
            file,
            label: s.label,
            group: s.group.clone(),
            rate: s.recording.rate,
            breaks: s.recording.breaks.clone(),
            removed_windows: removed.clone(),
        });
    }
    write_json(&dir.join("index.json"), &index)
}

/// Loads a prepared band back into subject records, with each subject's
/// removed artifact windows.
pub fn read_prepared(out_dir: &Path, band: &str) -> Result<(BandSpec, Vec<SubjectRecord>, Vec<Vec<usize>>)> {
    let dir = band_dir(out_dir, band);
    let index: PreparedIndex = read_json(&dir.join("index.json"))?;
    let mut subjects = Vec::with_capacity(index.subjects.len());
    let mut removed = Vec::with_capacity(index.subjects.len());
    for s in index.subjects {
        removed.push(s.removed_windows);
        let mut rec = read_recording_csv(&dir.join(&s.file), s.rate)?;
        rec.breaks = s.breaks;
        subjects.push(SubjectRecord {
            id: s.id,
            recording: rec,
            label: s.label,
            group: s.group,
            baseline_score: None,
            followup_score: None,
        });
    }
    Ok((index.band, subjects, removed))
}
