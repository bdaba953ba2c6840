//! Subject × motif feature matrices of mean match distances.

use std::io::{Read, Write};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::SubjectRecord;
use crate::error::{Error, Result};
use crate::matching::mean_match_distance;
use crate::selection::ScoredMotif;
use crate::signal::BandSpec;

/// Rows are subjects, columns motifs; entry `(i, j)` is the mean distance of
/// motif `j`'s matches in subject `i`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub rows: Vec<String>,
    pub cols: Vec<String>,
    pub values: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    pub groups: Vec<String>,
}

impl FeatureMatrix {
    pub fn n_rows(&self) -> usize {
        self.rows.len()
    }

    pub fn n_cols(&self) -> usize {
        self.cols.len()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.values.iter().map(|r| r[j]).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.rows.len();
        if self.labels.len() != n || self.groups.len() != n || self.values.len() != n {
            return Err(Error::invalid("feature matrix row metadata lengths differ"));
        }
        for (id, row) in self.rows.iter().zip(&self.values) {
            if row.len() != self.cols.len() {
                return Err(Error::invalid(format!("row {id} has {} of {} columns", row.len(), self.cols.len())));
            }
            if row.iter().any(|v| !v.is_finite() || *v < 0.0) {
                return Err(Error::invalid(format!("row {id} has a negative or non-finite entry")));
            }
        }
        Ok(())
    }

    /// Writes `subject,label,group,<motif ids…>` followed by one row per subject.
    pub fn write_csv<W: Write>(&self, w: W) -> Result<()> {
        let mut out = csv::Writer::from_writer(w);
        let mut header = vec!["subject".to_string(), "label".into(), "group".into()];
        header.extend(self.cols.iter().cloned());
        out.write_record(&header)?;
        for i in 0..self.n_rows() {
            let mut rec = vec![self.rows[i].clone(), self.labels[i].to_string(), self.groups[i].clone()];
            rec.extend(self.values[i].iter().map(|v| v.to_string()));
            out.write_record(&rec)?;
        }
        out.flush().map_err(|e| Error::Serde(e.to_string()))?;
        Ok(())
    }

    pub fn read_csv<R: Read>(r: R) -> Result<Self> {
        let mut rdr = csv::Reader::from_reader(r);
        let header = rdr.headers()?.clone();
        if header.len() < 3 || &header[0] != "subject" || &header[1] != "label" || &header[2] != "group" {
            return Err(Error::Serde("feature CSV must start with subject,label,group".into()));
        }
        let cols: Vec<String> = header.iter().skip(3).map(str::to_string).collect();
        let mut m = FeatureMatrix {
            rows: Vec::new(),
            cols,
            values: Vec::new(),
            labels: Vec::new(),
            groups: Vec::new(),
        };
        for rec in rdr.records() {
            let rec = rec?;
            m.rows.push(rec[0].to_string());
            m.labels.push(rec[1].parse().map_err(|_| Error::Serde(format!("bad label {:?}", &rec[1])))?);
            m.groups.push(rec[2].to_string());
            let row = rec
                .iter()
                .skip(3)
                .map(|v| v.parse::<f64>().map_err(|_| Error::Serde(format!("bad value {v:?}"))))
                .collect::<Result<Vec<_>>>()?;
            m.values.push(row);
        }
        m.validate()?;
        Ok(m)
    }
}

/// Builds the feature matrix for `motifs` (all from `band`) over `dataset`.
///
/// Rows follow dataset order, columns motif-id order.
pub fn build_feature_matrix(dataset: &[SubjectRecord], motifs: &[ScoredMotif], band: &BandSpec) -> Result<FeatureMatrix> {
    let mut motifs: Vec<&ScoredMotif> = motifs.iter().collect();
    motifs.sort_by(|a, b| a.motif.id.cmp(&b.motif.id));
    for m in &motifs {
        if m.motif.band != band.name {
            return Err(Error::invalid(format!(
                "motif {} belongs to band {}, not {}",
                m.motif.id, m.motif.band, band.name
            )));
        }
    }
    let values = dataset
        .par_iter()
        .map(|s| {
            motifs
                .iter()
                .map(|m| {
                    let series = s.channel_series(&m.motif.channel).map_err(|_| {
                        Error::invalid(format!(
                            "subject {} lacks channel {} needed by motif {}",
                            s.id, m.motif.channel, m.motif.id
                        ))
                    })?;
                    mean_match_distance(&m.motif.values, &series)
                })
                .collect::<Result<Vec<f64>>>()
        })
        .collect::<Result<Vec<_>>>()?;
    let fm = FeatureMatrix {
        rows: dataset.iter().map(|s| s.id.clone()).collect(),
        cols: motifs.iter().map(|m| m.motif.id.clone()).collect(),
        values,
        labels: dataset.iter().map(|s| s.label).collect(),
        groups: dataset.iter().map(|s| s.group_name().to_string()).collect(),
    };
    fm.validate()?;
    Ok(fm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::motiflets::Motif;
    use crate::signal::Recording;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn subject(rng: &mut ChaCha8Rng, id: &str, label: u8, scale: f64) -> SubjectRecord {
        let t: Vec<f64> = (0..300).map(|_| scale * rng.sample::<f64, _>(StandardNormal)).collect();
        let u: Vec<f64> = (0..300).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let rec = Recording::new(vec!["O2".into(), "Fz".into()], vec![t, u], 24.0).unwrap();
        SubjectRecord::new(id, rec, label).with_group("f")
    }

    fn scored(id: &str, from: &SubjectRecord, start: usize, channel: &str) -> ScoredMotif {
        let c = from.recording.channel_index(channel).unwrap();
        ScoredMotif {
            motif: Motif {
                id: id.into(),
                subject: from.id.clone(),
                channel: channel.into(),
                band: "alpha".into(),
                start,
                length_samples: 20,
                k: 2,
                values: from.recording.data[c][start..start + 20].to_vec(),
            },
            difference_score: 0.1,
            source_class: from.label,
            source_group: "f".into(),
        }
    }

    #[test]
    fn self_match_entry_is_zero() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<SubjectRecord> = (0..4).map(|i| subject(&mut rng, &format!("s{i}"), (i % 2) as u8, 1.0)).collect();
        let motifs = vec![scored("b", &data[2], 40, "O2"), scored("a", &data[1], 100, "Fz")];
        let fm = build_feature_matrix(&data, &motifs, &BandSpec::alpha()).unwrap();
        assert_eq!(fm.cols, vec!["a", "b"]);
        assert!(fm.values[1][0] < fm.values[0][0]);
        assert!(fm.values[2][1] <= fm.values[3][1]);
        assert_eq!(fm.labels, vec![0, 1, 0, 1]);

        let mut buf = Vec::new();
        fm.write_csv(&mut buf).unwrap();
        let back = FeatureMatrix::read_csv(buf.as_slice()).unwrap();
        assert_eq!(back, fm);
    }

    #[test]
    fn empty_and_mismatched() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let data: Vec<SubjectRecord> = (0..3).map(|i| subject(&mut rng, &format!("s{i}"), (i % 2) as u8, 1.0)).collect();
        let fm = build_feature_matrix(&data, &[], &BandSpec::alpha()).unwrap();
        assert_eq!(fm.n_cols(), 0);
        assert_eq!(fm.labels.len(), 3);
        let mut bad = scored("x", &data[0], 0, "O2");
        bad.motif.channel = "Cz".into();
        let err = build_feature_matrix(&data, &[bad], &BandSpec::alpha()).unwrap_err();
        assert!(err.to_string().contains("Cz"));
    }

    #[test]
    fn entries_ignore_recording_scale() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data: Vec<SubjectRecord> = (0..3).map(|i| subject(&mut rng, &format!("s{i}"), (i % 2) as u8, 1.0)).collect();
        let motifs = vec![scored("a", &data[0], 10, "O2")];
        let fm = build_feature_matrix(&data, &motifs, &BandSpec::alpha()).unwrap();
        let mut scaled = data.clone();
        for v in scaled[1].recording.data[0].iter_mut() {
            *v = 3.5 * *v - 20.0;
        }
        let fm2 = build_feature_matrix(&scaled, &motifs, &BandSpec::alpha()).unwrap();
        assert!((fm.values[1][0] - fm2.values[1][0]).abs() < 1e-6);
    }
}
