use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::series::Series;
use crate::signal::Recording;

/// Group value used when a subject carries no group attribute.
pub const NO_GROUP: &str = "none";

/// One subject: a recording with its class label and optional metadata.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SubjectRecord {
    pub id: String,
    pub recording: Recording,
    pub label: u8,
    pub group: Option<String>,
    pub baseline_score: Option<f64>,
    pub followup_score: Option<f64>,
}

impl SubjectRecord {
    pub fn new(id: impl Into<String>, recording: Recording, label: u8) -> Self {
        SubjectRecord {
            id: id.into(),
            recording,
            label,
            group: None,
            baseline_score: None,
            followup_score: None,
        }
    }

    pub fn with_group(mut self, group: impl Into<String>) -> Self {
        self.group = Some(group.into());
        self
    }

    pub fn group_name(&self) -> &str {
        self.group.as_deref().unwrap_or(NO_GROUP)
    }

    /// The named channel as a series, or an error naming subject and channel.
    pub fn channel_series(&self, channel: &str) -> Result<Series> {
        let idx = self.recording.channel_index(channel).ok_or_else(|| {
            Error::invalid(format!("subject {} has no channel {channel}", self.id))
        })?;
        Ok(self.recording.series(idx))
    }
}

/// Checks that the dataset is non-empty, labels are binary and every
/// recording has the same channel names in the same order.
pub fn check_dataset(dataset: &[SubjectRecord]) -> Result<()> {
    let first = dataset
        .first()
        .ok_or_else(|| Error::invalid("dataset is empty"))?;
    for s in dataset {
        if s.label > 1 {
            return Err(Error::invalid(format!("subject {}: label {} is not 0/1", s.id, s.label)));
        }
        if s.recording.channels != first.recording.channels {
            return Err(Error::invalid(format!(
                "subject {} channels differ from subject {}",
                s.id, first.id
            )));
        }
    }
    Ok(())
}
