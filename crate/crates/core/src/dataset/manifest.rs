use std::collections::{HashMap, HashSet};

use super::DatasetError;
use crate::tsv::Table;

/// One mixing instruction: which utterance, which noise, at what SNR.
#[derive(Clone, Debug, PartialEq)]
pub struct ManifestEntry {
    pub clean_id: String,
    pub noise_id: String,
    pub snr_db: f64,
}

/// SNR grids of the two reference manifests.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SnrSet {
    Training,
    Test,
}

impl SnrSet {
    pub fn values(self) -> [f64; 4] {
        match self {
            SnrSet::Training => [0.0, 5.0, 10.0, 15.0],
            SnrSet::Test => [2.5, 7.5, 12.5, 17.5],
        }
    }

    pub fn contains(self, snr_db: f64) -> bool {
        self.values().contains(&snr_db)
    }

    /// The set every entry belongs to, if there is one.
    pub fn classify(entries: &[ManifestEntry]) -> Option<SnrSet> {
        [SnrSet::Training, SnrSet::Test]
            .into_iter()
            .find(|set| entries.iter().all(|e| set.contains(e.snr_db)))
    }
}

fn check_id(kind: &'static str, id: &str, line: usize) -> Result<(), DatasetError> {
    if id.is_empty() || id.starts_with('.') || id.contains(['/', '\\']) {
        return Err(DatasetError::Manifest {
            line,
            message: format!("{kind} `{id}` is not a plain file stem"),
        });
    }
    Ok(())
}

/// Parses whitespace-separated `clean_id noise_id snr_db` lines. Blank lines
/// are skipped.
pub fn parse_manifest(text: &str) -> Result<Vec<ManifestEntry>, DatasetError> {
    let mut seen = HashSet::new();
    let mut entries = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.is_empty() {
            continue;
        }
        let [clean_id, noise_id, snr] = fields[..] else {
            return Err(DatasetError::Manifest {
                line: line_no,
                message: format!("expected 3 fields (clean_id noise_id snr_db), found {}", fields.len()),
            });
        };
        let snr_db: f64 = snr.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| {
            DatasetError::Manifest {
                line: line_no,
                message: format!("SNR `{snr}` is not a number"),
            }
        })?;
        check_id("clean_id", clean_id, line_no)?;
        check_id("noise_id", noise_id, line_no)?;
        if !seen.insert(clean_id) {
            return Err(DatasetError::Manifest {
                line: line_no,
                message: format!("duplicate clean_id `{clean_id}`"),
            });
        }
        entries.push(ManifestEntry {
            clean_id: clean_id.to_string(),
            noise_id: noise_id.to_string(),
            snr_db,
        });
    }
    Ok(entries)
}

/// Duration of an original reference utterance.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TargetLength {
    pub seconds: f64,
    /// Sample count at the original corpus rate.
    pub samples: u64,
}

impl TargetLength {
    /// Sample count at `rate`: `round(seconds * rate)`.
    pub fn samples_at(&self, rate: u32) -> usize {
        (self.seconds * rate as f64).round() as usize
    }
}

/// Parses the lengths table (`clean_id`, `seconds`, `samples`).
pub fn parse_lengths(text: &str) -> Result<HashMap<String, TargetLength>, DatasetError> {
    let table = Table::parse(text, &["clean_id", "seconds", "samples"])?;
    let mut out = HashMap::new();
    for row in table.rows() {
        let seconds: f64 = row.parse("seconds")?;
        if !(seconds > 0.0 && seconds.is_finite()) {
            return Err(row.bad("seconds", "must be positive").into());
        }
        let samples: u64 = row.parse("samples")?;
        let id = row.get("clean_id").to_string();
        if out.insert(id.clone(), TargetLength { seconds, samples }).is_some() {
            return Err(row.bad("clean_id", format!("duplicate `{id}`")).into());
        }
    }
    Ok(out)
}
