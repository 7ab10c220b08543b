use std::collections::{BTreeMap, BTreeSet, HashMap};

use super::DatasetError;
use crate::screening::CandidateRecord;

fn micros(seconds: f64) -> i64 {
    (seconds * 1e6).round() as i64
}

/// Candidates still available for matching, indexed by duration.
///
/// Durations are compared in whole microseconds so that equal distances (for
/// example 3.9 s and 4.1 s around 4.0 s) are exact ties.
#[derive(Clone, Debug, Default)]
pub struct CandidatePool {
    by_duration: BTreeMap<i64, BTreeSet<String>>,
    records: HashMap<String, CandidateRecord>,
}

impl CandidatePool {
    pub fn new(records: Vec<CandidateRecord>) -> Result<Self, DatasetError> {
        let mut pool = CandidatePool::default();
        for r in records {
            let id = r.clip_id.clone();
            pool.by_duration
                .entry(micros(r.duration_s))
                .or_default()
                .insert(id.clone());
            if pool.records.insert(id.clone(), r).is_some() {
                return Err(DatasetError::DuplicateCandidate(id));
            }
        }
        Ok(pool)
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Removes and returns the record closest in duration to `target_s`;
    /// ties go to the lexicographically smallest `clip_id`.
    pub fn take_closest(&mut self, target_s: f64) -> Result<CandidateRecord, DatasetError> {
        let target = micros(target_s);
        let below = self.by_duration.range(..=target).next_back();
        let above = self.by_duration.range(target..).next();
        let (_, id, key) = [below, above]
            .into_iter()
            .flatten()
            .map(|(&d, ids)| {
                let first = ids.first().expect("duration buckets are never empty");
                ((d - target).abs(), first.clone(), d)
            })
            .min_by(|a, b| a.0.cmp(&b.0).then_with(|| a.1.cmp(&b.1)))
            .ok_or(DatasetError::PoolExhausted)?;
        let bucket = self.by_duration.get_mut(&key).expect("bucket exists");
        bucket.remove(&id);
        if bucket.is_empty() {
            self.by_duration.remove(&key);
        }
        Ok(self.records.remove(&id).expect("indexed record exists"))
    }
}

/// Takes the candidate whose duration is closest to `target_len_s` out of `pool`.
pub fn match_candidate(target_len_s: f64, pool: &mut CandidatePool) -> Result<CandidateRecord, DatasetError> {
    pool.take_closest(target_len_s)
}
