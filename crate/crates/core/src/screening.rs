//! Screening of crowd-sourced recordings into a clean candidate list.
//!
//! A recording is accepted only if it is crowd-validated, at least 2 s long,
//! has a prompt of two or more words, and reaches 50 dB on the frame-energy
//! SNR estimate. Rules are checked in that order and the first failure is
//! reported.

use std::fmt;
use std::io::{self, Write};
use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::audio::{AudioBuffer, AudioError};
use crate::levels::{estimate_snr, frame_len_for, EnergyVad, VoiceActivityDetector};
use crate::tsv::{Table, TsvError};

#[derive(Error, Debug)]
pub enum ScreenError {
    #[error(transparent)]
    Table(#[from] TsvError),
    #[error("duplicate clip_id `{0}`")]
    DuplicateClip(String),
    #[error("quota must be at least 1")]
    ZeroQuota,
}

/// One row of the clip metadata table.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct PoolEntry {
    pub clip_id: String,
    pub path: PathBuf,
    pub prompt_text: String,
    pub validated: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct CandidateRecord {
    pub clip_id: String,
    pub path: PathBuf,
    pub duration_s: f64,
    pub prompt_word_count: usize,
    pub validated: bool,
    /// Present once the clip passed the cheap rules and was measured.
    pub estimated_snr_db: Option<f64>,
}

#[derive(Clone, Debug, PartialEq)]
pub enum Rejection {
    NotValidated,
    TooShort,
    SingleWord,
    LowSnr(f64),
    Unmeasurable(String),
}

impl Rejection {
    pub fn label(&self) -> &'static str {
        match self {
            Rejection::NotValidated => "not_validated",
            Rejection::TooShort => "too_short",
            Rejection::SingleWord => "single_word",
            Rejection::LowSnr(_) => "low_snr",
            Rejection::Unmeasurable(_) => "unmeasurable",
        }
    }
}

impl fmt::Display for Rejection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Rejection::LowSnr(snr) => write!(f, "low_snr ({snr:.2} dB)"),
            Rejection::Unmeasurable(why) => write!(f, "unmeasurable ({why})"),
            other => f.write_str(other.label()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ScreenDecision {
    Accepted(f64),
    Rejected(Rejection),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScreeningRules {
    pub min_duration_s: f64,
    pub min_words: usize,
    pub min_snr_db: f64,
    pub vad_frame_ms: f64,
}

impl Default for ScreeningRules {
    fn default() -> Self {
        ScreeningRules {
            min_duration_s: 2.0,
            min_words: 2,
            min_snr_db: 50.0,
            vad_frame_ms: 30.0,
        }
    }
}

/// Counts whitespace-separated tokens, ignoring tokens made only of punctuation.
pub fn count_words(text: &str) -> usize {
    text.split_whitespace()
        .filter(|t| !t.trim_matches(|c: char| !c.is_alphanumeric()).is_empty())
        .count()
}

pub struct Screener<V = EnergyVad> {
    pub rules: ScreeningRules,
    pub vad: V,
}

impl Default for Screener<EnergyVad> {
    fn default() -> Self {
        Screener {
            rules: ScreeningRules::default(),
            vad: EnergyVad::default(),
        }
    }
}

impl<V: VoiceActivityDetector> Screener<V> {
    pub fn new(rules: ScreeningRules, vad: V) -> Self {
        Screener { rules, vad }
    }

    /// Applies the rules to `record`, using `audio` only for the SNR step.
    pub fn screen(&self, record: &CandidateRecord, audio: &AudioBuffer) -> ScreenDecision {
        if !record.validated {
            return ScreenDecision::Rejected(Rejection::NotValidated);
        }
        if record.duration_s < self.rules.min_duration_s {
            return ScreenDecision::Rejected(Rejection::TooShort);
        }
        if record.prompt_word_count < self.rules.min_words {
            return ScreenDecision::Rejected(Rejection::SingleWord);
        }
        match self.measure_snr(audio) {
            Ok(snr) if snr >= self.rules.min_snr_db => ScreenDecision::Accepted(snr),
            Ok(snr) => ScreenDecision::Rejected(Rejection::LowSnr(snr)),
            Err(why) => ScreenDecision::Rejected(Rejection::Unmeasurable(why)),
        }
    }

    pub fn measure_snr(&self, audio: &AudioBuffer) -> Result<f64, String> {
        let k = frame_len_for(audio.sample_rate(), self.rules.vad_frame_ms).map_err(|e| e.to_string())?;
        let partition = self.vad.partition(audio, k).map_err(|e| e.to_string())?;
        estimate_snr(audio, &partition).map_err(|e| e.to_string())
    }

    /// Screens one pool entry. Audio is only loaded for validated clips.
    pub fn screen_entry<F>(&self, entry: &PoolEntry, load: &F) -> Result<Outcome, AudioError>
    where
        F: Fn(&PoolEntry) -> Result<AudioBuffer, AudioError>,
    {
        let words = count_words(&entry.prompt_text);
        if !entry.validated {
            return Ok(Outcome::Rejected(Rejection::NotValidated));
        }
        let audio = load(entry)?;
        let mut record = CandidateRecord {
            clip_id: entry.clip_id.clone(),
            path: entry.path.clone(),
            duration_s: audio.duration_s(),
            prompt_word_count: words,
            validated: entry.validated,
            estimated_snr_db: None,
        };
        Ok(match self.screen(&record, &audio) {
            ScreenDecision::Accepted(snr) => {
                record.estimated_snr_db = Some(snr);
                Outcome::Accepted(record)
            }
            ScreenDecision::Rejected(r) => Outcome::Rejected(r),
        })
    }
}

/// Screens `record` with the default rules and detector.
pub fn screen_candidate(record: &CandidateRecord, audio: &AudioBuffer) -> ScreenDecision {
    Screener::default().screen(record, audio)
}

#[derive(Clone, Debug, PartialEq)]
pub enum Outcome {
    Accepted(CandidateRecord),
    Rejected(Rejection),
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Selection {
    pub accepted: Vec<CandidateRecord>,
    pub rejected: Vec<(String, Rejection)>,
    /// Clips whose audio could not be loaded, with the error text.
    pub failures: Vec<(String, String)>,
    /// Quota minus accepted count when the pool ran out.
    pub shortfall: usize,
    pub scanned: usize,
}

/// Scans `pool` in order and keeps accepted clips until `quota` is reached.
///
/// Clips are screened in parallel batches, but the reduction walks results in
/// input order, so the output is a deterministic prefix-subsequence of `pool`.
pub fn select_candidates<V, F>(
    pool: &[PoolEntry],
    quota: usize,
    screener: &Screener<V>,
    load: F,
) -> Result<Selection, ScreenError>
where
    V: VoiceActivityDetector,
    F: Fn(&PoolEntry) -> Result<AudioBuffer, AudioError> + Sync,
{
    if quota == 0 {
        return Err(ScreenError::ZeroQuota);
    }
    let mut seen = std::collections::HashSet::new();
    for e in pool {
        if !seen.insert(e.clip_id.as_str()) {
            return Err(ScreenError::DuplicateClip(e.clip_id.clone()));
        }
    }

    let mut sel = Selection::default();
    let mut pos = 0;
    while pos < pool.len() && sel.accepted.len() < quota {
        let need = quota - sel.accepted.len();
        let batch = &pool[pos..(pos + need.max(256)).min(pool.len())];
        let outcomes: Vec<_> = batch
            .par_iter()
            .map(|e| screener.screen_entry(e, &load))
            .collect();
        for (entry, outcome) in batch.iter().zip(outcomes) {
            if sel.accepted.len() == quota {
                break;
            }
            sel.scanned += 1;
            match outcome {
                Ok(Outcome::Accepted(r)) => sel.accepted.push(r),
                Ok(Outcome::Rejected(r)) => sel.rejected.push((entry.clip_id.clone(), r)),
                Err(e) => sel.failures.push((entry.clip_id.clone(), e.to_string())),
            }
        }
        pos += batch.len();
    }
    sel.shortfall = quota - sel.accepted.len();
    Ok(sel)
}

fn parse_bool(s: &str) -> Option<bool> {
    match s.trim().to_ascii_lowercase().as_str() {
        "1" | "true" | "yes" => Some(true),
        "0" | "false" | "no" => Some(false),
        _ => None,
    }
}

/// Parses the clip metadata table (`clip_id`, `path`, `prompt_text`, `validated`).
pub fn parse_pool(text: &str) -> Result<Vec<PoolEntry>, ScreenError> {
    let table = Table::parse(text, &["clip_id", "path", "prompt_text", "validated"])?;
    table
        .rows()
        .map(|row| {
            let validated = parse_bool(row.get("validated"))
                .ok_or_else(|| row.bad("validated", "expected true/false or 1/0"))?;
            Ok(PoolEntry {
                clip_id: row.get("clip_id").to_string(),
                path: PathBuf::from(row.get("path")),
                prompt_text: row.get("prompt_text").to_string(),
                validated,
            })
        })
        .collect()
}

fn fmt_snr(snr: Option<f64>) -> String {
    match snr {
        Some(v) if v == f64::INFINITY => "inf".to_string(),
        Some(v) => v.to_string(),
        None => String::new(),
    }
}

/// Writes the candidate list (`clip_id`, `path`, `duration_s`, `estimated_snr_db`).
pub fn write_candidate_list(records: &[CandidateRecord], mut out: impl Write) -> io::Result<()> {
    writeln!(out, "clip_id\tpath\tduration_s\testimated_snr_db")?;
    for r in records {
        writeln!(
            out,
            "{}\t{}\t{}\t{}",
            r.clip_id,
            r.path.display(),
            r.duration_s,
            fmt_snr(r.estimated_snr_db)
        )?;
    }
    Ok(())
}

/// Reads a candidate list written by [`write_candidate_list`].
pub fn parse_candidate_list(text: &str) -> Result<Vec<CandidateRecord>, ScreenError> {
    let table = Table::parse(text, &["clip_id", "path", "duration_s", "estimated_snr_db"])?;
    let mut seen = std::collections::HashSet::new();
    table
        .rows()
        .map(|row| {
            let duration_s: f64 = row.parse("duration_s")?;
            if !(duration_s > 0.0 && duration_s.is_finite()) {
                return Err(row.bad("duration_s", "must be positive").into());
            }
            let snr = row.get("estimated_snr_db").trim();
            let estimated_snr_db = if snr.is_empty() { None } else { Some(row.parse("estimated_snr_db")?) };
            let clip_id = row.get("clip_id").to_string();
            if !seen.insert(clip_id.clone()) {
                return Err(ScreenError::DuplicateClip(clip_id));
            }
            Ok(CandidateRecord {
                clip_id,
                path: PathBuf::from(row.get("path")),
                duration_s,
                prompt_word_count: 0,
                validated: true,
                estimated_snr_db,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn record(validated: bool, duration_s: f64, words: usize) -> CandidateRecord {
        CandidateRecord {
            clip_id: "c".into(),
            path: "c.wav".into(),
            duration_s,
            prompt_word_count: words,
            validated,
            estimated_snr_db: None,
        }
    }

    /// 30 ms frames at 16 kHz: bursts of amplitude `amp` with a background
    /// of amplitude `amp * 10^(-snr/20)` (so frame energies differ by `snr`).
    fn clip(seconds: f64, snr_db: f64) -> AudioBuffer {
        let k = 480;
        let frames = (seconds * 16000.0) as usize / k;
        let floor = 10f64.powf(-snr_db / 20.0);
        let s: Vec<f64> = (0..frames * k)
            .map(|n| {
                let speech = (n / k) % 4 != 0;
                let a = if speech { 0.5 } else { 0.5 * floor };
                // square-ish carrier so every frame has identical energy
                a * if n % 2 == 0 { 1.0 } else { -1.0 }
            })
            .collect();
        AudioBuffer::from_f64(&s, 16000).unwrap()
    }

    #[test]
    fn word_counting() {
        assert_eq!(count_words("Hello, world!"), 2);
        assert_eq!(count_words("  one  "), 1);
        assert_eq!(count_words("— ... !"), 0);
        assert_eq!(count_words("¿Dónde está?"), 2);
        assert_eq!(count_words("Mae'r gath"), 2);
    }

    #[test]
    fn decisions_follow_rule_order() {
        let audio = clip(4.0, 62.0);
        match screen_candidate(&record(true, 3.1, 5), &audio) {
            ScreenDecision::Accepted(snr) => assert!((snr - 62.0).abs() < 1e-3, "{snr}"),
            other => panic!("{other:?}"),
        }
        assert_eq!(
            screen_candidate(&record(true, 1.5, 5), &audio),
            ScreenDecision::Rejected(Rejection::TooShort)
        );
        assert_eq!(
            screen_candidate(&record(true, 4.0, 1), &audio),
            ScreenDecision::Rejected(Rejection::SingleWord)
        );
        assert_eq!(
            screen_candidate(&record(false, 1.0, 1), &audio),
            ScreenDecision::Rejected(Rejection::NotValidated)
        );
        match screen_candidate(&record(true, 4.0, 5), &clip(4.0, 49.9)) {
            ScreenDecision::Rejected(Rejection::LowSnr(snr)) => assert!((snr - 49.9).abs() < 1e-3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn silent_clip_is_unmeasurable() {
        let audio = AudioBuffer::zeros(48000, 16000).unwrap();
        assert!(matches!(
            screen_candidate(&record(true, 3.0, 3), &audio),
            ScreenDecision::Rejected(Rejection::Unmeasurable(_))
        ));
    }

    fn pool(n: usize) -> Vec<PoolEntry> {
        (0..n)
            .map(|i| PoolEntry {
                clip_id: format!("clip{i:03}"),
                path: format!("{i}").into(),
                prompt_text: "two words".into(),
                validated: true,
            })
            .collect()
    }

    #[test]
    fn selection_exhaustion_reports_shortfall() {
        let entries = pool(5);
        // clips 1 and 3 are clean, others noisy
        let load = |e: &PoolEntry| -> Result<AudioBuffer, AudioError> {
            let i: usize = e.path.to_str().unwrap().parse().unwrap();
            Ok(clip(3.0, if i % 2 == 1 { 70.0 } else { 20.0 }))
        };
        let sel = select_candidates(&entries, 3, &Screener::default(), load).unwrap();
        let ids: Vec<&str> = sel.accepted.iter().map(|r| r.clip_id.as_str()).collect();
        assert_eq!(ids, vec!["clip001", "clip003"]);
        assert_eq!(sel.shortfall, 1);
        assert_eq!(sel.rejected.len(), 3);
        assert_eq!(sel.scanned, 5);
    }

    #[test]
    fn selection_stops_at_quota_and_records_failures() {
        let entries = pool(600);
        let load = |e: &PoolEntry| -> Result<AudioBuffer, AudioError> {
            if e.clip_id == "clip002" {
                return Err(AudioError::MalformedHeader("bad".into()));
            }
            Ok(clip(2.1, 80.0))
        };
        let sel = select_candidates(&entries, 300, &Screener::default(), load).unwrap();
        assert_eq!(sel.accepted.len(), 300);
        assert_eq!(sel.shortfall, 0);
        assert_eq!(sel.failures.len(), 1);
        assert_eq!(sel.scanned, 301);
        assert_eq!(sel.accepted.last().unwrap().clip_id, "clip300");
    }

    #[test]
    fn selection_rejects_bad_arguments() {
        let load = |_: &PoolEntry| -> Result<AudioBuffer, AudioError> { unreachable!() };
        assert!(matches!(
            select_candidates(&pool(2), 0, &Screener::default(), load),
            Err(ScreenError::ZeroQuota)
        ));
        let mut dup = pool(2);
        dup[1].clip_id = dup[0].clip_id.clone();
        assert!(matches!(
            select_candidates(&dup, 1, &Screener::default(), load),
            Err(ScreenError::DuplicateClip(_))
        ));
    }

    #[test]
    fn pool_table_parsing() {
        let text = "clip_id\tpath\tprompt_text\tvalidated\na\ta.wav\tHi there.\ttrue\nb\tb.wav\tYes\t0\n";
        let p = parse_pool(text).unwrap();
        assert_eq!(p.len(), 2);
        assert!(p[0].validated && !p[1].validated);
        assert_eq!(p[0].prompt_text, "Hi there.");
        let bad = "clip_id\tpath\tprompt_text\tvalidated\na\ta.wav\tHi\tmaybe\n";
        assert!(matches!(parse_pool(bad), Err(ScreenError::Table(TsvError::BadValue { line: 2, .. }))));
    }

    #[test]
    fn candidate_list_round_trip() {
        let mut a = record(true, 3.25, 4);
        a.clip_id = "a".into();
        a.estimated_snr_db = Some(f64::INFINITY);
        let mut b = record(true, 2.0000625, 2);
        b.clip_id = "b".into();
        b.estimated_snr_db = Some(57.123456789);
        let mut bytes = Vec::new();
        write_candidate_list(&[a.clone(), b.clone()], &mut bytes).unwrap();
        let text = String::from_utf8(bytes).unwrap();
        assert!(text.starts_with("clip_id\tpath\tduration_s\testimated_snr_db\n"));
        let back = parse_candidate_list(&text).unwrap();
        assert_eq!(back[0].duration_s, 3.25);
        assert_eq!(back[0].estimated_snr_db, Some(f64::INFINITY));
        assert_eq!(back[1].estimated_snr_db, b.estimated_snr_db);
        assert_eq!(back[1].duration_s, b.duration_s);
    }
}
