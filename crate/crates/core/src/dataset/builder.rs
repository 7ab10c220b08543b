use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use super::manifest::{ManifestEntry, TargetLength};
use super::pool::CandidatePool;
use super::rng::SplitMix64;
use super::DatasetError;
use crate::audio::{fit_length, read_wav, resample, write_wav, AudioBuffer, AudioError, WavEncoding};
use crate::levels::NoisePowerEstimator;
use crate::mixer::{apply_mix, mix, noise_segment, MixError};
use crate::screening::CandidateRecord;
use crate::tsv::Table;

pub const BUILD_LOG: &str = "build_log.tsv";
pub const VALIDATION_LIST: &str = "validation.tsv";
/// Domain separator for the validation shuffle stream, keeping it apart from
/// the per-entry streams `seed ^ index`.
const VALIDATION_STREAM: u64 = 0x7661_6c69_6461_7465;

/// Where audio comes from. The filesystem is the normal source; tests and
/// callers with in-memory corpora can supply a closure.
pub trait AudioSource: Sync {
    fn load(&self, path: &Path) -> Result<AudioBuffer, AudioError>;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct FsSource;

impl AudioSource for FsSource {
    fn load(&self, path: &Path) -> Result<AudioBuffer, AudioError> {
        read_wav(path)
    }
}

impl<F> AudioSource for F
where
    F: Fn(&Path) -> Result<AudioBuffer, AudioError> + Sync,
{
    fn load(&self, path: &Path) -> Result<AudioBuffer, AudioError> {
        self(path)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum OutputRate {
    Fixed(u32),
    /// Keep each candidate's own rate; noise is resampled to match.
    Native,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BuildOptions {
    pub output_rate: OutputRate,
    pub encoding: WavEncoding,
    pub noise_power: NoisePowerEstimator,
    /// Entries carved from the manifest into the validation list; 0 disables.
    pub validation_size: usize,
}

impl Default for BuildOptions {
    fn default() -> Self {
        BuildOptions {
            output_rate: OutputRate::Fixed(16000),
            encoding: WavEncoding::Float32,
            noise_power: NoisePowerEstimator::ActiveLevel,
            validation_size: 0,
        }
    }
}

#[derive(Clone, Debug)]
pub struct BuildPlan {
    pub manifest: Vec<ManifestEntry>,
    pub lengths: HashMap<String, TargetLength>,
    pub candidates: Vec<CandidateRecord>,
    /// noise_id -> WAV path
    pub noise_library: BTreeMap<String, PathBuf>,
    pub seed: u64,
    pub output_dir: PathBuf,
    pub options: BuildOptions,
}

#[derive(Clone, Debug, PartialEq)]
pub struct EntryFailure {
    pub index: usize,
    pub clean_id: String,
    pub message: String,
}

/// One row of the build log.
#[derive(Clone, Debug, PartialEq)]
pub struct LogRecord {
    pub clean_id: String,
    pub candidate_id: String,
    pub noise_id: String,
    pub snr_db: f64,
    pub offset: usize,
    pub scale_c: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct BuildReport {
    pub entries: usize,
    pub pairs_written: usize,
    /// Samples saturated by 16-bit export, summed over all written files.
    pub clipped_samples: usize,
    pub clipped_files: usize,
    /// Entries left without a candidate because the pool ran dry.
    pub shortfall: usize,
    pub failures: Vec<EntryFailure>,
    pub log: Vec<LogRecord>,
    pub validation: Vec<String>,
}

/// Maps every `*.wav` in `dir` to its file stem.
pub fn noise_library_from_dir(dir: &Path) -> Result<BTreeMap<String, PathBuf>, DatasetError> {
    let io_err = |source| DatasetError::Io {
        path: dir.to_path_buf(),
        source,
    };
    let mut lib = BTreeMap::new();
    for entry in fs::read_dir(dir).map_err(io_err)? {
        let path = entry.map_err(io_err)?.path();
        if path.extension().is_some_and(|e| e.eq_ignore_ascii_case("wav")) {
            if let Some(stem) = path.file_stem().and_then(|s| s.to_str()) {
                lib.insert(stem.to_string(), path.clone());
            }
        }
    }
    Ok(lib)
}

/// Seeded shuffle of the manifest; the first `size` shuffled entries form the
/// validation split. Both halves keep manifest order.
pub fn split_validation(
    manifest: &[ManifestEntry],
    size: usize,
    seed: u64,
) -> Result<(Vec<ManifestEntry>, Vec<ManifestEntry>), DatasetError> {
    if size > manifest.len() {
        return Err(DatasetError::SplitTooLarge {
            requested: size,
            available: manifest.len(),
        });
    }
    let mut order: Vec<usize> = (0..manifest.len()).collect();
    let mut rng = SplitMix64::new(seed ^ VALIDATION_STREAM);
    for i in (1..order.len()).rev() {
        let j = rng.uniform_inclusive(i as u64) as usize;
        order.swap(i, j);
    }
    let mut is_valid = vec![false; manifest.len()];
    for &i in &order[..size] {
        is_valid[i] = true;
    }
    let (valid, train): (Vec<_>, Vec<_>) = manifest.iter().cloned().zip(is_valid).partition(|(_, v)| *v);
    Ok((
        train.into_iter().map(|(e, _)| e).collect(),
        valid.into_iter().map(|(e, _)| e).collect(),
    ))
}

type CachedNoise = Arc<OnceLock<Result<Arc<AudioBuffer>, String>>>;

/// Noise recordings decoded and resampled once per (noise_id, rate).
#[derive(Default)]
struct NoiseCache {
    slots: Mutex<HashMap<(String, u32), CachedNoise>>,
}

impl NoiseCache {
    fn get(&self, id: &str, path: &Path, rate: u32, source: &dyn AudioSource) -> Result<Arc<AudioBuffer>, String> {
        let slot = {
            let mut slots = self.slots.lock().expect("noise cache poisoned");
            slots.entry((id.to_string(), rate)).or_default().clone()
        };
        slot.get_or_init(|| {
            let raw = source.load(path).map_err(|e| format!("noise `{id}`: {e}"))?;
            resample(&raw, rate)
                .map(Arc::new)
                .map_err(|e| format!("noise `{id}`: {e}"))
        })
        .clone()
    }
}

struct Job<'a> {
    index: usize,
    entry: &'a ManifestEntry,
    target: TargetLength,
    candidate: CandidateRecord,
    noise_path: &'a Path,
}

struct Built {
    record: LogRecord,
    clipped: usize,
    clipped_files: usize,
}

fn build_entry(
    job: &Job<'_>,
    plan: &BuildPlan,
    source: &dyn AudioSource,
    noise_cache: &NoiseCache,
    dirs: &(PathBuf, PathBuf),
) -> Result<Built, String> {
    let audio = source
        .load(&job.candidate.path)
        .map_err(|e| format!("candidate `{}`: {e}", job.candidate.clip_id))?;
    let rate = match plan.options.output_rate {
        OutputRate::Fixed(r) => r,
        OutputRate::Native => audio.sample_rate(),
    };
    let target_len = job.target.samples_at(rate).max(1);
    let clean = resample(&audio, rate)
        .and_then(|a| fit_length(&a, target_len))
        .map_err(|e| e.to_string())?;
    let noise = noise_cache.get(&job.entry.noise_id, job.noise_path, rate, source)?;
    if noise.len() < clean.len() {
        return Err(format!(
            "noise `{}` has {} samples, shorter than the {} needed",
            job.entry.noise_id,
            noise.len(),
            clean.len()
        ));
    }
    let span = (noise.len() - clean.len()) as u64;
    let offset = SplitMix64::for_entry(plan.seed, job.index).uniform_inclusive(span) as usize;
    let mixed = mix(&clean, &noise, job.entry.snr_db, offset, plan.options.noise_power).map_err(|e| e.to_string())?;

    let name = format!("{}.wav", job.entry.clean_id);
    let mut clipped = 0;
    let mut clipped_files = 0;
    for (dir, buffer) in [(&dirs.0, &clean), (&dirs.1, &mixed.mixture)] {
        let report = write_wav(buffer, dir.join(&name), plan.options.encoding).map_err(|e| e.to_string())?;
        if report.clipped > 0 {
            log::warn!("{}: {} samples clipped", dir.join(&name).display(), report.clipped);
            clipped += report.clipped;
            clipped_files += 1;
        }
    }
    Ok(Built {
        record: LogRecord {
            clean_id: job.entry.clean_id.clone(),
            candidate_id: job.candidate.clip_id.clone(),
            noise_id: job.entry.noise_id.clone(),
            snr_db: job.entry.snr_db,
            offset,
            scale_c: mixed.scale_c,
        },
        clipped,
        clipped_files,
    })
}

fn write_text(path: PathBuf, text: &str) -> Result<(), DatasetError> {
    fs::write(&path, text).map_err(|source| DatasetError::Io { path, source })
}

/// Runs the whole build: a sequential candidate-matching pass in manifest
/// order, then parallel decode/fit/mix/write per entry (run inside the
/// caller's rayon pool). Per-entry problems are collected in the report; only
/// problems that prevent any output are returned as errors.
pub fn build_dataset(plan: &BuildPlan, source: &dyn AudioSource) -> Result<BuildReport, DatasetError> {
    let clean_dir = plan.output_dir.join("clean");
    let noisy_dir = plan.output_dir.join("noisy");
    for dir in [&clean_dir, &noisy_dir] {
        fs::create_dir_all(dir).map_err(|source| DatasetError::Io {
            path: dir.clone(),
            source,
        })?;
    }
    let mut report = BuildReport {
        entries: plan.manifest.len(),
        ..Default::default()
    };
    if plan.options.validation_size > 0 {
        let (_, valid) = split_validation(&plan.manifest, plan.options.validation_size, plan.seed)?;
        report.validation = valid.into_iter().map(|e| e.clean_id).collect();
    }

    let mut pool = CandidatePool::new(plan.candidates.clone())?;
    let mut jobs = Vec::with_capacity(plan.manifest.len());
    for (index, entry) in plan.manifest.iter().enumerate() {
        let fail = |message: String| EntryFailure {
            index,
            clean_id: entry.clean_id.clone(),
            message,
        };
        let Some(noise_path) = plan.noise_library.get(&entry.noise_id) else {
            report.failures.push(fail(format!("noise `{}` not in the noise library", entry.noise_id)));
            continue;
        };
        let Some(&target) = plan.lengths.get(&entry.clean_id) else {
            report.failures.push(fail(format!("no target length for `{}`", entry.clean_id)));
            continue;
        };
        match pool.take_closest(target.seconds) {
            Ok(candidate) => jobs.push(Job {
                index,
                entry,
                target,
                candidate,
                noise_path,
            }),
            Err(e) => {
                report.shortfall += 1;
                report.failures.push(fail(e.to_string()));
            }
        }
    }

    let noise_cache = NoiseCache::default();
    let dirs = (clean_dir, noisy_dir);
    let results: Vec<(usize, &str, Result<Built, String>)> = jobs
        .par_iter()
        .map(|job| {
            let built = build_entry(job, plan, source, &noise_cache, &dirs);
            (job.index, job.entry.clean_id.as_str(), built)
        })
        .collect();

    for (index, clean_id, result) in results {
        match result {
            Ok(built) => {
                report.pairs_written += 1;
                report.clipped_samples += built.clipped;
                report.clipped_files += built.clipped_files;
                report.log.push(built.record);
            }
            Err(message) => report.failures.push(EntryFailure {
                index,
                clean_id: clean_id.to_string(),
                message,
            }),
        }
    }
    report.failures.sort_by_key(|f| f.index);

    let mut log = String::from("clean_id\tcandidate_id\tnoise_id\tsnr_db\toffset\tc\n");
    for r in &report.log {
        // `{}` on f64 prints the shortest string that parses back to the same value
        writeln!(
            log,
            "{}\t{}\t{}\t{}\t{}\t{}",
            r.clean_id, r.candidate_id, r.noise_id, r.snr_db, r.offset, r.scale_c
        )
        .expect("writing to a String");
    }
    write_text(plan.output_dir.join(BUILD_LOG), &log)?;
    if plan.options.validation_size > 0 {
        let mut list = String::from("clean_id\n");
        for id in &report.validation {
            list.push_str(id);
            list.push('\n');
        }
        write_text(plan.output_dir.join(VALIDATION_LIST), &list)?;
    }
    log::info!(
        "built {} of {} pairs ({} failures, shortfall {})",
        report.pairs_written,
        report.entries,
        report.failures.len(),
        report.shortfall
    );
    Ok(report)
}

pub fn parse_build_log(text: &str) -> Result<Vec<LogRecord>, DatasetError> {
    let table = Table::parse(text, &["clean_id", "candidate_id", "noise_id", "snr_db", "offset", "c"])?;
    table
        .rows()
        .map(|row| {
            Ok(LogRecord {
                clean_id: row.get("clean_id").to_string(),
                candidate_id: row.get("candidate_id").to_string(),
                noise_id: row.get("noise_id").to_string(),
                snr_db: row.parse("snr_db")?,
                offset: row.parse("offset")?,
                scale_c: row.parse("c")?,
            })
        })
        .collect()
}

/// Recomputes a noisy file from its clean file, the noise recording (already
/// at the output rate) and the logged offset and gain.
pub fn replay_entry(clean: &AudioBuffer, noise: &AudioBuffer, record: &LogRecord) -> Result<AudioBuffer, MixError> {
    let segment = noise_segment(clean, noise, record.offset)?;
    apply_mix(clean, &segment, record.scale_c)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn manifest(n: usize) -> Vec<ManifestEntry> {
        (0..n)
            .map(|i| ManifestEntry {
                clean_id: format!("u{i:03}"),
                noise_id: "hum".into(),
                snr_db: 5.0,
            })
            .collect()
    }

    #[test]
    fn validation_split_is_seeded_and_disjoint() {
        let m = manifest(50);
        let (train, valid) = split_validation(&m, 10, 1234).unwrap();
        assert_eq!((train.len(), valid.len()), (40, 10));
        let again = split_validation(&m, 10, 1234).unwrap();
        assert_eq!(valid, again.1);
        let other = split_validation(&m, 10, 99).unwrap();
        assert_ne!(valid, other.1);
        assert!(valid.iter().all(|v| !train.contains(v)));
        assert!(matches!(
            split_validation(&m, 51, 1),
            Err(DatasetError::SplitTooLarge { .. })
        ));
    }

    fn tone(len: usize, rate: u32, f: f64) -> AudioBuffer {
        let s: Vec<f64> = (0..len)
            .map(|n| 0.3 * (2.0 * std::f64::consts::PI * f * n as f64 / rate as f64).sin())
            .collect();
        AudioBuffer::from_f64(&s, rate).unwrap()
    }

    #[test]
    fn builds_and_replays_small_plan() {
        let dir = tempfile::tempdir().unwrap();
        let m = manifest(4);
        let lengths = m
            .iter()
            .enumerate()
            .map(|(i, e)| {
                let seconds = 0.25 + 0.05 * i as f64;
                (e.clean_id.clone(), TargetLength { seconds, samples: (seconds * 48000.0) as u64 })
            })
            .collect();
        let candidates = (0..5)
            .map(|i| CandidateRecord {
                clip_id: format!("cv{i}"),
                path: format!("mem/cv{i}").into(),
                duration_s: 0.2 + 0.06 * i as f64,
                prompt_word_count: 3,
                validated: true,
                estimated_snr_db: Some(70.0),
            })
            .collect();
        let source = |p: &Path| -> Result<AudioBuffer, AudioError> {
            if p.ends_with("hum.wav") {
                Ok(tone(32000, 32000, 97.0))
            } else {
                let i: usize = p.to_str().unwrap()[6..].parse().unwrap();
                Ok(tone(((0.2 + 0.06 * i as f64) * 32000.0) as usize, 32000, 300.0 + 50.0 * i as f64))
            }
        };
        let plan = BuildPlan {
            manifest: m,
            lengths,
            candidates,
            noise_library: [("hum".to_string(), PathBuf::from("noise/hum.wav"))].into(),
            seed: 7,
            output_dir: dir.path().to_path_buf(),
            options: BuildOptions::default(),
        };
        let report = build_dataset(&plan, &source).unwrap();
        assert_eq!(report.pairs_written, 4);
        assert!(report.failures.is_empty());
        let log = parse_build_log(&fs::read_to_string(dir.path().join(BUILD_LOG)).unwrap()).unwrap();
        assert_eq!(log, report.log);
        let noise = resample(&source(Path::new("noise/hum.wav")).unwrap(), 16000).unwrap();
        for r in &log {
            let clean = read_wav(dir.path().join("clean").join(format!("{}.wav", r.clean_id))).unwrap();
            let noisy = read_wav(dir.path().join("noisy").join(format!("{}.wav", r.clean_id))).unwrap();
            assert_eq!(clean.len(), plan.lengths[&r.clean_id].samples_at(16000));
            assert_eq!(replay_entry(&clean, &noise, r).unwrap(), noisy);
        }
    }

    #[test]
    fn per_entry_failures_are_reported() {
        let dir = tempfile::tempdir().unwrap();
        let mut m = manifest(3);
        m[1].noise_id = "missing".into();
        let lengths: HashMap<_, _> = m
            .iter()
            .map(|e| (e.clean_id.clone(), TargetLength { seconds: 0.2, samples: 9600 }))
            .collect();
        let candidates = vec![CandidateRecord {
            clip_id: "only".into(),
            path: "only".into(),
            duration_s: 0.2,
            prompt_word_count: 2,
            validated: true,
            estimated_snr_db: None,
        }];
        let source = |_: &Path| -> Result<AudioBuffer, AudioError> { Ok(tone(16000, 16000, 200.0)) };
        let plan = BuildPlan {
            manifest: m,
            lengths,
            candidates,
            noise_library: [("hum".to_string(), PathBuf::from("hum.wav"))].into(),
            seed: 1,
            output_dir: dir.path().to_path_buf(),
            options: BuildOptions::default(),
        };
        let report = build_dataset(&plan, &source).unwrap();
        assert_eq!(report.pairs_written, 1);
        assert_eq!(report.shortfall, 1);
        let failed: Vec<(usize, &str)> = report.failures.iter().map(|f| (f.index, f.clean_id.as_str())).collect();
        assert_eq!(failed, vec![(1, "u001"), (2, "u002")]);
        assert!(report.failures[0].message.contains("missing"));
        assert!(report.failures[1].message.contains("exhausted"));
    }

    #[test]
    fn noise_library_lists_wavs() {
        let dir = tempfile::tempdir().unwrap();
        for name in ["bus.wav", "cafe.WAV", "notes.txt"] {
            fs::write(dir.path().join(name), b"").unwrap();
        }
        let lib = noise_library_from_dir(dir.path()).unwrap();
        assert_eq!(lib.keys().collect::<Vec<_>>(), vec!["bus", "cafe"]);
    }
}
