use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use anyhow::Context;
use noisemix_core::audio::{read_wav, resample, AudioBuffer, WavEncoding};
use noisemix_core::dataset::{
    build_dataset, noise_library_from_dir, parse_lengths, parse_manifest, BuildOptions, BuildPlan, FsSource,
    OutputRate, SnrSet,
};
use noisemix_core::features::{
    feature_encoder_forward, loss_fe, loss_spec_mse, read_container, si_sdr, stft, write_fixture, EncoderCheckpoint,
    StftConfig,
};
use noisemix_core::levels::EnergyVad;
use noisemix_core::screening::{
    parse_candidate_list, parse_pool, select_candidates, write_candidate_list, Screener, ScreeningRules,
};
use noisemix_core::tsv::Table;
use noisemix_core::NoisePowerEstimator;
use rayon::prelude::*;
use thiserror::Error;

use crate::config::{Config, ConfigError};

#[derive(Error, Debug)]
pub enum CommandError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("missing or unreadable input `{key}` ({path}): {message}")]
    Input { key: String, path: PathBuf, message: String },
    #[error(transparent)]
    Fatal(#[from] anyhow::Error),
}

/// What a command did: per-item failures and summary values.
#[derive(Debug, Default)]
pub struct Report {
    pub failures: Vec<String>,
    pub results: Vec<(String, String)>,
}

impl Report {
    fn result(&mut self, key: &str, value: impl ToString) {
        self.results.push((key.to_string(), value.to_string()));
    }
}

/// Reads the text file named by `key`; any problem is an input error.
fn read_input(cfg: &Config, key: &str) -> Result<(PathBuf, String), CommandError> {
    let path = cfg.path(key)?;
    let text = fs::read_to_string(&path).map_err(|e| CommandError::Input {
        key: key.to_string(),
        path: path.clone(),
        message: e.to_string(),
    })?;
    Ok((path, text))
}

fn bad_input(key: &str, path: &Path, e: impl ToString) -> CommandError {
    CommandError::Input {
        key: key.to_string(),
        path: path.to_path_buf(),
        message: e.to_string(),
    }
}

/// Relative paths inside a table are taken relative to the table's directory.
fn resolve(table_path: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        table_path.parent().unwrap_or(Path::new("")).join(p)
    }
}

fn create_parent(path: &Path) -> anyhow::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(())
}

fn vad(cfg: &Config) -> Result<EnergyVad, ConfigError> {
    let floor_percentile: f64 = cfg.parse("vad.floor_percentile")?;
    if !(0.0..=100.0).contains(&floor_percentile) {
        return Err(cfg.bad("vad.floor_percentile", "must lie in [0, 100]"));
    }
    Ok(EnergyVad {
        floor_percentile,
        threshold_db: cfg.parse("vad.threshold_db")?,
    })
}

pub fn screen(cfg: &Config) -> Result<Report, CommandError> {
    let quota: usize = cfg.parse("screen.quota")?;
    if quota == 0 {
        return Err(cfg.bad("screen.quota", "must be at least 1").into());
    }
    let rules = ScreeningRules {
        min_duration_s: cfg.parse("screen.min_duration_s")?,
        min_words: cfg.parse("screen.min_words")?,
        min_snr_db: cfg.parse("screen.min_snr_db")?,
        vad_frame_ms: cfg.parse("vad.frame_ms")?,
    };
    let screener = Screener::new(rules, vad(cfg)?);
    let out = cfg.path("screen.out")?;
    let (pool_path, text) = read_input(cfg, "screen.pool")?;
    let mut pool = parse_pool(&text).map_err(|e| bad_input("screen.pool", &pool_path, e))?;
    for e in &mut pool {
        e.path = resolve(&pool_path, &e.path);
    }

    let sel = select_candidates(&pool, quota, &screener, |e| read_wav(&e.path))
        .map_err(|e| bad_input("screen.pool", &pool_path, e))?;
    create_parent(&out)?;
    let mut file = fs::File::create(&out).with_context(|| format!("creating {}", out.display()))?;
    write_candidate_list(&sel.accepted, &mut file).with_context(|| format!("writing {}", out.display()))?;

    let mut report = Report::default();
    for (id, message) in &sel.failures {
        report.failures.push(format!("clip `{id}`: {message}"));
    }
    if sel.shortfall > 0 {
        report
            .failures
            .push(format!("pool exhausted {} clips short of the quota of {quota}", sel.shortfall));
    }
    report.result("accepted", sel.accepted.len());
    report.result("scanned", sel.scanned);
    report.result("shortfall", sel.shortfall);
    report.result("load_failures", sel.failures.len());
    let mut by_label = std::collections::BTreeMap::new();
    for (_, r) in &sel.rejected {
        *by_label.entry(r.label()).or_insert(0usize) += 1;
    }
    for (label, n) in by_label {
        report.result(&format!("rejected.{label}"), n);
    }
    Ok(report)
}

pub fn build(cfg: &Config) -> Result<Report, CommandError> {
    let output_rate = match cfg.get("audio.output_rate") {
        "native" => OutputRate::Native,
        _ => {
            let r: u32 = cfg.parse("audio.output_rate")?;
            if r == 0 {
                return Err(cfg.bad("audio.output_rate", "must be positive or `native`").into());
            }
            OutputRate::Fixed(r)
        }
    };
    let options = BuildOptions {
        output_rate,
        encoding: cfg.parse::<WavEncoding>("audio.encoding")?,
        noise_power: cfg.parse::<NoisePowerEstimator>("mixer.noise_power")?,
        validation_size: cfg.parse("build.validation_size")?,
    };
    let output_dir = cfg.path("build.out")?;
    let (manifest_path, text) = read_input(cfg, "build.manifest")?;
    let manifest = parse_manifest(&text).map_err(|e| bad_input("build.manifest", &manifest_path, e))?;
    let (lengths_path, text) = read_input(cfg, "build.lengths")?;
    let lengths = parse_lengths(&text).map_err(|e| bad_input("build.lengths", &lengths_path, e))?;
    let (cand_path, text) = read_input(cfg, "build.candidates")?;
    let mut candidates = parse_candidate_list(&text).map_err(|e| bad_input("build.candidates", &cand_path, e))?;
    for c in &mut candidates {
        c.path = resolve(&cand_path, &c.path);
    }
    let noise_dir = cfg.path("build.noise_dir")?;
    let noise_library = noise_library_from_dir(&noise_dir).map_err(|e| bad_input("build.noise_dir", &noise_dir, e))?;

    match SnrSet::classify(&manifest) {
        Some(set) => log::info!("manifest SNRs belong to the {set:?} grid"),
        None => log::info!("manifest SNRs do not match a reference grid"),
    }
    if options.validation_size > manifest.len() {
        return Err(cfg
            .bad("build.validation_size", format!("exceeds the {} manifest entries", manifest.len()))
            .into());
    }
    let plan = BuildPlan {
        manifest,
        lengths,
        candidates,
        noise_library,
        seed: cfg.parse("run.seed")?,
        output_dir,
        options,
    };
    let built = build_dataset(&plan, &FsSource).context("building the corpus")?;

    let mut report = Report::default();
    for f in &built.failures {
        report
            .failures
            .push(format!("entry {} `{}`: {}", f.index + 1, f.clean_id, f.message));
    }
    report.result("entries", built.entries);
    report.result("pairs_written", built.pairs_written);
    report.result("shortfall", built.shortfall);
    report.result("failures", built.failures.len());
    report.result("clipped_files", built.clipped_files);
    report.result("clipped_samples", built.clipped_samples);
    report.result("validation", built.validation.len());
    Ok(report)
}

fn load_weights(cfg: &Config, key: &str) -> Result<EncoderCheckpoint, CommandError> {
    let path = cfg.path(key)?;
    read_container(&path).map_err(|e| bad_input(key, &path, e))
}

/// Reads a WAV file and brings it to `rate`.
fn load_at(path: &Path, rate: u32) -> anyhow::Result<AudioBuffer> {
    let audio = read_wav(path).with_context(|| format!("reading {}", path.display()))?;
    if audio.sample_rate() == rate {
        return Ok(audio);
    }
    log::debug!("{}: resampling {} -> {rate} Hz", path.display(), audio.sample_rate());
    Ok(resample(&audio, rate)?)
}

fn fmt_metric(v: f64) -> String {
    if v.is_infinite() {
        if v > 0.0 { "inf" } else { "-inf" }.to_string()
    } else {
        v.to_string()
    }
}

pub fn eval(cfg: &Config) -> Result<Report, CommandError> {
    let ckpt = load_weights(cfg, "eval.weights")?;
    let out = cfg.path("eval.out")?;
    let (pairs_path, text) = read_input(cfg, "eval.pairs")?;
    let table =
        Table::parse(&text, &["pair_id", "reference", "degraded"]).map_err(|e| bad_input("eval.pairs", &pairs_path, e))?;
    let pairs: Vec<(String, PathBuf, PathBuf)> = table
        .rows()
        .map(|r| {
            (
                r.get("pair_id").to_string(),
                resolve(&pairs_path, Path::new(r.get("reference"))),
                resolve(&pairs_path, Path::new(r.get("degraded"))),
            )
        })
        .collect();

    let rate = ckpt.spec.expected_input_rate;
    let rows: Vec<anyhow::Result<[f64; 3]>> = pairs
        .par_iter()
        .map(|(_, reference, degraded)| {
            let a = load_at(reference, rate)?;
            let b = load_at(degraded, rate)?;
            if a.len() != b.len() {
                anyhow::bail!("reference has {} samples, degraded {}", a.len(), b.len());
            }
            let fa = feature_encoder_forward(&a, &ckpt.spec, &ckpt.weights)?;
            let fb = feature_encoder_forward(&b, &ckpt.spec, &ckpt.weights)?;
            Ok([loss_fe(&fa, &fb)?, loss_spec_mse(&a, &b)?, si_sdr(&a, &b)?])
        })
        .collect();

    let mut report = Report::default();
    let mut table = String::from("pair_id\tloss_fe\tloss_spec_mse\tsi_sdr_db\n");
    for ((id, _, _), row) in pairs.iter().zip(rows) {
        match row {
            Ok([fe, spec, sdr]) => {
                table.push_str(&format!("{id}\t{}\t{}\t{}\n", fmt_metric(fe), fmt_metric(spec), fmt_metric(sdr)));
            }
            Err(e) => report.failures.push(format!("pair `{id}`: {e:#}")),
        }
    }
    create_parent(&out)?;
    fs::File::create(&out)
        .and_then(|mut f| f.write_all(table.as_bytes()))
        .with_context(|| format!("writing {}", out.display()))?;
    report.result("pairs", pairs.len());
    report.result("evaluated", pairs.len() - report.failures.len());
    report.result("failures", report.failures.len());
    Ok(report)
}

pub fn feats(cfg: &Config) -> Result<Report, CommandError> {
    let input = cfg.path("feats.input")?;
    let out = cfg.path("feats.out")?;
    let map = match cfg.get("feats.kind") {
        "encoder" => {
            let ckpt = load_weights(cfg, "feats.weights")?;
            let audio = load_at(&input, ckpt.spec.expected_input_rate).map_err(|e| bad_input("feats.input", &input, format!("{e:#}")))?;
            feature_encoder_forward(&audio, &ckpt.spec, &ckpt.weights).context("running the encoder")?
        }
        "stft" => {
            let audio = read_wav(&input).map_err(|e| bad_input("feats.input", &input, e))?;
            stft(&audio, &StftConfig::speech(audio.sample_rate()))
                .context("computing the STFT")?
                .magnitude()
        }
        _ => return Err(cfg.bad("feats.kind", "expected `encoder` or `stft`").into()),
    };
    create_parent(&out)?;
    write_fixture(map.values(), &out).context("writing features")?;
    let mut report = Report::default();
    report.result("frames", map.frames());
    report.result("features", map.features());
    report.result("frame_rate", map.frame_rate());
    Ok(report)
}
