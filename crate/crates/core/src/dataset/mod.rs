//! Corpus construction from a reference manifest: each manifest entry gets the
//! unused candidate closest in length, fitted to the exact target sample
//! count and mixed with a seeded random excerpt of the named noise.

mod builder;
mod manifest;
mod pool;
mod rng;

use thiserror::Error;

use crate::audio::AudioError;
use crate::screening::ScreenError;
use crate::tsv::TsvError;

pub use builder::{
    build_dataset, noise_library_from_dir, parse_build_log, replay_entry, split_validation, AudioSource,
    BuildOptions, BuildPlan, BuildReport, EntryFailure, FsSource, LogRecord, OutputRate, BUILD_LOG,
    VALIDATION_LIST,
};
pub use manifest::{parse_lengths, parse_manifest, ManifestEntry, SnrSet, TargetLength};
pub use pool::{match_candidate, CandidatePool};
pub use rng::SplitMix64;

#[derive(Error, Debug)]
pub enum DatasetError {
    #[error("manifest line {line}: {message}")]
    Manifest { line: usize, message: String },
    #[error(transparent)]
    Table(#[from] TsvError),
    #[error(transparent)]
    Candidates(#[from] ScreenError),
    #[error("duplicate candidate clip_id `{0}`")]
    DuplicateCandidate(String),
    #[error("candidate pool exhausted")]
    PoolExhausted,
    #[error("validation split of {requested} exceeds manifest of {available}")]
    SplitTooLarge { requested: usize, available: usize },
    #[error(transparent)]
    Audio(#[from] AudioError),
    #[error("{path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}
