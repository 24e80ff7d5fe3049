//! Error types, one enum per pipeline stage.

use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TaxonomyError {
    #[error("unknown combo `{0}`")]
    UnknownCombo(String),
}

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file: {0}")]
    MissingFile(PathBuf),
    #[error("malformed manifest at line {line}: {message}")]
    MalformedManifest { line: usize, message: String },
    #[error("unsupported language `{0}`")]
    UnsupportedLanguage(String),
    #[error("empty corpus")]
    EmptyCorpus,
    #[error("parse failure: {0}")]
    ParseFailure(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum ObfuscateError {
    #[error("parse failure: {0}")]
    ParseFailure(String),
    #[error("hash collision renaming `{0}` after 4 salted retries")]
    HashCollision(String),
    #[error("variant `{variant}` unsupported for {language}")]
    VariantUnsupportedForLanguage { variant: String, language: String },
    #[error("model refused the request: {0}")]
    ModelRefusal(String),
    #[error("no fenced code block in model reply")]
    NoCodeBlock,
    #[error("no technique of combo `{combo}` applies to {language}")]
    AllTechniquesInapplicable { combo: String, language: String },
    #[error("nothing virtualizable")]
    NothingVirtualizable,
    #[error(transparent)]
    Detect(#[from] DetectError),
}

#[derive(Debug, Error)]
pub enum EquivalenceError {
    #[error("execution timed out after {0} s")]
    Timeout(u64),
    #[error("execution environment missing: {0}")]
    ExecutionEnvironmentMissing(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum DetectError {
    #[error("endpoint error after {attempts} attempts: {message}")]
    EndpointError { attempts: u32, message: String },
    #[error("cache miss in replay-only mode: {0}")]
    CacheMiss(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Error)]
pub enum JudgeError {
    #[error("judge reply unparseable: {0}")]
    JudgeReplyUnparseable(String),
    #[error(transparent)]
    Detect(#[from] DetectError),
}

#[derive(Debug, Error)]
pub enum MetricsError {
    #[error("empty input")]
    EmptyInput,
    #[error("unknown dimension `{0}`")]
    UnknownDimension(String),
}

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("invalid config: {0}")]
    Config(String),
    #[error("stage `{stage}` failed: {message}")]
    Stage { stage: &'static str, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PipelineError {
    pub fn stage(stage: &'static str, err: impl std::fmt::Display) -> Self {
        PipelineError::Stage {
            stage,
            message: err.to_string(),
        }
    }

    /// Exit code class for the CLI: each stage error family maps to a fixed code.
    pub fn exit_code(&self) -> i32 {
        match self {
            PipelineError::Config(_) => 2,
            PipelineError::Stage { stage, .. } => match *stage {
                "ingest" => 3,
                "obfuscate" => 4,
                "equivalence" => 5,
                "detect" => 6,
                "judge" => 7,
                "metrics" => 8,
                "emit" => 9,
                _ => 10,
            },
            PipelineError::Io(_) => 10,
        }
    }
}
