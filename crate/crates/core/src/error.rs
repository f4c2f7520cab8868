use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CodeError {
    #[error("code {code:?} has {len} characters, expected 5")]
    Length { code: String, len: usize },
    #[error("code {code:?} contains invalid character {found:?}")]
    Character { code: String, found: char },
    #[error("code {0:?} has no non-dot character")]
    Empty(String),
    #[error("code {0:?} has a dot before its last significant character")]
    InteriorDot(String),
}

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}:{line}: column {column:?}: {message}")]
    Row {
        path: PathBuf,
        line: u64,
        column: String,
        message: String,
    },
    #[error("{path}: missing or unexpected header, expected {expected:?}")]
    Header { path: PathBuf, expected: String },
    #[error("{path}:{line}: patient {patient_id} is not in the patient table")]
    DanglingPatient {
        path: PathBuf,
        line: u64,
        patient_id: u64,
    },
    #[error("{path}:{line}: duplicate patient {patient_id}")]
    DuplicatePatient {
        path: PathBuf,
        line: u64,
        patient_id: u64,
    },
    #[error("spontaneous-report year {0} supplied more than once")]
    DuplicateYear(i32),
    #[error("{path}: {source}")]
    Csv {
        path: PathBuf,
        #[source]
        source: csv::Error,
    },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("invalid generator config: {0}")]
    Generator(String),
    #[error("invalid pipeline config: {0}")]
    Pipeline(String),
    #[error("invalid feature mask {0:?}")]
    FeatureMask(String),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error("group total is zero")]
    EmptyGroup,
    #[error("{with_event} events exceeds group size {total}")]
    CountExceedsTotal { with_event: u64, total: u64 },
    #[error("every exposed patient had the outcome; odds are infinite")]
    InfiniteOdds,
    #[error("no exposed patients for {drug}")]
    NoExposed { drug: String },
    #[error("no comparator patients for {drug}")]
    NoComparator { drug: String },
    #[error("no exposed patients with {code} after {drug}")]
    NoAffected { drug: String, code: String },
    #[error("no exposed patients for {drug} once same-family prescriptions are removed")]
    NoExposedAfterFamilyFilter { drug: String },
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LearnError {
    #[error("need both classes, found {positives} positive and {negatives} negative examples")]
    SingleClass { positives: usize, negatives: usize },
    #[error("need at least {needed} examples, found {found}")]
    TooFew { needed: usize, found: usize },
    #[error("feature vector has length {found}, expected {expected}")]
    FeatureLength { expected: usize, found: usize },
    #[error("feature mask selects no features")]
    EmptyMask,
    #[error("invalid split config: {0}")]
    Split(String),
    #[error("cannot build {folds} stratified folds from {positives} positive / {negatives} negative examples")]
    Folds {
        folds: usize,
        positives: usize,
        negatives: usize,
    },
    #[error("model file: {0}")]
    ModelFile(String),
    #[error(transparent)]
    Eval(#[from] EvalError),
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("scores and labels differ in length ({scores} vs {labels})")]
    LengthMismatch { scores: usize, labels: usize },
    #[error("no positive examples")]
    NoPositives,
    #[error("no negative examples")]
    NoNegatives,
    #[error("invalid specificity range [{lo}, {hi}]")]
    SpecificityRange { lo: f64, hi: f64 },
    #[error("DeLong variance is zero but AUCs differ ({auc_a} vs {auc_b})")]
    DegenerateVariance { auc_a: f64, auc_b: f64 },
}

/// Any failure of the end-to-end pipeline, tagged with the stage that raised it.
#[derive(Debug, Error)]
pub enum PipelineError {
    #[error("stage {stage}: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<dyn std::error::Error + Send + Sync>,
    },
    #[error(transparent)]
    Config(#[from] ConfigError),
}

impl PipelineError {
    pub fn stage<E>(stage: &'static str) -> impl FnOnce(E) -> PipelineError
    where
        E: std::error::Error + Send + Sync + 'static,
    {
        move |e| PipelineError::Stage {
            stage,
            source: Box::new(e),
        }
    }
}
