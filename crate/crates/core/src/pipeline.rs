//! End-to-end orchestration: load or generate data, mine and label pairs,
//! extract features, train, evaluate and write the artifacts.
//!
//! Every stage reads only the files written by the stage before it, so a run
//! can resume from `pairs.csv` or `features.csv`.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, IngestError, LearnError, PipelineError};
use crate::eval::{self, DelongResult, EvaluationReport, DEFAULT_THRESHOLD};
use crate::features::consistency::attach_consistency;
use crate::features::longitudinal::{extract_longitudinal, ComparatorStrategy, DroppedPair, LongitudinalExtractor};
use crate::features::{self, CONSISTENCY_INDEX};
use crate::index::CohortIndex;
use crate::ingest::{self, DataPaths, LabelSource, SrsCorpus};
use crate::learn::{self, FeatureMask, LabeledExample, ModelKind, SplitConfig, TrainConfig, TrainedModel};
use crate::model::CohortDataset;
use crate::pairs::{self, DrugEventPair, Label};
use crate::syndata::{self, GeneratorConfig};

pub const PAIRS_FILE: &str = "pairs.csv";
pub const FEATURES_FILE: &str = "features.csv";
pub const SCORES_FILE: &str = "scores.csv";
pub const ROC_FILE: &str = "roc.csv";
pub const REPORT_FILE: &str = "report.txt";
pub const COMPARISON_FILE: &str = "comparison.txt";
pub const MODEL_FILE: &str = "model.json";
/// Sub-directory of the output that receives generated data.
pub const GENERATED_DIR: &str = "data";

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SrsInput {
    pub year: i32,
    pub path: PathBuf,
}

/// Locations of the input tables. Any file not named explicitly is looked up
/// in `dir` under its standard name; report files default to every
/// `srs_<year>.csv` in `dir`.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct InputConfig {
    pub dir: Option<PathBuf>,
    pub patient: Option<PathBuf>,
    pub medical: Option<PathBuf>,
    pub therapy: Option<PathBuf>,
    pub side_effects: Option<PathBuf>,
    pub non_adverse_roots: Option<PathBuf>,
    pub srs: Vec<SrsInput>,
}

impl InputConfig {
    pub fn from_dir(dir: impl Into<PathBuf>) -> Self {
        InputConfig {
            dir: Some(dir.into()),
            ..Default::default()
        }
    }

    pub fn resolve(&self) -> Result<(DataPaths, Vec<(i32, PathBuf)>), PipelineError> {
        let defaults = self.dir.as_deref().map(DataPaths::in_dir);
        let pick = |explicit: &Option<PathBuf>, default: Option<&PathBuf>, name: &str| {
            explicit
                .clone()
                .or_else(|| default.cloned())
                .ok_or_else(|| ConfigError::Pipeline(format!("input.{name} is not set and input.dir is missing")))
        };
        let d = defaults.as_ref();
        let paths = DataPaths {
            patient: pick(&self.patient, d.map(|d| &d.patient), "patient")?,
            medical: pick(&self.medical, d.map(|d| &d.medical), "medical")?,
            therapy: pick(&self.therapy, d.map(|d| &d.therapy), "therapy")?,
            side_effects: pick(&self.side_effects, d.map(|d| &d.side_effects), "side_effects")?,
            non_adverse_roots: pick(&self.non_adverse_roots, d.map(|d| &d.non_adverse_roots), "non_adverse_roots")?,
        };
        let srs = if !self.srs.is_empty() {
            self.srs.iter().map(|s| (s.year, s.path.clone())).collect()
        } else if let Some(dir) = &self.dir {
            ingest::srs_paths_in_dir(dir).map_err(PipelineError::stage("ingest"))?
        } else {
            Vec::new()
        };
        Ok((paths, srs))
    }

    fn rebase(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [
            &mut self.dir,
            &mut self.patient,
            &mut self.medical,
            &mut self.therapy,
            &mut self.side_effects,
            &mut self.non_adverse_roots,
        ]
        .into_iter()
        .flatten()
        {
            fix(p);
        }
        for s in &mut self.srs {
            fix(&mut s.path);
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: f64,
    pub folds: usize,
    pub stratified: bool,
}

impl Default for SplitSection {
    fn default() -> Self {
        let d = SplitConfig::default();
        SplitSection {
            train_fraction: d.train_fraction,
            folds: d.folds,
            stratified: d.stratified,
        }
    }
}

/// Run configuration, normally read from a TOML file. Exactly one of
/// `[input]` and `[generator]` must be present. The top-level seed drives the
/// split and the model; the generator keeps its own seed.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    pub output: PathBuf,
    /// Drugs to mine; empty means every drug in the therapy table.
    pub drugs: Vec<String>,
    pub model: ModelKind,
    pub feature_mask: FeatureMask,
    /// Also train without x11 and compare the two on the validation set.
    pub compare_masks: bool,
    pub threshold: f64,
    pub comparator: ComparatorStrategy,
    pub split: SplitSection,
    pub input: Option<InputConfig>,
    pub generator: Option<GeneratorConfig>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            seed: 1,
            output: PathBuf::from("output"),
            drugs: Vec::new(),
            model: ModelKind::LogisticRegression,
            feature_mask: FeatureMask::all(),
            compare_masks: true,
            threshold: DEFAULT_THRESHOLD,
            comparator: ComparatorStrategy::default(),
            split: SplitSection::default(),
            input: None,
            generator: None,
        }
    }
}

impl PipelineConfig {
    pub fn with_generator(generator: GeneratorConfig) -> Self {
        PipelineConfig {
            generator: Some(generator),
            ..Default::default()
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Pipeline(e.to_string()))
    }

    /// Parses the file; relative input paths are taken relative to the file.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::Pipeline(format!("{}: {e}", path.display())))?;
        let mut config = Self::from_toml_str(&text)?;
        if let (Some(input), Some(base)) = (config.input.as_mut(), path.parent()) {
            input.rebase(base);
        }
        Ok(config)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serialises")
    }

    pub fn split_config(&self) -> SplitConfig {
        SplitConfig {
            train_fraction: self.split.train_fraction,
            folds: self.split.folds,
            seed: self.seed,
            stratified: self.split.stratified,
        }
    }

    pub fn train_config(&self, mask: FeatureMask) -> TrainConfig {
        TrainConfig {
            model_kind: self.model,
            feature_mask: mask,
            folds: self.split.folds,
            seed: self.seed,
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        match (&self.input, &self.generator) {
            (Some(_), Some(_)) => {
                return Err(ConfigError::Pipeline(
                    "give either [input] or [generator], not both".into(),
                ))
            }
            (None, None) => return Err(ConfigError::Pipeline("one of [input] or [generator] is required".into())),
            (None, Some(g)) => g.validate()?,
            (Some(_), None) => {}
        }
        self.split_config()
            .validate()
            .map_err(|e| ConfigError::Pipeline(e.to_string()))?;
        if !(0.0..=1.0).contains(&self.threshold) {
            return Err(ConfigError::Pipeline(format!("threshold {} is outside [0, 1]", self.threshold)));
        }
        if self.feature_mask.count() == 0 {
            return Err(ConfigError::FeatureMask(self.feature_mask.to_string()));
        }
        Ok(())
    }
}

/// Registration-filtered cohort, labels and report corpus.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct LoadedData {
    pub dataset: CohortDataset,
    pub labels: LabelSource,
    pub corpus: SrsCorpus,
}

pub fn load_inputs(paths: &DataPaths, srs: &[(i32, PathBuf)]) -> Result<LoadedData, IngestError> {
    let raw = ingest::load_cohort(&paths.patient, &paths.medical, &paths.therapy)?;
    let labels = ingest::load_labels(&paths.side_effects, &paths.non_adverse_roots)?;
    let corpus = ingest::load_srs(srs)?;
    Ok(LoadedData {
        dataset: ingest::apply_registration_filter(&raw),
        labels,
        corpus,
    })
}

/// Reads the configured input, or generates data into `<output>/data` first
/// and then reads it back.
pub fn load_data(config: &PipelineConfig) -> Result<LoadedData, PipelineError> {
    config.validate()?;
    let (paths, srs) = match (&config.input, &config.generator) {
        (Some(input), _) => input.resolve()?,
        (None, Some(generator)) => {
            let dir = config.output.join(GENERATED_DIR);
            generate_to(generator, &dir)?;
            InputConfig::from_dir(dir).resolve()?
        }
        (None, None) => unreachable!("validated"),
    };
    let data = load_inputs(&paths, &srs).map_err(PipelineError::stage("ingest"))?;
    log::info!(
        "loaded {} patients, {} medical and {} therapy records after the registration filter; {} report years",
        data.dataset.patients.len(),
        data.dataset.medical.len(),
        data.dataset.therapy.len(),
        data.corpus.years.len()
    );
    Ok(data)
}

pub fn generate_to(generator: &GeneratorConfig, dir: &Path) -> Result<DataPaths, PipelineError> {
    let generated = syndata::generate(generator)?;
    syndata::write_generated(&generated, dir).map_err(PipelineError::stage("generate"))
}

fn drug_list(config: &PipelineConfig, dataset: &CohortDataset) -> Vec<String> {
    if config.drugs.is_empty() {
        dataset.drug_names()
    } else {
        config.drugs.clone()
    }
}

/// Candidates, temporal filter and labels; unknown-label pairs are dropped.
pub fn mine_pairs(index: &CohortIndex, labels: &LabelSource, drugs: &[String]) -> Vec<DrugEventPair> {
    let candidates = pairs::generate_candidates_indexed(index, drugs);
    let n_candidates = candidates.len();
    let kept = pairs::filter_candidates(candidates);
    let n_kept = kept.len();
    let labelled = pairs::label_pairs(kept, labels);
    log::info!(
        "{n_candidates} candidate pairs, {n_kept} after the temporal filter, {} labelled",
        labelled.len()
    );
    labelled
}

/// x1 to x10 from the cohort and x11 from the reports.
pub fn extract_features(
    index: CohortIndex,
    pairs: Vec<DrugEventPair>,
    corpus: &SrsCorpus,
    comparator: ComparatorStrategy,
) -> (Vec<DrugEventPair>, Vec<DroppedPair>) {
    let extractor = LongitudinalExtractor::from_index(index, comparator);
    let (mut kept, dropped) = extract_longitudinal(&extractor, pairs);
    attach_consistency(&mut kept, corpus);
    (kept, dropped)
}

/// Pair counts per (label, x11).
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConsistencyDistribution {
    /// label value -> x11 -> count
    pub counts: BTreeMap<i8, BTreeMap<u32, u64>>,
}

impl ConsistencyDistribution {
    pub fn max_x11(&self) -> u32 {
        self.counts
            .values()
            .flat_map(|row| row.keys().copied())
            .max()
            .unwrap_or(0)
    }

    pub fn count(&self, label: i8, x11: u32) -> u64 {
        self.counts.get(&label).and_then(|r| r.get(&x11)).copied().unwrap_or(0)
    }

    pub fn mean_x11(&self, label: i8) -> Option<f64> {
        let row = self.counts.get(&label)?;
        let n: u64 = row.values().sum();
        (n > 0).then(|| row.iter().map(|(&k, &c)| f64::from(k) * c as f64).sum::<f64>() / n as f64)
    }

    pub fn to_table(&self) -> String {
        let max = self.max_x11();
        let mut out = String::from("label");
        for k in 0..=max {
            let _ = write!(out, "\tx11={k}");
        }
        out.push('\n');
        for &label in self.counts.keys() {
            let _ = write!(out, "{label}");
            for k in 0..=max {
                let _ = write!(out, "\t{}", self.count(label, k));
            }
            out.push('\n');
        }
        out
    }
}

pub fn consistency_distribution(pairs: &[DrugEventPair]) -> ConsistencyDistribution {
    let mut d = ConsistencyDistribution::default();
    for p in pairs {
        if p.label == Label::Unknown {
            continue;
        }
        let Some(x) = p.features else { continue };
        *d.counts
            .entry(p.label.value())
            .or_default()
            .entry(x[CONSISTENCY_INDEX] as u32)
            .or_default() += 1;
    }
    d
}

/// Examples and their pairs, in pair order.
fn labelled_examples(pairs: &[DrugEventPair]) -> (Vec<LabeledExample>, Vec<&DrugEventPair>) {
    let (examples, positions) = learn::examples_from_pairs(pairs);
    (examples, positions.into_iter().map(|i| &pairs[i]).collect())
}

/// Validation-set scores for one model.
#[derive(Clone, Debug, PartialEq)]
pub struct ScoredModel {
    pub model: TrainedModel,
    pub scores: Vec<f64>,
    pub report: EvaluationReport,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MaskComparison {
    pub full: ScoredModel,
    pub masked: ScoredModel,
    pub delong: DelongResult,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub n_train: usize,
    pub validation_pairs: Vec<DrugEventPair>,
    pub validation_labels: Vec<bool>,
    pub primary: ScoredModel,
    pub comparison: Option<MaskComparison>,
}

fn fit_and_score(
    train: &[LabeledExample],
    validation: &[LabeledExample],
    labels: &[bool],
    config: &TrainConfig,
    threshold: f64,
) -> Result<ScoredModel, LearnError> {
    let model = learn::train(train, config)?;
    score_with(model, validation, labels, threshold)
}

fn score_with(
    model: TrainedModel,
    validation: &[LabeledExample],
    labels: &[bool],
    threshold: f64,
) -> Result<ScoredModel, LearnError> {
    let scores = model.score_examples(validation);
    let report = eval::evaluate(&scores, labels, threshold)?;
    Ok(ScoredModel { model, scores, report })
}

/// Split, train the configured model and score the validation set. When
/// `compare_masks` is set the x11-free model is trained on the same split
/// and compared with the DeLong test.
pub fn train_and_evaluate(pairs: &[DrugEventPair], config: &PipelineConfig) -> Result<Evaluation, PipelineError> {
    let (examples, owners) = labelled_examples(pairs);
    let (train_idx, val_idx) =
        learn::split_indices(&examples, &config.split_config()).map_err(PipelineError::stage("train"))?;
    let train: Vec<LabeledExample> = train_idx.iter().map(|&i| examples[i]).collect();
    let validation: Vec<LabeledExample> = val_idx.iter().map(|&i| examples[i]).collect();
    let labels: Vec<bool> = validation.iter().map(|e| e.label).collect();
    let primary = fit_and_score(&train, &validation, &labels, &config.train_config(config.feature_mask), config.threshold)
        .map_err(PipelineError::stage("train"))?;
    let comparison = if config.compare_masks {
        let full = if config.feature_mask == FeatureMask::all() {
            primary.clone()
        } else {
            fit_and_score(&train, &validation, &labels, &config.train_config(FeatureMask::all()), config.threshold)
                .map_err(PipelineError::stage("compare"))?
        };
        let masked = fit_and_score(
            &train,
            &validation,
            &labels,
            &config.train_config(FeatureMask::without_consistency()),
            config.threshold,
        )
        .map_err(PipelineError::stage("compare"))?;
        let delong = eval::delong_compare(&full.scores, &masked.scores, &labels).map_err(PipelineError::stage("compare"))?;
        Some(MaskComparison { full, masked, delong })
    } else {
        None
    };
    Ok(Evaluation {
        n_train: train.len(),
        validation_pairs: val_idx.iter().map(|&i| owners[i].clone()).collect(),
        validation_labels: labels,
        primary,
        comparison,
    })
}

/// Re-creates the configured split and scores the validation part with an
/// already trained model.
pub fn evaluate_model(pairs: &[DrugEventPair], model: TrainedModel, config: &PipelineConfig) -> Result<Evaluation, PipelineError> {
    let (examples, owners) = labelled_examples(pairs);
    let (train_idx, val_idx) =
        learn::split_indices(&examples, &config.split_config()).map_err(PipelineError::stage("evaluate"))?;
    let validation: Vec<LabeledExample> = val_idx.iter().map(|&i| examples[i]).collect();
    let labels: Vec<bool> = validation.iter().map(|e| e.label).collect();
    let primary = score_with(model, &validation, &labels, config.threshold).map_err(PipelineError::stage("evaluate"))?;
    Ok(Evaluation {
        n_train: train_idx.len(),
        validation_pairs: val_idx.iter().map(|&i| owners[i].clone()).collect(),
        validation_labels: labels,
        primary,
        comparison: None,
    })
}

pub fn write_scores_csv(evaluation: &Evaluation, path: &Path) -> Result<(), IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = ingest::csv_writer(path)?;
    w.write_record(["drug_name", "code", "label", "score"]).map_err(csv_err)?;
    for ((p, &y), s) in evaluation
        .validation_pairs
        .iter()
        .zip(&evaluation.validation_labels)
        .zip(&evaluation.primary.scores)
    {
        w.write_record([
            p.drug_name.clone(),
            p.outcome.code.to_string(),
            u8::from(y).to_string(),
            s.to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn describe_model(out: &mut String, m: &ScoredModel) {
    let r = &m.report;
    let _ = writeln!(out, "model: {} (features {})", m.model.model_kind, m.model.feature_mask);
    let _ = writeln!(out, "hyperparameters: {:?}", m.model.hyperparameters);
    let _ = writeln!(out, "cross-validated AUC: {:.4}", m.model.cv_auc);
    let _ = writeln!(out, "AUC: {:.4}", r.auc);
    let _ = writeln!(out, "pAUC (specificity 0.8-1): {:.4}", r.pauc);
    let c = r.confusion;
    let _ = writeln!(
        out,
        "confusion at {}: TP {} TN {} FP {} FN {}",
        r.threshold, c.tp, c.tn, c.fp, c.fn_
    );
    let _ = writeln!(out, "sensitivity: {:.4}", r.sensitivity);
    let _ = writeln!(out, "specificity: {:.4}", r.specificity);
}

pub fn comparison_text(c: &MaskComparison) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "features      AUC     pAUC");
    let _ = writeln!(
        out,
        "{:<12}  {:.4}  {:.4}",
        c.full.model.feature_mask.to_string(),
        c.full.report.auc,
        c.full.report.pauc
    );
    let _ = writeln!(
        out,
        "{:<12}  {:.4}  {:.4}",
        c.masked.model.feature_mask.to_string(),
        c.masked.report.auc,
        c.masked.report.pauc
    );
    let _ = writeln!(
        out,
        "DeLong z = {:.4}, p = {:.4}{}",
        c.delong.z,
        c.delong.p_value,
        if c.delong.significant() { " (significant at 5%)" } else { "" }
    );
    out
}

/// Human-readable summary; `dropped` is the extraction drop count when known.
pub fn report_text(pairs: &[DrugEventPair], dropped: Option<usize>, evaluation: &Evaluation) -> String {
    let mut out = String::new();
    let positives = pairs.iter().filter(|p| p.label == Label::Adr).count();
    let _ = write!(
        out,
        "pairs with features: {} ({} known reactions, {} non-adverse)",
        pairs.len(),
        positives,
        pairs.len() - positives
    );
    match dropped {
        Some(n) => {
            let _ = writeln!(out, "; dropped during extraction: {n}");
        }
        None => out.push('\n'),
    }
    let n_val = evaluation.validation_labels.len();
    let val_pos = evaluation.validation_labels.iter().filter(|&&y| y).count();
    let _ = writeln!(
        out,
        "training examples: {}; validation examples: {} ({} positive)",
        evaluation.n_train, n_val, val_pos
    );
    out.push('\n');
    describe_model(&mut out, &evaluation.primary);
    out.push_str("\nconsistency distribution (rows: label, columns: x11)\n");
    out.push_str(&consistency_distribution(pairs).to_table());
    if let Some(c) = &evaluation.comparison {
        out.push_str("\nwith and without x11 on the validation set\n");
        out.push_str(&comparison_text(c));
    }
    out
}

/// Paths and headline numbers of a finished run.
#[derive(Clone, Debug, PartialEq)]
pub struct PipelineOutcome {
    pub output: PathBuf,
    pub n_pairs: usize,
    pub dropped: usize,
    pub evaluation: Evaluation,
    pub report: String,
}

impl PipelineOutcome {
    pub fn auc(&self) -> f64 {
        self.evaluation.primary.report.auc
    }
}

/// Runs every stage in order, writing each artifact as soon as it is ready.
pub fn run_pipeline(config: &PipelineConfig) -> Result<PipelineOutcome, PipelineError> {
    config.validate()?;
    let out = &config.output;
    create_output(config)?;
    let data = load_data(config)?;
    let index = CohortIndex::new(&data.dataset);
    let drugs = drug_list(config, &data.dataset);
    let pairs = mine_pairs(&index, &data.labels, &drugs);
    pairs::write_pairs_csv(&pairs, &out.join(PAIRS_FILE)).map_err(PipelineError::stage("pairs"))?;

    let (pairs, dropped) = extract_features(index, pairs, &data.corpus, config.comparator);
    features::write_features_csv(&pairs, &out.join(FEATURES_FILE)).map_err(PipelineError::stage("features"))?;

    let evaluation = train_and_evaluate(&pairs, config)?;
    evaluation
        .primary
        .model
        .save(&out.join(MODEL_FILE))
        .map_err(PipelineError::stage("train"))?;
    let report = write_evaluation(out, &pairs, Some(dropped.len()), &evaluation)?;
    Ok(PipelineOutcome {
        output: out.clone(),
        n_pairs: pairs.len(),
        dropped: dropped.len(),
        evaluation,
        report,
    })
}

/// Writes scores, ROC points, the report and, when present, the mask
/// comparison. Returns the report text.
fn write_evaluation(
    out: &Path,
    pairs: &[DrugEventPair],
    dropped: Option<usize>,
    evaluation: &Evaluation,
) -> Result<String, PipelineError> {
    write_scores_csv(evaluation, &out.join(SCORES_FILE)).map_err(PipelineError::stage("evaluate"))?;
    evaluation
        .primary
        .report
        .roc
        .write_csv(&out.join(ROC_FILE))
        .map_err(PipelineError::stage("evaluate"))?;
    if let Some(c) = &evaluation.comparison {
        ingest::write_text(&out.join(COMPARISON_FILE), &comparison_text(c)).map_err(PipelineError::stage("compare"))?;
    }
    let report = report_text(pairs, dropped, evaluation);
    ingest::write_text(&out.join(REPORT_FILE), &report).map_err(PipelineError::stage("evaluate"))?;
    Ok(report)
}

fn create_output(config: &PipelineConfig) -> Result<(), PipelineError> {
    std::fs::create_dir_all(&config.output)
        .map_err(|source| IngestError::Io {
            path: config.output.clone(),
            source,
        })
        .map_err(PipelineError::stage("output"))
}

/// Stage `generate`: writes the configured synthetic data into `dir`.
pub fn stage_generate(config: &PipelineConfig, dir: &Path) -> Result<DataPaths, PipelineError> {
    let generator = config.generator.clone().unwrap_or_default();
    generate_to(&generator, dir)
}

/// Stage `pairs`: mines labelled pairs and writes `pairs.csv`.
pub fn stage_pairs(config: &PipelineConfig) -> Result<Vec<DrugEventPair>, PipelineError> {
    create_output(config)?;
    let data = load_data(config)?;
    let index = CohortIndex::new(&data.dataset);
    let pairs = mine_pairs(&index, &data.labels, &drug_list(config, &data.dataset));
    pairs::write_pairs_csv(&pairs, &config.output.join(PAIRS_FILE)).map_err(PipelineError::stage("pairs"))?;
    Ok(pairs)
}

/// Stage `features`: reads `pairs.csv`, extracts x1 to x11 and writes
/// `features.csv`.
pub fn stage_features(config: &PipelineConfig) -> Result<(Vec<DrugEventPair>, Vec<DroppedPair>), PipelineError> {
    let data = load_data(config)?;
    let index = CohortIndex::new(&data.dataset);
    let pairs = pairs::read_pairs_csv(&config.output.join(PAIRS_FILE), index.code_book())
        .map_err(PipelineError::stage("features"))?;
    let (pairs, dropped) = extract_features(index, pairs, &data.corpus, config.comparator);
    features::write_features_csv(&pairs, &config.output.join(FEATURES_FILE))
        .map_err(PipelineError::stage("features"))?;
    Ok((pairs, dropped))
}

fn read_features(config: &PipelineConfig, stage: &'static str) -> Result<Vec<DrugEventPair>, PipelineError> {
    let data = load_data(config)?;
    features::read_features_csv(&config.output.join(FEATURES_FILE), &data.dataset.code_book())
        .map_err(PipelineError::stage(stage))
}

/// Stage `train`: reads `features.csv`, trains on the training split and
/// writes `model.json`.
pub fn stage_train(config: &PipelineConfig) -> Result<TrainedModel, PipelineError> {
    let pairs = read_features(config, "train")?;
    let (examples, _) = labelled_examples(&pairs);
    let (train_idx, _) = learn::split_indices(&examples, &config.split_config()).map_err(PipelineError::stage("train"))?;
    let train: Vec<LabeledExample> = train_idx.iter().map(|&i| examples[i]).collect();
    let model = learn::train(&train, &config.train_config(config.feature_mask)).map_err(PipelineError::stage("train"))?;
    model.save(&config.output.join(MODEL_FILE)).map_err(PipelineError::stage("train"))?;
    Ok(model)
}

/// Stage `evaluate`: scores the validation split with `model.json` and writes
/// scores, ROC points and the report.
pub fn stage_evaluate(config: &PipelineConfig) -> Result<Evaluation, PipelineError> {
    let pairs = read_features(config, "evaluate")?;
    let model = TrainedModel::load(&config.output.join(MODEL_FILE)).map_err(PipelineError::stage("evaluate"))?;
    let evaluation = evaluate_model(&pairs, model, config)?;
    write_evaluation(&config.output, &pairs, None, &evaluation)?;
    Ok(evaluation)
}

/// Stage `compare-masks`: trains with and without x11 on `features.csv` and
/// writes `comparison.txt` along with the evaluation files.
pub fn stage_compare(config: &PipelineConfig) -> Result<Evaluation, PipelineError> {
    let pairs = read_features(config, "compare")?;
    let config = PipelineConfig {
        compare_masks: true,
        ..config.clone()
    };
    let evaluation = train_and_evaluate(&pairs, &config)?;
    write_evaluation(&config.output, &pairs, None, &evaluation)?;
    Ok(evaluation)
}

/// Everything up to and including features, without writing files. Used by
/// tests and benches that only need the labelled feature vectors.
pub fn build_features(config: &PipelineConfig, data: &LoadedData) -> (Vec<DrugEventPair>, Vec<DroppedPair>) {
    let index = CohortIndex::new(&data.dataset);
    let drugs = drug_list(config, &data.dataset);
    let pairs = mine_pairs(&index, &data.labels, &drugs);
    extract_features(index, pairs, &data.corpus, config.comparator)
}

/// In-memory data for a generator config, as if written and read back.
pub fn generated_data(generator: &GeneratorConfig) -> Result<LoadedData, ConfigError> {
    let g = syndata::generate(generator)?;
    Ok(LoadedData {
        dataset: ingest::apply_registration_filter(&g.dataset),
        labels: g.truth.label_source(),
        corpus: g.corpus,
    })
}
