//! Stratified train/validation split, cross-validated model selection and scoring.

pub mod forest;
pub mod logistic;

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{ConfigError, LearnError};
use crate::eval;
use crate::features::{FeatureVector, CONSISTENCY_INDEX, FEATURE_COUNT};
use crate::pairs::{DrugEventPair, Label};

pub use forest::{ForestModel, ForestParams};
pub use logistic::LogisticModel;

pub const MODEL_FORMAT: &str = "hillsignal-model";
pub const MODEL_VERSION: u32 = 1;
pub const MIN_EXAMPLES: usize = 10;
pub const LAMBDA_GRID: [f64; 5] = [1e-4, 1e-3, 1e-2, 1e-1, 1.0];
pub const FOREST_GRID: [ForestParams; 4] = [
    ForestParams { trees: 50, max_depth: 4 },
    ForestParams { trees: 50, max_depth: 8 },
    ForestParams { trees: 150, max_depth: 4 },
    ForestParams { trees: 150, max_depth: 8 },
];
/// Features whose training spread is at or below this are left out of the model.
const CONSTANT_TOLERANCE: f64 = 1e-12;

/// Which of x1 to x11 a model may use. Serialised in the text form
/// accepted by [`FromStr`], e.g. `"1-10"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub struct FeatureMask(pub [bool; FEATURE_COUNT]);

impl TryFrom<String> for FeatureMask {
    type Error = ConfigError;

    fn try_from(s: String) -> Result<Self, Self::Error> {
        s.parse()
    }
}

impl From<FeatureMask> for String {
    fn from(m: FeatureMask) -> String {
        m.to_string()
    }
}

impl FeatureMask {
    pub fn all() -> Self {
        FeatureMask([true; FEATURE_COUNT])
    }

    /// x1 to x10.
    pub fn without_consistency() -> Self {
        let mut m = [true; FEATURE_COUNT];
        m[CONSISTENCY_INDEX] = false;
        FeatureMask(m)
    }

    pub fn selected(&self) -> Vec<usize> {
        (0..FEATURE_COUNT).filter(|&i| self.0[i]).collect()
    }

    pub fn count(&self) -> usize {
        self.0.iter().filter(|&&b| b).count()
    }
}

impl Default for FeatureMask {
    fn default() -> Self {
        Self::all()
    }
}

/// Accepts `all` or a comma list of 1-based feature numbers and ranges,
/// e.g. `1-10` or `1-4,6,11`.
impl FromStr for FeatureMask {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || ConfigError::FeatureMask(s.to_string());
        if s.trim().eq_ignore_ascii_case("all") {
            return Ok(Self::all());
        }
        let mut m = [false; FEATURE_COUNT];
        for part in s.split(',') {
            let part = part.trim();
            let (lo, hi) = match part.split_once('-') {
                Some((a, b)) => (a.trim(), b.trim()),
                None => (part, part),
            };
            let lo: usize = lo.parse().map_err(|_| bad())?;
            let hi: usize = hi.parse().map_err(|_| bad())?;
            if lo == 0 || hi > FEATURE_COUNT || lo > hi {
                return Err(bad());
            }
            for slot in &mut m[lo - 1..hi] {
                *slot = true;
            }
        }
        let mask = FeatureMask(m);
        if mask.count() == 0 {
            return Err(bad());
        }
        Ok(mask)
    }
}

impl fmt::Display for FeatureMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut parts = Vec::new();
        let mut i = 0;
        while i < FEATURE_COUNT {
            if !self.0[i] {
                i += 1;
                continue;
            }
            let start = i;
            while i + 1 < FEATURE_COUNT && self.0[i + 1] {
                i += 1;
            }
            parts.push(if start == i {
                format!("{}", start + 1)
            } else {
                format!("{}-{}", start + 1, i + 1)
            });
            i += 1;
        }
        f.write_str(&parts.join(","))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LabeledExample {
    pub features: FeatureVector,
    pub label: bool,
}

/// Examples for every labelled pair that carries features, with the positions
/// of those pairs in `pairs`.
pub fn examples_from_pairs(pairs: &[DrugEventPair]) -> (Vec<LabeledExample>, Vec<usize>) {
    let mut examples = Vec::new();
    let mut positions = Vec::new();
    for (i, p) in pairs.iter().enumerate() {
        let label = match p.label {
            Label::Adr => true,
            Label::NonAdr => false,
            Label::Unknown => continue,
        };
        if let Some(features) = p.features {
            examples.push(LabeledExample { features, label });
            positions.push(i);
        }
    }
    (examples, positions)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub train_fraction: f64,
    pub folds: usize,
    pub seed: u64,
    pub stratified: bool,
}

impl Default for SplitConfig {
    fn default() -> Self {
        SplitConfig {
            train_fraction: 0.8,
            folds: 10,
            seed: 1,
            stratified: true,
        }
    }
}

impl SplitConfig {
    pub fn validate(&self) -> Result<(), LearnError> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(LearnError::Split(format!(
                "train_fraction {} must lie strictly between 0 and 1",
                self.train_fraction
            )));
        }
        if self.folds < 2 {
            return Err(LearnError::Split(format!("folds {} must be at least 2", self.folds)));
        }
        Ok(())
    }
}

fn class_counts(labels: impl Iterator<Item = bool>) -> (usize, usize) {
    labels.fold((0, 0), |(p, n), y| if y { (p + 1, n) } else { (p, n + 1) })
}

/// Disjoint, exhaustive (train, validation) index sets, each sorted. With
/// stratification each class contributes `round(n_class * (1 - train_fraction))`
/// validation examples.
pub fn split_indices(examples: &[LabeledExample], config: &SplitConfig) -> Result<(Vec<usize>, Vec<usize>), LearnError> {
    config.validate()?;
    if examples.len() < MIN_EXAMPLES {
        return Err(LearnError::TooFew {
            needed: MIN_EXAMPLES,
            found: examples.len(),
        });
    }
    let (positives, negatives) = class_counts(examples.iter().map(|e| e.label));
    if positives == 0 || negatives == 0 {
        return Err(LearnError::SingleClass { positives, negatives });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let share = 1.0 - config.train_fraction;
    let groups: Vec<Vec<usize>> = if config.stratified {
        [true, false]
            .iter()
            .map(|&c| (0..examples.len()).filter(|&i| examples[i].label == c).collect())
            .collect()
    } else {
        vec![(0..examples.len()).collect()]
    };
    let mut train = Vec::new();
    let mut validation = Vec::new();
    for mut g in groups {
        g.shuffle(&mut rng);
        let k = (g.len() as f64 * share).round() as usize;
        validation.extend_from_slice(&g[..k]);
        train.extend_from_slice(&g[k..]);
    }
    train.sort_unstable();
    validation.sort_unstable();
    Ok((train, validation))
}

pub fn split_data(
    examples: &[LabeledExample],
    config: &SplitConfig,
) -> Result<(Vec<LabeledExample>, Vec<LabeledExample>), LearnError> {
    let (t, v) = split_indices(examples, config)?;
    Ok((t.iter().map(|&i| examples[i]).collect(), v.iter().map(|&i| examples[i]).collect()))
}

/// Stratified fold assignment; the fold count shrinks to the smaller class size.
pub fn stratified_folds(labels: &[bool], folds: usize, seed: u64) -> Result<Vec<usize>, LearnError> {
    let (positives, negatives) = class_counts(labels.iter().copied());
    let k = folds.min(positives).min(negatives);
    if k < 2 {
        return Err(LearnError::Folds {
            folds,
            positives,
            negatives,
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1);
    let mut assignment = vec![0; labels.len()];
    for c in [true, false] {
        let mut idx: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        idx.shuffle(&mut rng);
        for (j, i) in idx.into_iter().enumerate() {
            assignment[i] = j % k;
        }
    }
    Ok(assignment)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    #[default]
    #[serde(alias = "logistic")]
    LogisticRegression,
    #[serde(alias = "forest")]
    RandomForest,
}

impl FromStr for ModelKind {
    type Err = ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "logistic" | "logistic_regression" | "logistic-regression" => Ok(ModelKind::LogisticRegression),
            "forest" | "random_forest" | "random-forest" => Ok(ModelKind::RandomForest),
            other => Err(ConfigError::Pipeline(format!("unknown model {other:?}"))),
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::LogisticRegression => "logistic",
            ModelKind::RandomForest => "forest",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model_kind: ModelKind,
    pub feature_mask: FeatureMask,
    pub folds: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model_kind: ModelKind::LogisticRegression,
            feature_mask: FeatureMask::all(),
            folds: 10,
            seed: 1,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Hyperparameters {
    Logistic { lambda: f64 },
    Forest(ForestParams),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Fitted {
    Logistic(LogisticModel),
    Forest(ForestModel),
}

/// Standardisation and model over the active features (masked in, not
/// constant on the training data), in ascending feature order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FittedPipeline {
    pub active: Vec<usize>,
    pub means: Vec<f64>,
    pub scales: Vec<f64>,
    pub fitted: Fitted,
}

impl FittedPipeline {
    fn fit(
        examples: &[&FeatureVector],
        labels: &[bool],
        mask: &FeatureMask,
        hp: Hyperparameters,
        seed: u64,
    ) -> Self {
        let n = examples.len() as f64;
        let mut active = Vec::new();
        let mut means = Vec::new();
        let mut scales = Vec::new();
        for f in mask.selected() {
            let mean = examples.iter().map(|x| x[f]).sum::<f64>() / n;
            let var = examples.iter().map(|x| (x[f] - mean).powi(2)).sum::<f64>() / n;
            if var.sqrt() > CONSTANT_TOLERANCE {
                active.push(f);
                means.push(mean);
                scales.push(var.sqrt());
            }
        }
        let standardise = matches!(hp, Hyperparameters::Logistic { .. });
        let mut pipeline = FittedPipeline {
            active,
            means,
            scales,
            fitted: Fitted::Logistic(LogisticModel {
                intercept: 0.0,
                weights: Vec::new(),
            }),
        };
        let rows: Vec<Vec<f64>> = examples.iter().map(|x| pipeline.transform(&x[..], standardise)).collect();
        pipeline.fitted = match hp {
            Hyperparameters::Logistic { lambda } => Fitted::Logistic(LogisticModel::fit(&rows, labels, lambda)),
            Hyperparameters::Forest(params) => Fitted::Forest(ForestModel::fit(&rows, labels, params, seed)),
        };
        pipeline
    }

    fn transform(&self, x: &[f64], standardise: bool) -> Vec<f64> {
        self.active
            .iter()
            .enumerate()
            .map(|(j, &f)| {
                if standardise {
                    (x[f] - self.means[j]) / self.scales[j]
                } else {
                    x[f]
                }
            })
            .collect()
    }

    fn predict(&self, x: &[f64]) -> f64 {
        match &self.fitted {
            Fitted::Logistic(m) => m.predict(&self.transform(x, true)),
            Fitted::Forest(m) => {
                if self.active.is_empty() {
                    m.trees.first().map_or(0.5, |t| t.predict(&[]))
                } else {
                    m.predict(&self.transform(x, false))
                }
            }
        }
    }
}

/// A trained classifier and how it was chosen. Saved as JSON.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedModel {
    pub format: String,
    pub version: u32,
    pub model_kind: ModelKind,
    pub feature_mask: FeatureMask,
    pub hyperparameters: Hyperparameters,
    /// Mean cross-validated AUC of the chosen hyperparameters.
    pub cv_auc: f64,
    pub parameters: FittedPipeline,
}

fn grid(kind: ModelKind) -> Vec<Hyperparameters> {
    match kind {
        ModelKind::LogisticRegression => LAMBDA_GRID.iter().map(|&lambda| Hyperparameters::Logistic { lambda }).collect(),
        ModelKind::RandomForest => FOREST_GRID.iter().map(|&p| Hyperparameters::Forest(p)).collect(),
    }
}

/// Picks hyperparameters by mean fold AUC (first of the grid on ties), then
/// refits on the whole training set.
pub fn train(train_set: &[LabeledExample], config: &TrainConfig) -> Result<TrainedModel, LearnError> {
    if config.feature_mask.count() == 0 {
        return Err(LearnError::EmptyMask);
    }
    let labels: Vec<bool> = train_set.iter().map(|e| e.label).collect();
    let (positives, negatives) = class_counts(labels.iter().copied());
    if positives == 0 || negatives == 0 {
        return Err(LearnError::SingleClass { positives, negatives });
    }
    let folds = stratified_folds(&labels, config.folds, config.seed)?;
    let k = folds.iter().max().map_or(0, |m| m + 1);
    let candidates = grid(config.model_kind);
    let jobs: Vec<(usize, usize)> = (0..candidates.len()).flat_map(|c| (0..k).map(move |f| (c, f))).collect();
    let fold_aucs: Vec<Result<f64, LearnError>> = jobs
        .par_iter()
        .map(|&(c, f)| {
            let (fit_x, fit_y): (Vec<&FeatureVector>, Vec<bool>) = train_set
                .iter()
                .zip(&folds)
                .filter(|(_, &g)| g != f)
                .map(|(e, _)| (&e.features, e.label))
                .unzip();
            let model = FittedPipeline::fit(&fit_x, &fit_y, &config.feature_mask, candidates[c], config.seed);
            let (held_scores, held_labels): (Vec<f64>, Vec<bool>) = train_set
                .iter()
                .zip(&folds)
                .filter(|(_, &g)| g == f)
                .map(|(e, _)| (model.predict(&e.features), e.label))
                .unzip();
            let (pos, neg) = eval::split_by_label(&held_scores, &held_labels)?;
            Ok(eval::auc(&pos, &neg)?)
        })
        .collect();
    let mut best: Option<(usize, f64)> = None;
    for c in 0..candidates.len() {
        let mut sum = 0.0;
        for r in &fold_aucs[c * k..(c + 1) * k] {
            sum += *r.as_ref().map_err(Clone::clone)?;
        }
        let mean = sum / k as f64;
        if best.is_none_or(|(_, b)| mean > b) {
            best = Some((c, mean));
        }
    }
    let (c, cv_auc) = best.expect("grid is not empty");
    let all: Vec<&FeatureVector> = train_set.iter().map(|e| &e.features).collect();
    let parameters = FittedPipeline::fit(&all, &labels, &config.feature_mask, candidates[c], config.seed);
    log::info!(
        "trained {} model on {} examples: {:?}, cv auc {:.4}",
        config.model_kind,
        train_set.len(),
        candidates[c],
        cv_auc
    );
    Ok(TrainedModel {
        format: MODEL_FORMAT.to_string(),
        version: MODEL_VERSION,
        model_kind: config.model_kind,
        feature_mask: config.feature_mask,
        hyperparameters: candidates[c],
        cv_auc,
        parameters,
    })
}

impl TrainedModel {
    /// One score in [0, 1] per row; every row must have 11 values.
    pub fn score<R: AsRef<[f64]>>(&self, rows: &[R]) -> Result<Vec<f64>, LearnError> {
        rows.iter()
            .map(|r| {
                let x = r.as_ref();
                if x.len() != FEATURE_COUNT {
                    return Err(LearnError::FeatureLength {
                        expected: FEATURE_COUNT,
                        found: x.len(),
                    });
                }
                Ok(self.parameters.predict(x))
            })
            .collect()
    }

    pub fn score_examples(&self, examples: &[LabeledExample]) -> Vec<f64> {
        examples.iter().map(|e| self.parameters.predict(&e.features)).collect()
    }

    /// Features the model actually reads (masked in and not constant in training).
    pub fn active_features(&self) -> &[usize] {
        &self.parameters.active
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("model serialises")
    }

    pub fn from_json(text: &str) -> Result<Self, LearnError> {
        let model: TrainedModel = serde_json::from_str(text).map_err(|e| LearnError::ModelFile(e.to_string()))?;
        if model.format != MODEL_FORMAT || model.version != MODEL_VERSION {
            return Err(LearnError::ModelFile(format!(
                "unsupported model format {} version {}",
                model.format, model.version
            )));
        }
        Ok(model)
    }

    pub fn save(&self, path: &Path) -> Result<(), LearnError> {
        std::fs::write(path, self.to_json()).map_err(|e| LearnError::ModelFile(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, LearnError> {
        let text = std::fs::read_to_string(path).map_err(|e| LearnError::ModelFile(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}
