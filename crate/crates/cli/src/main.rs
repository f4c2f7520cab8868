use std::io::{self, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use hillsignal::features::longitudinal::ComparatorKind;
use hillsignal::learn::{FeatureMask, ModelKind};
use hillsignal::pipeline::{self, InputConfig, PipelineConfig};

#[derive(Parser, Debug)]
#[command(name = "hillsignal", version, about = "Drug-outcome signal detection from longitudinal records and yearly reports")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    #[command(flatten)]
    overrides: Overrides,
}

#[derive(Subcommand, Debug, Clone, Copy, PartialEq, Eq)]
enum Command {
    /// Write a synthetic cohort, label files and yearly reports into --output.
    Generate,
    /// Load and validate the configured inputs and print a summary.
    IngestCheck,
    /// Mine labelled drug-outcome pairs into pairs.csv.
    Pairs,
    /// Extract x1 to x11 for pairs.csv into features.csv.
    Features,
    /// Train on the training split of features.csv and write model.json.
    Train,
    /// Score the validation split with model.json; writes scores, ROC and report.
    Evaluate,
    /// Run every stage from a config file.
    Pipeline,
    /// Train with and without x11 on features.csv and compare them.
    CompareMasks,
}

#[derive(Args, Debug, Default)]
struct Overrides {
    /// TOML run configuration.
    #[arg(long, global = true, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Seed for the split, the models and the generator.
    #[arg(long, global = true, value_name = "N")]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long, global = true, value_name = "N")]
    threads: Option<usize>,
    /// Output directory.
    #[arg(long, global = true, value_name = "DIR")]
    output: Option<PathBuf>,
    /// Features used by the model, e.g. "all" or "1-10".
    #[arg(long, global = true, value_name = "LIST")]
    feature_mask: Option<FeatureMask>,
    /// Classifier: logistic or forest.
    #[arg(long, global = true, value_name = "KIND")]
    model: Option<ModelKind>,
    /// Comparator group: other-drugs or matched.
    #[arg(long, global = true, value_name = "KIND")]
    comparator: Option<ComparatorKind>,
    /// Controls per case for the matched comparator.
    #[arg(long, global = true, value_name = "K")]
    matched_controls: Option<usize>,
    /// Read inputs from this directory instead of generating them.
    #[arg(long, global = true, value_name = "DIR")]
    input: Option<PathBuf>,
    /// Comma-separated drugs to mine (default: all).
    #[arg(long, global = true, value_name = "LIST", value_delimiter = ',')]
    drugs: Option<Vec<String>>,
    /// Classification threshold for the confusion matrix.
    #[arg(long, global = true, value_name = "T")]
    threshold: Option<f64>,
    /// Cross-validation folds.
    #[arg(long, global = true, value_name = "K")]
    folds: Option<usize>,
    /// Share of examples used for training.
    #[arg(long, global = true, value_name = "F")]
    train_fraction: Option<f64>,
    /// Skip the with/without-x11 comparison in `pipeline`.
    #[arg(long, global = true)]
    no_compare_masks: bool,
    /// More log output (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,
}

impl Overrides {
    fn resolve(&self) -> Result<PipelineConfig> {
        let mut config = match &self.config {
            Some(path) => PipelineConfig::from_file(path).with_context(|| format!("reading config {}", path.display()))?,
            None => PipelineConfig::with_generator(Default::default()),
        };
        if let Some(dir) = &self.input {
            config.input = Some(InputConfig::from_dir(dir));
            config.generator = None;
        }
        if let Some(seed) = self.seed {
            config.seed = seed;
            if let Some(g) = &mut config.generator {
                g.seed = seed;
            }
        }
        if let Some(output) = &self.output {
            config.output = output.clone();
        }
        if let Some(mask) = self.feature_mask {
            config.feature_mask = mask;
        }
        if let Some(model) = self.model {
            config.model = model;
        }
        if let Some(kind) = self.comparator {
            config.comparator.kind = kind;
        }
        if let Some(k) = self.matched_controls {
            config.comparator.matched_controls_per_case = k;
        }
        if let Some(drugs) = &self.drugs {
            config.drugs = drugs.clone();
        }
        if let Some(t) = self.threshold {
            config.threshold = t;
        }
        if let Some(k) = self.folds {
            config.split.folds = k;
        }
        if let Some(f) = self.train_fraction {
            config.split.train_fraction = f;
        }
        if self.no_compare_masks {
            config.compare_masks = false;
        }
        config.validate()?;
        Ok(config)
    }
}

fn run(cli: &Cli) -> Result<()> {
    if let Some(n) = cli.overrides.threads {
        if n == 0 {
            bail!("--threads must be at least 1");
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the worker pool")?;
    }
    if cli.command == Command::Pipeline && cli.overrides.config.is_none() {
        bail!("pipeline needs --config PATH");
    }
    let config = cli.overrides.resolve()?;
    let out = &config.output;
    let mut w = io::stdout().lock();
    match cli.command {
        Command::Generate => {
            if config.generator.is_none() && config.input.is_some() {
                bail!("generate needs a generator config, not input paths");
            }
            let paths = pipeline::stage_generate(&config, out)?;
            writeln!(w, "wrote synthetic data to {}", paths.patient.parent().unwrap_or(out).display())?;
        }
        Command::IngestCheck => {
            let data = pipeline::load_data(&config)?;
            let ds = &data.dataset;
            writeln!(w, "patients: {}", ds.patients.len())?;
            writeln!(w, "medical records (after registration filter): {}", ds.medical.len())?;
            writeln!(w, "prescriptions (after registration filter): {}", ds.therapy.len())?;
            writeln!(w, "drugs: {}", ds.drug_names().join(", "))?;
            writeln!(
                w,
                "known side effects: {} drugs, {} rows",
                data.labels.known_side_effects.len(),
                data.labels.known_side_effects.values().map(|s| s.len()).sum::<usize>()
            )?;
            writeln!(w, "non-adverse roots: {}", data.labels.non_adverse_roots.len())?;
            for (year, reports) in &data.corpus.years {
                writeln!(w, "reports {year}: {}", reports.len())?;
            }
        }
        Command::Pairs => {
            let pairs = pipeline::stage_pairs(&config)?;
            let positives = pairs.iter().filter(|p| p.label == hillsignal::Label::Adr).count();
            writeln!(
                w,
                "{} labelled pairs ({positives} known reactions) -> {}",
                pairs.len(),
                out.join(pipeline::PAIRS_FILE).display()
            )?;
        }
        Command::Features => {
            let (pairs, dropped) = pipeline::stage_features(&config)?;
            writeln!(
                w,
                "{} feature vectors, {} pairs dropped -> {}",
                pairs.len(),
                dropped.len(),
                out.join(pipeline::FEATURES_FILE).display()
            )?;
            for d in &dropped {
                writeln!(w, "dropped ({}, {}): {}", d.drug_name, d.code, d.reason)?;
            }
        }
        Command::Train => {
            let model = pipeline::stage_train(&config)?;
            writeln!(
                w,
                "{} model, features {}, {:?}, cross-validated AUC {:.4} -> {}",
                model.model_kind,
                model.feature_mask,
                model.hyperparameters,
                model.cv_auc,
                out.join(pipeline::MODEL_FILE).display()
            )?;
        }
        Command::Evaluate => {
            let evaluation = pipeline::stage_evaluate(&config)?;
            let r = &evaluation.primary.report;
            writeln!(w, "AUC {:.4}, pAUC {:.4}", r.auc, r.pauc)?;
            writeln!(w, "report -> {}", out.join(pipeline::REPORT_FILE).display())?;
        }
        Command::Pipeline => {
            let outcome = pipeline::run_pipeline(&config)?;
            write!(w, "{}", outcome.report)?;
            writeln!(w, "outputs in {}", outcome.output.display())?;
        }
        Command::CompareMasks => {
            let evaluation = pipeline::stage_compare(&config)?;
            let c = evaluation.comparison.as_ref().context("comparison missing")?;
            write!(w, "{}", pipeline::comparison_text(c))?;
            writeln!(w, "comparison -> {}", out.join(pipeline::COMPARISON_FILE).display())?;
        }
    }
    Ok(())
}

fn is_broken_pipe(e: &anyhow::Error) -> bool {
    e.downcast_ref::<io::Error>()
        .is_some_and(|io| io.kind() == io::ErrorKind::BrokenPipe)
}

/// The error chain, skipping causes already quoted by the message above them.
fn describe(e: &anyhow::Error) -> String {
    let mut text = e.to_string();
    for cause in e.chain().skip(1) {
        let msg = cause.to_string();
        if !text.contains(&msg) {
            text.push_str(": ");
            text.push_str(&msg);
        }
    }
    text
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.overrides.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) if is_broken_pipe(&e) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {}", describe(&e));
            ExitCode::FAILURE
        }
    }
}
