//! Seeded synthetic cohorts and yearly spontaneous-report corpora with known
//! adverse reactions.
//!
//! Outcome codes form a three-level hierarchy: each root has three children
//! and each child two grandchildren. The last third of the roots head
//! non-adverse subtrees ("Family history", "Cancer", ...).
//!
//! Besides background events and the injected reactions, each drug has a few
//! "visit-recorded" non-adverse codes: codes that tend to be written down at
//! the consultation following a prescription. They look like reactions in the
//! longitudinal data but are never reported spontaneously.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use chrono::{Days, NaiveDate};
use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::code::{OutcomeCode, ReadCode};
use crate::error::{ConfigError, IngestError};
use crate::index::WINDOW_DAYS;
use crate::ingest::{self, DataPaths, LabelSource, SrsCorpus, SrsReport};
use crate::model::{CohortDataset, Gender, MedicalRecord, Patient, PrescriptionRecord};

/// Length of every simulated patient timeline, in days.
pub const TIMELINE_DAYS: u32 = 5 * 365;
const CHILDREN_PER_ROOT: usize = 3;
const GRANDCHILDREN_PER_CHILD: usize = 2;
const CODES_PER_ROOT: usize = 1 + CHILDREN_PER_ROOT * (1 + GRANDCHILDREN_PER_CHILD);
const ROOT_CHARS: &[u8] = b"ABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789abcdefghijklmnopqrstuvwxyz";
pub const MAX_OUTCOME_CODES: usize = 62 * CODES_PER_ROOT;
const DOSE_LEVELS: [f64; 3] = [0.5, 1.0, 1.5];
const SRS_STREAM: u64 = 1;

const ADVERSE_NAMES: &[&str] = &[
    "Nausea",
    "Headache",
    "Rash",
    "Dizziness",
    "Fatigue",
    "Insomnia",
    "Cough",
    "Oedema",
    "Myalgia",
    "Diarrhoea",
    "Constipation",
    "Pruritus",
    "Tremor",
    "Palpitations",
    "Dyspepsia",
    "Arthralgia",
];
const NON_ADVERSE_NAMES: &[&str] = &[
    "Family history",
    "Cancer",
    "History of",
    "Screening",
    "Administrative",
    "Social circumstances",
];
const DRUGS: &[(&str, &str)] = &[
    ("atorvastatin", "statin"),
    ("simvastatin", "statin"),
    ("lisinopril", "ace inhibitor"),
    ("ramipril", "ace inhibitor"),
    ("amoxicillin", "penicillin"),
    ("flucloxacillin", "penicillin"),
    ("omeprazole", "proton pump inhibitor"),
    ("lansoprazole", "proton pump inhibitor"),
    ("citalopram", "ssri"),
    ("sertraline", "ssri"),
    ("ibuprofen", "nsaid"),
    ("naproxen", "nsaid"),
    ("amlodipine", "calcium channel blocker"),
    ("nifedipine", "calcium channel blocker"),
    ("ciprofloxacin", "fluoroquinolone"),
    ("levofloxacin", "fluoroquinolone"),
    ("prednisolone", "corticosteroid"),
    ("hydrocortisone", "corticosteroid"),
    ("metformin", "biguanide"),
    ("gliclazide", "sulfonylurea"),
];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InjectedAdr {
    pub drug_name: String,
    pub outcome_code: ReadCode,
    /// Probability of the outcome in the 30 days after each prescription at
    /// the middle dose level.
    pub probability: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GeneratorConfig {
    pub seed: u64,
    pub n_patients: usize,
    pub n_drugs: usize,
    pub n_outcome_codes: usize,
    pub n_practices: usize,
    pub injected_adrs: Vec<InjectedAdr>,
    /// Additional reactions drawn from the seed: one adverse code per drug in turn.
    pub random_adrs: usize,
    pub random_adr_probability: f64,
    /// Non-adverse codes per drug that are recorded at post-prescription visits.
    pub visit_codes_per_drug: usize,
    pub visit_code_probability: f64,
    /// Chance that a given code is recorded in any 30-day window.
    pub background_event_rate: f64,
    pub srs_report_probability_adr: f64,
    pub srs_report_probability_noise: f64,
    pub srs_exposures_per_drug_year: usize,
    pub years: Vec<i32>,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            seed: 1,
            n_patients: 5000,
            n_drugs: 10,
            n_outcome_codes: 120,
            n_practices: 20,
            injected_adrs: Vec::new(),
            random_adrs: 20,
            random_adr_probability: 0.05,
            visit_codes_per_drug: 2,
            visit_code_probability: 0.05,
            background_event_rate: 0.003,
            srs_report_probability_adr: 0.02,
            srs_report_probability_noise: 0.01,
            srs_exposures_per_drug_year: 30,
            years: vec![2010, 2011, 2012, 2013],
        }
    }
}

fn probability(name: &str, p: f64, open_low: bool, open_high: bool) -> Result<(), ConfigError> {
    let low_ok = if open_low { p > 0.0 } else { p >= 0.0 };
    let high_ok = if open_high { p < 1.0 } else { p <= 1.0 };
    if low_ok && high_ok {
        Ok(())
    } else {
        Err(ConfigError::Generator(format!("{name} = {p} is out of range")))
    }
}

impl GeneratorConfig {
    /// Small cohort for tests: 200 patients, 4 drugs, 40 codes, no reactions.
    pub fn tiny(seed: u64) -> Self {
        GeneratorConfig {
            seed,
            n_patients: 200,
            n_drugs: 4,
            n_outcome_codes: 40,
            n_practices: 4,
            random_adrs: 0,
            visit_codes_per_drug: 0,
            ..Default::default()
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let positive = [
            ("n_patients", self.n_patients),
            ("n_drugs", self.n_drugs),
            ("n_outcome_codes", self.n_outcome_codes),
            ("n_practices", self.n_practices),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(ConfigError::Generator(format!("{name} must be positive")));
            }
        }
        if self.n_outcome_codes > MAX_OUTCOME_CODES {
            return Err(ConfigError::Generator(format!(
                "n_outcome_codes must be at most {MAX_OUTCOME_CODES}"
            )));
        }
        probability("background_event_rate", self.background_event_rate, false, true)?;
        probability("srs_report_probability_adr", self.srs_report_probability_adr, false, false)?;
        probability("srs_report_probability_noise", self.srs_report_probability_noise, false, false)?;
        probability("random_adr_probability", self.random_adr_probability, true, false)?;
        probability("visit_code_probability", self.visit_code_probability, false, false)?;
        if self.srs_report_probability_adr < self.srs_report_probability_noise {
            return Err(ConfigError::Generator(
                "srs_report_probability_adr must be at least srs_report_probability_noise".into(),
            ));
        }
        let universe = CodeUniverse::new(self.n_outcome_codes);
        let drugs = drug_catalogue(self.n_drugs);
        for adr in &self.injected_adrs {
            probability("injected adr probability", adr.probability, true, false)?;
            if !drugs.iter().any(|(d, _)| *d == adr.drug_name) {
                return Err(ConfigError::Generator(format!("unknown drug {:?}", adr.drug_name)));
            }
            if !universe.adverse.contains(&adr.outcome_code) {
                return Err(ConfigError::Generator(format!(
                    "{} is not an adverse code of the generated universe",
                    adr.outcome_code
                )));
            }
        }
        if self.random_adrs > self.n_drugs * universe.adverse.len() {
            return Err(ConfigError::Generator("random_adrs exceeds the available pairs".into()));
        }
        if self.visit_codes_per_drug > universe.non_adverse_descendants.len() {
            return Err(ConfigError::Generator(
                "visit_codes_per_drug exceeds the non-adverse codes".into(),
            ));
        }
        Ok(())
    }
}

/// Drug names and families for the first `n` drugs. Consecutive pairs share a family.
pub fn drug_catalogue(n: usize) -> Vec<(String, String)> {
    (0..n)
        .map(|i| match DRUGS.get(i) {
            Some((d, f)) => (d.to_string(), f.to_string()),
            None => (format!("drug{:03}", i + 1), format!("family{:03}", i / 2 + 1)),
        })
        .collect()
}

/// The generated outcome-code hierarchy.
#[derive(Clone, Debug, PartialEq)]
pub struct CodeUniverse {
    pub codes: Vec<OutcomeCode>,
    pub non_adverse_roots: BTreeSet<ReadCode>,
    /// Codes outside the non-adverse subtrees (roots included).
    pub adverse: Vec<ReadCode>,
    /// Codes strictly below a non-adverse root.
    pub non_adverse_descendants: Vec<ReadCode>,
}

impl CodeUniverse {
    pub fn new(n_codes: usize) -> Self {
        let n_roots = n_codes.div_ceil(CODES_PER_ROOT).min(ROOT_CHARS.len());
        let n_non_adverse = n_roots.div_ceil(3).min(n_roots.saturating_sub(1));
        let mut codes = Vec::with_capacity(n_codes);
        let mut non_adverse_roots = BTreeSet::new();
        let mut adverse = Vec::new();
        let mut non_adverse_descendants = Vec::new();
        'roots: for (r, &root_byte) in ROOT_CHARS.iter().enumerate().take(n_roots) {
            let is_non_adverse = r >= n_roots - n_non_adverse;
            let name = if is_non_adverse {
                let k = r - (n_roots - n_non_adverse);
                NON_ADVERSE_NAMES
                    .get(k)
                    .map_or_else(|| format!("Non-adverse group {}", k + 1), |s| s.to_string())
            } else {
                ADVERSE_NAMES
                    .get(r)
                    .map_or_else(|| format!("Condition {}", r + 1), |s| s.to_string())
            };
            let root_char = root_byte as char;
            let mut entries = vec![(format!("{root_char}...."), name.clone())];
            for c in 1..=CHILDREN_PER_ROOT {
                entries.push((format!("{root_char}{c}..."), format!("{name} type {c}")));
                for g in 1..=GRANDCHILDREN_PER_CHILD {
                    entries.push((format!("{root_char}{c}{g}.."), format!("{name} type {c}.{g}")));
                }
            }
            for (i, (code, description)) in entries.into_iter().enumerate() {
                if codes.len() == n_codes {
                    break 'roots;
                }
                let oc = OutcomeCode::new(&code, description).expect("generated codes are valid");
                match (is_non_adverse, i == 0) {
                    (true, true) => {
                        non_adverse_roots.insert(oc.code);
                    }
                    (true, false) => non_adverse_descendants.push(oc.code),
                    (false, _) => adverse.push(oc.code),
                }
                codes.push(oc);
            }
        }
        CodeUniverse {
            codes,
            non_adverse_roots,
            adverse,
            non_adverse_descendants,
        }
    }

    pub fn code_book(&self) -> BTreeMap<ReadCode, String> {
        self.codes.iter().map(|c| (c.code, c.description.clone())).collect()
    }
}

/// What the generator planted.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct GroundTruth {
    pub adr_pairs: BTreeSet<(String, ReadCode)>,
    pub non_adr_roots: BTreeSet<ReadCode>,
    /// Non-adverse codes recorded after prescriptions of the drug.
    pub visit_pairs: BTreeSet<(String, ReadCode)>,
    pub code_book: BTreeMap<ReadCode, String>,
    pub drug_families: BTreeMap<String, String>,
}

impl GroundTruth {
    pub fn is_adr(&self, drug_name: &str, code: &ReadCode) -> bool {
        self.adr_pairs.contains(&(drug_name.to_string(), *code))
    }

    /// Known side effects (the reactions, with lowercase descriptions) and the
    /// non-adverse roots.
    pub fn label_source(&self) -> LabelSource {
        let rows: Vec<(String, String)> = self
            .adr_pairs
            .iter()
            .map(|(d, c)| (d.clone(), self.code_book[c].to_lowercase()))
            .collect();
        LabelSource::from_rows(
            rows.iter().map(|(d, o)| (d.as_str(), o.as_str())),
            self.non_adr_roots.iter().copied(),
        )
    }
}

struct Reaction {
    code: ReadCode,
    probability: f64,
}

fn poisson(rng: &mut ChaCha8Rng, mean: f64) -> u64 {
    if mean <= 0.0 {
        return 0;
    }
    Poisson::new(mean).map_or(0, |d| d.sample(rng) as u64)
}

fn date_plus(base: NaiveDate, days: u32) -> NaiveDate {
    base.checked_add_days(Days::new(u64::from(days))).expect("date in range")
}

/// Cohort and ground truth for the config. Identical configs give identical output.
pub fn generate_cohort(config: &GeneratorConfig) -> Result<(CohortDataset, GroundTruth), ConfigError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let universe = CodeUniverse::new(config.n_outcome_codes);
    let drugs = drug_catalogue(config.n_drugs);
    let code_book = universe.code_book();

    let mut adr_pairs = BTreeSet::new();
    let mut reactions: Vec<Vec<Reaction>> = (0..drugs.len()).map(|_| Vec::new()).collect();
    for adr in &config.injected_adrs {
        let d = drugs.iter().position(|(n, _)| *n == adr.drug_name).expect("validated");
        if adr_pairs.insert((adr.drug_name.clone(), adr.outcome_code)) {
            reactions[d].push(Reaction {
                code: adr.outcome_code,
                probability: adr.probability,
            });
        }
    }
    let mut added = 0;
    let mut turn = 0;
    while added < config.random_adrs {
        let d = turn % drugs.len();
        turn += 1;
        let taken: Vec<ReadCode> = reactions[d].iter().map(|r| r.code).collect();
        let free: Vec<ReadCode> = universe.adverse.iter().copied().filter(|c| !taken.contains(c)).collect();
        let Some(&code) = free.choose(&mut rng) else { continue };
        adr_pairs.insert((drugs[d].0.clone(), code));
        reactions[d].push(Reaction {
            code,
            probability: config.random_adr_probability,
        });
        added += 1;
    }

    let mut visit_pairs = BTreeSet::new();
    let visit_codes: Vec<Vec<ReadCode>> = drugs
        .iter()
        .map(|(name, _)| {
            let chosen: Vec<ReadCode> = universe
                .non_adverse_descendants
                .choose_multiple(&mut rng, config.visit_codes_per_drug)
                .copied()
                .collect();
            for c in &chosen {
                visit_pairs.insert((name.clone(), *c));
            }
            chosen
        })
        .collect();

    let base_dose: Vec<f64> = (0..drugs.len()).map(|i| 10.0 * (1 + i % 5) as f64).collect();
    let daily_rate = -(1.0 - config.background_event_rate).ln() / 30.0;
    let background_days = TIMELINE_DAYS + WINDOW_DAYS as u32;
    let background_mean = daily_rate * f64::from(background_days) * universe.codes.len() as f64;
    let first_registration = NaiveDate::from_ymd_opt(2000, 1, 1).expect("valid date");

    let mut dataset = CohortDataset::default();
    for pid in 1..=config.n_patients as u64 {
        let patient = Patient {
            patient_id: pid,
            year_of_birth: rng.random_range(1930..=1995),
            gender: if rng.random_bool(0.5) { Gender::Male } else { Gender::Female },
            practice_id: rng.random_range(1..=config.n_practices as u64),
            registration_date: date_plus(first_registration, rng.random_range(0..5 * 365)),
        };
        let start = patient.registration_date;
        let mut events: BTreeSet<(u32, ReadCode)> = BTreeSet::new();

        for _ in 0..poisson(&mut rng, background_mean) {
            let day = rng.random_range(0..background_days);
            let code = universe.codes[rng.random_range(0..universe.codes.len())].code;
            events.insert((day, code));
        }

        let n_taken = (1 + poisson(&mut rng, 1.5) as usize).min(drugs.len());
        let mut taken: Vec<usize> = rand::seq::index::sample(&mut rng, drugs.len(), n_taken).into_vec();
        taken.sort_unstable();
        for d in taken {
            let level = DOSE_LEVELS[rng.random_range(0..DOSE_LEVELS.len())];
            let dosage = base_dose[d] * level;
            let effect = 0.5 + 0.5 * level;
            let mut day = rng.random_range(0..TIMELINE_DAYS);
            let courses = 1 + poisson(&mut rng, 2.0);
            for _ in 0..courses {
                if day >= TIMELINE_DAYS {
                    break;
                }
                dataset.therapy.push(PrescriptionRecord {
                    patient_id: pid,
                    drug_name: drugs[d].0.clone(),
                    drug_family: drugs[d].1.clone(),
                    dosage,
                    date: date_plus(start, day),
                });
                for r in &reactions[d] {
                    if rng.random_bool((r.probability * effect).min(1.0)) {
                        events.insert((day + rng.random_range(1..=30), r.code));
                    }
                }
                for &code in &visit_codes[d] {
                    if rng.random_bool(config.visit_code_probability) {
                        events.insert((day + rng.random_range(1..=30), code));
                    }
                }
                day += rng.random_range(45..=120);
            }
        }

        for (day, code) in events {
            dataset.medical.push(MedicalRecord {
                patient_id: pid,
                outcome: OutcomeCode {
                    code,
                    description: code_book[&code].clone(),
                },
                date: date_plus(start, day),
            });
        }
        dataset.patients.push(patient);
    }

    let truth = GroundTruth {
        adr_pairs,
        non_adr_roots: universe.non_adverse_roots.clone(),
        visit_pairs,
        code_book,
        drug_families: drugs.into_iter().collect(),
    };
    Ok((dataset, truth))
}

/// Yearly report sets. Each year every drug gets
/// `srs_exposures_per_drug_year` exposures; each exposure reports each of the
/// drug's reactions with `srs_report_probability_adr` and one random outcome
/// with `srs_report_probability_noise`. Descriptions are upper-cased.
pub fn generate_srs(config: &GeneratorConfig, truth: &GroundTruth) -> SrsCorpus {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(SRS_STREAM);
    let all_codes: Vec<ReadCode> = truth.code_book.keys().copied().collect();
    let mut reactions: BTreeMap<&str, Vec<ReadCode>> = BTreeMap::new();
    for (d, c) in &truth.adr_pairs {
        reactions.entry(d.as_str()).or_default().push(*c);
    }
    let mut corpus = SrsCorpus::default();
    for &year in &config.years {
        let mut reports = Vec::new();
        let mut push = |drug: &str, code: &ReadCode| {
            reports.push(SrsReport {
                report_id: format!("{year}-{:06}", reports.len() + 1),
                year,
                drug_name: drug.to_string(),
                outcome_description: truth.code_book[code].to_uppercase(),
            });
        };
        for drug in truth.drug_families.keys() {
            let own = reactions.get(drug.as_str()).map_or(&[][..], |v| v.as_slice());
            for _ in 0..config.srs_exposures_per_drug_year {
                for code in own {
                    if rng.random_bool(config.srs_report_probability_adr) {
                        push(drug, code);
                    }
                }
                if !all_codes.is_empty() && rng.random_bool(config.srs_report_probability_noise) {
                    let code = all_codes[rng.random_range(0..all_codes.len())];
                    push(drug, &code);
                }
            }
        }
        corpus.years.insert(year, reports);
    }
    corpus
}

/// Everything one generator run produces.
#[derive(Clone, Debug, PartialEq)]
pub struct Generated {
    pub dataset: CohortDataset,
    pub truth: GroundTruth,
    pub corpus: SrsCorpus,
}

pub fn generate(config: &GeneratorConfig) -> Result<Generated, ConfigError> {
    let (dataset, truth) = generate_cohort(config)?;
    let corpus = generate_srs(config, &truth);
    Ok(Generated { dataset, truth, corpus })
}

/// Writes the cohort, the label files and one report file per year into `dir`
/// using the file names of [`DataPaths::in_dir`].
pub fn write_generated(generated: &Generated, dir: &Path) -> Result<DataPaths, IngestError> {
    let paths = DataPaths::in_dir(dir);
    ingest::write_cohort(&generated.dataset, &paths.patient, &paths.medical, &paths.therapy)?;
    ingest::write_labels(&generated.truth.label_source(), &paths.side_effects, &paths.non_adverse_roots)?;
    ingest::write_srs(&generated.corpus, dir)?;
    Ok(paths)
}
