//! Reading and writing the on-disk tables, the registration filter, and
//! cross-source vocabulary matching.
//!
//! All files are comma-separated with a mandatory header row:
//!
//! | file | columns |
//! |------|---------|
//! | `patient.csv` | `patient_id,year_of_birth,gender,practice_id,registration_date` |
//! | `medical.csv` | `patient_id,code,description,date` |
//! | `therapy.csv` | `patient_id,drug_name,drug_family,dosage,date` |
//! | `srs_<year>.csv` | `report_id,drug_name,outcome_description` |
//! | `side_effects.csv` | `drug_name,outcome_description` |
//! | `non_adverse_roots.csv` | `code` |
//!
//! Dates are ISO-8601 (`YYYY-MM-DD`).

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::fs::File;
use std::io::Write;
use std::path::{Path, PathBuf};

use chrono::{Days, NaiveDate};
use csv::StringRecord;

use crate::code::{OutcomeCode, ReadCode};
use crate::error::IngestError;
use crate::model::{CohortDataset, Gender, MedicalRecord, Patient, PatientId, PrescriptionRecord};

pub const PATIENT_HEADER: &[&str] = &[
    "patient_id",
    "year_of_birth",
    "gender",
    "practice_id",
    "registration_date",
];
pub const MEDICAL_HEADER: &[&str] = &["patient_id", "code", "description", "date"];
pub const THERAPY_HEADER: &[&str] = &["patient_id", "drug_name", "drug_family", "dosage", "date"];
pub const SRS_HEADER: &[&str] = &["report_id", "drug_name", "outcome_description"];
pub const SIDE_EFFECTS_HEADER: &[&str] = &["drug_name", "outcome_description"];
pub const ROOTS_HEADER: &[&str] = &["code"];

/// Days of data ignored after a patient registers with a practice.
pub const REGISTRATION_WINDOW_DAYS: u64 = 365;

const DATE_FORMAT: &str = "%Y-%m-%d";

/// Standard file names inside a data directory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DataPaths {
    pub patient: PathBuf,
    pub medical: PathBuf,
    pub therapy: PathBuf,
    pub side_effects: PathBuf,
    pub non_adverse_roots: PathBuf,
}

impl DataPaths {
    pub fn in_dir(dir: &Path) -> Self {
        DataPaths {
            patient: dir.join("patient.csv"),
            medical: dir.join("medical.csv"),
            therapy: dir.join("therapy.csv"),
            side_effects: dir.join("side_effects.csv"),
            non_adverse_roots: dir.join("non_adverse_roots.csv"),
        }
    }
}

pub fn srs_file_name(year: i32) -> String {
    format!("srs_{year}.csv")
}

/// Finds `srs_<year>.csv` files in `dir`, sorted by year.
pub fn srs_paths_in_dir(dir: &Path) -> Result<Vec<(i32, PathBuf)>, IngestError> {
    let entries = std::fs::read_dir(dir).map_err(|source| IngestError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let mut out = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| IngestError::Io {
            path: dir.to_path_buf(),
            source,
        })?;
        let name = entry.file_name();
        let Some(name) = name.to_str() else { continue };
        if let Some(year) = name
            .strip_prefix("srs_")
            .and_then(|s| s.strip_suffix(".csv"))
            .and_then(|s| s.parse::<i32>().ok())
        {
            out.push((year, entry.path()));
        }
    }
    out.sort();
    Ok(out)
}

// ---------------------------------------------------------------------------
// Vocabulary matching

/// Canonical form used for every cross-source string comparison: surrounding
/// whitespace trimmed, then case-folded. Nothing else is normalized.
pub fn canonical(s: &str) -> String {
    s.trim().to_lowercase()
}

/// Exact, case-insensitive equality of two descriptions (or drug names).
pub fn match_description(a: &str, b: &str) -> bool {
    canonical(a) == canonical(b)
}

// ---------------------------------------------------------------------------
// Registration filter

/// Drops medical and therapy records dated before `registration + 365 days`.
/// Patients are kept even if none of their records survive.
pub fn apply_registration_filter(dataset: &CohortDataset) -> CohortDataset {
    let cutoffs: std::collections::HashMap<PatientId, NaiveDate> = dataset
        .patients
        .iter()
        .map(|p| {
            let cutoff = p
                .registration_date
                .checked_add_days(Days::new(REGISTRATION_WINDOW_DAYS))
                .unwrap_or(NaiveDate::MAX);
            (p.patient_id, cutoff)
        })
        .collect();
    let keep = |id: PatientId, date: NaiveDate| cutoffs.get(&id).is_some_and(|c| date >= *c);
    CohortDataset {
        patients: dataset.patients.clone(),
        medical: dataset
            .medical
            .iter()
            .filter(|r| keep(r.patient_id, r.date))
            .cloned()
            .collect(),
        therapy: dataset
            .therapy
            .iter()
            .filter(|r| keep(r.patient_id, r.date))
            .cloned()
            .collect(),
    }
}

// ---------------------------------------------------------------------------
// CSV plumbing

struct TableReader {
    path: PathBuf,
    reader: csv::Reader<File>,
    header: &'static [&'static str],
}

impl TableReader {
    fn open(path: &Path, header: &'static [&'static str]) -> Result<Self, IngestError> {
        let file = File::open(path).map_err(|source| IngestError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .flexible(false)
            .from_reader(file);
        let found = reader.headers().map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let matches = found.len() == header.len()
            && found.iter().zip(header).all(|(f, h)| f.trim() == *h);
        // An entirely empty file has no header row; treat it as an empty table.
        let empty = found.is_empty() || (found.len() == 1 && found[0].is_empty());
        if !matches && !empty {
            return Err(IngestError::Header {
                path: path.to_path_buf(),
                expected: header.join(","),
            });
        }
        Ok(TableReader {
            path: path.to_path_buf(),
            reader,
            header,
        })
    }

    fn for_each_row(
        mut self,
        mut f: impl FnMut(&Row<'_>) -> Result<(), IngestError>,
    ) -> Result<(), IngestError> {
        let mut record = StringRecord::new();
        loop {
            match self.reader.read_record(&mut record) {
                Ok(false) => return Ok(()),
                Ok(true) => {
                    let line = record.position().map_or(0, |p| p.line());
                    if record.len() != self.header.len() {
                        return Err(IngestError::Row {
                            path: self.path.clone(),
                            line,
                            column: String::new(),
                            message: format!(
                                "expected {} fields, found {}",
                                self.header.len(),
                                record.len()
                            ),
                        });
                    }
                    f(&Row {
                        path: &self.path,
                        line,
                        header: self.header,
                        record: &record,
                    })?;
                }
                Err(source) => {
                    let line = source.position().map_or(0, |p| p.line());
                    return Err(IngestError::Row {
                        path: self.path.clone(),
                        line,
                        column: String::new(),
                        message: source.to_string(),
                    });
                }
            }
        }
    }
}

struct Row<'a> {
    path: &'a Path,
    line: u64,
    header: &'static [&'static str],
    record: &'a StringRecord,
}

impl Row<'_> {
    fn error(&self, col: usize, message: impl Into<String>) -> IngestError {
        IngestError::Row {
            path: self.path.to_path_buf(),
            line: self.line,
            column: self.header[col].to_string(),
            message: message.into(),
        }
    }

    fn text(&self, col: usize) -> &str {
        &self.record[col]
    }

    fn non_empty(&self, col: usize) -> Result<&str, IngestError> {
        let v = self.record[col].trim();
        if v.is_empty() {
            Err(self.error(col, "empty value"))
        } else {
            Ok(&self.record[col])
        }
    }

    fn parse<T: std::str::FromStr>(&self, col: usize) -> Result<T, IngestError>
    where
        T::Err: std::fmt::Display,
    {
        let raw = self.record[col].trim();
        raw.parse::<T>()
            .map_err(|e| self.error(col, format!("cannot parse {raw:?}: {e}")))
    }

    fn date(&self, col: usize) -> Result<NaiveDate, IngestError> {
        let raw = self.record[col].trim();
        NaiveDate::parse_from_str(raw, DATE_FORMAT)
            .map_err(|e| self.error(col, format!("bad date {raw:?}: {e}")))
    }

    fn code(&self, col: usize) -> Result<ReadCode, IngestError> {
        ReadCode::parse(&self.record[col]).map_err(|e| self.error(col, e.to_string()))
    }
}

fn create(path: &Path) -> Result<csv::Writer<File>, IngestError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| IngestError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let file = File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(csv::WriterBuilder::new().from_writer(file))
}

fn write_rows<I, R>(path: &Path, header: &[&str], rows: I) -> Result<(), IngestError>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator,
    R::Item: AsRef<[u8]>,
{
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = create(path)?;
    w.write_record(header).map_err(csv_err)?;
    for row in rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn format_date(date: NaiveDate) -> String {
    date.format(DATE_FORMAT).to_string()
}

// ---------------------------------------------------------------------------
// Cohort tables

pub fn load_patients(path: &Path) -> Result<Vec<Patient>, IngestError> {
    let mut out = Vec::new();
    let mut seen = HashSet::new();
    TableReader::open(path, PATIENT_HEADER)?.for_each_row(|row| {
        let gender = row
            .text(2)
            .parse::<Gender>()
            .map_err(|e| row.error(2, e))?;
        let patient = Patient {
            patient_id: row.parse(0)?,
            year_of_birth: row.parse(1)?,
            gender,
            practice_id: row.parse(3)?,
            registration_date: row.date(4)?,
        };
        if !patient.is_consistent() {
            return Err(row.error(1, "year of birth after registration year"));
        }
        if !seen.insert(patient.patient_id) {
            return Err(IngestError::DuplicatePatient {
                path: path.to_path_buf(),
                line: row.line,
                patient_id: patient.patient_id,
            });
        }
        out.push(patient);
        Ok(())
    })?;
    Ok(out)
}

pub fn load_medical(path: &Path) -> Result<Vec<(u64, MedicalRecord)>, IngestError> {
    let mut out = Vec::new();
    TableReader::open(path, MEDICAL_HEADER)?.for_each_row(|row| {
        let record = MedicalRecord {
            patient_id: row.parse(0)?,
            outcome: OutcomeCode {
                code: row.code(1)?,
                description: row.text(2).to_string(),
            },
            date: row.date(3)?,
        };
        out.push((row.line, record));
        Ok(())
    })?;
    Ok(out)
}

pub fn load_therapy(path: &Path) -> Result<Vec<(u64, PrescriptionRecord)>, IngestError> {
    let mut out = Vec::new();
    TableReader::open(path, THERAPY_HEADER)?.for_each_row(|row| {
        let dosage: f64 = row.parse(3)?;
        if !(dosage >= 0.0 && dosage.is_finite()) {
            return Err(row.error(3, format!("dosage {dosage} must be finite and >= 0")));
        }
        let record = PrescriptionRecord {
            patient_id: row.parse(0)?,
            drug_name: row.non_empty(1)?.to_string(),
            drug_family: row.text(2).to_string(),
            dosage,
            date: row.date(4)?,
        };
        out.push((row.line, record));
        Ok(())
    })?;
    Ok(out)
}

/// Reads the three cohort tables (in parallel) and checks referential integrity.
pub fn load_cohort(
    patient_path: &Path,
    medical_path: &Path,
    therapy_path: &Path,
) -> Result<CohortDataset, IngestError> {
    let (patients, (medical, therapy)) = rayon::join(
        || load_patients(patient_path),
        || rayon::join(|| load_medical(medical_path), || load_therapy(therapy_path)),
    );
    let patients = patients?;
    let medical = medical?;
    let therapy = therapy?;

    let known: HashSet<PatientId> = patients.iter().map(|p| p.patient_id).collect();
    let dangling = |path: &Path, line: u64, patient_id: PatientId| IngestError::DanglingPatient {
        path: path.to_path_buf(),
        line,
        patient_id,
    };
    if let Some((line, r)) = medical.iter().find(|(_, r)| !known.contains(&r.patient_id)) {
        return Err(dangling(medical_path, *line, r.patient_id));
    }
    if let Some((line, r)) = therapy.iter().find(|(_, r)| !known.contains(&r.patient_id)) {
        return Err(dangling(therapy_path, *line, r.patient_id));
    }
    Ok(CohortDataset {
        patients,
        medical: medical.into_iter().map(|(_, r)| r).collect(),
        therapy: therapy.into_iter().map(|(_, r)| r).collect(),
    })
}

pub fn write_cohort(
    dataset: &CohortDataset,
    patient_path: &Path,
    medical_path: &Path,
    therapy_path: &Path,
) -> Result<(), IngestError> {
    write_rows(
        patient_path,
        PATIENT_HEADER,
        dataset.patients.iter().map(|p| {
            [
                p.patient_id.to_string(),
                p.year_of_birth.to_string(),
                p.gender.to_string(),
                p.practice_id.to_string(),
                format_date(p.registration_date),
            ]
        }),
    )?;
    write_rows(
        medical_path,
        MEDICAL_HEADER,
        dataset.medical.iter().map(|r| {
            [
                r.patient_id.to_string(),
                r.outcome.code.to_string(),
                r.outcome.description.clone(),
                format_date(r.date),
            ]
        }),
    )?;
    write_rows(
        therapy_path,
        THERAPY_HEADER,
        dataset.therapy.iter().map(|r| {
            [
                r.patient_id.to_string(),
                r.drug_name.clone(),
                r.drug_family.clone(),
                r.dosage.to_string(),
                format_date(r.date),
            ]
        }),
    )
}

// ---------------------------------------------------------------------------
// Spontaneous reports

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SrsReport {
    pub report_id: String,
    pub year: i32,
    pub drug_name: String,
    pub outcome_description: String,
}

/// Yearly slices of spontaneous reports. Rows sharing a `report_id` within a
/// year describe the same report.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct SrsCorpus {
    pub years: BTreeMap<i32, Vec<SrsReport>>,
}

impl SrsCorpus {
    pub fn is_empty(&self) -> bool {
        self.years.is_empty()
    }

    pub fn year_list(&self) -> Vec<i32> {
        self.years.keys().copied().collect()
    }
}

pub fn load_srs_year(year: i32, path: &Path) -> Result<Vec<SrsReport>, IngestError> {
    let mut out = Vec::new();
    TableReader::open(path, SRS_HEADER)?.for_each_row(|row| {
        out.push(SrsReport {
            report_id: row.non_empty(0)?.to_string(),
            year,
            drug_name: row.non_empty(1)?.to_string(),
            outcome_description: row.non_empty(2)?.to_string(),
        });
        Ok(())
    })?;
    Ok(out)
}

pub fn load_srs(paths: &[(i32, PathBuf)]) -> Result<SrsCorpus, IngestError> {
    let mut seen = BTreeSet::new();
    for (year, _) in paths {
        if !seen.insert(*year) {
            return Err(IngestError::DuplicateYear(*year));
        }
    }
    use rayon::prelude::*;
    let slices: Vec<(i32, Vec<SrsReport>)> = paths
        .par_iter()
        .map(|(year, path)| load_srs_year(*year, path).map(|r| (*year, r)))
        .collect::<Result<_, _>>()?;
    Ok(SrsCorpus {
        years: slices.into_iter().collect(),
    })
}

/// Writes one `srs_<year>.csv` per year into `dir`.
pub fn write_srs(corpus: &SrsCorpus, dir: &Path) -> Result<Vec<(i32, PathBuf)>, IngestError> {
    let mut written = Vec::new();
    for (year, reports) in &corpus.years {
        let path = dir.join(srs_file_name(*year));
        write_rows(
            &path,
            SRS_HEADER,
            reports.iter().map(|r| {
                [
                    r.report_id.as_str(),
                    r.drug_name.as_str(),
                    r.outcome_description.as_str(),
                ]
            }),
        )?;
        written.push((*year, path));
    }
    Ok(written)
}

// ---------------------------------------------------------------------------
// Labels

/// Known side effects per drug and the roots of the non-adverse code subtrees.
/// Drug names and descriptions are held in [`canonical`] form.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct LabelSource {
    pub known_side_effects: BTreeMap<String, BTreeSet<String>>,
    pub non_adverse_roots: BTreeSet<ReadCode>,
}

impl LabelSource {
    pub fn from_rows<'a>(
        side_effects: impl IntoIterator<Item = (&'a str, &'a str)>,
        roots: impl IntoIterator<Item = ReadCode>,
    ) -> Self {
        let mut known_side_effects: BTreeMap<String, BTreeSet<String>> = BTreeMap::new();
        for (drug, outcome) in side_effects {
            known_side_effects
                .entry(canonical(drug))
                .or_default()
                .insert(canonical(outcome));
        }
        LabelSource {
            known_side_effects,
            non_adverse_roots: roots.into_iter().collect(),
        }
    }

    /// The code sits strictly below one of the non-adverse roots.
    pub fn is_non_adverse(&self, code: &ReadCode) -> bool {
        self.non_adverse_roots.iter().any(|r| r.is_ancestor_of(code))
    }

    /// Equivalent to `match_description(outcome, s)` for some listed `s`.
    pub fn is_known_side_effect(&self, drug: &str, outcome: &str) -> bool {
        self.known_side_effects
            .get(&canonical(drug))
            .is_some_and(|set| set.contains(&canonical(outcome)))
    }
}

pub fn load_labels(
    side_effects_path: &Path,
    non_adverse_roots_path: &Path,
) -> Result<LabelSource, IngestError> {
    let mut rows = Vec::new();
    TableReader::open(side_effects_path, SIDE_EFFECTS_HEADER)?.for_each_row(|row| {
        rows.push((row.non_empty(0)?.to_string(), row.non_empty(1)?.to_string()));
        Ok(())
    })?;
    let mut roots = Vec::new();
    TableReader::open(non_adverse_roots_path, ROOTS_HEADER)?.for_each_row(|row| {
        roots.push(row.code(0)?);
        Ok(())
    })?;
    Ok(LabelSource::from_rows(
        rows.iter().map(|(d, o)| (d.as_str(), o.as_str())),
        roots,
    ))
}

pub fn write_labels(
    labels: &LabelSource,
    side_effects_path: &Path,
    non_adverse_roots_path: &Path,
) -> Result<(), IngestError> {
    write_rows(
        side_effects_path,
        SIDE_EFFECTS_HEADER,
        labels
            .known_side_effects
            .iter()
            .flat_map(|(drug, set)| set.iter().map(move |o| [drug.as_str(), o.as_str()])),
    )?;
    write_rows(
        non_adverse_roots_path,
        ROOTS_HEADER,
        labels.non_adverse_roots.iter().map(|c| [c.as_str()]),
    )
}

/// Writes raw text (used for report files).
pub fn write_text(path: &Path, text: &str) -> Result<(), IngestError> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            std::fs::create_dir_all(parent).map_err(|source| IngestError::Io {
                path: parent.to_path_buf(),
                source,
            })?;
        }
    }
    let mut f = File::create(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    f.write_all(text.as_bytes()).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub(crate) fn csv_writer(path: &Path) -> Result<csv::Writer<File>, IngestError> {
    create(path)
}
