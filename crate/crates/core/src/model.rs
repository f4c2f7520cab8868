//! Record types for the patient, medical and therapy tables.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::str::FromStr;

use chrono::{Datelike, NaiveDate};
use serde::{Deserialize, Serialize};

use crate::code::{OutcomeCode, ReadCode};

pub type PatientId = u64;
pub type PracticeId = u64;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Gender {
    Male,
    Female,
}

impl Gender {
    pub fn as_str(&self) -> &'static str {
        match self {
            Gender::Male => "male",
            Gender::Female => "female",
        }
    }
}

impl fmt::Display for Gender {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Gender {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "male" | "m" => Ok(Gender::Male),
            "female" | "f" => Ok(Gender::Female),
            other => Err(format!("unknown gender {other:?}")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Patient {
    pub patient_id: PatientId,
    pub year_of_birth: i32,
    pub gender: Gender,
    pub practice_id: PracticeId,
    pub registration_date: NaiveDate,
}

impl Patient {
    pub fn is_consistent(&self) -> bool {
        self.year_of_birth <= self.registration_date.year()
    }

    pub fn age_in(&self, year: i32) -> i32 {
        year - self.year_of_birth
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MedicalRecord {
    pub patient_id: PatientId,
    pub outcome: OutcomeCode,
    pub date: NaiveDate,
}

impl MedicalRecord {
    pub fn code(&self) -> ReadCode {
        self.outcome.code
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct PrescriptionRecord {
    pub patient_id: PatientId,
    pub drug_name: String,
    pub drug_family: String,
    pub dosage: f64,
    pub date: NaiveDate,
}

/// The three longitudinal tables. Immutable once assembled.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct CohortDataset {
    pub patients: Vec<Patient>,
    pub medical: Vec<MedicalRecord>,
    pub therapy: Vec<PrescriptionRecord>,
}

impl CohortDataset {
    /// Returns the first record (by position) that references an unknown patient.
    pub fn dangling_reference(&self) -> Option<PatientId> {
        let known: HashSet<PatientId> = self.patients.iter().map(|p| p.patient_id).collect();
        self.medical
            .iter()
            .map(|r| r.patient_id)
            .chain(self.therapy.iter().map(|r| r.patient_id))
            .find(|id| !known.contains(id))
    }

    /// Drug names present in the therapy table, sorted.
    pub fn drug_names(&self) -> Vec<String> {
        let mut names: Vec<String> = self
            .therapy
            .iter()
            .map(|r| r.drug_name.clone())
            .collect::<HashSet<_>>()
            .into_iter()
            .collect();
        names.sort();
        names
    }

    /// Description for each code, taken from the first medical row that uses it.
    pub fn code_book(&self) -> BTreeMap<ReadCode, String> {
        let mut book = BTreeMap::new();
        for r in &self.medical {
            book.entry(r.outcome.code)
                .or_insert_with(|| r.outcome.description.clone());
        }
        book
    }
}
