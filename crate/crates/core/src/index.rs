//! Read-only lookup structure over a [`CohortDataset`].
//!
//! Dates become day numbers, drug names and families are interned, and each
//! patient's prescriptions and medical events are held sorted by day so every
//! window query is a binary search plus a short scan.

use std::collections::{BTreeMap, HashMap};

use chrono::Datelike;

use crate::code::ReadCode;
use crate::model::{CohortDataset, Gender, Patient, PatientId};

/// Length of the post- and pre-exposure windows, in days.
pub const WINDOW_DAYS: i32 = 30;
/// Look-back used by the same-family prescription filter, in days.
pub const FAMILY_LOOKBACK_DAYS: i32 = 365;

pub type Day = i32;
pub type DrugIdx = usize;
pub type PatientIdx = usize;

pub fn day_number(date: chrono::NaiveDate) -> Day {
    date.num_days_from_ce()
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Rx {
    pub day: Day,
    pub drug: DrugIdx,
    pub family: usize,
    pub dosage: f64,
}

#[derive(Clone, Debug)]
pub struct CohortIndex {
    patients: Vec<Patient>,
    patient_pos: HashMap<PatientId, PatientIdx>,
    drugs: Vec<String>,
    drug_pos: HashMap<String, DrugIdx>,
    /// Per patient, sorted by (day, drug).
    rx: Vec<Vec<Rx>>,
    /// Per patient, sorted by (day, code).
    events: Vec<Vec<(Day, ReadCode)>>,
    code_book: BTreeMap<ReadCode, String>,
    /// (practice, gender) -> patients sorted by (year_of_birth, patient_id).
    strata: HashMap<(u64, Gender), Vec<PatientIdx>>,
}

impl CohortIndex {
    pub fn new(dataset: &CohortDataset) -> Self {
        let mut patients = dataset.patients.clone();
        patients.sort_by_key(|p| p.patient_id);
        let patient_pos: HashMap<_, _> = patients
            .iter()
            .enumerate()
            .map(|(i, p)| (p.patient_id, i))
            .collect();

        let drugs = dataset.drug_names();
        let drug_pos: HashMap<_, _> = drugs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.clone(), i))
            .collect();
        let mut families: Vec<&str> = dataset.therapy.iter().map(|r| r.drug_family.as_str()).collect();
        families.sort_unstable();
        families.dedup();
        let family_pos: HashMap<&str, usize> =
            families.iter().enumerate().map(|(i, f)| (*f, i)).collect();

        let mut rx = vec![Vec::new(); patients.len()];
        for r in &dataset.therapy {
            let Some(&p) = patient_pos.get(&r.patient_id) else { continue };
            rx[p].push(Rx {
                day: day_number(r.date),
                drug: drug_pos[&r.drug_name],
                family: family_pos[r.drug_family.as_str()],
                dosage: r.dosage,
            });
        }
        for list in &mut rx {
            list.sort_by(|a, b| {
                (a.day, a.drug)
                    .cmp(&(b.day, b.drug))
                    .then(a.dosage.total_cmp(&b.dosage))
            });
        }

        let mut events = vec![Vec::new(); patients.len()];
        for r in &dataset.medical {
            let Some(&p) = patient_pos.get(&r.patient_id) else { continue };
            events[p].push((day_number(r.date), r.outcome.code));
        }
        for list in &mut events {
            list.sort_unstable();
            list.dedup();
        }

        let mut strata: HashMap<(u64, Gender), Vec<PatientIdx>> = HashMap::new();
        for (i, p) in patients.iter().enumerate() {
            strata.entry((p.practice_id, p.gender)).or_default().push(i);
        }
        for members in strata.values_mut() {
            members.sort_by_key(|&i| (patients[i].year_of_birth, patients[i].patient_id));
        }

        CohortIndex {
            patients,
            patient_pos,
            drugs,
            drug_pos,
            rx,
            events,
            code_book: dataset.code_book(),
            strata,
        }
    }

    /// Copy of this index with every prescription removed that was preceded,
    /// within [`FAMILY_LOOKBACK_DAYS`], by a prescription from the same drug
    /// family (the drug itself included). The look-back runs over the
    /// unfiltered history.
    pub fn without_same_family_repeats(&self) -> Self {
        let rx = self
            .rx
            .iter()
            .map(|list| {
                list.iter()
                    .filter(|r| {
                        !list.iter().any(|prev| {
                            prev.family == r.family
                                && prev.day < r.day
                                && prev.day >= r.day - FAMILY_LOOKBACK_DAYS
                        })
                    })
                    .copied()
                    .collect()
            })
            .collect();
        CohortIndex {
            rx,
            ..self.clone()
        }
    }

    pub fn patients(&self) -> &[Patient] {
        &self.patients
    }

    pub fn patient(&self, idx: PatientIdx) -> &Patient {
        &self.patients[idx]
    }

    pub fn patient_idx(&self, id: PatientId) -> Option<PatientIdx> {
        self.patient_pos.get(&id).copied()
    }

    pub fn drugs(&self) -> &[String] {
        &self.drugs
    }

    pub fn drug_idx(&self, name: &str) -> Option<DrugIdx> {
        self.drug_pos.get(name).copied()
    }

    pub fn description(&self, code: &ReadCode) -> Option<&str> {
        self.code_book.get(code).map(String::as_str)
    }

    pub fn code_book(&self) -> &BTreeMap<ReadCode, String> {
        &self.code_book
    }

    pub fn prescriptions(&self, patient: PatientIdx) -> &[Rx] {
        &self.rx[patient]
    }

    pub fn events(&self, patient: PatientIdx) -> &[(Day, ReadCode)] {
        &self.events[patient]
    }

    /// Earliest prescription of `drug` for the patient.
    pub fn first_rx(&self, patient: PatientIdx, drug: DrugIdx) -> Option<&Rx> {
        self.rx[patient].iter().find(|r| r.drug == drug)
    }

    /// Earliest prescription of any drug other than `drug`.
    pub fn first_other_rx(&self, patient: PatientIdx, drug: DrugIdx) -> Option<&Rx> {
        self.rx[patient].iter().find(|r| r.drug != drug)
    }

    /// Events of the patient with `lo <= day <= hi`.
    pub fn events_between(&self, patient: PatientIdx, lo: Day, hi: Day) -> &[(Day, ReadCode)] {
        let list = &self.events[patient];
        let start = list.partition_point(|(d, _)| *d < lo);
        let end = list.partition_point(|(d, _)| *d <= hi);
        &list[start..end.max(start)]
    }

    /// The code is recorded in the post-exposure window `(day, day + 30]`.
    pub fn has_event_after(&self, patient: PatientIdx, code: &ReadCode, day: Day) -> bool {
        self.events_between(patient, day + 1, day + WINDOW_DAYS)
            .iter()
            .any(|(_, c)| c == code)
    }

    /// The code is recorded in the pre-exposure window `[day - 30, day)`.
    pub fn has_event_before(&self, patient: PatientIdx, code: &ReadCode, day: Day) -> bool {
        self.events_between(patient, day - WINDOW_DAYS, day - 1)
            .iter()
            .any(|(_, c)| c == code)
    }

    /// Up to `k` patients from the case's practice and gender, nearest in year
    /// of birth, ties broken by smaller patient id. The case is excluded.
    pub fn matched_controls(&self, case: PatientIdx, k: usize) -> Vec<PatientIdx> {
        let p = &self.patients[case];
        let Some(pool) = self.strata.get(&(p.practice_id, p.gender)) else {
            return Vec::new();
        };
        let mut ranked: Vec<PatientIdx> = pool.iter().copied().filter(|&i| i != case).collect();
        ranked.sort_by_key(|&i| {
            let q = &self.patients[i];
            ((q.year_of_birth - p.year_of_birth).abs(), q.patient_id)
        });
        ranked.truncate(k);
        ranked
    }
}
