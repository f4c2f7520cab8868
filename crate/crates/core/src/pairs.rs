//! Candidate drug/outcome pairs: mining, temporal counts, the temporality
//! filter and labelling.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use rayon::prelude::*;

use crate::code::{OutcomeCode, ReadCode};
use crate::error::IngestError;
use crate::features::FeatureVector;
use crate::index::{CohortIndex, DrugIdx, WINDOW_DAYS};
use crate::ingest::LabelSource;
use crate::model::CohortDataset;

/// Distinct patients that must show the outcome after their first
/// prescription before a pair is considered.
pub const MIN_PATIENTS: usize = 3;

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Label {
    Adr,
    NonAdr,
    Unknown,
}

impl Label {
    pub fn value(self) -> i8 {
        match self {
            Label::Adr => 1,
            Label::NonAdr => 0,
            Label::Unknown => -1,
        }
    }

    pub fn from_value(v: i8) -> Option<Label> {
        match v {
            1 => Some(Label::Adr),
            0 => Some(Label::NonAdr),
            -1 => Some(Label::Unknown),
            _ => None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct DrugEventPair {
    pub drug_name: String,
    pub outcome: OutcomeCode,
    /// Prescriptions followed by the outcome within the window.
    pub count_after: u64,
    /// Prescriptions preceded by the outcome within the window.
    pub count_before: u64,
    pub label: Label,
    pub features: Option<FeatureVector>,
}

impl DrugEventPair {
    pub fn code(&self) -> ReadCode {
        self.outcome.code
    }

    pub fn key(&self) -> (&str, ReadCode) {
        (&self.drug_name, self.outcome.code)
    }
}

/// Mines pairs for each drug in `drugs`. The dataset is expected to be
/// registration-filtered already. Output is sorted by (drug, code).
pub fn generate_candidates(dataset: &CohortDataset, drugs: &[String]) -> Vec<DrugEventPair> {
    generate_candidates_indexed(&CohortIndex::new(dataset), drugs)
}

pub fn generate_candidates_indexed(index: &CohortIndex, drugs: &[String]) -> Vec<DrugEventPair> {
    let wanted: BTreeSet<&str> = drugs.iter().map(String::as_str).collect();
    let mut out: Vec<DrugEventPair> = wanted
        .into_par_iter()
        .filter_map(|name| index.drug_idx(name).map(|d| (name, d)))
        .flat_map_iter(|(name, drug)| candidates_for_drug(index, name, drug))
        .collect();
    out.sort_by(|a, b| (a.drug_name.as_str(), a.outcome.code).cmp(&(b.drug_name.as_str(), b.outcome.code)));
    out
}

fn candidates_for_drug(index: &CohortIndex, name: &str, drug: DrugIdx) -> Vec<DrugEventPair> {
    let mut patients_per_code: BTreeMap<ReadCode, usize> = BTreeMap::new();
    let mut seen: Vec<ReadCode> = Vec::new();
    for p in 0..index.patients().len() {
        let Some(first) = index.first_rx(p, drug) else { continue };
        seen.clear();
        seen.extend(
            index
                .events_between(p, first.day + 1, first.day + WINDOW_DAYS)
                .iter()
                .map(|(_, c)| *c),
        );
        seen.sort_unstable();
        seen.dedup();
        for c in &seen {
            *patients_per_code.entry(*c).or_default() += 1;
        }
    }
    let codes: BTreeSet<ReadCode> = patients_per_code
        .into_iter()
        .filter(|(_, n)| *n >= MIN_PATIENTS)
        .map(|(c, _)| c)
        .collect();
    if codes.is_empty() {
        return Vec::new();
    }
    let counts = window_counts(index, drug, &codes);
    codes
        .into_iter()
        .map(|code| {
            let (after, before) = counts.get(&code).copied().unwrap_or((0, 0));
            DrugEventPair {
                drug_name: name.to_string(),
                outcome: OutcomeCode {
                    code,
                    description: index.description(&code).unwrap_or_default().to_string(),
                },
                count_after: after,
                count_before: before,
                label: Label::Unknown,
                features: None,
            }
        })
        .collect()
}

/// (after, before) counts over every prescription of `drug`, for each code in `codes`.
fn window_counts(
    index: &CohortIndex,
    drug: DrugIdx,
    codes: &BTreeSet<ReadCode>,
) -> BTreeMap<ReadCode, (u64, u64)> {
    let mut counts: BTreeMap<ReadCode, (u64, u64)> = BTreeMap::new();
    let mut hits: Vec<ReadCode> = Vec::new();
    for p in 0..index.patients().len() {
        for rx in index.prescriptions(p).iter().filter(|r| r.drug == drug) {
            for (lo, hi, after) in [
                (rx.day + 1, rx.day + WINDOW_DAYS, true),
                (rx.day - WINDOW_DAYS, rx.day - 1, false),
            ] {
                hits.clear();
                hits.extend(
                    index
                        .events_between(p, lo, hi)
                        .iter()
                        .map(|(_, c)| *c)
                        .filter(|c| codes.contains(c)),
                );
                hits.sort_unstable();
                hits.dedup();
                for c in &hits {
                    let e = counts.entry(*c).or_default();
                    if after {
                        e.0 += 1;
                    } else {
                        e.1 += 1;
                    }
                }
            }
        }
    }
    counts
}

/// Number of prescriptions of the drug followed (A) and preceded (B) by the
/// outcome within the 30-day windows, over all prescriptions.
pub fn temporal_counts(dataset: &CohortDataset, drug_name: &str, outcome: &ReadCode) -> (u64, u64) {
    temporal_counts_indexed(&CohortIndex::new(dataset), drug_name, outcome)
}

pub fn temporal_counts_indexed(index: &CohortIndex, drug_name: &str, outcome: &ReadCode) -> (u64, u64) {
    let Some(drug) = index.drug_idx(drug_name) else {
        return (0, 0);
    };
    let codes = BTreeSet::from([*outcome]);
    window_counts(index, drug, &codes)
        .get(outcome)
        .copied()
        .unwrap_or((0, 0))
}

/// A / max(B, 1) > 1.
pub fn passes_temporality(count_after: u64, count_before: u64) -> bool {
    count_after > count_before.max(1)
}

pub fn filter_candidates(pairs: Vec<DrugEventPair>) -> Vec<DrugEventPair> {
    pairs
        .into_iter()
        .filter(|p| passes_temporality(p.count_after, p.count_before))
        .collect()
}

/// Non-adverse subtree first, then a known-side-effect match; anything else is
/// unknown and dropped.
pub fn label_for(drug_name: &str, outcome: &OutcomeCode, labels: &LabelSource) -> Label {
    if labels.is_non_adverse(&outcome.code) {
        Label::NonAdr
    } else if labels.is_known_side_effect(drug_name, &outcome.description) {
        Label::Adr
    } else {
        Label::Unknown
    }
}

pub fn label_pairs(pairs: Vec<DrugEventPair>, labels: &LabelSource) -> Vec<DrugEventPair> {
    pairs
        .into_iter()
        .filter_map(|mut p| {
            p.label = label_for(&p.drug_name, &p.outcome, labels);
            (p.label != Label::Unknown).then_some(p)
        })
        .collect()
}

pub const PAIRS_HEADER: &[&str] = &["drug_name", "code", "count_after", "count_before", "label"];

pub fn write_pairs_csv(pairs: &[DrugEventPair], path: &Path) -> Result<(), IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = crate::ingest::csv_writer(path)?;
    w.write_record(PAIRS_HEADER).map_err(csv_err)?;
    for p in pairs {
        w.write_record([
            p.drug_name.clone(),
            p.outcome.code.to_string(),
            p.count_after.to_string(),
            p.count_before.to_string(),
            p.label.value().to_string(),
        ])
        .map_err(csv_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Reads `pairs.csv`, restoring descriptions from `code_book`.
pub fn read_pairs_csv(
    path: &Path,
    code_book: &BTreeMap<ReadCode, String>,
) -> Result<Vec<DrugEventPair>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let header_ok = reader
        .headers()
        .map(|h| h.iter().eq(PAIRS_HEADER.iter().copied()))
        .unwrap_or(false);
    if !header_ok {
        return Err(IngestError::Header {
            path: path.to_path_buf(),
            expected: PAIRS_HEADER.join(","),
        });
    }
    let mut out = Vec::new();
    for rec in reader.records() {
        let rec = rec.map_err(|source| IngestError::Csv {
            path: path.to_path_buf(),
            source,
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        let bad = |column: &str, message: String| IngestError::Row {
            path: path.to_path_buf(),
            line,
            column: column.to_string(),
            message,
        };
        let code = ReadCode::parse(&rec[1]).map_err(|e| bad("code", e.to_string()))?;
        let count = |i: usize, col: &str| -> Result<u64, IngestError> {
            rec[i].parse().map_err(|e| bad(col, format!("{e}")))
        };
        let label = rec[4]
            .parse::<i8>()
            .ok()
            .and_then(Label::from_value)
            .ok_or_else(|| bad("label", format!("bad label {:?}", &rec[4])))?;
        out.push(DrugEventPair {
            drug_name: rec[0].to_string(),
            outcome: OutcomeCode {
                code,
                description: code_book.get(&code).cloned().unwrap_or_default(),
            },
            count_after: count(2, "count_after")?,
            count_before: count(3, "count_before")?,
            label,
            features: None,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::OutcomeCode;
    use crate::model::{Gender, MedicalRecord, Patient, PrescriptionRecord};
    use chrono::{Days, NaiveDate};

    fn day(n: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + Days::new(n)
    }

    fn patient(id: u64) -> Patient {
        Patient {
            patient_id: id,
            year_of_birth: 1970,
            gender: Gender::Male,
            practice_id: 1,
            registration_date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        }
    }

    fn rx(id: u64, drug: &str, d: u64) -> PrescriptionRecord {
        PrescriptionRecord {
            patient_id: id,
            drug_name: drug.into(),
            drug_family: "f".into(),
            dosage: 1.0,
            date: day(d),
        }
    }

    fn ev(id: u64, code: &str, d: u64) -> MedicalRecord {
        MedicalRecord {
            patient_id: id,
            outcome: OutcomeCode::new(code, format!("desc {code}")).unwrap(),
            date: day(d),
        }
    }

    fn cohort(n_with_event: u64) -> CohortDataset {
        let mut ds = CohortDataset::default();
        for id in 1..=5 {
            ds.patients.push(patient(id));
            ds.therapy.push(rx(id, "drugx", 100));
            if id <= n_with_event {
                ds.medical.push(ev(id, "B1...", 110));
            }
        }
        ds
    }

    #[test]
    fn patient_threshold() {
        assert!(generate_candidates(&cohort(2), &["drugx".into()]).is_empty());
        let pairs = generate_candidates(&cohort(3), &["drugx".into()]);
        assert_eq!(pairs.len(), 1);
        assert_eq!((pairs[0].count_after, pairs[0].count_before), (3, 0));
        assert_eq!(pairs[0].outcome.description, "desc B1...");
        assert!(generate_candidates(&cohort(3), &["other".into()]).is_empty());
    }

    #[test]
    fn window_edges() {
        let mut ds = CohortDataset::default();
        ds.patients.push(patient(1));
        ds.therapy.push(rx(1, "drugx", 100));
        // Day 0 belongs to neither window; day 130 is the last "after" day, day 70 the first "before" day.
        for d in [100, 130, 131] {
            ds.medical.push(ev(1, "C....", d));
        }
        ds.medical.push(ev(1, "D....", 70));
        ds.medical.push(ev(1, "E....", 69));
        ds.medical.push(ev(1, "F....", 110));
        let code = |s: &str| ReadCode::parse(s).unwrap();
        assert_eq!(temporal_counts(&ds, "drugx", &code("C....")), (1, 0));
        assert_eq!(temporal_counts(&ds, "drugx", &code("D....")), (0, 1));
        assert_eq!(temporal_counts(&ds, "drugx", &code("E....")), (0, 0));
        assert_eq!(temporal_counts(&ds, "drugx", &code("F....")), (1, 0));
        assert_eq!(temporal_counts(&ds, "nodrug", &code("F....")), (0, 0));
    }

    #[test]
    fn counts_use_every_prescription() {
        let mut ds = CohortDataset::default();
        ds.patients.push(patient(1));
        ds.therapy.push(rx(1, "drugx", 100));
        ds.therapy.push(rx(1, "drugx", 200));
        ds.medical.push(ev(1, "C....", 190));
        ds.medical.push(ev(1, "C....", 205));
        let code = ReadCode::parse("C....").unwrap();
        assert_eq!(temporal_counts(&ds, "drugx", &code), (1, 1));
    }

    fn pair(a: u64, b: u64) -> DrugEventPair {
        DrugEventPair {
            drug_name: "d".into(),
            outcome: OutcomeCode::new("A....", "x").unwrap(),
            count_after: a,
            count_before: b,
            label: Label::Unknown,
            features: None,
        }
    }

    #[test]
    fn temporality_filter() {
        let kept = filter_candidates(vec![pair(2, 2), pair(3, 1), pair(2, 0), pair(1, 0), pair(0, 0)]);
        let kept: Vec<_> = kept.iter().map(|p| (p.count_after, p.count_before)).collect();
        assert_eq!(kept, vec![(3, 1), (2, 0)]);
        let twice = filter_candidates(filter_candidates(vec![pair(5, 1), pair(1, 1)]));
        assert_eq!(twice.len(), 1);
    }

    #[test]
    fn labelling_precedence() {
        let labels = LabelSource::from_rows(
            [("Cipro", "NAUSEA"), ("Cipro", "Family history of asthma")],
            [ReadCode::parse("Z....").unwrap()],
        );
        let mk = |code: &str, desc: &str| DrugEventPair {
            drug_name: "cipro".into(),
            outcome: OutcomeCode::new(code, desc).unwrap(),
            ..pair(3, 0)
        };
        let out = label_pairs(
            vec![
                mk("Z1...", "Family history of asthma"),
                mk("A1...", "Nausea"),
                mk("A2...", "Rash"),
                mk("Z....", "Family history"),
            ],
            &labels,
        );
        let got: Vec<_> = out.iter().map(|p| (p.outcome.code.to_string(), p.label)).collect();
        assert_eq!(
            got,
            vec![("Z1...".to_string(), Label::NonAdr), ("A1...".to_string(), Label::Adr)]
        );
        assert!(label_pairs(vec![mk("A1...", "Nausea")], &LabelSource::default()).is_empty());
    }

    #[test]
    fn pairs_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("pairs.csv");
        let mut p = pair(4, 1);
        p.label = Label::Adr;
        write_pairs_csv(&[p.clone()], &path).unwrap();
        let book = BTreeMap::from([(p.outcome.code, "x".to_string())]);
        assert_eq!(read_pairs_csv(&path, &book).unwrap(), vec![p]);
    }
}
