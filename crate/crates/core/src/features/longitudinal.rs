//! Features x1 to x10, computed from the longitudinal tables.
//!
//! The exposed group for a pair is every patient at their first prescription
//! of the drug. Whether a patient "has the event" always means the outcome
//! code is recorded in the 30 days after the index prescription.

use chrono::{Datelike, NaiveDate};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::code::ReadCode;
use crate::error::FeatureError;
use crate::features::{FeatureVector, FEATURE_COUNT, LONGITUDINAL_COUNT};
use crate::index::{CohortIndex, Day, DrugIdx, PatientIdx, WINDOW_DAYS};
use crate::model::{CohortDataset, Gender, PatientId};
use crate::pairs::DrugEventPair;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ComparatorKind {
    /// First prescription of any other drug, once per patient.
    OtherDrugs,
    /// Same practice and gender, nearest year of birth, indexed at the case's date.
    #[serde(alias = "matched")]
    MatchedControls,
}

impl std::str::FromStr for ComparatorKind {
    type Err = crate::error::ConfigError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "other-drugs" | "other_drugs" => Ok(ComparatorKind::OtherDrugs),
            "matched" | "matched-controls" | "matched_controls" => Ok(ComparatorKind::MatchedControls),
            other => Err(crate::error::ConfigError::Pipeline(format!("unknown comparator {other:?}"))),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ComparatorStrategy {
    pub kind: ComparatorKind,
    pub matched_controls_per_case: usize,
}

impl Default for ComparatorStrategy {
    fn default() -> Self {
        ComparatorStrategy {
            kind: ComparatorKind::OtherDrugs,
            matched_controls_per_case: 2,
        }
    }
}

impl ComparatorStrategy {
    pub fn other_drugs() -> Self {
        Self::default()
    }

    pub fn matched(k: usize) -> Self {
        ComparatorStrategy {
            kind: ComparatorKind::MatchedControls,
            matched_controls_per_case: k.max(1),
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct RiskSummary {
    pub exposed_with_event: u64,
    pub exposed_total: u64,
    pub comparator_with_event: u64,
    pub comparator_total: u64,
}

impl RiskSummary {
    pub fn new(exposed_with_event: u64, exposed_total: u64, comparator_with_event: u64, comparator_total: u64) -> Self {
        RiskSummary {
            exposed_with_event,
            exposed_total,
            comparator_with_event,
            comparator_total,
        }
    }

    /// Exchanges the roles of the two groups.
    pub fn swapped(&self) -> Self {
        RiskSummary::new(
            self.comparator_with_event,
            self.comparator_total,
            self.exposed_with_event,
            self.exposed_total,
        )
    }
}

pub fn risk(with_event: u64, total: u64) -> Result<f64, FeatureError> {
    if total == 0 {
        return Err(FeatureError::EmptyGroup);
    }
    if with_event > total {
        return Err(FeatureError::CountExceedsTotal { with_event, total });
    }
    Ok(with_event as f64 / total as f64)
}

pub fn risk_difference(s: &RiskSummary) -> Result<f64, FeatureError> {
    Ok(risk(s.exposed_with_event, s.exposed_total)? - risk(s.comparator_with_event, s.comparator_total)?)
}

/// Comparator events are floored at one so the ratio stays finite.
pub fn risk_ratio(s: &RiskSummary) -> Result<f64, FeatureError> {
    let exposed = risk(s.exposed_with_event, s.exposed_total)?;
    risk(s.comparator_with_event, s.comparator_total)?;
    let floored = s.comparator_with_event.max(1).min(s.comparator_total);
    Ok(exposed / (floored as f64 / s.comparator_total as f64))
}

/// Comparator events are floored at one; a comparator in which everyone had
/// the event has infinite odds and yields 0.
pub fn odds_ratio(s: &RiskSummary) -> Result<f64, FeatureError> {
    risk(s.exposed_with_event, s.exposed_total)?;
    risk(s.comparator_with_event, s.comparator_total)?;
    if s.exposed_with_event == s.exposed_total {
        return Err(FeatureError::InfiniteOdds);
    }
    let exposed_odds = s.exposed_with_event as f64 / (s.exposed_total - s.exposed_with_event) as f64;
    let c = s.comparator_with_event.max(1);
    if c >= s.comparator_total {
        return Ok(0.0);
    }
    let comparator_odds = c as f64 / (s.comparator_total - c) as f64;
    Ok(exposed_odds / comparator_odds)
}

/// Up to `k` controls for the case; see [`CohortIndex::matched_controls`].
pub fn select_matched_controls(dataset: &CohortDataset, case_patient_id: PatientId, k: usize) -> Vec<PatientId> {
    let index = CohortIndex::new(dataset);
    let Some(case) = index.patient_idx(case_patient_id) else {
        return Vec::new();
    };
    index
        .matched_controls(case, k)
        .into_iter()
        .map(|i| index.patient(i).patient_id)
        .collect()
}

#[derive(Clone, Copy, Debug)]
struct Exposure {
    patient: PatientIdx,
    day: Day,
    dosage: f64,
    event: bool,
}

fn year_of(day: Day) -> i32 {
    NaiveDate::from_num_days_from_ce_opt(day).map_or(0, |d| d.year())
}

/// Feature extractor over one registration-filtered cohort.
#[derive(Clone, Debug)]
pub struct LongitudinalExtractor {
    index: CohortIndex,
    family_filtered: CohortIndex,
    strategy: ComparatorStrategy,
}

impl LongitudinalExtractor {
    pub fn new(dataset: &CohortDataset, strategy: ComparatorStrategy) -> Self {
        Self::from_index(CohortIndex::new(dataset), strategy)
    }

    pub fn from_index(index: CohortIndex, strategy: ComparatorStrategy) -> Self {
        let family_filtered = index.without_same_family_repeats();
        LongitudinalExtractor {
            index,
            family_filtered,
            strategy,
        }
    }

    pub fn index(&self) -> &CohortIndex {
        &self.index
    }

    pub fn strategy(&self) -> ComparatorStrategy {
        self.strategy
    }

    fn drug(&self, pair: &DrugEventPair) -> Result<DrugIdx, FeatureError> {
        self.index
            .drug_idx(&pair.drug_name)
            .ok_or_else(|| FeatureError::NoExposed {
                drug: pair.drug_name.clone(),
            })
    }

    fn exposed(index: &CohortIndex, drug: DrugIdx, code: &ReadCode) -> Vec<Exposure> {
        (0..index.patients().len())
            .filter_map(|p| {
                index.first_rx(p, drug).map(|rx| Exposure {
                    patient: p,
                    day: rx.day,
                    dosage: rx.dosage,
                    event: index.has_event_after(p, code, rx.day),
                })
            })
            .collect()
    }

    /// (with_event, total) for the comparator group.
    fn comparator(&self, index: &CohortIndex, drug: DrugIdx, code: &ReadCode, exposed: &[Exposure]) -> (u64, u64) {
        let mut with_event = 0;
        let mut total = 0;
        match self.strategy.kind {
            ComparatorKind::OtherDrugs => {
                for p in 0..index.patients().len() {
                    if let Some(rx) = index.first_other_rx(p, drug) {
                        total += 1;
                        with_event += u64::from(index.has_event_after(p, code, rx.day));
                    }
                }
            }
            ComparatorKind::MatchedControls => {
                for case in exposed {
                    for control in index.matched_controls(case.patient, self.strategy.matched_controls_per_case) {
                        total += 1;
                        with_event += u64::from(index.has_event_after(control, code, case.day));
                    }
                }
            }
        }
        (with_event, total)
    }

    fn summary_on(&self, index: &CohortIndex, pair: &DrugEventPair) -> Result<(RiskSummary, Vec<Exposure>), FeatureError> {
        let drug = self.drug(pair)?;
        let exposed = Self::exposed(index, drug, &pair.code());
        let (c, tc) = self.comparator(index, drug, &pair.code(), &exposed);
        let e = exposed.iter().filter(|x| x.event).count() as u64;
        Ok((RiskSummary::new(e, exposed.len() as u64, c, tc), exposed))
    }

    /// Counts behind x1 to x3.
    pub fn risk_summary(&self, pair: &DrugEventPair) -> Result<RiskSummary, FeatureError> {
        self.summary_on(&self.index, pair).map(|(s, _)| s)
    }

    /// Counts behind x4.
    pub fn family_filtered_summary(&self, pair: &DrugEventPair) -> Result<RiskSummary, FeatureError> {
        self.summary_on(&self.family_filtered, pair).map(|(s, _)| s)
    }

    fn check_groups(&self, s: &RiskSummary, pair: &DrugEventPair) -> Result<(), FeatureError> {
        if s.exposed_total == 0 {
            return Err(FeatureError::NoExposed {
                drug: pair.drug_name.clone(),
            });
        }
        if s.comparator_total == 0 {
            return Err(FeatureError::NoComparator {
                drug: pair.drug_name.clone(),
            });
        }
        Ok(())
    }

    /// (x1, x2, x3, x4).
    pub fn extract_association(&self, pair: &DrugEventPair) -> Result<[f64; 4], FeatureError> {
        let s = self.risk_summary(pair)?;
        self.check_groups(&s, pair)?;
        let filtered = self.family_filtered_summary(pair)?;
        if filtered.exposed_total == 0 {
            return Err(FeatureError::NoExposedAfterFamilyFilter {
                drug: pair.drug_name.clone(),
            });
        }
        self.check_groups(&filtered, pair)?;
        Ok([
            risk_difference(&s)?,
            risk_ratio(&s)?,
            odds_ratio(&s)?,
            risk_difference(&filtered)?,
        ])
    }

    /// (x6, x7, x8).
    pub fn extract_specificity(&self, pair: &DrugEventPair) -> Result<[f64; 3], FeatureError> {
        let drug = self.drug(pair)?;
        let exposed = Self::exposed(&self.index, drug, &pair.code());
        let (affected, everyone) = self.split_affected(&exposed, pair)?;

        let mean_age = |group: &[Exposure]| {
            let total: i64 = group
                .iter()
                .map(|x| i64::from(self.index.patient(x.patient).age_in(year_of(x.day))))
                .sum();
            total as f64 / group.len() as f64
        };
        let all_age = mean_age(&everyone);
        let x6 = if all_age == 0.0 { 1.0 } else { mean_age(&affected) / all_age };

        let sex_ratio = |group: &[Exposure]| {
            let males = group
                .iter()
                .filter(|x| self.index.patient(x.patient).gender == Gender::Male)
                .count();
            let females = group.len() - males;
            males as f64 / females.max(1) as f64
        };
        let all_ratio = sex_ratio(&everyone);
        let x7 = if all_ratio == 0.0 { 1.0 } else { sex_ratio(&affected) / all_ratio };

        Ok([x6, x7, pair.code().level() as f64])
    }

    fn split_affected(&self, exposed: &[Exposure], pair: &DrugEventPair) -> Result<(Vec<Exposure>, Vec<Exposure>), FeatureError> {
        if exposed.is_empty() {
            return Err(FeatureError::NoExposed {
                drug: pair.drug_name.clone(),
            });
        }
        let affected: Vec<Exposure> = exposed.iter().filter(|x| x.event).copied().collect();
        if affected.is_empty() {
            return Err(FeatureError::NoAffected {
                drug: pair.drug_name.clone(),
                code: pair.code().to_string(),
            });
        }
        Ok((affected, exposed.to_vec()))
    }

    /// x9: mean index dosage of affected over exposed; 1 when the exposed mean is 0.
    pub fn extract_gradient(&self, pair: &DrugEventPair) -> Result<f64, FeatureError> {
        let drug = self.drug(pair)?;
        let exposed = Self::exposed(&self.index, drug, &pair.code());
        let (affected, everyone) = self.split_affected(&exposed, pair)?;
        let mean = |g: &[Exposure]| g.iter().map(|x| x.dosage).sum::<f64>() / g.len() as f64;
        let all = mean(&everyone);
        Ok(if all == 0.0 { 1.0 } else { mean(&affected) / all })
    }

    /// x10: among patients with at least two distinct prescriptions of the drug,
    /// the share for whom the outcome follows (and did not precede) at least two
    /// of them. Prescriptions are distinct when more than 30 days apart, taken
    /// greedily from the earliest.
    pub fn extract_experimentation(&self, pair: &DrugEventPair) -> f64 {
        let Some(drug) = self.index.drug_idx(&pair.drug_name) else {
            return 0.0;
        };
        let code = pair.code();
        let mut repeaters = 0u64;
        let mut recurring = 0u64;
        for p in 0..self.index.patients().len() {
            let mut distinct: Vec<Day> = Vec::new();
            for rx in self.index.prescriptions(p).iter().filter(|r| r.drug == drug) {
                if distinct.last().is_none_or(|last| rx.day - last > WINDOW_DAYS) {
                    distinct.push(rx.day);
                }
            }
            if distinct.len() < 2 {
                continue;
            }
            repeaters += 1;
            let hits = distinct
                .iter()
                .filter(|&&d| self.index.has_event_after(p, &code, d) && !self.index.has_event_before(p, &code, d))
                .count();
            if hits >= 2 {
                recurring += 1;
            }
        }
        if repeaters == 0 {
            0.0
        } else {
            recurring as f64 / repeaters as f64
        }
    }

    /// x1 to x10, in order.
    pub fn extract(&self, pair: &DrugEventPair) -> Result<[f64; LONGITUDINAL_COUNT], FeatureError> {
        let [x1, x2, x3, x4] = self.extract_association(pair)?;
        let x5 = extract_temporality(pair);
        let [x6, x7, x8] = self.extract_specificity(pair)?;
        let x9 = self.extract_gradient(pair)?;
        let x10 = self.extract_experimentation(pair);
        Ok([x1, x2, x3, x4, x5, x6, x7, x8, x9, x10])
    }
}

/// x5 = A / max(B, 1).
pub fn extract_temporality(pair: &DrugEventPair) -> f64 {
    pair.count_after as f64 / pair.count_before.max(1) as f64
}

#[derive(Clone, Debug, PartialEq)]
pub struct DroppedPair {
    pub drug_name: String,
    pub code: ReadCode,
    pub reason: FeatureError,
}

/// Fills x1 to x10 for every pair (x11 left at 0). Pairs whose extraction
/// fails are dropped with a warning and returned separately. Order is kept.
pub fn extract_longitudinal(
    extractor: &LongitudinalExtractor,
    pairs: Vec<DrugEventPair>,
) -> (Vec<DrugEventPair>, Vec<DroppedPair>) {
    let results: Vec<Result<DrugEventPair, DroppedPair>> = pairs
        .into_par_iter()
        .map(|mut p| match extractor.extract(&p) {
            Ok(x) => {
                let mut v = [0.0; FEATURE_COUNT];
                v[..LONGITUDINAL_COUNT].copy_from_slice(&x);
                p.features = Some(v);
                Ok(p)
            }
            Err(reason) => Err(DroppedPair {
                drug_name: p.drug_name.clone(),
                code: p.code(),
                reason,
            }),
        })
        .collect();
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for r in results {
        match r {
            Ok(p) => kept.push(p),
            Err(d) => {
                log::warn!("dropping pair ({}, {}): {}", d.drug_name, d.code, d.reason);
                dropped.push(d);
            }
        }
    }
    (kept, dropped)
}

pub fn feature_vector(pair: &DrugEventPair) -> Option<&FeatureVector> {
    pair.features.as_ref()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::code::OutcomeCode;
    use crate::model::{MedicalRecord, Patient, PrescriptionRecord};
    use crate::pairs::Label;
    use chrono::Days;

    fn close(a: f64, b: f64) -> bool {
        (a - b).abs() < 1e-12
    }

    #[test]
    fn risk_arithmetic() {
        assert!(close(risk(3, 10).unwrap(), 0.3));
        assert_eq!(risk(0, 7).unwrap(), 0.0);
        assert_eq!(risk(1, 0), Err(FeatureError::EmptyGroup));
        assert!(risk(3, 2).is_err());
    }

    #[test]
    fn risk_difference_examples() {
        let rd = risk_difference(&RiskSummary::new(5, 5, 1, 9)).unwrap();
        assert!(close(rd, 8.0 / 9.0));
        assert_eq!(risk_difference(&RiskSummary::new(2, 10, 2, 10)).unwrap(), 0.0);
        assert_eq!(risk_difference(&RiskSummary::new(0, 10, 0, 10)).unwrap(), 0.0);
        assert!(risk_difference(&RiskSummary::new(0, 10, 0, 0)).is_err());
    }

    #[test]
    fn risk_ratio_examples() {
        assert!(close(risk_ratio(&RiskSummary::new(2, 10, 1, 10)).unwrap(), 2.0));
        assert!(close(risk_ratio(&RiskSummary::new(2, 10, 0, 10)).unwrap(), 2.0));
        assert_eq!(risk_ratio(&RiskSummary::new(0, 10, 5, 10)).unwrap(), 0.0);
        assert!(risk_ratio(&RiskSummary::new(0, 0, 5, 10)).is_err());
    }

    #[test]
    fn odds_ratio_examples() {
        assert!(close(odds_ratio(&RiskSummary::new(1, 11, 1, 11)).unwrap(), 1.0));
        assert!(close(odds_ratio(&RiskSummary::new(2, 12, 0, 12)).unwrap(), 2.2));
        assert_eq!(odds_ratio(&RiskSummary::new(0, 10, 3, 10)).unwrap(), 0.0);
        assert_eq!(odds_ratio(&RiskSummary::new(4, 4, 3, 10)), Err(FeatureError::InfiniteOdds));
        assert_eq!(odds_ratio(&RiskSummary::new(1, 4, 3, 3)).unwrap(), 0.0);
    }

    #[test]
    fn swapping_groups_negates_and_inverts() {
        for (e, te, c, tc) in [(3, 10, 1, 7), (5, 9, 2, 20), (1, 1, 4, 6)] {
            let s = RiskSummary::new(e, te, c, tc);
            let t = s.swapped();
            assert!(close(risk_difference(&s).unwrap(), -risk_difference(&t).unwrap()));
            assert!(close(risk_ratio(&s).unwrap() * risk_ratio(&t).unwrap(), 1.0));
        }
    }

    #[test]
    fn temporality_examples() {
        let mut p = DrugEventPair {
            drug_name: "d".into(),
            outcome: OutcomeCode::new("A....", "a").unwrap(),
            count_after: 6,
            count_before: 2,
            label: Label::Unknown,
            features: None,
        };
        assert_eq!(extract_temporality(&p), 3.0);
        p.count_after = 3;
        p.count_before = 0;
        assert_eq!(extract_temporality(&p), 3.0);
    }

    fn day(n: u64) -> NaiveDate {
        NaiveDate::from_ymd_opt(2010, 1, 1).unwrap() + Days::new(n)
    }

    fn patient(id: u64, yob: i32, gender: Gender, practice: u64) -> Patient {
        Patient {
            patient_id: id,
            year_of_birth: yob,
            gender,
            practice_id: practice,
            registration_date: NaiveDate::from_ymd_opt(2000, 1, 1).unwrap(),
        }
    }

    fn rx(id: u64, drug: &str, family: &str, dose: f64, d: u64) -> PrescriptionRecord {
        PrescriptionRecord {
            patient_id: id,
            drug_name: drug.into(),
            drug_family: family.into(),
            dosage: dose,
            date: day(d),
        }
    }

    fn ev(id: u64, code: &str, d: u64) -> MedicalRecord {
        MedicalRecord {
            patient_id: id,
            outcome: OutcomeCode::new(code, "x").unwrap(),
            date: day(d),
        }
    }

    fn pair(drug: &str, code: &str) -> DrugEventPair {
        DrugEventPair {
            drug_name: drug.into(),
            outcome: OutcomeCode::new(code, "x").unwrap(),
            count_after: 3,
            count_before: 0,
            label: Label::Adr,
            features: None,
        }
    }

    #[test]
    fn matched_controls_selection() {
        let mut ds = CohortDataset::default();
        ds.patients.push(patient(1, 1960, Gender::Male, 1));
        ds.patients.push(patient(2, 1950, Gender::Male, 1));
        ds.patients.push(patient(3, 1962, Gender::Male, 1));
        ds.patients.push(patient(4, 1958, Gender::Male, 1));
        ds.patients.push(patient(5, 1961, Gender::Female, 1));
        ds.patients.push(patient(6, 1960, Gender::Male, 2));
        assert_eq!(select_matched_controls(&ds, 1, 2), vec![3, 4]);
        assert_eq!(select_matched_controls(&ds, 1, 5), vec![3, 4, 2]);
        assert_eq!(select_matched_controls(&ds, 5, 2), Vec::<u64>::new());
        assert_eq!(select_matched_controls(&ds, 99, 2), Vec::<u64>::new());
    }

    #[test]
    fn identical_comparator_gives_zero_difference() {
        // Everyone takes both drugs on the same day, so the "other drug"
        // comparator coincides with the exposed group.
        let mut ds = CohortDataset::default();
        for id in 1..=6 {
            ds.patients.push(patient(id, 1960, Gender::Male, 1));
            ds.therapy.push(rx(id, "a", "fa", 1.0, 100));
            ds.therapy.push(rx(id, "b", "fb", 1.0, 100));
            if id <= 3 {
                ds.medical.push(ev(id, "C....", 105));
            }
        }
        let ext = LongitudinalExtractor::new(&ds, ComparatorStrategy::other_drugs());
        let x = ext.extract_association(&pair("a", "C....")).unwrap();
        assert_eq!(x[0], 0.0);
        assert_eq!(x[3], 0.0);
    }

    #[test]
    fn family_filter_can_empty_the_exposed_group() {
        let mut ds = CohortDataset::default();
        for id in 1..=4 {
            ds.patients.push(patient(id, 1960, Gender::Male, 1));
            ds.therapy.push(rx(id, "sibling", "fam", 1.0, 0));
            ds.therapy.push(rx(id, "a", "fam", 1.0, 100));
            ds.therapy.push(rx(id, "b", "other", 1.0, 100));
            ds.medical.push(ev(id, "C....", 105));
        }
        let ext = LongitudinalExtractor::new(&ds, ComparatorStrategy::other_drugs());
        assert_eq!(
            ext.extract_association(&pair("a", "C....")),
            Err(FeatureError::NoExposedAfterFamilyFilter { drug: "a".into() })
        );
    }

    #[test]
    fn specificity_gradient_and_experimentation() {
        let mut ds = CohortDataset::default();
        // Exposed: ages 60, 60 (affected, both male) and 30, 50 (unaffected, female).
        let people = [(1, 1950, Gender::Male, true, 20.0), (2, 1950, Gender::Male, true, 20.0), (3, 1980, Gender::Female, false, 0.0), (4, 1960, Gender::Female, false, 0.0)];
        for (id, yob, g, affected, dose) in people {
            ds.patients.push(patient(id, yob, g, 1));
            ds.therapy.push(rx(id, "a", "fa", dose, 0));
            if affected {
                ds.medical.push(ev(id, "C1...", 5));
            }
        }
        let ext = LongitudinalExtractor::new(&ds, ComparatorStrategy::other_drugs());
        let [x6, x7, x8] = ext.extract_specificity(&pair("a", "C1...")).unwrap();
        assert!(close(x6, 60.0 / 50.0));
        // affected 2M/0F -> 2 (female count floored at 1); exposed 2M/2F -> 1.
        assert!(close(x7, 2.0));
        assert_eq!(x8, 2.0);
        assert!(close(ext.extract_gradient(&pair("a", "C1...")).unwrap(), 2.0));
        assert_eq!(ext.extract_experimentation(&pair("a", "C1...")), 0.0);
        assert!(matches!(
            ext.extract_specificity(&pair("a", "Q....")),
            Err(FeatureError::NoAffected { .. })
        ));
    }

    #[test]
    fn experimentation_counts_recurrence() {
        let mut ds = CohortDataset::default();
        for id in 1..=4 {
            ds.patients.push(patient(id, 1960, Gender::Male, 1));
            ds.therapy.push(rx(id, "a", "fa", 1.0, 0));
            // 20 days later is not distinct from day 0.
            ds.therapy.push(rx(id, "a", "fa", 1.0, 20));
            ds.therapy.push(rx(id, "a", "fa", 1.0, 100));
        }
        // Patient 1 recurs after both distinct prescriptions.
        ds.medical.push(ev(1, "C....", 10));
        ds.medical.push(ev(1, "C....", 110));
        // Patient 2 recurs, but the second occurrence also precedes day 100.
        ds.medical.push(ev(2, "C....", 10));
        ds.medical.push(ev(2, "C....", 95));
        ds.medical.push(ev(2, "C....", 110));
        // Patient 3 only once.
        ds.medical.push(ev(3, "C....", 10));
        let ext = LongitudinalExtractor::new(&ds, ComparatorStrategy::other_drugs());
        assert!(close(ext.extract_experimentation(&pair("a", "C....")), 0.25));
    }
}
