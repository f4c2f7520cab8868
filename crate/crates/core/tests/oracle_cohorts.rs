//! Random hand-built cohorts compared against the brute-force oracles.

mod common;

use std::collections::BTreeMap;

use chrono::{Days, NaiveDate};
use hillsignal::features::longitudinal::{ComparatorStrategy, LongitudinalExtractor};
use hillsignal::index::CohortIndex;
use hillsignal::ingest::{apply_registration_filter, LabelSource};
use hillsignal::pairs::{filter_candidates, generate_candidates_indexed, label_pairs};
use hillsignal::{CohortDataset, Gender, MedicalRecord, OutcomeCode, Patient, PrescriptionRecord, ReadCode};
use proptest::prelude::*;

use common::Comparator;

const CODES: [(&str, &str); 6] = [
    ("A....", "Nausea"),
    ("A1...", "Nausea type 1"),
    ("A11..", "Nausea type 1.1"),
    ("B....", "Rash"),
    ("Z....", "Family history"),
    ("Z1...", "Family history of asthma"),
];
const DRUGS: [(&str, &str); 3] = [("alpha", "f1"), ("beta", "f1"), ("gamma", "f2")];

fn base() -> NaiveDate {
    NaiveDate::from_ymd_opt(2012, 1, 1).expect("valid date")
}

fn day(offset: u64) -> NaiveDate {
    base().checked_add_days(Days::new(offset)).expect("in range")
}

prop_compose! {
    fn patient(id: u64)(yob in 1940..2000i32, male in any::<bool>(), practice in 1..3u64, reg in 0..420u64) -> Patient {
        Patient {
            patient_id: id,
            year_of_birth: yob,
            gender: if male { Gender::Male } else { Gender::Female },
            practice_id: practice,
            registration_date: NaiveDate::from_ymd_opt(2010, 1, 1).expect("valid date") + Days::new(reg),
        }
    }
}

fn cohort() -> impl Strategy<Value = CohortDataset> {
    (4..10u64)
        .prop_flat_map(|n| {
            let patients: Vec<_> = (1..=n).map(patient).collect();
            let rx = prop::collection::vec((1..=n, 0..3usize, 0..150u64, 1..4u32), 0..40);
            let ev = prop::collection::vec((1..=n, 0..CODES.len(), 0..180u64), 0..120);
            (patients, rx, ev)
        })
        .prop_map(|(patients, rx, ev)| CohortDataset {
            patients,
            therapy: rx
                .into_iter()
                .map(|(p, d, t, dose)| PrescriptionRecord {
                    patient_id: p,
                    drug_name: DRUGS[d].0.into(),
                    drug_family: DRUGS[d].1.into(),
                    dosage: f64::from(dose) * 5.0,
                    date: day(t),
                })
                .collect(),
            medical: ev
                .into_iter()
                .map(|(p, c, t)| MedicalRecord {
                    patient_id: p,
                    outcome: OutcomeCode::new(CODES[c].0, CODES[c].1).expect("valid code"),
                    date: day(t),
                })
                .collect(),
        })
}

fn labels() -> LabelSource {
    LabelSource::from_rows(
        [
            ("alpha", "nausea"),
            ("alpha", "FAMILY HISTORY OF ASTHMA"),
            ("beta", " Nausea type 1 "),
            ("gamma", "rash"),
            ("gamma", "Nausea type 1.1"),
        ],
        [ReadCode::parse("Z....").expect("valid code")],
    )
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(300))]

    #[test]
    fn candidates_counts_and_labels_match_enumeration(raw in cohort()) {
        let ds = apply_registration_filter(&raw);
        let labels = labels();
        let index = CohortIndex::new(&ds);
        let drugs = ds.drug_names();
        let candidates = generate_candidates_indexed(&index, &drugs);
        let got: BTreeMap<(String, ReadCode), (u64, u64)> = candidates
            .iter()
            .map(|p| ((p.drug_name.clone(), p.code()), (p.count_after, p.count_before)))
            .collect();
        let mut want = BTreeMap::new();
        for drug in &drugs {
            for code in common::candidate_codes(&ds, drug) {
                want.insert((drug.clone(), code), common::temporal_counts(&ds, drug, &code));
            }
        }
        prop_assert_eq!(got, want);

        let mined: Vec<_> = label_pairs(filter_candidates(candidates), &labels)
            .into_iter()
            .map(|p| (p.drug_name.clone(), p.code(), p.count_after, p.count_before, p.label))
            .collect();
        prop_assert_eq!(mined, common::mined_pairs(&ds, &labels));
    }

    #[test]
    fn longitudinal_features_match_oracle(raw in cohort()) {
        let ds = apply_registration_filter(&raw);
        let index = CohortIndex::new(&ds);
        let candidates = generate_candidates_indexed(&index, &ds.drug_names());
        for (strategy, comparator) in [
            (ComparatorStrategy::other_drugs(), Comparator::OtherDrugs),
            (ComparatorStrategy::matched(1), Comparator::Matched(1)),
            (ComparatorStrategy::matched(3), Comparator::Matched(3)),
        ] {
            let extractor = LongitudinalExtractor::from_index(index.clone(), strategy);
            for pair in &candidates {
                let got = extractor.extract(pair).ok();
                let want = common::longitudinal(&ds, &pair.drug_name, &pair.code(), pair.count_after, pair.count_before, comparator);
                prop_assert_eq!(got.is_some(), want.is_some(), "{:?} {} {}", comparator, pair.drug_name, pair.code());
                if let (Some(g), Some(w)) = (got, want) {
                    for k in 0..10 {
                        prop_assert!((g[k] - w[k]).abs() <= 1e-12, "x{}: {} vs {}", k + 1, g[k], w[k]);
                    }
                }
            }
        }
    }

    #[test]
    fn matched_controls_match_oracle(raw in cohort(), k in 0..5usize) {
        for p in &raw.patients {
            prop_assert_eq!(
                hillsignal::features::longitudinal::select_matched_controls(&raw, p.patient_id, k),
                common::matched_controls(&raw, p.patient_id, k)
            );
        }
    }
}

#[test]
fn two_patients_are_not_enough() {
    let toy = common::threshold_toy();
    for (n, expected) in [(1, 0), (2, 0), (3, 1), (4, 1)] {
        let ds = toy(n);
        let index = CohortIndex::new(&ds);
        assert_eq!(generate_candidates_indexed(&index, &ds.drug_names()).len(), expected, "{n} patients");
    }
}

#[test]
fn non_adverse_root_wins_over_known_side_effect() {
    let labels = labels();
    let code = ReadCode::parse("Z1...").expect("valid code");
    assert_eq!(
        common::label(&labels, "alpha", &code, "Family history of asthma"),
        hillsignal::Label::NonAdr
    );
    assert_eq!(
        hillsignal::pairs::label_for("alpha", &OutcomeCode::new("Z1...", "Family history of asthma").expect("valid code"), &labels),
        hillsignal::Label::NonAdr
    );
}
