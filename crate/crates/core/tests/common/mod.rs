//! Brute-force reference implementations. They work on raw records and
//! calendar dates with plain nested loops and share no code with the
//! library beyond the data types.
#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};

use chrono::{Datelike, NaiveDate};
use hillsignal::ingest::{LabelSource, SrsReport};
use hillsignal::syndata::GeneratorConfig;
use hillsignal::{CohortDataset, Gender, Label, PatientId, ReadCode};

pub fn days_between(from: NaiveDate, to: NaiveDate) -> i64 {
    (to - from).num_days()
}

/// Event strictly after `d` and at most 30 days after.
pub fn in_after(d: NaiveDate, event: NaiveDate) -> bool {
    let k = days_between(d, event);
    (1..=30).contains(&k)
}

/// Event at least 30 days before `d` and strictly before it.
pub fn in_before(d: NaiveDate, event: NaiveDate) -> bool {
    let k = days_between(event, d);
    (1..=30).contains(&k)
}

pub fn level(code: &str) -> usize {
    code.char_indices().filter(|(_, c)| *c != '.').map(|(i, _)| i + 1).max().unwrap_or(0)
}

pub fn is_strict_descendant(ancestor: &str, code: &str) -> bool {
    let la = level(ancestor);
    level(code) > la && ancestor[..la] == code[..la]
}

pub fn fold(s: &str) -> String {
    s.trim().to_lowercase()
}

fn has_event(ds: &CohortDataset, patient: PatientId, code: &ReadCode, pred: impl Fn(NaiveDate) -> bool) -> bool {
    ds.medical
        .iter()
        .any(|m| m.patient_id == patient && m.outcome.code == *code && pred(m.date))
}

/// (date, dosage) of the patient's earliest prescription of `drug`; among
/// same-day records the smallest dosage.
pub fn first_rx(ds: &CohortDataset, patient: PatientId, drug: &str) -> Option<(NaiveDate, f64)> {
    let mut best: Option<(NaiveDate, f64)> = None;
    for r in &ds.therapy {
        if r.patient_id == patient && r.drug_name == drug {
            let better = match best {
                None => true,
                Some((d, dose)) => r.date < d || (r.date == d && r.dosage < dose),
            };
            if better {
                best = Some((r.date, r.dosage));
            }
        }
    }
    best
}

/// Earliest date of any prescription of a different drug.
pub fn first_other_rx(ds: &CohortDataset, patient: PatientId, drug: &str) -> Option<NaiveDate> {
    ds.therapy
        .iter()
        .filter(|r| r.patient_id == patient && r.drug_name != drug)
        .map(|r| r.date)
        .min()
}

/// Codes seen after the first prescription of `drug` for at least three patients.
pub fn candidate_codes(ds: &CohortDataset, drug: &str) -> BTreeSet<ReadCode> {
    let mut patients_per_code: BTreeMap<ReadCode, BTreeSet<PatientId>> = BTreeMap::new();
    for p in &ds.patients {
        let Some((d, _)) = first_rx(ds, p.patient_id, drug) else { continue };
        for m in &ds.medical {
            if m.patient_id == p.patient_id && in_after(d, m.date) {
                patients_per_code.entry(m.outcome.code).or_default().insert(p.patient_id);
            }
        }
    }
    patients_per_code
        .into_iter()
        .filter(|(_, s)| s.len() >= 3)
        .map(|(c, _)| c)
        .collect()
}

/// (A, B) over every prescription of the drug.
pub fn temporal_counts(ds: &CohortDataset, drug: &str, code: &ReadCode) -> (u64, u64) {
    let mut a = 0;
    let mut b = 0;
    for r in ds.therapy.iter().filter(|r| r.drug_name == drug) {
        if has_event(ds, r.patient_id, code, |e| in_after(r.date, e)) {
            a += 1;
        }
        if has_event(ds, r.patient_id, code, |e| in_before(r.date, e)) {
            b += 1;
        }
    }
    (a, b)
}

pub fn label(labels: &LabelSource, drug: &str, code: &ReadCode, description: &str) -> Label {
    let non_adverse = labels
        .non_adverse_roots
        .iter()
        .any(|r| is_strict_descendant(r.as_str(), code.as_str()));
    if non_adverse {
        return Label::NonAdr;
    }
    let known = labels
        .known_side_effects
        .iter()
        .any(|(d, set)| fold(d) == fold(drug) && set.iter().any(|s| fold(s) == fold(description)));
    if known {
        Label::Adr
    } else {
        Label::Unknown
    }
}

/// Every mined pair as (drug, code, A, B, label) after filter and labelling.
pub fn mined_pairs(ds: &CohortDataset, labels: &LabelSource) -> Vec<(String, ReadCode, u64, u64, Label)> {
    let book = ds.code_book();
    let drugs: BTreeSet<&str> = ds.therapy.iter().map(|r| r.drug_name.as_str()).collect();
    let mut out = Vec::new();
    for drug in drugs {
        for code in candidate_codes(ds, drug) {
            let (a, b) = temporal_counts(ds, drug, &code);
            if (a as f64) / (b.max(1) as f64) <= 1.0 {
                continue;
            }
            let l = label(labels, drug, &code, &book[&code]);
            if l != Label::Unknown {
                out.push((drug.to_string(), code, a, b, l));
            }
        }
    }
    out
}

/// Up to `k` patients sharing practice and gender, nearest birth year then smallest id.
pub fn matched_controls(ds: &CohortDataset, case: PatientId, k: usize) -> Vec<PatientId> {
    let Some(c) = ds.patients.iter().find(|p| p.patient_id == case) else {
        return Vec::new();
    };
    let mut pool: Vec<(i32, PatientId)> = ds
        .patients
        .iter()
        .filter(|p| p.patient_id != case && p.practice_id == c.practice_id && p.gender == c.gender)
        .map(|p| ((p.year_of_birth - c.year_of_birth).abs(), p.patient_id))
        .collect();
    pool.sort();
    pool.into_iter().take(k).map(|(_, id)| id).collect()
}

/// The dataset with every prescription removed that has a same-family
/// prescription in the 365 days before it.
pub fn family_filtered(ds: &CohortDataset) -> CohortDataset {
    let therapy = ds
        .therapy
        .iter()
        .filter(|r| {
            !ds.therapy.iter().any(|q| {
                q.patient_id == r.patient_id
                    && q.drug_family == r.drug_family
                    && (1..=365).contains(&days_between(q.date, r.date))
            })
        })
        .cloned()
        .collect();
    CohortDataset {
        therapy,
        ..ds.clone()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Comparator {
    OtherDrugs,
    Matched(usize),
}

/// (e, Te, c, Tc).
pub fn risk_counts(ds: &CohortDataset, drug: &str, code: &ReadCode, comparator: Comparator) -> (u64, u64, u64, u64) {
    let (mut e, mut te, mut c, mut tc) = (0, 0, 0, 0);
    for p in &ds.patients {
        if let Some((d, _)) = first_rx(ds, p.patient_id, drug) {
            te += 1;
            e += u64::from(has_event(ds, p.patient_id, code, |x| in_after(d, x)));
            if let Comparator::Matched(k) = comparator {
                for control in matched_controls(ds, p.patient_id, k) {
                    tc += 1;
                    c += u64::from(has_event(ds, control, code, |x| in_after(d, x)));
                }
            }
        }
        if comparator == Comparator::OtherDrugs {
            if let Some(d) = first_other_rx(ds, p.patient_id, drug) {
                tc += 1;
                c += u64::from(has_event(ds, p.patient_id, code, |x| in_after(d, x)));
            }
        }
    }
    (e, te, c, tc)
}

/// x1 to x10, or `None` when the library must refuse the pair.
pub fn longitudinal(
    ds: &CohortDataset,
    drug: &str,
    code: &ReadCode,
    count_after: u64,
    count_before: u64,
    comparator: Comparator,
) -> Option<[f64; 10]> {
    let (e, te, c, tc) = risk_counts(ds, drug, code, comparator);
    if te == 0 || tc == 0 || e == te {
        return None;
    }
    let rd = |e: u64, te: u64, c: u64, tc: u64| e as f64 / te as f64 - c as f64 / tc as f64;
    let x1 = rd(e, te, c, tc);
    let cf = c.max(1);
    let x2 = (e as f64 / te as f64) / (cf as f64 / tc as f64);
    let x3 = if cf >= tc {
        0.0
    } else {
        (e as f64 / (te - e) as f64) / (cf as f64 / (tc - cf) as f64)
    };
    let filtered = family_filtered(ds);
    let (fe, fte, fc, ftc) = risk_counts(&filtered, drug, code, comparator);
    if fte == 0 || ftc == 0 {
        return None;
    }
    let x4 = rd(fe, fte, fc, ftc);
    let x5 = count_after as f64 / count_before.max(1) as f64;

    let mut exposed = Vec::new();
    for p in &ds.patients {
        if let Some((d, dose)) = first_rx(ds, p.patient_id, drug) {
            let affected = has_event(ds, p.patient_id, code, |x| in_after(d, x));
            exposed.push((p, d, dose, affected));
        }
    }
    let affected: Vec<_> = exposed.iter().filter(|x| x.3).collect();
    if affected.is_empty() {
        return None;
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let age = |x: &&(&hillsignal::Patient, NaiveDate, f64, bool)| f64::from(x.1.year() - x.0.year_of_birth);
    let all_age = mean(&exposed.iter().map(|x| age(&x)).collect::<Vec<_>>());
    let aff_age = mean(&affected.iter().map(age).collect::<Vec<_>>());
    let x6 = if all_age == 0.0 { 1.0 } else { aff_age / all_age };
    let ratio = |g: Vec<Gender>| {
        let m = g.iter().filter(|x| **x == Gender::Male).count();
        let f = g.len() - m;
        m as f64 / f.max(1) as f64
    };
    let all_ratio = ratio(exposed.iter().map(|x| x.0.gender).collect());
    let aff_ratio = ratio(affected.iter().map(|x| x.0.gender).collect());
    let x7 = if all_ratio == 0.0 { 1.0 } else { aff_ratio / all_ratio };
    let x8 = level(code.as_str()) as f64;
    let all_dose = mean(&exposed.iter().map(|x| x.2).collect::<Vec<_>>());
    let aff_dose = mean(&affected.iter().map(|x| x.2).collect::<Vec<_>>());
    let x9 = if all_dose == 0.0 { 1.0 } else { aff_dose / all_dose };

    let (mut repeaters, mut recurring) = (0u64, 0u64);
    for p in &ds.patients {
        let mut dates: Vec<NaiveDate> = ds
            .therapy
            .iter()
            .filter(|r| r.patient_id == p.patient_id && r.drug_name == drug)
            .map(|r| r.date)
            .collect();
        dates.sort();
        let mut distinct: Vec<NaiveDate> = Vec::new();
        for d in dates {
            if distinct.last().is_none_or(|&l| days_between(l, d) > 30) {
                distinct.push(d);
            }
        }
        if distinct.len() < 2 {
            continue;
        }
        repeaters += 1;
        let hits = distinct
            .iter()
            .filter(|&&d| {
                has_event(ds, p.patient_id, code, |x| in_after(d, x)) && !has_event(ds, p.patient_id, code, |x| in_before(d, x))
            })
            .count();
        if hits >= 2 {
            recurring += 1;
        }
    }
    let x10 = if repeaters == 0 {
        0.0
    } else {
        recurring as f64 / repeaters as f64
    };
    Some([x1, x2, x3, x4, x5, x6, x7, x8, x9, x10])
}

/// (a, b, c, d) over distinct report ids.
pub fn contingency(reports: &[SrsReport], drug: &str, outcome: &str) -> (u64, u64, u64, u64) {
    let ids: BTreeSet<&str> = reports.iter().map(|r| r.report_id.as_str()).collect();
    let (mut a, mut b, mut c, mut d) = (0, 0, 0, 0);
    for id in ids {
        let rows: Vec<&SrsReport> = reports.iter().filter(|r| r.report_id == id).collect();
        let has_drug = rows.iter().any(|r| fold(&r.drug_name) == fold(drug));
        let has_outcome = rows.iter().any(|r| fold(&r.outcome_description) == fold(outcome));
        match (has_drug, has_outcome) {
            (true, true) => a += 1,
            (true, false) => b += 1,
            (false, true) => c += 1,
            (false, false) => d += 1,
        }
    }
    (a, b, c, d)
}

pub fn consistency(years: &BTreeMap<i32, Vec<SrsReport>>, drug: &str, outcome: &str) -> u32 {
    let mut n = 0;
    for reports in years.values() {
        let (a, b, c, d) = contingency(reports, drug, outcome);
        if a == 0 {
            continue;
        }
        let other = if c + d == 0 { 0.0 } else { c as f64 / (c + d) as f64 };
        if a as f64 / (a + b) as f64 - other > 0.0 {
            n += 1;
        }
    }
    n
}

pub fn auc(pos: &[f64], neg: &[f64]) -> f64 {
    let mut s = 0.0;
    for p in pos {
        for q in neg {
            if p > q {
                s += 1.0;
            } else if p == q {
                s += 0.5;
            }
        }
    }
    s / (pos.len() * neg.len()) as f64
}

/// Area under the empirical ROC over false-positive rate `[lo, hi]` by the
/// midpoint rule on `steps` cells.
pub fn partial_auc_numeric(pos: &[f64], neg: &[f64], lo: f64, hi: f64, steps: usize) -> f64 {
    let mut thresholds: Vec<f64> = pos.iter().chain(neg).copied().collect();
    thresholds.sort_by(|a, b| b.total_cmp(a));
    thresholds.dedup();
    let mut pts = vec![(0.0, 0.0)];
    for t in thresholds {
        let tp = pos.iter().filter(|&&s| s >= t).count() as f64 / pos.len() as f64;
        let fp = neg.iter().filter(|&&s| s >= t).count() as f64 / neg.len() as f64;
        pts.push((fp, tp));
    }
    pts.push((1.0, 1.0));
    let at = |x: f64| {
        for w in pts.windows(2) {
            let ((x0, y0), (x1, y1)) = (w[0], w[1]);
            if x1 > x0 && x >= x0 && x <= x1 {
                return y0 + (y1 - y0) * (x - x0) / (x1 - x0);
            }
        }
        1.0
    };
    let h = (hi - lo) / steps as f64;
    (0..steps).map(|i| at(lo + (i as f64 + 0.5) * h) * h).sum()
}

/// Small cohort with enough repeated events that several pairs survive mining.
pub fn small_cohort_config(seed: u64) -> GeneratorConfig {
    GeneratorConfig {
        seed,
        n_patients: 100,
        n_drugs: 4,
        n_outcome_codes: 20,
        n_practices: 3,
        random_adrs: 4,
        random_adr_probability: 0.4,
        visit_codes_per_drug: 1,
        visit_code_probability: 0.3,
        background_event_rate: 0.03,
        srs_report_probability_adr: 0.3,
        srs_report_probability_noise: 0.1,
        srs_exposures_per_drug_year: 5,
        ..Default::default()
    }
}

/// AUC by sorting and midranks, for the permutation loop.
pub fn rank_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid = (i + j) as f64 / 2.0 + 1.0;
        rank_sum += mid * order[i..=j].iter().filter(|&&k| labels[k]).count() as f64;
        i = j + 1;
    }
    let m = labels.iter().filter(|&&l| l).count() as f64;
    let n = labels.len() as f64 - m;
    (rank_sum - m * (m + 1.0) / 2.0) / (m * n)
}

/// Two-sided p-value of `auc(a) - auc(b)` by randomly swapping the two
/// scores of each example.
pub fn paired_permutation_p(a: &[f64], b: &[f64], labels: &[bool], draws: usize, seed: u64) -> f64 {
    use rand::{Rng, SeedableRng};
    let observed = (rank_auc(a, labels) - rank_auc(b, labels)).abs();
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    let mut extreme = 0usize;
    for _ in 0..draws {
        for i in 0..a.len() {
            if rng.random_bool(0.5) {
                x[i] = b[i];
                y[i] = a[i];
            } else {
                x[i] = a[i];
                y[i] = b[i];
            }
        }
        if (rank_auc(&x, labels) - rank_auc(&y, labels)).abs() >= observed - 1e-12 {
            extreme += 1;
        }
    }
    extreme as f64 / draws as f64
}

fn date(y: i32, m: u32, d: u32) -> NaiveDate {
    NaiveDate::from_ymd_opt(y, m, d).expect("valid date")
}

/// `n` patients who each get drug "d" and then code "A1..." nine days later.
pub fn threshold_toy() -> impl Fn(usize) -> CohortDataset {
    |n| {
        let mut ds = CohortDataset::default();
        for i in 0..n as u64 {
            ds.patients.push(hillsignal::Patient {
                patient_id: i + 1,
                year_of_birth: 1960,
                gender: if i % 2 == 0 { Gender::Male } else { Gender::Female },
                practice_id: 1,
                registration_date: date(2000, 1, 1),
            });
            ds.therapy.push(hillsignal::PrescriptionRecord {
                patient_id: i + 1,
                drug_name: "d".into(),
                drug_family: "f".into(),
                dosage: 10.0,
                date: date(2015, 1, 1),
            });
            ds.medical.push(hillsignal::MedicalRecord {
                patient_id: i + 1,
                outcome: hillsignal::OutcomeCode::new("A1...", "Rash").expect("valid code"),
                date: date(2015, 1, 10),
            });
        }
        ds
    }
}
