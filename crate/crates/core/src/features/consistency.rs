//! Feature x11: in how many yearly report slices the pair shows a positive
//! risk difference.
//!
//! Rows sharing a `report_id` form one report. A report "has" a drug or an
//! outcome when any of its rows matches it under [`crate::ingest::canonical`].

use std::collections::{BTreeMap, BTreeSet, HashMap};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::features::CONSISTENCY_INDEX;
use crate::ingest::{canonical, SrsCorpus, SrsReport};
use crate::pairs::DrugEventPair;

/// Report counts for one (drug, outcome) pair in one year.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ContingencyTable {
    /// Drug and outcome.
    pub a: u64,
    /// Drug, not the outcome.
    pub b: u64,
    /// Outcome, not the drug.
    pub c: u64,
    /// Neither.
    pub d: u64,
}

impl ContingencyTable {
    pub fn new(a: u64, b: u64, c: u64, d: u64) -> Self {
        ContingencyTable { a, b, c, d }
    }

    pub fn total(&self) -> u64 {
        self.a + self.b + self.c + self.d
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct YearlyAssociation {
    pub year: i32,
    /// `None` when the pair was not reported that year.
    pub rd: Option<f64>,
}

fn group_reports(reports: &[SrsReport]) -> Vec<(BTreeSet<String>, BTreeSet<String>)> {
    let mut by_id: BTreeMap<&str, (BTreeSet<String>, BTreeSet<String>)> = BTreeMap::new();
    for r in reports {
        let entry = by_id.entry(r.report_id.as_str()).or_default();
        entry.0.insert(canonical(&r.drug_name));
        entry.1.insert(canonical(&r.outcome_description));
    }
    by_id.into_values().collect()
}

/// Direct count over one year's reports.
pub fn build_contingency(reports: &[SrsReport], drug_name: &str, outcome_description: &str) -> ContingencyTable {
    let drug = canonical(drug_name);
    let outcome = canonical(outcome_description);
    let mut t = ContingencyTable::default();
    for (drugs, outcomes) in group_reports(reports) {
        match (drugs.contains(&drug), outcomes.contains(&outcome)) {
            (true, true) => t.a += 1,
            (true, false) => t.b += 1,
            (false, true) => t.c += 1,
            (false, false) => t.d += 1,
        }
    }
    t
}

/// `[a/(a+b)] - [c/(c+d)]`, absent when `a = 0`; the second term is 0 when `c + d = 0`.
pub fn yearly_rd(t: &ContingencyTable) -> Option<f64> {
    if t.a == 0 {
        return None;
    }
    let exposed = t.a as f64 / (t.a + t.b) as f64;
    let other = if t.c + t.d == 0 {
        0.0
    } else {
        t.c as f64 / (t.c + t.d) as f64
    };
    Some(exposed - other)
}

pub fn consistency_feature(associations: &[YearlyAssociation]) -> u32 {
    associations
        .iter()
        .filter(|y| y.rd.is_some_and(|rd| rd > 0.0))
        .count() as u32
}

/// Marginal and joint report counts for one year, keyed by canonical strings.
#[derive(Clone, Debug, Default)]
pub struct SrsYearIndex {
    total: u64,
    drug: HashMap<String, u64>,
    outcome: HashMap<String, u64>,
    joint: HashMap<(String, String), u64>,
}

impl SrsYearIndex {
    pub fn new(reports: &[SrsReport]) -> Self {
        let mut idx = SrsYearIndex::default();
        for (drugs, outcomes) in group_reports(reports) {
            idx.total += 1;
            for d in &drugs {
                *idx.drug.entry(d.clone()).or_default() += 1;
                for o in &outcomes {
                    *idx.joint.entry((d.clone(), o.clone())).or_default() += 1;
                }
            }
            for o in outcomes {
                *idx.outcome.entry(o).or_default() += 1;
            }
        }
        idx
    }

    pub fn contingency(&self, drug_name: &str, outcome_description: &str) -> ContingencyTable {
        let d = canonical(drug_name);
        let o = canonical(outcome_description);
        let a = self.joint.get(&(d.clone(), o.clone())).copied().unwrap_or(0);
        let b = self.drug.get(&d).copied().unwrap_or(0) - a;
        let c = self.outcome.get(&o).copied().unwrap_or(0) - a;
        ContingencyTable::new(a, b, c, self.total - a - b - c)
    }
}

/// One [`SrsYearIndex`] per year of the corpus.
#[derive(Clone, Debug, Default)]
pub struct SrsIndex {
    years: BTreeMap<i32, SrsYearIndex>,
}

impl SrsIndex {
    pub fn new(corpus: &SrsCorpus) -> Self {
        let years = corpus
            .years
            .par_iter()
            .map(|(&y, reports)| (y, SrsYearIndex::new(reports)))
            .collect::<Vec<_>>()
            .into_iter()
            .collect();
        SrsIndex { years }
    }

    pub fn years(&self) -> impl Iterator<Item = i32> + '_ {
        self.years.keys().copied()
    }

    pub fn associations(&self, drug_name: &str, outcome_description: &str) -> Vec<YearlyAssociation> {
        self.years
            .iter()
            .map(|(&year, idx)| YearlyAssociation {
                year,
                rd: yearly_rd(&idx.contingency(drug_name, outcome_description)),
            })
            .collect()
    }

    pub fn consistency(&self, drug_name: &str, outcome_description: &str) -> u32 {
        consistency_feature(&self.associations(drug_name, outcome_description))
    }
}

/// Sets x11 on every pair that has a feature vector. Pairs without one are
/// left as they are.
pub fn attach_consistency(pairs: &mut [DrugEventPair], corpus: &SrsCorpus) {
    let index = SrsIndex::new(corpus);
    pairs.par_iter_mut().for_each(|p| {
        let x11 = index.consistency(&p.drug_name, &p.outcome.description);
        if let Some(x) = p.features.as_mut() {
            x[CONSISTENCY_INDEX] = f64::from(x11);
        }
    });
}
