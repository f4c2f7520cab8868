//! The eleven causality features.
//!
//! | index | name | consideration |
//! |-------|------|---------------|
//! | x1 | risk difference | association strength |
//! | x2 | risk ratio | association strength |
//! | x3 | odds ratio | association strength |
//! | x4 | risk difference, same-family repeats removed | association strength |
//! | x5 | after/before ratio | temporality |
//! | x6 | affected / exposed mean age | specificity |
//! | x7 | affected / exposed male:female ratio | specificity |
//! | x8 | code level | specificity |
//! | x9 | affected / exposed mean dosage | biological gradient |
//! | x10 | repeat-exposure recurrence rate | experimentation |
//! | x11 | years with positive report risk difference | consistency |

pub mod consistency;
pub mod longitudinal;

use std::collections::BTreeMap;
use std::path::Path;

use crate::code::ReadCode;
use crate::error::IngestError;
use crate::pairs::{DrugEventPair, Label};

pub const FEATURE_COUNT: usize = 11;
pub const LONGITUDINAL_COUNT: usize = 10;
/// Position of the consistency feature in a [`FeatureVector`].
pub const CONSISTENCY_INDEX: usize = 10;

pub type FeatureVector = [f64; FEATURE_COUNT];

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "x1", "x2", "x3", "x4", "x5", "x6", "x7", "x8", "x9", "x10", "x11",
];

pub fn features_header() -> Vec<&'static str> {
    let mut h = vec!["drug_name", "code"];
    h.extend(FEATURE_NAMES);
    h.push("label");
    h
}

/// Writes `features.csv` for every pair that carries a feature vector.
pub fn write_features_csv(pairs: &[DrugEventPair], path: &Path) -> Result<(), IngestError> {
    let csv_err = |source| IngestError::Csv {
        path: path.to_path_buf(),
        source,
    };
    let mut w = crate::ingest::csv_writer(path)?;
    w.write_record(features_header()).map_err(csv_err)?;
    for p in pairs {
        let Some(x) = &p.features else { continue };
        let mut row = vec![p.drug_name.clone(), p.outcome.code.to_string()];
        row.extend(x.iter().map(|v| v.to_string()));
        row.push(p.label.value().to_string());
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })
}

pub fn read_features_csv(
    path: &Path,
    code_book: &BTreeMap<ReadCode, String>,
) -> Result<Vec<DrugEventPair>, IngestError> {
    let file = std::fs::File::open(path).map_err(|source| IngestError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);
    let header = features_header();
    let header_ok = reader
        .headers()
        .map(|h| h.iter().eq(header.iter().copied()))
        .unwrap_or(false);
    if !header_ok {
        return Err(IngestError::Header {
            path: path.to_path_buf(),
            expected: header.join(","),
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
        let mut x = [0.0; FEATURE_COUNT];
        for (i, slot) in x.iter_mut().enumerate() {
            *slot = rec[2 + i]
                .parse()
                .map_err(|e| bad(FEATURE_NAMES[i], format!("{e}")))?;
        }
        let label = rec[2 + FEATURE_COUNT]
            .parse::<i8>()
            .ok()
            .and_then(Label::from_value)
            .ok_or_else(|| bad("label", format!("bad label {:?}", &rec[2 + FEATURE_COUNT])))?;
        out.push(DrugEventPair {
            drug_name: rec[0].to_string(),
            outcome: crate::code::OutcomeCode {
                code,
                description: code_book.get(&code).cloned().unwrap_or_default(),
            },
            count_after: 0,
            count_before: 0,
            label,
            features: Some(x),
        });
    }
    Ok(out)
}
