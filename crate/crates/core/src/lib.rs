//! Drug safety signal detection from longitudinal health records.
//!
//! Candidate drug/outcome pairs are mined from patient, medical and therapy
//! tables, described by eleven causality features, and scored by a binary
//! classifier evaluated with ROC analysis.

pub mod code;
pub mod error;
pub mod eval;
pub mod features;
pub mod index;
pub mod ingest;
pub mod learn;
pub mod model;
pub mod pairs;
pub mod pipeline;
pub mod syndata;

pub use code::{code_level, is_descendant, is_parent, OutcomeCode, ReadCode};
pub use error::*;
pub use features::{FeatureVector, FEATURE_COUNT};
pub use model::{CohortDataset, Gender, MedicalRecord, Patient, PatientId, PracticeId, PrescriptionRecord};
pub use pairs::{DrugEventPair, Label};
