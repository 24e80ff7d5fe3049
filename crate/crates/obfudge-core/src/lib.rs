//! Obfuscation-robustness pipeline for LLM-based vulnerability detection.
//!
//! The crate transforms labeled vulnerable source files with a 19-technique
//! obfuscation taxonomy, obtains detection reports from configurable model
//! endpoints (with an on-disk cache so runs replay offline), grades reports
//! on a 1-4 scale against ground truth, and aggregates downgrade/upgrade
//! statistics across combos, models, and dataset attributes.

pub mod corpus;
pub mod detector;
pub mod equivalence;
pub mod error;
pub mod judge;
pub mod lang;
pub mod metrics;
pub mod obfuscate;
pub mod report;
pub mod taxonomy;
