//! Tooling for mixed word-level / text-level classification experiments.
//!
//! * [`schema`] and [`record`]: dataset families, label schemas, records.
//! * [`dataset`]: record files and seeded sampling.
//! * [`format`]: ablation input/target formats and the pair grammar.
//! * [`parse`]: tolerant parsing of model generations.
//! * [`verbalizer`]: knowledgeable verbalizers and label prediction.
//! * [`refmlm`]: a count-based reference probability provider.
//! * [`eval`]: F1 scoring and reports.
//! * [`experiment`]: the end-to-end commands behind the `mre` binary.

// file-format examples in module docs are tab-separated on purpose
#![allow(clippy::tabs_in_doc_comments)]

pub mod dataset;
pub mod error;
pub mod eval;
pub mod experiment;
pub mod format;
pub mod parse;
pub mod record;
pub mod refmlm;
pub mod schema;
pub mod synthetic;
pub mod verbalizer;

pub use error::{Error, ExitCategory};
pub use record::{LabelEntityPair, MreRecord};
pub use schema::{DatasetDescriptor, DatasetFamily, LabelSchema, Language};
