//! Library behind the `genie` pipeline: turn raw document corpora into
//! synthetic content-grounded datasets (long-form QA, summarization,
//! information extraction) and score the results.
//!
//! The pipeline has three stages, each usable on its own:
//!
//! 1. [`content_prep`] — clean raw HTML, convert to Markdown, derive a table
//!    of contents, and segment into grounding passages.
//! 2. [`templates`] + [`gateway`] — build few-shot prompts around a passage,
//!    send them to a completion endpoint, and parse the structured example
//!    back out of the raw completion.
//! 3. [`filter`] — keep only examples that pass the format, faithfulness
//!    (NLI entailment), and quality (reward score) gates.
//!
//! [`metrics`] implements ROUGE-L, K-Precision, and vocd-D plus dataset
//! statistics; [`store`] persists everything as JSONL with checkpoint/resume;
//! [`pipeline`] wires the stages together behind a single [`config`] file.

pub mod config;
pub mod content_prep;
pub mod filter;
pub mod gateway;
pub mod hash;
pub mod metrics;
pub mod pipeline;
pub mod store;
pub mod templates;
pub mod text;

/// Version stamp recorded in every dataset record.
pub const PIPELINE_VERSION: &str = env!("CARGO_PKG_VERSION");
