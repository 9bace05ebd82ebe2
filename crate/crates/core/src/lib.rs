//! Administration, scoring, and inference for the O*NET Interest Profiler
//! short form with chat-model respondents.
//!
//! The crate is organised bottom-up:
//!
//! * [`instrument`]: item bank, prompt templates, Likert parsing.
//! * [`providers`]: chat-completion clients, the retry loop, and a seeded mock respondent.
//! * [`runner`]: full survey runs persisted as JSONL with resume.
//! * [`scoring`]: category sums, item aggregates, Holland codes, occupation lookup.
//! * [`stats`]: random-intercept mixed models fitted by profiled REML, Wald F tests,
//!   estimated marginal means, Tukey contrasts, correlations, and distributions.
//! * [`analysis`]: the canned pipelines and report rendering.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled and runs sequentially otherwise.

pub mod analysis;
pub mod config;
pub mod instrument;
pub mod par;
pub mod providers;
pub mod runner;
pub mod scoring;
pub mod stats;

pub use instrument::{Item, ItemBank, Language, LikertValue, Mode, RiasecCategory};
pub use providers::{AdministrationRecord, ProviderParams};
pub use runner::{RunArtifact, RunConfig};
