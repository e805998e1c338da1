//! Weakly supervised extraction of treatment-plan sentences from clinical notes.
//!
//! The pipeline runs in four stages:
//!
//! 1. [`textproc`] segments notes into sentences and produces token-level
//!    analyses (lemmas, concept matches, verb morphology, assertion triggers).
//! 2. [`sectioning`] finds header lines and partitions a note into labeled
//!    sections, marking assessment & plan blocks as `secAP`.
//! 3. [`plan_extract`] scopes headed plan blocks inside `secAP` sections and
//!    turns them into a noisy, balanced training set.
//! 4. [`linear_svm`] and [`cnn`] learn to recognise plan sentences anywhere in
//!    a note; [`evalharness`] measures them with cross-validation, a set-aside
//!    ground truth and learning curves.
//!
//! [`corpus`] holds the note model and a seeded synthetic note generator.

pub mod classifier;
pub mod cnn;
pub mod corpus;
pub mod embeddings;
pub mod error;
pub mod evalharness;
pub mod features;
pub mod linear_svm;
pub mod plan_extract;
pub mod sectioning;
pub mod textproc;
mod util;

pub use error::{Error, Result};
