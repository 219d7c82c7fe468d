//! Cross-lingual binary text quantification.
//!
//! The crate covers the full pipeline: bag-of-words corpora and tf-idf
//! vectors ([`corpus`], [`vectorizer`]), pivot-pair selection ([`pivots`]),
//! the two cross-lingual projection families ([`scl`], [`dci`]), regularized
//! linear classifiers with held-out rate estimation ([`learner`]), the four
//! prevalence estimators ([`quantifiers`]), and the artificial-prevalence
//! evaluation protocol with its error measures and significance testing
//! ([`evaluation`]).
//!
//! Everything is deterministic given the seeds threaded through the public
//! functions; values are immutable once constructed and safe to share
//! across threads.

pub mod corpus;
pub mod dci;
pub mod error;
pub mod evaluation;
pub mod learner;
pub mod matrix;
pub mod pivots;
pub mod projection;
pub mod quantifiers;
pub mod scl;
pub mod vectorizer;

pub use error::{Error, Result};
