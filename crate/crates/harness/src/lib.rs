//! Convergence harness for cutoff dynamics: study configs, runners, reports and the
//! closed-form oracle for the commuting model.
// negated comparisons reject NaN on purpose
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod config;
pub mod error;
pub mod fit;
pub mod observables;
pub mod oracle;
pub mod report;
pub mod study;

pub use config::{StudyConfig, StudyKind};
pub use error::{HarnessError, Result};
pub use report::{ConvergenceReport, Series, Verdict};
pub use study::run_study;
