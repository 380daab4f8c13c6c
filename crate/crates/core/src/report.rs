//! Outcome of a fix run.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::diagnostics::ErrorKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Outcome {
    Fixed,
    GaveUp,
}

/// Why an error was not fixed: the answers never applied, the applied
/// fixes did not make the error go away, or the project built but its
/// tests failed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum FailureClass {
    Format,
    Build,
    Test,
}

impl fmt::Display for Outcome {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Fixed => "fixed",
            Self::GaveUp => "gave-up",
        })
    }
}

impl fmt::Display for FailureClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Format => "format",
            Self::Build => "build",
            Self::Test => "test",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorOutcome {
    pub key: ErrorKey,
    pub outcome: Outcome,
    pub failure: Option<FailureClass>,
    pub reason: String,
    /// Inner iterations spent on groups this error seeded.
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct FixReport {
    pub initial_errors: usize,
    pub fixed: usize,
    pub outcomes: Vec<ErrorOutcome>,
    pub inner_iterations: usize,
    /// Iterations needed per fixed group → number of such groups.
    pub iterations_histogram: BTreeMap<usize, usize>,
    pub completions_consumed: usize,
    pub test_passed: Option<bool>,
    pub final_errors: usize,
}

impl FixReport {
    pub fn all_fixed(&self) -> bool {
        self.fixed == self.initial_errors
    }

    pub fn gave_up(&self) -> usize {
        self.outcomes.iter().filter(|o| o.outcome == Outcome::GaveUp).count()
    }

    pub fn failures(&self, class: FailureClass) -> usize {
        self.outcomes.iter().filter(|o| o.failure == Some(class)).count()
    }

    pub fn outcome(&self, key: &ErrorKey) -> Option<&ErrorOutcome> {
        self.outcomes.iter().find(|o| &o.key == key)
    }
}

impl fmt::Display for FixReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.initial_errors == 0 {
            return writeln!(f, "0 errors");
        }
        writeln!(
            f,
            "fixed {}/{} error(s) in {} iteration(s), {} completion(s)",
            self.fixed, self.initial_errors, self.inner_iterations, self.completions_consumed
        )?;
        for o in &self.outcomes {
            match o.failure {
                None => writeln!(f, "  fixed      {}", o.key)?,
                Some(class) => writeln!(f, "  gave up    {} ({class}: {})", o.key, o.reason)?,
            }
        }
        if let Some(passed) = self.test_passed {
            writeln!(f, "tests {}", if passed { "passed" } else { "failed" })?;
        }
        if self.final_errors > 0 {
            writeln!(f, "{} error(s) remain", self.final_errors)?;
        }
        Ok(())
    }
}
