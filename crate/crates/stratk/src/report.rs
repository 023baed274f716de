//! Structured validation reports.
//!
//! Validators collect every violation they find instead of stopping at the
//! first, so a report either certifies an object or explains all the ways it
//! fails.

use crate::error::{Error, Result};
use std::fmt;

/// One violated rule, tied to the entity that violates it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    /// Short machine-readable rule name, e.g. `"composition-closure"`.
    pub rule: String,
    /// Human-readable description naming the offending entity.
    pub detail: String,
}

/// Outcome of validating one object.
#[derive(Debug, Clone, Default)]
pub struct ValidationReport {
    /// What was validated, for display.
    pub subject: String,
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn new(subject: impl Into<String>) -> Self {
        ValidationReport { subject: subject.into(), violations: Vec::new() }
    }

    pub fn push(&mut self, rule: impl Into<String>, detail: impl Into<String>) {
        self.violations.push(Violation { rule: rule.into(), detail: detail.into() });
    }

    pub fn is_valid(&self) -> bool {
        self.violations.is_empty()
    }

    /// Converts an invalid report into an error carrying the first violations.
    pub fn into_result(self) -> Result<()> {
        if self.is_valid() {
            Ok(())
        } else {
            let mut msg = format!("{}: ", self.subject);
            let shown: Vec<String> = self
                .violations
                .iter()
                .take(3)
                .map(|v| format!("[{}] {}", v.rule, v.detail))
                .collect();
            msg.push_str(&shown.join("; "));
            if self.violations.len() > 3 {
                msg.push_str(&format!(" (+{} more)", self.violations.len() - 3));
            }
            Err(Error::Invalid(msg))
        }
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_valid() {
            write!(f, "{}: valid", self.subject)
        } else {
            writeln!(f, "{}: {} violation(s)", self.subject, self.violations.len())?;
            for v in &self.violations {
                writeln!(f, "  [{}] {}", v.rule, v.detail)?;
            }
            Ok(())
        }
    }
}
