//! Work accounting shared by solvers and drivers.

use std::cell::Cell;
use std::time::Instant;

use crate::error::{Error, Result};

/// Counts gradient evaluations and enforces an optional cap and deadline.
///
/// A cap makes partial runs deterministic; a deadline bounds wall time.
#[derive(Debug, Default)]
pub struct Meter {
    used: Cell<u64>,
    cap: Option<u64>,
    deadline: Option<Instant>,
}

impl Meter {
    pub fn unlimited() -> Self {
        Meter::default()
    }

    pub fn with_cap(cap: u64) -> Self {
        Meter {
            cap: Some(cap),
            ..Meter::default()
        }
    }

    pub fn with_deadline(deadline: Instant) -> Self {
        Meter {
            deadline: Some(deadline),
            ..Meter::default()
        }
    }

    pub fn set_cap(&mut self, cap: Option<u64>) {
        self.cap = cap;
    }

    pub fn set_deadline(&mut self, deadline: Option<Instant>) {
        self.deadline = deadline;
    }

    pub fn used(&self) -> u64 {
        self.used.get()
    }

    /// Records `k` units of work, then checks the cap and the deadline.
    pub fn charge(&self, k: u64) -> Result<()> {
        let u = self.used.get().saturating_add(k);
        self.used.set(u);
        if let Some(cap) = self.cap {
            if u > cap {
                return Err(Error::BudgetExceeded(format!(
                    "work cap of {cap} gradient evaluations reached"
                )));
            }
        }
        self.check_deadline()
    }

    pub fn check_deadline(&self) -> Result<()> {
        match self.deadline {
            Some(t) if Instant::now() >= t => Err(Error::Deadline),
            _ => Ok(()),
        }
    }
}
