//! Cooperative wall-clock budgets.
//!
//! Long-running loops (epochs, ensemble members, folds) call
//! [`Deadline::check`] between units of work. Nothing is interrupted
//! mid-unit, so a run may overshoot its budget by at most one unit.

use std::time::{Duration, Instant};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy)]
pub struct Deadline {
    end: Option<Instant>,
}

impl Deadline {
    pub fn unlimited() -> Self {
        Deadline { end: None }
    }

    pub fn after(budget: Duration) -> Self {
        Deadline {
            end: Instant::now().checked_add(budget),
        }
    }

    pub fn expired(&self) -> bool {
        matches!(self.end, Some(end) if Instant::now() >= end)
    }

    pub fn check(&self) -> Result<()> {
        if self.expired() {
            Err(Error::DeadlineExceeded)
        } else {
            Ok(())
        }
    }
}

impl Default for Deadline {
    fn default() -> Self {
        Deadline::unlimited()
    }
}
