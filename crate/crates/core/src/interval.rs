use std::fmt;

use crate::{Error, Result};

/// Tolerance for every time comparison, in seconds.
pub const TIME_EPS: f64 = 1e-6;

/// A half-open span of time in seconds. `offset > onset` always holds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeInterval {
    onset: f64,
    offset: f64,
}

impl TimeInterval {
    pub fn new(onset: f64, offset: f64) -> Result<Self> {
        if !onset.is_finite() || !offset.is_finite() || onset < 0.0 || offset <= onset {
            return Err(Error::InvalidInterval { onset, offset });
        }
        Ok(Self { onset, offset })
    }

    pub fn onset(&self) -> f64 {
        self.onset
    }

    pub fn offset(&self) -> f64 {
        self.offset
    }

    pub fn duration(&self) -> f64 {
        self.offset - self.onset
    }

    /// Length of the intersection with `other`, zero if disjoint.
    pub fn overlap(&self, other: &TimeInterval) -> f64 {
        (self.offset.min(other.offset) - self.onset.max(other.onset)).max(0.0)
    }

    /// True when the two intervals overlap or touch within [`TIME_EPS`].
    pub fn touches(&self, other: &TimeInterval) -> bool {
        self.onset <= other.offset + TIME_EPS && other.onset <= self.offset + TIME_EPS
    }

    pub fn contains(&self, other: &TimeInterval) -> bool {
        other.onset >= self.onset - TIME_EPS && other.offset <= self.offset + TIME_EPS
    }

    pub(crate) fn hull(&self, other: &TimeInterval) -> TimeInterval {
        TimeInterval {
            onset: self.onset.min(other.onset),
            offset: self.offset.max(other.offset),
        }
    }
}

impl fmt::Display for TimeInterval {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{:.3}, {:.3}]", self.onset, self.offset)
    }
}
