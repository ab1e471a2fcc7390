//! Closed parameter ranges used by the sampling policies.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// Closed real interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Range {
    pub min: f64,
    pub max: f64,
}

impl Range {
    pub const fn new(min: f64, max: f64) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if !self.min.is_finite() || !self.max.is_finite() || self.min > self.max {
            return Err(Error::Parameter(format!(
                "{name}: range [{}, {}] is not a finite closed interval",
                self.min, self.max
            )));
        }
        Ok(())
    }

    /// Checks that the range is valid and lies inside `[lo, hi]`.
    pub fn validate_within(&self, name: &str, lo: f64, hi: f64) -> Result<()> {
        self.validate(name)?;
        if self.min < lo || self.max > hi {
            return Err(Error::Parameter(format!(
                "{name}: range [{}, {}] outside validity domain [{lo}, {hi}]",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        if self.min == self.max {
            return self.min;
        }
        // Closed on both ends; the upper end has measure zero anyway.
        rng.random_range(self.min..=self.max)
    }
}

/// Closed integer interval `[min, max]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IntRange {
    pub min: usize,
    pub max: usize,
}

impl IntRange {
    pub const fn new(min: usize, max: usize) -> Self {
        Self { min, max }
    }

    pub fn contains(&self, x: usize) -> bool {
        x >= self.min && x <= self.max
    }

    pub fn validate(&self, name: &str) -> Result<()> {
        if self.min > self.max {
            return Err(Error::Parameter(format!(
                "{name}: integer range [{}, {}] is empty",
                self.min, self.max
            )));
        }
        Ok(())
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        rng.random_range(self.min..=self.max)
    }
}
