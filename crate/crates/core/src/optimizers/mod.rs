//! Population-based minimizers over a box.
//!
//! Objectives receive the candidate and a serial evaluation index. The index
//! is assigned on the coordinating thread before a generation is dispatched,
//! so a stochastic objective that derives its randomness from it produces the
//! same values whatever the degree of parallelism.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub mod de;
pub mod ga;
pub mod tune;

pub use de::{de_mutate, de_optimize, DeConfig, DeVariant};
pub use ga::{ga_optimize, GaConfig};
pub use tune::{tune_controller, Algorithm, TuneMode, TuneResult};

/// Per-dimension bounds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SearchBox<T> {
    pub lower: Vec<T>,
    pub upper: Vec<T>,
}

impl<T: Scalar> SearchBox<T> {
    pub fn new(lower: Vec<T>, upper: Vec<T>) -> Result<Self> {
        let b = Self { lower, upper };
        b.validate()?;
        Ok(b)
    }

    /// Same bounds in every one of `dim` dimensions.
    pub fn cube(dim: usize, lo: T, hi: T) -> Result<Self> {
        Self::new(vec![lo; dim], vec![hi; dim])
    }

    /// `{Kp, Ki, Kd} ∈ [0, 100]`.
    pub fn pid() -> Self {
        Self::cube(3, T::zero(), T::lit(100.0)).expect("valid bounds")
    }

    /// `{Kp, Ki, Kd} ∈ [0, 100]`, `{λ, μ} ∈ [0, 2]`.
    pub fn fopid() -> Self {
        let h = T::lit(100.0);
        let two = T::lit(2.0);
        Self::new(vec![T::zero(); 5], vec![h, h, h, two, two]).expect("valid bounds")
    }

    pub fn validate(&self) -> Result<()> {
        if self.lower.is_empty() || self.lower.len() != self.upper.len() {
            return Err(Error::InvalidOptimizer("bounds must be non-empty and of equal length".into()));
        }
        if self.lower.iter().zip(&self.upper).any(|(lo, hi)| !(lo < hi) || !lo.is_finite() || !hi.is_finite()) {
            return Err(Error::InvalidOptimizer("every lower bound must be strictly below its upper bound".into()));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    pub fn width(&self, j: usize) -> T {
        self.upper[j] - self.lower[j]
    }

    pub fn clamp(&self, x: &mut [T]) {
        for (j, v) in x.iter_mut().enumerate() {
            *v = v.max(self.lower[j]).min(self.upper[j]);
        }
    }

    pub fn contains(&self, x: &[T]) -> bool {
        x.len() == self.dim() && x.iter().enumerate().all(|(j, &v)| v >= self.lower[j] && v <= self.upper[j])
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<T> {
        (0..self.dim())
            .map(|j| self.lower[j] + self.width(j) * T::lit(rng.random::<f64>()))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptResult<T> {
    pub best_params: Vec<T>,
    pub best_cost: T,
    /// Best cost after initialization and after each generation.
    pub history: Vec<T>,
    pub evaluations: u64,
    /// Evaluation index that produced `best_cost`.
    pub best_evaluation: u64,
}

impl<T: Scalar> OptResult<T> {
    /// `generation,best_cost` rows.
    pub fn history_csv(&self) -> String {
        let mut out = String::from("generation,best_cost\n");
        for (g, c) in self.history.iter().enumerate() {
            out.push_str(&format!("{g},{c}\n"));
        }
        out
    }
}

/// Evaluates `batch` in parallel; candidate `i` gets index `first_id + i`.
pub(crate) fn evaluate_batch<T, F>(objective: &F, batch: &[Vec<T>], first_id: u64) -> Vec<T>
where
    T: Scalar,
    F: Fn(&[T], u64) -> T + Sync,
{
    batch
        .par_iter()
        .enumerate()
        .map(|(i, x)| objective(x, first_id + i as u64))
        .collect()
}

/// Index of the smallest value; the earliest wins ties. NaN counts as worst.
pub(crate) fn argmin<T: Scalar>(values: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate().skip(1) {
        if v < values[best] || (values[best].is_nan() && !v.is_nan()) {
            best = i;
        }
    }
    best
}
