//! Controller tuning: the expected closed-loop cost as an optimizer
//! objective.

use serde::{Deserialize, Serialize};

use super::{de_optimize, ga_optimize, DeConfig, GaConfig, OptResult, SearchBox};
use crate::error::{Error, Result};
use crate::fractional::{Band, ControllerParams};
use crate::plants::DelayedRationalPlant;
use crate::scalar::Scalar;
use crate::seeding;
use crate::simloop::{expected_cost, CostBreakdown, CostWeights, SimConfig, PENALTY};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TuneMode {
    /// `{Kp, Ki, Kd}` with `λ = μ = 1`.
    Pid,
    /// `{Kp, Ki, Kd, λ, μ}`.
    Fopid,
}

impl TuneMode {
    pub fn default_box<T: Scalar>(self) -> SearchBox<T> {
        match self {
            TuneMode::Pid => SearchBox::pid(),
            TuneMode::Fopid => SearchBox::fopid(),
        }
    }

    pub fn dim(self) -> usize {
        match self {
            TuneMode::Pid => 3,
            TuneMode::Fopid => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "algorithm", rename_all = "snake_case")]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>", serialize = "T: Serialize"))]
pub enum Algorithm<T> {
    De(DeConfig<T>),
    Ga(GaConfig<T>),
}

impl<T: Scalar> Algorithm<T> {
    pub fn label(&self) -> &'static str {
        match self {
            Algorithm::De(c) => c.variant.label(),
            Algorithm::Ga(_) => "GA",
        }
    }

    pub fn run<F>(&self, objective: F, bounds: &SearchBox<T>, seed: u64) -> Result<OptResult<T>>
    where
        F: Fn(&[T], u64) -> T + Sync,
    {
        match self {
            Algorithm::De(c) => de_optimize(objective, bounds, c, seed),
            Algorithm::Ga(c) => ga_optimize(objective, bounds, c, seed),
        }
    }
}

/// Master seed of the Monte-Carlo estimate for evaluation `id`.
pub fn evaluation_seed(seed: u64, id: u64) -> u64 {
    seeding::child_seed(seeding::child_seed(seed, 1), id)
}

fn optimizer_seed(seed: u64) -> u64 {
    seeding::child_seed(seed, 0)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TuneResult<T> {
    pub algorithm: &'static str,
    pub mode: TuneMode,
    pub result: OptResult<T>,
    pub params: ControllerParams<T>,
    /// Breakdown of the evaluation that produced the best cost.
    pub best: CostBreakdown<T>,
}

impl<T: Scalar> TuneResult<T> {
    pub fn penalized(&self) -> bool {
        self.best.penalized
    }
}

/// Everything the tuning objective needs besides the candidate.
#[derive(Debug, Clone)]
pub struct TuneProblem<'a, T> {
    pub plant: &'a DelayedRationalPlant<T>,
    pub mode: TuneMode,
    pub sim: SimConfig,
    pub weights: CostWeights<T>,
    pub replicates: usize,
    pub band: Band<T>,
}

impl<T: Scalar> TuneProblem<'_, T> {
    /// Expected cost of candidate `x` under the evaluation seed for `id`.
    pub fn evaluate(&self, x: &[T], seed: u64, id: u64) -> CostBreakdown<T> {
        let params = ControllerParams::from_slice(x);
        let penalty = T::lit(PENALTY);
        match expected_cost(self.plant, &params, &self.band, &self.sim, &self.weights, self.replicates, evaluation_seed(seed, id)) {
            Ok(ec) => ec.mean,
            Err(_) => CostBreakdown { itae: penalty, isco: penalty, j: penalty, penalized: true },
        }
    }
}

/// Searches the controller parameters minimizing the expected cost. `bounds`
/// defaults to the mode's standard box.
pub fn tune_controller<T: Scalar>(
    problem: &TuneProblem<'_, T>,
    algorithm: &Algorithm<T>,
    bounds: Option<SearchBox<T>>,
    seed: u64,
) -> Result<TuneResult<T>> {
    let bounds = bounds.unwrap_or_else(|| problem.mode.default_box());
    if bounds.dim() != problem.mode.dim() {
        return Err(Error::InvalidOptimizer(format!(
            "{:?} tuning needs a {}-dimensional box, got {}",
            problem.mode,
            problem.mode.dim(),
            bounds.dim()
        )));
    }
    problem.sim.validate()?;
    problem.weights.validate()?;
    if problem.replicates == 0 {
        return Err(Error::InvalidSim("replicate count must be at least 1".into()));
    }

    let objective = |x: &[T], id: u64| problem.evaluate(x, seed, id).j;
    let result = algorithm.run(objective, &bounds, optimizer_seed(seed))?;
    let best = problem.evaluate(&result.best_params, seed, result.best_evaluation);
    Ok(TuneResult {
        algorithm: algorithm.label(),
        mode: problem.mode,
        params: ControllerParams::from_slice(&result.best_params),
        result,
        best,
    })
}
