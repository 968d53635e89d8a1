//! Side-by-side evaluation of one controller under several network
//! conditions.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::Result;
use crate::network::{ChannelConfig, DelayLaw};
use crate::plants::DelayedRationalPlant;
use crate::scalar::Scalar;
use crate::simloop::{expected_cost_of, CostWeights, ExpectedCost, SimConfig};
use crate::statespace::StateSpaceModel;

#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub label: String,
    pub sim: SimConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub condition: String,
    pub mean_j: f64,
    pub std_j: f64,
    pub diverged_fraction: f64,
    pub mean_itae: f64,
    pub mean_isco: f64,
    pub replicates: usize,
    /// Per-replicate `j` values, in replicate order.
    #[serde(skip)]
    pub j_values: Vec<f64>,
}

impl StudyRow {
    fn from_cost<T: Scalar>(label: &str, ec: &ExpectedCost<T>) -> Self {
        Self {
            condition: label.to_string(),
            mean_j: ec.mean.j.as_f64(),
            std_j: ec.std_j.as_f64(),
            diverged_fraction: ec.diverged_fraction(),
            mean_itae: ec.mean.itae.as_f64(),
            mean_isco: ec.mean.isco.as_f64(),
            replicates: ec.replicates.len(),
            j_values: ec.replicates.iter().map(|c| c.j.as_f64()).collect(),
        }
    }
}

/// Every condition uses the same master seed, so replicate `i` of each
/// condition shares its stream keys.
pub fn evaluate_conditions<T: Scalar>(
    plant: &DelayedRationalPlant<T>,
    controller: &StateSpaceModel<T>,
    conditions: &[Condition],
    w: &CostWeights<T>,
    m: usize,
    seed: u64,
) -> Result<Vec<StudyRow>> {
    conditions
        .par_iter()
        .map(|c| expected_cost_of(plant, controller, &c.sim, w, m, seed).map(|ec| StudyRow::from_cost(&c.label, &ec)))
        .collect()
}

/// `condition,mean_j,std_j,diverged_fraction,mean_itae,mean_isco,replicates`
pub fn rows_csv(rows: &[StudyRow]) -> String {
    let mut out = String::from("condition,mean_j,std_j,diverged_fraction,mean_itae,mean_isco,replicates\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.condition, r.mean_j, r.std_j, r.diverged_fraction, r.mean_itae, r.mean_isco, r.replicates
        ));
    }
    out
}

/// Constant delays `static_delays` and uniform `[0, b]` delays for every `b`
/// in `uniform_bounds`, identical on both paths, with loss `drop_prob`.
pub fn degradation_conditions(base: &SimConfig, static_delays: &[f64], uniform_bounds: &[f64], drop_prob: f64) -> Vec<Condition> {
    let statics = static_delays.iter().map(|&d| Condition {
        label: format!("static_{d}"),
        sim: base.with_network(ChannelConfig::new(drop_prob, DelayLaw::Constant { d })),
    });
    let uniforms = uniform_bounds.iter().map(|&hi| Condition {
        label: format!("uniform_0_{hi}"),
        sim: base.with_network(ChannelConfig::new(drop_prob, DelayLaw::Uniform { lo: 0.0, hi })),
    });
    statics.chain(uniforms).collect()
}

/// The same network with the receive buffers enabled and disabled.
pub fn buffer_conditions(base: &SimConfig, channel: ChannelConfig) -> Vec<Condition> {
    let mut on = base.with_network(channel);
    on.tso_enabled = true;
    let mut off = on;
    off.tso_enabled = false;
    vec![
        Condition { label: "tso_on".into(), sim: on },
        Condition { label: "tso_off".into(), sim: off },
    ]
}

pub fn law_label(law: &DelayLaw) -> &'static str {
    match law {
        DelayLaw::Uniform { .. } => "uniform",
        DelayLaw::TruncatedNormal { .. } => "truncated_normal",
        DelayLaw::TruncatedExponential { .. } => "truncated_exponential",
        DelayLaw::Constant { .. } => "constant",
    }
}

/// One condition per delay law, identical on both paths.
pub fn robustness_conditions(base: &SimConfig, laws: &[DelayLaw], drop_prob: f64) -> Vec<Condition> {
    laws.iter()
        .map(|law| Condition {
            label: law_label(law).to_string(),
            sim: base.with_network(ChannelConfig::new(drop_prob, *law)),
        })
        .collect()
}

/// Uniform, truncated normal and truncated exponential laws on `[0, hi]`
/// with matching centre `hi / 2`.
pub fn bounded_laws(hi: f64) -> [DelayLaw; 3] {
    [
        DelayLaw::Uniform { lo: 0.0, hi },
        DelayLaw::TruncatedNormal { mean: hi / 2.0, sd: hi / 4.0, lo: 0.0, hi },
        DelayLaw::TruncatedExponential { rate: 2.0 / hi, lo: 0.0, hi },
    ]
}

/// `step, 2 step, ..., count step`, rounded to nanoseconds so the values
/// print cleanly in condition labels.
pub fn bound_sweep(step: f64, count: usize) -> Vec<f64> {
    (1..=count).map(|i| (i as f64 * step * 1e9).round() / 1e9).collect()
}

/// Outcome of a degradation sweep.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DegradationSummary {
    /// Largest static delay whose condition had no penalized replicate.
    pub largest_stable_static: Option<f64>,
    /// Smallest uniform upper bound with at least one penalized replicate.
    pub first_penalized_uniform: Option<f64>,
}

impl DegradationSummary {
    /// Whether the stochastic sweep destabilized the loop strictly before
    /// the static sweep stopped being stable.
    pub fn stochastic_fails_first(&self) -> bool {
        match (self.first_penalized_uniform, self.largest_stable_static) {
            (Some(u), Some(s)) => u < s,
            _ => false,
        }
    }
}

/// Reads the rows produced by [`degradation_conditions`] for the same
/// `static_delays` and `uniform_bounds`.
pub fn degradation_summary(rows: &[StudyRow], static_delays: &[f64], uniform_bounds: &[f64]) -> DegradationSummary {
    let (statics, uniforms) = rows.split_at(static_delays.len().min(rows.len()));
    let largest_stable_static = statics
        .iter()
        .zip(static_delays)
        .filter(|(r, _)| r.diverged_fraction == 0.0)
        .map(|(_, &d)| d)
        .fold(None, |acc: Option<f64>, d| Some(acc.map_or(d, |a| a.max(d))));
    let first_penalized_uniform = uniforms
        .iter()
        .zip(uniform_bounds)
        .find(|(r, _)| r.diverged_fraction > 0.0)
        .map(|(_, &b)| b);
    DegradationSummary { largest_stable_static, first_penalized_uniform }
}

/// One-sided sign test: probability of at least `wins` successes out of
/// `trials` fair coin flips.
pub fn sign_test_p(wins: usize, trials: usize) -> f64 {
    let mut p = 0.0;
    let mut coef = 1.0_f64;
    for k in 0..=trials {
        if k > 0 {
            coef = coef * (trials - k + 1) as f64 / k as f64;
        }
        if k >= wins {
            p += coef;
        }
    }
    p / 2f64.powi(trials as i32)
}

/// Replicates in which `a` is strictly greater than `b`, paired by index.
pub fn paired_wins(a: &[f64], b: &[f64]) -> usize {
    a.iter().zip(b).filter(|(x, y)| x > y).count()
}
