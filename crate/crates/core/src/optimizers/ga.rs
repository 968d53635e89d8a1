//! Real-coded genetic algorithm with elitism, binary tournaments, blend
//! crossover and Gaussian mutation.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::{argmin, evaluate_batch, OptResult, SearchBox};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct GaConfig<T> {
    #[serde(default = "default_pop")]
    pub pop: usize,
    #[serde(default = "default_g_max")]
    pub g_max: usize,
    #[serde(default = "default_crossover")]
    pub crossover_fraction: T,
    #[serde(default = "default_mutation")]
    pub mutation_fraction: T,
    #[serde(default = "default_elite")]
    pub elite_count: usize,
    /// BLX-α extension beyond the parents' interval.
    #[serde(default = "default_alpha")]
    pub blend_alpha: T,
    /// Mutation standard deviation as a fraction of each box width.
    #[serde(default = "default_mutation_scale")]
    pub mutation_scale: T,
}

fn default_pop() -> usize {
    20
}
fn default_g_max() -> usize {
    200
}
fn default_crossover<T: Scalar>() -> T {
    T::lit(0.8)
}
fn default_mutation<T: Scalar>() -> T {
    T::lit(0.2)
}
fn default_elite() -> usize {
    2
}
fn default_alpha<T: Scalar>() -> T {
    T::lit(0.5)
}
fn default_mutation_scale<T: Scalar>() -> T {
    T::lit(0.1)
}

impl<T: Scalar> Default for GaConfig<T> {
    fn default() -> Self {
        Self {
            pop: default_pop(),
            g_max: default_g_max(),
            crossover_fraction: default_crossover(),
            mutation_fraction: default_mutation(),
            elite_count: default_elite(),
            blend_alpha: default_alpha(),
            mutation_scale: default_mutation_scale(),
        }
    }
}

impl<T: Scalar> GaConfig<T> {
    pub fn validate(&self) -> Result<()> {
        if self.pop < 2 {
            return Err(Error::InvalidOptimizer("population must hold at least 2 individuals".into()));
        }
        if self.elite_count >= self.pop {
            return Err(Error::InvalidOptimizer(format!(
                "elite count {} must be below the population size {}",
                self.elite_count, self.pop
            )));
        }
        let unit = |v: T| v >= T::zero() && v <= T::one();
        if !unit(self.crossover_fraction) || !unit(self.mutation_fraction) {
            return Err(Error::InvalidOptimizer("crossover and mutation fractions must lie in [0, 1]".into()));
        }
        if self.blend_alpha < T::zero() || self.mutation_scale < T::zero() {
            return Err(Error::InvalidOptimizer("blend alpha and mutation scale must be non-negative".into()));
        }
        Ok(())
    }

    /// Offspring split `(crossover, mutation, copies)` for one generation.
    pub fn offspring_split(&self) -> (usize, usize, usize) {
        let n = self.pop - self.elite_count;
        let n_cross = ((self.crossover_fraction.as_f64() * n as f64).round() as usize).min(n);
        let n_mut = ((self.mutation_fraction.as_f64() * n as f64).round() as usize).min(n - n_cross);
        (n_cross, n_mut, n - n_cross - n_mut)
    }
}

/// Winner of a binary tournament (the lower cost; the first drawn on ties).
fn tournament<T: Scalar, R: Rng>(rng: &mut R, costs: &[T]) -> usize {
    let a = rng.random_range(0..costs.len());
    let b = rng.random_range(0..costs.len());
    if costs[b] < costs[a] {
        b
    } else {
        a
    }
}

fn blend<T: Scalar, R: Rng>(rng: &mut R, p1: &[T], p2: &[T], alpha: T, bounds: &SearchBox<T>) -> Vec<T> {
    let mut child: Vec<T> = p1
        .iter()
        .zip(p2)
        .map(|(&a, &b)| {
            let lo = a.min(b);
            let span = (a - b).abs();
            lo - alpha * span + T::lit(rng.random::<f64>()) * (T::one() + alpha + alpha) * span
        })
        .collect();
    bounds.clamp(&mut child);
    child
}

fn mutate<T: Scalar, R: Rng>(rng: &mut R, parent: &[T], scale: T, bounds: &SearchBox<T>) -> Vec<T> {
    let mut child: Vec<T> = parent
        .iter()
        .enumerate()
        .map(|(j, &v)| {
            let z: f64 = StandardNormal.sample(rng);
            v + T::lit(z) * scale * bounds.width(j)
        })
        .collect();
    bounds.clamp(&mut child);
    child
}

/// Minimizes `objective` over `bounds`. Elites keep their recorded cost and
/// are not re-evaluated; every other offspring is.
pub fn ga_optimize<T, F>(objective: F, bounds: &SearchBox<T>, cfg: &GaConfig<T>, seed: u64) -> Result<OptResult<T>>
where
    T: Scalar,
    F: Fn(&[T], u64) -> T + Sync,
{
    cfg.validate()?;
    bounds.validate()?;
    let mut rng = seeding::stream_rng(seed, 0, 0);
    let (n_cross, n_mut, _) = cfg.offspring_split();

    let mut population: Vec<Vec<T>> = (0..cfg.pop).map(|_| bounds.sample(&mut rng)).collect();
    let mut costs = evaluate_batch(&objective, &population, 0);
    let mut ids: Vec<u64> = (0..cfg.pop as u64).collect();
    let mut evaluations = cfg.pop as u64;
    let mut history = Vec::with_capacity(cfg.g_max + 1);
    history.push(costs[argmin(&costs)]);

    for _ in 0..cfg.g_max {
        let mut order: Vec<usize> = (0..cfg.pop).collect();
        order.sort_by(|&a, &b| costs[a].partial_cmp(&costs[b]).unwrap_or(std::cmp::Ordering::Equal).then(a.cmp(&b)));

        let mut next_pop: Vec<Vec<T>> = order[..cfg.elite_count].iter().map(|&i| population[i].clone()).collect();
        let mut next_costs: Vec<T> = order[..cfg.elite_count].iter().map(|&i| costs[i]).collect();
        let mut next_ids: Vec<u64> = order[..cfg.elite_count].iter().map(|&i| ids[i]).collect();

        let offspring: Vec<Vec<T>> = (0..cfg.pop - cfg.elite_count)
            .map(|k| {
                if k < n_cross {
                    let a = tournament(&mut rng, &costs);
                    let b = tournament(&mut rng, &costs);
                    blend(&mut rng, &population[a], &population[b], cfg.blend_alpha, bounds)
                } else if k < n_cross + n_mut {
                    let a = tournament(&mut rng, &costs);
                    mutate(&mut rng, &population[a], cfg.mutation_scale, bounds)
                } else {
                    population[tournament(&mut rng, &costs)].clone()
                }
            })
            .collect();
        let offspring_costs = evaluate_batch(&objective, &offspring, evaluations);
        next_ids.extend((0..offspring.len() as u64).map(|i| evaluations + i));
        evaluations += offspring.len() as u64;
        next_pop.extend(offspring);
        next_costs.extend(offspring_costs);

        population = next_pop;
        costs = next_costs;
        ids = next_ids;
        history.push(costs[argmin(&costs)]);
    }

    let best = argmin(&costs);
    Ok(OptResult {
        best_params: population[best].clone(),
        best_cost: costs[best],
        history,
        evaluations,
        best_evaluation: ids[best],
    })
}
