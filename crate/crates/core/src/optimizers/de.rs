//! Differential evolution with five mutation schemes, binomial crossover and
//! greedy one-to-one selection.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{argmin, evaluate_batch, OptResult, SearchBox};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::seeding;

/// Scale applied to the uniform draw in the per-component jitter.
pub const JITTER_SPREAD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DeVariant {
    /// `x_r0 + F (x_r1 - x_r2)`
    #[serde(rename = "rand_1")]
    Rand1,
    /// `x_i + F (best - x_i) + F (x_r1 - x_r2)`
    #[serde(rename = "local_to_best_1")]
    LocalToBest1,
    /// `best + F_j ⊙ (x_r1 - x_r2)`, `F_j = F + 1e-4 rand_j`
    #[serde(rename = "best_1_jitter")]
    Best1Jitter,
    /// `x_r0 + dither (x_r1 - x_r2)`, `dither = F + rand (1 - F)` per mutant
    #[serde(rename = "rand_1_vector_dither")]
    Rand1VectorDither,
    /// as above with one dither per generation
    #[serde(rename = "rand_1_generation_dither")]
    Rand1GenerationDither,
}

impl DeVariant {
    pub const ALL: [DeVariant; 5] = [
        Self::Rand1,
        Self::LocalToBest1,
        Self::Best1Jitter,
        Self::Rand1VectorDither,
        Self::Rand1GenerationDither,
    ];

    pub fn label(self) -> &'static str {
        match self {
            Self::Rand1 => "DE/rand/1",
            Self::LocalToBest1 => "DE/local-to-best/1",
            Self::Best1Jitter => "DE/best/1 with jitter",
            Self::Rand1VectorDither => "DE/rand/1 with per-vector-dither",
            Self::Rand1GenerationDither => "DE/rand/1 with per-generation-dither",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound(deserialize = "T: Scalar + Deserialize<'de>", serialize = "T: Serialize"))]
pub struct DeConfig<T> {
    pub variant: DeVariant,
    #[serde(default = "default_np")]
    pub np: usize,
    #[serde(default = "default_g_max")]
    pub g_max: usize,
    #[serde(default = "default_f")]
    pub f: T,
    #[serde(default = "default_cr")]
    pub cr: T,
}

fn default_np() -> usize {
    20
}
fn default_g_max() -> usize {
    200
}
fn default_f<T: Scalar>() -> T {
    T::lit(0.85)
}
fn default_cr<T: Scalar>() -> T {
    T::lit(0.5)
}

impl<T: Scalar> DeConfig<T> {
    pub fn new(variant: DeVariant) -> Self {
        Self {
            variant,
            np: default_np(),
            g_max: default_g_max(),
            f: default_f(),
            cr: default_cr(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.np < 4 {
            return Err(Error::InvalidOptimizer(format!("population of {} is too small, need at least 4", self.np)));
        }
        if !(self.f > T::zero() && self.f <= T::lit(2.0)) {
            return Err(Error::InvalidOptimizer(format!("scale factor {} outside (0, 2]", self.f)));
        }
        if !(self.cr >= T::zero() && self.cr <= T::one()) {
            return Err(Error::InvalidOptimizer(format!("crossover probability {} outside [0, 1]", self.cr)));
        }
        Ok(())
    }
}

/// `F + rand (1 - F)`.
pub fn dither<T: Scalar, R: Rng>(f: T, rng: &mut R) -> T {
    f + T::lit(rng.random::<f64>()) * (T::one() - f)
}

/// Three mutually distinct indices in `0..np`, all different from `target`.
pub fn pick_donors<R: Rng>(rng: &mut R, np: usize, target: usize) -> [usize; 3] {
    debug_assert!(np >= 4);
    let mut out = [usize::MAX; 3];
    let mut filled = 0;
    while filled < 3 {
        let c = rng.random_range(0..np);
        if c != target && !out[..filled].contains(&c) {
            out[filled] = c;
            filled += 1;
        }
    }
    out
}

/// Builds the mutant for `target` from donors `r = [r0, r1, r2]`.
/// `generation_dither` is only read by the per-generation scheme.
#[allow(clippy::too_many_arguments)]
pub fn de_mutate<T: Scalar, R: Rng>(
    variant: DeVariant,
    f: T,
    population: &[Vec<T>],
    target: usize,
    best: &[T],
    r: [usize; 3],
    generation_dither: T,
    rng: &mut R,
) -> Vec<T> {
    let x0 = &population[r[0]];
    let x1 = &population[r[1]];
    let x2 = &population[r[2]];
    let xi = &population[target];
    let dim = xi.len();
    match variant {
        DeVariant::Rand1 => (0..dim).map(|j| x0[j] + f * (x1[j] - x2[j])).collect(),
        DeVariant::LocalToBest1 => (0..dim)
            .map(|j| xi[j] + f * (best[j] - xi[j]) + f * (x1[j] - x2[j]))
            .collect(),
        DeVariant::Best1Jitter => (0..dim)
            .map(|j| {
                let fj = f + T::lit(JITTER_SPREAD * rng.random::<f64>());
                best[j] + fj * (x1[j] - x2[j])
            })
            .collect(),
        DeVariant::Rand1VectorDither => {
            let d = dither(f, rng);
            (0..dim).map(|j| x0[j] + d * (x1[j] - x2[j])).collect()
        }
        DeVariant::Rand1GenerationDither => (0..dim).map(|j| x0[j] + generation_dither * (x1[j] - x2[j])).collect(),
    }
}

/// Binomial crossover with one component forced from the mutant.
pub fn binomial_crossover<T: Scalar, R: Rng>(target: &[T], mutant: &[T], cr: T, rng: &mut R) -> Vec<T> {
    let dim = target.len();
    let forced = rng.random_range(0..dim);
    let cr = cr.as_f64();
    (0..dim)
        .map(|j| {
            let u: f64 = rng.random();
            if j == forced || u < cr {
                mutant[j]
            } else {
                target[j]
            }
        })
        .collect()
}

/// Minimizes `objective` over `bounds`. Evaluations: `np * (g_max + 1)`.
pub fn de_optimize<T, F>(objective: F, bounds: &SearchBox<T>, cfg: &DeConfig<T>, seed: u64) -> Result<OptResult<T>>
where
    T: Scalar,
    F: Fn(&[T], u64) -> T + Sync,
{
    cfg.validate()?;
    bounds.validate()?;
    let mut rng = seeding::stream_rng(seed, 0, 0);
    let np = cfg.np;

    let mut population: Vec<Vec<T>> = (0..np).map(|_| bounds.sample(&mut rng)).collect();
    let mut costs = evaluate_batch(&objective, &population, 0);
    let mut ids: Vec<u64> = (0..np as u64).collect();
    let mut evaluations = np as u64;
    let mut best = argmin(&costs);
    let mut history = Vec::with_capacity(cfg.g_max + 1);
    history.push(costs[best]);

    for _ in 0..cfg.g_max {
        let generation_dither = if cfg.variant == DeVariant::Rand1GenerationDither {
            dither(cfg.f, &mut rng)
        } else {
            cfg.f
        };
        let best_vec = population[best].clone();
        let trials: Vec<Vec<T>> = (0..np)
            .map(|i| {
                let donors = pick_donors(&mut rng, np, i);
                let mutant = de_mutate(cfg.variant, cfg.f, &population, i, &best_vec, donors, generation_dither, &mut rng);
                let mut trial = binomial_crossover(&population[i], &mutant, cfg.cr, &mut rng);
                bounds.clamp(&mut trial);
                trial
            })
            .collect();
        let trial_costs = evaluate_batch(&objective, &trials, evaluations);
        for (i, (trial, c)) in trials.into_iter().zip(trial_costs).enumerate() {
            if c < costs[i] {
                population[i] = trial;
                costs[i] = c;
                ids[i] = evaluations + i as u64;
            }
        }
        evaluations += np as u64;
        best = argmin(&costs);
        history.push(costs[best]);
    }

    Ok(OptResult {
        best_params: population[best].clone(),
        best_cost: costs[best],
        history,
        evaluations,
        best_evaluation: ids[best],
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::stream_rng;

    fn pop() -> Vec<Vec<f64>> {
        vec![
            vec![1.0, 2.0, 3.0],
            vec![4.0, 5.0, 6.0],
            vec![0.5, 0.5, 0.5],
            vec![0.5, 0.5, 0.5],
            vec![9.0, 9.0, 9.0],
        ]
    }

    #[test]
    fn zero_difference_rand1_returns_base() {
        let p = pop();
        let mut rng = stream_rng(0, 0, 0);
        let v = de_mutate(DeVariant::Rand1, 0.85, &p, 4, &p[0], [1, 2, 3], 0.85, &mut rng);
        assert_eq!(v, p[1]);
    }

    #[test]
    fn local_to_best_at_best_returns_best() {
        let p = pop();
        let mut rng = stream_rng(0, 0, 0);
        let v = de_mutate(DeVariant::LocalToBest1, 0.85, &p, 0, &p[0], [1, 2, 3], 0.85, &mut rng);
        assert_eq!(v, p[0]);
    }

    #[test]
    fn jitter_scales_each_component_near_f() {
        let p = pop();
        let mut rng = stream_rng(0, 0, 0);
        // x1 - x2 = (3.5, 4.5, 5.5)
        let v = de_mutate(DeVariant::Best1Jitter, 0.85, &p, 4, &p[4], [0, 1, 2], 0.85, &mut rng);
        for (j, d) in [3.5, 4.5, 5.5].iter().enumerate() {
            let fj = (v[j] - 9.0) / d;
            assert!((0.85..=0.85 + JITTER_SPREAD).contains(&fj), "{fj}");
        }
    }

    #[test]
    fn vector_dither_range() {
        let mut rng = stream_rng(3, 0, 0);
        for _ in 0..10_000 {
            let d = dither(0.85_f64, &mut rng);
            assert!((0.85..=1.0).contains(&d));
        }
    }

    #[test]
    fn generation_dither_is_shared() {
        let p = pop();
        let mut rng = stream_rng(0, 0, 0);
        let a = de_mutate(DeVariant::Rand1GenerationDither, 0.85, &p, 4, &p[0], [0, 1, 2], 0.9, &mut rng);
        let b = de_mutate(DeVariant::Rand1GenerationDither, 0.85, &p, 3, &p[0], [0, 1, 2], 0.9, &mut rng);
        assert_eq!(a, b);
        assert_eq!(a[0], 1.0 + 0.9 * 3.5);
    }

    #[test]
    fn donors_are_distinct() {
        let mut rng = stream_rng(1, 0, 0);
        for t in 0..200 {
            let target = t % 4;
            let d = pick_donors(&mut rng, 4, target);
            assert!(!d.contains(&target));
            assert!(d[0] != d[1] && d[1] != d[2] && d[0] != d[2]);
        }
    }

    #[test]
    fn zero_crossover_changes_one_component() {
        let mut rng = stream_rng(2, 0, 0);
        let target = vec![0.0; 5];
        let mutant = vec![1.0; 5];
        for _ in 0..100 {
            let trial = binomial_crossover(&target, &mutant, 0.0, &mut rng);
            assert_eq!(trial.iter().filter(|&&v| v != 0.0).count(), 1);
        }
    }

    #[test]
    fn small_population_rejected() {
        let mut cfg = DeConfig::<f64>::new(DeVariant::Rand1);
        cfg.np = 3;
        let b = SearchBox::cube(2, -1.0, 1.0).unwrap();
        assert!(matches!(de_optimize(|_: &[f64], _| 0.0, &b, &cfg, 0), Err(Error::InvalidOptimizer(_))));
        cfg.np = 10;
        cfg.f = 0.0;
        assert!(cfg.validate().is_err());
        cfg.f = 0.5;
        cfg.cr = 1.5;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn constant_objective_keeps_initial_population() {
        let b = SearchBox::cube(3, -1.0, 1.0).unwrap();
        let mut cfg = DeConfig::new(DeVariant::Rand1);
        cfg.g_max = 20;
        let r = de_optimize(|_: &[f64], _| 7.0, &b, &cfg, 4).unwrap();
        assert!(r.history.iter().all(|&h| h == 7.0));
        let mut rng = stream_rng(4, 0, 0);
        let initial: Vec<Vec<f64>> = (0..cfg.np).map(|_| b.sample(&mut rng)).collect();
        assert!(initial.contains(&r.best_params));
        assert!(r.best_evaluation < cfg.np as u64);
    }

    #[test]
    fn variant_names_round_trip_through_json() {
        let cfg: DeConfig<f64> = serde_json::from_str(r#"{"variant":"best_1_jitter"}"#).unwrap();
        assert_eq!(cfg.variant, DeVariant::Best1Jitter);
        assert_eq!(cfg.np, 20);
        assert_eq!(cfg.g_max, 200);
        assert_eq!(cfg.f, 0.85);
        assert_eq!(cfg.cr, 0.5);
    }
}
