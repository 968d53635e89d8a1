//! Hybrid closed-loop simulation: time-driven sensor and controller, two
//! lossy network paths with receive buffers, a zero-order-hold actuator and
//! a continuous plant. Also the ITAE + ISCO cost and its Monte-Carlo mean.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fractional::{fopid_controller, Band, ControllerParams};
use crate::network::{Channel, ChannelConfig, Link};
use crate::plants::DelayedRationalPlant;
use crate::scalar::Scalar;
use crate::seeding;
use crate::statespace::{Rk4Workspace, StateSpaceModel};

/// Cost assigned to diverged or runaway evaluations.
pub const PENALTY: f64 = 1e6;

/// Path ids used to key the two channel streams of a loop.
const SC_PATH: u64 = 0;
const CA_PATH: u64 = 1;

/// A step of `amplitude` switched on at `time`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StepInput {
    pub amplitude: f64,
    pub time: f64,
}

impl StepInput {
    pub fn at(&self, t: f64) -> f64 {
        if t + 1e-12 >= self.time {
            self.amplitude
        } else {
            0.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    #[serde(default = "default_ts")]
    pub ts: f64,
    pub horizon: f64,
    pub setpoint_step: StepInput,
    pub load_disturbance: StepInput,
    pub sc_channel: ChannelConfig,
    pub ca_channel: ChannelConfig,
    #[serde(default = "default_true")]
    pub tso_enabled: bool,
    #[serde(default = "default_substeps")]
    pub substeps: usize,
}

fn default_ts() -> f64 {
    0.01
}
fn default_true() -> bool {
    true
}
fn default_substeps() -> usize {
    10
}

impl SimConfig {
    /// 10 s run, unit set-point step at 0 and unit load disturbance at 5 s.
    pub fn p1(sc_channel: ChannelConfig, ca_channel: ChannelConfig) -> Self {
        Self {
            ts: 0.01,
            horizon: 10.0,
            setpoint_step: StepInput { amplitude: 1.0, time: 0.0 },
            load_disturbance: StepInput { amplitude: 1.0, time: 5.0 },
            sc_channel,
            ca_channel,
            tso_enabled: true,
            substeps: 10,
        }
    }

    /// 40 s run with the load disturbance at 20 s.
    pub fn p2(sc_channel: ChannelConfig, ca_channel: ChannelConfig) -> Self {
        Self {
            horizon: 40.0,
            load_disturbance: StepInput { amplitude: 1.0, time: 20.0 },
            ..Self::p1(sc_channel, ca_channel)
        }
    }

    /// Same configuration on both paths.
    pub fn with_network(mut self, channel: ChannelConfig) -> Self {
        self.sc_channel = channel;
        self.ca_channel = channel;
        self
    }

    pub fn samples(&self) -> usize {
        (self.horizon / self.ts).round() as usize + 1
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.ts > 0.0 && self.ts.is_finite()) {
            return Err(Error::InvalidSim(format!("sampling period must be positive, got {}", self.ts)));
        }
        if self.substeps == 0 {
            return Err(Error::InvalidSim("substeps must be at least 1".into()));
        }
        if !(self.horizon >= self.setpoint_step.time && self.horizon.is_finite()) {
            return Err(Error::InvalidSim("horizon must cover the set-point step".into()));
        }
        if self.load_disturbance.time >= self.horizon && self.load_disturbance.amplitude != 0.0 {
            return Err(Error::InvalidSim("load disturbance must start before the horizon".into()));
        }
        self.sc_channel.validate()?;
        self.ca_channel.validate()
    }
}

/// Sampled closed-loop signals.
#[derive(Debug, Clone, PartialEq)]
pub struct Trace<T> {
    pub t: Vec<T>,
    pub r: Vec<T>,
    pub y: Vec<T>,
    /// Value held by the actuator.
    pub u: Vec<T>,
    pub e: Vec<T>,
    pub diverged: bool,
}

impl<T: Scalar> Trace<T> {
    fn with_capacity(n: usize) -> Self {
        Self {
            t: Vec::with_capacity(n),
            r: Vec::with_capacity(n),
            y: Vec::with_capacity(n),
            u: Vec::with_capacity(n),
            e: Vec::with_capacity(n),
            diverged: false,
        }
    }

    pub fn len(&self) -> usize {
        self.t.len()
    }

    pub fn is_empty(&self) -> bool {
        self.t.is_empty()
    }

    /// CSV with header `t,r,y,u,e`, shortest round-trip decimal floats.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.len() * 64);
        out.push_str("t,r,y,u,e\n");
        for k in 0..self.len() {
            out.push_str(&format!("{},{},{},{},{}\n", self.t[k], self.r[k], self.y[k], self.u[k], self.e[k]));
        }
        out
    }

    /// Peak-to-peak actuator excursion over samples with `t` in `[from, to]`.
    pub fn u_peak_to_peak(&self, from: T, to: T) -> T {
        let window = self.t.iter().zip(&self.u).filter(|(t, _)| **t >= from && **t <= to).map(|(_, u)| *u);
        let (lo, hi) = window.fold((T::infinity(), T::neg_infinity()), |(lo, hi), u| (lo.min(u), hi.max(u)));
        if hi < lo {
            T::zero()
        } else {
            hi - lo
        }
    }
}

/// Simulates one replicate of the networked loop.
///
/// At every sample `t_k = k Ts` the sensor sends `y(t_k)`; the controller
/// drains its path, integrates over one period with the error held, and
/// sends its updated output; the actuator drains its path; the plant then
/// integrates one period under the held actuator value plus the load
/// disturbance. Divergence ends the trace early with `diverged` set.
pub fn run_closed_loop<T: Scalar>(
    plant: &DelayedRationalPlant<T>,
    controller: &StateSpaceModel<T>,
    cfg: &SimConfig,
    replicate_seed: u64,
) -> Result<Trace<T>> {
    cfg.validate()?;
    let n = cfg.samples();
    let ts = T::lit(cfg.ts);
    let h_sub = ts / T::lit(cfg.substeps as f64);

    let mut plant_state = plant.initial_state(h_sub);
    let mut xc = vec![T::zero(); controller.order()];
    let mut ws = Rk4Workspace::new(controller.order());

    let sc_rng = cfg.sc_channel.rng(replicate_seed, 0, SC_PATH);
    let ca_rng = cfg.ca_channel.rng(replicate_seed, 0, CA_PATH);
    let mut sc = Link::new(Channel::new(cfg.sc_channel, sc_rng)?, T::zero(), cfg.tso_enabled);
    let mut ca = Link::new(Channel::new(cfg.ca_channel, ca_rng)?, T::zero(), cfg.tso_enabled);

    let mut trace = Trace::with_capacity(n);
    let mut y = plant.output(&plant_state);
    for k in 0..n {
        let now = k as f64 * cfg.ts;
        let r = T::lit(cfg.setpoint_step.at(now));

        sc.send(y, now);
        let measured = sc.receive(now);

        let error = r - measured;
        for _ in 0..cfg.substeps {
            controller.rk4_step(&mut xc, error, h_sub, &mut ws);
        }
        let command = controller.output(&xc, error);
        if !command.is_finite() {
            trace.diverged = true;
            break;
        }
        ca.send(command, now);
        let applied = ca.receive(now);

        trace.t.push(T::lit(now));
        trace.r.push(r);
        trace.y.push(y);
        trace.u.push(applied);
        trace.e.push(r - y);

        if k + 1 == n {
            break;
        }
        let disturbance = T::lit(cfg.load_disturbance.at(now));
        match plant.integrate_step(&mut plant_state, applied + disturbance, ts, cfg.substeps) {
            Ok(next) => y = next,
            Err(_) => {
                trace.diverged = true;
                break;
            }
        }
    }
    Ok(trace)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostWeights<T> {
    pub w1: T,
    pub w2: T,
}

impl<T: Scalar> Default for CostWeights<T> {
    fn default() -> Self {
        Self { w1: T::one(), w2: T::one() }
    }
}

impl<T: Scalar> CostWeights<T> {
    pub fn validate(&self) -> Result<()> {
        if self.w1 < T::zero() || self.w2 < T::zero() || (self.w1 == T::zero() && self.w2 == T::zero()) {
            return Err(Error::InvalidSim("weights must be non-negative and not both zero".into()));
        }
        Ok(())
    }

    #[inline]
    pub fn combine(&self, itae: T, isco: T) -> T {
        self.w1 * itae + self.w2 * isco
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CostBreakdown<T> {
    pub itae: T,
    pub isco: T,
    pub j: T,
    pub penalized: bool,
}

/// `w1 ∫ t|e| dt + w2 ∫ u² dt` by the trapezoidal rule on the sample grid.
pub fn cost<T: Scalar>(trace: &Trace<T>, w: &CostWeights<T>) -> CostBreakdown<T> {
    let half = T::lit(0.5);
    let mut itae = T::zero();
    let mut isco = T::zero();
    for k in 1..trace.len() {
        let dt = trace.t[k] - trace.t[k - 1];
        let a0 = trace.t[k - 1] * trace.e[k - 1].abs();
        let a1 = trace.t[k] * trace.e[k].abs();
        itae = itae + half * dt * (a0 + a1);
        let u0 = trace.u[k - 1];
        let u1 = trace.u[k];
        isco = isco + half * dt * (u0 * u0 + u1 * u1);
    }
    let j = w.combine(itae, isco);
    let penalty = T::lit(PENALTY);
    if trace.diverged || !j.is_finite() || j > penalty {
        CostBreakdown { itae, isco, j: penalty, penalized: true }
    } else {
        CostBreakdown { itae, isco, j, penalized: false }
    }
}

/// Monte-Carlo estimate of the cost over independent network realizations.
#[derive(Debug, Clone, PartialEq)]
pub struct ExpectedCost<T> {
    /// Means of the replicate costs. When no replicate is penalized,
    /// `mean.j` is recomputed from the mean ITAE and ISCO so the cost
    /// identity holds exactly; otherwise it is the mean of the replicate `j`
    /// values and `penalized` is set.
    pub mean: CostBreakdown<T>,
    pub replicates: Vec<CostBreakdown<T>>,
    /// Sample standard deviation of the replicate `j` values.
    pub std_j: T,
}

impl<T: Scalar> ExpectedCost<T> {
    pub fn diverged_fraction(&self) -> f64 {
        let n = self.replicates.len().max(1);
        self.replicates.iter().filter(|c| c.penalized).count() as f64 / n as f64
    }
}

/// Seed of replicate `index` under `master_seed`.
pub fn replicate_seed(master_seed: u64, index: u64) -> u64 {
    seeding::child_seed(master_seed, index)
}

/// Mean cost of a given controller realization over `m` replicates.
/// Replicates run in parallel; results are reduced in index order.
pub fn expected_cost_of<T: Scalar>(
    plant: &DelayedRationalPlant<T>,
    controller: &StateSpaceModel<T>,
    cfg: &SimConfig,
    w: &CostWeights<T>,
    m: usize,
    master_seed: u64,
) -> Result<ExpectedCost<T>> {
    if m == 0 {
        return Err(Error::InvalidSim("replicate count must be at least 1".into()));
    }
    w.validate()?;
    cfg.validate()?;
    let replicates: Vec<CostBreakdown<T>> = (0..m as u64)
        .into_par_iter()
        .map(|i| run_closed_loop(plant, controller, cfg, replicate_seed(master_seed, i)).map(|tr| cost(&tr, w)))
        .collect::<Result<_>>()?;
    Ok(summarize(replicates, w))
}

fn summarize<T: Scalar>(replicates: Vec<CostBreakdown<T>>, w: &CostWeights<T>) -> ExpectedCost<T> {
    let m = T::lit(replicates.len() as f64);
    let sum = |f: fn(&CostBreakdown<T>) -> T| replicates.iter().map(f).fold(T::zero(), |a, b| a + b);
    let itae = sum(|c| c.itae) / m;
    let isco = sum(|c| c.isco) / m;
    let penalized = replicates.iter().any(|c| c.penalized);
    let j = if penalized { sum(|c| c.j) / m } else { w.combine(itae, isco) };
    let raw_mean = sum(|c| c.j) / m;
    let std_j = if replicates.len() > 1 {
        let ss = replicates.iter().map(|c| (c.j - raw_mean) * (c.j - raw_mean)).fold(T::zero(), |a, b| a + b);
        (ss / (m - T::one())).sqrt()
    } else {
        T::zero()
    };
    ExpectedCost {
        mean: CostBreakdown { itae, isco, j, penalized },
        replicates,
        std_j,
    }
}

/// Mean cost of the FOPID with parameters `params` realized over `band`.
pub fn expected_cost<T: Scalar>(
    plant: &DelayedRationalPlant<T>,
    params: &ControllerParams<T>,
    band: &Band<T>,
    cfg: &SimConfig,
    w: &CostWeights<T>,
    m: usize,
    master_seed: u64,
) -> Result<ExpectedCost<T>> {
    let controller = fopid_controller(params, band)?;
    expected_cost_of(plant, &controller, cfg, w, m, master_seed)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SurfaceCell<T> {
    pub lambda: T,
    pub mu: T,
    pub cost: ExpectedCost<T>,
}

/// Expected cost over a `(λ, μ)` grid with the gains held fixed. Rows are
/// ordered by `λ`, then `μ`.
#[allow(clippy::too_many_arguments)]
pub fn surface_sweep<T: Scalar>(
    plant: &DelayedRationalPlant<T>,
    gains: (T, T, T),
    lambda_grid: &[T],
    mu_grid: &[T],
    band: &Band<T>,
    cfg: &SimConfig,
    w: &CostWeights<T>,
    m: usize,
    seed: u64,
) -> Result<Vec<SurfaceCell<T>>> {
    let cells: Vec<(T, T)> = lambda_grid.iter().flat_map(|&l| mu_grid.iter().map(move |&u| (l, u))).collect();
    cells
        .into_par_iter()
        .map(|(lambda, mu)| {
            let params = ControllerParams::fopid(gains.0, gains.1, gains.2, lambda, mu);
            expected_cost(plant, &params, band, cfg, w, m, seed).map(|cost| SurfaceCell { lambda, mu, cost })
        })
        .collect()
}

/// `lambda,mu,itae,isco,j,penalized` rows.
pub fn surface_csv<T: Scalar>(cells: &[SurfaceCell<T>]) -> String {
    let mut out = String::from("lambda,mu,itae,isco,j,penalized\n");
    for c in cells {
        let m = &c.cost.mean;
        out.push_str(&format!("{},{},{},{},{},{}\n", c.lambda, c.mu, m.itae, m.isco, m.j, m.penalized));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::DelayLaw;
    use crate::plants::PlantPreset;

    fn flat_trace(e: f64, u: f64) -> Trace<f64> {
        let n = 1001;
        let t: Vec<f64> = (0..n).map(|k| k as f64 * 0.01).collect();
        Trace {
            r: vec![0.0; n],
            y: vec![-e; n],
            e: vec![e; n],
            u: vec![u; n],
            t,
            diverged: false,
        }
    }

    #[test]
    fn zero_signals_zero_cost() {
        let c = cost(&flat_trace(0.0, 0.0), &CostWeights::default());
        assert_eq!(c.j, 0.0);
        assert!(!c.penalized);
    }

    #[test]
    fn itae_of_unit_error() {
        let w = CostWeights { w1: 1.0, w2: 1.0 };
        let c = cost(&flat_trace(1.0, 0.0), &w);
        assert!((c.itae - 50.0).abs() <= 0.25, "{}", c.itae);
    }

    #[test]
    fn isco_of_constant_command() {
        let c = cost(&flat_trace(0.0, 2.0), &CostWeights::default());
        assert!((c.isco - 40.0).abs() < 1e-9, "{}", c.isco);
        assert_eq!(c.j, c.itae + c.isco);
    }

    #[test]
    fn diverged_trace_is_penalized() {
        let mut tr = flat_trace(1.0, 1.0);
        tr.diverged = true;
        let c = cost(&tr, &CostWeights::default());
        assert!(c.penalized);
        assert_eq!(c.j, PENALTY);
    }

    #[test]
    fn invalid_weights_rejected() {
        assert!(CostWeights { w1: 0.0, w2: 0.0 }.validate().is_err());
        assert!(CostWeights { w1: -1.0, w2: 1.0 }.validate().is_err());
    }

    #[test]
    fn unexcited_loop_stays_at_rest() {
        let plant: DelayedRationalPlant<f64> = PlantPreset::P1Fodup.build();
        let ctrl = fopid_controller(&ControllerParams::pid(2.0, 1.0, 0.1), &Band::default()).unwrap();
        let mut cfg = SimConfig::p1(ChannelConfig::ideal(), ChannelConfig::ideal())
            .with_network(ChannelConfig::new(0.2, DelayLaw::Uniform { lo: 0.0, hi: 0.1 }));
        cfg.setpoint_step.amplitude = 0.0;
        cfg.load_disturbance.amplitude = 0.0;
        let tr = run_closed_loop(&plant, &ctrl, &cfg, 11).unwrap();
        assert_eq!(tr.len(), cfg.samples());
        assert!(tr.y.iter().chain(&tr.u).all(|&v| v == 0.0));
    }

    #[test]
    fn error_is_reference_minus_output() {
        let plant: DelayedRationalPlant<f64> = PlantPreset::P1Fodup.build();
        let ctrl = fopid_controller(&ControllerParams::pid(2.688684627, 1.486143944, 0.045784858), &Band::default()).unwrap();
        let cfg = SimConfig::p1(ChannelConfig::ideal(), ChannelConfig::ideal());
        let tr = run_closed_loop(&plant, &ctrl, &cfg, 0).unwrap();
        for k in 0..tr.len() {
            assert_eq!(tr.e[k], tr.r[k] - tr.y[k]);
        }
        assert_eq!(tr.len(), 1001);
    }

    #[test]
    fn invalid_sim_config_rejected() {
        let mut cfg = SimConfig::p1(ChannelConfig::ideal(), ChannelConfig::ideal());
        cfg.ts = 0.0;
        assert!(cfg.validate().is_err());
        let mut cfg = SimConfig::p1(ChannelConfig::ideal(), ChannelConfig::ideal());
        cfg.load_disturbance.time = 11.0;
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn single_replicate_matches_direct_run() {
        let plant: DelayedRationalPlant<f64> = PlantPreset::P1Fodup.build();
        let params = ControllerParams::pid(2.6, 1.3, 0.05);
        let band = Band::default();
        let cfg = SimConfig::p1(ChannelConfig::ideal(), ChannelConfig::ideal())
            .with_network(ChannelConfig::new(0.1, DelayLaw::Uniform { lo: 0.0, hi: 0.05 }));
        let w = CostWeights::default();
        let ec = expected_cost(&plant, &params, &band, &cfg, &w, 1, 99).unwrap();
        let ctrl = fopid_controller(&params, &band).unwrap();
        let direct = cost(&run_closed_loop(&plant, &ctrl, &cfg, replicate_seed(99, 0)).unwrap(), &w);
        assert_eq!(ec.replicates[0], direct);
        assert_eq!(ec.mean.j, direct.j);
        assert!(expected_cost(&plant, &params, &band, &cfg, &w, 0, 99).is_err());
    }

    #[test]
    fn deterministic_network_gives_identical_replicates() {
        let plant: DelayedRationalPlant<f64> = PlantPreset::P1Fodup.build();
        let cfg = SimConfig::p1(ChannelConfig::ideal(), ChannelConfig::ideal())
            .with_network(ChannelConfig::new(0.0, DelayLaw::Constant { d: 0.02 }));
        let ec = expected_cost(&plant, &ControllerParams::pid(2.6, 1.2, 0.05), &Band::default(), &cfg, &CostWeights::default(), 4, 5)
            .unwrap();
        assert!(ec.replicates.windows(2).all(|w| w[0] == w[1]));
        assert_eq!(ec.std_j, 0.0);
    }

    #[test]
    fn peak_to_peak_window() {
        let mut tr = flat_trace(0.0, 1.0);
        tr.u[600] = 4.0;
        tr.u[700] = -1.0;
        assert_eq!(tr.u_peak_to_peak(5.0, 10.0), 5.0);
        assert_eq!(tr.u_peak_to_peak(0.0, 5.0), 0.0);
    }
}
