//! One function per subcommand. Each returns whether its result counts as a
//! success for the exit code.

use std::fs;
use std::path::Path;

use anyhow::{bail, Context};
use fopid_ncs::optimizers::tune::TuneProblem;
use fopid_ncs::simloop::{replicate_seed, surface_csv, surface_sweep};
use fopid_ncs::studies::{
    buffer_conditions, degradation_conditions, degradation_summary, evaluate_conditions, robustness_conditions,
    rows_csv, bounded_laws, StudyRow,
};
use fopid_ncs::{
    audit_channel, channel_stats, cost, expected_cost_of, run_closed_loop, tune_controller, ControllerSpec, Plant,
    TuneMode,
};
use serde::Serialize;
use serde_json::json;

use crate::config::{self, controller_of};

/// Paths and seed override shared by every subcommand.
pub struct Ctx<'a> {
    pub config: &'a Path,
    pub out: &'a Path,
    pub seed: Option<u64>,
}

impl Ctx<'_> {
    fn seed(&self, from_config: Option<u64>) -> u64 {
        self.seed.or(from_config).unwrap_or(0)
    }

    fn write(&self, name: &str, contents: &str) -> anyhow::Result<()> {
        fs::create_dir_all(self.out).with_context(|| format!("cannot create {}", self.out.display()))?;
        let path = self.out.join(name);
        fs::write(&path, contents).with_context(|| format!("cannot write {}", path.display()))
    }

    fn write_json<S: Serialize>(&self, name: &str, value: &S) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, &text)
    }
}

fn plant_of(spec: &fopid_ncs::PlantSpec) -> anyhow::Result<Plant> {
    spec.build().context("invalid plant")
}

pub fn tune(ctx: &Ctx) -> anyhow::Result<bool> {
    let cfg: config::TuneConfig = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let plant = plant_of(&cfg.plant)?;
    let problem = TuneProblem {
        plant: &plant,
        mode: cfg.mode,
        sim: cfg.sim.resolve(),
        weights: cfg.weights,
        replicates: cfg.replicates,
        band: cfg.band,
    };
    let tuned = tune_controller(&problem, &cfg.optimizer, cfg.bounds.clone(), seed)?;
    let p = tuned.params;
    let controller = ControllerSpec {
        kp: p.kp,
        ki: p.ki,
        kd: p.kd,
        lambda: p.lambda,
        mu: p.mu,
        omega_b: cfg.band.omega_b,
        omega_h: cfg.band.omega_h,
        n_half: cfg.band.n_half,
    };
    let record = json!({
        "algorithm": tuned.algorithm,
        "mode": match tuned.mode { TuneMode::Pid => "pid", TuneMode::Fopid => "fopid" },
        "j_min": tuned.best.j,
        "itae": tuned.best.itae,
        "isco": tuned.best.isco,
        "penalized": tuned.penalized(),
        "controller": controller,
        "best_params": tuned.result.best_params,
        "evaluations": tuned.result.evaluations,
        "best_evaluation": tuned.result.best_evaluation,
        "replicates": cfg.replicates,
        "seed": seed,
    });
    ctx.write_json("result.json", &record)?;
    ctx.write("history.csv", &tuned.result.history_csv())?;
    println!(
        "{}: J = {} (kp {}, ki {}, kd {}, lambda {}, mu {}){}",
        tuned.algorithm,
        tuned.best.j,
        p.kp,
        p.ki,
        p.kd,
        p.lambda,
        p.mu,
        if tuned.penalized() { " [penalized: no stabilizing controller found]" } else { "" }
    );
    Ok(!tuned.penalized())
}

pub fn simulate(ctx: &Ctx) -> anyhow::Result<bool> {
    let cfg: config::SimulateConfig = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let plant = plant_of(&cfg.plant)?;
    let spec = controller_of(cfg.controller, cfg.controller_from.clone(), ctx.config)?;
    let controller = spec.build()?;
    let sim = cfg.sim.resolve();
    let trace = run_closed_loop(&plant, &controller, &sim, replicate_seed(seed, 0))?;
    let ec = expected_cost_of(&plant, &controller, &sim, &cfg.weights, cfg.replicates, seed)?;
    debug_assert_eq!(cost(&trace, &cfg.weights), ec.replicates[0]);
    ctx.write("trace.csv", &trace.to_csv())?;
    ctx.write_json(
        "cost.json",
        &json!({
            "mean": ec.mean,
            "std_j": ec.std_j,
            "diverged_fraction": ec.diverged_fraction(),
            "replicates": ec.replicates,
            "seed": seed,
        }),
    )?;
    println!("J = {} over {} replicate(s), diverged fraction {}", ec.mean.j, cfg.replicates, ec.diverged_fraction());
    Ok(true)
}

pub fn sweep(ctx: &Ctx) -> anyhow::Result<bool> {
    let cfg: config::SweepConfig = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let plant = plant_of(&cfg.plant)?;
    let lambda = cfg.lambda.values().context("invalid lambda grid")?;
    let mu = cfg.mu.values().context("invalid mu grid")?;
    let g = cfg.gains;
    let cells = surface_sweep(
        &plant,
        (g.kp, g.ki, g.kd),
        &lambda,
        &mu,
        &cfg.band,
        &cfg.sim.resolve(),
        &cfg.weights,
        cfg.replicates,
        seed,
    )?;
    ctx.write("surface.csv", &surface_csv(&cells))?;
    let finite = cells.iter().filter(|c| !c.cost.mean.penalized).count();
    println!("{} cells, {finite} non-penalized", cells.len());
    Ok(true)
}

pub fn channel_audit(ctx: &Ctx) -> anyhow::Result<bool> {
    let cfg: config::ChannelAuditConfig = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    if cfg.ts.is_nan() || cfg.ts <= 0.0 {
        bail!("ts must be positive");
    }
    let (log, _) = audit_channel(&cfg.channel, cfg.packets, cfg.ts, seed, cfg.tso_enabled)?;
    let stats = channel_stats(&log, &cfg.channel.delay, cfg.bins);
    ctx.write_json("channel_stats.json", &stats)?;
    ctx.write("channel_log.csv", &log.to_csv())?;
    println!(
        "sent {}, dropped {} ({:.4}), TSO discarded {}",
        stats.sent, stats.dropped_count, stats.drop_rate, stats.tso_discarded_count
    );
    Ok(true)
}

fn report(rows: &[StudyRow]) {
    for r in rows {
        println!("{:<28} mean J {:>14.6}  diverged {:.2}", r.condition, r.mean_j, r.diverged_fraction);
    }
}

pub fn study_degradation(ctx: &Ctx) -> anyhow::Result<bool> {
    let cfg: config::DegradationConfig = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let plant = plant_of(&cfg.plant)?;
    let controller = controller_of(cfg.controller, cfg.controller_from.clone(), ctx.config)?.build()?;
    let (statics, uniforms) = cfg.levels()?;
    let conditions = degradation_conditions(&cfg.sim.resolve(), &statics, &uniforms, cfg.drop_prob);
    let rows = evaluate_conditions(&plant, &controller, &conditions, &cfg.weights, cfg.replicates, seed)?;
    let summary = degradation_summary(&rows, &statics, &uniforms);
    ctx.write("degradation.csv", &rows_csv(&rows))?;
    ctx.write_json("degradation_summary.json", &summary)?;
    report(&rows);
    Ok(true)
}

pub fn study_buffer(ctx: &Ctx) -> anyhow::Result<bool> {
    let cfg: config::BufferConfig = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let plant = plant_of(&cfg.plant)?;
    let controller = controller_of(cfg.controller, cfg.controller_from.clone(), ctx.config)?.build()?;
    let conditions = buffer_conditions(&cfg.sim.resolve(), cfg.channel);
    let rows = evaluate_conditions(&plant, &controller, &conditions, &cfg.weights, cfg.replicates, seed)?;
    ctx.write("buffer.csv", &rows_csv(&rows))?;
    report(&rows);
    Ok(true)
}

pub fn study_robustness(ctx: &Ctx) -> anyhow::Result<bool> {
    let cfg: config::RobustnessConfig = config::load(ctx.config)?;
    let seed = ctx.seed(cfg.seed);
    let plant = plant_of(&cfg.plant)?;
    let controller = controller_of(cfg.controller, cfg.controller_from.clone(), ctx.config)?.build()?;
    let laws = cfg.laws.clone().unwrap_or_else(|| bounded_laws(cfg.delay_bound).to_vec());
    let conditions = robustness_conditions(&cfg.sim.resolve(), &laws, cfg.drop_prob);
    let rows = evaluate_conditions(&plant, &controller, &conditions, &cfg.weights, cfg.replicates, seed)?;
    ctx.write("robustness.csv", &rows_csv(&rows))?;
    report(&rows);
    Ok(true)
}
