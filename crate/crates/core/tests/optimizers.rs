use fopid_ncs::optimizers::tune::{TuneProblem, evaluation_seed};
use fopid_ncs::seeding::stream_rng;
use fopid_ncs::*;
use rand::Rng;

fn sphere(x: &[f64], _: u64) -> f64 {
    x.iter().map(|v| v * v).sum()
}

fn in_pool<R: Send>(threads: usize, f: impl FnOnce() -> R + Send) -> R {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn de_rand_1_solves_the_sphere() {
    let b = SearchBox::cube(5, -5.0, 5.0).unwrap();
    let r = de_optimize(sphere, &b, &DeConfig::new(DeVariant::Rand1), 42).unwrap();
    assert!(r.best_cost < 1e-6, "{}", r.best_cost);
    assert_eq!(r.evaluations, 20 * 201);
    assert_eq!(r.history.len(), 201);
}

#[test]
fn every_de_variant_makes_progress() {
    let b = SearchBox::cube(5, -5.0, 5.0).unwrap();
    for variant in DeVariant::ALL {
        let r = de_optimize(sphere, &b, &DeConfig::new(variant), 7).unwrap();
        assert!(r.best_cost < 1e-3, "{}: {}", variant.label(), r.best_cost);
        assert!(r.history.windows(2).all(|w| w[1] <= w[0]));
    }
}

#[test]
fn ga_solves_the_sphere_roughly() {
    let b = SearchBox::cube(5, -5.0, 5.0).unwrap();
    let r = ga_optimize(sphere, &b, &GaConfig::default(), 42).unwrap();
    assert!(r.best_cost < 1e-2, "{}", r.best_cost);
    assert_eq!(r.evaluations, 20 + 200 * 18);
}

#[test]
fn de_handles_a_noisy_sphere() {
    // noise keyed by the evaluation index, as the tuning objective does
    let noisy = |x: &[f64], id: u64| {
        let mut rng = stream_rng(99, id, 0);
        sphere(x, id) + 0.01 * rng.random::<f64>()
    };
    let b = SearchBox::cube(5, -5.0, 5.0).unwrap();
    let r = de_optimize(noisy, &b, &DeConfig::new(DeVariant::Rand1), 3).unwrap();
    assert!(sphere(&r.best_params, 0) < 0.1, "{:?}", r.best_params);
}

#[test]
fn optimizer_results_do_not_depend_on_thread_count() {
    let noisy = |x: &[f64], id: u64| {
        let mut rng = stream_rng(5, id, 0);
        sphere(x, id) * (1.0 + 0.1 * rng.random::<f64>())
    };
    let b = SearchBox::cube(4, -2.0, 2.0).unwrap();
    let de = DeConfig { g_max: 40, ..DeConfig::new(DeVariant::Rand1VectorDither) };
    let ga = GaConfig { g_max: 40, ..GaConfig::default() };
    let a = in_pool(1, || de_optimize(noisy, &b, &de, 11).unwrap());
    let c = in_pool(4, || de_optimize(noisy, &b, &de, 11).unwrap());
    assert_eq!(a, c);
    let a = in_pool(1, || ga_optimize(noisy, &b, &ga, 11).unwrap());
    let c = in_pool(4, || ga_optimize(noisy, &b, &ga, 11).unwrap());
    assert_eq!(a, c);
}

#[test]
fn out_of_box_configs_are_rejected() {
    let b = SearchBox::cube(2, -1.0, 1.0).unwrap();
    let bad = DeConfig { np: 3, ..DeConfig::new(DeVariant::Rand1) };
    assert!(matches!(de_optimize(sphere, &b, &bad, 0), Err(Error::InvalidOptimizer(_))));
    let bad = DeConfig { f: 0.0, ..DeConfig::new(DeVariant::Rand1) };
    assert!(de_optimize(sphere, &b, &bad, 0).is_err());
    assert!(SearchBox::new(vec![1.0], vec![1.0]).is_err());
}

fn short_problem(plant: &Plant) -> TuneProblem<'_, f64> {
    let net = ChannelConfig::new(0.1, DelayLaw::Uniform { lo: 0.0, hi: 0.1 });
    let mut sim = SimConfig::p1(net, net);
    sim.horizon = 4.0;
    sim.load_disturbance.time = 2.0;
    TuneProblem {
        plant,
        mode: TuneMode::Pid,
        sim,
        weights: Weights::default(),
        replicates: 2,
        band: Band::default(),
    }
}

#[test]
fn tuning_is_reproducible_across_thread_counts() {
    let plant: Plant = PlantPreset::P1Fodup.build();
    let problem = short_problem(&plant);
    let alg = Algorithm::De(DeConfig { np: 8, g_max: 3, ..DeConfig::new(DeVariant::Rand1) });
    let b = SearchBox::cube(3, 0.0, 5.0).unwrap();
    let a = in_pool(1, || tune_controller(&problem, &alg, Some(b.clone()), 17).unwrap());
    let c = in_pool(4, || tune_controller(&problem, &alg, Some(b.clone()), 17).unwrap());
    assert_eq!(a, c);
    assert_eq!(a.result.evaluations, 8 * 4);
    // the reported breakdown is the evaluation that produced the best cost
    assert_eq!(a.best.j, a.result.best_cost);
    assert_eq!(a.params.lambda, 1.0);
}

#[test]
fn tuning_objective_is_the_seeded_expected_cost() {
    let plant: Plant = PlantPreset::P1Fodup.build();
    let problem = short_problem(&plant);
    let x = [2.6, 1.3, 0.05];
    let via_problem = problem.evaluate(&x, 4, 9);
    let direct = expected_cost(
        &plant,
        &ControllerParams::from_slice(&x),
        &problem.band,
        &problem.sim,
        &problem.weights,
        2,
        evaluation_seed(4, 9),
    )
    .unwrap();
    assert_eq!(via_problem, direct.mean);
}

#[test]
fn mismatched_box_is_rejected() {
    let plant: Plant = PlantPreset::P1Fodup.build();
    let problem = short_problem(&plant);
    let alg = Algorithm::Ga(GaConfig::default());
    let err = tune_controller(&problem, &alg, Some(SearchBox::fopid()), 1).unwrap_err();
    assert!(matches!(err, Error::InvalidOptimizer(_)));
}
