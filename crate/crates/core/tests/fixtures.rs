use bgl_core::analysis::verify_fixed_point;
use bgl_core::dynamics::detect_convergence;
use bgl_core::fixtures::{self, cournot_equilibrium, GlobalVerdict};
use bgl_core::io::{builtin_config, config_to_toml, parse_toml, parse_trajectory, trajectory_to_string};
use bgl_core::{
    run, solve_equilibrium, Belief, EquilibriumOptions, LearnerConfig, RunConfig, Rule, Seed, StrategyProfile,
    UpdateSchedule,
};
use rand::Rng;

#[test]
fn known_fixed_points_verify() {
    for name in fixtures::NAMES {
        let fx = fixtures::by_name(name).unwrap();
        for fp in &fx.known_fixed_points {
            let r = verify_fixed_point(&fx.spec, &fp.belief, &fp.strategy, 1e-9, 1e-8).unwrap();
            assert!(r.is_fixed_point, "{name}: {:?}", fp.strategy);
            assert_eq!(r.is_complete_info, fp.complete_info, "{name}: {:?}", fp.strategy);
        }
        let has_incomplete = fx.known_fixed_points.iter().any(|fp| !fp.complete_info);
        assert_eq!(fx.global_verdict == GlobalVerdict::NoneGloballyStable, has_incomplete);
    }
}

#[test]
fn perturbed_profile_is_not_a_fixed_point() {
    let fx = fixtures::build_investment();
    let fp = &fx.known_fixed_points[0];
    let q = StrategyProfile(fp.strategy.0.iter().map(|x| x + 0.05).collect());
    let r = verify_fixed_point(&fx.spec, &fp.belief, &q, 1e-9, 1e-8).unwrap();
    assert!(!r.is_fixed_point);
}

#[test]
fn cournot_solver_matches_closed_form() {
    let spec = fixtures::cournot_spec();
    let mut rng = Seed::new(3, 0).rng();
    for _ in 0..25 {
        let p: f64 = rng.random();
        let theta = Belief::from_probs(&[p, 1.0 - p]).unwrap();
        let eqs = solve_equilibrium(&spec, &theta, &EquilibriumOptions::default()).unwrap();
        let expected = cournot_equilibrium(&theta);
        assert_eq!(eqs.len(), 1);
        for (a, b) in eqs[0].0.iter().zip(&expected.0) {
            assert!((a - b).abs() < 1e-7, "{a} vs {b} at p = {p}");
        }
    }
}

#[test]
fn investment_random_starts_reach_the_fixed_point() {
    let fx = fixtures::build_investment();
    let target = &fx.known_fixed_points[0];
    let learner = LearnerConfig::new(Rule::SequentialBr);
    let mut rng = Seed::new(11, 0).rng();
    for r in 0..20u64 {
        let w: Vec<f64> = (0..3).map(|_| rng.random::<f64>() + 1e-3).collect();
        let total: f64 = w.iter().sum();
        let theta = Belief::from_probs(&w.iter().map(|x| x / total).collect::<Vec<_>>()).unwrap();
        let q = StrategyProfile(vec![rng.random(), rng.random()]);
        let traj = run(&fx.spec, &learner, UpdateSchedule::EveryStage, theta, q, 3000, Seed::new(11, r + 1)).unwrap();
        assert!(traj.final_belief.sup_distance(&target.belief) < 1e-6, "run {r}");
        for (a, b) in traj.final_strategy.0.iter().zip(&target.strategy.0) {
            assert!((a - b).abs() < 1e-6, "run {r}: {a} vs {b}");
        }
        assert!(detect_convergence(&traj, 500, 1e-6).is_some(), "run {r}");
    }
}

#[test]
fn builtin_configs_round_trip_through_toml() {
    for name in fixtures::NAMES {
        let cfg = builtin_config(name).unwrap();
        let text = config_to_toml(&cfg).unwrap();
        let back: RunConfig = parse_toml(&text, name).unwrap();
        assert_eq!(config_to_toml(&back).unwrap(), text);
        back.validate().unwrap();
    }
}

#[test]
fn trajectory_file_round_trip() {
    let spec = fixtures::zero_sum_spec();
    let learner = LearnerConfig::new(Rule::InertialBr);
    let traj = run(
        &spec,
        &learner,
        UpdateSchedule::EveryN { n: 3 },
        Belief::uniform(3),
        StrategyProfile(vec![3.0, 3.0]),
        200,
        Seed::new(5, 2),
    )
    .unwrap();
    let text = trajectory_to_string(&spec, &traj, 1);
    let back = parse_trajectory(&text, 3, 2).unwrap();
    assert_eq!(back.records.len(), traj.records.len());
    for (a, b) in traj.records.iter().zip(&back.records) {
        assert_eq!(a.k, b.k);
        for (x, y) in a.belief.log_probs().iter().zip(b.belief.log_probs()) {
            assert!((x - y).abs() <= 1e-14 * x.abs().max(1.0), "{x} vs {y}");
        }
        assert_eq!(a.strategy, b.strategy);
        assert_eq!(a.observation, b.observation);
    }
}
