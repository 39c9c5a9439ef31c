use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use bgl_core::analysis::{
    complete_learning_check, estimate_rate, global_stability_scan, local_stability_experiment,
    martingale_check, stability_thresholds, verify_fixed_point, EscapeTarget, Report,
    StabilityExperiment,
};
use bgl_core::fixtures;
use bgl_core::io::{self, RunConfig};
use bgl_core::learners::{static_convergence, supported_rules, StepSchedule};
use bgl_core::{
    solve_equilibrium, Belief, EquilibriumOptions, Error, GameSpec, LearnerConfig, Result, Rule,
    StrategyProfile, UpdateSchedule,
};

use crate::{Command, ExamplesCommand, Format, GameArgs, StabilityCommand};

fn emit<R: Report>(report: &R, format: Format) {
    match format {
        Format::Text => print!("{}", report.to_text()),
        Format::Machine => println!("{}", report.to_json()),
    }
}

fn emit_json(value: serde_json::Value, text: String, format: Format) {
    match format {
        Format::Text => print!("{text}"),
        Format::Machine => println!("{}", serde_json::to_string_pretty(&value).expect("json")),
    }
}

fn fmt_profile(q: &[f64]) -> String {
    let parts: Vec<String> = q.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

impl GameArgs {
    fn resolve(&self) -> Result<GameSpec> {
        match (&self.game, &self.config) {
            (Some(name), _) => io::GameSource {
                builtin: Some(name.clone()),
                sigma: self.sigma,
                spec: None,
            }
            .resolve(),
            (None, Some(path)) => load(path)?.game.resolve(),
            (None, None) => Err(Error::Config("one of --game or --config is required".into())),
        }
    }
}

fn load(path: &Path) -> Result<RunConfig> {
    io::load_config(path)
}

fn belief(spec: &GameSpec, probs: &[f64], flag: &str) -> Result<Belief> {
    let b = Belief::from_probs(probs).map_err(|e| Error::Config(format!("{flag}: {}", e.message())))?;
    spec.check_belief(&b).map_err(|e| Error::Config(format!("{flag}: {}", e.message())))?;
    Ok(b)
}

fn profile(spec: &GameSpec, q: &[f64], flag: &str) -> Result<StrategyProfile> {
    let p = StrategyProfile(q.to_vec());
    spec.check_profile(&p)
        .map_err(|e| Error::Config(format!("{flag}: {}", e.message())))?;
    Ok(p)
}

fn parse_list(s: &str, flag: &str) -> Result<Vec<f64>> {
    s.split(',')
        .map(|x| {
            x.trim()
                .parse::<f64>()
                .map_err(|_| Error::Config(format!("{flag}: bad number {x:?}")))
        })
        .collect()
}

pub fn dispatch(command: Command, format: Format) -> Result<()> {
    match command {
        Command::Simulate {
            config,
            trajectory,
            summary,
            record_every,
        } => {
            let cfg = load(&config)?;
            let (resolved, traj) = cfg.run()?;
            let tol = &cfg.tolerances;
            let report = traj.summary(tol.convergence_window, tol.convergence_tol);
            let every = record_every.unwrap_or(cfg.record_every);
            if every == 0 {
                return Err(Error::Config("--record-every: must be at least 1".into()));
            }
            if let Some(path) = trajectory.or(cfg.output.trajectory.clone()) {
                io::write_trajectory(&resolved.spec, &traj, every, &path)?;
            }
            if let Some(path) = summary.or(cfg.output.summary.clone()) {
                io::save_summary(&report, &path)?;
            }
            let conv = match &report.convergence {
                Some(c) => format!(
                    "converged by stage {}: theta = {}, q = {}",
                    c.stage,
                    fmt_profile(&c.belief.probs()),
                    fmt_profile(&c.strategy)
                ),
                None => "not converged within the horizon".to_string(),
            };
            let text = format!(
                "{} stages, {} belief updates\nfinal theta = {}\nfinal q = {}\n{conv}\n",
                report.horizon,
                report.belief_updates,
                fmt_profile(&report.final_belief.probs()),
                fmt_profile(&report.final_strategy)
            );
            emit_json(serde_json::to_value(&report).expect("json"), text, format);
            Ok(())
        }
        Command::Sweep {
            manifest,
            out,
            record_every,
        } => {
            let mut m = io::load_manifest(&manifest)?;
            if let Some(n) = record_every {
                m.base.record_every = n.max(1);
            }
            let report = io::run_sweep(&m)?;
            if let Some(path) = out {
                io::save_summary(&report, &path)?;
            }
            let text = format!(
                "{}: {} runs, {} converged\n",
                report.game,
                report.runs.len(),
                report.converged
            );
            emit_json(serde_json::to_value(&report).expect("json"), text, format);
            Ok(())
        }
        Command::Equilibrium {
            game,
            theta,
            tol,
            starts,
        } => {
            let spec = game.resolve()?;
            let theta = belief(&spec, &theta, "--theta")?;
            let opts = EquilibriumOptions {
                tol,
                starts,
                ..EquilibriumOptions::default()
            };
            let eqs = solve_equilibrium(&spec, &theta, &opts)?;
            if eqs.is_empty() {
                return Err(Error::Numeric("no equilibrium found".into()));
            }
            let text: String = eqs.iter().map(|q| fmt_profile(q) + "\n").collect();
            emit_json(serde_json::to_value(&eqs).expect("json"), text, format);
            Ok(())
        }
        Command::VerifyFixpoint {
            game,
            theta,
            q,
            kl_tol,
            br_tol,
        } => {
            let spec = game.resolve()?;
            let theta = belief(&spec, &theta, "--theta")?;
            let q = profile(&spec, &q, "--q")?;
            emit(&verify_fixed_point(&spec, &theta, &q, kl_tol, br_tol)?, format);
            Ok(())
        }
        Command::Rate {
            game,
            trajectory,
            param,
            tail,
        } => {
            let (spec, traj) = match trajectory {
                Some(path) => {
                    let spec = game.resolve()?;
                    let traj = io::read_trajectory(&path, &spec)?;
                    (spec, traj)
                }
                None => {
                    let path = game.config.as_ref().ok_or_else(|| {
                        Error::Config("rate needs --trajectory or --config".into())
                    })?;
                    let (resolved, traj) = load(path)?.run()?;
                    (resolved.spec, traj)
                }
            };
            let s = spec.params.resolve(&param)?;
            emit(&estimate_rate(&spec, &traj, s, tail)?, format);
            Ok(())
        }
        Command::MartingaleCheck {
            game,
            theta,
            q,
            samples,
            seed,
        } => {
            let spec = game.resolve()?;
            let theta = belief(&spec, &theta, "--theta")?;
            let q = profile(&spec, &q, "--q")?;
            emit(&martingale_check(&spec, &theta, &q, samples, seed)?, format);
            Ok(())
        }
        Command::Stability { kind } => stability(kind, format),
        Command::Thresholds {
            theta,
            epsilon_hat,
            gamma,
            true_index,
        } => {
            let theta = Belief::from_probs(&theta).map_err(|e| Error::Config(format!("--theta: {}", e.message())))?;
            emit(&stability_thresholds(&theta, epsilon_hat, gamma, true_index)?, format);
            Ok(())
        }
        Command::CompleteLearning {
            game,
            theta,
            q,
            xi,
            probes,
            seed,
        } => {
            let spec = game.resolve()?;
            let theta = belief(&spec, &theta, "--theta")?;
            let q = profile(&spec, &q, "--q")?;
            emit(&complete_learning_check(&spec, &theta, &q, xi, probes, seed)?, format);
            Ok(())
        }
        Command::CheckStatic {
            game,
            rule,
            starts,
            steps,
            tol,
            alpha,
            seed,
        } => check_static(&game, rule.as_deref(), starts, steps, tol, alpha, seed, format),
        Command::Examples { kind } => match kind {
            ExamplesCommand::List => {
                let list: Vec<_> = fixtures::NAMES
                    .iter()
                    .map(|n| {
                        let fx = fixtures::by_name(n).expect("builtin");
                        serde_json::json!({
                            "name": n,
                            "description": fx.description,
                            "verdict": fx.global_verdict,
                            "fixed_points": fx.known_fixed_points,
                        })
                    })
                    .collect();
                let text: String = fixtures::NAMES
                    .iter()
                    .map(|n| format!("{n}  {}\n", fixtures::by_name(n).expect("builtin").description))
                    .collect();
                emit_json(serde_json::Value::Array(list), text, format);
                Ok(())
            }
            ExamplesCommand::Export { name, out } => {
                let cfg = io::builtin_config(&name)?;
                match out {
                    Some(path) => io::save_config(&cfg, path),
                    None => {
                        print!("{}", io::config_to_toml(&cfg)?);
                        Ok(())
                    }
                }
            }
        },
    }
}

fn stability(kind: StabilityCommand, format: Format) -> Result<()> {
    match kind {
        StabilityCommand::Local {
            game,
            theta_bar,
            eq,
            gamma,
            eps_bar,
            eps_x,
            eps1,
            delta1,
            runs,
            horizon,
            seed,
            rule,
            escape_theta,
            escape_q,
            escape_radius,
        } => {
            let spec = game.resolve()?;
            let theta_bar = belief(&spec, &theta_bar, "--theta-bar")?;
            let eq_set = eq
                .iter()
                .map(|s| profile(&spec, &parse_list(s, "--eq")?, "--eq"))
                .collect::<Result<Vec<_>>>()?;
            let eps1 = match eps1 {
                Some(e) => e,
                None => stability_thresholds(&theta_bar, eps_bar, gamma, spec.true_index())?.epsilon1,
            };
            let escape = if escape_theta.is_empty() {
                None
            } else {
                Some(EscapeTarget {
                    belief: belief(&spec, &escape_theta, "--escape-theta")?,
                    strategy: profile(&spec, &escape_q, "--escape-q")?,
                    radius: escape_radius,
                })
            };
            let exp = StabilityExperiment {
                learner: LearnerConfig::new(Rule::parse(&rule)?),
                schedule: UpdateSchedule::EveryStage,
                theta_bar,
                eq_set,
                gamma,
                eps_bar,
                eps_x,
                eps1,
                delta1,
                n_runs: runs,
                horizon,
                seed,
                escape,
            };
            emit(&local_stability_experiment(&spec, &exp)?, format);
            Ok(())
        }
        StabilityCommand::Global {
            game,
            resolution,
            q_tol,
        } => {
            let spec = game.resolve()?;
            emit(&global_stability_scan(&spec, resolution, q_tol)?, format);
            Ok(())
        }
    }
}

#[allow(clippy::too_many_arguments)]
fn check_static(
    game: &GameArgs,
    rule: Option<&str>,
    starts: usize,
    steps: u64,
    tol: f64,
    alpha: f64,
    seed: u64,
    format: Format,
) -> Result<()> {
    let spec = game.resolve()?;
    let rules: Vec<Rule> = match rule {
        Some(r) => vec![Rule::parse(r)?],
        None => supported_rules(&spec).to_vec(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rows = Vec::new();
    let mut text = String::new();
    let mut all_ok = true;
    for rule in rules {
        let config = LearnerConfig::new(rule).with_step(StepSchedule::Constant { c: alpha });
        config.validate()?;
        let mut converged = 0;
        let mut worst = 0;
        for _ in 0..starts {
            let w: Vec<f64> = (0..spec.n_params())
                .map(|_| -(1.0 - rng.random::<f64>()).ln() + 1e-12)
                .collect();
            let total: f64 = w.iter().sum();
            let theta = Belief::from_probs(&w.iter().map(|x| x / total).collect::<Vec<_>>())?;
            let start = StrategyProfile(
                spec.strategy_sets
                    .iter()
                    .map(|iv| rng.random_range(iv.lo..=iv.hi))
                    .collect(),
            );
            if let Some(k) = static_convergence(&spec, &theta, &config, &start, steps, tol)? {
                converged += 1;
                worst = worst.max(k);
            }
        }
        all_ok &= converged == starts;
        text.push_str(&format!(
            "{:<16} {converged}/{starts} converged (slowest {worst} steps)\n",
            rule.name()
        ));
        rows.push(serde_json::json!({
            "rule": rule,
            "starts": starts,
            "converged": converged,
            "slowest": worst,
        }));
    }
    emit_json(serde_json::Value::Array(rows), text, format);
    if all_ok {
        Ok(())
    } else {
        Err(Error::Numeric("some starts did not converge".into()))
    }
}
