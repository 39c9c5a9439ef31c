use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{fmt_vec, Report};
use crate::belief::{equivalent_unchecked, Belief, DEFAULT_KL_TOL};
use crate::dynamics::{Seed, Simulation, UpdateSchedule};
use crate::error::{Error, Result};
use crate::game::{GameSpec, StrategyProfile};
use crate::learners::{solve_equilibrium, EquilibriumOptions, LearnerConfig};

const MAX_REJECTIONS: usize = 100_000;

/// State that runs may escape to, with the radius that counts as arrival.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EscapeTarget {
    pub belief: Belief,
    pub strategy: StrategyProfile,
    pub radius: f64,
}

#[derive(Debug, Clone)]
pub struct StabilityExperiment {
    pub learner: LearnerConfig,
    pub schedule: UpdateSchedule,
    pub theta_bar: Belief,
    pub eq_set: Vec<StrategyProfile>,
    pub gamma: f64,
    /// Target belief neighborhood (max-norm).
    pub eps_bar: f64,
    /// Target strategy neighborhood around the equilibrium set (Euclidean).
    pub eps_x: f64,
    /// Initial belief radius.
    pub eps1: f64,
    /// Initial strategy radius.
    pub delta1: f64,
    pub n_runs: usize,
    pub horizon: usize,
    pub seed: u64,
    pub escape: Option<EscapeTarget>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StabilityReport {
    pub gamma: f64,
    pub eps_bar: f64,
    pub eps_x: f64,
    pub eps1: f64,
    pub delta1: f64,
    pub n_runs: usize,
    /// The limit in probability is estimated at this finite horizon.
    pub horizon: usize,
    /// Runs whose whole path stayed in the target neighborhoods.
    pub containment_fraction: f64,
    /// Runs whose final state lies in the target neighborhoods.
    pub final_neighborhood_fraction: f64,
    pub escape_fraction: Option<f64>,
}

fn sample_belief<R: Rng>(rng: &mut R, center: &Belief, radius: f64) -> Result<Belief> {
    if radius == 0.0 {
        return Ok(center.clone());
    }
    let c = center.probs();
    let n = c.len();
    for _ in 0..MAX_REJECTIONS {
        let mut d: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..radius)).collect();
        let mean = d.iter().sum::<f64>() / n as f64;
        d.iter_mut().for_each(|x| *x -= mean);
        let p: Vec<f64> = c.iter().zip(&d).map(|(a, b)| a + b).collect();
        if p.iter().all(|&x| x > 0.0) && d.iter().all(|x| x.abs() < radius) {
            let total: f64 = p.iter().sum();
            let p: Vec<f64> = p.iter().map(|x| x / total).collect();
            return Belief::from_probs(&p);
        }
    }
    Err(Error::config(format!(
        "belief neighborhood of radius {radius} has no interior point of the simplex"
    )))
}

fn sample_profile<R: Rng>(
    rng: &mut R,
    spec: &GameSpec,
    eq_set: &[StrategyProfile],
    radius: f64,
) -> Result<StrategyProfile> {
    let center = &eq_set[rng.random_range(0..eq_set.len())];
    if radius == 0.0 {
        return Ok(center.clone());
    }
    let d = center.len();
    for _ in 0..MAX_REJECTIONS {
        let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let r = radius * rng.random::<f64>().powf(1.0 / d as f64);
        let q: Vec<f64> = center.iter().zip(&dir).map(|(c, u)| c + r * u / norm).collect();
        if q.iter().zip(&spec.strategy_sets).all(|(x, iv)| iv.contains(*x)) {
            return Ok(StrategyProfile(q));
        }
    }
    Err(Error::config(format!(
        "strategy neighborhood of radius {radius} does not meet the strategy space"
    )))
}

fn eq_distance(eq_set: &[StrategyProfile], q: &StrategyProfile) -> f64 {
    eq_set.iter().map(|e| e.distance(q)).fold(f64::INFINITY, f64::min)
}

/// Runs trajectories from random starts near `(theta_bar, eq_set)` and
/// measures how many stay near it.
pub fn local_stability_experiment(spec: &GameSpec, exp: &StabilityExperiment) -> Result<StabilityReport> {
    spec.check_belief(&exp.theta_bar)?;
    if exp.eq_set.is_empty() {
        return Err(Error::config("eq_set must not be empty"));
    }
    for q in &exp.eq_set {
        spec.check_profile(q)?;
    }
    if !(exp.eps_bar > 0.0 && exp.eps_x > 0.0) {
        return Err(Error::config("target neighborhoods must be positive"));
    }
    if !(exp.eps1 >= 0.0 && exp.delta1 >= 0.0) {
        return Err(Error::config("initial radii must be non-negative"));
    }
    if exp.n_runs == 0 {
        return Err(Error::config("n_runs must be at least 1"));
    }
    let sim = Simulation::new(spec, &exp.learner, exp.schedule, exp.horizon)
        .allow_excluded_prior(exp.eps1 == 0.0);

    let outcomes: Vec<(bool, bool, bool)> = (0..exp.n_runs as u64)
        .into_par_iter()
        .map(|r| {
            let mut rng = ChaCha8Rng::seed_from_u64(exp.seed);
            rng.set_stream(r);
            let theta = sample_belief(&mut rng, &exp.theta_bar, exp.eps1)?;
            let q = sample_profile(&mut rng, spec, &exp.eq_set, exp.delta1)?;
            let traj = sim.run(theta, q, Seed::new(exp.seed, exp.n_runs as u64 + r))?;
            let inside = |b: &Belief, q: &StrategyProfile| {
                b.sup_distance(&exp.theta_bar) < exp.eps_bar && eq_distance(&exp.eq_set, q) < exp.eps_x
            };
            let contained = traj.records.iter().all(|rec| inside(&rec.belief, &rec.strategy))
                && inside(&traj.final_belief, &traj.final_strategy);
            let final_in = inside(&traj.final_belief, &traj.final_strategy);
            let escaped = exp.escape.as_ref().is_some_and(|t| {
                traj.final_belief.sup_distance(&t.belief) < t.radius
                    && traj.final_strategy.distance(&t.strategy) < t.radius
            });
            Ok((contained, final_in, escaped))
        })
        .collect::<Result<_>>()?;

    let n = exp.n_runs as f64;
    let frac = |f: fn(&(bool, bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
    Ok(StabilityReport {
        gamma: exp.gamma,
        eps_bar: exp.eps_bar,
        eps_x: exp.eps_x,
        eps1: exp.eps1,
        delta1: exp.delta1,
        n_runs: exp.n_runs,
        horizon: exp.horizon,
        containment_fraction: frac(|o| o.0),
        final_neighborhood_fraction: frac(|o| o.1),
        escape_fraction: exp.escape.as_ref().map(|_| frac(|o| o.2)),
    })
}

impl Report for StabilityReport {
    fn to_text(&self) -> String {
        let mut out = format!(
            "{} runs, horizon {}\n  containment fraction:      {:.4}\n  final neighborhood fraction: {:.4} (gamma = {})\n",
            self.n_runs, self.horizon, self.containment_fraction, self.final_neighborhood_fraction, self.gamma
        );
        if let Some(e) = self.escape_fraction {
            out.push_str(&format!("  escape fraction:           {e:.4}\n"));
        }
        out
    }
}

/// A belief on the grid with an equilibrium at which every parameter in the
/// support is payoff-equivalent to the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub belief: Belief,
    pub strategy: StrategyProfile,
    pub support: Vec<usize>,
    pub equivalent_set: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanFailure {
    pub belief: Belief,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GlobalScanReport {
    pub game: String,
    pub resolution: usize,
    pub grid_points: usize,
    pub violations: Vec<Violation>,
    pub failures: Vec<ScanFailure>,
    /// Grid beliefs at which no equilibrium was found.
    pub unsolved: Vec<Belief>,
    #[serde(skip)]
    labels: Vec<String>,
}

impl GlobalScanReport {
    /// No incomplete-information fixed point was found at this resolution.
    pub fn certified(&self) -> bool {
        self.violations.is_empty() && self.failures.is_empty() && self.unsolved.is_empty()
    }
}

fn simplex_grid(n: usize, resolution: usize) -> Vec<Vec<usize>> {
    fn rec(n: usize, left: usize, cur: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
        if cur.len() + 1 == n {
            cur.push(left);
            out.push(cur.clone());
            cur.pop();
            return;
        }
        for c in (0..=left).rev() {
            cur.push(c);
            rec(n, left - c, cur, out);
            cur.pop();
        }
    }
    let mut out = Vec::new();
    rec(n, resolution, &mut Vec::with_capacity(n), &mut out);
    out
}

/// Solves for equilibria at every belief of the grid `theta(s) = c_s / resolution`
/// other than the point mass on the truth, and reports those equilibria at
/// which the support cannot be told apart from the truth.
pub fn global_stability_scan(spec: &GameSpec, resolution: usize, q_tol: f64) -> Result<GlobalScanReport> {
    if resolution < 10 {
        return Err(Error::config("resolution must be at least 10"));
    }
    if !(q_tol > 0.0) {
        return Err(Error::config("q_tol must be positive"));
    }
    let star = spec.true_index();
    let grid: Vec<Vec<usize>> = simplex_grid(spec.n_params(), resolution)
        .into_iter()
        .filter(|c| c[star] != resolution)
        .collect();
    let opts = EquilibriumOptions {
        tol: q_tol,
        ..EquilibriumOptions::default()
    };
    enum Outcome {
        Found(Vec<Violation>),
        Unsolved(Belief),
        Failed(ScanFailure),
    }
    let outcomes: Vec<Outcome> = grid
        .par_iter()
        .map(|c| {
            let probs: Vec<f64> = c.iter().map(|&x| x as f64 / resolution as f64).collect();
            let belief = Belief::from_probs(&probs).expect("grid point on the simplex");
            let support: Vec<usize> = (0..c.len()).filter(|&s| c[s] > 0).collect();
            match solve_equilibrium(spec, &belief, &opts) {
                Err(e) => Outcome::Failed(ScanFailure {
                    belief,
                    message: e.to_string(),
                }),
                Ok(eqs) if eqs.is_empty() => Outcome::Unsolved(belief),
                Ok(eqs) => Outcome::Found(
                    eqs.into_iter()
                        .filter_map(|q| {
                            let equivalent_set = equivalent_unchecked(spec, &q, DEFAULT_KL_TOL);
                            support.iter().all(|s| equivalent_set.contains(s)).then(|| Violation {
                                belief: belief.clone(),
                                strategy: q,
                                support: support.clone(),
                                equivalent_set,
                            })
                        })
                        .collect(),
                ),
            }
        })
        .collect();
    let mut report = GlobalScanReport {
        game: spec.name.clone(),
        resolution,
        grid_points: grid.len(),
        violations: Vec::new(),
        failures: Vec::new(),
        unsolved: Vec::new(),
        labels: spec.params.ids.clone(),
    };
    for o in outcomes {
        match o {
            Outcome::Found(v) => report.violations.extend(v),
            Outcome::Unsolved(b) => report.unsolved.push(b),
            Outcome::Failed(f) => report.failures.push(f),
        }
    }
    if !report.failures.is_empty() {
        log::warn!("equilibrium solver failed at {} grid points", report.failures.len());
    }
    Ok(report)
}

impl Report for GlobalScanReport {
    fn to_text(&self) -> String {
        let mut out = format!(
            "{}: {} beliefs at resolution {}\n",
            self.game, self.grid_points, self.resolution
        );
        if self.certified() {
            out.push_str("no incomplete-information fixed point found at this resolution\n");
        }
        for v in &self.violations {
            let support: Vec<&str> = v.support.iter().map(|&s| self.labels[s].as_str()).collect();
            out.push_str(&format!(
                "  fixed point candidate: theta = {}, q = {}, support {{{}}}\n",
                fmt_vec(&v.belief.probs()),
                fmt_vec(&v.strategy),
                support.join(", ")
            ));
        }
        for f in &self.failures {
            out.push_str(&format!("  solver failure at {}: {}\n", fmt_vec(&f.belief.probs()), f.message));
        }
        for b in &self.unsolved {
            out.push_str(&format!("  no equilibrium found at {}\n", fmt_vec(&b.probs())));
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::learners::Rule;

    #[test]
    fn grid_size_and_membership() {
        let g = simplex_grid(3, 10);
        assert_eq!(g.len(), 66);
        assert!(g.iter().all(|c| c.iter().sum::<usize>() == 10));
        assert_eq!(simplex_grid(2, 10).len(), 11);
    }

    #[test]
    fn belief_samples_stay_in_neighborhood() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let center = Belief::point_mass(3, 0);
        for _ in 0..500 {
            let b = sample_belief(&mut rng, &center, 0.05).unwrap();
            assert!(b.sup_distance(&center) < 0.05);
            assert!(b.probs().iter().all(|&p| p > 0.0));
        }
    }

    #[test]
    fn profile_samples_stay_feasible() {
        let spec = fixtures::zero_sum_spec();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let eq = vec![StrategyProfile(vec![0.0, 2.0])];
        for _ in 0..500 {
            let q = sample_profile(&mut rng, &spec, &eq, 0.3).unwrap();
            spec.check_profile(&q).unwrap();
            assert!(q.distance(&eq[0]) < 0.3);
        }
    }

    #[test]
    fn exact_fixed_point_start_is_contained() {
        let spec = fixtures::cournot_spec();
        let exp = StabilityExperiment {
            learner: LearnerConfig::new(Rule::SequentialBr),
            schedule: UpdateSchedule::EveryStage,
            theta_bar: Belief::point_mass(2, 0),
            eq_set: vec![StrategyProfile(vec![2.0 / 3.0, 2.0 / 3.0])],
            gamma: 0.9,
            eps_bar: 0.1,
            eps_x: 0.1,
            eps1: 0.0,
            delta1: 0.0,
            n_runs: 8,
            horizon: 200,
            seed: 1,
            escape: None,
        };
        let r = local_stability_experiment(&spec, &exp).unwrap();
        assert_eq!(r.containment_fraction, 1.0);
        assert_eq!(r.final_neighborhood_fraction, 1.0);
    }

    #[test]
    fn cournot_scan_finds_the_incomplete_fixed_point() {
        let spec = fixtures::cournot_spec();
        let r = global_stability_scan(&spec, 20, 1e-10).unwrap();
        assert_eq!(r.violations.len(), 1, "{}", r.to_text());
        let v = &r.violations[0];
        assert!(v.belief.sup_distance(&Belief::uniform(2)) < 1e-12);
        assert!(v.strategy.max_abs_diff(&StrategyProfile(vec![0.5, 0.5])) < 1e-6);
        assert!(r.failures.is_empty() && r.unsolved.is_empty());
    }

    #[test]
    fn empty_eq_set_is_rejected() {
        let spec = fixtures::cournot_spec();
        let exp = StabilityExperiment {
            learner: LearnerConfig::new(Rule::SequentialBr),
            schedule: UpdateSchedule::EveryStage,
            theta_bar: Belief::point_mass(2, 0),
            eq_set: vec![],
            gamma: 0.9,
            eps_bar: 0.1,
            eps_x: 0.1,
            eps1: 0.0,
            delta1: 0.0,
            n_runs: 1,
            horizon: 10,
            seed: 1,
            escape: None,
        };
        assert!(matches!(local_stability_experiment(&spec, &exp), Err(Error::Config(_))));
    }
}
