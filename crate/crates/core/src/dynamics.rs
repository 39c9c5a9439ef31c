//! The coupled loop: observations every stage, Bayesian belief updates on a
//! schedule, and a strategy update every stage using the latest belief.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, ObservationBatch};
use crate::error::{Error, Result};
use crate::game::{GameSpec, Observation, StrategyProfile};
use crate::learners::{check_pairing, Learner, LearnerConfig};

/// Stages at which the belief is refreshed with the observations gathered
/// since the previous refresh. The first stage is always `k_1 = 1`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum UpdateSchedule {
    EveryStage,
    EveryN { n: u64 },
    /// Gaps `k_{t+1} - k_t = ceil(growth^t)`, growing without bound.
    TwoTimescale { growth: f64 },
}

impl Default for UpdateSchedule {
    fn default() -> Self {
        UpdateSchedule::EveryStage
    }
}

impl UpdateSchedule {
    pub fn validate(&self) -> Result<()> {
        match *self {
            UpdateSchedule::EveryStage => Ok(()),
            UpdateSchedule::EveryN { n } if n >= 1 => Ok(()),
            UpdateSchedule::EveryN { .. } => Err(Error::config("schedule.n: must be at least 1")),
            UpdateSchedule::TwoTimescale { growth } if growth > 1.0 && growth.is_finite() => Ok(()),
            UpdateSchedule::TwoTimescale { .. } => {
                Err(Error::config("schedule.growth: must be a finite number > 1"))
            }
        }
    }

    /// `k_1, k_2, ...`
    pub fn stages(&self) -> ScheduleStages {
        ScheduleStages {
            schedule: *self,
            t: 0,
            current: 0,
        }
    }
}

/// Iterator over the belief-update stages of a schedule.
#[derive(Debug, Clone)]
pub struct ScheduleStages {
    schedule: UpdateSchedule,
    t: u32,
    current: u64,
}

impl Iterator for ScheduleStages {
    type Item = u64;

    fn next(&mut self) -> Option<u64> {
        if self.t == 0 {
            self.t = 1;
            self.current = 1;
            return Some(1);
        }
        let gap = match self.schedule {
            UpdateSchedule::EveryStage => 1,
            UpdateSchedule::EveryN { n } => n,
            UpdateSchedule::TwoTimescale { growth } => {
                let g = growth.powi(self.t as i32).ceil();
                if g >= (u64::MAX / 4) as f64 {
                    u64::MAX / 4
                } else {
                    g as u64
                }
            }
        };
        self.t = self.t.saturating_add(1);
        self.current = self.current.saturating_add(gap);
        Some(self.current)
    }
}

/// Master seed plus the stream index of one trajectory. Distinct streams of
/// one master seed are independent, so runs can execute in any order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seed {
    pub master: u64,
    pub stream: u64,
}

impl Seed {
    pub fn new(master: u64, stream: u64) -> Self {
        Seed { master, stream }
    }

    pub fn rng(&self) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.master);
        rng.set_stream(self.stream);
        rng
    }
}

impl From<u64> for Seed {
    fn from(master: u64) -> Self {
        Seed { master, stream: 0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StageRecord {
    pub k: u64,
    pub belief: Belief,
    pub strategy: StrategyProfile,
    pub observation: Observation,
}

#[derive(Debug, Clone)]
pub struct Trajectory {
    /// One record per stage `k = 1..=horizon` holding `(theta^k, q^k, y^k)`.
    pub records: Vec<StageRecord>,
    /// `(theta^{horizon+1}, q^{horizon+1})`.
    pub final_belief: Belief,
    pub final_strategy: StrategyProfile,
    /// Stages `k_t > 1` at which the belief changed.
    pub update_stages: Vec<u64>,
    pub seed: Seed,
}

impl Trajectory {
    pub fn horizon(&self) -> usize {
        self.records.len()
    }

    pub fn summary(&self, window: usize, tol: f64) -> TrajectorySummary {
        TrajectorySummary {
            horizon: self.horizon(),
            seed: self.seed,
            final_belief: self.final_belief.clone(),
            final_strategy: self.final_strategy.clone(),
            belief_updates: self.update_stages.len(),
            convergence: detect_convergence(self, window, tol),
            window,
            tol,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Convergence {
    pub belief: Belief,
    pub strategy: StrategyProfile,
    pub stage: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectorySummary {
    pub horizon: usize,
    pub seed: Seed,
    pub final_belief: Belief,
    pub final_strategy: StrategyProfile,
    pub belief_updates: usize,
    pub convergence: Option<Convergence>,
    pub window: usize,
    pub tol: f64,
}

/// A run that stopped on an error; `partial` holds every completed stage.
#[derive(Debug, thiserror::Error)]
#[error("simulation aborted after {} stages: {error}", partial.records.len())]
pub struct RunFailure {
    pub error: Error,
    pub partial: Trajectory,
}

impl From<RunFailure> for Error {
    fn from(f: RunFailure) -> Error {
        f.error
    }
}

#[derive(Debug, Clone)]
pub struct Simulation<'a> {
    pub spec: &'a GameSpec,
    pub learner: &'a LearnerConfig,
    pub schedule: UpdateSchedule,
    pub horizon: usize,
    /// Permit initial beliefs that exclude some parameter.
    pub allow_excluded_prior: bool,
}

impl<'a> Simulation<'a> {
    pub fn new(
        spec: &'a GameSpec,
        learner: &'a LearnerConfig,
        schedule: UpdateSchedule,
        horizon: usize,
    ) -> Self {
        Simulation {
            spec,
            learner,
            schedule,
            horizon,
            allow_excluded_prior: false,
        }
    }

    pub fn allow_excluded_prior(mut self, allow: bool) -> Self {
        self.allow_excluded_prior = allow;
        self
    }

    fn validate(&self, init_theta: &Belief, init_q: &StrategyProfile) -> Result<()> {
        self.learner.validate()?;
        self.schedule.validate()?;
        self.spec.check_belief(init_theta)?;
        self.spec.check_profile(init_q)?;
        if !self.allow_excluded_prior {
            if let Some(s) = (0..init_theta.len()).find(|&s| init_theta.prob(s) <= 0.0) {
                return Err(Error::domain(format!(
                    "init_theta excludes parameter {:?}",
                    self.spec.params.ids[s]
                )));
            }
        }
        Ok(())
    }

    pub fn run(
        &self,
        init_theta: Belief,
        init_q: StrategyProfile,
        seed: Seed,
    ) -> std::result::Result<Trajectory, RunFailure> {
        let mut traj = Trajectory {
            records: Vec::with_capacity(self.horizon),
            final_belief: init_theta.clone(),
            final_strategy: init_q.clone(),
            update_stages: Vec::new(),
            seed,
        };
        if let Err(error) = self.validate(&init_theta, &init_q) {
            return Err(RunFailure { error, partial: traj });
        }
        check_pairing(self.spec, self.learner.rule);

        let spec = self.spec;
        let mut rng = seed.rng();
        let mut learner = Learner::new(self.learner.clone(), &init_q);
        let mut stages = self.schedule.stages();
        stages.next();
        let mut next_update = stages.next().unwrap_or(u64::MAX);
        let mut pending = ObservationBatch::new();
        let mut theta = init_theta;
        let mut q = init_q;

        for k in 1..=self.horizon as u64 {
            let obs = spec.sample_unchecked(&q, &mut rng);
            pending.push(q.clone(), obs.clone());
            traj.records.push(StageRecord {
                k,
                belief: theta.clone(),
                strategy: q.clone(),
                observation: obs,
            });
            if k + 1 == next_update {
                match theta.bayes_update_unchecked(spec, pending.entries()) {
                    Ok(b) => theta = b,
                    Err(error) => return Err(RunFailure { error, partial: traj }),
                }
                pending.clear();
                traj.update_stages.push(k + 1);
                next_update = stages.next().unwrap_or(u64::MAX);
            }
            match learner.step(spec, &theta, &q, k) {
                Ok(next) => q = next,
                Err(error) => return Err(RunFailure { error, partial: traj }),
            }
        }
        traj.final_belief = theta;
        traj.final_strategy = q;
        Ok(traj)
    }
}

/// Runs the coupled dynamics for `horizon` stages.
pub fn run(
    spec: &GameSpec,
    learner: &LearnerConfig,
    schedule: UpdateSchedule,
    init_theta: Belief,
    init_q: StrategyProfile,
    horizon: usize,
    seed: impl Into<Seed>,
) -> std::result::Result<Trajectory, RunFailure> {
    Simulation::new(spec, learner, schedule, horizon).run(init_theta, init_q, seed.into())
}

/// Tail average over the last `window` stages when every belief and strategy
/// coordinate varies by at most `tol` there.
pub fn detect_convergence(traj: &Trajectory, window: usize, tol: f64) -> Option<Convergence> {
    let n = traj.records.len();
    if window == 0 || window >= n {
        return None;
    }
    let tail = &traj.records[n - window..];
    let m = tail[0].belief.len();
    let d = tail[0].strategy.len();
    let mut lo_t = vec![f64::INFINITY; m];
    let mut hi_t = vec![f64::NEG_INFINITY; m];
    let mut sum_t = vec![0.0; m];
    let mut lo_q = vec![f64::INFINITY; d];
    let mut hi_q = vec![f64::NEG_INFINITY; d];
    let mut sum_q = vec![0.0; d];
    for r in tail {
        for (s, p) in r.belief.weights() {
            lo_t[s] = lo_t[s].min(p);
            hi_t[s] = hi_t[s].max(p);
            sum_t[s] += p;
        }
        for (i, &x) in r.strategy.iter().enumerate() {
            lo_q[i] = lo_q[i].min(x);
            hi_q[i] = hi_q[i].max(x);
            sum_q[i] += x;
        }
    }
    let spread = lo_t
        .iter()
        .zip(&hi_t)
        .chain(lo_q.iter().zip(&hi_q))
        .map(|(a, b)| b - a)
        .fold(0.0, f64::max);
    if spread > tol {
        return None;
    }
    let w = window as f64;
    let total: f64 = sum_t.iter().sum();
    let belief = Belief::from_probs(&sum_t.iter().map(|p| p / total).collect::<Vec<_>>()).ok()?;
    Some(Convergence {
        belief,
        strategy: StrategyProfile(sum_q.into_iter().map(|x| x / w).collect()),
        stage: n - window,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use crate::learners::Rule;

    fn q(v: &[f64]) -> StrategyProfile {
        StrategyProfile(v.to_vec())
    }

    #[test]
    fn schedule_stages() {
        let every: Vec<u64> = UpdateSchedule::EveryStage.stages().take(4).collect();
        assert_eq!(every, vec![1, 2, 3, 4]);
        let by3: Vec<u64> = UpdateSchedule::EveryN { n: 3 }.stages().take(4).collect();
        assert_eq!(by3, vec![1, 4, 7, 10]);
        // gaps ceil(1.5^t): 2, 3, 4, 6, 8
        let two: Vec<u64> = UpdateSchedule::TwoTimescale { growth: 1.5 }.stages().take(6).collect();
        assert_eq!(two, vec![1, 3, 6, 10, 16, 24]);
        let gaps: Vec<u64> = UpdateSchedule::TwoTimescale { growth: 1.1 }
            .stages()
            .take(200)
            .collect::<Vec<_>>()
            .windows(2)
            .map(|w| w[1] - w[0])
            .collect();
        assert!(gaps.windows(2).all(|g| g[1] >= g[0]));
        assert!(*gaps.last().unwrap() > 1000);
        assert!(UpdateSchedule::TwoTimescale { growth: 1.0 }.validate().is_err());
        assert!(UpdateSchedule::EveryN { n: 0 }.validate().is_err());
    }

    #[test]
    fn belief_only_changes_at_schedule_stages() {
        let spec = fixtures::cournot_spec();
        let learner = LearnerConfig::new(Rule::SequentialBr);
        let schedule = UpdateSchedule::EveryN { n: 7 };
        let traj = run(&spec, &learner, schedule, Belief::uniform(2), q(&[1.0, 1.0]), 100, 3).unwrap();
        let updates: Vec<u64> = schedule.stages().skip(1).take_while(|&k| k <= 100).collect();
        assert_eq!(traj.update_stages, updates);
        for w in traj.records.windows(2) {
            if !updates.contains(&w[1].k) {
                assert_eq!(w[0].belief, w[1].belief, "belief moved at k = {}", w[1].k);
            }
        }
        assert_eq!(traj.records.len(), 100);
    }

    #[test]
    fn runs_are_reproducible() {
        let spec = fixtures::investment_spec();
        let learner = LearnerConfig::new(Rule::InertialBr);
        let go = |stream| {
            Simulation::new(&spec, &learner, UpdateSchedule::EveryStage, 300)
                .run(Belief::uniform(3), q(&[0.9, 0.1]), Seed::new(17, stream))
                .unwrap()
        };
        let (a, b, c) = (go(0), go(0), go(1));
        assert_eq!(a.records, b.records);
        assert_ne!(a.records, c.records);
    }

    #[test]
    fn investment_converges_to_complete_information() {
        let spec = fixtures::investment_spec();
        for rule in [Rule::SimultaneousBr, Rule::SequentialBr, Rule::InertialBr] {
            let learner = LearnerConfig::new(rule);
            let init = Belief::from_probs(&[0.5, 0.2, 0.3]).unwrap();
            let traj = run(&spec, &learner, UpdateSchedule::EveryStage, init, q(&[0.8, 0.05]), 5000, 9).unwrap();
            assert!(traj.final_belief.sup_distance(&Belief::point_mass(3, 1)) < 1e-3, "{rule}");
            assert!(traj.final_strategy.max_abs_diff(&q(&[1.0 / 3.0, 1.0 / 3.0])) < 1e-3, "{rule}");
            let conv = detect_convergence(&traj, 500, 1e-6).expect("converged");
            assert!(conv.strategy.max_abs_diff(&q(&[1.0 / 3.0, 1.0 / 3.0])) < 1e-6);
            assert!(conv.belief.sup_distance(&Belief::point_mass(3, 1)) < 1e-6);
        }
    }

    #[test]
    fn fixed_point_start_keeps_strategy() {
        // [theta] = {3, 5} is payoff-equivalent at (0, 2): the belief is a
        // martingale and the strategy never moves
        let spec = fixtures::zero_sum_spec();
        let learner = LearnerConfig::new(Rule::InertialBr);
        let theta = Belief::from_probs(&[0.0, 0.5, 0.5]).unwrap();
        let traj = Simulation::new(&spec, &learner, UpdateSchedule::EveryStage, 300)
            .allow_excluded_prior(true)
            .run(theta.clone(), q(&[0.0, 2.0]), Seed::from(5))
            .unwrap();
        for r in &traj.records {
            assert!(r.strategy.max_abs_diff(&q(&[0.0, 2.0])) < 1e-9);
            assert!(r.belief.sup_distance(&theta) < 1e-12);
        }
    }

    #[test]
    fn excluded_prior_rejected_by_default() {
        let spec = fixtures::cournot_spec();
        let learner = LearnerConfig::new(Rule::SequentialBr);
        let err = run(&spec, &learner, UpdateSchedule::EveryStage, Belief::point_mass(2, 0), q(&[1.0, 1.0]), 10, 0)
            .unwrap_err();
        assert!(matches!(err.error, Error::Domain(_)));
        assert!(err.partial.records.is_empty());
    }

    #[test]
    fn convergence_detection_on_synthetic_paths() {
        let make = |f: &dyn Fn(u64) -> f64| Trajectory {
            records: (1..=100)
                .map(|k| StageRecord {
                    k,
                    belief: Belief::uniform(2),
                    strategy: q(&[f(k), 0.5]),
                    observation: Observation(vec![0.0]),
                })
                .collect(),
            final_belief: Belief::uniform(2),
            final_strategy: q(&[0.5, 0.5]),
            update_stages: vec![],
            seed: Seed::from(0),
        };
        let flat = make(&|_| 0.25);
        let c = detect_convergence(&flat, 20, 1e-6).unwrap();
        assert_eq!(c.stage, 80);
        assert_eq!(c.strategy, q(&[0.25, 0.5]));
        let wobble = make(&|k| if k % 2 == 0 { 0.2 } else { 0.3 });
        assert!(detect_convergence(&wobble, 20, 1e-2).is_none());
        assert!(detect_convergence(&flat, 100, 1e-6).is_none());
    }
}
