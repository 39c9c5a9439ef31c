//! Run configurations (TOML), summaries (JSON), trajectory files and seed
//! sweeps.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::belief::{Belief, DEFAULT_KL_TOL};
use crate::dynamics::{Seed, Simulation, StageRecord, Trajectory, TrajectorySummary, UpdateSchedule};
use crate::error::{Error, Result};
use crate::fixtures;
use crate::game::{GameSpec, Observation, StrategyProfile};
use crate::learners::{LearnerConfig, Rule};

/// Either a builtin game by name or an inline specification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSource {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub builtin: Option<String>,
    /// Observation noise override for a builtin game.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub spec: Option<GameSpec>,
}

impl GameSource {
    pub fn builtin(name: &str) -> Self {
        GameSource {
            builtin: Some(name.to_string()),
            sigma: None,
            spec: None,
        }
    }

    pub fn inline(spec: GameSpec) -> Self {
        GameSource {
            builtin: None,
            sigma: None,
            spec: Some(spec),
        }
    }

    pub fn resolve(&self) -> Result<GameSpec> {
        match (&self.builtin, &self.spec) {
            (Some(name), None) => {
                let mut spec = fixtures::spec_by_name(name)
                    .map_err(|e| Error::Config(format!("game.builtin: {}", e.message())))?;
                if let Some(sigma) = self.sigma {
                    if !(sigma > 0.0 && sigma.is_finite()) {
                        return Err(Error::config("game.sigma: must be a positive number"));
                    }
                    spec.obs.sigma = sigma;
                }
                Ok(spec)
            }
            (None, Some(spec)) => {
                if self.sigma.is_some() {
                    return Err(Error::config("game.sigma: set obs.sigma inside game.spec instead"));
                }
                spec.validate().map_err(|e| Error::Config(format!("game.spec: {}", e.message())))?;
                Ok(spec.clone())
            }
            (Some(_), Some(_)) => Err(Error::config("game: give either builtin or spec, not both")),
            (None, None) => Err(Error::config("game: one of builtin or spec is required")),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputPaths {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trajectory: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub summary: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Tolerances {
    #[serde(default = "default_kl_tol")]
    pub kl_tol: f64,
    #[serde(default = "default_br_tol")]
    pub br_tol: f64,
    /// Stages averaged when testing for convergence.
    #[serde(default = "default_window")]
    pub convergence_window: usize,
    #[serde(default = "default_convergence_tol")]
    pub convergence_tol: f64,
}

fn default_kl_tol() -> f64 {
    DEFAULT_KL_TOL
}

fn default_br_tol() -> f64 {
    1e-8
}

fn default_window() -> usize {
    500
}

fn default_convergence_tol() -> f64 {
    1e-6
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            kl_tol: default_kl_tol(),
            br_tol: default_br_tol(),
            convergence_window: default_window(),
            convergence_tol: default_convergence_tol(),
        }
    }
}

fn default_record_every() -> usize {
    1
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub horizon: usize,
    pub init_theta: Vec<f64>,
    pub init_q: Vec<f64>,
    #[serde(default = "default_record_every")]
    pub record_every: usize,
    pub game: GameSource,
    pub learner: LearnerConfig,
    #[serde(default)]
    pub schedule: UpdateSchedule,
    #[serde(default)]
    pub output: OutputPaths,
    #[serde(default)]
    pub tolerances: Tolerances,
}

/// A validated configuration with its game resolved.
#[derive(Debug, Clone)]
pub struct ResolvedRun {
    pub spec: GameSpec,
    pub init_theta: Belief,
    pub init_q: StrategyProfile,
}

impl RunConfig {
    /// Checks every field and resolves the game. Messages name the field.
    pub fn validate(&self) -> Result<ResolvedRun> {
        let spec = self.game.resolve()?;
        self.learner
            .validate()
            .map_err(|e| Error::Config(format!("learner: {}", e.message())))?;
        self.schedule
            .validate()
            .map_err(|e| Error::Config(format!("schedule: {}", e.message())))?;
        let init_theta = Belief::from_probs(&self.init_theta)
            .and_then(|b| spec.check_belief(&b).map(|_| b))
            .map_err(|e| Error::Config(format!("init_theta: {}", e.message())))?;
        let init_q = StrategyProfile(self.init_q.clone());
        spec.check_profile(&init_q)
            .map_err(|e| Error::Config(format!("init_q: {}", e.message())))?;
        if self.horizon == 0 {
            return Err(Error::config("horizon: must be at least 1"));
        }
        if self.record_every == 0 {
            return Err(Error::config("record_every: must be at least 1"));
        }
        let t = &self.tolerances;
        if !(t.kl_tol > 0.0 && t.br_tol > 0.0 && t.convergence_tol > 0.0) {
            return Err(Error::config("tolerances: must be positive"));
        }
        if t.convergence_window == 0 {
            return Err(Error::config("tolerances.convergence_window: must be at least 1"));
        }
        Ok(ResolvedRun {
            spec,
            init_theta,
            init_q,
        })
    }

    /// Runs the configured simulation.
    pub fn run(&self) -> Result<(ResolvedRun, Trajectory)> {
        let resolved = self.validate()?;
        let traj = Simulation::new(&resolved.spec, &self.learner, self.schedule, self.horizon).run(
            resolved.init_theta.clone(),
            resolved.init_q.clone(),
            Seed::from(self.seed),
        )?;
        Ok((resolved, traj))
    }
}

fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    fs::write(path, contents).map_err(|source| Error::Io {
        path: path.display().to_string(),
        source,
    })
}

/// Parses a TOML document; errors carry the line, column and field.
pub fn parse_toml<T: DeserializeOwned>(text: &str, origin: &str) -> Result<T> {
    toml::from_str(text).map_err(|e| Error::Parse(format!("{origin}: {e}")))
}

/// Reads and validates a run configuration.
pub fn load_config(path: impl AsRef<Path>) -> Result<RunConfig> {
    let path = path.as_ref();
    let cfg: RunConfig = parse_toml(&read_to_string(path)?, &path.display().to_string())?;
    cfg.validate()
        .map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))?;
    Ok(cfg)
}

pub fn config_to_toml(cfg: &RunConfig) -> Result<String> {
    toml::to_string_pretty(cfg).map_err(|e| Error::Parse(format!("cannot serialize config: {e}")))
}

pub fn save_config(cfg: &RunConfig, path: impl AsRef<Path>) -> Result<()> {
    write_string(path.as_ref(), &config_to_toml(cfg)?)
}

/// Writes any report as pretty JSON.
pub fn save_summary<T: Serialize + ?Sized>(report: &T, path: impl AsRef<Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)
        .map_err(|e| Error::Parse(format!("cannot serialize summary: {e}")))?;
    write_string(path.as_ref(), &(text + "\n"))
}

pub fn load_summary<T: DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    serde_json::from_str(&read_to_string(path)?)
        .map_err(|e| Error::Parse(format!("{}: {e}", path.display())))
}

/// Configuration for a builtin game with the full game written inline, so
/// it can be compared against hand-written configs.
pub fn builtin_config(name: &str) -> Result<RunConfig> {
    let fx = fixtures::by_name(name)?;
    let spec = fx.spec;
    let rule = match name {
        fixtures::ZERO_SUM => Rule::InertialBr,
        _ => Rule::SequentialBr,
    };
    Ok(RunConfig {
        seed: 0,
        horizon: 5000,
        init_theta: Belief::uniform(spec.n_params()).probs(),
        init_q: spec.strategy_sets.iter().map(|iv| iv.midpoint()).collect(),
        record_every: 1,
        game: GameSource::inline(spec),
        learner: LearnerConfig::new(rule),
        schedule: UpdateSchedule::EveryStage,
        output: OutputPaths::default(),
        tolerances: Tolerances::default(),
    })
}

/// Text form of a trajectory: a comment header, a column header, then one
/// comma-separated row per recorded stage. Beliefs are stored as natural
/// logs so decayed parameters keep their exact weight. Every number is
/// written with 17 significant digits.
pub fn trajectory_to_string(spec: &GameSpec, traj: &Trajectory, record_every: usize) -> String {
    let every = record_every.max(1);
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# game={} seed={} stream={} horizon={}",
        spec.name,
        traj.seed.master,
        traj.seed.stream,
        traj.records.len()
    );
    let mut cols = vec!["k".to_string()];
    cols.extend(spec.params.ids.iter().map(|id| format!("log_theta[{id}]")));
    cols.extend((0..spec.n_players()).map(|i| format!("q[{i}]")));
    cols.extend((0..spec.obs_dim()).map(|j| format!("y[{j}]")));
    let _ = writeln!(out, "{}", cols.join(","));
    let last = traj.records.len().saturating_sub(1);
    for (idx, r) in traj.records.iter().enumerate() {
        if idx % every != 0 && idx != last {
            continue;
        }
        let _ = write!(out, "{}", r.k);
        for v in r.belief.log_probs().iter().chain(r.strategy.iter()).chain(r.observation.iter()) {
            let _ = write!(out, ",{v:.16e}");
        }
        out.push('\n');
    }
    out
}

pub fn write_trajectory(
    spec: &GameSpec,
    traj: &Trajectory,
    record_every: usize,
    path: impl AsRef<Path>,
) -> Result<()> {
    write_string(path.as_ref(), &trajectory_to_string(spec, traj, record_every))
}

/// Parses a trajectory file. The final state is taken from the last row.
pub fn parse_trajectory(text: &str, n_params: usize, n_players: usize) -> Result<Trajectory> {
    let mut seed = Seed::from(0);
    let mut records = Vec::new();
    let mut header_seen = false;
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() {
            continue;
        }
        if let Some(meta) = line.strip_prefix('#') {
            for kv in meta.split_whitespace() {
                match kv.split_once('=') {
                    Some(("seed", v)) => seed.master = v.parse().unwrap_or(0),
                    Some(("stream", v)) => seed.stream = v.parse().unwrap_or(0),
                    _ => {}
                }
            }
            continue;
        }
        if !header_seen {
            header_seen = true;
            continue;
        }
        let bad = |what: &str| Error::Parse(format!("trajectory line {}: {what}", lineno + 1));
        let mut fields = line.split(',');
        let k: u64 = fields
            .next()
            .and_then(|f| f.parse().ok())
            .ok_or_else(|| bad("bad stage index"))?;
        let values: Vec<f64> = fields
            .map(|f| f.parse::<f64>())
            .collect::<std::result::Result<_, _>>()
            .map_err(|_| bad("bad number"))?;
        if values.len() < n_params + n_players {
            return Err(bad("too few columns"));
        }
        let belief = Belief::from_log_weights(values[..n_params].to_vec())?;
        records.push(StageRecord {
            k,
            belief,
            strategy: StrategyProfile(values[n_params..n_params + n_players].to_vec()),
            observation: Observation(values[n_params + n_players..].to_vec()),
        });
    }
    let last = records
        .last()
        .ok_or_else(|| Error::Parse("trajectory has no rows".into()))?;
    Ok(Trajectory {
        final_belief: last.belief.clone(),
        final_strategy: last.strategy.clone(),
        update_stages: Vec::new(),
        seed,
        records,
    })
}

pub fn read_trajectory(path: impl AsRef<Path>, spec: &GameSpec) -> Result<Trajectory> {
    let path = path.as_ref();
    parse_trajectory(&read_to_string(path)?, spec.n_params(), spec.n_players())
        .map_err(|e| Error::Parse(format!("{}: {}", path.display(), e.message())))
}

/// A grid of runs sharing one base configuration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepManifest {
    /// Master seed; run `r` uses stream `r`.
    pub seed: u64,
    pub runs: usize,
    pub base: RunConfig,
    /// Rules to sweep; defaults to the base rule.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub rules: Vec<Rule>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub schedules: Vec<UpdateSchedule>,
    /// Draw `init_q` uniformly from the strategy space and `init_theta`
    /// uniformly from the open simplex for each run.
    #[serde(default)]
    pub random_init: bool,
    /// Directory for per-run trajectory files.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRun {
    pub run: usize,
    pub rule: Rule,
    pub schedule: UpdateSchedule,
    pub init_theta: Vec<f64>,
    pub init_q: Vec<f64>,
    pub summary: TrajectorySummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub game: String,
    pub runs: Vec<SweepRun>,
    pub converged: usize,
}

pub fn load_manifest(path: impl AsRef<Path>) -> Result<SweepManifest> {
    let path = path.as_ref();
    let m: SweepManifest = parse_toml(&read_to_string(path)?, &path.display().to_string())?;
    m.base
        .validate()
        .map_err(|e| Error::Config(format!("{}: base.{}", path.display(), e.message())))?;
    Ok(m)
}

fn random_start(spec: &GameSpec, rng: &mut ChaCha8Rng) -> (Vec<f64>, Vec<f64>) {
    // normalized exponentials are uniform on the simplex
    let w: Vec<f64> = (0..spec.n_params())
        .map(|_| -(1.0 - rng.random::<f64>()).ln())
        .collect();
    let total: f64 = w.iter().sum();
    let theta = w.iter().map(|x| x / total).collect();
    let q = spec
        .strategy_sets
        .iter()
        .map(|iv| rng.random_range(iv.lo..=iv.hi))
        .collect();
    (theta, q)
}

/// Runs every (rule, schedule, run) combination in parallel.
pub fn run_sweep(m: &SweepManifest) -> Result<SweepReport> {
    let resolved = m.base.validate()?;
    let spec = &resolved.spec;
    let rules = if m.rules.is_empty() { vec![m.base.learner.rule] } else { m.rules.clone() };
    let schedules = if m.schedules.is_empty() { vec![m.base.schedule] } else { m.schedules.clone() };
    let mut jobs = Vec::new();
    for &rule in &rules {
        for &schedule in &schedules {
            schedule.validate()?;
            for r in 0..m.runs {
                jobs.push((rule, schedule, r));
            }
        }
    }
    let tol = &m.base.tolerances;
    let runs: Vec<SweepRun> = jobs
        .par_iter()
        .enumerate()
        .map(|(job, &(rule, schedule, r))| {
            let (init_theta, init_q) = if m.random_init {
                let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
                rng.set_stream(u64::MAX - r as u64);
                random_start(spec, &mut rng)
            } else {
                (m.base.init_theta.clone(), m.base.init_q.clone())
            };
            let learner = LearnerConfig { rule, ..m.base.learner.clone() };
            let traj = Simulation::new(spec, &learner, schedule, m.base.horizon).run(
                Belief::from_probs(&init_theta)?,
                StrategyProfile(init_q.clone()),
                Seed::new(m.seed, r as u64),
            )?;
            if let Some(dir) = &m.output_dir {
                let file = dir.join(format!("run-{job:04}-{}-seed{}.csv", rule.name(), r));
                write_trajectory(spec, &traj, m.base.record_every, file)?;
            }
            Ok(SweepRun {
                run: r,
                rule,
                schedule,
                init_theta,
                init_q,
                summary: traj.summary(tol.convergence_window, tol.convergence_tol),
            })
        })
        .collect::<Result<_>>()?;
    Ok(SweepReport {
        game: spec.name.clone(),
        converged: runs.iter().filter(|r| r.summary.convergence.is_some()).count(),
        runs,
    })
}
