//! Coupled Bayesian belief and strategy learning in continuous games with
//! an unknown payoff parameter.
//!
//! A platform keeps a belief over a finite parameter set and refreshes it
//! from noisy observations; players respond to the current belief with a
//! best-response or no-regret rule.

pub mod analysis;
pub mod belief;
pub mod dynamics;
pub mod error;
pub mod fixtures;
pub mod game;
pub mod io;
pub mod learners;
pub mod poly;

pub use belief::{belief_ratio, kl_divergence, payoff_equivalent_set, Belief, ObservationBatch};
pub use dynamics::{run, Seed, Simulation, Trajectory, TrajectorySummary, UpdateSchedule};
pub use error::{Error, Result};
pub use game::{
    GameSpec, Interval, MeanFn, Observation, ObservationModel, ParameterSet, PayoffModel,
    Statistic, StrategyProfile,
};
pub use learners::{
    best_response, solve_equilibrium, EquilibriumOptions, Learner, LearnerConfig, Rule,
    StepSchedule,
};
pub use io::{load_config, save_summary, GameSource, RunConfig};
