use serde::{Deserialize, Serialize};

use super::Report;
use crate::belief::{kl_unchecked, DEFAULT_KL_TOL};
use crate::dynamics::Trajectory;
use crate::error::{Error, Result};
use crate::game::GameSpec;

pub const DEFAULT_TAIL_FRACTION: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RateEstimate {
    pub parameter: usize,
    pub label: String,
    /// Least-squares slope of `log theta^k(s)` against `k`.
    pub slope: f64,
    pub intercept: f64,
    pub n_points: usize,
    /// `-KL(s*, s)` at the final strategy.
    pub predicted: f64,
}

/// Exponential decay rate of `theta^k(s)` over the final `tail_fraction` of
/// the trajectory.
pub fn estimate_rate(
    spec: &GameSpec,
    traj: &Trajectory,
    s: usize,
    tail_fraction: f64,
) -> Result<RateEstimate> {
    if !(tail_fraction > 0.0 && tail_fraction <= 1.0) {
        return Err(Error::config("tail_fraction must lie in (0, 1]"));
    }
    if s >= spec.n_params() {
        return Err(Error::config(format!("parameter index {s} out of range")));
    }
    let q_bar = &traj.final_strategy;
    let kl = kl_unchecked(spec, spec.true_index(), s, q_bar);
    if kl <= DEFAULT_KL_TOL {
        return Err(Error::UndefinedRate(format!(
            "parameter {:?} is payoff-equivalent to the truth at the final strategy",
            spec.params.ids[s]
        )));
    }
    let n = traj.records.len();
    let start = n - ((n as f64 * tail_fraction).floor() as usize).min(n);
    let tail = &traj.records[start..];
    if tail.len() < 2 {
        return Err(Error::UndefinedRate("fewer than two stages in the tail".into()));
    }
    let mut xs = Vec::with_capacity(tail.len());
    let mut ys = Vec::with_capacity(tail.len());
    for r in tail {
        let y = r.belief.log_prob(s);
        if !y.is_finite() {
            return Err(Error::UndefinedRate(format!(
                "parameter {:?} has zero belief at stage {}",
                spec.params.ids[s], r.k
            )));
        }
        xs.push(r.k as f64);
        ys.push(y);
    }
    let (slope, intercept) = least_squares(&xs, &ys);
    Ok(RateEstimate {
        parameter: s,
        label: spec.params.ids[s].clone(),
        slope,
        intercept,
        n_points: xs.len(),
        predicted: -kl,
    })
}

fn least_squares(xs: &[f64], ys: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (x, y) in xs.iter().zip(ys) {
        sxy += (x - mx) * (y - my);
        sxx += (x - mx) * (x - mx);
    }
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

impl Report for RateEstimate {
    fn to_text(&self) -> String {
        format!(
            "parameter {}: slope {:.6} (predicted {:.6}, {} stages)\n",
            self.label, self.slope, self.predicted, self.n_points
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::belief::Belief;
    use crate::dynamics::{run, UpdateSchedule};
    use crate::fixtures;
    use crate::game::StrategyProfile;
    use crate::learners::{LearnerConfig, Rule};

    #[test]
    fn exact_line_is_recovered() {
        let xs: Vec<f64> = (0..50).map(|k| k as f64).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 3.0 - 0.25 * x).collect();
        let (a, b) = least_squares(&xs, &ys);
        assert!((a + 0.25).abs() < 1e-12 && (b - 3.0).abs() < 1e-10);
    }

    #[test]
    fn investment_rate_for_parameter_zero() {
        let spec = fixtures::investment_spec();
        let learner = LearnerConfig::new(Rule::SimultaneousBr);
        let traj = run(
            &spec,
            &learner,
            UpdateSchedule::EveryStage,
            Belief::uniform(3),
            StrategyProfile(vec![0.5, 0.5]),
            4000,
            11,
        )
        .unwrap();
        let est = estimate_rate(&spec, &traj, 0, DEFAULT_TAIL_FRACTION).unwrap();
        assert!((est.predicted + 0.5).abs() < 1e-9);
        assert!((est.slope + 0.5).abs() < 0.05, "{est:?}");
    }

    #[test]
    fn equivalent_parameter_has_no_rate() {
        let spec = fixtures::zero_sum_spec();
        let learner = LearnerConfig::new(Rule::InertialBr);
        let traj = run(
            &spec,
            &learner,
            UpdateSchedule::EveryStage,
            Belief::from_probs(&[0.01, 0.5, 0.49]).unwrap(),
            StrategyProfile(vec![0.0, 2.0]),
            200,
            1,
        )
        .unwrap();
        let err = estimate_rate(&spec, &traj, 2, 0.5).unwrap_err();
        assert!(matches!(err, Error::UndefinedRate(_)));
        assert_eq!(err.exit_code(), 2);
    }
}
