//! The three reference games with their exact constants and known fixed
//! points.

use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::game::{
    GameSpec, Interval, MeanFn, ObservationModel, ParameterSet, PayoffModel, Statistic,
    StrategyProfile,
};

pub const COURNOT: &str = "cournot-ex1";
pub const ZERO_SUM: &str = "zero-sum-ex2";
pub const INVESTMENT: &str = "investment-ex3";

pub const NAMES: [&str; 3] = [COURNOT, ZERO_SUM, INVESTMENT];

/// Noise level used when a configuration does not set one.
pub const DEFAULT_SIGMA: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KnownFixedPoint {
    pub belief: Belief,
    pub strategy: StrategyProfile,
    pub complete_info: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GlobalVerdict {
    /// The complete information fixed point is the only fixed point.
    GloballyStable,
    /// Several fixed points exist, so none is globally stable.
    NoneGloballyStable,
}

#[derive(Debug, Clone)]
pub struct ExampleFixture {
    pub spec: GameSpec,
    pub known_fixed_points: Vec<KnownFixedPoint>,
    pub global_verdict: GlobalVerdict,
    pub description: &'static str,
}

fn labels(ids: &[&str]) -> Vec<String> {
    ids.iter().map(|s| s.to_string()).collect()
}

/// Two firms, price `alpha - beta * (q0 + q1)`, `s1 = (2, 1)` (true) and
/// `s2 = (4, 3)`, quantities in `[0, 3]`.
pub fn cournot_spec() -> GameSpec {
    GameSpec::new(
        COURNOT,
        vec![Interval { lo: 0.0, hi: 3.0 }; 2],
        ParameterSet {
            ids: labels(&["s1", "s2"]),
            true_index: 0,
        },
        PayoffModel::BuiltinCournot {
            alpha: vec![2.0, 4.0],
            beta: vec![1.0, 3.0],
        },
        ObservationModel {
            statistic: Statistic::ScalarSufficientStatistic {
                mean: MeanFn::CournotPrice,
            },
            sigma: DEFAULT_SIGMA,
        },
    )
    .expect("builtin Cournot spec is valid")
}

/// Zero-sum game on `[0, 6]^2` with `S = {1, 3, 5}` and true `s = 3`.
pub fn zero_sum_spec() -> GameSpec {
    GameSpec::new(
        ZERO_SUM,
        vec![Interval { lo: 0.0, hi: 6.0 }; 2],
        ParameterSet {
            ids: labels(&["1", "3", "5"]),
            true_index: 1,
        },
        PayoffModel::BuiltinZeroSum {
            s: vec![1.0, 3.0, 5.0],
        },
        ObservationModel {
            statistic: Statistic::ScalarSufficientStatistic {
                mean: MeanFn::ZeroSumValue,
            },
            sigma: DEFAULT_SIGMA,
        },
    )
    .expect("builtin zero-sum spec is valid")
}

/// Investment game on `[0, 1]^2`, return `s + q0 + q1`, cost `3 q_i^2`,
/// `S = {0, 1, 2}` with true `s = 1`.
pub fn investment_spec() -> GameSpec {
    GameSpec::new(
        INVESTMENT,
        vec![Interval { lo: 0.0, hi: 1.0 }; 2],
        ParameterSet {
            ids: labels(&["0", "1", "2"]),
            true_index: 1,
        },
        PayoffModel::BuiltinInvestment {
            s: vec![0.0, 1.0, 2.0],
            cost: 3.0,
        },
        ObservationModel {
            statistic: Statistic::ScalarSufficientStatistic {
                mean: MeanFn::InvestmentReturn,
            },
            sigma: DEFAULT_SIGMA,
        },
    )
    .expect("builtin investment spec is valid")
}

fn fp(probs: &[f64], q: &[f64], complete_info: bool) -> KnownFixedPoint {
    KnownFixedPoint {
        belief: Belief::from_probs(probs).expect("fixture belief"),
        strategy: StrategyProfile(q.to_vec()),
        complete_info,
    }
}

pub fn build_cournot() -> ExampleFixture {
    ExampleFixture {
        spec: cournot_spec(),
        known_fixed_points: vec![
            fp(&[1.0, 0.0], &[2.0 / 3.0, 2.0 / 3.0], true),
            fp(&[0.5, 0.5], &[0.5, 0.5], false),
        ],
        global_verdict: GlobalVerdict::NoneGloballyStable,
        description: "Cournot duopoly with unknown linear price function",
    }
}

/// The fixed-point family `{theta : theta(1) = 0} x {(0, 2)}` is listed at
/// its two endpoints and its midpoint.
pub fn build_zero_sum() -> ExampleFixture {
    ExampleFixture {
        spec: zero_sum_spec(),
        known_fixed_points: vec![
            fp(&[0.0, 1.0, 0.0], &[0.0, 2.0], true),
            fp(&[0.0, 0.0, 1.0], &[0.0, 2.0], false),
            fp(&[0.0, 0.5, 0.5], &[0.0, 2.0], false),
        ],
        global_verdict: GlobalVerdict::NoneGloballyStable,
        description: "zero-sum game with unknown threshold penalty",
    }
}

pub fn build_investment() -> ExampleFixture {
    ExampleFixture {
        spec: investment_spec(),
        known_fixed_points: vec![fp(&[0.0, 1.0, 0.0], &[1.0 / 3.0, 1.0 / 3.0], true)],
        global_verdict: GlobalVerdict::GloballyStable,
        description: "supermodular investment game with unknown baseline return",
    }
}

pub fn by_name(name: &str) -> Result<ExampleFixture> {
    match name {
        COURNOT => Ok(build_cournot()),
        ZERO_SUM => Ok(build_zero_sum()),
        INVESTMENT => Ok(build_investment()),
        other => Err(Error::config(format!(
            "unknown builtin game {other:?} (expected one of {})",
            NAMES.join(", ")
        ))),
    }
}

pub fn spec_by_name(name: &str) -> Result<GameSpec> {
    by_name(name).map(|f| f.spec)
}

/// Closed-form Cournot equilibrium: `q_i = E[alpha] / (3 E[beta])`.
pub fn cournot_equilibrium(theta: &Belief) -> StrategyProfile {
    let (ea, eb) = theta.weights().fold((0.0, 0.0), |(a, b), (s, w)| {
        let (alpha, beta) = [(2.0, 1.0), (4.0, 3.0)][s];
        (a + w * alpha, b + w * beta)
    });
    let x = ea / (3.0 * eb);
    StrategyProfile(vec![x, x])
}

/// Exact potential of the Cournot game under `theta`:
/// `E[alpha] sum(q) - E[beta] (sum(q_i^2) + sum_{i<j} q_i q_j)`.
pub fn cournot_potential(theta: &Belief, q: &[f64]) -> f64 {
    let (ea, eb) = theta.weights().fold((0.0, 0.0), |(a, b), (s, w)| {
        let (alpha, beta) = [(2.0, 1.0), (4.0, 3.0)][s];
        (a + w * alpha, b + w * beta)
    });
    let total: f64 = q.iter().sum();
    let squares: f64 = q.iter().map(|x| x * x).sum();
    let mut cross = 0.0;
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            cross += q[i] * q[j];
        }
    }
    ea * total - eb * (squares + cross)
}

/// `(0, (2 + 2 theta(1)) / (2 theta(1) + 1))`.
pub fn zero_sum_equilibrium(theta: &Belief) -> StrategyProfile {
    let t1 = theta.prob(0);
    StrategyProfile(vec![0.0, (2.0 + 2.0 * t1) / (2.0 * t1 + 1.0)])
}

/// `(E[s] / 3, E[s] / 3)`.
pub fn investment_equilibrium(theta: &Belief) -> StrategyProfile {
    let es: f64 = theta.weights().map(|(s, w)| w * s as f64).sum();
    StrategyProfile(vec![es / 3.0, es / 3.0])
}
