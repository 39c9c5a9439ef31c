//! Games with an unknown payoff parameter: strategy sets, parameterized
//! payoffs, and the Gaussian observation model used for belief updates.

use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use std::ops::Deref;

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::poly::Polynomial;

/// Finite set of candidate parameters with the index of the true one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParameterSet {
    pub ids: Vec<String>,
    pub true_index: usize,
}

impl ParameterSet {
    pub fn new(ids: Vec<String>, true_index: usize) -> Result<Self> {
        let set = ParameterSet { ids, true_index };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        if self.ids.is_empty() {
            return Err(Error::config("params.ids: parameter set is empty"));
        }
        for (i, a) in self.ids.iter().enumerate() {
            if self.ids[..i].contains(a) {
                return Err(Error::config(format!("params.ids: duplicate label {a:?}")));
            }
        }
        if self.true_index >= self.ids.len() {
            return Err(Error::config(format!(
                "params.true_index: {} out of range for {} parameters",
                self.true_index,
                self.ids.len()
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.ids.iter().position(|id| id == label)
    }

    /// Resolves either a label or a numeric index.
    pub fn resolve(&self, key: &str) -> Result<usize> {
        if let Some(i) = self.index_of(key) {
            return Ok(i);
        }
        match key.parse::<usize>() {
            Ok(i) if i < self.len() => Ok(i),
            _ => Err(Error::config(format!("unknown parameter {key:?}"))),
        }
    }
}

/// Closed interval `[lo, hi]` with `lo < hi`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Interval {
    pub lo: f64,
    pub hi: f64,
}

impl Interval {
    pub fn new(lo: f64, hi: f64) -> Result<Self> {
        let iv = Interval { lo, hi };
        iv.validate()?;
        Ok(iv)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.lo.is_finite() || !self.hi.is_finite() {
            return Err(Error::config("strategy set bounds must be finite"));
        }
        if self.lo >= self.hi {
            return Err(Error::config(format!(
                "strategy set requires lo < hi, got [{}, {}]",
                self.lo, self.hi
            )));
        }
        Ok(())
    }

    pub fn contains(&self, x: f64) -> bool {
        x >= self.lo && x <= self.hi
    }

    pub fn clamp(&self, x: f64) -> f64 {
        x.clamp(self.lo, self.hi)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn midpoint(&self) -> f64 {
        0.5 * (self.lo + self.hi)
    }
}

/// Average payoff functions `u_i^s(q)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum PayoffModel {
    /// `u_i = q_i (alpha_s - beta_s * sum(q))`.
    BuiltinCournot { alpha: Vec<f64>, beta: Vec<f64> },
    /// Player 0 receives `v_s(q)`, player 1 receives `-v_s(q)` with
    /// `v_s(q) = (max(|q0 - q1|, s) - s)^2 - 2 q0^2 + (q1 - 2)^2 / 2`.
    BuiltinZeroSum { s: Vec<f64> },
    /// `u_i = q_i (s + q0 + q1) - cost * q_i^2`.
    BuiltinInvestment { s: Vec<f64>, cost: f64 },
    /// `tables[player][param]` is the polynomial `u_i^s(q)`.
    GenericPolynomial {
        tables: Vec<Vec<Polynomial>>,
        /// Declared concavity of every `u_i^s` in its own strategy, one flag
        /// per parameter. `None` means "probe numerically".
        #[serde(default, skip_serializing_if = "Option::is_none")]
        concave_in_own: Option<Vec<bool>>,
    },
}

impl PayoffModel {
    pub fn kind_name(&self) -> &'static str {
        match self {
            PayoffModel::BuiltinCournot { .. } => "builtin_cournot",
            PayoffModel::BuiltinZeroSum { .. } => "builtin_zero_sum",
            PayoffModel::BuiltinInvestment { .. } => "builtin_investment",
            PayoffModel::GenericPolynomial { .. } => "generic_polynomial",
        }
    }

    fn is_builtin(&self) -> bool {
        !matches!(self, PayoffModel::GenericPolynomial { .. })
    }
}

/// Mean of a scalar sufficient statistic under parameter `s`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum MeanFn {
    /// Market price `alpha_s - beta_s * sum(q)` given total quantity.
    CournotPrice,
    /// The zero-sum value `v_s(q)` observed as player 0's payoff.
    ZeroSumValue,
    /// Unit return `s + q0 + q1` given total investment.
    InvestmentReturn,
    /// One polynomial per parameter.
    Polynomial { means: Vec<Polynomial> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum Statistic {
    /// The full payoff vector, independent noise per player.
    PerPlayerPayoffs,
    ScalarSufficientStatistic { mean: MeanFn },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObservationModel {
    pub statistic: Statistic,
    /// Standard deviation of the Gaussian noise, shared by all parameters.
    pub sigma: f64,
}

/// One scalar strategy per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct StrategyProfile(pub Vec<f64>);

impl StrategyProfile {
    pub fn new(q: Vec<f64>) -> Self {
        StrategyProfile(q)
    }

    /// Copy of the profile with player `i`'s strategy replaced.
    pub fn with(&self, i: usize, x: f64) -> Self {
        let mut q = self.0.clone();
        q[i] = x;
        StrategyProfile(q)
    }

    pub fn total(&self) -> f64 {
        self.0.iter().sum()
    }

    pub fn distance(&self, other: &StrategyProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt()
    }

    pub fn max_abs_diff(&self, other: &StrategyProfile) -> f64 {
        self.0
            .iter()
            .zip(&other.0)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

impl Deref for StrategyProfile {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for StrategyProfile {
    fn from(v: Vec<f64>) -> Self {
        StrategyProfile(v)
    }
}

/// Realized value of the observed statistic (one entry per component).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Observation(pub Vec<f64>);

impl Deref for Observation {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GameSpec {
    pub name: String,
    pub strategy_sets: Vec<Interval>,
    pub params: ParameterSet,
    pub payoff: PayoffModel,
    pub obs: ObservationModel,
}

impl GameSpec {
    pub fn new(
        name: impl Into<String>,
        strategy_sets: Vec<Interval>,
        params: ParameterSet,
        payoff: PayoffModel,
        obs: ObservationModel,
    ) -> Result<Self> {
        let spec = GameSpec {
            name: name.into(),
            strategy_sets,
            params,
            payoff,
            obs,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.n_players();
        if n < 2 {
            return Err(Error::config(format!("strategy_sets: need at least 2 players, got {n}")));
        }
        for (i, iv) in self.strategy_sets.iter().enumerate() {
            iv.validate()
                .map_err(|e| Error::config(format!("strategy_sets[{i}]: {e}")))?;
        }
        self.params.validate()?;
        let m = self.n_params();
        let per_param = |name: &str, len: usize| -> Result<()> {
            if len != m {
                return Err(Error::config(format!(
                    "payoff.{name}: expected {m} entries (one per parameter), got {len}"
                )));
            }
            Ok(())
        };
        if self.payoff.is_builtin() && n != 2 {
            return Err(Error::config(format!(
                "payoff: {} is a two-player game, got {n} strategy sets",
                self.payoff.kind_name()
            )));
        }
        match &self.payoff {
            PayoffModel::BuiltinCournot { alpha, beta } => {
                per_param("alpha", alpha.len())?;
                per_param("beta", beta.len())?;
                if beta.iter().any(|&b| b <= 0.0) {
                    return Err(Error::config("payoff.beta: slopes must be positive"));
                }
            }
            PayoffModel::BuiltinZeroSum { s } => {
                per_param("s", s.len())?;
                if s.iter().any(|&v| v < 0.0) {
                    return Err(Error::config("payoff.s: thresholds must be non-negative"));
                }
            }
            PayoffModel::BuiltinInvestment { s, cost } => {
                per_param("s", s.len())?;
                if !(*cost > 0.0) {
                    return Err(Error::config("payoff.cost: must be positive"));
                }
            }
            PayoffModel::GenericPolynomial {
                tables,
                concave_in_own,
            } => {
                if tables.len() != n {
                    return Err(Error::config(format!(
                        "payoff.tables: expected {n} players, got {}",
                        tables.len()
                    )));
                }
                for (i, row) in tables.iter().enumerate() {
                    if row.len() != m {
                        return Err(Error::config(format!(
                            "payoff.tables[{i}]: expected {m} parameters, got {}",
                            row.len()
                        )));
                    }
                    for (s, p) in row.iter().enumerate() {
                        p.validate(n)
                            .map_err(|e| Error::config(format!("payoff.tables[{i}][{s}]: {e}")))?;
                    }
                }
                if let Some(flags) = concave_in_own {
                    per_param("concave_in_own", flags.len())?;
                }
            }
        }
        if !(self.obs.sigma > 0.0) || !self.obs.sigma.is_finite() {
            return Err(Error::config(format!(
                "obs.sigma: must be positive and finite, got {}",
                self.obs.sigma
            )));
        }
        if let Statistic::ScalarSufficientStatistic { mean } = &self.obs.statistic {
            let ok = matches!(
                (mean, &self.payoff),
                (MeanFn::CournotPrice, PayoffModel::BuiltinCournot { .. })
                    | (MeanFn::ZeroSumValue, PayoffModel::BuiltinZeroSum { .. })
                    | (MeanFn::InvestmentReturn, PayoffModel::BuiltinInvestment { .. })
                    | (MeanFn::Polynomial { .. }, _)
            );
            if !ok {
                return Err(Error::config("obs.mean: builtin statistic does not match payoff kind"));
            }
            if let MeanFn::Polynomial { means } = mean {
                per_param("obs.mean.means", means.len())?;
                for (s, p) in means.iter().enumerate() {
                    p.validate(n)
                        .map_err(|e| Error::config(format!("obs.mean.means[{s}]: {e}")))?;
                }
            }
        }
        Ok(())
    }

    pub fn n_players(&self) -> usize {
        self.strategy_sets.len()
    }

    pub fn n_params(&self) -> usize {
        self.params.len()
    }

    pub fn true_index(&self) -> usize {
        self.params.true_index
    }

    pub fn sigma(&self) -> f64 {
        self.obs.sigma
    }

    /// Dimension of the observed statistic.
    pub fn obs_dim(&self) -> usize {
        match self.obs.statistic {
            Statistic::PerPlayerPayoffs => self.n_players(),
            Statistic::ScalarSufficientStatistic { .. } => 1,
        }
    }

    pub fn check_profile(&self, q: &StrategyProfile) -> Result<()> {
        if q.len() != self.n_players() {
            return Err(Error::config(format!(
                "strategy profile has {} entries, game has {} players",
                q.len(),
                self.n_players()
            )));
        }
        for (i, (&x, iv)) in q.iter().zip(&self.strategy_sets).enumerate() {
            if !x.is_finite() || !iv.contains(x) {
                return Err(Error::domain(format!(
                    "q[{i}] = {x} outside strategy set [{}, {}]",
                    iv.lo, iv.hi
                )));
            }
        }
        Ok(())
    }

    pub fn check_belief(&self, theta: &Belief) -> Result<()> {
        if theta.len() != self.n_params() {
            return Err(Error::config(format!(
                "belief has {} entries, game has {} parameters",
                theta.len(),
                self.n_params()
            )));
        }
        Ok(())
    }

    pub fn check_player(&self, i: usize) -> Result<()> {
        if i >= self.n_players() {
            return Err(Error::config(format!(
                "player {i} out of range for {} players",
                self.n_players()
            )));
        }
        Ok(())
    }

    /// `u_i^s(q)`, no validation.
    pub fn payoff(&self, s: usize, i: usize, q: &[f64]) -> f64 {
        match &self.payoff {
            PayoffModel::BuiltinCournot { alpha, beta } => {
                let total: f64 = q.iter().sum();
                q[i] * (alpha[s] - beta[s] * total)
            }
            PayoffModel::BuiltinZeroSum { s: thr } => {
                let v = zero_sum_value(thr[s], q[0], q[1]);
                if i == 0 {
                    v
                } else {
                    -v
                }
            }
            PayoffModel::BuiltinInvestment { s: base, cost } => {
                let total: f64 = q.iter().sum();
                q[i] * (base[s] + total) - cost * q[i] * q[i]
            }
            PayoffModel::GenericPolynomial { tables, .. } => tables[i][s].eval(q),
        }
    }

    /// `d u_i^s / d q_i` at `q`, no validation. For the zero-sum game this is
    /// the right derivative wherever the `max` switches branches.
    pub fn payoff_grad_own(&self, s: usize, i: usize, q: &[f64]) -> f64 {
        match &self.payoff {
            PayoffModel::BuiltinCournot { alpha, beta } => {
                let total: f64 = q.iter().sum();
                alpha[s] - beta[s] * total - beta[s] * q[i]
            }
            PayoffModel::BuiltinZeroSum { s: thr } => {
                let gp = threshold_penalty_grad(thr[s], q[0] - q[1]);
                if i == 0 {
                    gp - 4.0 * q[0]
                } else {
                    // d(-v)/dq1
                    gp - (q[1] - 2.0)
                }
            }
            PayoffModel::BuiltinInvestment { s: base, cost } => {
                let total: f64 = q.iter().sum();
                base[s] + total + q[i] - 2.0 * cost * q[i]
            }
            PayoffModel::GenericPolynomial { tables, .. } => tables[i][s].derivative(i).eval(q),
        }
    }

    /// `d^2 u_i^s / d q_i^2` at `q` (right-sided at zero-sum kinks).
    pub fn payoff_second_own(&self, s: usize, i: usize, q: &[f64]) -> f64 {
        match &self.payoff {
            PayoffModel::BuiltinCournot { beta, .. } => -2.0 * beta[s],
            PayoffModel::BuiltinZeroSum { s: thr } => {
                let x = q[0] - q[1];
                let g2 = if x.abs() > thr[s] { 2.0 } else { 0.0 };
                if i == 0 {
                    g2 - 4.0
                } else {
                    -g2 - 1.0
                }
            }
            PayoffModel::BuiltinInvestment { cost, .. } => 2.0 - 2.0 * cost,
            PayoffModel::GenericPolynomial { tables, .. } => {
                tables[i][s].derivative(i).derivative(i).eval(q)
            }
        }
    }

    /// True when every `u_i^s` is at most quadratic in `q_i`, which lets
    /// best responses use the closed form.
    pub fn own_quadratic(&self, i: usize) -> bool {
        match &self.payoff {
            PayoffModel::BuiltinCournot { .. } | PayoffModel::BuiltinInvestment { .. } => true,
            PayoffModel::BuiltinZeroSum { .. } => false,
            PayoffModel::GenericPolynomial { tables, .. } => {
                tables[i].iter().all(|p| p.degree_in(i) <= 2)
            }
        }
    }

    /// Declared concavity of `u_i^s` in `q_i` for every player. Builtins are
    /// all concave in own strategy.
    pub fn declared_concave(&self, s: usize) -> Option<bool> {
        match &self.payoff {
            PayoffModel::GenericPolynomial { concave_in_own, .. } => {
                concave_in_own.as_ref().map(|f| f[s])
            }
            _ => Some(true),
        }
    }

    pub fn expected_utility(&self, theta: &Belief, i: usize, q: &StrategyProfile) -> Result<f64> {
        self.check_belief(theta)?;
        self.check_player(i)?;
        self.check_profile(q)?;
        Ok(self.expected_utility_unchecked(theta, i, q))
    }

    pub(crate) fn expected_utility_unchecked(&self, theta: &Belief, i: usize, q: &[f64]) -> f64 {
        theta
            .weights()
            .filter(|&(_, w)| w > 0.0)
            .map(|(s, w)| w * self.payoff(s, i, q))
            .sum()
    }

    pub fn utility_gradient_own(&self, theta: &Belief, i: usize, q: &StrategyProfile) -> Result<f64> {
        self.check_belief(theta)?;
        self.check_player(i)?;
        self.check_profile(q)?;
        Ok(self.gradient_own_unchecked(theta, i, q))
    }

    pub(crate) fn gradient_own_unchecked(&self, theta: &Belief, i: usize, q: &[f64]) -> f64 {
        theta
            .weights()
            .filter(|&(_, w)| w > 0.0)
            .map(|(s, w)| w * self.payoff_grad_own(s, i, q))
            .sum()
    }

    /// Mean of the observed statistic under parameter `s` at `q`.
    pub fn statistic_mean(&self, s: usize, q: &[f64]) -> Vec<f64> {
        match &self.obs.statistic {
            Statistic::PerPlayerPayoffs => {
                (0..self.n_players()).map(|i| self.payoff(s, i, q)).collect()
            }
            Statistic::ScalarSufficientStatistic { mean } => {
                let m = match (mean, &self.payoff) {
                    (MeanFn::CournotPrice, PayoffModel::BuiltinCournot { alpha, beta }) => {
                        alpha[s] - beta[s] * q.iter().sum::<f64>()
                    }
                    (MeanFn::ZeroSumValue, PayoffModel::BuiltinZeroSum { s: thr }) => {
                        zero_sum_value(thr[s], q[0], q[1])
                    }
                    (MeanFn::InvestmentReturn, PayoffModel::BuiltinInvestment { s: base, .. }) => {
                        base[s] + q.iter().sum::<f64>()
                    }
                    (MeanFn::Polynomial { means }, _) => means[s].eval(q),
                    _ => unreachable!("statistic/payoff pairing checked in validate"),
                };
                vec![m]
            }
        }
    }

    /// Whether observations at `q` carry any information. The Cournot price
    /// cannot be recovered from per-firm revenue when nothing is produced.
    pub fn informative(&self, q: &[f64]) -> bool {
        !matches!(
            (&self.obs.statistic, &self.payoff),
            (
                Statistic::ScalarSufficientStatistic { mean: MeanFn::CournotPrice },
                PayoffModel::BuiltinCournot { .. }
            )
        ) || q.iter().sum::<f64>() != 0.0
    }

    /// Draws the statistic under the true parameter at `q`.
    pub fn sample_observation<R: Rng + ?Sized>(
        &self,
        q: &StrategyProfile,
        rng: &mut R,
    ) -> Result<Observation> {
        self.check_profile(q)?;
        Ok(self.sample_unchecked(q, rng))
    }

    pub(crate) fn sample_unchecked<R: Rng + ?Sized>(&self, q: &[f64], rng: &mut R) -> Observation {
        let sigma = self.obs.sigma;
        let mut y = self.statistic_mean(self.true_index(), q);
        for v in &mut y {
            let z: f64 = rng.sample(StandardNormal);
            *v += sigma * z;
        }
        Observation(y)
    }

    /// Gaussian log-density of `obs` under parameter `s` at `q`. Returns 0
    /// for every parameter when `q` is uninformative.
    pub fn log_likelihood(&self, s: usize, obs: &Observation, q: &StrategyProfile) -> Result<f64> {
        self.check_profile(q)?;
        if s >= self.n_params() {
            return Err(Error::config(format!("parameter index {s} out of range")));
        }
        if obs.len() != self.obs_dim() {
            return Err(Error::config(format!(
                "observation has {} components, expected {}",
                obs.len(),
                self.obs_dim()
            )));
        }
        Ok(self.log_likelihood_unchecked(s, obs, q))
    }

    pub(crate) fn log_likelihood_unchecked(&self, s: usize, obs: &[f64], q: &[f64]) -> f64 {
        if !self.informative(q) {
            return 0.0;
        }
        let sigma = self.obs.sigma;
        let mean = self.statistic_mean(s, q);
        let sq: f64 = obs.iter().zip(&mean).map(|(y, m)| (y - m) * (y - m)).sum();
        let norm = 0.5 * (obs.len() as f64) * (2.0 * std::f64::consts::PI * sigma * sigma).ln();
        -sq / (2.0 * sigma * sigma) - norm
    }
}

/// `(max(|x|, s) - s)^2`.
fn threshold_penalty(s: f64, x: f64) -> f64 {
    let e = x.abs().max(s) - s;
    e * e
}

/// Derivative of [`threshold_penalty`] in `x`. Continuous everywhere when
/// `s > 0`; at `x = 0` with `s = 0` it returns the right derivative.
fn threshold_penalty_grad(s: f64, x: f64) -> f64 {
    let a = x.abs();
    if a > s {
        2.0 * (a - s) * x.signum()
    } else {
        0.0
    }
}

pub(crate) fn zero_sum_value(s: f64, q0: f64, q1: f64) -> f64 {
    threshold_penalty(s, q0 - q1) - 2.0 * q0 * q0 + 0.5 * (q1 - 2.0) * (q1 - 2.0)
}
