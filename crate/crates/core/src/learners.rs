//! Strategy update rules driven by the current belief, the one-dimensional
//! best-response solver, and an equilibrium finder for static beliefs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::game::{GameSpec, PayoffModel, StrategyProfile};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Rule {
    SimultaneousBr,
    SequentialBr,
    InertialBr,
    NoRegret,
}

impl Rule {
    pub const ALL: [Rule; 4] = [
        Rule::SimultaneousBr,
        Rule::SequentialBr,
        Rule::InertialBr,
        Rule::NoRegret,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Rule::SimultaneousBr => "simultaneous_br",
            Rule::SequentialBr => "sequential_br",
            Rule::InertialBr => "inertial_br",
            Rule::NoRegret => "no_regret",
        }
    }

    pub fn parse(s: &str) -> Result<Rule> {
        Rule::ALL
            .into_iter()
            .find(|r| r.name() == s || r.name().replace('_', "-") == s)
            .ok_or_else(|| Error::config(format!("unknown rule {s:?}")))
    }
}

impl std::fmt::Display for Rule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Step size `alpha^k` for inertial best response and no-regret learning.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum StepSchedule {
    Constant { c: f64 },
    /// `c / k`
    Harmonic { c: f64 },
    /// `c / sqrt(k)`
    InvSqrt { c: f64 },
}

impl Default for StepSchedule {
    fn default() -> Self {
        StepSchedule::Constant { c: 0.1 }
    }
}

impl StepSchedule {
    pub fn alpha(&self, k: u64) -> f64 {
        let k = k.max(1) as f64;
        match *self {
            StepSchedule::Constant { c } => c,
            StepSchedule::Harmonic { c } => c / k,
            StepSchedule::InvSqrt { c } => c / k.sqrt(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let c = match *self {
            StepSchedule::Constant { c } | StepSchedule::Harmonic { c } | StepSchedule::InvSqrt { c } => c,
        };
        if !(0.0..=1.0).contains(&c) {
            return Err(Error::config(format!("learner.step.c: must lie in [0, 1], got {c}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regularizer {
    /// `h(q) = q^2 / 2`; the mirror step becomes a projection.
    #[default]
    Euclidean,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LearnerConfig {
    pub rule: Rule,
    #[serde(default)]
    pub step: StepSchedule,
    #[serde(default)]
    pub regularizer: Regularizer,
    #[serde(default = "default_inner_tol")]
    pub inner_tol: f64,
    #[serde(default = "default_inner_max_iter")]
    pub inner_max_iter: usize,
}

fn default_inner_tol() -> f64 {
    SolverOptions::default().tol
}

fn default_inner_max_iter() -> usize {
    SolverOptions::default().max_iter
}

impl LearnerConfig {
    pub fn new(rule: Rule) -> Self {
        LearnerConfig {
            rule,
            step: StepSchedule::default(),
            regularizer: Regularizer::Euclidean,
            inner_tol: default_inner_tol(),
            inner_max_iter: default_inner_max_iter(),
        }
    }

    pub fn with_step(mut self, step: StepSchedule) -> Self {
        self.step = step;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.step.validate()?;
        if !(self.inner_tol > 0.0) {
            return Err(Error::config("learner.inner_tol: must be positive"));
        }
        if self.inner_max_iter == 0 {
            return Err(Error::config("learner.inner_max_iter: must be at least 1"));
        }
        Ok(())
    }

    pub fn solver(&self) -> SolverOptions {
        SolverOptions {
            tol: self.inner_tol,
            max_iter: self.inner_max_iter,
        }
    }
}

/// Mirror-ascent scores, one per player.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreState {
    pub x: Vec<f64>,
}

impl ScoreState {
    /// Scores start at the initial strategy.
    pub fn from_profile(q: &StrategyProfile) -> Self {
        ScoreState { x: q.0.clone() }
    }
}

/// Rules under which the static-belief strategy update is known to converge
/// for each builtin game. Generic games accept every rule.
pub fn supported_rules(spec: &GameSpec) -> &'static [Rule] {
    match spec.payoff {
        PayoffModel::BuiltinCournot { .. } => &Rule::ALL,
        PayoffModel::BuiltinZeroSum { .. } => &[Rule::InertialBr, Rule::NoRegret],
        PayoffModel::BuiltinInvestment { .. } => {
            &[Rule::SimultaneousBr, Rule::SequentialBr, Rule::InertialBr]
        }
        PayoffModel::GenericPolynomial { .. } => &Rule::ALL,
    }
}

/// Logs a warning when `rule` is not a known-convergent pairing for `spec`.
pub fn check_pairing(spec: &GameSpec, rule: Rule) -> bool {
    let ok = supported_rules(spec).contains(&rule);
    if !ok {
        log::warn!(
            "{rule} is not a known-convergent update rule for {}; static-belief convergence may fail",
            spec.name
        );
    }
    ok
}

const BRACKETS: usize = 256;

/// Maximizer of player `i`'s expected utility over its interval with the
/// opponents fixed at `q`. Ties go to the smallest maximizer.
pub fn best_response(
    spec: &GameSpec,
    theta: &Belief,
    i: usize,
    q: &StrategyProfile,
    opts: &SolverOptions,
) -> Result<f64> {
    spec.check_belief(theta)?;
    spec.check_player(i)?;
    spec.check_profile(q)?;
    best_response_unchecked(spec, theta, i, q, opts)
}

pub(crate) fn best_response_unchecked(
    spec: &GameSpec,
    theta: &Belief,
    i: usize,
    q: &[f64],
    opts: &SolverOptions,
) -> Result<f64> {
    let iv = spec.strategy_sets[i];
    let mut work = q.to_vec();
    let mut grad = |x: f64| {
        work[i] = x;
        spec.gradient_own_unchecked(theta, i, &work)
    };

    if spec.own_quadratic(i) {
        // derivative is affine in the own strategy
        let (g_lo, g_hi) = (grad(iv.lo), grad(iv.hi));
        let slope = (g_hi - g_lo) / iv.width();
        if !g_lo.is_finite() || !g_hi.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient for player {i}")));
        }
        if slope < 0.0 {
            return Ok(iv.clamp(iv.lo - g_lo / slope));
        }
        return Ok(pick_max(spec, theta, i, q, &[iv.lo, iv.hi]));
    }

    let h = iv.width() / BRACKETS as f64;
    let xs: Vec<f64> = (0..=BRACKETS)
        .map(|k| if k == BRACKETS { iv.hi } else { iv.lo + h * k as f64 })
        .collect();
    let gs: Vec<f64> = xs.iter().map(|&x| grad(x)).collect();
    if let Some(k) = gs.iter().position(|g| !g.is_finite()) {
        return Err(Error::Numeric(format!(
            "non-finite gradient for player {i} at {}",
            xs[k]
        )));
    }
    let mut candidates = vec![iv.lo];
    for k in 0..BRACKETS {
        if gs[k] == 0.0 && k > 0 {
            candidates.push(xs[k]);
        }
        if gs[k] > 0.0 && gs[k + 1] < 0.0 {
            let (mut a, mut b) = (xs[k], xs[k + 1]);
            let mut iterations = 0;
            while b - a > opts.tol {
                iterations += 1;
                if iterations > opts.max_iter {
                    return Err(Error::SolverFailure {
                        message: format!("bisection for player {i} did not reach tolerance {}", opts.tol),
                        iterations,
                        lo: a,
                        hi: b,
                    });
                }
                let m = 0.5 * (a + b);
                let g = grad(m);
                if g > 0.0 {
                    a = m;
                } else if g < 0.0 {
                    b = m;
                } else {
                    a = m;
                    b = m;
                }
            }
            candidates.push(0.5 * (a + b));
        }
    }
    candidates.push(iv.hi);
    Ok(pick_max(spec, theta, i, q, &candidates))
}

/// Best candidate by expected utility; scanning in ascending order keeps the
/// smallest of (numerically) tied maximizers.
fn pick_max(spec: &GameSpec, theta: &Belief, i: usize, q: &[f64], candidates: &[f64]) -> f64 {
    let mut work = q.to_vec();
    let mut best = (f64::NAN, f64::NEG_INFINITY);
    for &x in candidates {
        work[i] = x;
        let v = spec.expected_utility_unchecked(theta, i, &work);
        if v > best.1 + 1e-13 * (1.0 + best.1.abs()) || best.0.is_nan() {
            best = (x, v);
        }
    }
    best.0
}

/// Every player best-responds to `q` at once.
pub fn step_simultaneous_br(
    spec: &GameSpec,
    theta: &Belief,
    q: &StrategyProfile,
    opts: &SolverOptions,
) -> Result<StrategyProfile> {
    spec.check_belief(theta)?;
    spec.check_profile(q)?;
    (0..spec.n_players())
        .map(|i| best_response_unchecked(spec, theta, i, q, opts))
        .collect::<Result<Vec<_>>>()
        .map(StrategyProfile)
}

/// Index of the player that moves at stage `k >= 1` under sequential best
/// response: stage 1 moves player 0, stage 2 player 1, and so on.
pub fn sequential_mover(n_players: usize, k: u64) -> usize {
    ((k.max(1) - 1) % n_players as u64) as usize
}

pub fn step_sequential_br(
    spec: &GameSpec,
    theta: &Belief,
    q: &StrategyProfile,
    k: u64,
    opts: &SolverOptions,
) -> Result<StrategyProfile> {
    spec.check_belief(theta)?;
    spec.check_profile(q)?;
    let i = sequential_mover(spec.n_players(), k);
    let x = best_response_unchecked(spec, theta, i, q, opts)?;
    Ok(q.with(i, x))
}

pub fn step_inertial_br(
    spec: &GameSpec,
    theta: &Belief,
    q: &StrategyProfile,
    alpha: f64,
    opts: &SolverOptions,
) -> Result<StrategyProfile> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(Error::config(format!("step size {alpha} outside [0, 1]")));
    }
    let br = step_simultaneous_br(spec, theta, q, opts)?;
    if alpha == 1.0 {
        return Ok(br);
    }
    Ok(StrategyProfile(
        q.iter()
            .zip(br.iter())
            .zip(&spec.strategy_sets)
            .map(|((&cur, &b), iv)| iv.clamp((1.0 - alpha) * cur + alpha * b))
            .collect(),
    ))
}

/// Score update followed by the Euclidean mirror step, i.e. clamping the
/// scores to the strategy intervals.
pub fn step_no_regret(
    spec: &GameSpec,
    theta: &Belief,
    q: &StrategyProfile,
    scores: &ScoreState,
    alpha: f64,
) -> Result<(StrategyProfile, ScoreState)> {
    spec.check_belief(theta)?;
    spec.check_profile(q)?;
    if scores.x.len() != spec.n_players() || scores.x.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("scores must be finite, one per player".into()));
    }
    let mut x = scores.x.clone();
    for (i, xi) in x.iter_mut().enumerate() {
        let g = spec.gradient_own_unchecked(theta, i, q);
        if !g.is_finite() {
            return Err(Error::Numeric(format!("non-finite gradient for player {i}")));
        }
        *xi += alpha * g;
    }
    let next = x
        .iter()
        .zip(&spec.strategy_sets)
        .map(|(&xi, iv)| iv.clamp(xi))
        .collect();
    Ok((StrategyProfile(next), ScoreState { x }))
}

/// A configured rule together with the state it carries between stages.
#[derive(Debug, Clone)]
pub struct Learner {
    config: LearnerConfig,
    scores: Option<ScoreState>,
}

impl Learner {
    pub fn new(config: LearnerConfig, init_q: &StrategyProfile) -> Self {
        let scores = (config.rule == Rule::NoRegret).then(|| ScoreState::from_profile(init_q));
        Learner { config, scores }
    }

    pub fn config(&self) -> &LearnerConfig {
        &self.config
    }

    pub fn scores(&self) -> Option<&ScoreState> {
        self.scores.as_ref()
    }

    /// `q^{k+1}` from `theta^{k+1}` and `q^k`.
    pub fn step(
        &mut self,
        spec: &GameSpec,
        theta: &Belief,
        q: &StrategyProfile,
        k: u64,
    ) -> Result<StrategyProfile> {
        let opts = self.config.solver();
        let alpha = self.config.step.alpha(k);
        match self.config.rule {
            Rule::SimultaneousBr => step_simultaneous_br(spec, theta, q, &opts),
            Rule::SequentialBr => step_sequential_br(spec, theta, q, k, &opts),
            Rule::InertialBr => step_inertial_br(spec, theta, q, alpha, &opts),
            Rule::NoRegret => {
                let scores = self
                    .scores
                    .get_or_insert_with(|| ScoreState::from_profile(q));
                let (next, new_scores) = step_no_regret(spec, theta, q, scores, alpha)?;
                *scores = new_scores;
                Ok(next)
            }
        }
    }
}

/// Largest `|BR_i(q) - q_i|` over players.
pub fn strategy_residual(
    spec: &GameSpec,
    theta: &Belief,
    q: &StrategyProfile,
    opts: &SolverOptions,
) -> Result<f64> {
    let mut worst: f64 = 0.0;
    for i in 0..spec.n_players() {
        let b = best_response_unchecked(spec, theta, i, q, opts)?;
        worst = worst.max((b - q[i]).abs());
    }
    Ok(worst)
}

/// Per-player utility gap `E[u_i(BR_i, q_-i)] - E[u_i(q)]`, floored at 0.
pub fn utility_residuals(
    spec: &GameSpec,
    theta: &Belief,
    q: &StrategyProfile,
    opts: &SolverOptions,
) -> Result<Vec<f64>> {
    spec.check_belief(theta)?;
    spec.check_profile(q)?;
    (0..spec.n_players())
        .map(|i| {
            let b = best_response_unchecked(spec, theta, i, q, opts)?;
            let at_br = spec.expected_utility_unchecked(theta, i, &q.with(i, b));
            let at_q = spec.expected_utility_unchecked(theta, i, q);
            Ok((at_br - at_q).max(0.0))
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct EquilibriumOptions {
    /// Convergence threshold on `max_i |BR_i(q) - q_i|`.
    pub tol: f64,
    pub max_rounds: usize,
    /// Number of initial profiles: midpoint, then corners, then uniform draws.
    pub starts: usize,
    pub seed: u64,
    pub solver: SolverOptions,
}

impl Default for EquilibriumOptions {
    fn default() -> Self {
        EquilibriumOptions {
            tol: 1e-9,
            max_rounds: 10_000,
            starts: 8,
            seed: 0,
            solver: SolverOptions::default(),
        }
    }
}

fn initial_profiles(spec: &GameSpec, starts: usize, seed: u64) -> Vec<StrategyProfile> {
    let sets = &spec.strategy_sets;
    let n = sets.len();
    let mut out = vec![StrategyProfile(sets.iter().map(|iv| iv.midpoint()).collect())];
    if n <= 8 {
        for mask in 0..(1usize << n) {
            if out.len() >= starts {
                break;
            }
            out.push(StrategyProfile(
                sets.iter()
                    .enumerate()
                    .map(|(i, iv)| if mask >> i & 1 == 1 { iv.hi } else { iv.lo })
                    .collect(),
            ));
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    while out.len() < starts {
        out.push(StrategyProfile(
            sets.iter().map(|iv| rng.random_range(iv.lo..=iv.hi)).collect(),
        ));
    }
    out.truncate(starts.max(1));
    out
}

/// Equilibria of the game with utilities averaged under `theta`, found by
/// sequential best-response rounds from several starts. An empty result
/// means no start converged.
pub fn solve_equilibrium(
    spec: &GameSpec,
    theta: &Belief,
    opts: &EquilibriumOptions,
) -> Result<Vec<StrategyProfile>> {
    spec.check_belief(theta)?;
    if opts.max_rounds == 0 {
        return Err(Error::config("max_rounds must be at least 1"));
    }
    if !(opts.tol > 0.0) {
        return Err(Error::config("equilibrium tolerance must be positive"));
    }
    let n = spec.n_players();
    let mut found: Vec<StrategyProfile> = Vec::new();
    for start in initial_profiles(spec, opts.starts, opts.seed) {
        let mut q = start;
        let mut converged = false;
        for _ in 0..opts.max_rounds {
            for i in 0..n {
                let b = best_response_unchecked(spec, theta, i, &q, &opts.solver)?;
                q.0[i] = b;
            }
            if strategy_residual(spec, theta, &q, &opts.solver)? < opts.tol {
                converged = true;
                break;
            }
        }
        if converged && found.iter().all(|f| f.distance(&q) >= 10.0 * opts.tol) {
            found.push(q);
        }
    }
    if found.is_empty() {
        log::warn!(
            "no equilibrium found for {} within {} rounds from {} starts",
            spec.name,
            opts.max_rounds,
            opts.starts
        );
    }
    Ok(found)
}

/// Iterates `rule` with the belief frozen at `theta` until the strategy
/// residual drops below `tol`. Returns the number of steps taken, or `None`
/// when `max_steps` is exhausted.
pub fn static_convergence(
    spec: &GameSpec,
    theta: &Belief,
    config: &LearnerConfig,
    start: &StrategyProfile,
    max_steps: u64,
    tol: f64,
) -> Result<Option<u64>> {
    let opts = config.solver();
    let mut learner = Learner::new(config.clone(), start);
    let mut q = start.clone();
    for k in 1..=max_steps {
        q = learner.step(spec, theta, &q, k)?;
        if strategy_residual(spec, theta, &q, &opts)? < tol {
            return Ok(Some(k));
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;
    use proptest::prelude::*;
    use rand::Rng;

    fn q(v: &[f64]) -> StrategyProfile {
        StrategyProfile(v.to_vec())
    }

    fn opts() -> SolverOptions {
        SolverOptions::default()
    }

    #[test]
    fn best_response_examples() {
        let cournot = fixtures::cournot_spec();
        let b = best_response(&cournot, &Belief::point_mass(2, 0), 0, &q(&[0.0, 2.0 / 3.0]), &opts()).unwrap();
        assert!((b - 2.0 / 3.0).abs() < 1e-12);
        let b = best_response(&cournot, &Belief::uniform(2), 0, &q(&[0.0, 0.5]), &opts()).unwrap();
        assert!((b - 0.5).abs() < 1e-12);
        let inv = fixtures::investment_spec();
        let b = best_response(&inv, &Belief::point_mass(3, 1), 0, &q(&[0.0, 1.0 / 3.0]), &opts()).unwrap();
        assert!((b - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn zero_sum_best_responses_use_root_isolation() {
        let zs = fixtures::zero_sum_spec();
        let theta = Belief::from_probs(&[0.5, 0.5, 0.0]).unwrap();
        let b0 = best_response(&zs, &theta, 0, &q(&[3.0, 1.5]), &opts()).unwrap();
        assert_eq!(b0, 0.0);
        let b1 = best_response(&zs, &theta, 1, &q(&[0.0, 5.0]), &opts()).unwrap();
        assert!((b1 - 1.5).abs() < 1e-9);
    }

    #[test]
    fn linear_payoff_ties_pick_smallest() {
        use crate::game::{Interval, ObservationModel, ParameterSet, Statistic};
        use crate::poly::{Polynomial, Term};
        // u_0 = q_1 does not depend on q_0: every point maximizes
        let tables = vec![
            vec![Polynomial::new(vec![Term { coef: 1.0, pow: vec![0, 1] }])],
            vec![Polynomial::zero()],
        ];
        let spec = GameSpec::new(
            "flat",
            vec![Interval::new(-1.0, 2.0).unwrap(); 2],
            ParameterSet::new(vec!["a".into()], 0).unwrap(),
            PayoffModel::GenericPolynomial { tables, concave_in_own: None },
            ObservationModel { statistic: Statistic::PerPlayerPayoffs, sigma: 1.0 },
        )
        .unwrap();
        let b = best_response(&spec, &Belief::uniform(1), 0, &q(&[0.5, 0.5]), &opts()).unwrap();
        assert_eq!(b, -1.0);
    }

    #[test]
    fn quartic_best_response_picks_global_max() {
        use crate::game::{Interval, ObservationModel, ParameterSet, Statistic};
        use crate::poly::{Polynomial, Term};
        // u_0 = -(x^2 - 1)^2 + 0.1 x has local maxima near -1 and +1; +1 wins
        let u0 = Polynomial::new(vec![
            Term { coef: -1.0, pow: vec![4, 0] },
            Term { coef: 2.0, pow: vec![2, 0] },
            Term { coef: -1.0, pow: vec![0, 0] },
            Term { coef: 0.1, pow: vec![1, 0] },
        ]);
        let spec = GameSpec::new(
            "double-well",
            vec![Interval::new(-2.0, 2.0).unwrap(); 2],
            ParameterSet::new(vec!["a".into()], 0).unwrap(),
            PayoffModel::GenericPolynomial {
                tables: vec![vec![u0.clone()], vec![Polynomial::zero()]],
                concave_in_own: Some(vec![false]),
            },
            ObservationModel { statistic: Statistic::PerPlayerPayoffs, sigma: 1.0 },
        )
        .unwrap();
        let b = best_response(&spec, &Belief::uniform(1), 0, &q(&[0.0, 0.0]), &opts()).unwrap();
        let root = u0.derivative(0).eval(&[b, 0.0]);
        assert!(b > 0.9 && b < 1.1, "{b}");
        assert!(root.abs() < 1e-8);
    }

    #[test]
    fn simultaneous_examples() {
        let inv = fixtures::investment_spec();
        let next = step_simultaneous_br(&inv, &Belief::point_mass(3, 1), &q(&[0.0, 0.0]), &opts()).unwrap();
        assert!(next.max_abs_diff(&q(&[0.25, 0.25])) < 1e-12);
        let eq = q(&[1.0 / 3.0, 1.0 / 3.0]);
        let same = step_simultaneous_br(&inv, &Belief::point_mass(3, 1), &eq, &opts()).unwrap();
        assert!(same.max_abs_diff(&eq) < 1e-12);
        let cournot = fixtures::cournot_spec();
        let next = step_simultaneous_br(&cournot, &Belief::point_mass(2, 0), &q(&[0.0, 0.0]), &opts()).unwrap();
        assert!(next.max_abs_diff(&q(&[1.0, 1.0])) < 1e-12);
    }

    #[test]
    fn sequential_examples() {
        let cournot = fixtures::cournot_spec();
        let theta = Belief::point_mass(2, 0);
        let a = step_sequential_br(&cournot, &theta, &q(&[0.0, 0.0]), 1, &opts()).unwrap();
        assert!(a.max_abs_diff(&q(&[1.0, 0.0])) < 1e-12);
        let b = step_sequential_br(&cournot, &theta, &q(&[1.0, 0.0]), 2, &opts()).unwrap();
        assert!(b.max_abs_diff(&q(&[1.0, 0.5])) < 1e-12);
        let eq = q(&[2.0 / 3.0, 2.0 / 3.0]);
        for k in 1..5 {
            let same = step_sequential_br(&cournot, &theta, &eq, k, &opts()).unwrap();
            assert!(same.max_abs_diff(&eq) < 1e-12);
        }
    }

    #[test]
    fn inertial_examples() {
        let cournot = fixtures::cournot_spec();
        let theta = Belief::point_mass(2, 0);
        let start = q(&[0.0, 0.0]);
        let half = step_inertial_br(&cournot, &theta, &start, 0.5, &opts()).unwrap();
        assert!(half.max_abs_diff(&q(&[0.5, 0.5])) < 1e-12);
        let none = step_inertial_br(&cournot, &theta, &start, 0.0, &opts()).unwrap();
        assert_eq!(none, start);
        let full = step_inertial_br(&cournot, &theta, &q(&[0.3, 2.1]), 1.0, &opts()).unwrap();
        let sim = step_simultaneous_br(&cournot, &theta, &q(&[0.3, 2.1]), &opts()).unwrap();
        assert_eq!(full, sim);
        assert!(step_inertial_br(&cournot, &theta, &start, 1.5, &opts()).is_err());
    }

    #[test]
    fn no_regret_examples() {
        let cournot = fixtures::cournot_spec();
        let theta = Belief::point_mass(2, 0);
        let eq = q(&[2.0 / 3.0, 2.0 / 3.0]);
        let (next, scores) =
            step_no_regret(&cournot, &theta, &eq, &ScoreState::from_profile(&eq), 0.1).unwrap();
        assert!(next.max_abs_diff(&eq) < 1e-15);
        assert!((scores.x[0] - 2.0 / 3.0).abs() < 1e-15);

        let zero = q(&[0.0, 0.0]);
        let (next, scores) =
            step_no_regret(&cournot, &theta, &zero, &ScoreState::from_profile(&zero), 0.1).unwrap();
        assert!(next.max_abs_diff(&q(&[0.2, 0.2])) < 1e-15);
        assert!((scores.x[1] - 0.2).abs() < 1e-15);

        let bad = ScoreState { x: vec![f64::NAN, 0.0] };
        assert!(step_no_regret(&cournot, &theta, &zero, &bad, 0.1).is_err());
    }

    #[test]
    fn no_regret_scores_may_leave_the_interval() {
        let zs = fixtures::zero_sum_spec();
        let theta = Belief::from_probs(&[0.5, 0.5, 0.0]).unwrap();
        let start = q(&[0.0, 3.0]);
        let (next, scores) =
            step_no_regret(&zs, &theta, &start, &ScoreState::from_profile(&start), 0.1).unwrap();
        assert!(scores.x[0] < 0.0);
        assert_eq!(next[0], 0.0);
    }

    #[test]
    fn solve_equilibrium_examples() {
        let inv = fixtures::investment_spec();
        let eqs = solve_equilibrium(&inv, &Belief::point_mass(3, 1), &EquilibriumOptions::default()).unwrap();
        assert_eq!(eqs.len(), 1);
        assert!(eqs[0].max_abs_diff(&q(&[1.0 / 3.0, 1.0 / 3.0])) < 1e-8);

        let cournot = fixtures::cournot_spec();
        let eqs = solve_equilibrium(&cournot, &Belief::uniform(2), &EquilibriumOptions::default()).unwrap();
        assert_eq!(eqs.len(), 1);
        assert!(eqs[0].max_abs_diff(&q(&[0.5, 0.5])) < 1e-8);

        let zs = fixtures::zero_sum_spec();
        let theta = Belief::from_probs(&[0.5, 0.5, 0.0]).unwrap();
        let eqs = solve_equilibrium(&zs, &theta, &EquilibriumOptions::default()).unwrap();
        assert_eq!(eqs.len(), 1);
        assert!(eqs[0].max_abs_diff(&q(&[0.0, 1.5])) < 1e-8);
    }

    #[test]
    fn solve_equilibrium_rejects_zero_rounds() {
        let inv = fixtures::investment_spec();
        let opts = EquilibriumOptions { max_rounds: 0, ..Default::default() };
        assert!(solve_equilibrium(&inv, &Belief::uniform(3), &opts).is_err());
    }

    #[test]
    fn step_schedules() {
        assert_eq!(StepSchedule::Constant { c: 0.1 }.alpha(50), 0.1);
        assert_eq!(StepSchedule::Harmonic { c: 0.5 }.alpha(5), 0.1);
        assert_eq!(StepSchedule::InvSqrt { c: 0.5 }.alpha(4), 0.25);
        assert!(StepSchedule::Constant { c: 1.5 }.validate().is_err());
    }

    #[test]
    fn rule_pairings() {
        assert!(check_pairing(&fixtures::investment_spec(), Rule::SequentialBr));
        assert!(!check_pairing(&fixtures::zero_sum_spec(), Rule::SimultaneousBr));
        assert_eq!(Rule::parse("no-regret").unwrap(), Rule::NoRegret);
    }

    fn arb_game() -> impl Strategy<Value = GameSpec> {
        prop_oneof![
            Just(fixtures::cournot_spec()),
            Just(fixtures::zero_sum_spec()),
            Just(fixtures::investment_spec()),
        ]
    }

    fn arb_case() -> impl Strategy<Value = (GameSpec, Belief, StrategyProfile)> {
        (arb_game(), prop::collection::vec(0.0..1.0f64, 3), prop::collection::vec(0.0..1.0f64, 2))
            .prop_map(|(spec, w, u)| {
                let w = &w[..spec.n_params()];
                let total: f64 = w.iter().sum::<f64>() + 1e-9;
                let probs: Vec<f64> = w.iter().map(|x| (x + 1e-9 / w.len() as f64) / total).collect();
                let theta = Belief::from_probs(&probs).unwrap();
                let q = StrategyProfile(
                    spec.strategy_sets.iter().zip(&u).map(|(iv, t)| iv.lo + t * iv.width()).collect(),
                );
                (spec, theta, q)
            })
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn every_step_stays_feasible((spec, theta, start) in arb_case(), alpha in 0.0..1.0f64, k in 1u64..10) {
            let o = opts();
            for next in [
                step_simultaneous_br(&spec, &theta, &start, &o).unwrap(),
                step_sequential_br(&spec, &theta, &start, k, &o).unwrap(),
                step_inertial_br(&spec, &theta, &start, alpha, &o).unwrap(),
                step_no_regret(&spec, &theta, &start, &ScoreState::from_profile(&start), alpha).unwrap().0,
            ] {
                prop_assert!(spec.check_profile(&next).is_ok());
            }
        }

        #[test]
        fn best_response_beats_sampled_points((spec, theta, start) in arb_case(), seed in 0u64..1000) {
            let o = opts();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for i in 0..2 {
                let b = best_response(&spec, &theta, i, &start, &o).unwrap();
                let best = spec.expected_utility(&theta, i, &start.with(i, b)).unwrap();
                let iv = spec.strategy_sets[i];
                for _ in 0..1000 {
                    let x = rng.random_range(iv.lo..=iv.hi);
                    let v = spec.expected_utility(&theta, i, &start.with(i, x)).unwrap();
                    prop_assert!(v <= best + o.tol, "player {} x={} v={} best={} at {}", i, x, v, best, b);
                }
            }
        }
    }
}
