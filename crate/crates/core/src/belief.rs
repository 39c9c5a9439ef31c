//! Beliefs over the finite parameter set and their Bayesian updates.
//!
//! Probabilities are kept as normalized log-weights. Beliefs of parameters
//! that are distinguishable from the truth decay exponentially, so a linear
//! representation would underflow long before the dynamics settle.

use serde::{Deserialize, Deserializer, Serialize, Serializer};

use crate::error::{Error, Result};
use crate::game::{GameSpec, Observation, StrategyProfile};

/// Tolerance on `sum(theta) == 1` for user-supplied probability vectors.
pub const SIMPLEX_TOL: f64 = 1e-9;

/// Default KL threshold below which a parameter counts as payoff-equivalent.
pub const DEFAULT_KL_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct Belief {
    log_p: Vec<f64>,
}

fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return max;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

impl Belief {
    pub fn from_probs(probs: &[f64]) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::domain("belief must have at least one entry"));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::domain(format!("belief entry {p} is not a probability")));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > SIMPLEX_TOL {
            return Err(Error::domain(format!("belief sums to {total}, expected 1")));
        }
        Self::from_log_weights(probs.iter().map(|p| p.ln()).collect())
    }

    /// Normalizes arbitrary log-weights. `-inf` marks an excluded parameter.
    pub fn from_log_weights(log_w: Vec<f64>) -> Result<Self> {
        if log_w.iter().any(|w| w.is_nan() || *w == f64::INFINITY) {
            return Err(Error::Numeric("log-weight is NaN or +inf".into()));
        }
        let lse = log_sum_exp(&log_w);
        if lse == f64::NEG_INFINITY {
            return Err(Error::ImpossibleEvidence);
        }
        Ok(Belief {
            log_p: log_w.into_iter().map(|w| w - lse).collect(),
        })
    }

    pub fn uniform(n: usize) -> Self {
        let l = -(n as f64).ln();
        Belief { log_p: vec![l; n] }
    }

    pub fn point_mass(n: usize, s: usize) -> Self {
        let mut log_p = vec![f64::NEG_INFINITY; n];
        log_p[s] = 0.0;
        Belief { log_p }
    }

    pub fn len(&self) -> usize {
        self.log_p.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_p.is_empty()
    }

    pub fn prob(&self, s: usize) -> f64 {
        self.log_p[s].exp()
    }

    pub fn log_prob(&self, s: usize) -> f64 {
        self.log_p[s]
    }

    pub fn log_probs(&self) -> &[f64] {
        &self.log_p
    }

    pub fn probs(&self) -> Vec<f64> {
        self.log_p.iter().map(|l| l.exp()).collect()
    }

    /// `(s, theta(s))` pairs.
    pub fn weights(&self) -> impl Iterator<Item = (usize, f64)> + '_ {
        self.log_p.iter().map(|l| l.exp()).enumerate()
    }

    /// Parameters with probability above `tol`.
    pub fn support(&self, tol: f64) -> Vec<usize> {
        self.weights().filter(|&(_, p)| p > tol).map(|(s, _)| s).collect()
    }

    /// Max-norm distance in probability space.
    pub fn sup_distance(&self, other: &Belief) -> f64 {
        self.weights()
            .zip(other.weights())
            .map(|((_, a), (_, b))| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Posterior after observing every entry of `batch`.
    pub fn bayes_update(&self, spec: &GameSpec, batch: &ObservationBatch) -> Result<Belief> {
        spec.check_belief(self)?;
        if batch.is_empty() {
            return Err(Error::config("bayes update needs a non-empty observation batch"));
        }
        for (q, obs) in batch.iter() {
            spec.check_profile(q)?;
            if obs.len() != spec.obs_dim() {
                return Err(Error::config(format!(
                    "observation has {} components, expected {}",
                    obs.len(),
                    spec.obs_dim()
                )));
            }
        }
        self.bayes_update_unchecked(spec, batch.entries())
    }

    pub(crate) fn bayes_update_unchecked(
        &self,
        spec: &GameSpec,
        batch: &[(StrategyProfile, Observation)],
    ) -> Result<Belief> {
        let mut log_w = self.log_p.clone();
        for (s, w) in log_w.iter_mut().enumerate() {
            if *w == f64::NEG_INFINITY {
                continue;
            }
            for (q, obs) in batch {
                *w += spec.log_likelihood_unchecked(s, obs, q);
            }
        }
        Belief::from_log_weights(log_w)
    }

    /// `theta(s) / theta(s_star)`, formed in log space.
    pub fn ratio(&self, s: usize, s_star: usize) -> Result<f64> {
        if self.log_p[s_star] == f64::NEG_INFINITY {
            return Err(Error::InvariantViolation(format!(
                "true parameter {s_star} has zero belief"
            )));
        }
        Ok((self.log_p[s] - self.log_p[s_star]).exp())
    }
}

/// `theta(s) / theta(s*)` using the game's true parameter.
pub fn belief_ratio(spec: &GameSpec, b: &Belief, s: usize) -> Result<f64> {
    spec.check_belief(b)?;
    b.ratio(s, spec.true_index())
}

impl Serialize for Belief {
    fn serialize<S: Serializer>(&self, ser: S) -> std::result::Result<S::Ok, S::Error> {
        self.probs().serialize(ser)
    }
}

impl<'de> Deserialize<'de> for Belief {
    fn deserialize<D: Deserializer<'de>>(de: D) -> std::result::Result<Self, D::Error> {
        let probs = Vec::<f64>::deserialize(de)?;
        Belief::from_probs(&probs).map_err(serde::de::Error::custom)
    }
}

/// Strategy profiles and observations collected between two belief updates.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ObservationBatch {
    entries: Vec<(StrategyProfile, Observation)>,
}

impl ObservationBatch {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, q: StrategyProfile, obs: Observation) {
        self.entries.push((q, obs));
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn clear(&mut self) {
        self.entries.clear();
    }

    pub fn entries(&self) -> &[(StrategyProfile, Observation)] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &(StrategyProfile, Observation)> {
        self.entries.iter()
    }

    /// Concatenation `self ∥ other`.
    pub fn concat(&self, other: &ObservationBatch) -> ObservationBatch {
        let mut entries = self.entries.clone();
        entries.extend(other.entries.iter().cloned());
        ObservationBatch { entries }
    }
}

impl From<Vec<(StrategyProfile, Observation)>> for ObservationBatch {
    fn from(entries: Vec<(StrategyProfile, Observation)>) -> Self {
        ObservationBatch { entries }
    }
}

/// KL divergence between the observation distributions of two parameters at
/// `q`: `|m_from - m_to|^2 / (2 sigma^2)`. Zero where observations carry no
/// information.
pub fn kl_divergence(spec: &GameSpec, s_from: usize, s_to: usize, q: &StrategyProfile) -> Result<f64> {
    spec.check_profile(q)?;
    let m = spec.n_params();
    if s_from >= m || s_to >= m {
        return Err(Error::config("parameter index out of range"));
    }
    Ok(kl_unchecked(spec, s_from, s_to, q))
}

pub(crate) fn kl_unchecked(spec: &GameSpec, s_from: usize, s_to: usize, q: &[f64]) -> f64 {
    if s_from == s_to || !spec.informative(q) {
        return 0.0;
    }
    let a = spec.statistic_mean(s_from, q);
    let b = spec.statistic_mean(s_to, q);
    let sq: f64 = a.iter().zip(&b).map(|(x, y)| (x - y) * (x - y)).sum();
    sq / (2.0 * spec.sigma() * spec.sigma())
}

/// Parameters whose observation distribution at `q` is within `tol` (in KL)
/// of the true parameter's. Always contains the true parameter.
pub fn payoff_equivalent_set(spec: &GameSpec, q: &StrategyProfile, tol: f64) -> Result<Vec<usize>> {
    spec.check_profile(q)?;
    if !(tol > 0.0) {
        return Err(Error::config("KL tolerance must be positive"));
    }
    Ok(equivalent_unchecked(spec, q, tol))
}

pub(crate) fn equivalent_unchecked(spec: &GameSpec, q: &[f64], tol: f64) -> Vec<usize> {
    let star = spec.true_index();
    (0..spec.n_params())
        .filter(|&s| kl_unchecked(spec, star, s, q) <= tol)
        .collect()
}
