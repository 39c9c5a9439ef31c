use serde::{Deserialize, Serialize};

use super::{fmt_vec, Report, SUPPORT_TOL};
use crate::belief::{equivalent_unchecked, Belief};
use crate::error::{Error, Result};
use crate::game::{GameSpec, StrategyProfile};
use crate::learners::{utility_residuals, SolverOptions};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FixedPointReport {
    pub support: Vec<usize>,
    pub equivalent_set: Vec<usize>,
    pub support_subset_ok: bool,
    /// Utility gain of each player's best response over its current strategy.
    pub br_residual: Vec<f64>,
    pub is_equilibrium: bool,
    pub is_complete_info: bool,
    pub is_fixed_point: bool,
    pub support_labels: Vec<String>,
    pub equivalent_labels: Vec<String>,
}

/// Tests `[theta] subset S*(q)` and `q in EQ(theta)`.
pub fn verify_fixed_point(
    spec: &GameSpec,
    theta_bar: &Belief,
    q_bar: &StrategyProfile,
    kl_tol: f64,
    br_tol: f64,
) -> Result<FixedPointReport> {
    if !(kl_tol > 0.0) || !(br_tol > 0.0) {
        return Err(Error::config("tolerances must be positive"));
    }
    spec.check_belief(theta_bar)?;
    spec.check_profile(q_bar)?;
    let support = theta_bar.support(SUPPORT_TOL);
    let equivalent_set = equivalent_unchecked(spec, q_bar, kl_tol);
    let support_subset_ok = support.iter().all(|s| equivalent_set.contains(s));
    let br_residual = utility_residuals(spec, theta_bar, q_bar, &SolverOptions::default())?;
    let is_equilibrium = br_residual.iter().all(|&r| r <= br_tol);
    let is_complete_info = support == [spec.true_index()];
    let label = |set: &[usize]| set.iter().map(|&s| spec.params.ids[s].clone()).collect();
    Ok(FixedPointReport {
        support_labels: label(&support),
        equivalent_labels: label(&equivalent_set),
        support,
        equivalent_set,
        support_subset_ok,
        br_residual,
        is_equilibrium,
        is_complete_info,
        is_fixed_point: support_subset_ok && is_equilibrium,
    })
}

impl Report for FixedPointReport {
    fn to_text(&self) -> String {
        let verdict = match (self.is_fixed_point, self.is_complete_info) {
            (true, true) => "fixed point (complete information)",
            (true, false) => "fixed point (incomplete information)",
            (false, _) => "not a fixed point",
        };
        format!(
            "{verdict}\n  support:            {{{}}}\n  payoff-equivalent:  {{{}}}\n  support subset:     {}\n  BR residual:        {}\n  equilibrium:        {}\n",
            self.support_labels.join(", "),
            self.equivalent_labels.join(", "),
            self.support_subset_ok,
            fmt_vec(&self.br_residual),
            self.is_equilibrium,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures;

    fn q(v: &[f64]) -> StrategyProfile {
        StrategyProfile(v.to_vec())
    }

    #[test]
    fn cournot_examples() {
        let spec = fixtures::cournot_spec();
        let r = verify_fixed_point(&spec, &Belief::point_mass(2, 0), &q(&[2.0 / 3.0, 2.0 / 3.0]), 1e-9, 1e-8).unwrap();
        assert!(r.is_fixed_point && r.is_complete_info);
        let half = Belief::uniform(2);
        let r = verify_fixed_point(&spec, &half, &q(&[0.5, 0.5]), 1e-9, 1e-8).unwrap();
        assert!(r.is_fixed_point && !r.is_complete_info);
        let r = verify_fixed_point(&spec, &half, &q(&[2.0 / 3.0, 2.0 / 3.0]), 1e-9, 1e-8).unwrap();
        assert!(!r.is_fixed_point && !r.support_subset_ok && !r.is_equilibrium);
        assert!(r.br_residual.iter().all(|&x| x > 0.0));
        assert!(r.to_text().starts_with("not a fixed point"));
    }

    #[test]
    fn point_mass_on_truth_always_passes_support_clause() {
        let spec = fixtures::zero_sum_spec();
        for a in 0..=12 {
            for b in 0..=12 {
                let p = q(&[a as f64 * 0.5, b as f64 * 0.5]);
                let r = verify_fixed_point(&spec, &Belief::point_mass(3, 1), &p, 1e-9, 1e-8).unwrap();
                assert!(r.support_subset_ok);
            }
        }
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let spec = fixtures::cournot_spec();
        let err = verify_fixed_point(&spec, &Belief::uniform(2), &q(&[0.5, 0.5]), 0.0, 1e-8);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
