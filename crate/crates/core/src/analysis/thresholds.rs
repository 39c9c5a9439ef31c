use serde::{Deserialize, Serialize};

use super::{Report, SUPPORT_TOL};
use crate::belief::Belief;
use crate::error::{Error, Result};

/// Strict upper bounds are met by taking this fraction of them.
const SHRINK: f64 = 0.99;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Thresholds {
    pub rho1: f64,
    pub rho2: f64,
    pub rho3: f64,
    /// `min(rho1, rho3)`, the initial belief radius of the stability
    /// experiment.
    pub epsilon1: f64,
    pub epsilon_hat: f64,
    pub gamma: f64,
    /// `|S \ [theta]|`.
    pub excluded: usize,
    /// `rho1 < rho2 theta(s*) / (1 + rho2)`.
    pub upcrossing_interval_ok: bool,
}

/// Belief thresholds that keep excluded parameters below `rho2` with
/// probability above `gamma`.
pub fn stability_thresholds(
    theta_bar: &Belief,
    epsilon_hat: f64,
    gamma: f64,
    s_star: usize,
) -> Result<Thresholds> {
    if !(gamma > 0.0 && gamma < 1.0) {
        return Err(Error::config("gamma must lie in (0, 1)"));
    }
    if !(epsilon_hat > 0.0 && epsilon_hat.is_finite()) {
        return Err(Error::config("epsilon_hat must be positive"));
    }
    let n = theta_bar.len();
    if s_star >= n {
        return Err(Error::config(format!("true parameter index {s_star} out of range")));
    }
    let support = theta_bar.support(SUPPORT_TOL);
    if !support.contains(&s_star) {
        return Err(Error::domain("the true parameter has zero probability under theta_bar"));
    }
    let size = n as f64;
    let m = (n - support.len()) as f64;
    let rho2 = epsilon_hat / ((m + 1.0) * size);

    let rho1_bound = support
        .iter()
        .map(|&s| {
            let t = theta_bar.prob(s);
            (1.0 - gamma) * t * epsilon_hat
                / ((1.0 - gamma + m) * (m + 1.0) * size + (1.0 - gamma) * epsilon_hat)
        })
        .fold(f64::INFINITY, f64::min);

    let rho3_bound = support
        .iter()
        .map(|&s| {
            let t = theta_bar.prob(s);
            let a = (epsilon_hat - m * size * rho2 * t) / (size - m * size * rho2);
            let b = epsilon_hat / size - rho2 * m * (t + epsilon_hat / size);
            a.min(b).min(t)
        })
        .fold(f64::INFINITY, f64::min);
    if !(rho3_bound > 0.0) || !(size - m * size * rho2 > 0.0) {
        return Err(Error::domain(format!(
            "no positive rho3 exists for epsilon_hat = {epsilon_hat}"
        )));
    }

    let rho1 = SHRINK * rho1_bound;
    let rho3 = SHRINK * rho3_bound;
    let t_star = theta_bar.prob(s_star);
    Ok(Thresholds {
        rho1,
        rho2,
        rho3,
        epsilon1: rho1.min(rho3),
        epsilon_hat,
        gamma,
        excluded: m as usize,
        upcrossing_interval_ok: rho1 < rho2 * t_star / (1.0 + rho2),
    })
}

impl Report for Thresholds {
    fn to_text(&self) -> String {
        format!(
            "rho1 = {:.6e}\nrho2 = {:.6e}\nrho3 = {:.6e}\nepsilon1 = {:.6e}\nupcrossing interval non-empty: {}\n",
            self.rho1, self.rho2, self.rho3, self.epsilon1, self.upcrossing_interval_ok
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn point_mass_example() {
        let t = stability_thresholds(&Belief::point_mass(2, 0), 0.1, 0.9, 0).unwrap();
        assert!((t.rho2 - 0.025).abs() < 1e-15);
        let expect = 0.99 * (0.1 * 0.1) / (1.1 * 2.0 * 2.0 + 0.1 * 0.1);
        assert!((t.rho1 - expect).abs() < 1e-15);
        assert!((t.rho1 - 0.99 * 0.002268).abs() < 1e-6);
        assert!(t.upcrossing_interval_ok);
        assert_eq!(t.excluded, 1);
        assert_eq!(t.epsilon1, t.rho1);
    }

    #[test]
    fn rejects_missing_truth_and_bad_inputs() {
        let b = Belief::point_mass(2, 1);
        assert!(matches!(stability_thresholds(&b, 0.1, 0.9, 0), Err(Error::Domain(_))));
        assert!(matches!(stability_thresholds(&b, 0.1, 1.0, 1), Err(Error::Config(_))));
        assert!(matches!(stability_thresholds(&b, -0.1, 0.5, 1), Err(Error::Config(_))));
    }

    #[test]
    fn ordering_holds_on_random_draws() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..1000 {
            let n = rng.random_range(2..=5);
            let star = rng.random_range(0..n);
            let mut w: Vec<f64> = (0..n)
                .map(|s| if s == star || rng.random_bool(0.5) { rng.random_range(0.05..1.0) } else { 0.0 })
                .collect();
            let total: f64 = w.iter().sum();
            w.iter_mut().for_each(|x| *x /= total);
            let b = Belief::from_probs(&w).unwrap();
            let eps = rng.random_range(0.01..0.5);
            let gamma = rng.random_range(0.05..0.99);
            let t = stability_thresholds(&b, eps, gamma, star).unwrap();
            let m = t.excluded as f64;
            let size = n as f64;
            assert!(0.0 < t.rho1 && t.rho1 < t.rho2);
            assert!(t.rho2 <= eps / size);
            if t.excluded > 0 {
                assert!(t.rho2 < eps / size);
            }
            assert!(t.upcrossing_interval_ok);
            for s in b.support(SUPPORT_TOL) {
                let th = b.prob(s);
                assert!(t.rho1 < (1.0 - gamma) * th * eps / ((1.0 - gamma + m) * (m + 1.0) * size + (1.0 - gamma) * eps));
                assert!(t.rho3 < (eps - m * size * t.rho2 * th) / (size - m * size * t.rho2));
                assert!(t.rho3 < eps / size - t.rho2 * m * (th + eps / size));
                assert!(t.rho3 < th);
            }
        }
    }
}
