use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::Report;
use crate::belief::Belief;
use crate::error::{Error, Result};
use crate::game::{GameSpec, Observation, StrategyProfile};

pub const MIN_MARTINGALE_SAMPLES: usize = 10_000;

/// Band half-width in standard errors.
const BAND: f64 = 4.0;
/// Relative slack that absorbs rounding when every sample is identical.
const SLACK: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleEntry {
    pub parameter: usize,
    pub label: String,
    pub current: f64,
    pub mean: f64,
    pub std_error: f64,
    pub pass: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MartingaleReport {
    pub n_samples: usize,
    pub entries: Vec<MartingaleEntry>,
    pub pass: bool,
}

/// Monte-Carlo estimate of `E[theta'(s) / theta'(s*)]` after one Bayesian
/// update with an observation drawn under the true parameter at `q`.
pub fn martingale_check(
    spec: &GameSpec,
    theta: &Belief,
    q: &StrategyProfile,
    n_samples: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    spec.check_belief(theta)?;
    spec.check_profile(q)?;
    if n_samples < MIN_MARTINGALE_SAMPLES {
        return Err(Error::config(format!(
            "n_samples must be at least {MIN_MARTINGALE_SAMPLES}"
        )));
    }
    let star = spec.true_index();
    let others: Vec<usize> = (0..spec.n_params()).filter(|&s| s != star).collect();
    let current: Vec<f64> = others
        .iter()
        .map(|&s| theta.ratio(s, star))
        .collect::<Result<_>>()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // running mean and sum of squared deviations
    let mut mean = vec![0.0; others.len()];
    let mut m2 = vec![0.0; others.len()];
    let mut batch = vec![(q.clone(), Observation(Vec::new()))];
    for t in 1..=n_samples {
        batch[0].1 = spec.sample_unchecked(q, &mut rng);
        let next = theta.bayes_update_unchecked(spec, &batch)?;
        for (j, &s) in others.iter().enumerate() {
            let r = next.ratio(s, star)?;
            let d = r - mean[j];
            mean[j] += d / t as f64;
            m2[j] += d * (r - mean[j]);
        }
    }
    let n = n_samples as f64;
    let entries: Vec<MartingaleEntry> = others
        .iter()
        .enumerate()
        .map(|(j, &s)| {
            let mean = mean[j];
            let std_error = (m2[j].max(0.0) / (n - 1.0) / n).sqrt();
            let pass = (mean - current[j]).abs() <= BAND * std_error + SLACK * current[j].abs();
            MartingaleEntry {
                parameter: s,
                label: spec.params.ids[s].clone(),
                current: current[j],
                mean,
                std_error,
                pass,
            }
        })
        .collect();
    Ok(MartingaleReport {
        n_samples,
        pass: entries.iter().all(|e| e.pass),
        entries,
    })
}

impl Report for MartingaleReport {
    fn to_text(&self) -> String {
        let mut out = format!(
            "martingale check ({} samples): {}\n",
            self.n_samples,
            if self.pass { "PASS" } else { "FAIL" }
        );
        for e in &self.entries {
            out.push_str(&format!(
                "  {}: ratio {:.6}, mean {:.6} +/- {:.2e} {}\n",
                e.label,
                e.current,
                e.mean,
                e.std_error,
                if e.pass { "ok" } else { "outside band" }
            ));
        }
        out
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
    fn uninformative_profile_gives_constant_ratios() {
        let spec = fixtures::cournot_spec();
        let theta = Belief::from_probs(&[0.3, 0.7]).unwrap();
        let r = martingale_check(&spec, &theta, &q(&[0.5, 0.5]), 10_000, 0).unwrap();
        assert!(r.pass);
        let e = &r.entries[0];
        assert!(e.std_error < 1e-12);
        assert!((e.mean - 0.7 / 0.3).abs() < 1e-12);
    }

    #[test]
    fn excluded_parameter_stays_excluded() {
        let spec = fixtures::cournot_spec();
        let r = martingale_check(&spec, &Belief::point_mass(2, 0), &q(&[1.0, 1.0]), 10_000, 0).unwrap();
        assert!(r.pass);
        assert_eq!(r.entries[0].mean, 0.0);
        assert_eq!(r.entries[0].std_error, 0.0);
    }

    #[test]
    fn requires_positive_truth_and_enough_samples() {
        let spec = fixtures::cournot_spec();
        let err = martingale_check(&spec, &Belief::point_mass(2, 1), &q(&[1.0, 1.0]), 10_000, 0);
        assert!(matches!(err, Err(Error::InvariantViolation(_))));
        let err = martingale_check(&spec, &Belief::uniform(2), &q(&[1.0, 1.0]), 100, 0);
        assert!(matches!(err, Err(Error::Config(_))));
    }
}
