use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{fmt_ids, fmt_vec, Report, SUPPORT_TOL};
use crate::belief::{kl_unchecked, Belief, DEFAULT_KL_TOL};
use crate::error::{Error, Result};
use crate::game::{GameSpec, StrategyProfile};

const CONCAVITY_SAMPLES: usize = 1000;
const CONCAVITY_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum LearningVerdict {
    Complete,
    Undetermined,
}

/// A strategy near the fixed point at which a parameter of the support is
/// distinguishable from the truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub strategy: StrategyProfile,
    pub parameter: usize,
    pub kl: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CompleteLearningReport {
    pub verdict: LearningVerdict,
    pub support: Vec<usize>,
    pub locally_consistent: bool,
    pub concave: bool,
    pub witness: Option<Witness>,
    /// `(player, parameter)` pairs whose payoff is not concave in own strategy.
    pub nonconcave: Vec<(usize, usize)>,
    pub probes: usize,
    pub xi: f64,
    #[serde(skip)]
    labels: Vec<String>,
}

/// Sufficient conditions under which the fixed point `(theta_bar, q_bar)`
/// must carry complete information: parameters of the support stay
/// payoff-equivalent on a `xi`-ball around `q_bar`, and payoffs are concave
/// in own strategy.
pub fn complete_learning_check(
    spec: &GameSpec,
    theta_bar: &Belief,
    q_bar: &StrategyProfile,
    xi: f64,
    n_probe: usize,
    seed: u64,
) -> Result<CompleteLearningReport> {
    spec.check_belief(theta_bar)?;
    spec.check_profile(q_bar)?;
    if !(xi > 0.0) {
        return Err(Error::config("xi must be positive"));
    }
    let support = theta_bar.support(SUPPORT_TOL);
    let mut report = CompleteLearningReport {
        verdict: LearningVerdict::Complete,
        support: support.clone(),
        locally_consistent: true,
        concave: true,
        witness: None,
        nonconcave: Vec::new(),
        probes: 0,
        xi,
        labels: spec.params.ids.clone(),
    };
    if support.len() <= 1 {
        return Ok(report);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let star = spec.true_index();
    for q in probes(spec, q_bar, xi, n_probe, &mut rng) {
        report.probes += 1;
        let worst = support
            .iter()
            .map(|&s| (s, kl_unchecked(spec, star, s, &q)))
            .max_by(|a, b| a.1.total_cmp(&b.1))
            .expect("support is non-empty");
        if worst.1 > DEFAULT_KL_TOL {
            report.locally_consistent = false;
            report.witness = Some(Witness {
                strategy: q,
                parameter: worst.0,
                kl: worst.1,
            });
            break;
        }
    }

    for &s in &support {
        for i in 0..spec.n_players() {
            if !concave_in_own(spec, s, i, &mut rng) {
                report.nonconcave.push((i, s));
            }
        }
    }
    report.concave = report.nonconcave.is_empty();
    if !(report.locally_consistent && report.concave) {
        report.verdict = LearningVerdict::Undetermined;
    }
    Ok(report)
}

/// Coordinate probes at `+-xi/2`, then uniform draws from the `xi`-ball,
/// all restricted to the strategy space.
fn probes<R: Rng>(
    spec: &GameSpec,
    center: &StrategyProfile,
    xi: f64,
    n_probe: usize,
    rng: &mut R,
) -> Vec<StrategyProfile> {
    let d = center.len();
    let feasible = |q: &StrategyProfile| q.iter().zip(&spec.strategy_sets).all(|(x, iv)| iv.contains(*x));
    let mut out = Vec::with_capacity(n_probe);
    for i in 0..d {
        for sign in [1.0, -1.0] {
            let q = center.with(i, center[i] + sign * xi / 2.0);
            if feasible(&q) && out.len() < n_probe {
                out.push(q);
            }
        }
    }
    let mut attempts = 0;
    while out.len() < n_probe && attempts < 100 * n_probe {
        attempts += 1;
        let dir: Vec<f64> = (0..d).map(|_| rng.sample::<f64, _>(StandardNormal)).collect();
        let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let r = xi * rng.random::<f64>().powf(1.0 / d as f64);
        let q = StrategyProfile(center.iter().zip(&dir).map(|(c, u)| c + r * u / norm).collect());
        if feasible(&q) {
            out.push(q);
        }
    }
    out
}

fn concave_in_own<R: Rng>(spec: &GameSpec, s: usize, i: usize, rng: &mut R) -> bool {
    if let Some(flag) = spec.declared_concave(s) {
        return flag;
    }
    (0..CONCAVITY_SAMPLES).all(|_| {
        let q: Vec<f64> = spec
            .strategy_sets
            .iter()
            .map(|iv| rng.random_range(iv.lo..=iv.hi))
            .collect();
        spec.payoff_second_own(s, i, &q) <= CONCAVITY_TOL
    })
}

impl Report for CompleteLearningReport {
    fn to_text(&self) -> String {
        let verdict = match self.verdict {
            LearningVerdict::Complete => "COMPLETE",
            LearningVerdict::Undetermined => "UNDETERMINED",
        };
        let support: Vec<&str> = self.support.iter().map(|&s| self.labels[s].as_str()).collect();
        if self.support.len() <= 1 {
            return format!("{verdict}\n  support: {{{}}} (point mass)\n", support.join(", "));
        }
        let mut out = format!(
            "{verdict}\n  support: {{{}}}\n  locally consistent: {} ({} probes, xi = {})\n  concave in own strategy: {}\n",
            support.join(", "),
            self.locally_consistent,
            self.probes,
            self.xi,
            self.concave
        );
        if let Some(w) = &self.witness {
            out.push_str(&format!(
                "  witness: q = {} separates {} with KL {:.3e}\n",
                fmt_vec(&w.strategy),
                self.labels[w.parameter],
                w.kl
            ));
        }
        out
    }
}

impl CompleteLearningReport {
    pub fn describe_support(&self, spec: &GameSpec) -> String {
        fmt_ids(spec, &self.support)
    }
}
