//! Checks run on games and simulated output: fixed points, decay rates of
//! beliefs, the martingale property of belief ratios, stability and
//! complete-learning verdicts.

use serde::Serialize;

mod complete;
mod fixed_point;
mod martingale;
mod rate;
mod stability;
mod thresholds;

pub use complete::{complete_learning_check, CompleteLearningReport, LearningVerdict, Witness};
pub use fixed_point::{verify_fixed_point, FixedPointReport};
pub use martingale::{martingale_check, MartingaleEntry, MartingaleReport, MIN_MARTINGALE_SAMPLES};
pub use rate::{estimate_rate, RateEstimate, DEFAULT_TAIL_FRACTION};
pub use stability::{
    global_stability_scan, local_stability_experiment, EscapeTarget, GlobalScanReport,
    ScanFailure, StabilityExperiment, StabilityReport, Violation,
};
pub use thresholds::{stability_thresholds, Thresholds};

/// Probability below which a parameter is treated as outside the support
/// of a belief.
pub const SUPPORT_TOL: f64 = 1e-9;

/// A report with a human-readable rendering next to its JSON form.
pub trait Report: Serialize {
    fn to_text(&self) -> String;

    fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("reports serialize")
    }
}

pub(crate) fn fmt_vec(xs: &[f64]) -> String {
    let parts: Vec<String> = xs.iter().map(|x| format!("{x:.6}")).collect();
    format!("({})", parts.join(", "))
}

pub(crate) fn fmt_ids(spec: &crate::game::GameSpec, set: &[usize]) -> String {
    let parts: Vec<&str> = set.iter().map(|&s| spec.params.ids[s].as_str()).collect();
    format!("{{{}}}", parts.join(", "))
}
