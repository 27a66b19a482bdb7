use serde::{Deserialize, Serialize};

use super::{PreferenceClass, PreferenceError};

/// How the objective and the predicted preference are summed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlendMode {
    /// `w0 * objective + w1 * predicted_pref`, a convex combination.
    #[default]
    Weighted,
    /// `w0 * objective + w0 * predicted_pref`: both terms take the objective weight.
    /// Not bounded by 1.
    Literal,
}

/// Largest class probability.
pub fn confidence(probs: &[f64]) -> f64 {
    probs.iter().copied().fold(0.0, f64::max)
}

/// Expected preference value under the predicted class distribution.
pub fn predicted_preference(probs: &[f64]) -> f64 {
    probs.iter().zip(PreferenceClass::ALL).map(|(p, c)| p * c.value()).sum()
}

/// `w1 = min(conf * test_acc, 0.5)`, `w0 = 1 - w1`.
pub fn compute_weights(conf: f64, test_acc: f64) -> Result<(f64, f64), PreferenceError> {
    for (name, value) in [("confidence", conf), ("test accuracy", test_acc)] {
        if !(0.0..=1.0).contains(&value) {
            return Err(PreferenceError::DomainError { name, value });
        }
    }
    let w1 = (conf * test_acc).min(0.5);
    Ok((1.0 - w1, w1))
}

pub fn combined_fitness(objective: f64, predicted_pref: f64, w0: f64, w1: f64, mode: BlendMode) -> f64 {
    match mode {
        BlendMode::Weighted => w0 * objective + w1 * predicted_pref,
        BlendMode::Literal => w0 * objective + w0 * predicted_pref,
    }
}

/// Everything the engine records about one blended evaluation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Blended {
    pub combined: f64,
    pub confidence: f64,
    pub predicted_pref: f64,
    pub w1: f64,
}
