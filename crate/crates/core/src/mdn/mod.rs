//! Mixture-density networks: a shared tanh trunk with either a softmax head
//! for `p(m | x)` or a mixture-of-Gaussians head for `p(θ | x, m)`.

mod mog;
mod net;
mod train;

pub use mog::MoGPosterior;
pub use net::{FeedforwardNet, Head, Targets, PROB_FLOOR};
pub use train::{train, train_with, Adam, TrainConfig, TrainReport};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ZScaler;

pub const NETWORK_FORMAT_VERSION: u32 = 1;

/// Mean negative log-probability of the true labels, with probabilities
/// floored at [`PROB_FLOOR`]. The flag reports whether the floor was hit.
pub fn classifier_loss(probs: &[Vec<f64>], labels: &[usize]) -> Result<(f64, bool)> {
    if probs.len() != labels.len() || probs.is_empty() {
        return Err(Error::Input("probabilities and labels must be non-empty and aligned".into()));
    }
    let mut clamped = false;
    let mut total = 0.0;
    for (p, &y) in probs.iter().zip(labels) {
        let v = *p.get(y).ok_or_else(|| Error::Input("label out of range".into()))?;
        if v < PROB_FLOOR {
            clamped = true;
        }
        total -= v.max(PROB_FLOOR).ln();
    }
    Ok((total / probs.len() as f64, clamped))
}

/// A trained network together with everything needed to apply it to raw
/// summaries.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainedNetwork {
    pub format_version: u32,
    pub net: FeedforwardNet,
    pub input_scaler: ZScaler,
    /// Present for mixture heads.
    pub param_scaler: Option<ZScaler>,
    pub train_config: TrainConfig,
    pub loss_trace: Vec<f64>,
}

impl TrainedNetwork {
    pub fn predict_models(&self, summary: &[f64]) -> Result<Vec<f64>> {
        self.net.forward_classifier(&self.input_scaler.apply(summary))
    }

    /// Parameter posterior on the original parameter scale.
    pub fn predict_posterior(&self, summary: &[f64]) -> Result<MoGPosterior> {
        let q = self.net.forward_mog(&self.input_scaler.apply(summary))?;
        match &self.param_scaler {
            Some(s) => q.to_original_scale(s),
            None => Ok(q),
        }
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let t: TrainedNetwork = serde_json::from_str(s).map_err(|e| Error::Format(e.to_string()))?;
        if t.format_version != NETWORK_FORMAT_VERSION {
            return Err(Error::Format(format!("unsupported network format version {}", t.format_version)));
        }
        let expected = FeedforwardNet::zeros(&t.net.layers, t.net.head)?.n_params();
        if t.net.params.len() != expected {
            return Err(Error::Format(format!("network has {} parameters, layout needs {expected}", t.net.params.len())));
        }
        Ok(t)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_json()?).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&s)
    }
}
