//! Voltage-clamp simulation of the K_d and K_s potassium channel models.

mod clamp;
mod kinetics;
mod protocol;

pub use clamp::{integrate_sweep, simulate_clamp, simulate_protocol, ProtocolTraces, SweepTrace, TraceSet, SAMPLES_PER_SWEEP};
pub use kinetics::{kd_rates, ks_kinetics, Channel, KdParams, KsParams, TauOffset};
pub use protocol::{
    build_protocols, build_protocols_with, parse_protocols, write_protocols, ProtocolKind, ProtocolSettings, Segment,
    Sweep, VoltageProtocol,
};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::features::{project_traces, PcaBasis};
use crate::par::{stream, Exec};

pub const KD: usize = 0;
pub const KS: usize = 1;

pub const MODEL_NAMES: [&str; 2] = ["kd", "ks"];

/// Uniform priors on the free parameters, spanning `[lo·θ_GT, hi·θ_GT]`
/// around the ground-truth values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelPrior {
    pub model_prior: [f64; 2],
    pub kd: KdParams,
    pub ks: KsParams,
    pub lo_factor: f64,
    pub hi_factor: f64,
}

impl Default for ChannelPrior {
    fn default() -> Self {
        ChannelPrior {
            model_prior: [0.5, 0.5],
            kd: KdParams::ground_truth(),
            ks: KsParams::ground_truth(),
            lo_factor: 0.3,
            hi_factor: 1.3,
        }
    }
}

impl ChannelPrior {
    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.model_prior;
        if !(a >= 0.0 && b >= 0.0) || ((a + b) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("model prior must be a probability vector, got {:?}", self.model_prior)));
        }
        if !(self.lo_factor > 0.0 && self.hi_factor > self.lo_factor) {
            return Err(Error::Domain("prior range factors must satisfy 0 < lo < hi".into()));
        }
        self.kd.validate()?;
        self.ks.validate()
    }

    pub fn n_params(model: usize) -> usize {
        if model == KD {
            8
        } else {
            5
        }
    }

    /// Interval `(low, high)` of each free parameter's uniform prior.
    pub fn bounds(&self, model: usize) -> Vec<(f64, f64)> {
        let gt: Vec<f64> = if model == KD { self.kd.free().to_vec() } else { self.ks.free().to_vec() };
        gt.into_iter()
            .map(|g| {
                let (a, b) = (self.lo_factor * g, self.hi_factor * g);
                (a.min(b), a.max(b))
            })
            .collect()
    }

    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        if rng.random::<f64>() < self.model_prior[KD] {
            KD
        } else {
            KS
        }
    }

    pub fn sample_params<R: Rng + ?Sized>(&self, model: usize, rng: &mut R) -> Vec<f64> {
        self.bounds(model)
            .into_iter()
            .map(|(lo, hi)| lo + (hi - lo) * rng.random::<f64>())
            .collect()
    }

    pub fn channel(&self, model: usize, params: &[f64]) -> Result<Channel> {
        match model {
            KD => Ok(Channel::Kd(self.kd.with_free(params)?)),
            KS => Ok(Channel::Ks(self.ks.with_free(params)?)),
            _ => Err(Error::Input(format!("unknown channel model index {model}"))),
        }
    }
}

/// Simulates `n_per_model` prior draws of each model and arranges the
/// responses as one corpus matrix per protocol (rows = simulations).
pub fn simulate_corpus(
    prior: &ChannelPrior,
    protocols: &[VoltageProtocol],
    n_per_model: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<(String, Vec<Vec<f64>>)>> {
    prior.validate()?;
    let sets = exec.try_map(2 * n_per_model, |i| {
        let model = if i < n_per_model { KD } else { KS };
        let mut rng = stream(seed, i as u64);
        let params = prior.sample_params(model, &mut rng);
        simulate_clamp(&prior.channel(model, &params)?, protocols)
    })?;
    Ok(protocols
        .iter()
        .enumerate()
        .map(|(p, proto)| {
            let rows = sets.iter().map(|s| s.protocols[p].concatenated()).collect();
            (proto.name().to_string(), rows)
        })
        .collect())
}

/// Joint draws `(m, θ, s(x))` with PCA-coefficient summaries. Raw traces are
/// not retained.
pub fn generate_channel_dataset(
    prior: &ChannelPrior,
    protocols: &[VoltageProtocol],
    basis: &PcaBasis,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<LabeledSample>> {
    prior.validate()?;
    if n == 0 {
        return Err(Error::Input("dataset size must be at least 1".into()));
    }
    exec.try_map(n, |i| {
        let mut rng = stream(seed, i as u64);
        let model = prior.sample_model(&mut rng);
        let params = prior.sample_params(model, &mut rng);
        let traces = simulate_clamp(&prior.channel(model, &params)?, protocols)?;
        Ok(LabeledSample {
            model_index: model,
            params,
            counts: Vec::new(),
            summary: project_traces(&traces, basis)?,
        })
    })
}
