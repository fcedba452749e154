//! Reference ABC methods: rejection sampling for parameters and models, and
//! a sequential Monte Carlo sampler for model comparison.

mod rejection;
mod smc;

pub use rejection::{
    pilot_scaler, reject_models, reject_params, ModelRejection, ParamRejection, ReferenceTable, RejectionConfig, Tolerance,
};
pub use smc::{smc_models, SmcConfig, SmcResult};

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::channels::{simulate_clamp, ChannelPrior, VoltageProtocol};
use crate::counts::{CountModelSpec, NEG_BINOMIAL, POISSON};
use crate::error::{Error, Result};
use crate::features::{count_summary, project_traces, PcaBasis};

/// A family of competing simulators with priors, seen through its summary
/// statistics.
pub trait SimulationModel: Sync {
    fn model_prior(&self) -> Vec<f64>;

    fn sample_params(&self, model: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>>;

    /// Log prior density of `params` under `model`; `-∞` outside the support.
    fn ln_prior(&self, model: usize, params: &[f64]) -> f64;

    fn simulate_summary(&self, model: usize, params: &[f64], rng: &mut dyn rand::RngCore) -> Result<Vec<f64>>;

    fn n_models(&self) -> usize {
        self.model_prior().len()
    }

    fn sample_model(&self, rng: &mut dyn rand::RngCore) -> usize {
        let prior = self.model_prior();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        for (m, &p) in prior.iter().enumerate() {
            acc += p;
            if u < acc {
                return m;
            }
        }
        prior.iter().rposition(|&p| p > 0.0).unwrap_or(0)
    }
}

impl SimulationModel for CountModelSpec {
    fn model_prior(&self) -> Vec<f64> {
        self.model_prior.to_vec()
    }

    fn sample_params(&self, model: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        CountModelSpec::sample_params(self, model, rng)
    }

    fn ln_prior(&self, model: usize, params: &[f64]) -> f64 {
        if params.iter().any(|&v| !(v > 0.0)) {
            return f64::NEG_INFINITY;
        }
        match (model, params) {
            (POISSON, [l]) => self.poisson_rate_prior.ln_pdf(*l),
            (NEG_BINOMIAL, [k, t]) => self.nb_shape_prior.ln_pdf(*k) + self.nb_scale_prior.ln_pdf(*t),
            _ => f64::NEG_INFINITY,
        }
    }

    fn simulate_summary(&self, model: usize, params: &[f64], rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        Ok(count_summary(&self.simulate(model, params, rng)?)?.to_vec())
    }
}

/// Channel models observed through PCA summaries of their clamp responses.
#[derive(Clone, Debug)]
pub struct ChannelProblem {
    pub prior: ChannelPrior,
    pub protocols: Vec<VoltageProtocol>,
    pub basis: PcaBasis,
}

impl SimulationModel for ChannelProblem {
    fn model_prior(&self) -> Vec<f64> {
        self.prior.model_prior.to_vec()
    }

    fn sample_params(&self, model: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        Ok(self.prior.sample_params(model, rng))
    }

    fn ln_prior(&self, model: usize, params: &[f64]) -> f64 {
        let bounds = self.prior.bounds(model);
        if params.len() != bounds.len() || params.iter().zip(&bounds).any(|(v, (lo, hi))| v < lo || v > hi) {
            return f64::NEG_INFINITY;
        }
        -bounds.iter().map(|(lo, hi)| (hi - lo).ln()).sum::<f64>()
    }

    fn simulate_summary(&self, model: usize, params: &[f64], _rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
        let traces = simulate_clamp(&self.prior.channel(model, params)?, &self.protocols)?;
        project_traces(&traces, &self.basis)
    }
}

/// One row of a method-comparison table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: String,
    pub test_point: usize,
    /// Estimated posterior probability per model; `None` when undefined.
    pub estimate: Option<Vec<f64>>,
    pub budget: usize,
    pub seed: u64,
}

/// Writes rows as CSV with one `p_model<i>` column per model. Undefined
/// estimates are left empty.
pub fn write_results_csv(path: &Path, rows: &[ResultRow], n_models: usize) -> Result<()> {
    let mut out = String::from("method,test_point");
    for m in 0..n_models {
        out.push_str(&format!(",p_model{m}"));
    }
    out.push_str(",budget,seed\n");
    for r in rows {
        out.push_str(&format!("{},{}", r.method, r.test_point));
        match &r.estimate {
            Some(p) if p.len() == n_models => p.iter().for_each(|v| out.push_str(&format!(",{v}"))),
            Some(_) => return Err(Error::Input("estimate length does not match the model count".into())),
            None => (0..n_models).for_each(|_| out.push(',')),
        }
        out.push_str(&format!(",{},{}\n", r.budget, r.seed));
    }
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(out.as_bytes()).map_err(|e| Error::io(path, e))
}

/// Euclidean distance.
pub fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

#[cfg(test)]
pub(crate) mod toy {
    use super::*;
    use rand_distr::StandardNormal;

    /// `m ∈ {0, 1}`, `μ ~ N(0, 1)`, summary `μ + shift_m + σ ε` (2-D).
    pub struct Gaussians {
        pub prior: Vec<f64>,
        pub shift: [f64; 2],
        pub noise: f64,
    }

    impl SimulationModel for Gaussians {
        fn model_prior(&self) -> Vec<f64> {
            self.prior.clone()
        }
        fn sample_params(&self, _m: usize, rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
            Ok(vec![rng.sample(StandardNormal)])
        }
        fn ln_prior(&self, _m: usize, p: &[f64]) -> f64 {
            -0.5 * p[0] * p[0] - crate::special::LN_SQRT_2PI
        }
        fn simulate_summary(&self, m: usize, p: &[f64], rng: &mut dyn rand::RngCore) -> Result<Vec<f64>> {
            let a: f64 = rng.sample(StandardNormal);
            let b: f64 = rng.sample(StandardNormal);
            Ok(vec![p[0] + self.shift[m] + self.noise * a, self.noise * b])
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_layout() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("r.csv");
        let rows = vec![
            ResultRow { method: "rejection".into(), test_point: 0, estimate: Some(vec![0.25, 0.75]), budget: 10, seed: 3 },
            ResultRow { method: "smc".into(), test_point: 1, estimate: None, budget: 10, seed: 3 },
        ];
        write_results_csv(&path, &rows, 2).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text, "method,test_point,p_model0,p_model1,budget,seed\nrejection,0,0.25,0.75,10,3\nsmc,1,,,10,3\n");
    }

    #[test]
    fn count_prior_support() {
        let spec = CountModelSpec::scenario(crate::counts::Scenario::Easy, [0.5, 0.5], 10).unwrap();
        assert_eq!(spec.ln_prior(POISSON, &[-1.0]), f64::NEG_INFINITY);
        assert!(spec.ln_prior(NEG_BINOMIAL, &[20.0, 1.0]).is_finite());
    }
}
