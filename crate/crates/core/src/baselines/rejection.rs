use serde::{Deserialize, Serialize};

use super::{distance, SimulationModel};
use crate::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::features::ZScaler;
use crate::par::{stream, Exec};

/// Acceptance rule on the distance between z-scored summaries.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "value", rename_all = "snake_case")]
pub enum Tolerance {
    /// Accept every simulation with distance `≤ ε`.
    Absolute(f64),
    /// Accept the closest `⌈q·N⌉` simulations.
    Quantile(f64),
}

impl Tolerance {
    fn validate(&self) -> Result<()> {
        match *self {
            Tolerance::Absolute(e) if e >= 0.0 => Ok(()),
            Tolerance::Quantile(q) if q > 0.0 && q <= 1.0 => Ok(()),
            t => Err(Error::Config(format!("invalid tolerance {t:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RejectionConfig {
    pub tolerance: Tolerance,
    pub n_sims: usize,
    pub seed: u64,
}

impl RejectionConfig {
    pub fn validate(&self) -> Result<()> {
        self.tolerance.validate()?;
        if self.n_sims == 0 {
            return Err(Error::Config("rejection needs at least one simulation".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParamRejection {
    pub accepted: Vec<Vec<f64>>,
    pub acceptance_rate: f64,
    /// Set when nothing was accepted.
    pub empty: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelRejection {
    /// Accepted fraction per model; `None` when nothing was accepted.
    pub estimate: Option<Vec<f64>>,
    pub n_accepted: usize,
    pub acceptance_rate: f64,
}

/// Simulations `(m, θ, s)` from the prior with z-scored summaries, reusable
/// across observations.
#[derive(Clone, Debug, PartialEq)]
pub struct ReferenceTable {
    pub models: Vec<usize>,
    pub params: Vec<Vec<f64>>,
    pub summaries: Vec<Vec<f64>>,
    pub scaler: ZScaler,
    pub n_models: usize,
}

impl ReferenceTable {
    /// `n` prior-predictive simulations; with `model` set, only that model is
    /// simulated.
    pub fn simulate<S: SimulationModel + ?Sized>(
        sim: &S,
        model: Option<usize>,
        n: usize,
        scaler: ZScaler,
        seed: u64,
        exec: Exec,
    ) -> Result<Self> {
        let rows = exec.try_map(n, |i| {
            let mut rng = stream(seed, i as u64);
            let m = model.unwrap_or_else(|| sim.sample_model(&mut rng));
            let params = sim.sample_params(m, &mut rng)?;
            let s = sim.simulate_summary(m, &params, &mut rng)?;
            Ok::<_, Error>((m, params, scaler.apply(&s)))
        })?;
        let mut t = ReferenceTable { models: vec![], params: vec![], summaries: vec![], scaler, n_models: sim.n_models() };
        for (m, p, s) in rows {
            t.models.push(m);
            t.params.push(p);
            t.summaries.push(s);
        }
        Ok(t)
    }

    /// Wraps existing labeled simulations, e.g. a network's training set.
    pub fn from_samples(samples: &[LabeledSample], scaler: ZScaler, n_models: usize) -> Self {
        ReferenceTable {
            models: samples.iter().map(|s| s.model_index).collect(),
            params: samples.iter().map(|s| s.params.clone()).collect(),
            summaries: samples.iter().map(|s| scaler.apply(&s.summary)).collect(),
            scaler,
            n_models,
        }
    }

    pub fn len(&self) -> usize {
        self.models.len()
    }

    pub fn is_empty(&self) -> bool {
        self.models.is_empty()
    }

    pub fn distances(&self, observed: &[f64]) -> Vec<f64> {
        let z = self.scaler.apply(observed);
        self.summaries.iter().map(|s| distance(s, &z)).collect()
    }

    /// Indices of accepted simulations, in table order.
    pub fn accept(&self, observed: &[f64], tol: Tolerance) -> Vec<usize> {
        let d = self.distances(observed);
        match tol {
            Tolerance::Absolute(eps) => (0..d.len()).filter(|&i| d[i] <= eps).collect(),
            Tolerance::Quantile(q) => {
                let k = ((q * d.len() as f64).ceil() as usize).clamp(1, d.len());
                let mut order: Vec<usize> = (0..d.len()).collect();
                order.sort_by(|&a, &b| d[a].total_cmp(&d[b]).then(a.cmp(&b)));
                let mut keep = order[..k].to_vec();
                keep.sort_unstable();
                keep
            }
        }
    }

    pub fn model_estimate(&self, observed: &[f64], tol: Tolerance) -> ModelRejection {
        let acc = self.accept(observed, tol);
        let n = acc.len();
        let estimate = (n > 0).then(|| {
            let mut c = vec![0.0; self.n_models];
            acc.iter().for_each(|&i| c[self.models[i]] += 1.0);
            c.into_iter().map(|v| v / n as f64).collect()
        });
        ModelRejection { estimate, n_accepted: n, acceptance_rate: n as f64 / self.len() as f64 }
    }
}

/// Summary scaler fitted on a prior-predictive pilot run.
pub fn pilot_scaler<S: SimulationModel + ?Sized>(sim: &S, n: usize, seed: u64, exec: Exec) -> Result<ZScaler> {
    let rows = exec.try_map(n, |i| {
        let mut rng = stream(seed, i as u64);
        let m = sim.sample_model(&mut rng);
        let params = sim.sample_params(m, &mut rng)?;
        sim.simulate_summary(m, &params, &mut rng)
    })?;
    ZScaler::fit(&rows)
}

/// Basic rejection sampler for the parameters of one model.
pub fn reject_params<S: SimulationModel + ?Sized>(
    sim: &S,
    model: usize,
    observed: &[f64],
    scaler: &ZScaler,
    cfg: &RejectionConfig,
    exec: Exec,
) -> Result<ParamRejection> {
    cfg.validate()?;
    let table = ReferenceTable::simulate(sim, Some(model), cfg.n_sims, scaler.clone(), cfg.seed, exec)?;
    let acc = table.accept(observed, cfg.tolerance);
    Ok(ParamRejection {
        empty: acc.is_empty(),
        acceptance_rate: acc.len() as f64 / table.len() as f64,
        accepted: acc.into_iter().map(|i| table.params[i].clone()).collect(),
    })
}

/// Basic rejection sampler for model comparison: the posterior of each model
/// is its share of the accepted simulations.
pub fn reject_models<S: SimulationModel + ?Sized>(
    sim: &S,
    observed: &[f64],
    scaler: &ZScaler,
    cfg: &RejectionConfig,
    exec: Exec,
) -> Result<ModelRejection> {
    cfg.validate()?;
    let table = ReferenceTable::simulate(sim, None, cfg.n_sims, scaler.clone(), cfg.seed, exec)?;
    Ok(table.model_estimate(observed, cfg.tolerance))
}
