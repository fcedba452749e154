use nalgebra::{DMatrix, DVector};
use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::{distance, SimulationModel};
use crate::error::{Error, Result};
use crate::features::ZScaler;
use crate::par::{stream, Exec};
use crate::special::LN_SQRT_2PI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SmcConfig {
    pub rounds: usize,
    pub particles: usize,
    /// Tolerance of the first round; later rounds use the median accepted
    /// distance of the previous round.
    pub initial_epsilon: f64,
    /// Perturbation covariance is this multiple of the weighted particle
    /// covariance.
    pub kernel_scale: f64,
    /// Stop when the effective sample size drops below this.
    pub min_ess: f64,
    /// Total simulation budget across rounds.
    pub max_simulations: usize,
    /// Candidates simulated per parallel batch.
    pub batch: usize,
    pub seed: u64,
}

impl Default for SmcConfig {
    fn default() -> Self {
        SmcConfig {
            rounds: 4,
            particles: 1000,
            initial_epsilon: f64::INFINITY,
            kernel_scale: 2.0,
            min_ess: 5.0,
            max_simulations: 1_000_000,
            batch: 256,
            seed: 0,
        }
    }
}

impl SmcConfig {
    pub fn validate(&self) -> Result<()> {
        if self.rounds == 0 || self.particles == 0 || self.batch == 0 || self.max_simulations == 0 {
            return Err(Error::Config("SMC rounds, particles, batch and budget must be positive".into()));
        }
        if !(self.initial_epsilon >= 0.0) || !(self.kernel_scale > 0.0) {
            return Err(Error::Config("SMC tolerance must be non-negative and kernel scale positive".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmcResult {
    /// Tolerance of every completed round.
    pub epsilons: Vec<f64>,
    /// Weighted model frequencies after every completed round.
    pub round_estimates: Vec<Vec<f64>>,
    pub models: Vec<usize>,
    pub params: Vec<Vec<f64>>,
    /// Normalized importance weights of the final population.
    pub weights: Vec<f64>,
    pub simulations: usize,
    /// Effective sample size fell below the configured minimum.
    pub degenerate: bool,
    /// The budget ran out before the configured rounds completed.
    pub budget_exhausted: bool,
    /// The tolerance could not be decreased further.
    pub stalled: bool,
}

impl SmcResult {
    pub fn estimate(&self) -> Option<&[f64]> {
        self.round_estimates.last().map(Vec::as_slice)
    }
}

struct Particle {
    model: usize,
    params: Vec<f64>,
    distance: f64,
    weight: f64,
}

/// Gaussian perturbation kernel for one model's parameters.
struct Kernel {
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl Kernel {
    fn fit(points: &[(&[f64], f64)], scale: f64) -> Self {
        let d = points[0].0.len();
        let total: f64 = points.iter().map(|p| p.1).sum();
        let mut mean = DVector::zeros(d);
        for (x, w) in points {
            mean += DVector::from_column_slice(x) * (w / total);
        }
        let mut cov = DMatrix::zeros(d, d);
        for (x, w) in points {
            let c = DVector::from_column_slice(x) - &mean;
            cov += &c * c.transpose() * (w / total);
        }
        cov *= scale;
        let floor = mean.iter().map(|m| (1e-6 * (m.abs() + 1.0)).powi(2)).collect::<Vec<_>>();
        for i in 0..d {
            cov[(i, i)] = cov[(i, i)].max(floor[i]);
        }
        let chol = match cov.clone().cholesky() {
            Some(c) => c.l(),
            None => DMatrix::from_diagonal(&cov.diagonal().map(f64::sqrt)),
        };
        let log_norm = -(0..d).map(|i| chol[(i, i)].ln()).sum::<f64>() - d as f64 * LN_SQRT_2PI;
        Kernel { chol, log_norm }
    }

    fn perturb(&self, x: &[f64], rng: &mut dyn rand::RngCore) -> Vec<f64> {
        let d = x.len();
        let e = DVector::from_fn(d, |_, _| rng.sample::<f64, _>(StandardNormal));
        let step = &self.chol * e;
        x.iter().zip(step.iter()).map(|(a, b)| a + b).collect()
    }

    fn ln_pdf(&self, x: &[f64], center: &[f64]) -> f64 {
        let diff = DVector::from_iterator(x.len(), x.iter().zip(center).map(|(a, b)| a - b));
        let z = self.chol.solve_lower_triangular(&diff).expect("positive diagonal");
        self.log_norm - 0.5 * z.norm_squared()
    }
}

enum Outcome {
    OutsidePrior,
    Simulated { model: usize, params: Vec<f64>, distance: f64, ln_prior: f64 },
}

/// SMC-ABC for model comparison with the model index as a categorical
/// particle coordinate.
pub fn smc_models<S: SimulationModel + ?Sized>(
    sim: &S,
    observed: &[f64],
    scaler: &ZScaler,
    cfg: &SmcConfig,
    exec: Exec,
) -> Result<SmcResult> {
    cfg.validate()?;
    let z_obs = scaler.apply(observed);
    let model_prior = sim.model_prior();
    let n_models = model_prior.len();
    let mut res = SmcResult {
        epsilons: vec![],
        round_estimates: vec![],
        models: vec![],
        params: vec![],
        weights: vec![],
        simulations: 0,
        degenerate: false,
        budget_exhausted: false,
        stalled: false,
    };
    let mut population: Vec<Particle> = Vec::new();
    let mut eps = cfg.initial_epsilon;
    for round in 0..cfg.rounds {
        if round > 0 {
            let mut d: Vec<f64> = population.iter().map(|p| p.distance).collect();
            d.sort_by(f64::total_cmp);
            let median = if d.len() % 2 == 1 { d[d.len() / 2] } else { 0.5 * (d[d.len() / 2 - 1] + d[d.len() / 2]) };
            if !(median < eps) {
                res.stalled = true;
                break;
            }
            eps = median;
        }
        let kernels: Vec<Option<Kernel>> = (0..n_models)
            .map(|m| {
                let pts: Vec<(&[f64], f64)> =
                    population.iter().filter(|p| p.model == m).map(|p| (p.params.as_slice(), p.weight)).collect();
                (!pts.is_empty()).then(|| Kernel::fit(&pts, cfg.kernel_scale))
            })
            .collect();
        let cumulative: Vec<f64> = population
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p.weight;
                Some(*acc)
            })
            .collect();
        let propose = |rng: &mut dyn rand::RngCore| -> Result<Outcome> {
            let (model, params) = if round == 0 {
                let m = sim.sample_model(rng);
                (m, sim.sample_params(m, rng)?)
            } else {
                let u: f64 = rng.random::<f64>() * cumulative[cumulative.len() - 1];
                let j = cumulative.partition_point(|&c| c <= u).min(population.len() - 1);
                let p = &population[j];
                let k = kernels[p.model].as_ref().expect("model has particles");
                (p.model, k.perturb(&p.params, rng))
            };
            let ln_prior = sim.ln_prior(model, &params);
            if ln_prior == f64::NEG_INFINITY {
                return Ok(Outcome::OutsidePrior);
            }
            let s = sim.simulate_summary(model, &params, rng)?;
            Ok(Outcome::Simulated { model, params, distance: distance(&scaler.apply(&s), &z_obs), ln_prior })
        };

        let mut next: Vec<Particle> = Vec::with_capacity(cfg.particles);
        let mut used = 0usize;
        let mut candidate = 0u64;
        'fill: while next.len() < cfg.particles {
            if res.simulations + used >= cfg.max_simulations {
                res.budget_exhausted = true;
                break;
            }
            let base = candidate;
            let outcomes = exec.try_map(cfg.batch, |i| propose(&mut stream(cfg.seed, ((round as u64) << 40) + base + i as u64)))?;
            candidate += cfg.batch as u64;
            for o in outcomes {
                let Outcome::Simulated { model, params, distance, ln_prior } = o else { continue };
                used += 1;
                if distance <= eps {
                    let weight = if round == 0 {
                        1.0
                    } else {
                        let k = kernels[model].as_ref().expect("model has particles");
                        let terms: Vec<f64> = population
                            .iter()
                            .filter(|p| p.model == model)
                            .map(|p| p.weight.ln() + k.ln_pdf(&params, &p.params))
                            .collect();
                        (model_prior[model].ln() + ln_prior - crate::special::log_sum_exp(&terms)).exp()
                    };
                    next.push(Particle { model, params, distance, weight });
                }
                if next.len() == cfg.particles {
                    break 'fill;
                }
                if res.simulations + used >= cfg.max_simulations {
                    res.budget_exhausted = true;
                    break 'fill;
                }
            }
        }
        res.simulations += used;
        if next.len() < cfg.particles {
            break;
        }
        let total: f64 = next.iter().map(|p| p.weight).sum();
        next.iter_mut().for_each(|p| p.weight /= total);
        let mut est = vec![0.0; n_models];
        next.iter().for_each(|p| est[p.model] += p.weight);
        res.epsilons.push(eps);
        res.round_estimates.push(est);
        population = next;
        let ess = 1.0 / population.iter().map(|p| p.weight * p.weight).sum::<f64>();
        if ess < cfg.min_ess {
            res.degenerate = true;
            break;
        }
    }
    res.models = population.iter().map(|p| p.model).collect();
    res.params = population.iter().map(|p| p.params.clone()).collect();
    res.weights = population.iter().map(|p| p.weight).collect();
    Ok(res)
}
