//! Poisson and negative-binomial count simulators with Gamma hyperpriors.
//!
//! The negative-binomial model is sampled as a Poisson-Gamma mixture: each
//! count gets its own rate `λᵢ ~ Gamma(k, θ)` followed by `xᵢ ~ Poisson(λᵢ)`.
//! Comparison difficulty is controlled through the NB shape hyperprior `k₂`
//! while keeping the expected sample mean of both models equal.

use rand::Rng;
use rand_distr::{Distribution, Gamma, Poisson};
use serde::{Deserialize, Serialize};

use crate::dataset::LabeledSample;
use crate::error::{Error, Result};
use crate::features::count_summary;
use crate::par::{stream, Exec};
use crate::special;

pub const POISSON: usize = 0;
pub const NEG_BINOMIAL: usize = 1;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    pub shape: f64,
    pub scale: f64,
}

impl GammaParams {
    pub fn new(shape: f64, scale: f64) -> Result<Self> {
        let p = GammaParams { shape, scale };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.shape > 0.0 && self.shape.is_finite()) {
            return Err(Error::Domain(format!("gamma shape must be positive, got {}", self.shape)));
        }
        if !(self.scale > 0.0 && self.scale.is_finite()) {
            return Err(Error::Domain(format!("gamma scale must be positive, got {}", self.scale)));
        }
        Ok(())
    }

    pub fn mean(&self) -> f64 {
        self.shape * self.scale
    }

    pub fn variance(&self) -> f64 {
        self.shape * self.scale * self.scale
    }

    pub fn ln_pdf(&self, x: f64) -> f64 {
        special::gamma_ln_pdf(self.shape, self.scale, x)
    }

    pub fn cdf(&self, x: f64) -> f64 {
        special::gamma_cdf(self.shape, self.scale, x)
    }

    pub fn quantile(&self, p: f64) -> f64 {
        special::gamma_quantile(self.shape, self.scale, p)
    }
}

pub fn sample_gamma<R: Rng + ?Sized>(p: &GammaParams, rng: &mut R) -> Result<f64> {
    p.validate()?;
    let dist = Gamma::new(p.shape, p.scale).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(dist.sample(rng))
}

fn poisson_draw<R: Rng + ?Sized>(lambda: f64, rng: &mut R) -> Result<u32> {
    if lambda == 0.0 {
        return Ok(0);
    }
    // rand_distr switches between Knuth's multiplication method (small λ)
    // and a transformed-rejection sampler (large λ).
    let dist = Poisson::new(lambda).map_err(|e| Error::Domain(format!("poisson rate {lambda}: {e}")))?;
    let x: f64 = dist.sample(rng);
    Ok(x.min(u32::MAX as f64) as u32)
}

pub fn simulate_poisson<R: Rng + ?Sized>(lambda: f64, n_counts: usize, rng: &mut R) -> Result<Vec<u32>> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::Domain(format!("poisson rate must be non-negative, got {lambda}")));
    }
    (0..n_counts).map(|_| poisson_draw(lambda, rng)).collect()
}

/// Negative-binomial counts with `r = k`, `p = θ/(1+θ)`, drawn count by count
/// from the Poisson-Gamma mixture.
pub fn simulate_nb<R: Rng + ?Sized>(k: f64, theta: f64, n_counts: usize, rng: &mut R) -> Result<Vec<u32>> {
    let rate = GammaParams::new(k, theta)?;
    let dist = Gamma::new(rate.shape, rate.scale).map_err(|e| Error::Domain(e.to_string()))?;
    (0..n_counts)
        .map(|_| {
            let lambda: f64 = dist.sample(rng);
            poisson_draw(lambda, rng)
        })
        .collect()
}

/// Hyperparameters that are held fixed while the NB shape hyperprior `k₂` is varied.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DifficultyHyper {
    pub theta1: f64,
    pub theta2: f64,
    pub k3: f64,
    pub theta3: f64,
}

impl Default for DifficultyHyper {
    fn default() -> Self {
        DifficultyHyper {
            theta1: 1.0,
            theta2: 1.0,
            k3: 1.0,
            theta3: 1.0,
        }
    }
}

/// Returns the Poisson prior shape `k₁` that equalizes the expected means of the
/// two models, together with the expected NB variance `E[k(θ² + θ)]`.
pub fn scale_difficulty(k2: f64, theta2: f64, k3: f64, theta3: f64, theta1: f64) -> Result<(f64, f64)> {
    for (name, v) in [("k2", k2), ("theta2", theta2), ("k3", k3), ("theta3", theta3), ("theta1", theta1)] {
        if !(v > 0.0 && v.is_finite()) {
            return Err(Error::Domain(format!("{name} must be positive, got {v}")));
        }
    }
    let k1 = k2 * theta2 * k3 * theta3 / theta1;
    let second_moment = k3 * (k3 + 1.0) * theta3 * theta3;
    let expected_variance = k2 * theta2 * (second_moment + k3 * theta3);
    Ok((k1, expected_variance))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    /// Strong overdispersion, `k₂ = 20`.
    Easy,
    /// Weak overdispersion, `k₂ = 1`.
    Difficult,
}

impl Scenario {
    pub fn k2(self) -> f64 {
        match self {
            Scenario::Easy => 20.0,
            Scenario::Difficult => 1.0,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Scenario::Easy => "easy",
            Scenario::Difficult => "difficult",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CountModelSpec {
    /// Prior probabilities of (Poisson, NB).
    pub model_prior: [f64; 2],
    pub poisson_rate_prior: GammaParams,
    pub nb_shape_prior: GammaParams,
    pub nb_scale_prior: GammaParams,
    pub counts_per_sample: usize,
}

impl CountModelSpec {
    /// Hyperpriors for a difficulty scenario with equal expected means.
    pub fn for_k2(k2: f64, hyper: DifficultyHyper, model_prior: [f64; 2], counts_per_sample: usize) -> Result<Self> {
        let (k1, _) = scale_difficulty(k2, hyper.theta2, hyper.k3, hyper.theta3, hyper.theta1)?;
        let spec = CountModelSpec {
            model_prior,
            poisson_rate_prior: GammaParams::new(k1, hyper.theta1)?,
            nb_shape_prior: GammaParams::new(k2, hyper.theta2)?,
            nb_scale_prior: GammaParams::new(hyper.k3, hyper.theta3)?,
            counts_per_sample,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn scenario(scenario: Scenario, model_prior: [f64; 2], counts_per_sample: usize) -> Result<Self> {
        Self::for_k2(scenario.k2(), DifficultyHyper::default(), model_prior, counts_per_sample)
    }

    pub fn validate(&self) -> Result<()> {
        let [a, b] = self.model_prior;
        if !(a >= 0.0 && b >= 0.0) || ((a + b) - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("model prior must be a probability vector, got {:?}", self.model_prior)));
        }
        self.poisson_rate_prior.validate()?;
        self.nb_shape_prior.validate()?;
        self.nb_scale_prior.validate()?;
        if self.counts_per_sample < 2 {
            return Err(Error::Domain("at least two counts per sample are required".into()));
        }
        Ok(())
    }

    pub fn sample_model<R: Rng + ?Sized>(&self, rng: &mut R) -> usize {
        let u: f64 = rng.random();
        if u < self.model_prior[POISSON] {
            POISSON
        } else {
            NEG_BINOMIAL
        }
    }

    pub fn sample_params<R: Rng + ?Sized>(&self, model: usize, rng: &mut R) -> Result<Vec<f64>> {
        Ok(match model {
            POISSON => vec![sample_gamma(&self.poisson_rate_prior, rng)?],
            NEG_BINOMIAL => {
                let k = sample_gamma(&self.nb_shape_prior, rng)?;
                let theta = sample_gamma(&self.nb_scale_prior, rng)?;
                vec![k, theta]
            }
            _ => return Err(Error::Input(format!("unknown count model index {model}"))),
        })
    }

    pub fn simulate<R: Rng + ?Sized>(&self, model: usize, params: &[f64], rng: &mut R) -> Result<Vec<u32>> {
        let c = self.counts_per_sample;
        match (model, params) {
            (POISSON, [lambda]) => simulate_poisson(*lambda, c, rng),
            (NEG_BINOMIAL, [k, theta]) => {
                // A shape draw can underflow to zero for tiny k₂; the rate is then zero.
                if *k <= 0.0 || *theta <= 0.0 {
                    Ok(vec![0; c])
                } else {
                    simulate_nb(*k, *theta, c, rng)
                }
            }
            _ => Err(Error::Input(format!(
                "model {model} does not take {} parameters",
                params.len()
            ))),
        }
    }

    /// One joint draw `(m, θ, x, s(x))`, optionally with the model fixed.
    pub fn draw<R: Rng + ?Sized>(&self, model: Option<usize>, rng: &mut R) -> Result<LabeledSample> {
        let m = model.unwrap_or_else(|| self.sample_model(rng));
        let params = self.sample_params(m, rng)?;
        let counts = self.simulate(m, &params, rng)?;
        let summary = count_summary(&counts)?.to_vec();
        Ok(LabeledSample {
            model_index: m,
            params,
            counts,
            summary,
        })
    }
}

pub fn generate_count_dataset(spec: &CountModelSpec, n: usize, seed: u64) -> Result<Vec<LabeledSample>> {
    generate_count_dataset_with(spec, n, seed, Exec::default())
}

pub fn generate_count_dataset_with(
    spec: &CountModelSpec,
    n: usize,
    seed: u64,
    exec: Exec,
) -> Result<Vec<LabeledSample>> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Input("dataset size must be at least 1".into()));
    }
    exec.try_map(n, |i| spec.draw(None, &mut stream(seed, i as u64)))
}
