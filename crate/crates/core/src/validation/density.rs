use rand::Rng;

use crate::counts::{sample_gamma, GammaParams};
use crate::mdn::MoGPosterior;
use crate::special::bisect;

/// A one-dimensional distribution that can be evaluated, inverted and
/// sampled.
pub trait Density1D: Sync {
    fn ln_pdf(&self, x: f64) -> f64;

    fn cdf(&self, x: f64) -> f64;

    /// Interval outside which the mass is negligible, used for brackets.
    fn bracket(&self) -> (f64, f64);

    fn sample(&self, rng: &mut dyn rand::RngCore) -> f64 {
        self.quantile(rng.random())
    }

    /// Inverse CDF by bisection on [`Density1D::bracket`].
    fn quantile(&self, p: f64) -> f64 {
        let (lo, hi) = self.bracket();
        bisect(|x| self.cdf(x), p, lo, hi, 1e-10 * (hi - lo))
    }
}

impl Density1D for GammaParams {
    fn ln_pdf(&self, x: f64) -> f64 {
        GammaParams::ln_pdf(self, x)
    }

    fn cdf(&self, x: f64) -> f64 {
        GammaParams::cdf(self, x)
    }

    fn bracket(&self) -> (f64, f64) {
        (0.0, GammaParams::quantile(self, 1.0 - 1e-12))
    }

    fn sample(&self, rng: &mut dyn rand::RngCore) -> f64 {
        sample_gamma(self, rng).expect("validated gamma parameters")
    }

    fn quantile(&self, p: f64) -> f64 {
        GammaParams::quantile(self, p)
    }
}

/// One-dimensional marginal of a mixture of Gaussians.
#[derive(Clone, Debug)]
pub struct MogMarginal {
    q: MoGPosterior,
    index: usize,
    means: Vec<f64>,
    sds: Vec<f64>,
}

impl MogMarginal {
    pub fn new(q: &MoGPosterior, index: usize) -> Self {
        let d = q.dim();
        MogMarginal {
            means: q.means.iter().map(|m| m[index]).collect(),
            sds: (0..q.n_components()).map(|k| q.component_covariance(k)[index * d + index].sqrt()).collect(),
            q: q.clone(),
            index,
        }
    }
}

impl Density1D for MogMarginal {
    fn ln_pdf(&self, x: f64) -> f64 {
        let terms: Vec<f64> = self
            .q
            .weights
            .iter()
            .zip(self.means.iter().zip(&self.sds))
            .map(|(a, (m, s))| a.ln() - 0.5 * ((x - m) / s).powi(2) - s.ln() - crate::special::LN_SQRT_2PI)
            .collect();
        crate::special::log_sum_exp(&terms)
    }

    fn cdf(&self, x: f64) -> f64 {
        self.q.marginal_cdf(self.index, x)
    }

    fn bracket(&self) -> (f64, f64) {
        let d = self.q.dim();
        let mu = self.q.mean()[self.index];
        let sd = self.q.covariance()[self.index * d + self.index].sqrt();
        (mu - 10.0 * sd, mu + 10.0 * sd)
    }

    fn sample(&self, rng: &mut dyn rand::RngCore) -> f64 {
        self.q.sample(rng)[self.index]
    }

    fn quantile(&self, p: f64) -> f64 {
        self.q.marginal_quantile(self.index, p)
    }
}
