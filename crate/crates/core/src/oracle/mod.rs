//! Exact evidences and posteriors for the Poisson vs. negative-binomial
//! comparison.

mod grid;
mod nb;
mod poisson;

pub use grid::{GridConfig, GridPosterior2D};
pub use nb::{nb_grid_posterior, nb_log_evidence, nb_log_likelihood, NbEvidence, NbLikelihood};
pub use poisson::{poisson_log_evidence, poisson_posterior};

use crate::counts::{CountModelSpec, NEG_BINOMIAL, POISSON};
use crate::error::Result;

/// `p(mᵢ | x) ∝ p(x | mᵢ) p(mᵢ)`, normalized with log-sum-exp. Models with
/// zero prior mass get probability exactly zero.
pub fn posterior_from_log_evidence(log_evidence: &[f64], prior: &[f64]) -> Vec<f64> {
    let joint: Vec<f64> = log_evidence
        .iter()
        .zip(prior)
        .map(|(&le, &p)| if p > 0.0 { le + p.ln() } else { f64::NEG_INFINITY })
        .collect();
    let max = joint.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let w: Vec<f64> = joint.iter().map(|&j| (j - max).exp()).collect();
    let mut sorted = w.clone();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
    w.into_iter().map(|v| v / total).collect()
}

/// Exact model posterior `(p(Poisson | x), p(NB | x))`.
pub fn model_posterior_exact(x: &[u32], spec: &CountModelSpec, grid: &GridConfig) -> Result<Vec<f64>> {
    spec.validate()?;
    let mut log_ev = [f64::NEG_INFINITY; 2];
    if spec.model_prior[POISSON] > 0.0 {
        log_ev[POISSON] = poisson_log_evidence(x, &spec.poisson_rate_prior)?;
    }
    if spec.model_prior[NEG_BINOMIAL] > 0.0 {
        log_ev[NEG_BINOMIAL] = nb_log_evidence(x, &spec.nb_shape_prior, &spec.nb_scale_prior, grid)?.log_evidence;
    }
    Ok(posterior_from_log_evidence(&log_ev, &spec.model_prior))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::counts::Scenario;
    use proptest::prelude::*;

    #[test]
    fn symmetric_and_degenerate_priors() {
        assert_eq!(posterior_from_log_evidence(&[-3.0, -3.0], &[0.5, 0.5]), vec![0.5, 0.5]);
        assert_eq!(posterior_from_log_evidence(&[-300.0, 5.0], &[1.0, 0.0]), vec![1.0, 0.0]);
        let spec = CountModelSpec::scenario(Scenario::Easy, [1.0, 0.0], 5).unwrap();
        let post = model_posterior_exact(&[30, 1, 0, 44, 2], &spec, &GridConfig::default()).unwrap();
        assert_eq!(post, vec![1.0, 0.0]);
    }

    #[test]
    fn bayes_factor_identity() {
        let spec = CountModelSpec::scenario(Scenario::Difficult, [0.3, 0.7], 6).unwrap();
        let x = [0, 3, 1, 0, 7, 2];
        let grid = GridConfig::default();
        let post = model_posterior_exact(&x, &spec, &grid).unwrap();
        let le_p = poisson_log_evidence(&x, &spec.poisson_rate_prior).unwrap();
        let le_nb = nb_log_evidence(&x, &spec.nb_shape_prior, &spec.nb_scale_prior, &grid).unwrap().log_evidence;
        let bf = (post[0] / post[1]) / (0.3 / 0.7);
        assert!((bf.ln() - (le_p - le_nb)).abs() < 1e-10);
    }

    proptest! {
        #[test]
        fn normalized_and_permutation_equivariant(
            le in prop::collection::vec(-500.0f64..50.0, 4),
            w in prop::collection::vec(0.01f64..1.0, 4),
        ) {
            let mut sorted = w.clone();
    sorted.sort_by(f64::total_cmp);
    let total: f64 = sorted.iter().sum();
            let prior: Vec<f64> = w.iter().map(|v| v / total).collect();
            let post = posterior_from_log_evidence(&le, &prior);
            prop_assert!((post.iter().sum::<f64>() - 1.0).abs() < 1e-14);
            let perm = [2usize, 0, 3, 1];
            let le_p: Vec<f64> = perm.iter().map(|&i| le[i]).collect();
            let pr_p: Vec<f64> = perm.iter().map(|&i| prior[i]).collect();
            let post_p = posterior_from_log_evidence(&le_p, &pr_p);
            for (k, &i) in perm.iter().enumerate() {
                prop_assert_eq!(post_p[k], post[i]);
            }
        }
    }
}
