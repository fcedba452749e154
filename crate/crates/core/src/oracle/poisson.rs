use crate::counts::GammaParams;
use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_gamma};

/// Log marginal likelihood of `x` under a Poisson rate with Gamma prior:
/// `Γ(k+Σx)/(Γ(k) θᵏ) · (N + 1/θ)^-(k+Σx) / Πxᵢ!`.
pub fn poisson_log_evidence(x: &[u32], prior: &GammaParams) -> Result<f64> {
    prior.validate()?;
    if x.is_empty() {
        return Err(Error::Input("evidence needs at least one count".into()));
    }
    let (k, theta) = (prior.shape, prior.scale);
    let n = x.len() as f64;
    let s: f64 = x.iter().map(|&v| f64::from(v)).sum();
    let log_fact: f64 = x.iter().map(|&v| ln_factorial(u64::from(v))).sum();
    Ok(ln_gamma(k + s) - ln_gamma(k) - k * theta.ln() - (k + s) * (n + 1.0 / theta).ln() - log_fact)
}

/// Conjugate posterior `Gamma(k + Σx, (N + 1/θ)⁻¹)`.
pub fn poisson_posterior(x: &[u32], prior: &GammaParams) -> Result<GammaParams> {
    prior.validate()?;
    if x.is_empty() {
        return Ok(*prior);
    }
    let s: f64 = x.iter().map(|&v| f64::from(v)).sum();
    GammaParams::new(prior.shape + s, 1.0 / (x.len() as f64 + 1.0 / prior.scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn g(k: f64, s: f64) -> GammaParams {
        GammaParams::new(k, s).unwrap()
    }

    #[test]
    fn closed_form_examples() {
        let p = g(1.0, 1.0);
        assert!((poisson_log_evidence(&[1], &p).unwrap() - 0.25f64.ln()).abs() < 1e-14);
        assert!((poisson_log_evidence(&[0], &p).unwrap() - 0.5f64.ln()).abs() < 1e-14);
        assert!((poisson_log_evidence(&[0, 0], &p).unwrap() - (1.0f64 / 3.0).ln()).abs() < 1e-14);
        assert!(matches!(poisson_log_evidence(&[], &p), Err(Error::Input(_))));
    }

    #[test]
    fn posterior_examples() {
        let prior = g(2.0, 1.0);
        assert_eq!(poisson_posterior(&[], &prior).unwrap(), prior);
        let post = poisson_posterior(&[3, 1], &prior).unwrap();
        assert_eq!(post.shape, 6.0);
        assert!((post.scale - 1.0 / 3.0).abs() < 1e-15);
        assert!((post.mean() - 2.0).abs() < 1e-14);
    }
}
