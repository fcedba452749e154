use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::grid::{adaptive_grid, GridConfig, GridPosterior2D};
use crate::counts::GammaParams;
use crate::error::{Error, Result};
use crate::special::{ln_factorial, ln_gamma};

/// Negative-binomial log-likelihood of a count vector, pre-aggregated over
/// distinct count values so the shape-dependent part costs one pass per `r`.
#[derive(Clone, Debug)]
pub struct NbLikelihood {
    histogram: Vec<(f64, f64)>,
    n: f64,
    sum: f64,
    log_fact: f64,
}

impl NbLikelihood {
    pub fn new(x: &[u32]) -> Self {
        let mut counts: BTreeMap<u32, usize> = BTreeMap::new();
        for &v in x {
            *counts.entry(v).or_default() += 1;
        }
        // Sums run over the sorted histogram so the result does not depend
        // on the order of `x`.
        let histogram: Vec<(f64, f64)> = counts.into_iter().filter(|&(v, _)| v > 0).map(|(v, c)| (f64::from(v), c as f64)).collect();
        NbLikelihood {
            n: x.len() as f64,
            sum: histogram.iter().map(|&(v, c)| v * c).sum(),
            log_fact: histogram.iter().map(|&(v, c)| c * ln_factorial(v as u64)).sum(),
            histogram,
        }
    }

    /// `Σᵢ [ln Γ(xᵢ + r) − ln Γ(r)]`.
    pub fn shape_term(&self, r: f64) -> f64 {
        let lg = ln_gamma(r);
        self.histogram.iter().map(|&(v, c)| c * (ln_gamma(v + r) - lg)).sum()
    }

    /// Log-likelihood given the precomputed shape term and `ln(1−p)`, `ln p`.
    #[inline]
    pub fn eval(&self, shape_term: f64, r: f64, ln_1mp: f64, ln_p: f64) -> f64 {
        let tail = if self.sum > 0.0 { self.sum * ln_p } else { 0.0 };
        shape_term - self.log_fact + self.n * r * ln_1mp + tail
    }

    pub fn ln_lik(&self, r: f64, p: f64) -> f64 {
        self.eval(self.shape_term(r), r, (-p).ln_1p(), p.ln())
    }
}

/// `ln Π NB(xᵢ | r, p)` with `P(x) = Γ(x+r)/(x! Γ(r)) (1−p)^r p^x`.
pub fn nb_log_likelihood(x: &[u32], r: f64, p: f64) -> f64 {
    NbLikelihood::new(x).ln_lik(r, p)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NbEvidence {
    pub log_evidence: f64,
    /// Prior mass inside the integration box.
    pub box_prior_mass: f64,
    /// Set when the box holds less than 99.9% of the prior mass.
    pub low_coverage: bool,
}

fn quantile_box(p: &GammaParams, tail: f64) -> (f64, f64) {
    (p.quantile(tail), p.quantile(1.0 - tail))
}

fn box_mass(tail: f64) -> f64 {
    (1.0 - 2.0 * tail).powi(2)
}

/// Log evidence of the NB model: trapezoid integral over `(ln k, ln θ)` of
/// the likelihood times the hyperprior density and the Jacobian `k·θ`. Log
/// coordinates resolve both the prior tails and the sharp concentration near
/// `k → 0` that weakly informative data produce.
pub fn nb_log_evidence(x: &[u32], shape_prior: &GammaParams, scale_prior: &GammaParams, cfg: &GridConfig) -> Result<NbEvidence> {
    shape_prior.validate()?;
    scale_prior.validate()?;
    cfg.validate()?;
    if x.is_empty() {
        return Err(Error::Input("evidence needs at least one count".into()));
    }
    let lik = NbLikelihood::new(x);
    let log_box = |p: &GammaParams| {
        let (lo, hi) = quantile_box(p, cfg.evidence_tail_mass);
        (lo.ln(), hi.ln())
    };
    let g = adaptive_grid(log_box(shape_prior), log_box(scale_prior), cfg, |u, ws, out| {
        let k = u.exp();
        let st = lik.shape_term(k);
        let prior_k = shape_prior.ln_pdf(k) + u;
        for (o, &w) in out.iter_mut().zip(ws) {
            let theta = w.exp();
            let ln_1pt = theta.ln_1p();
            *o = lik.eval(st, k, -ln_1pt, w - ln_1pt) + prior_k + scale_prior.ln_pdf(theta) + w;
        }
    })?;
    let mass = box_mass(cfg.evidence_tail_mass);
    Ok(NbEvidence { log_evidence: g.log_integral(), box_prior_mass: mass, low_coverage: mass < 0.999 })
}

/// Grid posterior over `(k, θ)` with density proportional to
/// `NB(x | r=k, p=θ/(1+θ)) · p(k) · p(θ)`. An empty `x` yields the prior.
pub fn nb_grid_posterior(x: &[u32], shape_prior: &GammaParams, scale_prior: &GammaParams, cfg: &GridConfig) -> Result<GridPosterior2D> {
    shape_prior.validate()?;
    scale_prior.validate()?;
    cfg.validate()?;
    let lik = NbLikelihood::new(x);
    let k_box = quantile_box(shape_prior, cfg.tail_mass);
    let t_box = quantile_box(scale_prior, cfg.tail_mass);
    let mut cfg = cfg.clone();
    if x.is_empty() {
        cfg.refine_rounds = 0;
    }
    let g = adaptive_grid(k_box, t_box, &cfg, |k, thetas, out| {
        let st = if x.is_empty() { 0.0 } else { lik.shape_term(k) };
        let prior_k = shape_prior.ln_pdf(k);
        for (o, &t) in out.iter_mut().zip(thetas) {
            let ll = if x.is_empty() {
                0.0
            } else {
                let ln_1pt = t.ln_1p();
                lik.eval(st, k, -ln_1pt, t.ln() - ln_1pt)
            };
            *o = ll + prior_k + scale_prior.ln_pdf(t);
        }
    })?;
    Ok(GridPosterior2D::from_log_grid(g, box_mass(cfg.tail_mass)))
}
