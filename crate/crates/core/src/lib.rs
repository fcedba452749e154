//! Amortized Bayesian model comparison for simulators with intractable
//! likelihoods.
//!
//! Mixture-density networks are trained on simulated `(m, θ, x)` triples to
//! approximate the posterior over model indices `p(m | x)` and, per model,
//! the posterior over parameters `p(θ | x, m)`. The crate ships two problem
//! families:
//!
//! * Poisson vs. negative-binomial count models, for which exact evidences and
//!   posteriors are available through [`oracle`];
//! * the K_d and K_s potassium channel models driven by voltage-clamp
//!   protocols ([`channels`]), summarized by PCA coefficients ([`features`]).
//!
//! ABC rejection and SMC baselines live in [`baselines`], posterior
//! diagnostics in [`validation`], and end-to-end experiment recipes in
//! [`experiment`].
//!
//! Data-parallel loops run on rayon when the `parallel` feature (default) is
//! enabled; see [`par::Exec`].

pub mod baselines;
pub(crate) mod binio;
pub mod channels;
pub mod counts;
pub mod dataset;
pub mod error;
pub mod experiment;
pub mod features;
pub mod mdn;
pub mod oracle;
pub mod par;
pub mod special;
pub mod validation;

pub use error::{Error, Result};
