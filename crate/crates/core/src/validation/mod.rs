//! Posterior diagnostics: KL divergences, quantile and coverage checks,
//! covariance eigenstructure, prior consistency and method scores.

mod density;

pub use density::{Density1D, MogMarginal};

use std::path::Path;

use nalgebra::{Matrix2, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::counts::GammaParams;
use crate::error::{Error, Result};
use crate::mdn::{MoGPosterior, PROB_FLOOR};
use crate::special::{ln_gamma, LN_SQRT_2PI};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum KlMode {
    /// Trapezoid rule on `n` nodes placed at quantiles of `p`, uniform in
    /// logit of the CDF over the central `1 − 2·10⁻¹²` mass.
    Quadrature { n: usize },
    /// `n` draws from `p`.
    MonteCarlo { n: usize, seed: u64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KlEstimate {
    pub value: f64,
    /// Monte Carlo standard error.
    pub std_error: Option<f64>,
    /// `q` vanished where `p` has mass.
    pub infinite: bool,
}

/// `D_KL(p ‖ q)`.
pub fn kl_divergence(p: &dyn Density1D, q: &dyn Density1D, mode: KlMode) -> Result<KlEstimate> {
    let infinite = KlEstimate { value: f64::INFINITY, std_error: None, infinite: true };
    match mode {
        KlMode::Quadrature { n } => {
            if n < 3 {
                return Err(Error::Input("quadrature needs at least 3 nodes".into()));
            }
            let half = ((1.0 - 1e-12) / 1e-12f64).ln();
            let mut acc = 0.0;
            let mut prev: Option<(f64, f64)> = None;
            for i in 0..n {
                let t = half * (2.0 * i as f64 / (n - 1) as f64 - 1.0);
                let x = p.quantile(1.0 / (1.0 + (-t).exp()));
                let lp = p.ln_pdf(x);
                let f = if lp == f64::NEG_INFINITY {
                    0.0
                } else {
                    let lq = q.ln_pdf(x);
                    if lq == f64::NEG_INFINITY {
                        return Ok(infinite);
                    }
                    lp.exp() * (lp - lq)
                };
                if let Some((px, pf)) = prev {
                    acc += 0.5 * (x - px) * (f + pf);
                }
                prev = Some((x, f));
            }
            Ok(KlEstimate { value: acc, std_error: None, infinite: false })
        }
        KlMode::MonteCarlo { n, seed } => {
            if n < 2 {
                return Err(Error::Input("Monte Carlo needs at least 2 draws".into()));
            }
            let mut rng = crate::par::stream(seed, 0);
            let mut terms = Vec::with_capacity(n);
            for _ in 0..n {
                let x = p.sample(&mut rng);
                let lq = q.ln_pdf(x);
                if lq == f64::NEG_INFINITY {
                    return Ok(infinite);
                }
                terms.push(p.ln_pdf(x) - lq);
            }
            let mean = terms.iter().sum::<f64>() / n as f64;
            let var = terms.iter().map(|t| (t - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
            Ok(KlEstimate { value: mean, std_error: Some((var / n as f64).sqrt()), infinite: false })
        }
    }
}

/// Closed-form `D_KL(p ‖ q)` between Gamma distributions.
pub fn kl_gamma(p: &GammaParams, q: &GammaParams) -> f64 {
    use statrs::function::gamma::digamma;
    (p.shape - q.shape) * digamma(p.shape) - ln_gamma(p.shape) + ln_gamma(q.shape)
        + q.shape * (q.scale.ln() - p.scale.ln())
        + p.shape * (p.scale - q.scale) / q.scale
}

/// `D_KL(exact ‖ estimate) / D_KL(exact ‖ prior)`; `None` when the
/// denominator is below `10⁻⁸`.
pub fn normalized_kl(exact: &dyn Density1D, estimate: &dyn Density1D, prior: &dyn Density1D, mode: KlMode) -> Result<Option<f64>> {
    let den = kl_divergence(exact, prior, mode)?;
    if den.infinite {
        return Ok(Some(0.0));
    }
    if den.value < 1e-8 {
        return Ok(None);
    }
    let num = kl_divergence(exact, estimate, mode)?;
    Ok(Some(num.value / den.value))
}

/// Kolmogorov-Smirnov distance between a sample in `[0, 1]` and the uniform
/// distribution.
pub fn ks_uniform(values: &[f64]) -> f64 {
    let mut u = values.to_vec();
    u.sort_by(f64::total_cmp);
    let n = u.len() as f64;
    u.iter()
        .enumerate()
        .map(|(i, &v)| ((i + 1) as f64 / n - v).max(v - i as f64 / n))
        .fold(0.0, f64::max)
}

/// Asymptotic KS critical value `√(−ln(α/2)/2) / √n`.
pub fn ks_critical(n: usize, alpha: f64) -> f64 {
    (-(alpha / 2.0).ln() / 2.0).sqrt() / (n as f64).sqrt()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QuantileCheck {
    pub quantiles: Vec<f64>,
    pub ks_statistic: f64,
    pub ks_critical_1pct: f64,
}

/// Position of every true parameter under its predicted posterior CDF.
pub fn quantile_check<D: Density1D + ?Sized>(posteriors: &[&D], truths: &[f64]) -> Result<QuantileCheck> {
    if posteriors.len() != truths.len() || truths.is_empty() {
        return Err(Error::Input("need one posterior per true parameter".into()));
    }
    let quantiles: Vec<f64> = posteriors.iter().zip(truths).map(|(p, &t)| p.cdf(t).clamp(0.0, 1.0)).collect();
    Ok(QuantileCheck { ks_statistic: ks_uniform(&quantiles), ks_critical_1pct: ks_critical(truths.len(), 0.01), quantiles })
}

/// Fraction of true parameters inside the central interval of mass `γ`, per
/// level. A point lies in `[F⁻¹((1−γ)/2), F⁻¹((1+γ)/2)]` exactly when its CDF
/// value lies in `[(1−γ)/2, (1+γ)/2]`.
pub fn credible_coverage<D: Density1D + ?Sized>(posteriors: &[&D], truths: &[f64], levels: &[f64]) -> Result<Vec<f64>> {
    if posteriors.len() != truths.len() || truths.is_empty() {
        return Err(Error::Input("need one posterior per true parameter".into()));
    }
    if levels.iter().any(|g| !(0.0..=1.0).contains(g)) {
        return Err(Error::Input("credible levels must lie in [0, 1]".into()));
    }
    let u: Vec<f64> = posteriors.iter().zip(truths).map(|(p, &t)| p.cdf(t)).collect();
    Ok(levels
        .iter()
        .map(|&g| {
            if g == 0.0 {
                return 0.0;
            }
            let (lo, hi) = ((1.0 - g) / 2.0, (1.0 + g) / 2.0);
            u.iter().filter(|&&v| v >= lo && v <= hi).count() as f64 / u.len() as f64
        })
        .collect())
}

/// Default credible levels `0.1, 0.2, …, 0.9`.
pub fn default_levels() -> Vec<f64> {
    (1..=9).map(|i| i as f64 / 10.0).collect()
}

fn eigen2(c: [[f64; 2]; 2]) -> (f64, f64, [f64; 2], [f64; 2]) {
    let e = SymmetricEigen::new(Matrix2::new(c[0][0], c[0][1], c[1][0], c[1][1]));
    let (imax, imin) = if e.eigenvalues[0] >= e.eigenvalues[1] { (0, 1) } else { (1, 0) };
    let v = |i: usize| [e.eigenvectors[(0, i)], e.eigenvectors[(1, i)]];
    (e.eigenvalues[imax], e.eigenvalues[imin], v(imax), v(imin))
}

fn moments(points: &[[f64; 2]]) -> ([f64; 2], [[f64; 2]; 2]) {
    let n = points.len() as f64;
    let m = [points.iter().map(|p| p[0]).sum::<f64>() / n, points.iter().map(|p| p[1]).sum::<f64>() / n];
    let mut c = [[0.0; 2]; 2];
    for p in points {
        for i in 0..2 {
            for j in 0..2 {
                c[i][j] += (p[i] - m[i]) * (p[j] - m[j]) / (n - 1.0);
            }
        }
    }
    (m, c)
}

fn project(points: &[[f64; 2]], v: [f64; 2]) -> (f64, f64) {
    let xs: Vec<f64> = points.iter().map(|p| p[0] * v[0] + p[1] * v[1]).collect();
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    (m, xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0))
}

/// Mean and variance of both sample sets projected on one direction.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Projection {
    pub exact_mean: f64,
    pub exact_var: f64,
    pub estimate_mean: f64,
    pub estimate_var: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigenCheck {
    /// Along the estimated leading eigenvector.
    pub along_max: Projection,
    /// Along the estimated trailing eigenvector.
    pub along_min: Projection,
    /// Angle in degrees between the exact and estimated leading
    /// eigenvectors; `None` when the estimate is nearly isotropic.
    pub angle_deg: Option<f64>,
    pub isotropic: bool,
    /// Exact variance along each estimated eigenvector over the matching
    /// exact eigenvalue.
    pub variance_ratio_max: f64,
    pub variance_ratio_min: f64,
}

/// Compares the covariance eigenstructure of exact posterior samples with a
/// two-dimensional mixture estimate.
pub fn eigen_check(exact: &[[f64; 2]], q: &MoGPosterior, n: usize, rng: &mut dyn rand::RngCore) -> Result<EigenCheck> {
    if q.dim() != 2 {
        return Err(Error::Input("eigen check needs a two-dimensional posterior".into()));
    }
    if exact.len() < 3 || n < 3 {
        return Err(Error::Input("eigen check needs at least three samples per set".into()));
    }
    let c = q.covariance();
    let (lmax, lmin, vmax, vmin) = eigen2([[c[0], c[1]], [c[2], c[3]]]);
    let (_, exact_cov) = moments(exact);
    let (emax, emin, evmax, _) = eigen2(exact_cov);
    let draws: Vec<[f64; 2]> = (0..n)
        .map(|_| {
            let s = q.sample(rng);
            [s[0], s[1]]
        })
        .collect();
    let proj = |v| {
        let (em, ev) = project(exact, v);
        let (qm, qv) = project(&draws, v);
        Projection { exact_mean: em, exact_var: ev, estimate_mean: qm, estimate_var: qv }
    };
    let isotropic = lmax / lmin < 1.05;
    let cos = (vmax[0] * evmax[0] + vmax[1] * evmax[1]).abs().min(1.0);
    let along_max = proj(vmax);
    let along_min = proj(vmin);
    Ok(EigenCheck {
        angle_deg: (!isotropic).then(|| cos.acos().to_degrees()),
        isotropic,
        variance_ratio_max: along_max.exact_var / emax,
        variance_ratio_min: along_min.exact_var / emin,
        along_max,
        along_min,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PriorPoint {
    pub prior: f64,
    pub mean_posterior: f64,
    pub n: usize,
}

/// For every prior value, the mean predicted probability of model 0 over a
/// test set generated under that prior. `evaluate` trains and predicts.
pub fn prior_consistency<F>(priors: &[f64], mut evaluate: F) -> Result<Vec<PriorPoint>>
where
    F: FnMut(f64) -> Result<Vec<f64>>,
{
    priors
        .iter()
        .map(|&prior| {
            let p = evaluate(prior)?;
            if p.is_empty() {
                return Err(Error::Input("prior-consistency evaluation returned no predictions".into()));
            }
            Ok(PriorPoint { prior, mean_posterior: p.iter().sum::<f64>() / p.len() as f64, n: p.len() })
        })
        .collect()
}

/// What method outputs are scored against.
#[derive(Clone, Copy, Debug)]
pub enum Reference<'a> {
    Exact(&'a [Vec<f64>]),
    Labels(&'a [usize]),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodScore {
    pub method: String,
    /// Mean over test points of the mean absolute probability error.
    pub mae: Option<f64>,
    /// Mean `−ln p̂(true model)` with the probability floor applied.
    pub cross_entropy: Option<f64>,
    /// Test points without an estimate; scored as uniform.
    pub n_undefined: usize,
}

/// Scores each method's model probabilities on the same test points.
pub fn compare_methods(methods: &[(String, Vec<Option<Vec<f64>>>)], reference: Reference<'_>) -> Result<Vec<MethodScore>> {
    let n = match reference {
        Reference::Exact(e) => e.len(),
        Reference::Labels(l) => l.len(),
    };
    methods
        .iter()
        .map(|(name, est)| {
            if est.len() != n || n == 0 {
                return Err(Error::Input(format!("method {name} has {} estimates for {n} test points", est.len())));
            }
            let mut undefined = 0;
            let mut abs = 0.0;
            let mut ce = 0.0;
            for (i, e) in est.iter().enumerate() {
                let m = match reference {
                    Reference::Exact(x) => x[i].len(),
                    Reference::Labels(_) => e.as_ref().map_or(2, Vec::len),
                };
                let p = match e {
                    Some(p) => p.clone(),
                    None => {
                        undefined += 1;
                        vec![1.0 / m as f64; m]
                    }
                };
                match reference {
                    Reference::Exact(x) => {
                        abs += p.iter().zip(&x[i]).map(|(a, b)| (a - b).abs()).sum::<f64>() / m as f64;
                    }
                    Reference::Labels(l) => {
                        ce -= p.get(l[i]).copied().unwrap_or(0.0).max(PROB_FLOOR).ln();
                    }
                }
            }
            let nf = n as f64;
            Ok(MethodScore {
                method: name.clone(),
                mae: matches!(reference, Reference::Exact(_)).then(|| abs / nf),
                cross_entropy: matches!(reference, Reference::Labels(_)).then(|| ce / nf),
                n_undefined: undefined,
            })
        })
        .collect()
}

/// Collected diagnostics of one validation run.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationReport {
    pub quantiles: Vec<f64>,
    pub ks_statistic: Option<f64>,
    pub ks_critical_1pct: Option<f64>,
    pub levels: Vec<f64>,
    pub coverage: Vec<f64>,
    pub normalized_kl: Vec<Option<f64>>,
    pub eigen_angles: Vec<Option<f64>>,
    pub methods: Vec<MethodScore>,
    pub prior_consistency: Vec<PriorPoint>,
    /// Scalar summaries keyed by name.
    pub metrics: std::collections::BTreeMap<String, f64>,
}

impl CalibrationReport {
    pub fn add_quantiles(&mut self, q: QuantileCheck) {
        self.ks_statistic = Some(q.ks_statistic);
        self.ks_critical_1pct = Some(q.ks_critical_1pct);
        self.quantiles = q.quantiles;
    }

    pub fn median_normalized_kl(&self) -> Option<f64> {
        median(self.normalized_kl.iter().flatten().copied().collect())
    }

    pub fn median_eigen_angle(&self) -> Option<f64> {
        median(self.eigen_angles.iter().flatten().copied().collect())
    }

    /// Writes `report.json` plus plot-ready CSV tables into `dir`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let put = |name: &str, text: String| {
            let p = dir.join(name);
            std::fs::write(&p, text).map_err(|e| Error::io(&p, e))
        };
        put("report.json", serde_json::to_string_pretty(self).map_err(|e| Error::Format(e.to_string()))?)?;
        let mut q = String::from("index,quantile\n");
        self.quantiles.iter().enumerate().for_each(|(i, v)| q.push_str(&format!("{i},{v}\n")));
        put("quantiles.csv", q)?;
        let mut c = String::from("level,coverage\n");
        self.levels.iter().zip(&self.coverage).for_each(|(l, v)| c.push_str(&format!("{l},{v}\n")));
        put("coverage.csv", c)?;
        let opt = |v: &Option<f64>| v.map_or(String::new(), |x| x.to_string());
        let mut k = String::from("index,normalized_kl\n");
        self.normalized_kl.iter().enumerate().for_each(|(i, v)| k.push_str(&format!("{i},{}\n", opt(v))));
        put("normalized_kl.csv", k)?;
        let mut a = String::from("index,angle_deg\n");
        self.eigen_angles.iter().enumerate().for_each(|(i, v)| a.push_str(&format!("{i},{}\n", opt(v))));
        put("eigen_angles.csv", a)?;
        let mut m = String::from("method,mae,cross_entropy,n_undefined\n");
        self.methods
            .iter()
            .for_each(|s| m.push_str(&format!("{},{},{},{}\n", s.method, opt(&s.mae), opt(&s.cross_entropy), s.n_undefined)));
        put("methods.csv", m)?;
        let mut p = String::from("prior,mean_posterior,n\n");
        self.prior_consistency.iter().for_each(|r| p.push_str(&format!("{},{},{}\n", r.prior, r.mean_posterior, r.n)));
        put("prior_consistency.csv", p)
    }
}

pub fn median(mut v: Vec<f64>) -> Option<f64> {
    if v.is_empty() {
        return None;
    }
    v.sort_by(f64::total_cmp);
    let n = v.len();
    Some(if n % 2 == 1 { v[n / 2] } else { 0.5 * (v[n / 2 - 1] + v[n / 2]) })
}

/// Log density of a bivariate normal, for tests and oracles.
pub fn gaussian2_ln_pdf(x: [f64; 2], mean: [f64; 2], cov: [[f64; 2]; 2]) -> f64 {
    let det = cov[0][0] * cov[1][1] - cov[0][1] * cov[1][0];
    let d = [x[0] - mean[0], x[1] - mean[1]];
    let q = (cov[1][1] * d[0] * d[0] - 2.0 * cov[0][1] * d[0] * d[1] + cov[0][0] * d[1] * d[1]) / det;
    -0.5 * q - 0.5 * det.ln() - 2.0 * LN_SQRT_2PI
}

/// Draws `n` samples from `d` with a fresh stream.
pub fn draw<D: Density1D + ?Sized>(d: &D, n: usize, seed: u64) -> Vec<f64> {
    let mut rng = crate::par::stream(seed, 0);
    (0..n).map(|_| d.sample(&mut rng)).collect()
}
