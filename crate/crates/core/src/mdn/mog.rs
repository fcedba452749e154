use rand::Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::ZScaler;
use crate::special::{bisect, log_sum_exp, std_normal_cdf, LN_SQRT_2PI};

/// Mixture of Gaussians with each precision given by its upper Cholesky
/// factor, `S_k⁻¹ = U_kᵀ U_k`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MoGPosterior {
    pub weights: Vec<f64>,
    pub means: Vec<Vec<f64>>,
    /// Row-major `d × d` upper-triangular factors with positive diagonal.
    pub chol: Vec<Vec<f64>>,
}

impl MoGPosterior {
    pub fn new(weights: Vec<f64>, means: Vec<Vec<f64>>, chol: Vec<Vec<f64>>) -> Result<Self> {
        let q = MoGPosterior { weights, means, chol };
        q.validate()?;
        Ok(q)
    }

    pub fn validate(&self) -> Result<()> {
        let k = self.weights.len();
        if k == 0 || self.means.len() != k || self.chol.len() != k {
            return Err(Error::Input("mixture needs matching weights, means and factors".into()));
        }
        let d = self.dim();
        if d == 0 || self.means.iter().any(|m| m.len() != d) || self.chol.iter().any(|u| u.len() != d * d) {
            return Err(Error::Input("mixture components have inconsistent dimension".into()));
        }
        if self.weights.iter().any(|&a| !(a >= 0.0)) || (self.weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
            return Err(Error::Domain("mixture weights must be non-negative and sum to one".into()));
        }
        for u in &self.chol {
            for i in 0..d {
                if !(u[i * d + i] > 0.0) {
                    return Err(Error::Domain("precision factor needs a positive diagonal".into()));
                }
                if (0..i).any(|j| u[i * d + j] != 0.0) {
                    return Err(Error::Domain("precision factor must be upper triangular".into()));
                }
            }
        }
        Ok(())
    }

    pub fn standard_normal(d: usize) -> Self {
        let mut u = vec![0.0; d * d];
        (0..d).for_each(|i| u[i * d + i] = 1.0);
        MoGPosterior { weights: vec![1.0], means: vec![vec![0.0; d]], chol: vec![u] }
    }

    pub fn dim(&self) -> usize {
        self.means.first().map_or(0, Vec::len)
    }

    pub fn n_components(&self) -> usize {
        self.weights.len()
    }

    /// `ln N(θ | m_k, S_k)` using `|S_k⁻¹|^½ = Π diag(U_k)`.
    pub fn component_ln_pdf(&self, k: usize, theta: &[f64]) -> f64 {
        let d = self.dim();
        let u = &self.chol[k];
        let m = &self.means[k];
        let mut quad = 0.0;
        let mut log_det = 0.0;
        for i in 0..d {
            let zi: f64 = (i..d).map(|j| u[i * d + j] * (theta[j] - m[j])).sum();
            quad += zi * zi;
            log_det += u[i * d + i].ln();
        }
        log_det - 0.5 * quad - d as f64 * LN_SQRT_2PI
    }

    pub fn ln_pdf(&self, theta: &[f64]) -> f64 {
        let terms: Vec<f64> = (0..self.n_components())
            .map(|k| self.weights[k].ln() + self.component_ln_pdf(k, theta))
            .collect();
        log_sum_exp(&terms)
    }

    /// Component covariance `S_k = U_k⁻¹ U_k⁻ᵀ`, row-major.
    pub fn component_covariance(&self, k: usize) -> Vec<f64> {
        let d = self.dim();
        let u_inv = upper_inverse(&self.chol[k], d);
        let mut s = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                s[i * d + j] = (i.max(j)..d).map(|l| u_inv[i * d + l] * u_inv[j * d + l]).sum();
            }
        }
        s
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        (0..d).map(|i| self.weights.iter().zip(&self.means).map(|(a, m)| a * m[i]).sum()).collect()
    }

    /// Total covariance `Σ α_k (S_k + m_k m_kᵀ) − μ μᵀ`, row-major.
    pub fn covariance(&self) -> Vec<f64> {
        let d = self.dim();
        let mu = self.mean();
        let mut c = vec![0.0; d * d];
        for (k, (&a, m)) in self.weights.iter().zip(&self.means).enumerate() {
            let s = self.component_covariance(k);
            for i in 0..d {
                for j in 0..d {
                    c[i * d + j] += a * (s[i * d + j] + m[i] * m[j]);
                }
            }
        }
        for i in 0..d {
            for j in 0..d {
                c[i * d + j] -= mu[i] * mu[j];
            }
        }
        c
    }

    /// Draws `m_k + U_k⁻¹ ε` with `k ~ α`.
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.dim();
        let u: f64 = rng.random();
        let mut acc = 0.0;
        let mut k = self.n_components() - 1;
        for (i, &a) in self.weights.iter().enumerate() {
            acc += a;
            if u < acc {
                k = i;
                break;
            }
        }
        let eps: Vec<f64> = (0..d).map(|_| rng.sample(StandardNormal)).collect();
        let y = back_substitute(&self.chol[k], d, &eps);
        y.iter().zip(&self.means[k]).map(|(a, b)| a + b).collect()
    }

    /// CDF of the one-dimensional marginal of coordinate `i`.
    pub fn marginal_cdf(&self, i: usize, x: f64) -> f64 {
        let d = self.dim();
        (0..self.n_components())
            .map(|k| {
                let sd = self.component_covariance(k)[i * d + i].sqrt();
                self.weights[k] * std_normal_cdf((x - self.means[k][i]) / sd)
            })
            .sum()
    }

    /// Inverse marginal CDF by bisection on ±10 total standard deviations.
    pub fn marginal_quantile(&self, i: usize, p: f64) -> f64 {
        let d = self.dim();
        let mu = self.mean()[i];
        let sd = self.covariance()[i * d + i].sqrt();
        let (lo, hi) = (mu - 10.0 * sd, mu + 10.0 * sd);
        if p <= 0.0 {
            return f64::NEG_INFINITY;
        }
        if p >= 1.0 {
            return f64::INFINITY;
        }
        let sds: Vec<f64> = (0..self.n_components()).map(|k| self.component_covariance(k)[i * d + i].sqrt()).collect();
        let cdf = |x: f64| -> f64 {
            (0..self.n_components())
                .map(|k| self.weights[k] * std_normal_cdf((x - self.means[k][i]) / sds[k]))
                .sum()
        };
        bisect(cdf, p, lo, hi, 1e-8 * sd.max(1e-300))
    }

    /// Maps a posterior over z-scored parameters back to the original scale:
    /// `m ← σ∘m + μ`, `U ← U diag(σ)⁻¹`.
    pub fn to_original_scale(&self, scaler: &ZScaler) -> Result<Self> {
        let d = self.dim();
        if scaler.dim() != d {
            return Err(Error::Input(format!("scaler has dimension {}, posterior {d}", scaler.dim())));
        }
        let means = self.means.iter().map(|m| scaler.invert(m)).collect();
        let chol = self
            .chol
            .iter()
            .map(|u| {
                let mut v = u.clone();
                for i in 0..d {
                    for j in 0..d {
                        v[i * d + j] /= scaler.stds[j];
                    }
                }
                v
            })
            .collect();
        Ok(MoGPosterior { weights: self.weights.clone(), means, chol })
    }
}

/// Solves `U y = b` for upper-triangular `U`.
pub(crate) fn back_substitute(u: &[f64], d: usize, b: &[f64]) -> Vec<f64> {
    let mut y = vec![0.0; d];
    for i in (0..d).rev() {
        let s: f64 = ((i + 1)..d).map(|j| u[i * d + j] * y[j]).sum();
        y[i] = (b[i] - s) / u[i * d + i];
    }
    y
}

fn upper_inverse(u: &[f64], d: usize) -> Vec<f64> {
    let mut inv = vec![0.0; d * d];
    for c in 0..d {
        let mut e = vec![0.0; d];
        e[c] = 1.0;
        let col = back_substitute(u, d, &e);
        for r in 0..d {
            inv[r * d + c] = col[r];
        }
    }
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::par::stream;
    use proptest::prelude::*;

    fn two_d() -> MoGPosterior {
        MoGPosterior::new(
            vec![0.3, 0.7],
            vec![vec![-1.0, 0.5], vec![2.0, 1.0]],
            vec![vec![1.5, 0.4, 0.0, 0.8], vec![0.7, -0.3, 0.0, 2.0]],
        )
        .unwrap()
    }

    #[test]
    fn standard_normal_density() {
        let q = MoGPosterior::standard_normal(1);
        assert!((q.ln_pdf(&[0.0]) + 0.918_938_533_204_672_7).abs() < 1e-14);
        let twin = MoGPosterior::new(vec![0.5, 0.5], vec![vec![0.0]; 2], vec![vec![1.0]; 2]).unwrap();
        assert!((twin.ln_pdf(&[0.7]) - q.ln_pdf(&[0.7])).abs() < 1e-14);
    }

    #[test]
    fn integrates_to_one_in_two_dimensions() {
        let q = two_d();
        let (lo, hi, n) = (-12.0, 12.0, 600);
        let h = (hi - lo) / n as f64;
        let mut total = 0.0;
        for i in 0..=n {
            for j in 0..=n {
                let w = if i == 0 || i == n { 0.5 } else { 1.0 } * if j == 0 || j == n { 0.5 } else { 1.0 };
                total += w * q.ln_pdf(&[lo + h * i as f64, lo + h * j as f64]).exp();
            }
        }
        assert!((total * h * h - 1.0).abs() < 1e-3);
    }

    #[test]
    fn covariance_is_inverse_precision() {
        let q = two_d();
        let s = q.component_covariance(0);
        let u = &q.chol[0];
        // UᵀU S = I
        let mut p = [0.0; 4];
        for i in 0..2 {
            for j in 0..2 {
                p[i * 2 + j] = (0..2).map(|l| u[l * 2 + i] * u[l * 2 + j]).sum();
            }
        }
        for i in 0..2 {
            for j in 0..2 {
                let v: f64 = (0..2).map(|l| p[i * 2 + l] * s[l * 2 + j]).sum();
                assert!((v - if i == j { 1.0 } else { 0.0 }).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn affine_rescaling() {
        let q = MoGPosterior::standard_normal(1);
        assert_eq!(q.to_original_scale(&ZScaler::identity(1)).unwrap(), q);
        let scaler = ZScaler { means: vec![3.0], stds: vec![2.0] };
        let r = q.to_original_scale(&scaler).unwrap();
        assert_eq!(r.mean(), vec![3.0]);
        assert!((r.covariance()[0] - 4.0).abs() < 1e-14);
        assert!(q.to_original_scale(&ZScaler::identity(2)).is_err());
    }

    #[test]
    fn rescaled_sampling_matches_inverted_draws() {
        let q = two_d();
        let scaler = ZScaler { means: vec![10.0, -2.0], stds: vec![3.0, 0.5] };
        let r = q.to_original_scale(&scaler).unwrap();
        let n = 100_000;
        let mut rng = stream(2, 0);
        let a: Vec<Vec<f64>> = (0..n).map(|_| r.sample(&mut rng)).collect();
        let b: Vec<Vec<f64>> = (0..n).map(|_| scaler.invert(&q.sample(&mut rng))).collect();
        let cov = r.covariance();
        for i in 0..2 {
            let ma = a.iter().map(|v| v[i]).sum::<f64>() / n as f64;
            let mb = b.iter().map(|v| v[i]).sum::<f64>() / n as f64;
            let se = (2.0 * cov[i * 2 + i] / n as f64).sqrt();
            assert!((ma - mb).abs() < 3.0 * se);
            assert!((ma - r.mean()[i]).abs() < 3.0 * se);
            let va = a.iter().map(|v| (v[i] - ma).powi(2)).sum::<f64>() / n as f64;
            assert!((va / cov[i * 2 + i] - 1.0).abs() < 0.03);
        }
    }

    #[test]
    fn marginal_quantile_inverts_cdf() {
        let q = two_d();
        for &p in &[0.01, 0.3, 0.5, 0.97] {
            let x = q.marginal_quantile(1, p);
            assert!((q.marginal_cdf(1, x) - p).abs() < 1e-7);
        }
    }

    #[test]
    fn rejects_invalid_factors() {
        assert!(MoGPosterior::new(vec![1.0], vec![vec![0.0]], vec![vec![-1.0]]).is_err());
        assert!(MoGPosterior::new(vec![0.6], vec![vec![0.0]], vec![vec![1.0]]).is_err());
        assert!(MoGPosterior::new(vec![1.0], vec![vec![0.0, 0.0]], vec![vec![1.0, 0.0, 0.2, 1.0]]).is_err());
    }

    proptest! {
        #[test]
        fn density_is_permutation_invariant(t0 in -3.0f64..3.0, t1 in -3.0f64..3.0) {
            let q = two_d();
            let swapped = MoGPosterior {
                weights: q.weights.iter().rev().cloned().collect(),
                means: q.means.iter().rev().cloned().collect(),
                chol: q.chol.iter().rev().cloned().collect(),
            };
            prop_assert!((q.ln_pdf(&[t0, t1]) - swapped.ln_pdf(&[t0, t1])).abs() < 1e-13);
        }
    }
}
