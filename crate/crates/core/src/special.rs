//! Special functions and log-space helpers.

use statrs::distribution::{ContinuousCDF, Gamma as GammaDist};

/// Natural log of the gamma function (Lanczos approximation, |rel. err| < 1e-14).
#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    statrs::function::gamma::ln_gamma(x)
}

#[inline]
pub fn ln_factorial(n: u64) -> f64 {
    ln_gamma(n as f64 + 1.0)
}

pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    if max == f64::INFINITY {
        return f64::INFINITY;
    }
    max + xs.iter().map(|&x| (x - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights into probabilities summing to one.
pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let max = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - max).exp()).collect();
    let total: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / total).collect()
}

#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * statrs::function::erf::erfc(-z / std::f64::consts::SQRT_2)
}

pub const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_8;

/// Log density of Gamma(shape, scale) at `x`.
pub fn gamma_ln_pdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x < 0.0 {
        return f64::NEG_INFINITY;
    }
    if x == 0.0 {
        return match shape.partial_cmp(&1.0) {
            Some(std::cmp::Ordering::Less) => f64::INFINITY,
            Some(std::cmp::Ordering::Equal) => -scale.ln(),
            _ => f64::NEG_INFINITY,
        };
    }
    (shape - 1.0) * x.ln() - x / scale - ln_gamma(shape) - shape * scale.ln()
}

pub fn gamma_cdf(shape: f64, scale: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    statrs::function::gamma::gamma_lr(shape, x / scale)
}

pub fn gamma_quantile(shape: f64, scale: f64, p: f64) -> f64 {
    GammaDist::new(shape, 1.0 / scale)
        .expect("validated gamma parameters")
        .inverse_cdf(p)
}

/// Bisection root of a non-decreasing function on `[lo, hi]` to absolute
/// tolerance `tol` in the argument.
pub fn bisect<F: Fn(f64) -> f64>(f: F, target: f64, mut lo: f64, mut hi: f64, tol: f64) -> f64 {
    for _ in 0..200 {
        if hi - lo <= tol {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if f(mid) < target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn ln_gamma_matches_factorials() {
        let mut fact = 1.0f64;
        for n in 1..30u64 {
            fact *= n as f64;
            assert_relative_eq!(ln_factorial(n), fact.ln(), max_relative = 1e-12);
        }
        assert_relative_eq!(ln_gamma(0.5), std::f64::consts::PI.sqrt().ln(), max_relative = 1e-12);
    }

    #[test]
    fn log_sum_exp_is_stable() {
        assert_relative_eq!(log_sum_exp(&[1000.0, 1000.0]), 1000.0 + 2f64.ln());
        assert_eq!(log_sum_exp(&[f64::NEG_INFINITY; 3]), f64::NEG_INFINITY);
    }

    #[test]
    fn gamma_quantile_inverts_cdf() {
        for &(k, s) in &[(1.0, 1.0), (20.0, 1.0), (0.7, 3.0)] {
            for &p in &[0.001, 0.25, 0.5, 0.999] {
                let q = gamma_quantile(k, s, p);
                assert_relative_eq!(gamma_cdf(k, s, q), p, max_relative = 1e-8);
            }
        }
    }

    #[test]
    fn normal_cdf_symmetry() {
        assert_relative_eq!(std_normal_cdf(0.0), 0.5);
        assert_relative_eq!(std_normal_cdf(1.3) + std_normal_cdf(-1.3), 1.0, epsilon = 1e-15);
    }
}
