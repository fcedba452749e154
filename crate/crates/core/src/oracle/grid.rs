use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::par::Exec;
use crate::special::log_sum_exp;

/// Resolution and extent of the 2-D integration grids.
///
/// The grid starts on the per-axis `[tail, 1 − tail]` quantile box of the
/// hyperpriors and is then re-laid `refine_rounds` times over the window where
/// the integrand is within `window_nats` of its maximum. The evidence
/// integral runs in log coordinates and uses the much smaller
/// `evidence_tail_mass`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GridConfig {
    pub n_k: usize,
    pub n_theta: usize,
    pub tail_mass: f64,
    pub evidence_tail_mass: f64,
    pub refine_rounds: usize,
    pub window_nats: f64,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig { n_k: 256, n_theta: 256, tail_mass: 2.5e-4, evidence_tail_mass: 1e-10, refine_rounds: 2, window_nats: 30.0 }
    }
}

impl GridConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_k < 3 || self.n_theta < 3 {
            return Err(Error::Config("grid needs at least 3 nodes per axis".into()));
        }
        if !(self.tail_mass > 0.0 && self.tail_mass < 0.5) {
            return Err(Error::Config(format!("grid tail mass must lie in (0, 0.5), got {}", self.tail_mass)));
        }
        if !(self.evidence_tail_mass > 0.0 && self.evidence_tail_mass < 0.5) {
            return Err(Error::Config(format!("evidence tail mass must lie in (0, 0.5), got {}", self.evidence_tail_mass)));
        }
        if !(self.window_nats > 0.0) {
            return Err(Error::Config("grid window must be positive".into()));
        }
        Ok(())
    }

    /// Same extent rules at twice the resolution (in cells).
    pub fn doubled(&self) -> Self {
        GridConfig { n_k: 2 * self.n_k - 1, n_theta: 2 * self.n_theta - 1, ..self.clone() }
    }
}

pub(crate) fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let h = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| if i == n - 1 { hi } else { lo + h * i as f64 }).collect()
}

/// Log-values of an integrand on a tensor grid, rows along `a`.
pub(crate) struct LogGrid {
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub logv: Vec<f64>,
}

impl LogGrid {
    fn evaluate<F>(a: Vec<f64>, b: Vec<f64>, row: &F) -> Self
    where
        F: Fn(f64, &[f64], &mut [f64]) + Sync,
    {
        let rows = Exec::default().map_slice(&a, |&ai| {
            let mut out = vec![0.0; b.len()];
            row(ai, &b, &mut out);
            out
        });
        LogGrid { logv: rows.concat(), a, b }
    }

    fn max(&self) -> f64 {
        self.logv.iter().copied().filter(|v| !v.is_nan()).fold(f64::NEG_INFINITY, f64::max)
    }

    /// Log of the trapezoid-rule integral.
    pub fn log_integral(&self) -> f64 {
        let (na, nb) = (self.a.len(), self.b.len());
        let wa = trapz_weights(&self.a);
        let wb = trapz_weights(&self.b);
        let mut terms = Vec::with_capacity(na * nb);
        for i in 0..na {
            for j in 0..nb {
                terms.push(self.logv[i * nb + j] + (wa[i] * wb[j]).ln());
            }
        }
        log_sum_exp(&terms)
    }

    /// Node-index window holding everything within `nats` of the maximum,
    /// padded by one node.
    fn window(&self, nats: f64) -> (usize, usize, usize, usize) {
        let nb = self.b.len();
        let cut = self.max() - nats;
        let (mut i0, mut i1, mut j0, mut j1) = (usize::MAX, 0, usize::MAX, 0);
        for (idx, &v) in self.logv.iter().enumerate() {
            if v >= cut {
                let (i, j) = (idx / nb, idx % nb);
                i0 = i0.min(i);
                i1 = i1.max(i);
                j0 = j0.min(j);
                j1 = j1.max(j);
            }
        }
        (
            i0.saturating_sub(1),
            (i1 + 1).min(self.a.len() - 1),
            j0.saturating_sub(1),
            (j1 + 1).min(nb - 1),
        )
    }
}

pub(crate) fn trapz_weights(x: &[f64]) -> Vec<f64> {
    let n = x.len();
    (0..n)
        .map(|i| {
            let left = if i > 0 { x[i] - x[i - 1] } else { 0.0 };
            let right = if i + 1 < n { x[i + 1] - x[i] } else { 0.0 };
            0.5 * (left + right)
        })
        .collect()
}

/// Evaluates `row` on a grid over `[a_lo, a_hi] × [b_lo, b_hi]`, zooming in on
/// the region that carries the integrand.
pub(crate) fn adaptive_grid<F>(a_range: (f64, f64), b_range: (f64, f64), cfg: &GridConfig, row: F) -> Result<LogGrid>
where
    F: Fn(f64, &[f64], &mut [f64]) + Sync,
{
    cfg.validate()?;
    let mut g = LogGrid::evaluate(linspace(a_range.0, a_range.1, cfg.n_k), linspace(b_range.0, b_range.1, cfg.n_theta), &row);
    for _ in 0..cfg.refine_rounds {
        if !g.max().is_finite() {
            break;
        }
        let (i0, i1, j0, j1) = g.window(cfg.window_nats);
        if i0 == 0 && i1 == g.a.len() - 1 && j0 == 0 && j1 == g.b.len() - 1 {
            break;
        }
        g = LogGrid::evaluate(linspace(g.a[i0], g.a[i1], cfg.n_k), linspace(g.b[j0], g.b[j1], cfg.n_theta), &row);
    }
    if !g.max().is_finite() {
        return Err(Error::Domain("integrand is not finite and positive anywhere on the grid".into()));
    }
    Ok(g)
}

/// Tabulated posterior density over `(k, θ)`, normalized so the trapezoid
/// integral over the grid is one.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GridPosterior2D {
    pub k_grid: Vec<f64>,
    pub theta_grid: Vec<f64>,
    /// Row-major `k_grid.len() × theta_grid.len()`.
    pub log_density: Vec<f64>,
    pub marginal_k_cdf: Vec<f64>,
    /// Row-major; row `i` is the CDF of θ given `k_grid[i]`.
    pub conditional_theta_cdf: Vec<f64>,
    /// Log of the unnormalized trapezoid integral.
    pub log_normalizer: f64,
    /// Prior mass inside the initial quantile box.
    pub box_prior_mass: f64,
    pub low_coverage: bool,
}

impl GridPosterior2D {
    pub(crate) fn from_log_grid(g: LogGrid, box_prior_mass: f64) -> Self {
        let log_normalizer = g.log_integral();
        let (nk, nt) = (g.a.len(), g.b.len());
        let log_density: Vec<f64> = g.logv.iter().map(|v| v - log_normalizer).collect();
        let mut marginal = vec![0.0; nk];
        let mut cond = vec![0.0; nk * nt];
        for i in 0..nk {
            let row = &log_density[i * nt..(i + 1) * nt];
            let c = &mut cond[i * nt..(i + 1) * nt];
            for j in 1..nt {
                c[j] = c[j - 1] + 0.5 * (g.b[j] - g.b[j - 1]) * (row[j - 1].exp() + row[j].exp());
            }
            marginal[i] = c[nt - 1];
            if marginal[i] > 0.0 {
                c.iter_mut().for_each(|v| *v /= marginal[i]);
            } else {
                c.iter_mut().enumerate().for_each(|(j, v)| *v = j as f64 / (nt - 1) as f64);
            }
            c[nt - 1] = 1.0;
        }
        let mut kcdf = vec![0.0; nk];
        for i in 1..nk {
            kcdf[i] = kcdf[i - 1] + 0.5 * (g.a[i] - g.a[i - 1]) * (marginal[i - 1] + marginal[i]);
        }
        let total = kcdf[nk - 1];
        kcdf.iter_mut().for_each(|v| *v /= total);
        kcdf[nk - 1] = 1.0;
        GridPosterior2D {
            k_grid: g.a,
            theta_grid: g.b,
            log_density,
            marginal_k_cdf: kcdf,
            conditional_theta_cdf: cond,
            log_normalizer,
            box_prior_mass,
            low_coverage: box_prior_mass < 0.999,
        }
    }

    pub fn density(&self, i: usize, j: usize) -> f64 {
        self.log_density[i * self.theta_grid.len() + j].exp()
    }

    /// Trapezoid integral of `f(k, θ) · p(k, θ)` over the grid.
    pub fn expect<F: Fn(f64, f64) -> f64>(&self, f: F) -> f64 {
        let wk = trapz_weights(&self.k_grid);
        let wt = trapz_weights(&self.theta_grid);
        let mut acc = 0.0;
        for (i, &k) in self.k_grid.iter().enumerate() {
            for (j, &t) in self.theta_grid.iter().enumerate() {
                acc += wk[i] * wt[j] * self.density(i, j) * f(k, t);
            }
        }
        acc
    }

    pub fn total_mass(&self) -> f64 {
        self.expect(|_, _| 1.0)
    }

    pub fn mean(&self) -> [f64; 2] {
        [self.expect(|k, _| k), self.expect(|_, t| t)]
    }

    pub fn covariance(&self) -> [[f64; 2]; 2] {
        let [mk, mt] = self.mean();
        let ckk = self.expect(|k, _| (k - mk) * (k - mk));
        let ckt = self.expect(|k, t| (k - mk) * (t - mt));
        let ctt = self.expect(|_, t| (t - mt) * (t - mt));
        [[ckk, ckt], [ckt, ctt]]
    }

    /// Grid node with the largest density.
    pub fn mode(&self) -> (f64, f64) {
        let nt = self.theta_grid.len();
        let (idx, _) = self
            .log_density
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &v)| if v > best.1 { (i, v) } else { best });
        (self.k_grid[idx / nt], self.theta_grid[idx % nt])
    }

    /// Inverse-transform draws from the bilinear interpolant of the grid
    /// density: `k` from the marginal, then `θ` from the conditional at `k`.
    pub fn sample<R: Rng + ?Sized>(&self, n: usize, rng: &mut R) -> Vec<(f64, f64)> {
        let nt = self.theta_grid.len();
        let marginal: Vec<f64> = (0..self.k_grid.len())
            .map(|i| {
                (1..nt)
                    .map(|j| 0.5 * (self.theta_grid[j] - self.theta_grid[j - 1]) * (self.density(i, j - 1) + self.density(i, j)))
                    .sum()
            })
            .collect();
        (0..n)
            .map(|_| {
                let (i, w, k) = invert_linear(&self.k_grid, &self.marginal_k_cdf, |i| marginal[i], rng.random());
                let p_hi = w * marginal[i + 1];
                let p_lo = (1.0 - w) * marginal[i];
                let row = if rng.random::<f64>() * (p_lo + p_hi) < p_hi { i + 1 } else { i };
                let cdf = &self.conditional_theta_cdf[row * nt..(row + 1) * nt];
                let m = marginal[row];
                let (_, _, theta) = invert_linear(
                    &self.theta_grid,
                    cdf,
                    |j| if m > 0.0 { self.density(row, j) / m } else { 1.0 },
                    rng.random(),
                );
                (k, theta)
            })
            .collect()
    }
}

/// Inverts a CDF whose density is linear within each cell. Returns the cell
/// index, the fractional position inside it and the point.
fn invert_linear<D: Fn(usize) -> f64>(x: &[f64], cdf: &[f64], dens: D, u: f64) -> (usize, f64, f64) {
    let n = x.len();
    let cell = cdf.partition_point(|&c| c <= u).clamp(1, n - 1) - 1;
    let h = x[cell + 1] - x[cell];
    let mass = cdf[cell + 1] - cdf[cell];
    let need = (u - cdf[cell]).max(0.0);
    let (a, b) = (dens(cell), dens(cell + 1));
    let t = if mass <= 0.0 {
        0.5 * h
    } else {
        // Rescale so the cell's linear density integrates to the tabulated mass.
        let s = mass / (0.5 * h * (a + b));
        let (a, b) = (a * s, b * s);
        let slope = (b - a) / h;
        let disc = (a * a + 2.0 * slope * need).max(0.0);
        let denom = a + disc.sqrt();
        if denom > 0.0 {
            (2.0 * need / denom).clamp(0.0, h)
        } else {
            h * need / mass
        }
    };
    (cell, t / h, x[cell] + t)
}
