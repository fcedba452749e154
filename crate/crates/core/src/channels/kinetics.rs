//! Gating kinetics of the delayed-rectifier (K_d) and slow non-inactivating
//! (K_s) potassium channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Delayed-rectifier parameters. Voltages in mV, rates in ms⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KdParams {
    pub m: f64,
    pub r_alpha: f64,
    pub v_t: f64,
    pub th_alpha: f64,
    pub q_alpha: f64,
    pub r_beta: f64,
    pub th_beta: f64,
    pub q_beta: f64,
    /// mS/cm²
    pub g_bar: f64,
    pub e_k: f64,
}

impl KdParams {
    pub const FREE_NAMES: [&'static str; 8] = ["M", "R_alpha", "V_T", "th_alpha", "q_alpha", "R_beta", "th_beta", "q_beta"];

    pub fn ground_truth() -> Self {
        KdParams {
            m: 4.0,
            r_alpha: 0.032,
            v_t: -63.0,
            th_alpha: 15.0,
            q_alpha: 5.0,
            r_beta: 0.5,
            th_beta: 10.0,
            q_beta: 40.0,
            g_bar: 5.0,
            e_k: -90.0,
        }
    }

    pub fn free(&self) -> [f64; 8] {
        [self.m, self.r_alpha, self.v_t, self.th_alpha, self.q_alpha, self.r_beta, self.th_beta, self.q_beta]
    }

    pub fn with_free(&self, v: &[f64]) -> Result<Self> {
        let [m, r_alpha, v_t, th_alpha, q_alpha, r_beta, th_beta, q_beta] = <[f64; 8]>::try_from(v)
            .map_err(|_| Error::Input(format!("K_d takes 8 free parameters, got {}", v.len())))?;
        let p = KdParams {
            m,
            r_alpha,
            v_t,
            th_alpha,
            q_alpha,
            r_beta,
            th_beta,
            q_beta,
            ..*self
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_alpha == 0.0 || self.q_beta == 0.0 {
            return Err(Error::Domain("K_d slope factors must be non-zero".into()));
        }
        if !(self.g_bar > 0.0) || !(self.m > 0.0) {
            return Err(Error::Domain("K_d needs positive g_bar and exponent".into()));
        }
        if self.free().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite K_d parameter".into()));
        }
        Ok(())
    }
}

/// `(α_n, β_n)` at membrane voltage `v`.
pub fn kd_rates(v: f64, p: &KdParams) -> (f64, f64) {
    let u = v - p.v_t - p.th_alpha;
    let x = u / p.q_alpha;
    let alpha = if x.abs() < 1e-4 {
        // u / (1 - e^{-u/q}) = q (1 + x/2 + x²/12 + O(x⁴))
        p.r_alpha * p.q_alpha * (1.0 + x / 2.0 + x * x / 12.0)
    } else {
        p.r_alpha * u / -(-x).exp_m1()
    };
    let beta = p.r_beta * (-(v - p.v_t - p.th_beta) / p.q_beta).exp();
    (alpha, beta)
}

/// Voltage offset used inside the K_s time constant.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TauOffset {
    /// `τ_p` uses `V + th_p`, the same offset as `p_∞`; both curves are centered at `-th_p`.
    #[default]
    Shared,
    /// `τ_p` uses `V - th_p` while `p_∞` keeps `V + th_p`.
    Mirrored,
}

/// Slow non-inactivating K⁺ parameters. Voltages in mV, `tau_max` in ms.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KsParams {
    pub m: f64,
    pub th_p: f64,
    pub q_p: f64,
    pub r_tau: f64,
    pub q_tau: f64,
    pub tau_max: f64,
    pub g_bar: f64,
    pub e_k: f64,
    #[serde(default)]
    pub tau_offset: TauOffset,
}

impl KsParams {
    pub const FREE_NAMES: [&'static str; 5] = ["M", "th_p", "q_p", "R_tau", "q_tau"];

    pub fn ground_truth() -> Self {
        KsParams {
            m: 1.0,
            th_p: 35.0,
            q_p: 10.0,
            r_tau: 3.3,
            q_tau: 20.0,
            tau_max: 4000.0,
            g_bar: 0.004,
            e_k: -90.0,
            tau_offset: TauOffset::Shared,
        }
    }

    pub fn free(&self) -> [f64; 5] {
        [self.m, self.th_p, self.q_p, self.r_tau, self.q_tau]
    }

    pub fn with_free(&self, v: &[f64]) -> Result<Self> {
        let [m, th_p, q_p, r_tau, q_tau] = <[f64; 5]>::try_from(v)
            .map_err(|_| Error::Input(format!("K_s takes 5 free parameters, got {}", v.len())))?;
        let p = KsParams {
            m,
            th_p,
            q_p,
            r_tau,
            q_tau,
            ..*self
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if self.q_p == 0.0 || self.q_tau == 0.0 {
            return Err(Error::Domain("K_s slope factors must be non-zero".into()));
        }
        if !(self.tau_max > 0.0) || !(self.g_bar > 0.0) || !(self.m > 0.0) {
            return Err(Error::Domain("K_s needs positive tau_max, g_bar and exponent".into()));
        }
        if self.free().iter().any(|v| !v.is_finite()) {
            return Err(Error::Domain("non-finite K_s parameter".into()));
        }
        Ok(())
    }
}

/// `(p_∞, τ_p)` at membrane voltage `v`; `τ_p` in ms.
pub fn ks_kinetics(v: f64, p: &KsParams) -> (f64, f64) {
    let p_inf = 1.0 / (1.0 + (-(v + p.th_p) / p.q_p).exp());
    let shifted = match p.tau_offset {
        TauOffset::Shared => v + p.th_p,
        TauOffset::Mirrored => v - p.th_p,
    };
    let e = (shifted / p.q_tau).exp();
    let tau = p.tau_max / (p.r_tau * e + 1.0 / e);
    (p_inf, tau)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "model", rename_all = "snake_case")]
pub enum Channel {
    Kd(KdParams),
    Ks(KsParams),
}

impl Channel {
    pub fn model_index(&self) -> usize {
        match self {
            Channel::Kd(_) => super::KD,
            Channel::Ks(_) => super::KS,
        }
    }

    pub fn g_bar(&self) -> f64 {
        match self {
            Channel::Kd(p) => p.g_bar,
            Channel::Ks(p) => p.g_bar,
        }
    }

    pub fn e_rev(&self) -> f64 {
        match self {
            Channel::Kd(p) => p.e_k,
            Channel::Ks(p) => p.e_k,
        }
    }

    pub fn exponent(&self) -> f64 {
        match self {
            Channel::Kd(p) => p.m,
            Channel::Ks(p) => p.m,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Channel::Kd(p) => p.validate(),
            Channel::Ks(p) => p.validate(),
        }
    }

    /// Steady state and time constant (ms) of the gating variable at `v`.
    #[inline]
    pub fn gate_dynamics(&self, v: f64) -> (f64, f64) {
        match self {
            Channel::Kd(p) => {
                let (a, b) = kd_rates(v, p);
                let total = a + b;
                (a / total, 1.0 / total)
            }
            Channel::Ks(p) => ks_kinetics(v, p),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kd_rate_limit_at_singular_point() {
        let p = KdParams::ground_truth();
        let (a, _) = kd_rates(-48.0, &p);
        assert!((a - 0.16).abs() < 1e-15);
        // Both sides of the removable singularity, just outside the series branch.
        for u in [1e-6, -1e-6, 6e-4, -6e-4] {
            let (a, _) = kd_rates(-48.0 + u, &p);
            let direct = p.r_alpha * u / (1.0 - (-u / p.q_alpha).exp());
            assert!((a - 0.16).abs() < 1e-5, "{a}");
            assert!((a - direct).abs() < 1e-9);
        }
    }

    #[test]
    fn kd_beta_at_offset() {
        let (_, b) = kd_rates(-53.0, &KdParams::ground_truth());
        assert!((b - 0.5).abs() < 1e-15);
    }

    #[test]
    fn kd_rates_non_negative() {
        let p = KdParams::ground_truth();
        for i in 0..=1800 {
            let v = -120.0 + i as f64 * 0.1;
            let (a, b) = kd_rates(v, &p);
            assert!(a >= 0.0 && b >= 0.0 && a.is_finite() && b.is_finite(), "V={v}");
        }
    }

    #[test]
    fn ks_midpoint() {
        let (p_inf, tau) = ks_kinetics(-35.0, &KsParams::ground_truth());
        assert!((p_inf - 0.5).abs() < 1e-15);
        assert!((tau - 4000.0 / 4.3).abs() < 1e-9);
        assert!((tau - 930.232_558).abs() < 1e-5);
    }

    #[test]
    fn ks_mirrored_offset() {
        let p = KsParams {
            tau_offset: TauOffset::Mirrored,
            ..KsParams::ground_truth()
        };
        let (_, tau) = ks_kinetics(35.0, &p);
        assert!((tau - 4000.0 / 4.3).abs() < 1e-9);
    }

    #[test]
    fn ks_steady_state_increasing() {
        let p = KsParams::ground_truth();
        let mut prev = -1.0;
        for i in 0..=180 {
            let (p_inf, _) = ks_kinetics(-120.0 + i as f64, &p);
            assert!(p_inf > prev);
            prev = p_inf;
        }
    }

    #[test]
    fn free_parameter_round_trip() {
        let kd = KdParams::ground_truth();
        assert_eq!(kd.with_free(&kd.free()).unwrap(), kd);
        let ks = KsParams::ground_truth();
        assert_eq!(ks.with_free(&ks.free()).unwrap(), ks);
        assert!(kd.with_free(&[1.0; 5]).is_err());
        let mut bad = kd.free();
        bad[4] = 0.0;
        assert!(kd.with_free(&bad).is_err());
    }
}
