//! Voltage-clamp protocols and their plain-text definition format.
//!
//! ```text
//! protocol activation
//! holding -90
//! dt 0.025
//! sweep
//! hold 100 -90
//! hold 500 -76.36363636363636
//! sweep
//! ...
//! end
//! ```
//!
//! `hold <ms> <mV>` is a constant segment, `ramp <ms> <mV from> <mV to>` a
//! linear one. Lines starting with `#` are comments.

use std::fmt::{self, Write as _};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProtocolKind {
    Activation,
    Inactivation,
    Deactivation,
    ActionPotentials,
    Ramps,
}

impl ProtocolKind {
    pub const ALL: [ProtocolKind; 5] = [
        ProtocolKind::Activation,
        ProtocolKind::Inactivation,
        ProtocolKind::Deactivation,
        ProtocolKind::ActionPotentials,
        ProtocolKind::Ramps,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProtocolKind::Activation => "activation",
            ProtocolKind::Inactivation => "inactivation",
            ProtocolKind::Deactivation => "deactivation",
            ProtocolKind::ActionPotentials => "action_potentials",
            ProtocolKind::Ramps => "ramps",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.name() == s)
    }
}

impl fmt::Display for ProtocolKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Segment {
    Hold { duration: f64, v: f64 },
    Ramp { duration: f64, v_start: f64, v_end: f64 },
}

impl Segment {
    pub fn duration(&self) -> f64 {
        match *self {
            Segment::Hold { duration, .. } | Segment::Ramp { duration, .. } => duration,
        }
    }

    /// Voltage at time `t` after the segment start.
    #[inline]
    pub fn voltage_at(&self, t: f64) -> f64 {
        match *self {
            Segment::Hold { v, .. } => v,
            Segment::Ramp {
                duration,
                v_start,
                v_end,
            } => v_start + (v_end - v_start) * (t / duration),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Sweep {
    pub segments: Vec<Segment>,
}

impl Sweep {
    pub fn duration(&self) -> f64 {
        self.segments.iter().map(Segment::duration).sum()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VoltageProtocol {
    pub kind: ProtocolKind,
    pub holding_v: f64,
    /// Maximum integration step, ms.
    pub dt: f64,
    pub sweeps: Vec<Sweep>,
}

impl VoltageProtocol {
    pub fn name(&self) -> &'static str {
        self.kind.name()
    }

    pub fn n_sweeps(&self) -> usize {
        self.sweeps.len()
    }

    pub fn duration(&self) -> f64 {
        self.sweeps.iter().map(Sweep::duration).fold(0.0, f64::max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.dt > 0.0 && self.dt.is_finite()) {
            return Err(Error::Input(format!("protocol `{}`: dt must be positive", self.name())));
        }
        if self.sweeps.is_empty() {
            return Err(Error::Input(format!("protocol `{}` has no sweeps", self.name())));
        }
        for (i, s) in self.sweeps.iter().enumerate() {
            if s.segments.is_empty() || s.segments.iter().any(|g| !(g.duration() > 0.0 && g.duration().is_finite())) {
                return Err(Error::Input(format!(
                    "protocol `{}` sweep {i}: segments need positive durations",
                    self.name()
                )));
            }
        }
        Ok(())
    }
}

/// Concrete amplitudes and durations of the five protocols.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ProtocolSettings {
    pub dt: f64,
    pub holding_v: f64,
    pub n_steps: usize,
    pub prestep_ms: f64,
    pub step_lo: f64,
    pub step_hi: f64,
    pub activation_ms: f64,
    pub inactivation_prestep_ms: f64,
    pub inactivation_test_v: f64,
    pub inactivation_test_ms: f64,
    pub deactivation_pre_v: f64,
    pub deactivation_pre_ms: f64,
    pub deactivation_lo: f64,
    pub deactivation_hi: f64,
    pub deactivation_ms: f64,
    pub ap_count: usize,
    pub ap_width_ms: f64,
    pub ap_interval_ms: f64,
    pub ap_rest_v: f64,
    pub ap_peak_v: f64,
    /// mV/ms
    pub ramp_slopes: Vec<f64>,
    pub ramp_lo: f64,
    pub ramp_hi: f64,
}

impl Default for ProtocolSettings {
    fn default() -> Self {
        ProtocolSettings {
            dt: 0.025,
            holding_v: -90.0,
            n_steps: 12,
            prestep_ms: 100.0,
            step_lo: -90.0,
            step_hi: 60.0,
            activation_ms: 500.0,
            inactivation_prestep_ms: 500.0,
            inactivation_test_v: 20.0,
            inactivation_test_ms: 200.0,
            deactivation_pre_v: 40.0,
            deactivation_pre_ms: 200.0,
            deactivation_lo: -120.0,
            deactivation_hi: -10.0,
            deactivation_ms: 300.0,
            ap_count: 10,
            ap_width_ms: 2.0,
            ap_interval_ms: 50.0,
            ap_rest_v: -70.0,
            ap_peak_v: 40.0,
            ramp_slopes: vec![0.1, 0.2, 0.5, 1.0],
            ramp_lo: -90.0,
            ramp_hi: 40.0,
        }
    }
}

fn levels(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

pub fn build_protocols() -> Vec<VoltageProtocol> {
    build_protocols_with(&ProtocolSettings::default())
}

pub fn build_protocols_with(s: &ProtocolSettings) -> Vec<VoltageProtocol> {
    let hold = |duration: f64, v: f64| Segment::Hold { duration, v };
    let step_family = |kind: ProtocolKind, make: &dyn Fn(f64) -> Vec<Segment>, lo: f64, hi: f64| VoltageProtocol {
        kind,
        holding_v: s.holding_v,
        dt: s.dt,
        sweeps: levels(lo, hi, s.n_steps)
            .into_iter()
            .map(|v| Sweep { segments: make(v) })
            .collect(),
    };

    let activation = step_family(
        ProtocolKind::Activation,
        &|v| vec![hold(s.prestep_ms, s.holding_v), hold(s.activation_ms, v)],
        s.step_lo,
        s.step_hi,
    );
    let inactivation = step_family(
        ProtocolKind::Inactivation,
        &|v| {
            vec![
                hold(s.prestep_ms, s.holding_v),
                hold(s.inactivation_prestep_ms, v),
                hold(s.inactivation_test_ms, s.inactivation_test_v),
            ]
        },
        s.step_lo,
        s.step_hi,
    );
    let deactivation = step_family(
        ProtocolKind::Deactivation,
        &|v| {
            vec![
                hold(s.prestep_ms, s.holding_v),
                hold(s.deactivation_pre_ms, s.deactivation_pre_v),
                hold(s.deactivation_ms, v),
            ]
        },
        s.deactivation_lo,
        s.deactivation_hi,
    );

    let half = s.ap_width_ms / 2.0;
    let mut spikes = Vec::with_capacity(3 * s.ap_count);
    for _ in 0..s.ap_count {
        spikes.push(hold(s.ap_interval_ms - s.ap_width_ms, s.ap_rest_v));
        spikes.push(Segment::Ramp {
            duration: half,
            v_start: s.ap_rest_v,
            v_end: s.ap_peak_v,
        });
        spikes.push(Segment::Ramp {
            duration: half,
            v_start: s.ap_peak_v,
            v_end: s.ap_rest_v,
        });
    }
    let action_potentials = VoltageProtocol {
        kind: ProtocolKind::ActionPotentials,
        holding_v: s.ap_rest_v,
        dt: s.dt,
        sweeps: vec![Sweep { segments: spikes }],
    };

    let span = s.ramp_hi - s.ramp_lo;
    let mut ramps = vec![hold(s.prestep_ms, s.ramp_lo)];
    for &slope in &s.ramp_slopes {
        let duration = span / slope;
        ramps.push(Segment::Ramp {
            duration,
            v_start: s.ramp_lo,
            v_end: s.ramp_hi,
        });
        ramps.push(Segment::Ramp {
            duration,
            v_start: s.ramp_hi,
            v_end: s.ramp_lo,
        });
    }
    let ramps = VoltageProtocol {
        kind: ProtocolKind::Ramps,
        holding_v: s.ramp_lo,
        dt: s.dt,
        sweeps: vec![Sweep { segments: ramps }],
    };

    vec![activation, inactivation, deactivation, action_potentials, ramps]
}

pub fn write_protocols(protocols: &[VoltageProtocol]) -> String {
    let mut out = String::new();
    for p in protocols {
        writeln!(out, "protocol {}", p.name()).unwrap();
        writeln!(out, "holding {}", p.holding_v).unwrap();
        writeln!(out, "dt {}", p.dt).unwrap();
        for sweep in &p.sweeps {
            out.push_str("sweep\n");
            for seg in &sweep.segments {
                match *seg {
                    Segment::Hold { duration, v } => writeln!(out, "hold {duration} {v}").unwrap(),
                    Segment::Ramp {
                        duration,
                        v_start,
                        v_end,
                    } => writeln!(out, "ramp {duration} {v_start} {v_end}").unwrap(),
                }
            }
        }
        out.push_str("end\n");
    }
    out
}

pub fn parse_protocols(text: &str) -> Result<Vec<VoltageProtocol>> {
    let mut protocols = Vec::new();
    let mut current: Option<VoltageProtocol> = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let err = |msg: &str| Error::Format(format!("protocol text line {}: {msg}", i + 1));
        let mut words = line.split_whitespace();
        let key = words.next().unwrap();
        let nums: Vec<&str> = words.collect();
        let num = |k: usize| -> Result<f64> {
            nums.get(k)
                .and_then(|w| w.parse::<f64>().ok())
                .ok_or_else(|| err("expected a number"))
        };
        match key {
            "protocol" => {
                if current.is_some() {
                    return Err(err("nested protocol; missing `end`"));
                }
                let kind = nums
                    .first()
                    .and_then(|n| ProtocolKind::from_name(n))
                    .ok_or_else(|| err("unknown protocol name"))?;
                current = Some(VoltageProtocol {
                    kind,
                    holding_v: f64::NAN,
                    dt: f64::NAN,
                    sweeps: Vec::new(),
                });
            }
            "end" => {
                let p = current.take().ok_or_else(|| err("`end` outside a protocol"))?;
                if p.holding_v.is_nan() {
                    return Err(err("protocol is missing `holding`"));
                }
                p.validate()?;
                protocols.push(p);
            }
            _ => {
                let p = current.as_mut().ok_or_else(|| err("statement outside a protocol"))?;
                match key {
                    "holding" => p.holding_v = num(0)?,
                    "dt" => p.dt = num(0)?,
                    "sweep" => p.sweeps.push(Sweep { segments: Vec::new() }),
                    "hold" | "ramp" => {
                        let seg = if key == "hold" {
                            Segment::Hold {
                                duration: num(0)?,
                                v: num(1)?,
                            }
                        } else {
                            Segment::Ramp {
                                duration: num(0)?,
                                v_start: num(1)?,
                                v_end: num(2)?,
                            }
                        };
                        p.sweeps.last_mut().ok_or_else(|| err("segment before `sweep`"))?.segments.push(seg);
                    }
                    _ => return Err(err(&format!("unknown statement `{key}`"))),
                }
            }
        }
    }
    if current.is_some() {
        return Err(Error::Format("protocol text ends inside a protocol".into()));
    }
    Ok(protocols)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn five_protocols() {
        let ps = build_protocols();
        assert_eq!(ps.len(), 5);
        let kinds: Vec<_> = ps.iter().map(|p| p.kind).collect();
        assert_eq!(kinds, ProtocolKind::ALL.to_vec());
        for p in &ps[..3] {
            assert_eq!(p.n_sweeps(), 12);
        }
        let act = &ps[0];
        let amps: Vec<f64> = act
            .sweeps
            .iter()
            .map(|s| match s.segments[1] {
                Segment::Hold { v, .. } => v,
                _ => panic!(),
            })
            .collect();
        assert_eq!(amps[0], -90.0);
        assert!((amps[11] - 60.0).abs() < 1e-12);
        for p in &ps {
            p.validate().unwrap();
        }
    }

    #[test]
    fn ramps_have_four_pairs() {
        let ps = build_protocols();
        let ramps = &ps[4].sweeps[0].segments;
        let n_ramps = ramps.iter().filter(|s| matches!(s, Segment::Ramp { .. })).count();
        assert_eq!(n_ramps, 8);
        let ups = ramps
            .iter()
            .filter(|s| matches!(s, Segment::Ramp { v_start, v_end, .. } if v_end > v_start))
            .count();
        assert_eq!(ups, 4);
    }

    #[test]
    fn action_potential_timing() {
        let ap = &build_protocols()[3];
        assert!((ap.duration() - 500.0).abs() < 1e-9);
        let peaks = ap.sweeps[0]
            .segments
            .iter()
            .filter(|s| matches!(s, Segment::Ramp { v_end, .. } if *v_end == 40.0))
            .count();
        assert_eq!(peaks, 10);
    }

    #[test]
    fn text_round_trip() {
        let ps = build_protocols();
        let text = write_protocols(&ps);
        assert_eq!(parse_protocols(&text).unwrap(), ps);
    }

    #[test]
    fn text_errors() {
        assert!(parse_protocols("protocol nope\nend\n").is_err());
        assert!(parse_protocols("hold 1 2\n").is_err());
        assert!(parse_protocols("protocol ramps\nholding -90\ndt 0.1\nsweep\nhold 1\nend\n").is_err());
        assert!(parse_protocols("protocol ramps\nholding -90\ndt 0.1\nsweep\nhold 10 0\n").is_err());
        assert!(parse_protocols("# only a comment\n").unwrap().is_empty());
    }
}
