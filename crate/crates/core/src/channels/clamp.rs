//! Voltage-clamp simulation of a single gating variable.
//!
//! The gate obeys `dx/dt = (x_∞(V) - x) / τ(V)`. With `V` frozen over a step
//! of length `h` the solution is exact: `x ← x_∞ + (x - x_∞)·exp(-h/τ)`.
//! Constant-voltage segments are therefore advanced in one update per output
//! sample; ramp segments are advanced in sub-steps of at most `dt` with the
//! voltage frozen at the sub-step midpoint. Integration breakpoints always
//! include segment boundaries and output sample times, so traces computed
//! with different `dt` are sampled at identical instants.

use crate::binio::{put_f64s, put_string, put_u64, read_file, write_file, Reader};
use crate::error::{Error, Result};

use super::kinetics::Channel;
use super::protocol::{Segment, Sweep, VoltageProtocol};

pub const SAMPLES_PER_SWEEP: usize = 512;

const MAGIC: &[u8; 8] = b"MCTRACE\x01";

#[derive(Clone, Debug, PartialEq)]
pub struct ProtocolTraces {
    pub name: String,
    /// Normalized current `I / ḡ` per sweep.
    pub sweeps: Vec<Vec<f64>>,
}

impl ProtocolTraces {
    /// Sweeps appended sweep-major.
    pub fn concatenated(&self) -> Vec<f64> {
        self.sweeps.concat()
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceSet {
    pub protocols: Vec<ProtocolTraces>,
}

impl TraceSet {
    pub fn protocol(&self, name: &str) -> Option<&ProtocolTraces> {
        self.protocols.iter().find(|p| p.name == name)
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = MAGIC.to_vec();
        put_u64(&mut buf, self.protocols.len() as u64);
        for p in &self.protocols {
            put_string(&mut buf, &p.name);
            put_u64(&mut buf, p.sweeps.len() as u64);
            put_u64(&mut buf, p.sweeps.first().map_or(0, Vec::len) as u64);
            for s in &p.sweeps {
                put_f64s(&mut buf, s);
            }
        }
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        if r.take(8)? != MAGIC {
            return Err(Error::Format("not a trace file".into()));
        }
        let n = r.len()?;
        let mut protocols = Vec::with_capacity(n);
        for _ in 0..n {
            let name = r.string()?;
            let n_sweeps = r.len()?;
            let len = r.len()?;
            let sweeps = (0..n_sweeps).map(|_| r.f64s(len)).collect::<Result<Vec<_>>>()?;
            protocols.push(ProtocolTraces { name, sweeps });
        }
        if !r.finished() {
            return Err(Error::Format("trailing bytes in trace file".into()));
        }
        Ok(TraceSet { protocols })
    }

    pub fn save(&self, path: &std::path::Path) -> Result<()> {
        write_file(path, &self.to_bytes())
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_bytes(&read_file(path)?)
    }
}

/// Gate value and normalized current at each output sample of one sweep.
#[derive(Clone, Debug)]
pub struct SweepTrace {
    pub times: Vec<f64>,
    pub gate: Vec<f64>,
    pub current: Vec<f64>,
}

const TIME_EPS: f64 = 1e-9;

/// Largest voltage change within one ramp substep, in mV. Fast ramps (action
/// potentials) are therefore stepped more finely than `dt`.
pub const MAX_RAMP_STEP_MV: f64 = 0.25;

pub fn integrate_sweep(channel: &Channel, sweep: &Sweep, holding_v: f64, dt: f64, n_samples: usize) -> SweepTrace {
    let duration = sweep.duration();
    let m = channel.exponent();
    let e_rev = channel.e_rev();

    let mut starts = Vec::with_capacity(sweep.segments.len());
    let mut acc = 0.0;
    for seg in &sweep.segments {
        starts.push(acc);
        acc += seg.duration();
    }
    let seg_end = |i: usize| starts[i] + sweep.segments[i].duration();

    let (x_hold, _) = channel.gate_dynamics(holding_v);
    let mut x = x_hold;
    let mut t = 0.0;
    let mut seg = 0;

    let mut out = SweepTrace {
        times: Vec::with_capacity(n_samples),
        gate: Vec::with_capacity(n_samples),
        current: Vec::with_capacity(n_samples),
    };

    for i in 0..n_samples {
        let target = duration * i as f64 / n_samples as f64;
        while t < target - TIME_EPS {
            let end = seg_end(seg);
            let next = target.min(end);
            let segment = &sweep.segments[seg];
            match *segment {
                Segment::Hold { v, .. } => {
                    let (x_inf, tau) = channel.gate_dynamics(v);
                    x = x_inf + (x - x_inf) * (-(next - t) / tau).exp();
                }
                Segment::Ramp { duration, v_start, v_end } => {
                    let span = next - t;
                    let dv = (v_end - v_start).abs() * span / duration;
                    let n_sub = ((span / dt) - TIME_EPS).ceil().max((dv / MAX_RAMP_STEP_MV - TIME_EPS).ceil()).max(1.0) as usize;
                    let h = span / n_sub as f64;
                    for k in 0..n_sub {
                        let mid = t + (k as f64 + 0.5) * h - starts[seg];
                        let (x_inf, tau) = channel.gate_dynamics(segment.voltage_at(mid));
                        x = x_inf + (x - x_inf) * (-h / tau).exp();
                    }
                }
            }
            t = next;
            if t >= end - TIME_EPS && seg + 1 < sweep.segments.len() {
                seg += 1;
            }
        }
        // Right-continuous voltage at the sample instant.
        while seg + 1 < sweep.segments.len() && target >= seg_end(seg) - TIME_EPS {
            seg += 1;
        }
        let v = sweep.segments[seg].voltage_at(target - starts[seg]);
        out.times.push(target);
        out.gate.push(x);
        out.current.push(x.powf(m) * (v - e_rev));
    }
    out
}

/// Normalized current traces of one protocol, `n_samples` per sweep.
pub fn simulate_protocol(channel: &Channel, protocol: &VoltageProtocol, n_samples: usize) -> Result<ProtocolTraces> {
    channel.validate()?;
    protocol.validate()?;
    let mut sweeps = Vec::with_capacity(protocol.n_sweeps());
    for (i, sweep) in protocol.sweeps.iter().enumerate() {
        let trace = integrate_sweep(channel, sweep, protocol.holding_v, protocol.dt, n_samples);
        if trace.current.iter().chain(&trace.gate).any(|v| !v.is_finite()) {
            return Err(Error::SimulationDivergence {
                protocol: protocol.name().to_string(),
                sweep: i,
            });
        }
        sweeps.push(trace.current);
    }
    Ok(ProtocolTraces {
        name: protocol.name().to_string(),
        sweeps,
    })
}

/// Responses to every protocol, subsampled to [`SAMPLES_PER_SWEEP`] points per sweep.
pub fn simulate_clamp(channel: &Channel, protocols: &[VoltageProtocol]) -> Result<TraceSet> {
    let protocols = protocols
        .iter()
        .map(|p| simulate_protocol(channel, p, SAMPLES_PER_SWEEP))
        .collect::<Result<Vec<_>>>()?;
    Ok(TraceSet { protocols })
}

#[cfg(test)]
mod tests {
    use super::super::kinetics::{kd_rates, KdParams, KsParams};
    use super::super::protocol::{build_protocols, build_protocols_with, ProtocolKind, ProtocolSettings};
    use super::*;

    fn kd() -> Channel {
        Channel::Kd(KdParams::ground_truth())
    }

    fn ks() -> Channel {
        Channel::Ks(KsParams::ground_truth())
    }

    #[test]
    fn zero_driving_force() {
        let p = VoltageProtocol {
            kind: ProtocolKind::Activation,
            holding_v: -90.0,
            dt: 0.025,
            sweeps: vec![Sweep {
                segments: vec![Segment::Hold { duration: 200.0, v: -90.0 }],
            }],
        };
        for ch in [kd(), ks()] {
            let t = simulate_protocol(&ch, &p, 512).unwrap();
            assert!(t.sweeps[0].iter().all(|&v| v == 0.0));
        }
    }

    #[test]
    fn kd_converges_to_steady_state() {
        let (a, b) = kd_rates(0.0, &KdParams::ground_truth());
        let tau = 1.0 / (a + b);
        let sweep = Sweep {
            segments: vec![
                Segment::Hold { duration: 10.0, v: -90.0 },
                Segment::Hold {
                    duration: 10.0 * tau,
                    v: 0.0,
                },
            ],
        };
        let tr = integrate_sweep(&kd(), &sweep, -90.0, 0.025, 2048);
        let last = *tr.gate.last().unwrap();
        assert!((last - a / (a + b)).abs() < 1e-4, "{last}");
    }

    #[test]
    fn gate_stays_in_unit_interval() {
        for ch in [kd(), ks()] {
            for p in build_protocols() {
                for sweep in &p.sweeps {
                    let tr = integrate_sweep(&ch, sweep, p.holding_v, p.dt, 2048);
                    assert!(tr.gate.iter().all(|&g| (0.0..=1.0).contains(&g)));
                }
            }
        }
    }

    #[test]
    fn trace_shape() {
        let ts = simulate_clamp(&kd(), &build_protocols()).unwrap();
        assert_eq!(ts.protocols.len(), 5);
        for (p, want) in ts.protocols.iter().zip([12, 12, 12, 1, 1]) {
            assert_eq!(p.sweeps.len(), want);
            assert!(p.sweeps.iter().all(|s| s.len() == SAMPLES_PER_SWEEP && s.iter().all(|v| v.is_finite())));
        }
    }

    #[test]
    fn halving_dt_changes_little() {
        let coarse = build_protocols();
        let fine = build_protocols_with(&ProtocolSettings {
            dt: 0.0125,
            ..ProtocolSettings::default()
        });
        for ch in [kd(), ks()] {
            let a = simulate_clamp(&ch, &coarse).unwrap();
            let b = simulate_clamp(&ch, &fine).unwrap();
            let mut worst = 0.0f64;
            for (pa, pb) in a.protocols.iter().zip(&b.protocols) {
                for (sa, sb) in pa.sweeps.iter().zip(&pb.sweeps) {
                    for (x, y) in sa.iter().zip(sb) {
                        worst = worst.max((x - y).abs());
                    }
                }
            }
            assert!(worst < 1e-3, "max trace change {worst}");
        }
    }

    #[test]
    fn kd_activation_is_rectifying() {
        let ts = simulate_clamp(&kd(), &build_protocols()).unwrap();
        let ends: Vec<f64> = ts.protocols[0].sweeps.iter().map(|s| *s.last().unwrap()).collect();
        assert!(ends.windows(2).all(|w| w[1] > w[0]), "{ends:?}");
    }

    fn time_to_half_max(ch: &Channel) -> f64 {
        let act = &build_protocols()[0];
        let sweep = act.sweeps.last().unwrap();
        let n = 600_000;
        let tr = integrate_sweep(ch, sweep, act.holding_v, act.dt, n);
        let step_start = 100.0;
        let peak = tr.current.iter().copied().fold(f64::MIN, f64::max);
        let idx = tr
            .times
            .iter()
            .zip(&tr.current)
            .position(|(&t, &c)| t >= step_start && c >= 0.5 * peak)
            .unwrap();
        tr.times[idx] - step_start
    }

    #[test]
    fn ks_rises_slower_than_kd() {
        let kd_t = time_to_half_max(&kd());
        let ks_t = time_to_half_max(&ks());
        assert!(ks_t > 5.0 * kd_t, "K_s {ks_t} ms vs K_d {kd_t} ms");
    }

    #[test]
    fn trace_file_round_trip() {
        let ts = simulate_clamp(&ks(), &build_protocols()).unwrap();
        assert_eq!(TraceSet::from_bytes(&ts.to_bytes()).unwrap(), ts);
        let mut bytes = ts.to_bytes();
        bytes.pop();
        assert!(TraceSet::from_bytes(&bytes).is_err());
    }
}
