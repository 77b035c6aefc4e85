//! Scripted HMI operator: random setpoints and drain valve on a random cadence.

use std::io;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::plc::{decode_level, encode_level};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
#[error("invalid operator policy: {0}")]
pub struct PolicyError(pub &'static str);

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OperatorPolicy {
    pub low_range: [f64; 2],
    pub high_range: [f64; 2],
    /// Seconds of simulation time between actions.
    pub action_period: [f64; 2],
    pub seed: u64,
}

impl Default for OperatorPolicy {
    fn default() -> Self {
        Self {
            low_range: [30.0, 80.0],
            high_range: [200.0, 280.0],
            action_period: [5.0, 30.0],
            seed: 0x0be7_a70e,
        }
    }
}

impl OperatorPolicy {
    pub fn validate(&self) -> Result<(), PolicyError> {
        let ordered = |r: [f64; 2]| r[0] <= r[1] && r[0].is_finite() && r[1].is_finite();
        if !ordered(self.low_range) || !ordered(self.high_range) || !ordered(self.action_period) {
            return Err(PolicyError("ranges must be finite and ordered"));
        }
        if self.low_range[0] < 0.0 {
            return Err(PolicyError("low setpoints must be non-negative"));
        }
        if !(self.low_range[1] < self.high_range[0]) {
            return Err(PolicyError("low_range must lie below high_range"));
        }
        if !(self.action_period[0] > 0.0) {
            return Err(PolicyError("action periods must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OperatorAction {
    pub time_s: f64,
    pub low_sp: f64,
    pub high_sp: f64,
    pub drain: bool,
}

impl OperatorAction {
    /// HR0..HR2 payload for a single write-multiple.
    pub fn registers(&self) -> [u16; 3] {
        [
            encode_level(self.low_sp),
            encode_level(self.high_sp),
            u16::from(self.drain),
        ]
    }
}

fn draw(rng: &mut ChaCha8Rng, r: [f64; 2]) -> f64 {
    if r[0] == r[1] {
        r[0]
    } else {
        rng.random_range(r[0]..r[1])
    }
}

/// Deterministic action stream driven by simulation time.
#[derive(Debug, Clone)]
pub struct OperatorSchedule {
    policy: OperatorPolicy,
    rng: ChaCha8Rng,
    next_due: f64,
}

impl OperatorSchedule {
    pub fn new(policy: OperatorPolicy, first_action_at: f64) -> Self {
        Self {
            rng: ChaCha8Rng::seed_from_u64(policy.seed),
            policy,
            next_due: first_action_at,
        }
    }

    pub fn next_due(&self) -> f64 {
        self.next_due
    }

    /// Returns an action if one is due at `now`, then schedules the next.
    pub fn poll(&mut self, now: f64) -> Option<OperatorAction> {
        if now < self.next_due {
            return None;
        }
        // quantized to register precision so the log matches the wire
        let low_sp = decode_level(encode_level(draw(&mut self.rng, self.policy.low_range)));
        let high_sp = decode_level(encode_level(draw(&mut self.rng, self.policy.high_range)));
        let drain = self.rng.random_bool(0.5);
        let wait = draw(&mut self.rng, self.policy.action_period);
        self.next_due = now + wait;
        Some(OperatorAction {
            time_s: now,
            low_sp,
            high_sp,
            drain,
        })
    }
}

/// Writes `time_s,low_sp,high_sp,drain` rows.
pub fn write_action_log<W: io::Write>(actions: &[OperatorAction], out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["time_s", "low_sp", "high_sp", "drain"])?;
    for a in actions {
        w.write_record([
            format!("{:.4}", a.time_s),
            format!("{:.2}", a.low_sp),
            format!("{:.2}", a.high_sp),
            u8::from(a.drain).to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn run(policy: OperatorPolicy, n: usize) -> Vec<OperatorAction> {
        let mut s = OperatorSchedule::new(policy, 0.0);
        let mut out = Vec::new();
        let mut t = 0.0;
        while out.len() < n {
            if let Some(a) = s.poll(t) {
                out.push(a);
            }
            t += 1.0 / 15.0;
        }
        out
    }

    #[test]
    fn deterministic_log() {
        let p = OperatorPolicy::default();
        let mut a = Vec::new();
        let mut b = Vec::new();
        write_action_log(&run(p, 50), &mut a).unwrap();
        write_action_log(&run(p, 50), &mut b).unwrap();
        assert_eq!(a, b);
        let other = OperatorPolicy { seed: 1, ..p };
        assert_ne!(run(p, 5), run(other, 5));
    }

    #[test]
    fn ranges_and_cadence() {
        let p = OperatorPolicy::default();
        let actions = run(p, 200);
        for w in actions.windows(2) {
            let gap = w[1].time_s - w[0].time_s;
            assert!((5.0..30.0 + 0.07).contains(&gap), "{gap}");
        }
        for a in &actions {
            assert!(a.low_sp < a.high_sp);
            assert!((30.0..=80.0).contains(&a.low_sp));
            assert!((200.0..=280.0).contains(&a.high_sp));
        }
    }

    #[test]
    fn drain_is_balanced() {
        let mut s = OperatorSchedule::new(OperatorPolicy::default(), 0.0);
        let mut on = 0;
        for i in 0..1000 {
            let a = s.poll(100.0 * i as f64).unwrap();
            on += usize::from(a.drain);
        }
        assert!((450..=550).contains(&on), "{on}");
    }

    #[test]
    fn validation() {
        assert!(OperatorPolicy::default().validate().is_ok());
        let overlapping = OperatorPolicy {
            low_range: [30.0, 210.0],
            ..Default::default()
        };
        assert!(overlapping.validate().is_err());
        let zero_wait = OperatorPolicy {
            action_period: [0.0, 1.0],
            ..Default::default()
        };
        assert!(zero_wait.validate().is_err());
    }

    #[test]
    fn register_payload() {
        let a = OperatorAction {
            time_s: 0.0,
            low_sp: 50.0,
            high_sp: 250.0,
            drain: true,
        };
        assert_eq!(a.registers(), [5000, 25000, 1]);
    }
}
