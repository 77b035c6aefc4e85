//! Sensor-reading verification: PUF pair matching plus temporal spread.
//!
//! Output code bits:
//! - bit 0: PUF authentication passed
//! - bit 1: temporal authentication passed
//! - bit 2: a new enrollment pair was stored this tick
//!
//! PUF checks only engage within `±tolerance` of a threshold; elsewhere the
//! previous bit 0 is retained. The temporal check runs every tick and, once
//! failed, stays failed until a temporal reset.

mod queue;
mod table;

use serde::{Deserialize, Serialize};

pub use queue::MinMaxQueue;
pub use table::{EnrollmentDocument, EnrollmentPair, EnrollmentTable};

use crate::puf::Response;
use crate::scalar::{round_to_i64, Scalar};

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum VerifierError {
    #[error("authentication attempted with an empty enrollment table")]
    NotEnrolled,
    #[error("invalid verifier config: {0}")]
    InvalidConfig(String),
    #[error("enrollment key {0} lies outside every threshold window")]
    KeyOutsideWindow(i64),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(default)]
pub struct VerifierConfig<T: Scalar> {
    pub thresholds: Vec<T>,
    pub tolerance: T,
    pub queue_len: usize,
    /// Multiplier on the enrolled maximum spread. Sensor noise makes the
    /// largest authentication-time spread grow with run length, so a factor
    /// of exactly 1 eventually fires on fault-free data.
    pub temporal_margin: T,
    /// Response bits allowed to differ for a match.
    pub response_tolerance: u32,
}

impl<T: Scalar> Default for VerifierConfig<T> {
    fn default() -> Self {
        Self {
            thresholds: (0..=15).map(|i| T::lit(20.0 * i as f64)).collect(),
            tolerance: T::lit(2.0),
            queue_len: 32,
            temporal_margin: T::lit(1.1),
            response_tolerance: 0,
        }
    }
}

impl<T: Scalar> VerifierConfig<T> {
    pub fn validate(&self) -> Result<(), VerifierError> {
        let bad = |m: &str| Err(VerifierError::InvalidConfig(m.to_string()));
        if self.thresholds.is_empty() {
            return bad("no thresholds");
        }
        if !(self.tolerance > T::zero()) {
            return bad("tolerance must be positive");
        }
        if self.queue_len < 2 {
            return bad("queue_len must be at least 2");
        }
        if !(self.temporal_margin > T::zero()) {
            return bad("temporal_margin must be positive");
        }
        for w in self.thresholds.windows(2) {
            let spacing = w[1] - w[0];
            if !(spacing > T::zero()) {
                return bad("thresholds must be strictly increasing");
            }
            if !(T::lit(2.0) * self.tolerance < spacing) {
                return bad("tolerance windows overlap");
            }
        }
        Ok(())
    }
}

/// The threshold whose tolerance window contains `level`, if any.
pub fn nearest_threshold<T: Scalar>(level: T, cfg: &VerifierConfig<T>) -> Option<T> {
    cfg.thresholds
        .iter()
        .copied()
        .find(|&t| (level - t).abs() <= cfg.tolerance)
}

/// Integer key under which a reading is enrolled and looked up.
pub fn level_key<T: Scalar>(level: T) -> i64 {
    round_to_i64(level)
}

fn key_in_window<T: Scalar>(key: i64, cfg: &VerifierConfig<T>) -> bool {
    nearest_threshold(T::lit(key as f64), cfg).is_some()
}

/// Three-bit verifier output.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct VerifierOutput {
    pub code: u8,
}

impl VerifierOutput {
    pub fn from_bits(puf_ok: bool, temporal_ok: bool, new_pair: bool) -> Self {
        Self {
            code: u8::from(puf_ok) | u8::from(temporal_ok) << 1 | u8::from(new_pair) << 2,
        }
    }

    pub fn puf_ok(self) -> bool {
        self.code & 1 != 0
    }

    pub fn temporal_ok(self) -> bool {
        self.code & 2 != 0
    }

    pub fn new_pair(self) -> bool {
        self.code & 4 != 0
    }

    pub fn authenticated(self) -> bool {
        self.code == 3
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VerifierInput<T: Scalar> {
    pub reported_level: T,
    pub response: Response,
    pub enroll_flag: bool,
    pub temporal_reset: bool,
}

#[derive(Debug, Clone)]
pub struct TemporalState<T: Scalar> {
    pub queue: MinMaxQueue<T>,
    pub latched_fail: bool,
}

impl<T: Scalar> TemporalState<T> {
    pub fn new(queue_len: usize) -> Self {
        Self {
            queue: MinMaxQueue::new(queue_len),
            latched_fail: false,
        }
    }

    /// Spread of the window; zero when empty.
    pub fn diff(&self) -> T {
        match (self.queue.max(), self.queue.min()) {
            (Some(hi), Some(lo)) => hi - lo,
            _ => T::zero(),
        }
    }

    /// Clears the latch and restarts the window from `current`.
    pub fn reset(&mut self, current: T) {
        self.latched_fail = false;
        self.queue.clear();
        self.queue.push(current);
    }
}

/// Temporal check for one tick; returns the temporal bit.
///
/// In enrollment the spread only raises `enrolled_max`. In authentication a
/// spread above `temporal_margin * enrolled_max` latches a failure.
pub fn temporal_step<T: Scalar>(
    state: &mut TemporalState<T>,
    enrolled_max: &mut T,
    enroll_mode: bool,
    cfg: &VerifierConfig<T>,
) -> bool {
    let diff = state.diff();
    if enroll_mode {
        if diff > *enrolled_max {
            *enrolled_max = diff;
        }
        return true;
    }
    if diff > cfg.temporal_margin * *enrolled_max {
        state.latched_fail = true;
    }
    !state.latched_fail
}

/// Stores `(round(level), response)` if the key is in a window and new.
pub fn enroll_step<T: Scalar>(
    table: &mut EnrollmentTable<T>,
    level: T,
    response: Response,
    cfg: &VerifierConfig<T>,
) -> bool {
    let key = level_key(level);
    if !key_in_window(key, cfg) || table.pairs.contains_key(&key) {
        return false;
    }
    table.pairs.insert(key, response);
    true
}

/// PUF authentication bit for one reading.
pub fn auth_step<T: Scalar>(
    table: &EnrollmentTable<T>,
    level: T,
    response: Response,
    prev_bit0: bool,
    cfg: &VerifierConfig<T>,
) -> bool {
    let key = level_key(level);
    if !key_in_window(key, cfg) {
        return prev_bit0;
    }
    table
        .pairs
        .get(&key)
        .is_some_and(|stored| stored.hamming(response) <= cfg.response_tolerance)
}

/// Fraction of thresholds with at least one enrolled key in their window.
pub fn enrollment_coverage<T: Scalar>(table: &EnrollmentTable<T>, cfg: &VerifierConfig<T>) -> f64 {
    if cfg.thresholds.is_empty() {
        return 0.0;
    }
    let covered = cfg
        .thresholds
        .iter()
        .filter(|&&t| {
            table
                .pairs
                .keys()
                .any(|&k| (T::lit(k as f64) - t).abs() <= cfg.tolerance)
        })
        .count();
    covered as f64 / cfg.thresholds.len() as f64
}

/// Verification module state machine, stepped once per tick.
#[derive(Debug, Clone)]
pub struct Verifier<T: Scalar> {
    cfg: VerifierConfig<T>,
    table: EnrollmentTable<T>,
    temporal: TemporalState<T>,
    bit0: bool,
    last: VerifierOutput,
}

impl<T: Scalar> Verifier<T> {
    /// Starts from `table` with bit 0 held high and the latch clear.
    pub fn new(cfg: VerifierConfig<T>, table: EnrollmentTable<T>) -> Result<Self, VerifierError> {
        cfg.validate()?;
        table.validate(&cfg)?;
        let temporal = TemporalState::new(cfg.queue_len);
        Ok(Self {
            cfg,
            table,
            temporal,
            bit0: true,
            last: VerifierOutput::from_bits(true, true, false),
        })
    }

    pub fn config(&self) -> &VerifierConfig<T> {
        &self.cfg
    }

    pub fn table(&self) -> &EnrollmentTable<T> {
        &self.table
    }

    pub fn into_table(self) -> EnrollmentTable<T> {
        self.table
    }

    pub fn temporal(&self) -> &TemporalState<T> {
        &self.temporal
    }

    pub fn last_output(&self) -> VerifierOutput {
        self.last
    }

    pub fn coverage(&self) -> f64 {
        enrollment_coverage(&self.table, &self.cfg)
    }

    pub fn step(&mut self, input: VerifierInput<T>) -> Result<VerifierOutput, VerifierError> {
        if !input.enroll_flag && self.table.pairs.is_empty() {
            return Err(VerifierError::NotEnrolled);
        }
        let level = input.reported_level;
        self.temporal.queue.push(level);
        if input.temporal_reset {
            self.temporal.reset(level);
        }
        let temporal_ok = temporal_step(
            &mut self.temporal,
            &mut self.table.max_temporal_diff,
            input.enroll_flag,
            &self.cfg,
        );
        let new_pair = if input.enroll_flag {
            self.bit0 = true;
            enroll_step(&mut self.table, level, input.response, &self.cfg)
        } else {
            self.bit0 = auth_step(&self.table, level, input.response, self.bit0, &self.cfg);
            false
        };
        self.last = VerifierOutput::from_bits(self.bit0, temporal_ok, new_pair);
        Ok(self.last)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> VerifierConfig<f64> {
        VerifierConfig::default()
    }

    fn r(bits: u32) -> Response {
        Response::new(bits).unwrap()
    }

    fn enrolled(pairs: &[(i64, u32)], max_diff: f64) -> EnrollmentTable<f64> {
        let mut t = EnrollmentTable::default();
        for &(k, b) in pairs {
            t.pairs.insert(k, r(b));
        }
        t.max_temporal_diff = max_diff;
        t
    }

    fn auth(level: f64, response: Response) -> VerifierInput<f64> {
        VerifierInput {
            reported_level: level,
            response,
            enroll_flag: false,
            temporal_reset: false,
        }
    }

    #[test]
    fn threshold_windows() {
        let c = cfg();
        assert_eq!(nearest_threshold(98.0, &c), Some(100.0));
        assert_eq!(nearest_threshold(102.0, &c), Some(100.0));
        assert_eq!(nearest_threshold(85.0, &c), None);
        assert_eq!(nearest_threshold(300.0, &c), Some(300.0));
        assert_eq!(nearest_threshold(10.0, &c), None);
        assert_eq!(nearest_threshold(-1.5, &c), Some(0.0));
    }

    #[test]
    fn config_validation() {
        assert!(cfg().validate().is_ok());
        let mut c = cfg();
        c.tolerance = 10.0;
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.thresholds = vec![0.0, 40.0, 20.0];
        assert!(c.validate().is_err());
        let mut c = cfg();
        c.queue_len = 1;
        assert!(c.validate().is_err());
    }

    #[test]
    fn enroll_step_cases() {
        let c = cfg();
        let mut t = EnrollmentTable::default();
        assert!(enroll_step(&mut t, 100.2, r(5), &c));
        assert_eq!(t.pairs.get(&100), Some(&r(5)));
        assert!(!enroll_step(&mut t, 99.8, r(9), &c));
        assert_eq!(t.pairs.get(&100), Some(&r(5)));
        assert!(!enroll_step(&mut t, 85.0, r(5), &c));
        assert_eq!(t.pairs.len(), 1);
    }

    #[test]
    fn auth_step_cases() {
        let c = cfg();
        let t = enrolled(&[(100, 0b1011)], 12.0);
        assert!(auth_step(&t, 100.3, r(0b1011), false, &c));
        assert!(!auth_step(&t, 100.3, r(0b1010), true, &c));
        assert!(auth_step(&t, 150.0, r(0), true, &c));
        assert!(!auth_step(&t, 150.0, r(0), false, &c));
        // in-window but never enrolled
        assert!(!auth_step(&t, 101.9, r(0b1011), true, &c));
    }

    #[test]
    fn response_tolerance_hook() {
        let mut c = cfg();
        c.response_tolerance = 1;
        let t = enrolled(&[(100, 0b1011)], 12.0);
        assert!(auth_step(&t, 100.0, r(0b1010), false, &c));
        assert!(!auth_step(&t, 100.0, r(0b0000), false, &c));
    }

    #[test]
    fn coverage_cases() {
        let c = cfg();
        assert_eq!(enrollment_coverage(&EnrollmentTable::default(), &c), 0.0);
        let all: Vec<(i64, u32)> = (0..=15).map(|i| (20 * i, 0)).collect();
        assert_eq!(enrollment_coverage(&enrolled(&all, 0.0), &c), 1.0);
        let one: Vec<(i64, u32)> = (98..=102).map(|k| (k, 0)).collect();
        assert_eq!(enrollment_coverage(&enrolled(&one, 0.0), &c), 1.0 / 16.0);
    }

    #[test]
    fn authenticated_code_three() {
        let mut v = Verifier::new(cfg(), enrolled(&[(98, 0x155)], 12.8)).unwrap();
        assert_eq!(v.step(auth(98.0, r(0x155))).unwrap().code, 3);
    }

    #[test]
    fn mismatch_gives_code_two() {
        let mut v = Verifier::new(cfg(), enrolled(&[(98, 0x155)], 12.8)).unwrap();
        assert_eq!(v.step(auth(98.0, r(0x154))).unwrap().code, 2);
    }

    #[test]
    fn out_of_window_retains_bit0() {
        let mut v = Verifier::new(cfg(), enrolled(&[(98, 0x155)], 12.8)).unwrap();
        assert_eq!(v.step(auth(98.0, r(0x154))).unwrap().code, 2);
        assert_eq!(v.step(auth(90.0, r(0))).unwrap().code, 2);
        let mut v = Verifier::new(cfg(), enrolled(&[(98, 0x155)], 12.8)).unwrap();
        assert_eq!(v.step(auth(85.0, r(0))).unwrap().code, 3);
    }

    #[test]
    fn spike_latches_until_reset() {
        let mut v = Verifier::new(cfg(), enrolled(&[(98, 0x155)], 12.8)).unwrap();
        for _ in 0..40 {
            assert_eq!(v.step(auth(150.0, r(0))).unwrap().code, 3);
        }
        let out = v.step(auth(250.0, r(0))).unwrap();
        assert!(v.temporal().diff() > 12.8);
        assert_eq!(out.code, 1);
        for _ in 0..100 {
            assert_eq!(v.step(auth(150.0, r(0))).unwrap().code, 1);
        }
        assert_eq!(v.temporal().diff(), 0.0);
        let reset = VerifierInput {
            temporal_reset: true,
            ..auth(150.0, r(0))
        };
        assert_eq!(v.step(reset).unwrap().code, 3);
        assert_eq!(v.step(auth(150.0, r(0))).unwrap().code, 3);
    }

    #[test]
    fn enrollment_codes_and_max_diff() {
        let mut v = Verifier::new(cfg(), EnrollmentTable::default()).unwrap();
        let enroll = |level: f64| VerifierInput {
            reported_level: level,
            response: r(7),
            enroll_flag: true,
            temporal_reset: false,
        };
        assert_eq!(v.step(enroll(100.0)).unwrap().code, 7);
        assert_eq!(v.step(enroll(100.1)).unwrap().code, 3);
        assert_eq!(v.step(enroll(110.0)).unwrap().code, 3);
        assert!((v.table().max_temporal_diff - 10.0).abs() < 1e-12);
    }

    #[test]
    fn empty_table_rejects_authentication() {
        let mut v = Verifier::new(cfg(), EnrollmentTable::default()).unwrap();
        assert_eq!(v.step(auth(100.0, r(0))), Err(VerifierError::NotEnrolled));
    }

    #[test]
    fn temporal_step_all_equal() {
        let c = cfg();
        let mut st = TemporalState::new(8);
        for _ in 0..8 {
            st.queue.push(42.0);
        }
        let mut max = 5.0;
        assert!(temporal_step(&mut st, &mut max, false, &c));
        assert_eq!(st.diff(), 0.0);
    }
}
