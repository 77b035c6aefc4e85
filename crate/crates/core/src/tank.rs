//! Water-tank plant and the analog level-sensor path.
//!
//! The plant is a single tank with an inlet (fill) valve and an outlet
//! (drain) valve, each moving a constant volume per second while open.
//! Integration is explicit Euler at the kernel tick, which is exact between
//! valve switching events since the rates are piecewise constant.
//!
//! The sensor maps level linearly onto `[0, v_max]` volts, adds zero-mean
//! gaussian noise drawn from a counter-addressed stream (one draw per tick
//! index), and clamps at the supply rail `v_rail`, which sits above full
//! scale so that over-range readings are representable.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum TankError {
    #[error("invalid tank parameters: {0}")]
    InvalidParams(&'static str),
    #[error("invalid sensor model: {0}")]
    InvalidSensor(&'static str),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(default)]
pub struct TankParams<T: Scalar> {
    /// Full level in level-units.
    pub capacity: T,
    /// Level-units per second added while the fill valve is open.
    pub fill_rate: T,
    /// Level-units per second removed while the drain valve is open.
    pub drain_rate: T,
    /// Seconds per tick.
    pub dt: T,
}

impl<T: Scalar> Default for TankParams<T> {
    fn default() -> Self {
        Self {
            capacity: T::lit(300.0),
            fill_rate: T::lit(6.0),
            drain_rate: T::lit(2.5),
            dt: T::lit(1.0 / 15.0),
        }
    }
}

impl<T: Scalar> TankParams<T> {
    pub fn validate(&self) -> Result<(), TankError> {
        if !(self.capacity > T::zero()) {
            return Err(TankError::InvalidParams("capacity must be positive"));
        }
        if !(self.drain_rate > T::zero()) {
            return Err(TankError::InvalidParams("drain_rate must be positive"));
        }
        if !(self.fill_rate > self.drain_rate) {
            return Err(TankError::InvalidParams("fill_rate must exceed drain_rate"));
        }
        if !(self.dt > T::zero()) {
            return Err(TankError::InvalidParams("dt must be positive"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct TankState<T: Scalar> {
    pub level: T,
    pub fill_open: bool,
    pub drain_open: bool,
    pub tick: u64,
}

impl<T: Scalar> TankState<T> {
    pub fn at_level(level: T) -> Self {
        Self {
            level,
            ..Self::default()
        }
    }
}

/// Advances the plant one tick with the given valve commands.
pub fn step_tank<T: Scalar>(
    state: &TankState<T>,
    params: &TankParams<T>,
    fill_cmd: bool,
    drain_cmd: bool,
) -> TankState<T> {
    let mut level = state.level;
    if fill_cmd {
        level = level + params.fill_rate * params.dt;
    }
    if drain_cmd {
        level = level - params.drain_rate * params.dt;
    }
    TankState {
        level: level.clamp_to(T::zero(), params.capacity),
        fill_open: fill_cmd,
        drain_open: drain_cmd,
        tick: state.tick + 1,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(default)]
pub struct SensorModel<T: Scalar> {
    /// Volts at full-scale level.
    pub v_max: T,
    /// Saturation voltage; readings clamp to `[0, v_rail]`.
    pub v_rail: T,
    /// Standard deviation of additive noise in volts.
    pub noise_sigma: T,
    pub rng_seed: u64,
}

impl<T: Scalar> Default for SensorModel<T> {
    fn default() -> Self {
        Self {
            v_max: T::lit(10.0),
            v_rail: T::lit(11.0),
            // 0.15 level-units at 300 units / 10 V
            noise_sigma: T::lit(0.005),
            rng_seed: 0x5EED_0001,
        }
    }
}

impl<T: Scalar> SensorModel<T> {
    pub fn validate(&self) -> Result<(), TankError> {
        if !(self.v_max > T::zero()) {
            return Err(TankError::InvalidSensor("v_max must be positive"));
        }
        if !(self.v_rail >= self.v_max) {
            return Err(TankError::InvalidSensor("v_rail must be at least v_max"));
        }
        if !(self.noise_sigma >= T::zero()) {
            return Err(TankError::InvalidSensor("noise_sigma must be non-negative"));
        }
        Ok(())
    }

    /// Noise sigma expressed in level-units for a tank of `capacity`.
    pub fn noise_sigma_levels(&self, capacity: T) -> T {
        self.noise_sigma * capacity / self.v_max
    }

    /// Voltage offset equivalent to `levels` level-units.
    pub fn levels_to_volts(&self, levels: T, capacity: T) -> T {
        levels * self.v_max / capacity
    }
}

/// Counter-addressed gaussian noise source.
///
/// Each tick index selects an independent ChaCha stream, so the draw for a
/// tick does not depend on how many draws were taken before it.
#[derive(Debug, Clone)]
pub struct SensorNoise {
    base: ChaCha8Rng,
}

impl SensorNoise {
    pub fn new(seed: u64) -> Self {
        Self {
            base: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    /// Standard normal draw for `tick`.
    pub fn standard_normal(&self, tick: u64) -> f64 {
        let mut rng = self.base.clone();
        rng.set_stream(tick);
        StandardNormal.sample(&mut rng)
    }
}

/// Converts a true level into sensor volts, noise included, clamped to the rail.
pub fn transduce<T: Scalar>(
    true_level: T,
    capacity: T,
    sensor: &SensorModel<T>,
    noise: &SensorNoise,
    tick: u64,
) -> T {
    let mut v = true_level * sensor.v_max / capacity;
    if sensor.noise_sigma > T::zero() {
        v = v + sensor.noise_sigma * T::lit(noise.standard_normal(tick));
    }
    v.clamp_to(T::zero(), sensor.v_rail)
}

/// Inverse transduction used for the PLC input register.
pub fn to_reported<T: Scalar>(voltage: T, capacity: T, sensor: &SensorModel<T>) -> T {
    voltage * capacity / sensor.v_max
}

/// One end-to-end sensor reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct SensorSample<T: Scalar> {
    pub true_level: T,
    pub voltage: T,
    pub reported_level: T,
}
