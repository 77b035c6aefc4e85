//! Scripted sensor faults and the dormant trojan, applied in the voltage domain.

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tank::SensorModel;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum FaultError {
    #[error("fault event {index}: {reason}")]
    InvalidEvent { index: usize, reason: &'static str },
    #[error("{kind:?} events {first} and {second} overlap")]
    Overlap {
        kind: FaultKind,
        first: usize,
        second: usize,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaultKind {
    /// Additive impulse of `magnitude` level-units.
    Spike,
    /// Voltage pinned at the upper rail.
    HardoverPos,
    /// Voltage pinned at zero.
    HardoverNeg,
    /// Subtracts `magnitude` level-units once dormancy has elapsed.
    Trojan,
}

impl FaultKind {
    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "spike" => Some(Self::Spike),
            "hardover_pos" => Some(Self::HardoverPos),
            "hardover_neg" => Some(Self::HardoverNeg),
            "trojan" => Some(Self::Trojan),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct FaultEvent<T: Scalar> {
    pub kind: FaultKind,
    pub t_start: T,
    pub duration: T,
    #[serde(default)]
    pub magnitude: T,
}

impl<T: Scalar> FaultEvent<T> {
    pub fn end(&self) -> T {
        self.t_start + self.duration
    }

    pub fn covers(&self, t: T) -> bool {
        t >= self.t_start && t < self.end()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
#[serde(default)]
pub struct FaultScript<T: Scalar> {
    pub events: Vec<FaultEvent<T>>,
    /// Seconds of operation before a trojan can fire.
    pub trojan_dormancy: T,
}

impl<T: Scalar> Default for FaultScript<T> {
    fn default() -> Self {
        Self {
            events: Vec::new(),
            trojan_dormancy: T::lit(3600.0),
        }
    }
}

impl<T: Scalar> FaultScript<T> {
    pub fn validate(&self) -> Result<(), FaultError> {
        for (index, e) in self.events.iter().enumerate() {
            let reason = if !(e.t_start >= T::zero()) {
                Some("t_start must be non-negative")
            } else if !(e.duration > T::zero()) {
                Some("duration must be positive")
            } else if e.kind == FaultKind::Trojan && e.t_start < self.trojan_dormancy {
                Some("trojan event starts before dormancy elapses")
            } else {
                None
            };
            if let Some(reason) = reason {
                return Err(FaultError::InvalidEvent { index, reason });
            }
        }
        for (i, a) in self.events.iter().enumerate() {
            for (j, b) in self.events.iter().enumerate().skip(i + 1) {
                if a.kind == b.kind && a.t_start < b.end() && b.t_start < a.end() {
                    return Err(FaultError::Overlap {
                        kind: a.kind,
                        first: i,
                        second: j,
                    });
                }
            }
        }
        Ok(())
    }

    /// The first event that is live at `t`, accounting for trojan dormancy.
    pub fn active_at(&self, t: T) -> Option<(usize, &FaultEvent<T>)> {
        self.events.iter().enumerate().find(|(_, e)| {
            e.covers(t) && (e.kind != FaultKind::Trojan || t >= self.trojan_dormancy)
        })
    }

    /// Keeps events time-ordered.
    pub fn insert(&mut self, event: FaultEvent<T>) {
        let at = self.events.partition_point(|e| e.t_start <= event.t_start);
        self.events.insert(at, event);
    }
}

/// Applies the event live at `t`, if any, to a sensor voltage.
pub fn apply<T: Scalar>(
    voltage: T,
    t: T,
    script: &FaultScript<T>,
    sensor: &SensorModel<T>,
    capacity: T,
) -> T {
    let Some((_, event)) = script.active_at(t) else {
        return voltage;
    };
    let offset = sensor.levels_to_volts(event.magnitude, capacity);
    let v = match event.kind {
        FaultKind::Spike => voltage + offset,
        FaultKind::HardoverPos => sensor.v_rail,
        FaultKind::HardoverNeg => T::zero(),
        FaultKind::Trojan => voltage - offset,
    };
    v.clamp_to(T::zero(), sensor.v_rail)
}

/// Spike offset used when a script does not give one.
pub const DEFAULT_SPIKE_MAGNITUDE: f64 = 100.0;
/// Trojan under-report used when a script does not give one.
pub const DEFAULT_TROJAN_MAGNITUDE: f64 = 100.0;
/// Desk-scale trojan dormancy.
pub const DESK_TROJAN_DORMANCY: f64 = 60.0;
/// Dormancy of the original one-hour trojan experiment.
pub const REFERENCE_TROJAN_DORMANCY: f64 = 3600.0;

/// One of the four three-event experiment scripts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "T: Scalar")]
pub struct NamedScript<T: Scalar> {
    pub name: String,
    pub script: FaultScript<T>,
    /// Dormancy the desk-scale script stands in for, when scaled.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_dormancy: Option<T>,
}

pub const SPIKE_DURATIONS: [f64; 3] = [4.59, 4.89, 4.94];
pub const HARDOVER_POS_DURATIONS: [f64; 3] = [70.49, 87.99, 77.16];
pub const HARDOVER_NEG_DURATIONS: [f64; 3] = [59.51, 59.32, 57.87];
pub const TROJAN_DURATIONS: [f64; 3] = [76.31, 71.24, 85.07];

/// Event start points as fractions of the scenario duration.
pub const EVENT_PLACEMENT: [f64; 3] = [0.2, 0.5, 0.8];

fn three_events<T: Scalar>(
    kind: FaultKind,
    durations: [f64; 3],
    magnitude: f64,
    scenario_duration: f64,
) -> Vec<FaultEvent<T>> {
    EVENT_PLACEMENT
        .iter()
        .zip(durations)
        .map(|(&frac, d)| FaultEvent {
            kind,
            t_start: T::lit(frac * scenario_duration),
            duration: T::lit(d),
            magnitude: T::lit(magnitude),
        })
        .collect()
}

/// spike3, hardover_pos3, hardover_neg3 and trojan3 for a run of `scenario_duration` seconds.
pub fn reference_scenarios<T: Scalar>(scenario_duration: f64) -> Vec<NamedScript<T>> {
    let plain = |name: &str, kind, durations, magnitude| NamedScript {
        name: name.to_string(),
        script: FaultScript {
            events: three_events(kind, durations, magnitude, scenario_duration),
            trojan_dormancy: T::lit(DESK_TROJAN_DORMANCY),
        },
        reference_dormancy: None,
    };
    let mut trojan = plain(
        "trojan3",
        FaultKind::Trojan,
        TROJAN_DURATIONS,
        DEFAULT_TROJAN_MAGNITUDE,
    );
    trojan.reference_dormancy = Some(T::lit(REFERENCE_TROJAN_DORMANCY));
    vec![
        plain(
            "spike3",
            FaultKind::Spike,
            SPIKE_DURATIONS,
            DEFAULT_SPIKE_MAGNITUDE,
        ),
        plain(
            "hardover_pos3",
            FaultKind::HardoverPos,
            HARDOVER_POS_DURATIONS,
            0.0,
        ),
        plain(
            "hardover_neg3",
            FaultKind::HardoverNeg,
            HARDOVER_NEG_DURATIONS,
            0.0,
        ),
        trojan,
    ]
}
