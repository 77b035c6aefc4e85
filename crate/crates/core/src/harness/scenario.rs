use std::path::Path;

use serde::{Deserialize, Serialize};

use super::HarnessError;
use crate::fault::reference_scenarios;
use crate::operator::OperatorPolicy;
use crate::puf::default_population;
use crate::{FaultScript, SensorModel, TankParams, VerifierConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EnrollmentConfig {
    /// Seconds of auto-mode operation with the enrollment flag high.
    pub auto_ops_duration: f64,
    /// Follow with a manual fill-to-capacity / drain-to-empty sweep.
    pub sweep: bool,
    /// Seconds to hold at each end of the sweep.
    pub settle: f64,
}

impl Default for EnrollmentConfig {
    fn default() -> Self {
        Self {
            auto_ops_duration: 600.0,
            sweep: true,
            settle: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PufConfig {
    /// Seed of the PUF attached to the level sensor.
    pub device_seed: u64,
    /// Provisioning population for the LUT.
    pub population_seeds: Vec<u64>,
}

impl Default for PufConfig {
    fn default() -> Self {
        Self {
            device_seed: 0x00D0_0D1E,
            population_seeds: default_population(1000, 100),
        }
    }
}

/// Declarative description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: String,
    pub seed: u64,
    pub tick_hz: f64,
    /// Seconds of simulation time.
    pub duration: f64,
    /// Plant constants; `dt` is replaced by `1 / tick_hz`.
    pub tank: TankParams,
    pub initial_level: f64,
    pub sensor: SensorModel,
    pub verifier: VerifierConfig,
    /// Scripted operator; `None` keeps the initial setpoints and valve.
    pub operator: Option<OperatorPolicy>,
    /// Initial low/high setpoints in level-units.
    pub setpoints: [f64; 2],
    /// Initial drain valve command.
    pub drain_open: bool,
    pub faults: FaultScript,
    /// Seconds after each scripted fault ends at which the operator resets
    /// the temporal latch; `None` never resets.
    pub operator_reset_delay: Option<f64>,
    pub enrollment: EnrollmentConfig,
    pub puf: PufConfig,
    /// Simulation seconds per wall second in live mode; 0 runs unthrottled.
    pub acceleration: f64,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            name: "normal".into(),
            seed: 0x7E57_BED5,
            tick_hz: 15.0,
            duration: 1800.0,
            tank: TankParams::default(),
            initial_level: 150.0,
            sensor: SensorModel::default(),
            verifier: VerifierConfig::default(),
            operator: Some(OperatorPolicy::default()),
            setpoints: [50.0, 250.0],
            drain_open: false,
            faults: FaultScript::default(),
            operator_reset_delay: Some(5.0),
            enrollment: EnrollmentConfig::default(),
            puf: PufConfig::default(),
            acceleration: 0.0,
        }
    }
}

impl ScenarioConfig {
    pub fn from_json_file(path: &Path) -> Result<Self, HarnessError> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        let cfg: Self = serde_json::from_str(&text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn dt(&self) -> f64 {
        1.0 / self.tick_hz
    }

    pub fn tank_params(&self) -> TankParams {
        TankParams {
            dt: self.dt(),
            ..self.tank
        }
    }

    pub fn total_ticks(&self) -> u64 {
        (self.duration * self.tick_hz).round() as u64
    }

    pub fn validate(&self) -> Result<(), HarnessError> {
        let bad = |m: &str| Err(HarnessError::Config(m.to_string()));
        if !(self.tick_hz > 0.0) {
            return bad("tick_hz must be positive");
        }
        if !(self.duration > 0.0) {
            return bad("duration must be positive");
        }
        if !(self.acceleration >= 0.0) {
            return bad("acceleration must be non-negative");
        }
        self.tank_params().validate()?;
        self.sensor.validate()?;
        self.verifier.validate()?;
        self.faults.validate()?;
        if let Some(op) = &self.operator {
            op.validate()?;
        }
        if !(0.0..=self.tank.capacity).contains(&self.initial_level) {
            return bad("initial_level must lie within [0, capacity]");
        }
        if !(self.setpoints[0] < self.setpoints[1]) || self.setpoints[0] < 0.0 {
            return bad("setpoints must satisfy 0 <= low < high");
        }
        if self.operator_reset_delay.is_some_and(|d| !(d >= 0.0)) {
            return bad("operator_reset_delay must be non-negative");
        }
        if !(self.enrollment.auto_ops_duration >= 0.0) || !(self.enrollment.settle >= 0.0) {
            return bad("enrollment durations must be non-negative");
        }
        if self.puf.population_seeds.is_empty() {
            return bad("PUF population must be non-empty");
        }
        Ok(())
    }
}

/// Names accepted by [`fixture`].
pub const FIXTURE_NAMES: [&str; 6] = [
    "normal",
    "normal_long",
    "spike3",
    "hardover_pos3",
    "hardover_neg3",
    "trojan3",
];

/// Desk-scale normal run: half an hour with the random operator.
pub fn normal_operation() -> ScenarioConfig {
    ScenarioConfig::default()
}

/// 5.18 hours of normal operation.
pub fn normal_long() -> ScenarioConfig {
    ScenarioConfig {
        name: "normal_long".into(),
        duration: 5.18 * 3600.0,
        ..ScenarioConfig::default()
    }
}

/// Fault or attack run with fixed 50/250 setpoints and the drain open.
pub fn fault_fixture(name: &str) -> Option<ScenarioConfig> {
    let duration = if name == "trojan3" { 900.0 } else { 600.0 };
    let script = reference_scenarios::<f64>(duration)
        .into_iter()
        .find(|s| s.name == name)?;
    Some(ScenarioConfig {
        name: name.into(),
        duration,
        initial_level: 60.0,
        operator: None,
        drain_open: true,
        faults: script.script,
        ..ScenarioConfig::default()
    })
}

pub fn fixture(name: &str) -> Option<ScenarioConfig> {
    match name {
        "normal" => Some(normal_operation()),
        "normal_long" => Some(normal_long()),
        other => fault_fixture(other),
    }
}
