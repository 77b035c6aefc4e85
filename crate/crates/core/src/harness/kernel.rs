use std::collections::VecDeque;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::log::{q4, LogRow};
use super::{HarnessError, PufConfig, ScenarioConfig};
use crate::fault::{self, FaultKind, DEFAULT_SPIKE_MAGNITUDE, DEFAULT_TROJAN_MAGNITUDE};
use crate::operator::{OperatorAction, OperatorPolicy, OperatorSchedule};
use crate::plc::modbus::{ExceptionCode, RegisterAccess};
use crate::plc::{
    check_holding_write, consume_flags, decode_level, encode_level, PlcState, RegisterImage,
    HR_CODE, HR_DRAIN, HR_ENROLL, HR_HIGH_SP, HR_LOW_SP, HR_MODE, HR_TEMPORAL_RESET,
};
use crate::puf::{challenge_from_level, provision_lut, synthesize_device, ResponseTable};
use crate::tank::{step_tank, to_reported, transduce, SensorNoise};
use crate::verifier::{level_key, VerifierOutput};
use crate::{
    DeviceModel, EnrollmentTable, FaultEvent, FaultScript, LutTable, TankParams, TankState,
    Verifier, VerifierInput,
};

/// Mixed into the noise seed so enrollment and authentication runs of the
/// same scenario draw different sensor noise.
const ENROLLMENT_NOISE_SALT: u64 = 0xE1B0_11ED_5A17_0001;

/// Sensor PUF and everything derived from it that stays fixed over a run.
#[derive(Debug, Clone)]
pub struct PufContext {
    pub device: DeviceModel,
    pub lut: LutTable,
    pub responses: ResponseTable,
}

impl PufContext {
    pub fn provision(cfg: &PufConfig) -> Result<Self, HarnessError> {
        let device = synthesize_device(cfg.device_seed);
        let lut = provision_lut(&cfg.population_seeds)?;
        let responses = ResponseTable::build(&device, &lut)?;
        Ok(Self {
            device,
            lut,
            responses,
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Phase {
    Enrollment,
    Authentication,
}

/// A queued holding-register write.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HoldingWrite {
    pub addr: u16,
    pub values: Vec<u16>,
}

impl HoldingWrite {
    pub fn single(addr: u16, value: u16) -> Self {
        Self {
            addr,
            values: vec![value],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemporalSnapshot {
    pub diff: f64,
    pub enrolled_max: f64,
    pub threshold: f64,
    pub latched: bool,
}

/// Read-only view of the kernel after a tick.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Snapshot {
    pub tick: u64,
    pub sim_time: f64,
    pub phase: Phase,
    pub true_level: f64,
    pub reported_level: f64,
    pub fill: bool,
    pub drain: bool,
    pub registers: RegisterImage,
    pub code: u8,
    pub temporal: TemporalSnapshot,
    pub enrollment_coverage: f64,
    pub fault_active: Option<FaultKind>,
}

/// Single-threaded simulation kernel.
///
/// Per tick: queued writes are applied, the tank steps on the previous scan's
/// valve commands, the sensor voltage is produced and faulted, the PLC scans,
/// the PUF answers the challenge derived from IR0, the verifier steps and
/// its code lands in HR6.
#[derive(Debug)]
pub struct Kernel {
    cfg: ScenarioConfig,
    phase: Phase,
    tank_params: TankParams,
    puf: Arc<PufContext>,
    noise: SensorNoise,
    tank: TankState,
    image: RegisterImage,
    plc: PlcState,
    verifier: Verifier,
    faults: FaultScript,
    operator: Option<OperatorSchedule>,
    actions: Vec<OperatorAction>,
    pending: VecDeque<HoldingWrite>,
    resets_due: VecDeque<f64>,
    tick: u64,
    last: Option<LogRow>,
}

impl Kernel {
    pub fn new(
        cfg: &ScenarioConfig,
        table: EnrollmentTable,
        puf: Arc<PufContext>,
        phase: Phase,
    ) -> Result<Self, HarnessError> {
        cfg.validate()?;
        let verifier = Verifier::new(cfg.verifier.clone(), table)?;
        let mut image = RegisterImage::default();
        image.set_hr(HR_LOW_SP, encode_level(cfg.setpoints[0]));
        image.set_hr(HR_HIGH_SP, encode_level(cfg.setpoints[1]));
        image.set_hr(HR_DRAIN, u16::from(cfg.drain_open));
        image.set_hr(HR_ENROLL, u16::from(phase == Phase::Enrollment));
        image.set_hr(HR_CODE, u16::from(verifier.last_output().code));
        let mut plc = PlcState::new(&image);
        plc.drain_cmd = cfg.drain_open;
        let mut seed = cfg.seed ^ cfg.sensor.rng_seed;
        if phase == Phase::Enrollment {
            seed ^= ENROLLMENT_NOISE_SALT;
        }
        let mut kernel = Self {
            cfg: cfg.clone(),
            phase,
            tank_params: cfg.tank_params(),
            puf,
            noise: SensorNoise::new(seed),
            tank: TankState::at_level(cfg.initial_level),
            image,
            plc,
            verifier,
            faults: FaultScript {
                events: Vec::new(),
                trojan_dormancy: cfg.faults.trojan_dormancy,
            },
            operator: cfg.operator.map(|p| OperatorSchedule::new(p, 0.0)),
            actions: Vec::new(),
            pending: VecDeque::new(),
            resets_due: VecDeque::new(),
            tick: 0,
            last: None,
        };
        for e in &cfg.faults.events {
            kernel.add_event(*e);
        }
        Ok(kernel)
    }

    pub fn config(&self) -> &ScenarioConfig {
        &self.cfg
    }

    pub fn phase(&self) -> Phase {
        self.phase
    }

    pub fn tick(&self) -> u64 {
        self.tick
    }

    pub fn time(&self) -> f64 {
        self.tick as f64 / self.cfg.tick_hz
    }

    pub fn tank(&self) -> &TankState {
        &self.tank
    }

    pub fn registers(&self) -> &RegisterImage {
        &self.image
    }

    pub fn verifier(&self) -> &Verifier {
        &self.verifier
    }

    pub fn faults(&self) -> &FaultScript {
        &self.faults
    }

    pub fn actions(&self) -> &[OperatorAction] {
        &self.actions
    }

    pub fn last_row(&self) -> Option<&LogRow> {
        self.last.as_ref()
    }

    pub fn into_table(self) -> EnrollmentTable {
        self.verifier.into_table()
    }

    /// Replaces the scripted operator; its first action is due next tick.
    pub fn set_operator(&mut self, policy: Option<OperatorPolicy>) {
        let now = self.time();
        self.operator = policy.map(|p| OperatorSchedule::new(p, now));
    }

    /// Queues a write for the next tick boundary.
    pub fn submit(&mut self, write: HoldingWrite) -> Result<(), ExceptionCode> {
        check_holding_write(write.addr, write.values.len())?;
        self.pending.push_back(write);
        Ok(())
    }

    pub fn pending_writes(&self) -> usize {
        self.pending.len()
    }

    fn add_event(&mut self, event: FaultEvent) {
        if let Some(delay) = self.cfg.operator_reset_delay {
            let at = event.end() + delay;
            let pos = self.resets_due.partition_point(|&t| t <= at);
            self.resets_due.insert(pos, at);
        }
        self.faults.insert(event);
    }

    /// Schedules a fault starting at the next tick. A trojan injected before
    /// its dormancy has elapsed is armed for the end of dormancy instead.
    pub fn inject(
        &mut self,
        kind: FaultKind,
        duration: f64,
        magnitude: Option<f64>,
    ) -> Result<FaultEvent, HarnessError> {
        let mut t_start = (self.tick + 1) as f64 / self.cfg.tick_hz;
        if kind == FaultKind::Trojan {
            t_start = t_start.max(self.faults.trojan_dormancy);
        }
        let magnitude = magnitude.unwrap_or(match kind {
            FaultKind::Spike => DEFAULT_SPIKE_MAGNITUDE,
            FaultKind::Trojan => DEFAULT_TROJAN_MAGNITUDE,
            FaultKind::HardoverPos | FaultKind::HardoverNeg => 0.0,
        });
        let event = FaultEvent {
            kind,
            t_start,
            duration,
            magnitude,
        };
        let mut trial = self.faults.clone();
        trial.insert(event);
        trial.validate()?;
        self.add_event(event);
        Ok(event)
    }

    fn apply_pending(&mut self) {
        while let Some(w) = self.pending.pop_front() {
            if let Err(e) = self.image.write_holding(w.addr, &w.values) {
                log::warn!("dropping write at {}: {e:?}", w.addr);
            }
        }
    }

    /// Advances one tick and returns its log row.
    pub fn step(&mut self) -> Result<LogRow, HarnessError> {
        let tick = self.tick + 1;
        let t = tick as f64 / self.cfg.tick_hz;
        if let Some(action) = self.operator.as_mut().and_then(|op| op.poll(t)) {
            self.pending.push_back(HoldingWrite {
                addr: HR_LOW_SP,
                values: action.registers().to_vec(),
            });
            self.actions.push(action);
        }
        while self.resets_due.front().is_some_and(|&r| r <= t) {
            self.resets_due.pop_front();
            self.pending
                .push_back(HoldingWrite::single(HR_TEMPORAL_RESET, 1));
        }
        self.apply_pending();

        let capacity = self.tank_params.capacity;
        let sensor = &self.cfg.sensor;
        self.tank = step_tank(
            &self.tank,
            &self.tank_params,
            self.plc.fill_cmd,
            self.plc.drain_cmd,
        );
        let clean = transduce(self.tank.level, capacity, sensor, &self.noise, tick);
        let voltage = fault::apply(clean, t, &self.faults, sensor, capacity);
        let reported = to_reported(voltage, capacity, sensor);
        let (fill, drain) = self.plc.scan(&mut self.image, reported, tick);

        let level = self.image.reported_level();
        let response = self
            .puf
            .responses
            .get(challenge_from_level(level_key(level), capacity));
        let (enroll_flag, temporal_reset) = consume_flags(&mut self.image);
        let out = self.verifier.step(VerifierInput {
            reported_level: level,
            response,
            enroll_flag,
            temporal_reset,
        })?;
        self.image.set_hr(HR_CODE, u16::from(out.code));
        self.tick = tick;

        let row = LogRow {
            tick,
            time_s: q4(t),
            true_level: q4(self.tank.level),
            reported_level: q4(level),
            fill,
            drain,
            low_sp: decode_level(self.plc.low_sp),
            high_sp: decode_level(self.plc.high_sp),
            mode: u8::from(self.image.hr(HR_MODE) != 0),
            code: out.code,
            temporal_diff: q4(self.verifier.temporal().diff()),
            fault_active: self.faults.active_at(t).is_some(),
        };
        self.last = Some(row.clone());
        Ok(row)
    }

    pub fn last_output(&self) -> VerifierOutput {
        self.verifier.last_output()
    }

    pub fn snapshot(&self) -> Snapshot {
        let t = self.time();
        let enrolled_max = self.verifier.table().max_temporal_diff;
        let temporal = self.verifier.temporal();
        Snapshot {
            tick: self.tick,
            sim_time: t,
            phase: self.phase,
            true_level: self.tank.level,
            reported_level: self.image.reported_level(),
            fill: self.plc.fill_cmd,
            drain: self.plc.drain_cmd,
            registers: self.image,
            code: self.verifier.last_output().code,
            temporal: TemporalSnapshot {
                diff: temporal.diff(),
                enrolled_max,
                threshold: self.cfg.verifier.temporal_margin * enrolled_max,
                latched: temporal.latched_fail,
            },
            enrollment_coverage: self.verifier.coverage(),
            fault_active: self.faults.active_at(t).map(|(_, e)| e.kind),
        }
    }
}
