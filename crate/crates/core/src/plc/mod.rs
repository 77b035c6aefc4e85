//! Soft PLC: register file, ON/OFF level control and Modbus-TCP framing.

pub mod modbus;

use serde::{Deserialize, Serialize};

use self::modbus::{ExceptionCode, RegisterAccess};

pub const INPUT_REGISTERS: usize = 4;
pub const HOLDING_REGISTERS: usize = 8;

/// Reported level, level-units x100.
pub const IR_LEVEL: u16 = 0;
/// Fill valve state, 0/1.
pub const IR_FILL: u16 = 1;
pub const IR_TICK_LO: u16 = 2;
pub const IR_TICK_HI: u16 = 3;

/// Low setpoint, level-units x100.
pub const HR_LOW_SP: u16 = 0;
/// High setpoint, level-units x100.
pub const HR_HIGH_SP: u16 = 1;
pub const HR_DRAIN: u16 = 2;
/// 0 manual, 1 auto.
pub const HR_MODE: u16 = 3;
pub const HR_ENROLL: u16 = 4;
/// One-shot; cleared once the verifier has consumed it.
pub const HR_TEMPORAL_RESET: u16 = 5;
pub const HR_CODE: u16 = 6;
pub const HR_MANUAL_FILL: u16 = 7;

/// Fixed-point scale of level registers.
pub const LEVEL_SCALE: f64 = 100.0;

pub fn encode_level(level: f64) -> u16 {
    (level * LEVEL_SCALE)
        .round()
        .clamp(0.0, f64::from(u16::MAX)) as u16
}

pub fn decode_level(raw: u16) -> f64 {
    f64::from(raw) / LEVEL_SCALE
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RegisterImage {
    pub input: [u16; INPUT_REGISTERS],
    pub holding: [u16; HOLDING_REGISTERS],
}

impl Default for RegisterImage {
    fn default() -> Self {
        let mut holding = [0; HOLDING_REGISTERS];
        holding[HR_LOW_SP as usize] = encode_level(50.0);
        holding[HR_HIGH_SP as usize] = encode_level(250.0);
        holding[HR_MODE as usize] = 1;
        Self {
            input: [0; INPUT_REGISTERS],
            holding,
        }
    }
}

impl RegisterImage {
    pub fn hr(&self, addr: u16) -> u16 {
        self.holding[addr as usize]
    }

    pub fn set_hr(&mut self, addr: u16, v: u16) {
        self.holding[addr as usize] = v;
    }

    pub fn ir(&self, addr: u16) -> u16 {
        self.input[addr as usize]
    }

    pub fn reported_level(&self) -> f64 {
        decode_level(self.ir(IR_LEVEL))
    }

    pub fn tick(&self) -> u32 {
        u32::from(self.ir(IR_TICK_HI)) << 16 | u32::from(self.ir(IR_TICK_LO))
    }

    pub fn auto_mode(&self) -> bool {
        self.hr(HR_MODE) != 0
    }
}

fn range(addr: u16, qty: usize, len: usize) -> Result<std::ops::Range<usize>, ExceptionCode> {
    let start = addr as usize;
    let end = start + qty;
    if qty == 0 || end > len {
        return Err(ExceptionCode::IllegalDataAddress);
    }
    Ok(start..end)
}

impl RegisterAccess for RegisterImage {
    fn read_holding(&self, addr: u16, qty: u16) -> Result<Vec<u16>, ExceptionCode> {
        Ok(self.holding[range(addr, qty as usize, HOLDING_REGISTERS)?].to_vec())
    }

    fn read_input(&self, addr: u16, qty: u16) -> Result<Vec<u16>, ExceptionCode> {
        Ok(self.input[range(addr, qty as usize, INPUT_REGISTERS)?].to_vec())
    }

    fn write_holding(&mut self, addr: u16, values: &[u16]) -> Result<(), ExceptionCode> {
        let r = range(addr, values.len(), HOLDING_REGISTERS)?;
        self.holding[r].copy_from_slice(values);
        Ok(())
    }
}

/// Checks that `values` written at `addr` fit the holding register file.
pub fn check_holding_write(addr: u16, count: usize) -> Result<(), ExceptionCode> {
    range(addr, count, HOLDING_REGISTERS).map(|_| ())
}

/// Controller memory carried between scans.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct PlcState {
    pub fill_cmd: bool,
    pub drain_cmd: bool,
    /// Setpoints in effect; invalid register pairs leave these unchanged.
    pub low_sp: u16,
    pub high_sp: u16,
    #[serde(skip)]
    rejected: Option<(u16, u16)>,
}

impl PlcState {
    pub fn new(image: &RegisterImage) -> Self {
        Self {
            fill_cmd: false,
            drain_cmd: false,
            low_sp: image.hr(HR_LOW_SP),
            high_sp: image.hr(HR_HIGH_SP),
            rejected: None,
        }
    }

    /// One PLC scan: publishes the reading and computes valve commands.
    pub fn scan(
        &mut self,
        image: &mut RegisterImage,
        reported_level: f64,
        tick: u64,
    ) -> (bool, bool) {
        image.input[IR_LEVEL as usize] = encode_level(reported_level);
        let (lo, hi) = (image.hr(HR_LOW_SP), image.hr(HR_HIGH_SP));
        if lo < hi {
            self.low_sp = lo;
            self.high_sp = hi;
            self.rejected = None;
        } else if self.rejected != Some((lo, hi)) {
            log::warn!("ignoring setpoints low={lo} high={hi}: low must be below high");
            self.rejected = Some((lo, hi));
        }
        let level = image.ir(IR_LEVEL);
        if image.auto_mode() {
            if level <= self.low_sp {
                self.fill_cmd = true;
            } else if level >= self.high_sp {
                self.fill_cmd = false;
            }
        } else {
            self.fill_cmd = image.hr(HR_MANUAL_FILL) != 0;
        }
        self.drain_cmd = image.hr(HR_DRAIN) != 0;
        image.input[IR_FILL as usize] = u16::from(self.fill_cmd);
        image.input[IR_TICK_LO as usize] = (tick & 0xFFFF) as u16;
        image.input[IR_TICK_HI as usize] = ((tick >> 16) & 0xFFFF) as u16;
        (self.fill_cmd, self.drain_cmd)
    }
}

/// Reads the enrollment and temporal-reset flags, clearing the one-shot reset.
pub fn consume_flags(image: &mut RegisterImage) -> (bool, bool) {
    let enroll = image.hr(HR_ENROLL) != 0;
    let reset = image.hr(HR_TEMPORAL_RESET) != 0;
    if reset {
        image.set_hr(HR_TEMPORAL_RESET, 0);
    }
    (enroll, reset)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterDescription {
    pub address: u16,
    pub name: &'static str,
    pub description: &'static str,
    pub scale: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RegisterMap {
    pub unit_id: u8,
    pub input_registers: Vec<RegisterDescription>,
    pub holding_registers: Vec<RegisterDescription>,
}

/// Machine-readable register map.
pub fn register_map() -> RegisterMap {
    let d = |address, name, description, scale| RegisterDescription {
        address,
        name,
        description,
        scale,
    };
    RegisterMap {
        unit_id: modbus::UNIT_ID,
        input_registers: vec![
            d(
                IR_LEVEL,
                "reported_level",
                "reported tank level, level-units x100",
                LEVEL_SCALE,
            ),
            d(IR_FILL, "fill_valve", "fill valve state (0/1)", 1.0),
            d(IR_TICK_LO, "tick_lo", "scan tick count, low word", 1.0),
            d(IR_TICK_HI, "tick_hi", "scan tick count, high word", 1.0),
        ],
        holding_registers: vec![
            d(
                HR_LOW_SP,
                "low_setpoint",
                "low setpoint, level-units x100",
                LEVEL_SCALE,
            ),
            d(
                HR_HIGH_SP,
                "high_setpoint",
                "high setpoint, level-units x100",
                LEVEL_SCALE,
            ),
            d(HR_DRAIN, "drain_valve", "drain valve command (0/1)", 1.0),
            d(HR_MODE, "mode", "0 manual, 1 auto", 1.0),
            d(
                HR_ENROLL,
                "enroll",
                "enrollment flag (0/1), level-held",
                1.0,
            ),
            d(
                HR_TEMPORAL_RESET,
                "temporal_reset",
                "temporal reset flag (0/1), one-shot",
                1.0,
            ),
            d(HR_CODE, "verifier_code", "verifier output code (0-7)", 1.0),
            d(
                HR_MANUAL_FILL,
                "manual_fill",
                "manual fill command (0/1)",
                1.0,
            ),
        ],
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn auto_image() -> RegisterImage {
        RegisterImage::default()
    }

    #[test]
    fn auto_mode_hysteresis() {
        let mut img = auto_image();
        let mut plc = PlcState::new(&img);
        assert_eq!(plc.scan(&mut img, 49.0, 1), (true, false));
        assert_eq!(plc.scan(&mut img, 150.0, 2), (true, false));
        assert_eq!(plc.scan(&mut img, 251.0, 3), (false, false));
        assert_eq!(plc.scan(&mut img, 150.0, 4), (false, false));
        assert_eq!(plc.scan(&mut img, 50.0, 5), (true, false));
    }

    #[test]
    fn manual_mode_passthrough() {
        let mut img = auto_image();
        img.set_hr(HR_MODE, 0);
        img.set_hr(HR_MANUAL_FILL, 1);
        img.set_hr(HR_DRAIN, 1);
        let mut plc = PlcState::new(&img);
        assert_eq!(plc.scan(&mut img, 299.0, 1), (true, true));
        img.set_hr(HR_MANUAL_FILL, 0);
        assert_eq!(plc.scan(&mut img, 10.0, 2), (false, true));
    }

    #[test]
    fn scan_publishes_inputs() {
        let mut img = auto_image();
        let mut plc = PlcState::new(&img);
        plc.scan(&mut img, 123.456, 0x0001_0002);
        assert_eq!(img.ir(IR_LEVEL), 12346);
        assert_eq!(img.ir(IR_FILL), 0);
        assert_eq!(img.tick(), 0x0001_0002);
        plc.scan(&mut img, 700.0, 1);
        assert_eq!(img.ir(IR_LEVEL), u16::MAX);
    }

    #[test]
    fn inverted_setpoints_are_ignored() {
        let mut img = auto_image();
        let mut plc = PlcState::new(&img);
        img.set_hr(HR_LOW_SP, encode_level(200.0));
        img.set_hr(HR_HIGH_SP, encode_level(100.0));
        assert_eq!(plc.scan(&mut img, 150.0, 1), (false, false));
        assert_eq!((plc.low_sp, plc.high_sp), (5000, 25000));
        assert_eq!(plc.scan(&mut img, 40.0, 2), (true, false));
    }

    #[test]
    fn flag_contracts() {
        let mut img = auto_image();
        assert_eq!(consume_flags(&mut img), (false, false));
        img.set_hr(HR_TEMPORAL_RESET, 1);
        assert_eq!(consume_flags(&mut img), (false, true));
        assert_eq!(img.hr(HR_TEMPORAL_RESET), 0);
        assert_eq!(consume_flags(&mut img), (false, false));
        img.set_hr(HR_ENROLL, 1);
        for _ in 0..5 {
            assert_eq!(consume_flags(&mut img), (true, false));
        }
    }

    #[test]
    fn register_map_lists_every_address() {
        let map = register_map();
        assert_eq!(map.input_registers.len(), INPUT_REGISTERS);
        assert_eq!(map.holding_registers.len(), HOLDING_REGISTERS);
        for (i, r) in map.holding_registers.iter().enumerate() {
            assert_eq!(r.address as usize, i);
        }
    }

    proptest! {
        #[test]
        fn fixed_point_round_trip(centi in 0u32..=33_000) {
            let x = f64::from(centi) / 100.0;
            prop_assert_eq!(decode_level(encode_level(x)), x);
        }
    }
}
