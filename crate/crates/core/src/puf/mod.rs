//! Emulated weak PUF built on inverter transfer-curve distortion.
//!
//! Each device carries eighteen inverters whose logistic transfer curves
//! differ by manufacturing variation. A challenge byte seeds an LCG that
//! picks one sweep region per inverter; the harmonic distortion of each
//! curve over its region is compared against the population mean stored in
//! the LUT for that challenge, yielding one response bit per inverter.

mod inverter;
mod io;
mod metrics;
mod response;
mod sweep;
mod thd;

pub use inverter::{
    synthesize_device, synthesize_device_with, vtc, DeviceModel, InverterCurve, InverterParams,
    CURVE_SAMPLES,
};
pub use io::{DeviceDocument, InverterDocument, LutDocument};
pub use metrics::{crp_metrics, mean_fractional_distance, CrpMetrics, CrpOptions};
pub use response::{
    challenge_from_level, default_population, provision_lut, respond, thd_matrix, Challenge,
    LutTable, Response, ResponseTable,
};
pub use sweep::{sweep_regions, ChallengeLcg, SweepRegion};
pub use thd::{harmonics, thd, MAX_HARMONIC, PROBE_POINTS};

/// Inverters per device, and bits per response.
pub const INVERTERS: usize = 18;
/// Size of the challenge space.
pub const CHALLENGES: usize = 256;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum PufError {
    #[error("sweep region [{lo}, {hi}] has no fundamental component")]
    DegenerateRegion { lo: f64, hi: f64 },
    #[error("provisioning population is empty")]
    EmptyPopulation,
    #[error("CRP analytics need at least two devices, got {0}")]
    TooFewDevices(usize),
    #[error("response value {0:#x} exceeds 18 bits")]
    ResponseOverflow(u32),
    #[error("invalid inverter parameters: {0}")]
    InvalidInverter(&'static str),
    #[error("invalid transfer curve: {0}")]
    InvalidCurve(&'static str),
    #[error("invalid document: {0}")]
    InvalidDocument(String),
}
