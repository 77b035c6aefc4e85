//! Water-tank testbed with a PUF-authenticated level sensor.
//!
//! The plant, sensor, PUF, verifier and soft PLC are generic over the scalar
//! type; the aliases at the crate root fix it to `f64`, which is what the
//! harness and network layers use.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod fault;
pub mod harness;
pub mod operator;
pub mod plc;
pub mod puf;
pub mod scalar;
pub mod tank;
pub mod verifier;

pub use scalar::Scalar;

pub type TankParams = tank::TankParams<f64>;
pub type TankState = tank::TankState<f64>;
pub type SensorModel = tank::SensorModel<f64>;
pub type SensorSample = tank::SensorSample<f64>;
pub type DeviceModel = puf::DeviceModel<f64>;
pub type InverterParams = puf::InverterParams<f64>;
pub type LutTable = puf::LutTable<f64>;
pub type VerifierConfig = verifier::VerifierConfig<f64>;
pub type VerifierInput = verifier::VerifierInput<f64>;
pub type Verifier = verifier::Verifier<f64>;
pub type EnrollmentTable = verifier::EnrollmentTable<f64>;
pub type FaultEvent = fault::FaultEvent<f64>;
pub type FaultScript = fault::FaultScript<f64>;
