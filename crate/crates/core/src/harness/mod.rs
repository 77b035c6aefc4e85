//! Deterministic scenario runner: kernel, enrollment, metrics and logs.

mod kernel;
mod log;
mod metrics;
mod run;
mod scenario;

use std::path::{Path, PathBuf};

pub use self::kernel::{HoldingWrite, Kernel, Phase, PufContext, Snapshot, TemporalSnapshot};
pub use self::log::{read_log, write_log, LogRow, LOG_HEADER};
pub use self::metrics::{
    compute_metrics, format_window_table, EventDetection, RunMetrics, WindowMetrics, WINDOW_SECONDS,
};
pub use self::run::{run_enrollment, run_scenario, EnrollmentOutput, RunOutput};
pub use self::scenario::{
    fault_fixture, fixture, normal_long, normal_operation, EnrollmentConfig, PufConfig,
    ScenarioConfig, FIXTURE_NAMES,
};

use crate::fault::FaultError;
use crate::operator::PolicyError;
use crate::plc::modbus::ExceptionCode;
use crate::puf::PufError;
use crate::tank::TankError;
use crate::verifier::VerifierError;

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("invalid scenario: {0}")]
    Config(String),
    #[error(transparent)]
    Tank(#[from] TankError),
    #[error(transparent)]
    Verifier(#[from] VerifierError),
    #[error(transparent)]
    Puf(#[from] PufError),
    #[error(transparent)]
    Fault(#[from] FaultError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("register write rejected: {0:?}")]
    Register(ExceptionCode),
    #[error("enrollment covered {coverage:.3} of thresholds")]
    IncompleteEnrollment { coverage: f64 },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed log row {row}: {reason}")]
    MalformedLog { row: usize, reason: String },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }
}
