use std::sync::Arc;

use super::kernel::{HoldingWrite, Kernel, Phase, PufContext};
use super::log::LogRow;
use super::metrics::{compute_metrics, RunMetrics};
use super::{HarnessError, ScenarioConfig};
use crate::operator::OperatorAction;
use crate::plc::{HR_DRAIN, HR_MANUAL_FILL, HR_MODE};
use crate::EnrollmentTable;

#[derive(Debug, Clone)]
pub struct EnrollmentOutput {
    pub table: EnrollmentTable,
    pub coverage: f64,
    pub rows: Vec<LogRow>,
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub rows: Vec<LogRow>,
    pub metrics: RunMetrics,
    pub actions: Vec<OperatorAction>,
}

fn submit(kernel: &mut Kernel, addr: u16, value: u16) -> Result<(), HarnessError> {
    kernel
        .submit(HoldingWrite::single(addr, value))
        .map_err(HarnessError::Register)
}

/// Steps until `done` holds for the tank level, bounded by `limit` ticks.
fn step_until(
    kernel: &mut Kernel,
    rows: &mut Vec<LogRow>,
    limit: u64,
    done: impl Fn(f64) -> bool,
) -> Result<(), HarnessError> {
    for _ in 0..limit {
        if done(kernel.tank().level) {
            return Ok(());
        }
        rows.push(kernel.step()?);
    }
    Err(HarnessError::Config(
        "enrollment sweep did not reach its target level".into(),
    ))
}

/// Enrollment choreography.
///
/// Phase A runs the plant in auto mode with the configured operator for
/// `auto_ops_duration`, capturing the temporal spread of real dynamics.
/// Phase B switches to manual, fills to capacity and drains to empty so that
/// every threshold window is crossed. Faults in `cfg` are ignored.
pub fn run_enrollment(
    cfg: &ScenarioConfig,
    puf: Arc<PufContext>,
) -> Result<EnrollmentOutput, HarnessError> {
    let mut cfg = cfg.clone();
    cfg.faults.events.clear();
    let mut kernel = Kernel::new(&cfg, EnrollmentTable::default(), puf, Phase::Enrollment)?;
    let mut rows = Vec::new();
    let auto_ticks = (cfg.enrollment.auto_ops_duration * cfg.tick_hz).round() as u64;
    for _ in 0..auto_ticks {
        rows.push(kernel.step()?);
    }
    if cfg.enrollment.sweep {
        let tank = cfg.tank_params();
        let settle = (cfg.enrollment.settle * cfg.tick_hz).round() as u64;
        let fill_ticks =
            (tank.capacity / ((tank.fill_rate - tank.drain_rate) * tank.dt)).ceil() as u64;
        let drain_ticks = (tank.capacity / (tank.drain_rate * tank.dt)).ceil() as u64;
        kernel.set_operator(None);
        submit(&mut kernel, HR_MODE, 0)?;
        submit(&mut kernel, HR_DRAIN, 0)?;
        submit(&mut kernel, HR_MANUAL_FILL, 1)?;
        step_until(&mut kernel, &mut rows, 2 * fill_ticks + 2, |l| {
            l >= tank.capacity
        })?;
        for _ in 0..settle {
            rows.push(kernel.step()?);
        }
        submit(&mut kernel, HR_MANUAL_FILL, 0)?;
        submit(&mut kernel, HR_DRAIN, 1)?;
        step_until(&mut kernel, &mut rows, 2 * drain_ticks + 2, |l| l <= 0.0)?;
        for _ in 0..settle {
            rows.push(kernel.step()?);
        }
    }
    let coverage = kernel.verifier().coverage();
    if coverage < 1.0 {
        return Err(HarnessError::IncompleteEnrollment { coverage });
    }
    Ok(EnrollmentOutput {
        table: kernel.into_table(),
        coverage,
        rows,
    })
}

/// Authentication run of `cfg.duration` seconds against `table`.
pub fn run_scenario(
    cfg: &ScenarioConfig,
    table: &EnrollmentTable,
    puf: Arc<PufContext>,
) -> Result<RunOutput, HarnessError> {
    let mut kernel = Kernel::new(cfg, table.clone(), puf, Phase::Authentication)?;
    let ticks = cfg.total_ticks();
    let mut rows = Vec::with_capacity(ticks as usize);
    for _ in 0..ticks {
        rows.push(kernel.step()?);
    }
    let metrics = compute_metrics(&rows);
    Ok(RunOutput {
        rows,
        metrics,
        actions: kernel.actions().to_vec(),
    })
}
