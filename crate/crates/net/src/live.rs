//! Simulation thread for live mode and the handle network tasks talk to.

use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread;
use std::time::{Duration, Instant};

use pufguard_core::fault::FaultKind;
use pufguard_core::harness::{HarnessError, HoldingWrite, Kernel, Snapshot};
use pufguard_core::plc::modbus::ExceptionCode;
use pufguard_core::FaultEvent;
use tokio::sync::{mpsc, oneshot, watch};

#[derive(Debug, thiserror::Error)]
pub enum LiveError {
    #[error("simulation thread has stopped")]
    Stopped,
    #[error("register write rejected: {0:?}")]
    Rejected(ExceptionCode),
    #[error("{0}")]
    Invalid(String),
}

enum Command {
    Write {
        write: HoldingWrite,
        ack: oneshot::Sender<Result<(), ExceptionCode>>,
    },
    Inject {
        kind: FaultKind,
        duration: f64,
        magnitude: Option<f64>,
        ack: oneshot::Sender<Result<FaultEvent, String>>,
    },
}

/// Cloneable handle to a running kernel.
#[derive(Clone)]
pub struct LiveHandle {
    commands: mpsc::UnboundedSender<Command>,
    snapshots: watch::Receiver<Arc<Snapshot>>,
    stop: Arc<AtomicBool>,
    tick_hz: f64,
}

impl LiveHandle {
    /// Latest published snapshot; never blocks the tick loop.
    pub fn snapshot(&self) -> Arc<Snapshot> {
        self.snapshots.borrow().clone()
    }

    pub fn subscribe(&self) -> watch::Receiver<Arc<Snapshot>> {
        self.snapshots.clone()
    }

    pub fn tick_hz(&self) -> f64 {
        self.tick_hz
    }

    /// Queues a holding-register write; resolves once the tick that applied
    /// it has completed.
    pub async fn write(&self, write: HoldingWrite) -> Result<(), LiveError> {
        let (ack, rx) = oneshot::channel();
        self.commands
            .send(Command::Write { write, ack })
            .map_err(|_| LiveError::Stopped)?;
        rx.await
            .map_err(|_| LiveError::Stopped)?
            .map_err(LiveError::Rejected)
    }

    pub async fn inject(
        &self,
        kind: FaultKind,
        duration: f64,
        magnitude: Option<f64>,
    ) -> Result<FaultEvent, LiveError> {
        let (ack, rx) = oneshot::channel();
        self.commands
            .send(Command::Inject {
                kind,
                duration,
                magnitude,
                ack,
            })
            .map_err(|_| LiveError::Stopped)?;
        rx.await
            .map_err(|_| LiveError::Stopped)?
            .map_err(LiveError::Invalid)
    }

    /// Waits until a snapshot newer than `tick` is published.
    pub async fn wait_past(&self, tick: u64) -> Result<Arc<Snapshot>, LiveError> {
        let mut rx = self.subscribe();
        let snap = rx
            .wait_for(|s| s.tick > tick)
            .await
            .map_err(|_| LiveError::Stopped)?;
        Ok(snap.clone())
    }

    pub fn stop(&self) {
        self.stop.store(true, Ordering::Relaxed);
    }
}

/// Runs `kernel` on its own thread until stopped or it errors.
///
/// With `acceleration > 0` the loop is paced at that many simulation seconds
/// per wall second; with 0 it runs flat out.
pub fn spawn_live(
    mut kernel: Kernel,
    acceleration: f64,
) -> (LiveHandle, thread::JoinHandle<Result<Kernel, HarnessError>>) {
    let (tx, mut rx) = mpsc::unbounded_channel();
    let (snap_tx, snap_rx) = watch::channel(Arc::new(kernel.snapshot()));
    let stop = Arc::new(AtomicBool::new(false));
    let tick_hz = kernel.config().tick_hz;
    let handle = LiveHandle {
        commands: tx,
        snapshots: snap_rx,
        stop: stop.clone(),
        tick_hz,
    };
    let join = thread::Builder::new()
        .name("pufguard-kernel".into())
        .spawn(move || {
            let started = Instant::now();
            let t0 = kernel.time();
            let mut acks = Vec::new();
            while !stop.load(Ordering::Relaxed) {
                loop {
                    match rx.try_recv() {
                        Ok(Command::Write { write, ack }) => match kernel.submit(write) {
                            Ok(()) => acks.push(ack),
                            Err(code) => {
                                let _ = ack.send(Err(code));
                            }
                        },
                        Ok(Command::Inject {
                            kind,
                            duration,
                            magnitude,
                            ack,
                        }) => {
                            let _ = ack.send(
                                kernel
                                    .inject(kind, duration, magnitude)
                                    .map_err(|e| e.to_string()),
                            );
                        }
                        Err(mpsc::error::TryRecvError::Empty) => break,
                        Err(mpsc::error::TryRecvError::Disconnected) => {
                            stop.store(true, Ordering::Relaxed);
                            break;
                        }
                    }
                }
                if let Err(e) = kernel.step() {
                    log::error!("kernel stopped: {e}");
                    return Err(e);
                }
                snap_tx.send_replace(Arc::new(kernel.snapshot()));
                for ack in acks.drain(..) {
                    let _ = ack.send(Ok(()));
                }
                if acceleration > 0.0 {
                    let due = Duration::from_secs_f64((kernel.time() - t0) / acceleration);
                    if let Some(wait) = due.checked_sub(started.elapsed()) {
                        thread::sleep(wait);
                    }
                } else {
                    thread::yield_now();
                }
            }
            Ok(kernel)
        })
        .expect("spawn kernel thread");
    (handle, join)
}
