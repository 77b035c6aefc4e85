use std::net::SocketAddr;
use std::sync::{Arc, OnceLock};

use pufguard_core::harness::{
    normal_operation, run_enrollment, Kernel, Phase, PufConfig, PufContext, ScenarioConfig,
};
use pufguard_core::EnrollmentTable;
use pufguard_net::{spawn_live, LiveHandle};
use tokio::net::TcpListener;

pub fn scenario() -> ScenarioConfig {
    let mut cfg = normal_operation();
    cfg.operator = None;
    cfg.puf = PufConfig {
        device_seed: 99,
        population_seeds: (500..516).collect(),
    };
    cfg.enrollment.auto_ops_duration = 60.0;
    cfg
}

fn enrolled() -> &'static (Arc<PufContext>, EnrollmentTable) {
    static CELL: OnceLock<(Arc<PufContext>, EnrollmentTable)> = OnceLock::new();
    CELL.get_or_init(|| {
        let cfg = scenario();
        let puf = Arc::new(PufContext::provision(&cfg.puf).unwrap());
        let table = run_enrollment(&cfg, puf.clone()).unwrap().table;
        (puf, table)
    })
}

/// Live kernel paced at `acceleration` sim-seconds per wall-second.
pub fn live(acceleration: f64) -> LiveHandle {
    let (puf, table) = enrolled().clone();
    let kernel = Kernel::new(&scenario(), table, puf, Phase::Authentication).unwrap();
    spawn_live(kernel, acceleration).0
}

pub async fn bind() -> (TcpListener, SocketAddr) {
    let l = TcpListener::bind("127.0.0.1:0").await.unwrap();
    let addr = l.local_addr().unwrap();
    (l, addr)
}
