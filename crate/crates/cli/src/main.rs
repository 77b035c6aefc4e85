use std::fs::{self, File};
use std::io::{self, BufReader, BufWriter, Write};
use std::net::{Ipv4Addr, SocketAddr};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use anyhow::{bail, ensure, Context, Result};
use clap::{Parser, Subcommand};
use pufguard_core::harness::{
    compute_metrics, fixture, format_window_table, read_log, run_enrollment, run_scenario,
    write_log, Kernel, Phase, PufContext, RunMetrics, ScenarioConfig, FIXTURE_NAMES,
};
use pufguard_core::operator::write_action_log;
use pufguard_core::plc::register_map;
use pufguard_core::puf::{
    crp_metrics, default_population, provision_lut, synthesize_device, CrpOptions,
};
use pufguard_core::{DeviceModel, EnrollmentTable};
use pufguard_net::{
    run_operator, serve_gateway, serve_modbus, spawn_live, OperatorOptions, DEFAULT_GATEWAY_PORT,
    DEFAULT_MODBUS_PORT,
};

const RUN_LOG: &str = "run.csv";
const METRICS_FILE: &str = "metrics.json";
const ACTIONS_FILE: &str = "actions.csv";
const SCENARIO_FILE: &str = "scenario.json";
const TABLE_FILE: &str = "table.json";

#[derive(Parser)]
#[command(
    name = "pufguard",
    version,
    about = "Water-tank testbed with PUF-authenticated level sensing"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the enrollment choreography and write the enrollment table.
    Enroll {
        scenario: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
        /// Also write the enrollment-phase log.
        #[arg(long)]
        log: Option<PathBuf>,
    },
    /// Authentication run against an enrolled table.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        table: PathBuf,
        /// Output directory for the log, metrics and run inputs.
        #[arg(short, long)]
        output: PathBuf,
        /// Exit 2 if any fault event goes undetected.
        #[arg(long)]
        assert_detect: bool,
    },
    /// Live mode: Modbus-TCP server plus HTTP/WebSocket gateway.
    Serve {
        scenario: PathBuf,
        #[arg(long)]
        table: PathBuf,
        #[arg(long, default_value_t = DEFAULT_MODBUS_PORT)]
        port: u16,
        #[arg(long, default_value_t = DEFAULT_GATEWAY_PORT)]
        gateway_port: u16,
        /// Sim seconds per wall second; 0 runs flat out. Defaults to the scenario value, or 1 if that is 0.
        #[arg(long)]
        acceleration: Option<f64>,
        /// Stop after this much simulation time.
        #[arg(long)]
        until: Option<f64>,
    },
    /// Recompute metrics from a run log.
    Metrics {
        log: PathBuf,
        /// Write the metrics JSON here instead of stdout.
        #[arg(long)]
        json: Option<PathBuf>,
    },
    /// CRP statistics over a synthesized device population.
    PufReport {
        #[arg(long, default_value_t = 100)]
        devices: usize,
        #[arg(long, default_value_t = 1000)]
        base_seed: u64,
        #[arg(long, default_value_t = 0.0)]
        noise: f64,
        #[arg(long, default_value_t = 4)]
        trials: usize,
    },
    /// Re-run a logged scenario and compare the logs byte for byte.
    Replay {
        log: PathBuf,
        /// Defaults to scenario.json next to the log.
        #[arg(long)]
        scenario: Option<PathBuf>,
        /// Defaults to table.json next to the log.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Print a built-in scenario fixture as JSON.
    Scenario {
        /// One of normal, normal_long, spike3, hardover_pos3, hardover_neg3, trojan3.
        name: String,
    },
    /// Print the Modbus register map as JSON.
    RegisterMap,
    /// Scripted operator against a running PLC.
    Operator {
        scenario: PathBuf,
        #[arg(long, default_value_t = SocketAddr::from((Ipv4Addr::LOCALHOST, DEFAULT_MODBUS_PORT)))]
        endpoint: SocketAddr,
        #[arg(long)]
        until: Option<f64>,
        /// Write the action log CSV here.
        #[arg(long)]
        log: Option<PathBuf>,
    },
}

/// Missed detection under `run --assert-detect`.
#[derive(Debug, thiserror::Error)]
#[error("{missed} of {total} fault events were not detected")]
struct MissedDetection {
    missed: usize,
    total: usize,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.is::<MissedDetection>() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn dispatch(command: Command) -> Result<()> {
    match command {
        Command::Enroll {
            scenario,
            output,
            log,
        } => enroll(&scenario, &output, log.as_deref()),
        Command::Run {
            scenario,
            table,
            output,
            assert_detect,
        } => run(&scenario, &table, &output, assert_detect),
        Command::Serve {
            scenario,
            table,
            port,
            gateway_port,
            acceleration,
            until,
        } => serve(&scenario, &table, port, gateway_port, acceleration, until),
        Command::Metrics { log, json } => metrics(&log, json.as_deref()),
        Command::PufReport {
            devices,
            base_seed,
            noise,
            trials,
        } => puf_report(devices, base_seed, noise, trials),
        Command::Replay {
            log,
            scenario,
            table,
        } => replay(&log, scenario.as_deref(), table.as_deref()),
        Command::Scenario { name } => {
            let Some(cfg) = fixture(&name) else {
                bail!(
                    "unknown fixture {name:?}; expected one of {}",
                    FIXTURE_NAMES.join(", ")
                );
            };
            println!("{}", cfg.to_json_pretty());
            Ok(())
        }
        Command::RegisterMap => {
            println!("{}", serde_json::to_string_pretty(&register_map())?);
            Ok(())
        }
        Command::Operator {
            scenario,
            endpoint,
            until,
            log,
        } => operator(&scenario, endpoint, until, log.as_deref()),
    }
}

fn load_scenario(path: &Path) -> Result<ScenarioConfig> {
    ScenarioConfig::from_json_file(path)
        .with_context(|| format!("loading scenario {}", path.display()))
}

fn load_table(path: &Path) -> Result<EnrollmentTable> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text)
        .with_context(|| format!("parsing enrollment table {}", path.display()))
}

fn provision(cfg: &ScenarioConfig) -> Result<Arc<PufContext>> {
    Ok(Arc::new(
        PufContext::provision(&cfg.puf).context("provisioning PUF")?,
    ))
}

fn write_json<S: serde::Serialize>(path: &Path, value: &S) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn write_rows(path: &Path, rows: &[pufguard_core::harness::LogRow]) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    write_log(rows, &mut w)?;
    w.flush()?;
    Ok(())
}

fn enroll(scenario: &Path, output: &Path, log: Option<&Path>) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let out = run_enrollment(&cfg, provision(&cfg)?)?;
    write_json(output, &out.table)?;
    if let Some(log) = log {
        write_rows(log, &out.rows)?;
    }
    println!(
        "enrolled {} pairs, coverage {:.3}, max temporal diff {:.4}",
        out.table.len(),
        out.coverage,
        out.table.max_temporal_diff
    );
    Ok(())
}

fn run(scenario: &Path, table: &Path, output: &Path, assert_detect: bool) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let table = load_table(table)?;
    let out = run_scenario(&cfg, &table, provision(&cfg)?)?;
    fs::create_dir_all(output).with_context(|| format!("creating {}", output.display()))?;
    write_rows(&output.join(RUN_LOG), &out.rows)?;
    write_json(&output.join(METRICS_FILE), &out.metrics)?;
    write_json(&output.join(TABLE_FILE), &table)?;
    fs::write(output.join(SCENARIO_FILE), cfg.to_json_pretty() + "\n")?;
    let actions = File::create(output.join(ACTIONS_FILE))?;
    write_action_log(&out.actions, actions)?;
    print_summary(&out.metrics);
    if assert_detect && out.metrics.missed_events > 0 {
        return Err(MissedDetection {
            missed: out.metrics.missed_events,
            total: out.metrics.events.len(),
        }
        .into());
    }
    Ok(())
}

fn print_summary(m: &RunMetrics) {
    print!("{}", format_window_table(m));
    println!(
        "false positive rate {:.3}%, temporal failures {}",
        m.false_positive_rate * 100.0,
        m.temporal_failures
    );
    for (i, e) in m.events.iter().enumerate() {
        match e.latency_ticks {
            Some(n) => println!(
                "event {} at {:.2} s: detected after {n} ticks",
                i + 1,
                e.onset_s
            ),
            None => println!("event {} at {:.2} s: missed", i + 1, e.onset_s),
        }
    }
}

fn metrics(log: &Path, json: Option<&Path>) -> Result<()> {
    let f = File::open(log).with_context(|| format!("opening {}", log.display()))?;
    let rows = read_log(BufReader::new(f))?;
    ensure!(!rows.is_empty(), "{} has no rows", log.display());
    let m = compute_metrics(&rows);
    print_summary(&m);
    match json {
        Some(path) => write_json(path, &m)?,
        None => println!("{}", serde_json::to_string_pretty(&m)?),
    }
    Ok(())
}

fn puf_report(devices: usize, base_seed: u64, noise: f64, trials: usize) -> Result<()> {
    ensure!(
        noise >= 0.0 && noise.is_finite(),
        "noise must be a non-negative number"
    );
    ensure!(trials > 0, "trials must be positive");
    let seeds = default_population(base_seed, devices);
    let lut = provision_lut(&seeds)?;
    let population: Vec<DeviceModel> = seeds.iter().map(|&s| synthesize_device(s)).collect();
    let opts = CrpOptions {
        measurement_noise: noise,
        trials,
        ..CrpOptions::default()
    };
    let m = crp_metrics(&population, &lut, &opts)?;
    println!("{}", serde_json::to_string_pretty(&m)?);
    Ok(())
}

fn replay(log: &Path, scenario: Option<&Path>, table: Option<&Path>) -> Result<()> {
    let dir = log.parent().unwrap_or(Path::new("."));
    let scenario = scenario.map_or_else(|| dir.join(SCENARIO_FILE), Path::to_path_buf);
    let table = table.map_or_else(|| dir.join(TABLE_FILE), Path::to_path_buf);
    let expected = fs::read(log).with_context(|| format!("reading {}", log.display()))?;
    let cfg = load_scenario(&scenario)?;
    let out = run_scenario(&cfg, &load_table(&table)?, provision(&cfg)?)?;
    let mut actual = Vec::with_capacity(expected.len());
    write_log(&out.rows, &mut actual)?;
    if actual != expected {
        let line = expected
            .split(|&b| b == b'\n')
            .zip(actual.split(|&b| b == b'\n'))
            .position(|(a, b)| a != b)
            .map_or_else(|| "length".to_string(), |i| format!("line {}", i + 1));
        bail!("replay diverges from {} at {line}", log.display());
    }
    println!("replay matches {} ({} rows)", log.display(), out.rows.len());
    Ok(())
}

fn serve(
    scenario: &Path,
    table: &Path,
    port: u16,
    gateway_port: u16,
    acceleration: Option<f64>,
    until: Option<f64>,
) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let table = load_table(table)?;
    let acceleration = match acceleration {
        Some(a) => a,
        None if cfg.acceleration > 0.0 => cfg.acceleration,
        None => 1.0,
    };
    ensure!(
        acceleration >= 0.0 && acceleration.is_finite(),
        "acceleration must be non-negative"
    );
    let policy = cfg.operator;
    let mut kernel = Kernel::new(&cfg, table, provision(&cfg)?, Phase::Authentication)?;
    // The operator runs as a wire client rather than inside the kernel.
    kernel.set_operator(None);

    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let modbus = tokio::net::TcpListener::bind((Ipv4Addr::UNSPECIFIED, port))
            .await
            .with_context(|| format!("binding Modbus port {port}"))?;
        let gateway = tokio::net::TcpListener::bind((Ipv4Addr::UNSPECIFIED, gateway_port))
            .await
            .with_context(|| format!("binding gateway port {gateway_port}"))?;
        let modbus_addr = SocketAddr::from((Ipv4Addr::LOCALHOST, modbus.local_addr()?.port()));
        let (handle, kernel_thread) = spawn_live(kernel, acceleration);
        tokio::spawn(serve_modbus(modbus, handle.clone()));
        tokio::spawn(serve_gateway(gateway, handle.clone()));
        println!("modbus on {port}, gateway on {gateway_port}, acceleration {acceleration}");
        if let Some(policy) = policy {
            let opts = OperatorOptions {
                tick_hz: cfg.tick_hz,
                until,
                ..OperatorOptions::default()
            };
            tokio::spawn(async move {
                if let Err(e) = run_operator(modbus_addr, policy, opts).await {
                    log::error!("operator stopped: {e}");
                }
            });
        }
        match until {
            Some(t) => {
                let last = (t * cfg.tick_hz).round() as u64;
                let _ = handle.wait_past(last).await;
            }
            None => tokio::signal::ctrl_c().await?,
        }
        handle.stop();
        tokio::task::spawn_blocking(move || kernel_thread.join())
            .await?
            .map_err(|_| anyhow::anyhow!("kernel thread panicked"))??;
        Ok(())
    })
}

fn operator(
    scenario: &Path,
    endpoint: SocketAddr,
    until: Option<f64>,
    log: Option<&Path>,
) -> Result<()> {
    let cfg = load_scenario(scenario)?;
    let Some(policy) = cfg.operator else {
        bail!("scenario has no operator policy");
    };
    let opts = OperatorOptions {
        tick_hz: cfg.tick_hz,
        until,
        ..OperatorOptions::default()
    };
    let rt = tokio::runtime::Runtime::new()?;
    let actions = rt.block_on(run_operator(endpoint, policy, opts))?;
    match log {
        Some(path) => write_action_log(&actions, File::create(path)?)?,
        None => write_action_log(&actions, io::stdout().lock())?,
    }
    Ok(())
}
