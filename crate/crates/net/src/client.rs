//! Minimal Modbus-TCP client and the scripted operator built on it.

use std::io;
use std::net::SocketAddr;
use std::time::Duration;

use pufguard_core::operator::{OperatorAction, OperatorPolicy, OperatorSchedule};
use pufguard_core::plc::modbus::{
    decode_reply, encode_request, MbapHeader, Reply, Request, MBAP_LEN, UNIT_ID,
};
use pufguard_core::plc::{HR_LOW_SP, IR_TICK_LO};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;

#[derive(Debug, thiserror::Error)]
pub enum ClientError {
    #[error(transparent)]
    Io(#[from] io::Error),
    #[error("malformed reply: {0}")]
    Frame(#[from] pufguard_core::plc::modbus::FrameError),
    #[error("server answered {function:#04x} with exception {code:#04x}")]
    Exception { function: u8, code: u8 },
    #[error("reply does not match the request")]
    Mismatch,
    #[error("gave up after {0} reconnect attempts")]
    RetriesExhausted(u32),
}

pub struct ModbusClient {
    stream: TcpStream,
    next_txn: u16,
}

impl ModbusClient {
    pub async fn connect(addr: SocketAddr) -> Result<Self, ClientError> {
        let stream = TcpStream::connect(addr).await?;
        stream.set_nodelay(true)?;
        Ok(Self {
            stream,
            next_txn: 1,
        })
    }

    async fn call(&mut self, req: &Request) -> Result<Reply, ClientError> {
        let txn = self.next_txn;
        self.next_txn = self.next_txn.wrapping_add(1);
        self.stream
            .write_all(&encode_request(txn, UNIT_ID, req))
            .await?;
        let mut buf = vec![0u8; 260];
        self.stream.read_exact(&mut buf[..MBAP_LEN]).await?;
        let len = MbapHeader::parse(&buf[..MBAP_LEN])?.adu_len();
        self.stream.read_exact(&mut buf[MBAP_LEN..len]).await?;
        let (header, reply) = decode_reply(&buf[..len])?;
        if header.transaction_id != txn {
            return Err(ClientError::Mismatch);
        }
        if let Reply::Exception { function, code } = reply {
            return Err(ClientError::Exception {
                function,
                code: code as u8,
            });
        }
        Ok(reply)
    }

    async fn read(&mut self, req: Request) -> Result<Vec<u16>, ClientError> {
        match self.call(&req).await? {
            Reply::Registers { values, .. } => Ok(values),
            _ => Err(ClientError::Mismatch),
        }
    }

    pub async fn read_holding(&mut self, addr: u16, qty: u16) -> Result<Vec<u16>, ClientError> {
        self.read(Request::ReadHolding { addr, qty }).await
    }

    pub async fn read_input(&mut self, addr: u16, qty: u16) -> Result<Vec<u16>, ClientError> {
        self.read(Request::ReadInput { addr, qty }).await
    }

    pub async fn write_single(&mut self, addr: u16, value: u16) -> Result<(), ClientError> {
        self.call(&Request::WriteSingle { addr, value })
            .await
            .map(|_| ())
    }

    pub async fn write_multiple(&mut self, addr: u16, values: &[u16]) -> Result<(), ClientError> {
        let req = Request::WriteMultiple {
            addr,
            values: values.to_vec(),
        };
        self.call(&req).await.map(|_| ())
    }

    /// Simulation time derived from the PLC tick counter.
    pub async fn sim_time(&mut self, tick_hz: f64) -> Result<f64, ClientError> {
        let words = self.read_input(IR_TICK_LO, 2).await?;
        let tick = u32::from(words[1]) << 16 | u32::from(words[0]);
        Ok(f64::from(tick) / tick_hz)
    }
}

#[derive(Debug, Clone, Copy)]
pub struct OperatorOptions {
    pub tick_hz: f64,
    /// Wall-clock pause between polls of the tick counter.
    pub poll_interval: Duration,
    /// Stop once simulation time reaches this value.
    pub until: Option<f64>,
    pub max_retries: u32,
}

impl Default for OperatorOptions {
    fn default() -> Self {
        Self {
            tick_hz: 15.0,
            poll_interval: Duration::from_millis(10),
            until: None,
            max_retries: 5,
        }
    }
}

/// Drives the plant over Modbus-TCP: each due action writes HR0..HR2 with a
/// single write-multiple. Waits are measured in simulation time.
pub async fn run_operator(
    endpoint: SocketAddr,
    policy: OperatorPolicy,
    opts: OperatorOptions,
) -> Result<Vec<OperatorAction>, ClientError> {
    let mut client = ModbusClient::connect(endpoint).await?;
    let start = client.sim_time(opts.tick_hz).await?;
    let mut schedule = OperatorSchedule::new(policy, start);
    let mut log = Vec::new();
    let mut failures = 0;
    loop {
        let step = async {
            let now = client.sim_time(opts.tick_hz).await?;
            if let Some(action) = schedule.poll(now) {
                client
                    .write_multiple(HR_LOW_SP, &action.registers())
                    .await?;
                log.push(action);
            }
            Ok::<f64, ClientError>(now)
        };
        match step.await {
            Ok(now) => {
                failures = 0;
                if opts.until.is_some_and(|u| now >= u) {
                    return Ok(log);
                }
            }
            Err(ClientError::Io(e)) => {
                failures += 1;
                if failures > opts.max_retries {
                    return Err(ClientError::RetriesExhausted(opts.max_retries));
                }
                log::warn!("operator lost connection ({e}); reconnect attempt {failures}");
                tokio::time::sleep(opts.poll_interval * (1 << failures.min(6))).await;
                if let Ok(c) = ModbusClient::connect(endpoint).await {
                    client = c;
                }
            }
            Err(e) => return Err(e),
        }
        tokio::time::sleep(opts.poll_interval).await;
    }
}
