//! Network front ends for a live pufguard kernel.
//!
//! The kernel runs on one thread ([`spawn_live`]). The Modbus-TCP server and
//! the HTTP gateway read its published snapshots and push writes through the
//! same queue, which the kernel drains at tick boundaries.

mod client;
mod gateway;
mod live;
mod server;

pub use client::{run_operator, ClientError, ModbusClient, OperatorOptions};
pub use gateway::{router, serve_gateway, DEFAULT_GATEWAY_PORT, STREAM_PERIOD};
pub use live::{spawn_live, LiveError, LiveHandle};
pub use server::{serve_modbus, DEFAULT_MODBUS_PORT};
