mod common;

use std::time::Duration;

use pufguard_core::operator::OperatorPolicy;
use pufguard_core::plc::{encode_level, HR_DRAIN, HR_HIGH_SP, HR_LOW_SP, IR_LEVEL};
use pufguard_net::{run_operator, serve_modbus, ModbusClient, OperatorOptions};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::TcpStream;
use tokio_modbus::prelude::*;

#[tokio::test]
async fn third_party_client_reads_level_and_writes_setpoints() {
    let handle = common::live(30.0);
    let (listener, addr) = common::bind().await;
    tokio::spawn(serve_modbus(listener, handle.clone()));
    handle.wait_past(0).await.unwrap();

    let mut ctx = tcp::connect_slave(addr, Slave(1)).await.unwrap();
    let ir0 = ctx
        .read_input_registers(IR_LEVEL, 1)
        .await
        .unwrap()
        .unwrap()[0];
    let level = f64::from(ir0) / 100.0;
    assert!((140.0..=160.0).contains(&level), "IR0 = {ir0}");

    let values = [encode_level(40.0), encode_level(260.0), 1];
    ctx.write_multiple_registers(HR_LOW_SP, &values)
        .await
        .unwrap()
        .unwrap();
    let hr = ctx
        .read_holding_registers(HR_LOW_SP, 3)
        .await
        .unwrap()
        .unwrap();
    assert_eq!(hr, values);
    let snap = handle.snapshot();
    assert_eq!(snap.registers.holding[..3], values);
    assert!(snap.drain);

    ctx.write_single_register(HR_DRAIN, 0)
        .await
        .unwrap()
        .unwrap();
    assert_eq!(
        ctx.read_holding_registers(HR_DRAIN, 1)
            .await
            .unwrap()
            .unwrap(),
        [0]
    );

    let err = ctx.read_holding_registers(0x00FF, 1).await.unwrap();
    assert_eq!(err, Err(ExceptionCode::IllegalDataAddress));
    let _ = ctx.disconnect().await;
    handle.stop();
}

#[tokio::test]
async fn writes_from_two_connections_are_serialized() {
    let handle = common::live(30.0);
    let (listener, addr) = common::bind().await;
    tokio::spawn(serve_modbus(listener, handle.clone()));
    let mut a = ModbusClient::connect(addr).await.unwrap();
    let mut b = ModbusClient::connect(addr).await.unwrap();
    a.write_single(HR_HIGH_SP, encode_level(270.0))
        .await
        .unwrap();
    b.write_single(HR_HIGH_SP, encode_level(230.0))
        .await
        .unwrap();
    assert_eq!(
        a.read_holding(HR_HIGH_SP, 1).await.unwrap(),
        [encode_level(230.0)]
    );
    handle.stop();
}

#[tokio::test]
async fn framing_error_closes_connection() {
    let handle = common::live(30.0);
    let (listener, addr) = common::bind().await;
    tokio::spawn(serve_modbus(listener, handle.clone()));
    let mut s = TcpStream::connect(addr).await.unwrap();
    // protocol id 7
    s.write_all(&[0, 1, 0, 7, 0, 6, 1, 3, 0, 0, 0, 1])
        .await
        .unwrap();
    let mut buf = [0u8; 16];
    match tokio::time::timeout(Duration::from_secs(5), s.read(&mut buf))
        .await
        .unwrap()
    {
        Ok(n) => assert_eq!(n, 0),
        Err(e) => assert_eq!(e.kind(), std::io::ErrorKind::ConnectionReset),
    }
    handle.stop();
}

#[tokio::test]
async fn operator_drives_setpoints_over_the_wire() {
    let handle = common::live(200.0);
    let (listener, addr) = common::bind().await;
    tokio::spawn(serve_modbus(listener, handle.clone()));
    let policy = OperatorPolicy {
        action_period: [2.0, 4.0],
        ..OperatorPolicy::default()
    };
    let start = handle.snapshot().sim_time;
    let opts = OperatorOptions {
        until: Some(start + 30.0),
        poll_interval: Duration::from_millis(2),
        ..OperatorOptions::default()
    };
    let actions = tokio::time::timeout(Duration::from_secs(30), run_operator(addr, policy, opts))
        .await
        .unwrap()
        .unwrap();
    assert!(actions.len() >= 5, "{} actions", actions.len());
    let last = actions.last().unwrap();
    let snap = handle.snapshot();
    assert_eq!(snap.registers.holding[..3], last.registers());
    for w in actions.windows(2) {
        assert!(w[1].time_s - w[0].time_s >= 2.0);
    }
    handle.stop();
}
