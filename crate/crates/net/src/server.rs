//! Modbus-TCP server over a live kernel.

use std::io;

use pufguard_core::harness::HoldingWrite;
use pufguard_core::plc::modbus::{
    decode_adu, encode_reply, execute, MbapHeader, Reply, Request, MBAP_LEN,
};
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};

use crate::live::{LiveError, LiveHandle};

pub const DEFAULT_MODBUS_PORT: u16 = 1502;

/// Accepts connections until the listener fails; one task per client.
pub async fn serve_modbus(listener: TcpListener, handle: LiveHandle) -> io::Result<()> {
    loop {
        let (stream, peer) = listener.accept().await?;
        let handle = handle.clone();
        tokio::spawn(async move {
            if let Err(e) = serve_connection(stream, handle).await {
                log::debug!("modbus client {peer}: {e}");
            }
        });
    }
}

async fn serve_connection(mut stream: TcpStream, handle: LiveHandle) -> io::Result<()> {
    stream.set_nodelay(true)?;
    let mut buf = vec![0u8; 260];
    loop {
        match stream.read_exact(&mut buf[..MBAP_LEN]).await {
            Ok(_) => {}
            Err(e) if e.kind() == io::ErrorKind::UnexpectedEof => return Ok(()),
            Err(e) => return Err(e),
        }
        let header = MbapHeader::parse(&buf[..MBAP_LEN]).map_err(invalid)?;
        let len = header.adu_len();
        stream.read_exact(&mut buf[MBAP_LEN..len]).await?;
        let (header, decoded) = decode_adu(&buf[..len]).map_err(invalid)?;
        let reply = match decoded {
            Err((function, code)) => Reply::Exception { function, code },
            Ok(req) => answer(&handle, req).await?,
        };
        stream.write_all(&encode_reply(&header, &reply)).await?;
    }
}

/// Reads come from the latest snapshot; writes resolve at the next tick.
async fn answer(handle: &LiveHandle, req: Request) -> io::Result<Reply> {
    let function = req.function_code();
    let (write, ok) = match req {
        Request::ReadHolding { .. } | Request::ReadInput { .. } => {
            let mut image = handle.snapshot().registers;
            return Ok(execute(&mut image, &req));
        }
        Request::WriteSingle { addr, value } => (
            HoldingWrite::single(addr, value),
            Reply::WriteSingle { addr, value },
        ),
        Request::WriteMultiple { addr, values } => {
            let qty = values.len() as u16;
            (
                HoldingWrite { addr, values },
                Reply::WriteMultiple { addr, qty },
            )
        }
    };
    match handle.write(write).await {
        Ok(()) => Ok(ok),
        Err(LiveError::Rejected(code)) => Ok(Reply::Exception { function, code }),
        Err(e) => Err(io::Error::other(e)),
    }
}

fn invalid(e: impl std::error::Error + Send + Sync + 'static) -> io::Error {
    io::Error::new(io::ErrorKind::InvalidData, e)
}
