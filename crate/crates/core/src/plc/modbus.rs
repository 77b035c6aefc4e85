//! Modbus-TCP application framing for the register subset the PLC serves.
//!
//! ADU layout: MBAP header (transaction id, protocol id = 0, length, unit id)
//! followed by the PDU. `length` counts the unit id plus the PDU.

pub const UNIT_ID: u8 = 1;
pub const MBAP_LEN: usize = 7;
/// Largest legal value of the MBAP length field.
pub const MAX_LENGTH_FIELD: u16 = 254;

pub const FC_READ_HOLDING: u8 = 0x03;
pub const FC_READ_INPUT: u8 = 0x04;
pub const FC_WRITE_SINGLE: u8 = 0x06;
pub const FC_WRITE_MULTIPLE: u8 = 0x10;

const MAX_READ_QTY: u16 = 125;
const MAX_WRITE_QTY: u16 = 123;

/// Frame-level failure; the connection should be closed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, thiserror::Error)]
pub enum FrameError {
    #[error("frame truncated")]
    Truncated,
    #[error("protocol id {0} is not Modbus")]
    BadProtocol(u16),
    #[error("MBAP length {0} out of range")]
    BadLength(u16),
    #[error("PDU body does not match function {0:#04x}")]
    MalformedPdu(u8),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[repr(u8)]
pub enum ExceptionCode {
    IllegalFunction = 0x01,
    IllegalDataAddress = 0x02,
    IllegalDataValue = 0x03,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MbapHeader {
    pub transaction_id: u16,
    pub protocol_id: u16,
    pub length: u16,
    pub unit_id: u8,
}

impl MbapHeader {
    pub fn parse(bytes: &[u8]) -> Result<Self, FrameError> {
        if bytes.len() < MBAP_LEN {
            return Err(FrameError::Truncated);
        }
        let h = Self {
            transaction_id: u16::from_be_bytes([bytes[0], bytes[1]]),
            protocol_id: u16::from_be_bytes([bytes[2], bytes[3]]),
            length: u16::from_be_bytes([bytes[4], bytes[5]]),
            unit_id: bytes[6],
        };
        if h.protocol_id != 0 {
            return Err(FrameError::BadProtocol(h.protocol_id));
        }
        if h.length < 2 || h.length > MAX_LENGTH_FIELD {
            return Err(FrameError::BadLength(h.length));
        }
        Ok(h)
    }

    /// Total ADU length implied by the header.
    pub fn adu_len(&self) -> usize {
        6 + self.length as usize
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Request {
    ReadHolding { addr: u16, qty: u16 },
    ReadInput { addr: u16, qty: u16 },
    WriteSingle { addr: u16, value: u16 },
    WriteMultiple { addr: u16, values: Vec<u16> },
}

impl Request {
    pub fn function_code(&self) -> u8 {
        match self {
            Request::ReadHolding { .. } => FC_READ_HOLDING,
            Request::ReadInput { .. } => FC_READ_INPUT,
            Request::WriteSingle { .. } => FC_WRITE_SINGLE,
            Request::WriteMultiple { .. } => FC_WRITE_MULTIPLE,
        }
    }
}

/// A request, or the function code and exception to answer it with.
pub type Decoded = Result<Request, (u8, ExceptionCode)>;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Reply {
    Registers { function: u8, values: Vec<u16> },
    WriteSingle { addr: u16, value: u16 },
    WriteMultiple { addr: u16, qty: u16 },
    Exception { function: u8, code: ExceptionCode },
}

/// Register file the request executor talks to.
pub trait RegisterAccess {
    fn read_holding(&self, addr: u16, qty: u16) -> Result<Vec<u16>, ExceptionCode>;
    fn read_input(&self, addr: u16, qty: u16) -> Result<Vec<u16>, ExceptionCode>;
    /// Applies all of `values` or none of them.
    fn write_holding(&mut self, addr: u16, values: &[u16]) -> Result<(), ExceptionCode>;
}

fn be16(b: &[u8], at: usize) -> u16 {
    u16::from_be_bytes([b[at], b[at + 1]])
}

/// Decodes a PDU. The outer error closes the connection; the inner one is
/// answered with an exception response.
pub fn decode_pdu(pdu: &[u8]) -> Result<Decoded, FrameError> {
    let Some(&function) = pdu.first() else {
        return Err(FrameError::Truncated);
    };
    let body = &pdu[1..];
    let exact = |n: usize| {
        if body.len() == n {
            Ok(())
        } else {
            Err(FrameError::MalformedPdu(function))
        }
    };
    let req = match function {
        FC_READ_HOLDING | FC_READ_INPUT => {
            exact(4)?;
            let (addr, qty) = (be16(body, 0), be16(body, 2));
            if qty == 0 || qty > MAX_READ_QTY {
                return Ok(Err((function, ExceptionCode::IllegalDataValue)));
            }
            if function == FC_READ_HOLDING {
                Request::ReadHolding { addr, qty }
            } else {
                Request::ReadInput { addr, qty }
            }
        }
        FC_WRITE_SINGLE => {
            exact(4)?;
            Request::WriteSingle {
                addr: be16(body, 0),
                value: be16(body, 2),
            }
        }
        FC_WRITE_MULTIPLE => {
            if body.len() < 5 {
                return Err(FrameError::MalformedPdu(function));
            }
            let (addr, qty, count) = (be16(body, 0), be16(body, 2), body[4] as usize);
            if body.len() != 5 + count {
                return Err(FrameError::MalformedPdu(function));
            }
            if qty == 0 || qty > MAX_WRITE_QTY || count != 2 * qty as usize {
                return Ok(Err((function, ExceptionCode::IllegalDataValue)));
            }
            let values = body[5..]
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect();
            Request::WriteMultiple { addr, values }
        }
        _ => return Ok(Err((function, ExceptionCode::IllegalFunction))),
    };
    Ok(Ok(req))
}

/// Splits a complete ADU into header and request.
pub fn decode_adu(adu: &[u8]) -> Result<(MbapHeader, Decoded), FrameError> {
    let header = MbapHeader::parse(adu)?;
    if adu.len() != header.adu_len() {
        return Err(FrameError::Truncated);
    }
    Ok((header, decode_pdu(&adu[MBAP_LEN..])?))
}

/// Runs one request against a register file.
pub fn execute<A: RegisterAccess + ?Sized>(access: &mut A, req: &Request) -> Reply {
    let function = req.function_code();
    let result = match req {
        Request::ReadHolding { addr, qty } => access
            .read_holding(*addr, *qty)
            .map(|values| Reply::Registers { function, values }),
        Request::ReadInput { addr, qty } => access
            .read_input(*addr, *qty)
            .map(|values| Reply::Registers { function, values }),
        Request::WriteSingle { addr, value } => {
            access
                .write_holding(*addr, &[*value])
                .map(|()| Reply::WriteSingle {
                    addr: *addr,
                    value: *value,
                })
        }
        Request::WriteMultiple { addr, values } => {
            access
                .write_holding(*addr, values)
                .map(|()| Reply::WriteMultiple {
                    addr: *addr,
                    qty: values.len() as u16,
                })
        }
    };
    result.unwrap_or_else(|code| Reply::Exception { function, code })
}

/// Encodes a reply ADU echoing the request's transaction and unit ids.
pub fn encode_reply(header: &MbapHeader, reply: &Reply) -> Vec<u8> {
    let mut pdu = Vec::with_capacity(8);
    match reply {
        Reply::Registers { function, values } => {
            pdu.push(*function);
            pdu.push((values.len() * 2) as u8);
            for v in values {
                pdu.extend_from_slice(&v.to_be_bytes());
            }
        }
        Reply::WriteSingle { addr, value } => {
            pdu.push(FC_WRITE_SINGLE);
            pdu.extend_from_slice(&addr.to_be_bytes());
            pdu.extend_from_slice(&value.to_be_bytes());
        }
        Reply::WriteMultiple { addr, qty } => {
            pdu.push(FC_WRITE_MULTIPLE);
            pdu.extend_from_slice(&addr.to_be_bytes());
            pdu.extend_from_slice(&qty.to_be_bytes());
        }
        Reply::Exception { function, code } => {
            pdu.push(function | 0x80);
            pdu.push(*code as u8);
        }
    }
    let mut adu = Vec::with_capacity(MBAP_LEN + pdu.len());
    adu.extend_from_slice(&header.transaction_id.to_be_bytes());
    adu.extend_from_slice(&0u16.to_be_bytes());
    adu.extend_from_slice(&((pdu.len() + 1) as u16).to_be_bytes());
    adu.push(header.unit_id);
    adu.extend_from_slice(&pdu);
    adu
}

/// Encodes a request ADU; used by the scripted operator and by tests.
pub fn encode_request(transaction_id: u16, unit_id: u8, req: &Request) -> Vec<u8> {
    let mut pdu = vec![req.function_code()];
    match req {
        Request::ReadHolding { addr, qty } | Request::ReadInput { addr, qty } => {
            pdu.extend_from_slice(&addr.to_be_bytes());
            pdu.extend_from_slice(&qty.to_be_bytes());
        }
        Request::WriteSingle { addr, value } => {
            pdu.extend_from_slice(&addr.to_be_bytes());
            pdu.extend_from_slice(&value.to_be_bytes());
        }
        Request::WriteMultiple { addr, values } => {
            pdu.extend_from_slice(&addr.to_be_bytes());
            pdu.extend_from_slice(&(values.len() as u16).to_be_bytes());
            pdu.push((values.len() * 2) as u8);
            for v in values {
                pdu.extend_from_slice(&v.to_be_bytes());
            }
        }
    }
    let mut adu = Vec::with_capacity(MBAP_LEN + pdu.len());
    adu.extend_from_slice(&transaction_id.to_be_bytes());
    adu.extend_from_slice(&0u16.to_be_bytes());
    adu.extend_from_slice(&((pdu.len() + 1) as u16).to_be_bytes());
    adu.push(unit_id);
    adu.extend_from_slice(&pdu);
    adu
}

/// Decodes a reply PDU for a given request; used by clients.
pub fn decode_reply(adu: &[u8]) -> Result<(MbapHeader, Reply), FrameError> {
    let header = MbapHeader::parse(adu)?;
    if adu.len() != header.adu_len() {
        return Err(FrameError::Truncated);
    }
    let pdu = &adu[MBAP_LEN..];
    let function = pdu[0];
    let body = &pdu[1..];
    let reply = if function & 0x80 != 0 {
        let code = match body.first() {
            Some(1) => ExceptionCode::IllegalFunction,
            Some(2) => ExceptionCode::IllegalDataAddress,
            Some(3) => ExceptionCode::IllegalDataValue,
            _ => return Err(FrameError::MalformedPdu(function)),
        };
        Reply::Exception {
            function: function & 0x7F,
            code,
        }
    } else {
        match function {
            FC_READ_HOLDING | FC_READ_INPUT => {
                let n = *body.first().ok_or(FrameError::MalformedPdu(function))? as usize;
                if body.len() != 1 + n || !n.is_multiple_of(2) {
                    return Err(FrameError::MalformedPdu(function));
                }
                Reply::Registers {
                    function,
                    values: body[1..]
                        .chunks_exact(2)
                        .map(|c| u16::from_be_bytes([c[0], c[1]]))
                        .collect(),
                }
            }
            FC_WRITE_SINGLE | FC_WRITE_MULTIPLE if body.len() == 4 => {
                let (a, b) = (be16(body, 0), be16(body, 2));
                if function == FC_WRITE_SINGLE {
                    Reply::WriteSingle { addr: a, value: b }
                } else {
                    Reply::WriteMultiple { addr: a, qty: b }
                }
            }
            _ => return Err(FrameError::MalformedPdu(function)),
        }
    };
    Ok((header, reply))
}

/// Serves one complete request ADU against `access`.
pub fn handle_frame<A: RegisterAccess + ?Sized>(
    access: &mut A,
    request: &[u8],
) -> Result<Vec<u8>, FrameError> {
    let (header, decoded) = decode_adu(request)?;
    let reply = match decoded {
        Ok(req) => execute(access, &req),
        Err((function, code)) => Reply::Exception { function, code },
    };
    Ok(encode_reply(&header, &reply))
}
