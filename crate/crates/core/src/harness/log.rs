use std::io;

use serde::{Deserialize, Serialize};

use super::HarnessError;

pub const LOG_HEADER: [&str; 12] = [
    "tick",
    "time_s",
    "true_level",
    "reported_level",
    "fill",
    "drain",
    "low_sp",
    "high_sp",
    "mode",
    "code",
    "temporal_diff",
    "fault_active",
];

/// Rounds to the four decimals written to the log, so rows survive a CSV
/// round trip unchanged.
pub(crate) fn q4(x: f64) -> f64 {
    (x * 1e4).round() / 1e4
}

/// One tick of a run. `fault_active` is the injector's ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub tick: u64,
    pub time_s: f64,
    pub true_level: f64,
    pub reported_level: f64,
    pub fill: bool,
    pub drain: bool,
    pub low_sp: f64,
    pub high_sp: f64,
    pub mode: u8,
    pub code: u8,
    pub temporal_diff: f64,
    pub fault_active: bool,
}

impl LogRow {
    pub fn authenticated(&self) -> bool {
        self.code & 0b11 == 0b11
    }

    pub fn temporal_ok(&self) -> bool {
        self.code & 0b10 != 0
    }

    fn record(&self) -> [String; 12] {
        let b = |v: bool| u8::from(v).to_string();
        [
            self.tick.to_string(),
            format!("{:.4}", self.time_s),
            format!("{:.4}", self.true_level),
            format!("{:.4}", self.reported_level),
            b(self.fill),
            b(self.drain),
            format!("{:.2}", self.low_sp),
            format!("{:.2}", self.high_sp),
            self.mode.to_string(),
            self.code.to_string(),
            format!("{:.4}", self.temporal_diff),
            b(self.fault_active),
        ]
    }

    fn parse(row: usize, rec: &csv::StringRecord) -> Result<Self, HarnessError> {
        let bad = |reason: String| HarnessError::MalformedLog { row, reason };
        if rec.len() != LOG_HEADER.len() {
            return Err(bad(format!(
                "expected {} fields, found {}",
                LOG_HEADER.len(),
                rec.len()
            )));
        }
        let float = |i: usize| -> Result<f64, HarnessError> {
            rec[i]
                .parse()
                .map_err(|_| bad(format!("{}: not a number", LOG_HEADER[i])))
        };
        let int = |i: usize| -> Result<u64, HarnessError> {
            rec[i]
                .parse()
                .map_err(|_| bad(format!("{}: not an integer", LOG_HEADER[i])))
        };
        let flag = |i: usize| -> Result<bool, HarnessError> {
            match &rec[i] {
                "0" => Ok(false),
                "1" => Ok(true),
                _ => Err(bad(format!("{}: expected 0 or 1", LOG_HEADER[i]))),
            }
        };
        let small = |i: usize, max: u64| -> Result<u8, HarnessError> {
            let v = int(i)?;
            if v > max {
                return Err(bad(format!("{}: {v} out of range", LOG_HEADER[i])));
            }
            Ok(v as u8)
        };
        Ok(Self {
            tick: int(0)?,
            time_s: float(1)?,
            true_level: float(2)?,
            reported_level: float(3)?,
            fill: flag(4)?,
            drain: flag(5)?,
            low_sp: float(6)?,
            high_sp: float(7)?,
            mode: small(8, 1)?,
            code: small(9, 7)?,
            temporal_diff: float(10)?,
            fault_active: flag(11)?,
        })
    }
}

pub fn write_log<W: io::Write>(rows: &[LogRow], out: W) -> Result<(), HarnessError> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(LOG_HEADER)?;
    for r in rows {
        w.write_record(r.record())?;
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

pub fn read_log<R: io::Read>(input: R) -> Result<Vec<LogRow>, HarnessError> {
    let mut r = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(input);
    let header = r.headers()?.clone();
    if header.iter().ne(LOG_HEADER) {
        return Err(HarnessError::MalformedLog {
            row: 0,
            reason: format!("unexpected header {:?}", header.iter().collect::<Vec<_>>()),
        });
    }
    r.records()
        .enumerate()
        .map(|(i, rec)| LogRow::parse(i + 1, &rec?))
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn row(tick: u64) -> LogRow {
        LogRow {
            tick,
            time_s: q4(tick as f64 / 15.0),
            true_level: q4(123.456789),
            reported_level: q4(123.4),
            fill: true,
            drain: false,
            low_sp: 50.0,
            high_sp: 250.0,
            mode: 1,
            code: 3,
            temporal_diff: q4(1.0 / 3.0),
            fault_active: false,
        }
    }

    #[test]
    fn header_and_format() {
        let mut out = Vec::new();
        write_log(&[row(1)], &mut out).unwrap();
        let text = String::from_utf8(out).unwrap();
        assert_eq!(
            text,
            "tick,time_s,true_level,reported_level,fill,drain,low_sp,high_sp,mode,code,temporal_diff,fault_active\n\
             1,0.0667,123.4568,123.4000,1,0,50.00,250.00,1,3,0.3333,0\n"
        );
    }

    #[test]
    fn round_trip_is_exact() {
        let rows: Vec<LogRow> = (1..500).map(row).collect();
        let mut out = Vec::new();
        write_log(&rows, &mut out).unwrap();
        assert_eq!(read_log(out.as_slice()).unwrap(), rows);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(read_log("a,b\n1,2\n".as_bytes()).is_err());
        let mut out = Vec::new();
        write_log(&[row(1)], &mut out).unwrap();
        let text = String::from_utf8(out)
            .unwrap()
            .replace(",3,0.3333", ",9,0.3333");
        assert!(matches!(
            read_log(text.as_bytes()),
            Err(HarnessError::MalformedLog { row: 1, .. })
        ));
    }
}
