//! Dataset and log serialization.
//!
//! CSV is the interchange format: a 9-column dataset file shared between
//! collection and training, and a 17-column simulation log with `#`
//! metadata lines. Floats are written with the shortest round-trip
//! representation, so re-reading a file reproduces the exact values. Logs
//! can also be stored as a compact little-endian binary.

use std::path::Path;

use crate::elm::{TrainingSample, FEATURE_DIM};
use crate::error::{Error, Result};
use crate::qp::SolverStatus;
use crate::sim::{LogRecord, SimLog};
use crate::vehicle::VehicleState;

pub const DATASET_HEADER: &str = "x,y,heading,yaw_rate,vx,vy,slip_fl,slip_fr,error";
pub const LOG_HEADER: &str = "time,x,y,heading,vx,vy,yaw_rate,mpc_command,compensation,\
applied_command,predicted_x,predicted_y,realized_error,estimated_error,reference_y,\
reference_heading,solver_status";

const LOG_MAGIC: &[u8; 8] = b"TLSIMLOG";
const LOG_BINARY_VERSION: u32 = 1;

fn parse_f64(field: &str, row: usize, name: &str) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::InvalidData(format!("row {row}: cannot parse {name} from '{field}'")))
}

// ---------------------------------------------------------------------------
// dataset CSV
// ---------------------------------------------------------------------------

pub fn dataset_to_csv(samples: &[TrainingSample]) -> String {
    let mut out = String::with_capacity(64 * (samples.len() + 1));
    out.push_str(DATASET_HEADER);
    out.push('\n');
    for s in samples {
        for f in s.features.iter() {
            out.push_str(&f.to_string());
            out.push(',');
        }
        out.push_str(&s.label.to_string());
        out.push('\n');
    }
    out
}

pub fn dataset_from_csv(text: &str) -> Result<Vec<TrainingSample>> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::InvalidData("empty dataset file".into()))?;
    if header.trim() != DATASET_HEADER {
        return Err(Error::InvalidData(format!(
            "unexpected dataset header '{}'",
            header.trim()
        )));
    }
    let mut samples = Vec::new();
    for (index, line) in lines {
        let row = index + 1; // 1-based, counting the header as row 1
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != FEATURE_DIM + 1 {
            return Err(Error::InvalidData(format!(
                "row {row}: expected {} columns, found {}",
                FEATURE_DIM + 1,
                fields.len()
            )));
        }
        let mut features = [0.0; FEATURE_DIM];
        for (j, slot) in features.iter_mut().enumerate() {
            *slot = parse_f64(fields[j], row, "feature")?;
        }
        let label = parse_f64(fields[FEATURE_DIM], row, "label")?;
        samples.push(TrainingSample { features, label });
    }
    Ok(samples)
}

pub fn write_dataset_csv(path: &Path, samples: &[TrainingSample]) -> Result<()> {
    std::fs::write(path, dataset_to_csv(samples))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_dataset_csv(path: &Path) -> Result<Vec<TrainingSample>> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    dataset_from_csv(&text)
}

// ---------------------------------------------------------------------------
// simulation log CSV
// ---------------------------------------------------------------------------

pub fn log_to_csv(log: &SimLog) -> String {
    let mut out = String::with_capacity(160 * (log.records.len() + 4));
    out.push_str("# tracklab simulation log v1\n");
    out.push_str(&format!("# sample_time={}\n", log.sample_time));
    out.push_str(&format!("# speed={}\n", log.speed));
    if let Some(reason) = &log.abort {
        out.push_str(&format!("# abort={}\n", reason.replace('\n', " ")));
    }
    out.push_str(LOG_HEADER);
    out.push('\n');
    for r in &log.records {
        let values = [
            r.time,
            r.state.x,
            r.state.y,
            r.state.heading,
            r.state.vx,
            r.state.vy,
            r.state.yaw_rate,
            r.mpc_command,
            r.compensation,
            r.applied_command,
            r.predicted_x,
            r.predicted_y,
            r.realized_error,
            r.estimated_error,
            r.reference_y,
            r.reference_heading,
        ];
        for v in values {
            out.push_str(&v.to_string());
            out.push(',');
        }
        out.push_str(r.solver_status.as_str());
        out.push('\n');
    }
    out
}

pub fn log_from_csv(text: &str) -> Result<SimLog> {
    let mut sample_time = None;
    let mut speed = None;
    let mut abort = None;
    let mut header_seen = false;
    let mut records = Vec::new();
    for (index, line) in text.lines().enumerate() {
        let row = index + 1;
        let trimmed = line.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(meta) = trimmed.strip_prefix('#') {
            let meta = meta.trim();
            if let Some(v) = meta.strip_prefix("sample_time=") {
                sample_time = Some(parse_f64(v, row, "sample_time")?);
            } else if let Some(v) = meta.strip_prefix("speed=") {
                speed = Some(parse_f64(v, row, "speed")?);
            } else if let Some(v) = meta.strip_prefix("abort=") {
                abort = Some(v.to_string());
            }
            continue;
        }
        if !header_seen {
            if trimmed != LOG_HEADER {
                return Err(Error::InvalidData(format!(
                    "row {row}: unexpected log header"
                )));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = trimmed.split(',').collect();
        if fields.len() != 17 {
            return Err(Error::InvalidData(format!(
                "row {row}: expected 17 columns, found {}",
                fields.len()
            )));
        }
        let mut v = [0.0; 16];
        for (j, slot) in v.iter_mut().enumerate() {
            *slot = parse_f64(fields[j], row, "log value")?;
        }
        records.push(LogRecord {
            time: v[0],
            state: VehicleState {
                x: v[1],
                y: v[2],
                heading: v[3],
                vx: v[4],
                vy: v[5],
                yaw_rate: v[6],
            },
            mpc_command: v[7],
            compensation: v[8],
            applied_command: v[9],
            predicted_x: v[10],
            predicted_y: v[11],
            realized_error: v[12],
            estimated_error: v[13],
            reference_y: v[14],
            reference_heading: v[15],
            solver_status: SolverStatus::parse(fields[16].trim())?,
        });
    }
    Ok(SimLog {
        sample_time: sample_time
            .ok_or_else(|| Error::InvalidData("log is missing the sample_time line".into()))?,
        speed: speed.ok_or_else(|| Error::InvalidData("log is missing the speed line".into()))?,
        records,
        abort,
    })
}

pub fn write_log_csv(path: &Path, log: &SimLog) -> Result<()> {
    std::fs::write(path, log_to_csv(log)).map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_log_csv(path: &Path) -> Result<SimLog> {
    let text =
        std::fs::read_to_string(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    log_from_csv(&text)
}

// ---------------------------------------------------------------------------
// simulation log binary
// ---------------------------------------------------------------------------

pub fn log_to_binary(log: &SimLog) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 130 * log.records.len());
    out.extend_from_slice(LOG_MAGIC);
    out.extend_from_slice(&LOG_BINARY_VERSION.to_le_bytes());
    out.extend_from_slice(&log.sample_time.to_le_bytes());
    out.extend_from_slice(&log.speed.to_le_bytes());
    let abort = log.abort.as_deref().unwrap_or("");
    out.extend_from_slice(&(abort.len() as u32).to_le_bytes());
    out.extend_from_slice(abort.as_bytes());
    out.extend_from_slice(&(log.records.len() as u64).to_le_bytes());
    for r in &log.records {
        for v in [
            r.time,
            r.state.x,
            r.state.y,
            r.state.heading,
            r.state.vx,
            r.state.vy,
            r.state.yaw_rate,
            r.mpc_command,
            r.compensation,
            r.applied_command,
            r.predicted_x,
            r.predicted_y,
            r.realized_error,
            r.estimated_error,
            r.reference_y,
            r.reference_heading,
        ] {
            out.extend_from_slice(&v.to_le_bytes());
        }
        out.push(match r.solver_status {
            SolverStatus::Converged => 0,
            SolverStatus::Inexact => 1,
            SolverStatus::Failed => 2,
        });
    }
    out
}

pub fn log_from_binary(bytes: &[u8]) -> Result<SimLog> {
    let mut cursor = 0usize;
    let take = |cursor: &mut usize, n: usize| -> Result<&[u8]> {
        if *cursor + n > bytes.len() {
            return Err(Error::InvalidData("binary log truncated".into()));
        }
        let slice = &bytes[*cursor..*cursor + n];
        *cursor += n;
        Ok(slice)
    };
    let read_f64 = |cursor: &mut usize| -> Result<f64> {
        Ok(f64::from_le_bytes(take(cursor, 8)?.try_into().unwrap()))
    };

    if take(&mut cursor, 8)? != LOG_MAGIC {
        return Err(Error::InvalidData("not a binary simulation log".into()));
    }
    let version = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap());
    if version != LOG_BINARY_VERSION {
        return Err(Error::InvalidData(format!(
            "unsupported binary log version {version}"
        )));
    }
    let sample_time = read_f64(&mut cursor)?;
    let speed = read_f64(&mut cursor)?;
    let abort_len = u32::from_le_bytes(take(&mut cursor, 4)?.try_into().unwrap()) as usize;
    let abort_bytes = take(&mut cursor, abort_len)?;
    let abort = if abort_len == 0 {
        None
    } else {
        Some(
            String::from_utf8(abort_bytes.to_vec())
                .map_err(|_| Error::InvalidData("abort message is not valid utf-8".into()))?,
        )
    };
    let count = u64::from_le_bytes(take(&mut cursor, 8)?.try_into().unwrap()) as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let mut v = [0.0; 16];
        for slot in v.iter_mut() {
            *slot = read_f64(&mut cursor)?;
        }
        let status = match take(&mut cursor, 1)?[0] {
            0 => SolverStatus::Converged,
            1 => SolverStatus::Inexact,
            2 => SolverStatus::Failed,
            other => {
                return Err(Error::InvalidData(format!(
                    "unknown solver status byte {other}"
                )))
            }
        };
        records.push(LogRecord {
            time: v[0],
            state: VehicleState {
                x: v[1],
                y: v[2],
                heading: v[3],
                vx: v[4],
                vy: v[5],
                yaw_rate: v[6],
            },
            mpc_command: v[7],
            compensation: v[8],
            applied_command: v[9],
            predicted_x: v[10],
            predicted_y: v[11],
            realized_error: v[12],
            estimated_error: v[13],
            reference_y: v[14],
            reference_heading: v[15],
            solver_status: status,
        });
    }
    Ok(SimLog {
        sample_time,
        speed,
        records,
        abort,
    })
}

pub fn write_log_binary(path: &Path, log: &SimLog) -> Result<()> {
    std::fs::write(path, log_to_binary(log))
        .map_err(|e| Error::Io(format!("{}: {e}", path.display())))
}

pub fn read_log_binary(path: &Path) -> Result<SimLog> {
    let bytes = std::fs::read(path).map_err(|e| Error::Io(format!("{}: {e}", path.display())))?;
    log_from_binary(&bytes)
}
