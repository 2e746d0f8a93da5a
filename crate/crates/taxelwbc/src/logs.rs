//! Simulation logs: a flat CSV (one row per control step) and the same rows
//! as JSON lines. Floats are written in shortest round-trip form, so a CSV
//! read back reproduces the records bit for bit.

use std::io::{BufRead, Read, Write};

use nalgebra::{SVector, Vector3};
use serde::{Deserialize, Serialize};
use taxelwbc_core::math::ArmVector;
use taxelwbc_core::model::JointState;
use taxelwbc_core::sim::{SimLog, StepRecord};
use taxelwbc_core::TAXEL_COUNT;

#[derive(Debug, thiserror::Error)]
pub enum LogError {
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("{0}")]
    Io(#[from] std::io::Error),
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("unexpected header: expected `{expected}`")]
    Header { expected: String },
    #[error("row {row}, column `{column}`: {message}")]
    Value { row: usize, column: String, message: String },
    #[error("log has no rows")]
    Empty,
}

/// Column groups in file order: prefix and width.
const GROUPS: [(&str, usize); 14] = [
    ("t", 1),
    ("base", 3),
    ("base_vel", 3),
    ("q", 7),
    ("dq", 7),
    ("ee", 6),
    ("ee_des", 6),
    ("taxel", TAXEL_COUNT),
    ("applied", TAXEL_COUNT),
    ("base_wrench", 3),
    ("ee_wrench", 6),
    ("tau_base", 3),
    ("tau", 7),
    ("cmd_wrench", 6),
];

const XY_YAW: [&str; 3] = ["x", "y", "yaw"];
const POSE: [&str; 6] = ["x", "y", "z", "rx", "ry", "rz"];
const PLANAR: [&str; 3] = ["fx", "fy", "mz"];
const WRENCH: [&str; 6] = ["fx", "fy", "fz", "tx", "ty", "tz"];

fn column_suffixes(prefix: &str, width: usize) -> Vec<String> {
    match prefix {
        "t" => vec![String::new()],
        "base" | "base_vel" | "tau_base" => XY_YAW.iter().map(|s| s.to_string()).collect(),
        "ee" | "ee_des" => POSE.iter().map(|s| s.to_string()).collect(),
        "base_wrench" => PLANAR.iter().map(|s| s.to_string()).collect(),
        "ee_wrench" | "cmd_wrench" => WRENCH.iter().map(|s| s.to_string()).collect(),
        _ => (1..=width).map(|i| i.to_string()).collect(),
    }
}

pub fn csv_header() -> Vec<String> {
    GROUPS
        .iter()
        .flat_map(|(p, w)| {
            column_suffixes(p, *w)
                .into_iter()
                .map(move |s| if s.is_empty() { p.to_string() } else { format!("{p}_{s}") })
        })
        .collect()
}

/// Width of one CSV row.
pub fn csv_width() -> usize {
    GROUPS.iter().map(|(_, w)| w).sum()
}

fn flatten(r: &StepRecord) -> Vec<f64> {
    let mut v = Vec::with_capacity(csv_width());
    v.push(r.t);
    v.extend(r.state.base.iter());
    v.extend(r.state.base_vel.iter());
    v.extend(r.state.arm.iter());
    v.extend(r.state.arm_vel.iter());
    v.extend(r.ee_pose.iter());
    v.extend(r.ee_desired.iter());
    v.extend(r.taxel_forces.iter());
    v.extend(r.applied_forces.iter());
    v.extend(r.base_wrench.iter());
    v.extend(r.ee_wrench.iter());
    v.extend(r.tau_base.iter());
    v.extend(r.tau_arm.iter());
    v.extend(r.command_wrench.iter());
    v
}

fn unflatten(v: &[f64]) -> StepRecord {
    let mut at = 0;
    let mut take = |n: usize| {
        let s = &v[at..at + n];
        at += n;
        s
    };
    let vec3 = |s: &[f64]| Vector3::from_column_slice(s);
    let t = take(1)[0];
    let base = vec3(take(3));
    let base_vel = vec3(take(3));
    let arm = ArmVector::from_column_slice(take(7));
    let arm_vel = ArmVector::from_column_slice(take(7));
    let ee_pose = SVector::<f64, 6>::from_column_slice(take(6));
    let ee_desired = SVector::<f64, 6>::from_column_slice(take(6));
    let taxel_forces: [f64; TAXEL_COUNT] = take(TAXEL_COUNT).try_into().expect("width");
    let applied_forces: [f64; TAXEL_COUNT] = take(TAXEL_COUNT).try_into().expect("width");
    let base_wrench = vec3(take(3));
    let ee_wrench = SVector::<f64, 6>::from_column_slice(take(6));
    let tau_base = vec3(take(3));
    let tau_arm = ArmVector::from_column_slice(take(7));
    let command_wrench = SVector::<f64, 6>::from_column_slice(take(6));
    StepRecord {
        t,
        state: JointState { base, base_vel, arm, arm_vel },
        ee_pose,
        ee_desired,
        taxel_forces,
        applied_forces,
        base_wrench,
        ee_wrench,
        tau_base,
        tau_arm,
        command_wrench,
    }
}

pub fn write_csv<W: Write>(writer: W, log: &SimLog) -> Result<(), LogError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(csv_header())?;
    let mut fields: Vec<String> = Vec::with_capacity(csv_width());
    for r in &log.records {
        fields.clear();
        fields.extend(flatten(r).iter().map(|x| x.to_string()));
        w.write_record(&fields)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads a CSV written by [`write_csv`]. The step size is taken from the
/// spacing of the first two rows.
pub fn read_csv<R: Read>(reader: R) -> Result<SimLog, LogError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let expected = csv_header();
    if rdr.headers()?.iter().ne(expected.iter().map(String::as_str)) {
        return Err(LogError::Header { expected: expected.join(",") });
    }
    let mut records = Vec::new();
    let mut row_values = Vec::with_capacity(csv_width());
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        row_values.clear();
        for (col, field) in rec.iter().enumerate() {
            let x: f64 = field.parse().map_err(|e: std::num::ParseFloatError| LogError::Value {
                row: row + 1,
                column: expected[col].clone(),
                message: e.to_string(),
            })?;
            row_values.push(x);
        }
        records.push(unflatten(&row_values));
    }
    let dt = match records.as_slice() {
        [] => return Err(LogError::Empty),
        [only] => only.t,
        [a, b, ..] => b.t - a.t,
    };
    Ok(SimLog { dt, records })
}

/// One JSON line.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonRow {
    pub t: f64,
    pub base: [f64; 3],
    pub base_vel: [f64; 3],
    pub q: Vec<f64>,
    pub dq: Vec<f64>,
    pub ee: [f64; 6],
    pub ee_desired: [f64; 6],
    pub taxel_forces: Vec<f64>,
    pub applied_forces: Vec<f64>,
    pub base_wrench: [f64; 3],
    pub ee_wrench: [f64; 6],
    pub tau_base: [f64; 3],
    pub tau_arm: Vec<f64>,
    pub command_wrench: [f64; 6],
}

fn arr<const N: usize>(v: impl Iterator<Item = f64>) -> [f64; N] {
    let mut out = [0.0; N];
    for (o, x) in out.iter_mut().zip(v) {
        *o = x;
    }
    out
}

impl From<&StepRecord> for JsonRow {
    fn from(r: &StepRecord) -> Self {
        JsonRow {
            t: r.t,
            base: arr(r.state.base.iter().copied()),
            base_vel: arr(r.state.base_vel.iter().copied()),
            q: r.state.arm.iter().copied().collect(),
            dq: r.state.arm_vel.iter().copied().collect(),
            ee: arr(r.ee_pose.iter().copied()),
            ee_desired: arr(r.ee_desired.iter().copied()),
            taxel_forces: r.taxel_forces.to_vec(),
            applied_forces: r.applied_forces.to_vec(),
            base_wrench: arr(r.base_wrench.iter().copied()),
            ee_wrench: arr(r.ee_wrench.iter().copied()),
            tau_base: arr(r.tau_base.iter().copied()),
            tau_arm: r.tau_arm.iter().copied().collect(),
            command_wrench: arr(r.command_wrench.iter().copied()),
        }
    }
}

pub fn write_jsonl<W: Write>(mut writer: W, log: &SimLog) -> Result<(), LogError> {
    for r in &log.records {
        serde_json::to_writer(&mut writer, &JsonRow::from(r))?;
        writer.write_all(b"\n")?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_jsonl<R: BufRead>(reader: R) -> Result<Vec<JsonRow>, LogError> {
    let mut rows = Vec::new();
    for line in reader.lines() {
        let line = line?;
        if !line.trim().is_empty() {
            rows.push(serde_json::from_str(&line)?);
        }
    }
    Ok(rows)
}

#[cfg(test)]
mod tests {
    use super::*;
    use taxelwbc_core::control::ImpedanceGains;
    use taxelwbc_core::sim::{
        run_scenario, ControllerKind, ForceEvent, ForceFrame, ForceTarget, Plant, Scenario, SimConfig,
    };

    fn short_log() -> SimLog {
        let mut s = Scenario::new("t", ControllerKind::Impedance);
        s.events.push(ForceEvent {
            t_start: 0.01,
            t_end: 0.04,
            target: ForceTarget::Taxel(6),
            magnitude: 30.0,
            direction: Vector3::zeros(),
            frame: ForceFrame::World,
        });
        let cfg = SimConfig { duration: 0.05, ..SimConfig::default() };
        run_scenario(&cfg, &s, &Plant::default(), &ImpedanceGains::default()).unwrap()
    }

    #[test]
    fn header_matches_width() {
        let h = csv_header();
        assert_eq!(h.len(), csv_width());
        assert_eq!(h[0], "t");
        assert_eq!(h[1], "base_x");
        assert!(h.contains(&"taxel_11".to_string()));
        assert!(h.contains(&"cmd_wrench_tz".to_string()));
    }

    #[test]
    fn csv_round_trip_is_exact() {
        let log = short_log();
        let mut buf = Vec::new();
        write_csv(&mut buf, &log).unwrap();
        let back = read_csv(buf.as_slice()).unwrap();
        assert_eq!(back.records, log.records);
        assert_eq!(back.records.len(), 50);
    }

    #[test]
    fn jsonl_has_one_line_per_record() {
        let log = short_log();
        let mut buf = Vec::new();
        write_jsonl(&mut buf, &log).unwrap();
        let rows = read_jsonl(buf.as_slice()).unwrap();
        assert_eq!(rows.len(), log.records.len());
        assert_eq!(rows[20], JsonRow::from(&log.records[20]));
    }

    #[test]
    fn wrong_header_is_rejected() {
        assert!(matches!(read_csv("a,b\n1,2\n".as_bytes()), Err(LogError::Header { .. })));
    }
}
