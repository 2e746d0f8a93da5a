//! Compression sweep CSV files: one row per (trial, load level), columns
//! `material,trial,force_n,deformation_mm,raw_counts`. An empty
//! `deformation_mm` cell means the deformation was not recorded.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use taxelwbc_core::calib::SweepSample;

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("{source_name}: {err}")]
    Csv { source_name: String, err: csv::Error },
    #[error("{source_name}: line {line}: {message}")]
    Row { source_name: String, line: u64, message: String },
    #[error("{0}: no rows")]
    Empty(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Row {
    material: String,
    trial: u32,
    force_n: f64,
    deformation_mm: Option<f64>,
    raw_counts: f64,
}

/// Reads a sweep file, grouping rows by material in order of first
/// appearance.
pub fn read_sweeps<R: Read>(reader: R, source_name: &str) -> Result<Vec<(String, Vec<SweepSample>)>, SweepError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let mut order: Vec<String> = Vec::new();
    let mut groups: BTreeMap<String, Vec<SweepSample>> = BTreeMap::new();
    for row in rdr.deserialize::<Row>() {
        let row = row.map_err(|err| match err.position() {
            Some(pos) => {
                SweepError::Row { source_name: source_name.into(), line: pos.line(), message: err.to_string() }
            }
            None => SweepError::Csv { source_name: source_name.into(), err },
        })?;
        if !groups.contains_key(&row.material) {
            order.push(row.material.clone());
        }
        groups.entry(row.material).or_default().push(SweepSample {
            trial: row.trial,
            force: row.force_n,
            deformation: row.deformation_mm,
            raw: row.raw_counts,
        });
    }
    if order.is_empty() {
        return Err(SweepError::Empty(source_name.into()));
    }
    Ok(order
        .into_iter()
        .map(|m| {
            let samples = groups.remove(&m).unwrap_or_default();
            (m, samples)
        })
        .collect())
}

pub fn write_sweep<W: Write>(writer: W, material: &str, samples: &[SweepSample]) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(writer);
    for s in samples {
        w.serialize(Row {
            material: material.into(),
            trial: s.trial,
            force_n: s.force,
            deformation_mm: s.deformation,
            raw_counts: s.raw,
        })?;
    }
    w.flush()?;
    Ok(())
}
