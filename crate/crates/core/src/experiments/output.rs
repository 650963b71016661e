//! CSV persistence of trajectories, snapshots and tables.

use std::fs;
use std::path::{Path, PathBuf};

use crate::dynamics::SystemState;
use crate::energy::EnergyReport;
use crate::error::{Error, Result};

pub const SNAPSHOT_HEADER: [&str; 5] = ["r_center", "u", "w", "v", "z"];

pub(crate) fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    Ok(())
}

/// Writes one row per report under the [`EnergyReport::CSV_HEADER`] columns.
pub fn write_timeseries(path: &Path, reports: &[EnergyReport<f64>]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(EnergyReport::<f64>::CSV_HEADER)?;
    for r in reports {
        w.write_record(r.csv_row().iter().map(|x| x.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

fn parse_row<const N: usize>(record: &csv::StringRecord, path: &Path) -> Result<[f64; N]> {
    if record.len() != N {
        return Err(Error::Shape(format!(
            "{}: expected {N} columns, got {}",
            path.display(),
            record.len()
        )));
    }
    let mut row = [0.0; N];
    for (slot, field) in row.iter_mut().zip(record.iter()) {
        *slot = field
            .parse()
            .map_err(|e| Error::Shape(format!("{}: bad number `{field}`: {e}", path.display())))?;
    }
    Ok(row)
}

fn read_table<const N: usize>(path: &Path, header: [&str; N]) -> Result<Vec<[f64; N]>> {
    let mut r = csv::Reader::from_path(path)?;
    let found: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if found != header {
        return Err(Error::Shape(format!(
            "{}: unexpected header {found:?}",
            path.display()
        )));
    }
    r.records().map(|rec| parse_row(&rec?, path)).collect()
}

pub fn read_timeseries(path: &Path) -> Result<Vec<EnergyReport<f64>>> {
    Ok(read_table(path, EnergyReport::<f64>::CSV_HEADER)?
        .into_iter()
        .map(EnergyReport::from_csv_row)
        .collect())
}

/// Cell centres with both densities and both potentials.
pub fn write_snapshot(path: &Path, state: &SystemState<f64>) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(SNAPSHOT_HEADER)?;
    let columns = [
        state.u().grid().centers(),
        state.u().values(),
        state.w().values(),
        state.v().values(),
        state.z().values(),
    ];
    for i in 0..columns[0].len() {
        w.write_record(columns.iter().map(|c| c[i].to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_snapshot(path: &Path) -> Result<Vec<[f64; 5]>> {
    read_table(path, SNAPSHOT_HEADER)
}

/// Writes a header plus string rows.
pub fn write_table<const N: usize>(
    path: &Path,
    header: [&str; N],
    rows: &[[String; N]],
) -> Result<PathBuf> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(path.to_path_buf())
}
