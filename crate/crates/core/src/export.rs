//! CSV output for scans and reports.

use std::fs;
use std::path::Path;

use crate::analysis::CorrelationReport;
use crate::error::{Error, Result};
use crate::scan::{ScanPoint, ScanResult};

pub const SCAN_HEADER: [&str; 8] = [
    "point",
    "voltage_V",
    "x_m",
    "phase_rad",
    "envelope",
    "N_A",
    "N_B",
    "N_c",
];

fn csv_err(e: csv::Error) -> Error {
    let offset = e.position().map(|p| p.byte()).unwrap_or(0);
    Error::Parse {
        offset,
        message: e.to_string(),
    }
}

/// Scan rows as CSV bytes, header first.
pub fn scan_csv_bytes(points: &[ScanPoint]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new()
        .has_headers(false)
        .from_writer(Vec::new());
    w.write_record(SCAN_HEADER).map_err(csv_err)?;
    for p in points {
        w.serialize(p).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))
}

pub fn write_scan_csv(result: &ScanResult, path: &Path) -> Result<()> {
    let bytes = scan_csv_bytes(&result.points)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn parse_scan_csv(bytes: &[u8]) -> Result<Vec<ScanPoint>> {
    let mut r = csv::ReaderBuilder::new().from_reader(bytes);
    let header = r.headers().map_err(csv_err)?.clone();
    if header.iter().ne(SCAN_HEADER) {
        return Err(Error::Parse {
            offset: 0,
            message: format!(
                "unexpected header {:?}, want {}",
                header.iter().collect::<Vec<_>>(),
                SCAN_HEADER.join(",")
            ),
        });
    }
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

pub fn read_scan_csv(path: &Path) -> Result<Vec<ScanPoint>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_scan_csv(&bytes)
}

/// Flat `key,value` report.
pub fn report_csv_bytes(report: &CorrelationReport) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["key", "value"]).map_err(csv_err)?;
    for (k, v) in report.rows() {
        w.write_record([k, v.as_str()]).map_err(csv_err)?;
    }
    w.into_inner()
        .map_err(|e| Error::io("<memory>", e.into_error()))
}

pub fn write_report_csv(report: &CorrelationReport, path: &Path) -> Result<()> {
    let bytes = report_csv_bytes(report)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
