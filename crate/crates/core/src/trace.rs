//! Two-channel oscilloscope traces: parsing, synthesis, and rising-edge
//! extraction.
//!
//! Two encodings are accepted:
//!
//! * CSV with header `time_s,ch1_V,ch2_V`, one row per sample.
//! * Packed binary: the 8-byte magic `PSTRACE1`, then little-endian `u32`
//!   sample count and `u32` channel count (always 2), then the samples as
//!   little-endian `f32`, all of channel 1 followed by all of channel 2.
//!   The sampling period is not stored; readers supply it.

use std::fs;
use std::path::Path;

use crate::detection::{PulseTrain, PS_PER_S};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"PSTRACE1";
pub const HEADER_LEN: usize = 16;
pub const DEFAULT_SAMPLING_PERIOD: f64 = 400e-12;
pub const DEFAULT_THRESHOLD: f64 = 2.0;
pub const CSV_HEADER: &str = "time_s,ch1_V,ch2_V";

#[derive(Debug, Clone, PartialEq)]
pub struct TraceFile {
    /// s
    pub sampling_period: f64,
    /// V
    pub threshold: f64,
    pub ch1: Vec<f32>,
    pub ch2: Vec<f32>,
}

impl TraceFile {
    pub fn validate(&self) -> Result<()> {
        if self.ch1.len() != self.ch2.len() {
            return Err(Error::contract(format!(
                "channel lengths differ: {} vs {}",
                self.ch1.len(),
                self.ch2.len()
            )));
        }
        if !(self.sampling_period > 0.0) {
            return Err(Error::contract("sampling period must be > 0"));
        }
        Ok(())
    }

    pub fn duration(&self) -> f64 {
        self.ch1.len() as f64 * self.sampling_period
    }
}

/// Rising-edge times (s) per channel.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TraceEvents {
    pub ch1: Vec<f64>,
    pub ch2: Vec<f64>,
}

fn parse_err(offset: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        offset: offset as u64,
        message: message.into(),
    }
}

pub fn parse_binary(bytes: &[u8], sampling_period: f64, threshold: f64) -> Result<TraceFile> {
    if bytes.len() < HEADER_LEN {
        return Err(parse_err(bytes.len(), "truncated header"));
    }
    if &bytes[..8] != MAGIC {
        return Err(parse_err(0, "bad magic, expected PSTRACE1"));
    }
    let word = |at: usize| u32::from_le_bytes(bytes[at..at + 4].try_into().expect("4 bytes"));
    let samples = word(8) as usize;
    let channels = word(12) as usize;
    if channels != 2 {
        return Err(parse_err(
            12,
            format!("expected 2 channels, header says {channels}"),
        ));
    }
    let expected = HEADER_LEN + samples * channels * 4;
    if bytes.len() != expected {
        return Err(parse_err(
            bytes.len().min(expected),
            format!(
                "payload holds {} bytes, header implies {}",
                bytes.len() - HEADER_LEN,
                expected - HEADER_LEN
            ),
        ));
    }
    let floats = |from: usize| -> Vec<f32> {
        bytes[from..from + samples * 4]
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().expect("4 bytes")))
            .collect()
    };
    let trace = TraceFile {
        sampling_period,
        threshold,
        ch1: floats(HEADER_LEN),
        ch2: floats(HEADER_LEN + samples * 4),
    };
    trace.validate()?;
    Ok(trace)
}

pub fn binary_bytes(trace: &TraceFile) -> Result<Vec<u8>> {
    trace.validate()?;
    let n = u32::try_from(trace.ch1.len())
        .map_err(|_| Error::contract("trace too long for a 32-bit sample count"))?;
    let mut out = Vec::with_capacity(HEADER_LEN + trace.ch1.len() * 8);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&n.to_le_bytes());
    out.extend_from_slice(&2u32.to_le_bytes());
    for v in trace.ch1.iter().chain(&trace.ch2) {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

/// Parses the CSV form. The sampling period is taken from the first two
/// time stamps, or `fallback_period` for single-sample traces.
pub fn parse_csv(bytes: &[u8], fallback_period: f64, threshold: f64) -> Result<TraceFile> {
    let text =
        std::str::from_utf8(bytes).map_err(|e| parse_err(e.valid_up_to(), "trace is not UTF-8"))?;
    let mut offset = 0usize;
    let mut lines = text.split_inclusive('\n');
    let header = lines.next().unwrap_or("");
    if header.trim_end() != CSV_HEADER {
        return Err(parse_err(0, format!("expected header {CSV_HEADER}")));
    }
    offset += header.len();

    let (mut times, mut ch1, mut ch2) = (Vec::new(), Vec::new(), Vec::new());
    for line in lines {
        let row = line.trim_end();
        if row.is_empty() {
            offset += line.len();
            continue;
        }
        let fields: Vec<&str> = row.split(',').collect();
        if fields.len() != 3 {
            return Err(parse_err(
                offset,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let num = |s: &str| -> Result<f64> {
            s.trim()
                .parse::<f64>()
                .map_err(|_| parse_err(offset, format!("not a number: {s:?}")))
        };
        times.push(num(fields[0])?);
        ch1.push(num(fields[1])? as f32);
        ch2.push(num(fields[2])? as f32);
        offset += line.len();
    }
    let sampling_period = if times.len() >= 2 {
        times[1] - times[0]
    } else {
        fallback_period
    };
    if !(sampling_period > 0.0) {
        return Err(parse_err(offset, "time column is not increasing"));
    }
    Ok(TraceFile {
        sampling_period,
        threshold,
        ch1,
        ch2,
    })
}

pub fn csv_bytes(trace: &TraceFile) -> Result<Vec<u8>> {
    use std::fmt::Write;
    trace.validate()?;
    let mut s = String::with_capacity(trace.ch1.len() * 24);
    s.push_str(CSV_HEADER);
    s.push('\n');
    for (i, (a, b)) in trace.ch1.iter().zip(&trace.ch2).enumerate() {
        writeln!(s, "{},{},{}", i as f64 * trace.sampling_period, a, b).expect("string write");
    }
    Ok(s.into_bytes())
}

/// Reads either encoding, sniffing the magic bytes.
pub fn read_trace(path: &Path, sampling_period: f64, threshold: f64) -> Result<TraceFile> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    if bytes.starts_with(MAGIC) {
        parse_binary(&bytes, sampling_period, threshold)
    } else {
        parse_csv(&bytes, sampling_period, threshold)
    }
}

fn rising_edges(samples: &[f32], threshold: f64, period: f64) -> Vec<f64> {
    let mut above = false;
    let mut out = Vec::new();
    for (i, &v) in samples.iter().enumerate() {
        let high = f64::from(v) > threshold;
        if high && !above {
            out.push(i as f64 * period);
        }
        above = high;
    }
    out
}

/// Events at the first sample of every above-threshold run.
pub fn ingest_trace(trace: &TraceFile) -> Result<TraceEvents> {
    trace.validate()?;
    Ok(TraceEvents {
        ch1: rising_edges(&trace.ch1, trace.threshold, trace.sampling_period),
        ch2: rising_edges(&trace.ch2, trace.threshold, trace.sampling_period),
    })
}

fn render(train: &PulseTrain, n: usize, period_ps: f64, amplitude: f32) -> Vec<f32> {
    let mut out = vec![0.0f32; n];
    for p in &train.pulses {
        let first = (p.start as f64 / period_ps).ceil().max(0.0) as usize;
        let last = ((p.end() as f64 / period_ps).ceil() as usize).min(n);
        for s in out.iter_mut().take(last).skip(first) {
            *s = amplitude;
        }
    }
    out
}

/// Samples two pulse trains as an oscilloscope would: a sample is at
/// `amplitude` when its instant falls inside a pulse, else zero.
pub fn synthesize_trace(
    ch1: &PulseTrain,
    ch2: &PulseTrain,
    sampling_period: f64,
    duration: f64,
    amplitude: f32,
) -> Result<TraceFile> {
    if !(sampling_period > 0.0 && duration > 0.0) {
        return Err(Error::domain("sampling period and duration must be > 0"));
    }
    let n = (duration / sampling_period).round() as usize;
    let period_ps = sampling_period * PS_PER_S;
    Ok(TraceFile {
        sampling_period,
        threshold: f64::from(amplitude) / 2.0,
        ch1: render(ch1, n, period_ps, amplitude),
        ch2: render(ch2, n, period_ps, amplitude),
    })
}

/// Start times of a pulse train in seconds.
pub fn train_times(train: &PulseTrain) -> Vec<f64> {
    train
        .pulses
        .iter()
        .map(|p| p.start as f64 / PS_PER_S)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::{shape_pulses, Channel, DetectorConfig, Picos};

    fn fixture_trains(n1: usize, n2: usize) -> (PulseTrain, PulseTrain) {
        let cfg = DetectorConfig::default();
        let bin = 1_000_000_000; // 1 ms in ps
        let starts = |n: usize, off: Picos| -> Vec<Picos> {
            (0..n as Picos).map(|i| off + i * 3_000_000).collect()
        };
        (
            shape_pulses(&starts(n1, 1_000), &cfg, Channel::A, bin).unwrap(),
            shape_pulses(&starts(n2, 7_777), &cfg, Channel::B, bin).unwrap(),
        )
    }

    #[test]
    fn recovers_separated_pulses() {
        let (a, b) = fixture_trains(270, 265);
        let trace = synthesize_trace(&a, &b, DEFAULT_SAMPLING_PERIOD, 1e-3, 4.0).unwrap();
        assert_eq!(trace.ch1.len(), 2_500_000);
        let ev = ingest_trace(&trace).unwrap();
        assert_eq!(ev.ch1.len(), 270);
        assert_eq!(ev.ch2.len(), 265);
        // Edges land within one sample after the pulse start.
        for (t, s) in ev.ch1.iter().zip(train_times(&a)) {
            assert!(*t >= s && *t - s < DEFAULT_SAMPLING_PERIOD);
        }
    }

    #[test]
    fn all_zero_trace_is_empty() {
        let trace = TraceFile {
            sampling_period: DEFAULT_SAMPLING_PERIOD,
            threshold: DEFAULT_THRESHOLD,
            ch1: vec![0.0; 1000],
            ch2: vec![0.0; 1000],
        };
        let ev = ingest_trace(&trace).unwrap();
        assert!(ev.ch1.is_empty() && ev.ch2.is_empty());
    }

    #[test]
    fn run_at_start_counts() {
        let trace = TraceFile {
            sampling_period: 1.0,
            threshold: 2.0,
            ch1: vec![4.0, 4.0, 0.0, 4.0],
            ch2: vec![0.0; 4],
        };
        assert_eq!(ingest_trace(&trace).unwrap().ch1, vec![0.0, 3.0]);
    }

    #[test]
    fn binary_round_trip_and_errors() {
        let (a, b) = fixture_trains(3, 2);
        let trace = synthesize_trace(&a, &b, DEFAULT_SAMPLING_PERIOD, 1e-5, 4.0).unwrap();
        let bytes = binary_bytes(&trace).unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        let back = parse_binary(&bytes, DEFAULT_SAMPLING_PERIOD, 2.0).unwrap();
        assert_eq!(back, trace);

        let truncated = &bytes[..bytes.len() - 3];
        match parse_binary(truncated, DEFAULT_SAMPLING_PERIOD, 2.0) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset as usize, truncated.len()),
            other => panic!("{other:?}"),
        }
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(matches!(
            parse_binary(&bad, 1.0, 2.0),
            Err(Error::Parse { offset: 0, .. })
        ));
        assert!(matches!(
            parse_binary(&bytes[..10], 1.0, 2.0),
            Err(Error::Parse { .. })
        ));
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let (a, b) = fixture_trains(2, 2);
        let trace = synthesize_trace(&a, &b, 1e-9, 1e-5, 4.0).unwrap();
        let bytes = csv_bytes(&trace).unwrap();
        let back = parse_csv(&bytes, 1.0, trace.threshold).unwrap();
        assert_eq!(back.ch1, trace.ch1);
        assert!((back.sampling_period - 1e-9).abs() < 1e-21);
        assert_eq!(ingest_trace(&back).unwrap(), ingest_trace(&trace).unwrap());

        let bad = b"time_s,ch1_V,ch2_V\n0,0,0\n1e-9,0\n";
        match parse_csv(bad, 1.0, 2.0) {
            Err(Error::Parse { offset, .. }) => assert_eq!(offset, 25),
            other => panic!("{other:?}"),
        }
        assert!(matches!(
            parse_csv(b"t,a,b\n", 1.0, 2.0),
            Err(Error::Parse { offset: 0, .. })
        ));
    }

    #[test]
    fn mismatched_channels_rejected() {
        let trace = TraceFile {
            sampling_period: 1.0,
            threshold: 2.0,
            ch1: vec![0.0; 3],
            ch2: vec![0.0; 4],
        };
        assert!(ingest_trace(&trace).is_err());
    }
}
