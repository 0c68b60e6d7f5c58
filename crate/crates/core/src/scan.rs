//! PZT scan orchestration.
//!
//! Every scan point draws from its own seed, `derive_seed(seed, index)`, and
//! every CCM step within a point from `derive_seed(point_seed, step)`. Points
//! are collected by index, so the result does not depend on how many workers
//! evaluate them.

use std::f64::consts::PI;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::analysis::FringeSeries;
use crate::coincidence::{accumulate, coincide, CountRecord};
use crate::config::ExperimentConfig;
use crate::detection::detect_bin;
use crate::error::{Error, Result};
use crate::interferometer::{pzt_phase, quantize_voltage, voltage_to_displacement};
use crate::seed::{self, derive_seed};
use crate::source::sample_batch;

/// One row of a scan.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScanPoint {
    #[serde(rename = "point")]
    pub point_index: usize,
    #[serde(rename = "voltage_V")]
    pub voltage: f64,
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "phase_rad")]
    pub phase: f64,
    #[serde(rename = "envelope")]
    pub envelope: f64,
    #[serde(rename = "N_A")]
    pub n_a: u64,
    #[serde(rename = "N_B")]
    pub n_b: u64,
    #[serde(rename = "N_c")]
    pub n_c: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanResult {
    /// Configuration with the seed actually used.
    pub config: ExperimentConfig,
    pub seed: u64,
    pub points: Vec<ScanPoint>,
}

impl ScanResult {
    /// Singles A, singles B and coincidences against scan position.
    pub fn series(&self) -> (FringeSeries, FringeSeries, FringeSeries) {
        series_from_points(&self.points)
    }

    pub fn envelopes(&self) -> Vec<f64> {
        self.points.iter().map(|p| p.envelope).collect()
    }
}

pub fn series_from_points(points: &[ScanPoint]) -> (FringeSeries, FringeSeries, FringeSeries) {
    let x: Vec<f64> = points.iter().map(|p| p.x).collect();
    let pick = |f: fn(&ScanPoint) -> u64| points.iter().map(|p| f(p) as f64).collect::<Vec<_>>();
    (
        FringeSeries::new("N_A", x.clone(), pick(|p| p.n_a)).expect("aligned"),
        FringeSeries::new("N_B", x.clone(), pick(|p| p.n_b)).expect("aligned"),
        FringeSeries::new("N_c", x, pick(|p| p.n_c)).expect("aligned"),
    )
}

/// Requested evaluation strategy for scan points.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Workers {
    Sequential,
    /// Thread pool of the given size; zero means one thread per core.
    Parallel(usize),
    /// Parallel when the `parallel` feature is enabled.
    #[default]
    Auto,
}

impl Workers {
    /// `--workers N` semantics: 1 is sequential, 0 is automatic.
    pub fn from_count(n: usize) -> Self {
        match n {
            0 => Workers::Auto,
            1 => Workers::Sequential,
            n => Workers::Parallel(n),
        }
    }
}

/// PZT voltages visited by the scan, already on the controller grid.
pub fn scan_voltages(cfg: &ExperimentConfig) -> Vec<f64> {
    let pzt = &cfg.optics.pzt;
    let n = cfg.scan.n_points;
    let span = pzt.voltage_max - pzt.voltage_min;
    let weights = jitter_weights(cfg);
    (0..n)
        .map(|i| {
            let u = i as f64 / (n - 1) as f64;
            let jitter: f64 = weights
                .iter()
                .enumerate()
                .map(|(h, w)| w * (PI * (h + 1) as f64 * u).sin())
                .sum();
            let v = pzt.voltage_min + span * u + jitter;
            quantize_voltage(v.clamp(pzt.voltage_min, pzt.voltage_max), pzt)
                .clamp(pzt.voltage_min, pzt.voltage_max)
        })
        .collect()
}

/// Smooth ramp irregularity: weights of the three lowest half-sine
/// harmonics, which vanish at both ends of the ramp.
fn jitter_weights(cfg: &ExperimentConfig) -> Vec<f64> {
    let amp = cfg.scan.jitter_amplitude;
    if amp == 0.0 {
        return Vec::new();
    }
    let mut rng = seed::rng_from(derive_seed(cfg.scan.seed, seed::stream::JITTER));
    (1..=3)
        .map(|h| amp * rng.random_range(-1.0..1.0) / f64::from(h))
        .collect()
}

/// Simulates one scan point at PZT voltage `voltage`.
pub fn simulate_point(
    cfg: &ExperimentConfig,
    index: usize,
    voltage: f64,
    point_seed: u64,
) -> Result<ScanPoint> {
    let x = voltage_to_displacement(voltage, &cfg.optics.pzt)?;
    let phase = pzt_phase(x, cfg.source.wavelength)? + cfg.optics.phase_offset;
    let optics = cfg.optics.state_at(x, phase);
    let walkoff = cfg.scan.asymmetric_walkoff;
    let envelope = optics.envelope(walkoff)?;
    let mean = cfg.source.mean_photon()?;
    let slots = cfg.slots_per_step();

    let steps = (0..cfg.steps_per_point()?)
        .map(|j| {
            let step_seed = derive_seed(point_seed, j as u64);
            let mut batch = sample_batch(mean, slots, step_seed)?;
            batch.bin_index = j as u64;
            let (a, b) = detect_bin(&batch, &optics, &cfg.detectors, walkoff, step_seed)?;
            let c = coincide(&a, &b, &cfg.ccm)?;
            Ok(CountRecord {
                bin_index: j as u64,
                n_a: a.len() as u64,
                n_b: b.len() as u64,
                n_c: c.count,
                partial: false,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let bins = accumulate(&steps, &cfg.ccm)?;
    let (n_a, n_b, n_c) = bins
        .iter()
        .fold((0, 0, 0), |(a, b, c), r| (a + r.n_a, b + r.n_b, c + r.n_c));
    Ok(ScanPoint {
        point_index: index,
        voltage,
        x,
        phase,
        envelope,
        n_a,
        n_b,
        n_c,
    })
}

fn point_task(cfg: &ExperimentConfig, seed: u64, i: usize, v: f64) -> Result<ScanPoint> {
    simulate_point(cfg, i, v, derive_seed(seed, i as u64)).map_err(|e| Error::ScanPoint {
        index: i,
        source: Box::new(e),
    })
}

pub fn run_scan(config: &ExperimentConfig) -> Result<ScanResult> {
    run_scan_with(config, Workers::Auto)
}

pub fn run_scan_with(config: &ExperimentConfig, workers: Workers) -> Result<ScanResult> {
    config.validate()?;
    let seed = config.scan.seed;
    let voltages = scan_voltages(config);
    let points = evaluate(&voltages, workers, |i, v| point_task(config, seed, i, v))?;
    Ok(ScanResult {
        config: config.clone(),
        seed,
        points,
    })
}

fn evaluate<F>(voltages: &[f64], workers: Workers, task: F) -> Result<Vec<ScanPoint>>
where
    F: Fn(usize, f64) -> Result<ScanPoint> + Sync,
{
    match workers {
        Workers::Sequential => sequential(voltages, &task),
        #[cfg(feature = "parallel")]
        Workers::Auto => parallel(voltages, &task, 0),
        #[cfg(feature = "parallel")]
        Workers::Parallel(n) => parallel(voltages, &task, n),
        #[cfg(not(feature = "parallel"))]
        Workers::Auto | Workers::Parallel(_) => sequential(voltages, &task),
    }
}

fn sequential<F>(voltages: &[f64], task: &F) -> Result<Vec<ScanPoint>>
where
    F: Fn(usize, f64) -> Result<ScanPoint>,
{
    voltages
        .iter()
        .enumerate()
        .map(|(i, &v)| task(i, v))
        .collect()
}

#[cfg(feature = "parallel")]
fn parallel<F>(voltages: &[f64], task: &F, threads: usize) -> Result<Vec<ScanPoint>>
where
    F: Fn(usize, f64) -> Result<ScanPoint> + Sync,
{
    use rayon::prelude::*;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build()
        .map_err(|e| Error::config(format!("cannot start worker pool: {e}")))?;
    // Indexed collect keeps scan order regardless of completion order.
    pool.install(|| {
        voltages
            .par_iter()
            .enumerate()
            .map(|(i, &v)| task(i, v))
            .collect()
    })
}
