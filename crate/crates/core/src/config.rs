//! Declarative experiment description and its JSON form.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::coincidence::CcmConfig;
use crate::detection::{to_picos, DetectorConfig};
use crate::error::{Error, Result};
use crate::interferometer::{OpticalState, PztConfig};
use crate::source::SourceConfig;

/// Environment variable that overrides the configured seed.
pub const SEED_ENV: &str = "PSTREAM_SEED";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OpticsConfig {
    pub intrinsic_visibility: f64,
    /// Walk-off envelope FWHM, m.
    pub effective_coherence_length: f64,
    pub laser_coherence_length: f64,
    /// Constant phase added to the PZT phase, rad.
    pub phase_offset: f64,
    pub pzt: PztConfig,
}

impl Default for OpticsConfig {
    fn default() -> Self {
        Self {
            intrinsic_visibility: 0.882,
            effective_coherence_length: 2e-6,
            laser_coherence_length: 0.30,
            phase_offset: 0.0,
            pzt: PztConfig::default(),
        }
    }
}

impl OpticsConfig {
    pub fn state_at(&self, x: f64, phase: f64) -> OpticalState {
        OpticalState {
            phase,
            intrinsic_visibility: self.intrinsic_visibility,
            scan_position: x,
            effective_coherence_length: self.effective_coherence_length,
            laser_coherence_length: self.laser_coherence_length,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScanConfig {
    pub n_points: usize,
    pub seconds_per_point: f64,
    pub seed: u64,
    pub asymmetric_walkoff: bool,
    /// Amplitude of the smooth voltage-ramp jitter, V. Zero disables it.
    pub jitter_amplitude: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            n_points: 316,
            seconds_per_point: 1.0,
            seed: 20201216,
            asymmetric_walkoff: false,
            jitter_amplitude: 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub source: SourceConfig,
    pub optics: OpticsConfig,
    /// D1 (path A) and D2 (path B).
    pub detectors: [DetectorConfig; 2],
    pub ccm: CcmConfig,
    pub scan: ScanConfig,
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.source.validate()?;
        self.optics.pzt.validate()?;
        self.optics.state_at(0.0, 0.0).validate()?;
        if !self.optics.phase_offset.is_finite() {
            return Err(Error::config("optics.phase_offset must be finite"));
        }
        for d in &self.detectors {
            d.validate()?;
        }
        let slot = to_picos(self.source.dead_time);
        if slot != self.detectors[0].dead_time_ps() {
            return Err(Error::config(
                "source.dead_time (slot width) must equal the D1 dead time",
            ));
        }
        let pulse = self.detectors[0]
            .pulse_duration
            .min(self.detectors[1].pulse_duration);
        self.ccm.validate(pulse)?;
        if self.scan.n_points < 2 {
            return Err(Error::config("scan.n_points must be >= 2"));
        }
        if !(self.scan.jitter_amplitude >= 0.0) {
            return Err(Error::config("scan.jitter_amplitude must be >= 0"));
        }
        self.steps_per_point()?;
        self.source.mean_photon()?;
        Ok(())
    }

    /// CCM steps simulated per scan point.
    pub fn steps_per_point(&self) -> Result<usize> {
        let ratio = self.scan.seconds_per_point / self.ccm.step;
        let n = ratio.round();
        if !(self.scan.seconds_per_point > 0.0) || n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::config(format!(
                "scan.seconds_per_point {} is not a whole number of {} s steps",
                self.scan.seconds_per_point, self.ccm.step
            )));
        }
        Ok(n as usize)
    }

    /// Dead-time slots in one CCM step.
    pub fn slots_per_step(&self) -> u64 {
        (to_picos(self.ccm.step) / to_picos(self.source.dead_time)) as u64
    }

    pub fn from_json_str(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::config(format!("{path}: {}", e.into_inner()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text)
    }

    pub fn to_json_pretty(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }
}

/// Seed precedence: explicit flag, then `PSTREAM_SEED`, then the config.
pub fn resolve_seed(config_seed: u64, env_value: Option<&str>, flag: Option<u64>) -> Result<u64> {
    if let Some(s) = flag {
        return Ok(s);
    }
    match env_value {
        Some(v) => v.trim().parse().map_err(|_| {
            Error::config(format!("{SEED_ENV}={v:?} is not a 64-bit unsigned integer"))
        }),
        None => Ok(config_seed),
    }
}
