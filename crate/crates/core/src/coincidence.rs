//! Coincidence counting module: an overlap AND gate between two pulse
//! trains plus step-to-bin accumulation of singles and coincidence counts.

use serde::{Deserialize, Serialize};

use crate::detection::{to_picos, Picos, Pulse, PulseTrain};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CcmConfig {
    /// Minimum overlap of two pulses that counts as a coincidence, s.
    pub overlap_threshold: f64,
    /// Delay added to channel B before matching, s.
    pub delay_tau: f64,
    pub accumulation_bin: f64,
    pub step: f64,
}

impl Default for CcmConfig {
    fn default() -> Self {
        Self {
            overlap_threshold: 5e-9,
            delay_tau: 0.0,
            accumulation_bin: 1.0,
            step: 0.1,
        }
    }
}

impl CcmConfig {
    pub fn validate(&self, pulse_duration: f64) -> Result<()> {
        if !(self.overlap_threshold > 0.0 && self.overlap_threshold <= pulse_duration) {
            return Err(Error::config(format!(
                "ccm.overlap_threshold must lie in (0, {pulse_duration}] s"
            )));
        }
        if !self.delay_tau.is_finite() {
            return Err(Error::config("ccm.delay_tau must be finite"));
        }
        if !(self.step > 0.0 && self.step <= self.accumulation_bin) {
            return Err(Error::config("ccm.step must lie in (0, accumulation_bin]"));
        }
        self.steps_per_bin()?;
        Ok(())
    }

    /// Number of steps that tile one accumulation bin.
    pub fn steps_per_bin(&self) -> Result<usize> {
        let ratio = self.accumulation_bin / self.step;
        let n = ratio.round();
        if n < 1.0 || (ratio - n).abs() > 1e-9 * ratio {
            return Err(Error::config(format!(
                "ccm.step {} s does not tile accumulation_bin {} s",
                self.step, self.accumulation_bin
            )));
        }
        Ok(n as usize)
    }
}

/// Singles and coincidences for one step or one accumulation bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct CountRecord {
    pub bin_index: u64,
    pub n_a: u64,
    pub n_b: u64,
    pub n_c: u64,
    /// Set when the stream ended before the bin filled.
    pub partial: bool,
}

impl CountRecord {
    pub fn validate(&self) -> Result<()> {
        if self.n_c > self.n_a.min(self.n_b) {
            return Err(Error::contract(format!(
                "bin {}: {} coincidences exceed singles ({}, {})",
                self.bin_index, self.n_c, self.n_a, self.n_b
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Coincidences {
    pub count: u64,
    /// Matched `(index in A, index in B)` pairs, in A order.
    pub pairs: Vec<(usize, usize)>,
}

fn overlap(a: &Pulse, b_start: Picos, b_end: Picos) -> Picos {
    a.end().min(b_end) - a.start.max(b_start)
}

/// Greedy one-to-one overlap matching on raw pulse lists sorted by start.
///
/// Each A pulse, in time order, takes the earliest unmatched B pulse (after
/// shifting B by `delay`) whose overlap is at least `threshold`.
pub fn match_overlaps(a: &[Pulse], b: &[Pulse], threshold: Picos, delay: Picos) -> Coincidences {
    let mut used = vec![false; b.len()];
    let mut pairs = Vec::new();
    let mut lo = 0usize;
    for (i, pa) in a.iter().enumerate() {
        // B pulses ending too early for this A cannot reach any later A either.
        while lo < b.len() && (used[lo] || b[lo].end() + delay - pa.start < threshold) {
            lo += 1;
        }
        let latest_start = pa.end() - threshold;
        let mut j = lo;
        while j < b.len() && b[j].start + delay <= latest_start {
            if !used[j] && overlap(pa, b[j].start + delay, b[j].end() + delay) >= threshold {
                used[j] = true;
                pairs.push((i, j));
                break;
            }
            j += 1;
        }
    }
    Coincidences {
        count: pairs.len() as u64,
        pairs,
    }
}

pub fn coincide(a: &PulseTrain, b: &PulseTrain, cfg: &CcmConfig) -> Result<Coincidences> {
    a.validate()?;
    b.validate()?;
    let threshold = to_picos(cfg.overlap_threshold);
    if threshold <= 0 {
        return Err(Error::config(
            "overlap threshold rounds to zero picoseconds",
        ));
    }
    Ok(match_overlaps(
        &a.pulses,
        &b.pulses,
        threshold,
        to_picos(cfg.delay_tau),
    ))
}

/// Sums per-step records into accumulation bins of `steps_per_bin` steps.
/// A trailing incomplete bin is emitted with `partial` set.
pub fn accumulate(steps: &[CountRecord], cfg: &CcmConfig) -> Result<Vec<CountRecord>> {
    let per_bin = cfg.steps_per_bin()?;
    steps
        .chunks(per_bin)
        .enumerate()
        .map(|(i, chunk)| {
            let bin = chunk.iter().fold(
                CountRecord {
                    bin_index: i as u64,
                    partial: chunk.len() < per_bin,
                    ..CountRecord::default()
                },
                |acc, r| CountRecord {
                    n_a: acc.n_a + r.n_a,
                    n_b: acc.n_b + r.n_b,
                    n_c: acc.n_c + r.n_c,
                    ..acc
                },
            );
            bin.validate()?;
            Ok(bin)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::detection::Channel;

    const NS: Picos = 1000;

    fn train(channel: Channel, starts: &[Picos]) -> PulseTrain {
        PulseTrain {
            channel,
            pulses: starts
                .iter()
                .map(|&start| Pulse {
                    start,
                    duration: 10 * NS,
                })
                .collect(),
            bin_length: 1_000_000 * NS,
            dead_time: 22 * NS,
        }
    }

    #[test]
    fn overlap_examples() {
        let cfg = CcmConfig::default();
        let a = train(Channel::A, &[0]);
        let r = coincide(&a, &train(Channel::B, &[4 * NS]), &cfg).unwrap();
        assert_eq!(r.count, 1);
        assert_eq!(r.pairs, vec![(0, 0)]);
        let r = coincide(&a, &train(Channel::B, &[6 * NS]), &cfg).unwrap();
        assert_eq!(r.count, 0);
        assert_eq!(
            coincide(&a, &train(Channel::B, &[]), &cfg).unwrap().count,
            0
        );
        // Exactly half overlapping counts.
        assert_eq!(
            coincide(&a, &train(Channel::B, &[5 * NS]), &cfg)
                .unwrap()
                .count,
            1
        );
    }

    #[test]
    fn delay_shifts_channel_b() {
        let a = train(Channel::A, &[100 * NS]);
        let b = train(Channel::B, &[70 * NS]);
        let mut cfg = CcmConfig::default();
        assert_eq!(coincide(&a, &b, &cfg).unwrap().count, 0);
        cfg.delay_tau = 30e-9;
        assert_eq!(coincide(&a, &b, &cfg).unwrap().count, 1);
    }

    #[test]
    fn invalid_train_rejected() {
        let bad = train(Channel::A, &[0, 5 * NS]);
        let ok = train(Channel::B, &[0]);
        assert!(matches!(
            coincide(&bad, &ok, &CcmConfig::default()),
            Err(Error::Contract(_))
        ));
    }

    #[test]
    fn accumulate_examples() {
        let cfg = CcmConfig::default();
        let zeros = vec![CountRecord::default(); 10];
        let bins = accumulate(&zeros, &cfg).unwrap();
        assert_eq!(bins.len(), 1);
        assert_eq!((bins[0].n_a, bins[0].n_b, bins[0].n_c), (0, 0, 0));
        assert!(!bins[0].partial);

        let step = CountRecord {
            n_a: 27_000,
            n_b: 27_000,
            n_c: 82,
            ..CountRecord::default()
        };
        let bins = accumulate(&[step; 10], &cfg).unwrap();
        assert_eq!(
            (bins[0].n_a, bins[0].n_b, bins[0].n_c),
            (270_000, 270_000, 820)
        );

        let bins = accumulate(&[step; 3], &cfg).unwrap();
        assert_eq!(bins.len(), 1);
        assert!(bins[0].partial);
        assert_eq!(bins[0].n_c, 246);

        let bins = accumulate(&[step; 23], &cfg).unwrap();
        assert_eq!(bins.len(), 3);
        assert_eq!(bins.iter().filter(|b| b.partial).count(), 1);
        assert_eq!(bins[2].bin_index, 2);
    }

    #[test]
    fn step_must_tile_bin() {
        let cfg = CcmConfig {
            step: 0.3,
            ..CcmConfig::default()
        };
        assert!(matches!(accumulate(&[], &cfg), Err(Error::Config(_))));
        assert!(CcmConfig::default().validate(10e-9).is_ok());
        let cfg = CcmConfig {
            overlap_threshold: 11e-9,
            ..CcmConfig::default()
        };
        assert!(cfg.validate(10e-9).is_err());
    }
}
