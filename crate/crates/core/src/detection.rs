//! Single-photon counting module model.
//!
//! Photons from a [`PhotonBatch`] are placed on distinct dead-time slots,
//! routed to D1 or D2, merged with dark counts, quantized to the detector's
//! timing grid, passed through a non-paralyzable dead-time filter, and turned
//! into fixed-width electrical pulses. All times are integer picoseconds.

use rand::Rng;
use rand_distr::{Distribution, Exp};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::interferometer::{port_probability, OpticalState};
use crate::seed::{self, SimRng};
use crate::source::PhotonBatch;

/// Integer picoseconds.
pub type Picos = i64;

pub const PS_PER_S: f64 = 1e12;

/// Rounds seconds to the nearest picosecond.
pub fn to_picos(seconds: f64) -> Picos {
    (seconds * PS_PER_S).round() as Picos
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectorConfig {
    pub dead_time: f64,
    /// counts/s
    pub dark_rate: f64,
    pub pulse_duration: f64,
    /// V; metadata only.
    pub pulse_amplitude: f64,
    pub resolving_time: f64,
    pub efficiency: f64,
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            dead_time: 22e-9,
            dark_rate: 27.0,
            pulse_duration: 10e-9,
            pulse_amplitude: 4.0,
            resolving_time: 350e-12,
            efficiency: 1.0,
        }
    }
}

impl DetectorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dead_time > 0.0 && self.pulse_duration > 0.0 && self.resolving_time > 0.0) {
            return Err(Error::config("detector durations must be > 0"));
        }
        if to_picos(self.resolving_time) < 1 {
            return Err(Error::config("detector resolving_time below 1 ps"));
        }
        if !(self.dark_rate >= 0.0) {
            return Err(Error::config("detector dark_rate must be >= 0"));
        }
        if !(0.0..=1.0).contains(&self.efficiency) {
            return Err(Error::config("detector efficiency must lie in [0, 1]"));
        }
        if !self.pulse_amplitude.is_finite() {
            return Err(Error::config("detector pulse_amplitude must be finite"));
        }
        Ok(())
    }

    pub fn dead_time_ps(&self) -> Picos {
        to_picos(self.dead_time)
    }

    pub fn pulse_duration_ps(&self) -> Picos {
        to_picos(self.pulse_duration)
    }

    pub fn resolving_time_ps(&self) -> Picos {
        to_picos(self.resolving_time)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Channel {
    /// Path A, detector D1.
    A,
    /// Path B, detector D2.
    B,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Pulse {
    pub start: Picos,
    pub duration: Picos,
}

impl Pulse {
    pub fn end(&self) -> Picos {
        self.start + self.duration
    }
}

/// Electrical output of one detector over one bin.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PulseTrain {
    pub channel: Channel,
    pub pulses: Vec<Pulse>,
    pub bin_length: Picos,
    /// Minimum spacing of pulse starts.
    pub dead_time: Picos,
}

impl PulseTrain {
    pub fn empty(channel: Channel, bin_length: Picos, dead_time: Picos) -> Self {
        Self {
            channel,
            pulses: Vec::new(),
            bin_length,
            dead_time,
        }
    }

    pub fn len(&self) -> usize {
        self.pulses.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pulses.is_empty()
    }

    pub fn validate(&self) -> Result<()> {
        let mut prev: Option<&Pulse> = None;
        for (i, p) in self.pulses.iter().enumerate() {
            if p.start < 0 || p.start >= self.bin_length {
                return Err(Error::contract(format!(
                    "{:?} pulse {i} starts at {} ps outside [0, {})",
                    self.channel, p.start, self.bin_length
                )));
            }
            if p.duration <= 0 {
                return Err(Error::contract(format!(
                    "{:?} pulse {i} has no width",
                    self.channel
                )));
            }
            if let Some(q) = prev {
                if p.start - q.start < self.dead_time.max(1) {
                    return Err(Error::contract(format!(
                        "{:?} pulses {} and {i} are {} ps apart, dead time is {} ps",
                        self.channel,
                        i - 1,
                        p.start - q.start,
                        self.dead_time
                    )));
                }
                if p.start < q.end() {
                    return Err(Error::contract(format!(
                        "{:?} pulses {} and {i} overlap",
                        self.channel,
                        i - 1
                    )));
                }
            }
            prev = Some(p);
        }
        Ok(())
    }
}

/// Homogeneous Poisson arrivals over `[0, duration)`, in picoseconds.
pub fn generate_dark_events(rate: f64, duration: f64, seed: u64) -> Result<Vec<Picos>> {
    if !(rate >= 0.0) {
        return Err(Error::domain(format!("dark rate must be >= 0, got {rate}")));
    }
    if !(duration > 0.0) {
        return Err(Error::domain(format!(
            "duration must be > 0, got {duration}"
        )));
    }
    let mut rng = seed::rng_from(seed);
    Ok(dark_events_with(rate, duration, &mut rng))
}

fn dark_events_with(rate: f64, duration: f64, rng: &mut SimRng) -> Vec<Picos> {
    if rate == 0.0 {
        return Vec::new();
    }
    let gaps = Exp::new(rate).expect("rate checked positive");
    let end = to_picos(duration);
    let mut events = Vec::with_capacity((rate * duration * 1.2) as usize + 4);
    let mut t = 0.0f64;
    loop {
        t += gaps.sample(rng);
        let ps = to_picos(t);
        if ps >= end {
            break;
        }
        events.push(ps);
    }
    events
}

/// Non-paralyzable dead time: an event survives iff it comes at least `t_d`
/// after the previous survivor.
pub fn dead_time_filter(events: &[Picos], t_d: Picos) -> Result<Vec<Picos>> {
    if let Some(i) = events.windows(2).position(|w| w[1] < w[0]) {
        return Err(Error::contract(format!(
            "events not sorted at index {}: {} > {}",
            i + 1,
            events[i],
            events[i + 1]
        )));
    }
    Ok(filter_sorted(events, t_d))
}

fn filter_sorted(events: &[Picos], t_d: Picos) -> Vec<Picos> {
    let mut kept = Vec::with_capacity(events.len());
    let mut last: Option<Picos> = None;
    for &t in events {
        if last.is_none_or(|l| t - l >= t_d) {
            kept.push(t);
            last = Some(t);
        }
    }
    kept
}

/// One fixed-width pulse per (already dead-time filtered) event.
pub fn shape_pulses(
    events: &[Picos],
    cfg: &DetectorConfig,
    channel: Channel,
    bin_length: Picos,
) -> Result<PulseTrain> {
    let duration = cfg.pulse_duration_ps();
    let train = PulseTrain {
        channel,
        pulses: events
            .iter()
            .map(|&start| Pulse { start, duration })
            .collect(),
        bin_length,
        dead_time: cfg.dead_time_ps(),
    };
    train.validate()?;
    Ok(train)
}

/// Simple bitset over slot indices.
struct SlotSet {
    words: Vec<u64>,
}

impl SlotSet {
    fn new(n: u64) -> Self {
        Self {
            words: vec![0; n.div_ceil(64) as usize],
        }
    }

    /// Sets the bit, returning false if it was already set.
    fn insert(&mut self, i: u64) -> bool {
        let (w, b) = ((i / 64) as usize, i % 64);
        let mask = 1u64 << b;
        let fresh = self.words[w] & mask == 0;
        self.words[w] |= mask;
        fresh
    }

    fn contains(&self, i: u64) -> bool {
        self.words[(i / 64) as usize] & (1u64 << (i % 64)) != 0
    }

    fn iter(&self) -> impl Iterator<Item = u64> + '_ {
        self.words.iter().enumerate().flat_map(|(w, &word)| {
            let mut bits = word;
            std::iter::from_fn(move || {
                if bits == 0 {
                    return None;
                }
                let b = bits.trailing_zeros() as u64;
                bits &= bits - 1;
                Some(w as u64 * 64 + b)
            })
        })
    }
}

/// Chooses `count` distinct slots uniformly; returns (occupied, multi-photon) sets.
fn place_slots(batch: &PhotonBatch, rng: &mut SimRng) -> (SlotSet, SlotSet) {
    let n = batch.slots_per_bin;
    let mut occupied = SlotSet::new(n);
    let mut multi = SlotSet::new(n);
    let draw = |rng: &mut SimRng, occupied: &mut SlotSet| loop {
        let s = rng.random_range(0..n);
        if occupied.insert(s) {
            return s;
        }
    };
    for _ in 0..batch.n_single_slots {
        draw(rng, &mut occupied);
    }
    for _ in 0..batch.n_pair_slots + batch.n_higher_slots {
        let s = draw(rng, &mut occupied);
        multi.insert(s);
    }
    (occupied, multi)
}

fn merge_sorted(a: &[Picos], b: &[Picos]) -> Vec<Picos> {
    let mut out = Vec::with_capacity(a.len() + b.len());
    let (mut i, mut j) = (0, 0);
    while i < a.len() && j < b.len() {
        if a[i] <= b[j] {
            out.push(a[i]);
            i += 1;
        } else {
            out.push(b[j]);
            j += 1;
        }
    }
    out.extend_from_slice(&a[i..]);
    out.extend_from_slice(&b[j..]);
    out
}

fn quantize(t: Picos, grid: Picos) -> Picos {
    // Round half up; times are non-negative.
    ((t + grid / 2) / grid) * grid
}

/// Simulates both detectors over one bin.
///
/// `walkoff` chooses which coherence length sets the envelope (see
/// [`OpticalState::envelope`]). Slot width is the D1 dead time.
pub fn detect_bin(
    batch: &PhotonBatch,
    optics: &OpticalState,
    detectors: &[DetectorConfig; 2],
    walkoff: bool,
    seed: u64,
) -> Result<(PulseTrain, PulseTrain)> {
    batch.validate()?;
    optics.validate()?;
    for d in detectors {
        d.validate()?;
    }
    let g = optics.envelope(walkoff)?;
    let p_d1 = port_probability(optics.phase, g, optics.intrinsic_visibility)?;
    detect_with_probability(batch, p_d1, detectors, seed)
}

/// [`detect_bin`] with the D1 routing probability given directly.
pub fn detect_with_probability(
    batch: &PhotonBatch,
    p_d1: f64,
    detectors: &[DetectorConfig; 2],
    seed: u64,
) -> Result<(PulseTrain, PulseTrain)> {
    let slot = detectors[0].dead_time_ps();
    let bin_length = batch.slots_per_bin as Picos * slot;
    let mut rng = seed::rng_from(seed::derive_seed(seed, seed::stream::DETECT));

    let (occupied, multi) = place_slots(batch, &mut rng);
    let mut photons: [Vec<Picos>; 2] = [Vec::new(), Vec::new()];
    let expected = batch.occupied_slots() as usize;
    photons[0].reserve(expected);
    photons[1].reserve(expected);

    // Slots are visited in time order, so both per-channel lists come out sorted.
    for s in occupied.iter() {
        let t = s as Picos * slot;
        let n_photons = if multi.contains(s) { 2 } else { 1 };
        for _ in 0..n_photons {
            let ch = usize::from(!rng.random_bool(p_d1));
            if rng.random_bool(detectors[ch].efficiency) {
                photons[ch].push(t);
            }
        }
    }

    let bin_seconds = bin_length as f64 / PS_PER_S;
    let channels = [Channel::A, Channel::B];
    let dark_streams = [seed::stream::DARK_A, seed::stream::DARK_B];
    let mut trains = Vec::with_capacity(2);
    for ch in 0..2 {
        let cfg = &detectors[ch];
        let mut dark_rng = seed::rng_from(seed::derive_seed(seed, dark_streams[ch]));
        let dark = if bin_length > 0 {
            dark_events_with(cfg.dark_rate, bin_seconds, &mut dark_rng)
        } else {
            Vec::new()
        };
        let grid = cfg.resolving_time_ps();
        let mut events = merge_sorted(&photons[ch], &dark);
        for t in events.iter_mut() {
            *t = quantize(*t, grid);
        }
        events.retain(|&t| t < bin_length);
        let kept = filter_sorted(&events, cfg.dead_time_ps());
        trains.push(shape_pulses(&kept, cfg, channels[ch], bin_length)?);
    }
    let b = trains.pop().expect("two trains");
    let a = trains.pop().expect("two trains");
    Ok((a, b))
}
