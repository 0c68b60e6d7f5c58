//! Attenuated coherent source: neutral-density attenuation, photon flux, and
//! Poisson occupancy of detector dead-time slots.
//!
//! Time is divided into slots one dead time wide. The number of photons in a
//! slot is Poisson with mean `⟨n⟩`; a batch records how many slots in one
//! accumulation bin held one, two, or three-or-more photons.

use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;

/// Planck constant times the speed of light, J·m.
pub const HC: f64 = 1.98645e-25;

/// He-Ne wavelength, m.
pub const HENE_WAVELENGTH: f64 = 632.8e-9;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SourceConfig {
    /// Laser output before the filters, W.
    pub input_power: f64,
    /// m.
    pub wavelength: f64,
    /// Summed optical density of the filter stack.
    pub od_total: f64,
    /// Slot width, s. Equal to the detector dead time.
    pub dead_time: f64,
    /// Sets `⟨n⟩` directly, bypassing the power chain.
    pub mean_photon_override: Option<f64>,
}

impl Default for SourceConfig {
    fn default() -> Self {
        Self {
            input_power: 136e-6,
            wavelength: HENE_WAVELENGTH,
            od_total: 8.9,
            dead_time: 22e-9,
            mean_photon_override: Some(0.012),
        }
    }
}

impl SourceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.input_power >= 0.0) {
            return Err(Error::config("source.input_power must be >= 0"));
        }
        if !(self.od_total >= 0.0) {
            return Err(Error::config("source.od_total must be >= 0"));
        }
        if !(self.wavelength > 0.0) {
            return Err(Error::config("source.wavelength must be > 0"));
        }
        if !(self.dead_time > 0.0) {
            return Err(Error::config("source.dead_time must be > 0"));
        }
        if let Some(m) = self.mean_photon_override {
            if !(0.0..1.0).contains(&m) {
                return Err(Error::config(format!(
                    "source.mean_photon_override must lie in [0, 1), got {m}"
                )));
            }
        }
        Ok(())
    }

    /// Mean photons per slot, from the override or from power, OD and wavelength.
    pub fn mean_photon(&self) -> Result<f64> {
        self.validate()?;
        if let Some(m) = self.mean_photon_override {
            return Ok(m);
        }
        let p = attenuated_power(self.input_power, self.od_total)?;
        let m = photon_flux(p, self.wavelength)? * self.dead_time;
        if m >= 1.0 {
            return Err(Error::config(format!(
                "attenuation too weak: <n> = {m:.4} per slot is outside the sparse-photon regime"
            )));
        }
        Ok(m)
    }
}

/// Occupancy counts of the slots in one accumulation bin.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct PhotonBatch {
    pub bin_index: u64,
    pub n_single_slots: u64,
    pub n_pair_slots: u64,
    pub n_higher_slots: u64,
    pub slots_per_bin: u64,
}

impl PhotonBatch {
    pub fn occupied_slots(&self) -> u64 {
        self.n_single_slots + self.n_pair_slots + self.n_higher_slots
    }

    pub fn validate(&self) -> Result<()> {
        if self.slots_per_bin == 0 {
            return Err(Error::contract("batch has zero slots"));
        }
        if self.occupied_slots() > self.slots_per_bin {
            return Err(Error::contract(format!(
                "batch occupies {} of {} slots",
                self.occupied_slots(),
                self.slots_per_bin
            )));
        }
        Ok(())
    }
}

pub fn attenuated_power(p_in: f64, od: f64) -> Result<f64> {
    if !(p_in >= 0.0) || !(od >= 0.0) {
        return Err(Error::domain(format!(
            "attenuation needs p_in >= 0 and od >= 0, got ({p_in}, {od})"
        )));
    }
    Ok(p_in * 10f64.powf(-od))
}

/// Photons per second carried by optical power `p` at `wavelength`.
pub fn photon_flux(p: f64, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::domain(format!(
            "wavelength must be > 0, got {wavelength}"
        )));
    }
    if !(p >= 0.0) {
        return Err(Error::domain(format!("power must be >= 0, got {p}")));
    }
    Ok(p * wavelength / HC)
}

/// `⟨n⟩` estimated as counts per dead-time slot.
pub fn mean_photon_number(single_count: f64, accumulation: f64, dead_time: f64) -> Result<f64> {
    if !(accumulation > 0.0) {
        return Err(Error::domain("accumulation time must be > 0"));
    }
    if !(dead_time > 0.0) || dead_time > accumulation {
        return Err(Error::domain(format!(
            "dead time must lie in (0, accumulation], got {dead_time}"
        )));
    }
    if !(single_count >= 0.0) {
        return Err(Error::domain("single count must be >= 0"));
    }
    Ok(single_count / (accumulation / dead_time))
}

pub fn poisson_pmf(n: u32, mean: f64) -> Result<f64> {
    if !(mean >= 0.0) || !mean.is_finite() {
        return Err(Error::domain(format!(
            "Poisson mean must be >= 0, got {mean}"
        )));
    }
    if mean == 0.0 {
        return Ok(if n == 0 { 1.0 } else { 0.0 });
    }
    // Log-space keeps the factorial from overflowing at large n.
    let ln_fact: f64 = (2..=n).map(|k| (k as f64).ln()).sum();
    Ok((n as f64 * mean.ln() - mean - ln_fact).exp())
}

/// P(N >= from). Summed directly; `1 - head` cancels badly for small tails.
pub fn poisson_tail(from: u32, mean: f64) -> Result<f64> {
    let mut tail = 0.0;
    let mut n = from;
    loop {
        let p = poisson_pmf(n, mean)?;
        tail += p;
        if f64::from(n) > mean && p <= tail * 1e-17 {
            return Ok(tail);
        }
        n += 1;
    }
}

/// P(2)/P(1), which reduces to `mean / 2`.
pub fn pair_fraction(mean: f64) -> Result<f64> {
    if !(mean >= 0.0) {
        return Err(Error::domain(format!("mean must be >= 0, got {mean}")));
    }
    Ok(mean / 2.0)
}

/// Draws the occupancy classes of one accumulation bin.
///
/// Each class count is Poisson with mean `slots_per_bin · P(k)`.
pub fn sample_batch(mean: f64, slots_per_bin: u64, seed: u64) -> Result<PhotonBatch> {
    if !(mean >= 0.0) {
        return Err(Error::domain(format!("mean must be >= 0, got {mean}")));
    }
    if mean >= 1.0 {
        return Err(Error::config(format!(
            "<n> = {mean} per slot is outside the sparse-photon regime (must be < 1)"
        )));
    }
    if slots_per_bin == 0 {
        return Err(Error::config("slots_per_bin must be >= 1"));
    }
    let mut batch = PhotonBatch {
        slots_per_bin,
        ..PhotonBatch::default()
    };
    if mean == 0.0 {
        return Ok(batch);
    }

    let slots = slots_per_bin as f64;
    let expectations = [
        slots * poisson_pmf(1, mean)?,
        slots * poisson_pmf(2, mean)?,
        slots * poisson_tail(3, mean)?,
    ];
    let mut rng = seed::rng_from(seed::derive_seed(seed, seed::stream::SOURCE));
    let mut draws = [0u64; 3];
    for (draw, &lambda) in draws.iter_mut().zip(&expectations) {
        if lambda > 0.0 {
            let dist = Poisson::new(lambda).map_err(|e| Error::domain(e.to_string()))?;
            *draw = dist.sample(&mut rng) as u64;
        }
    }
    batch.n_single_slots = draws[0];
    batch.n_pair_slots = draws[1];
    batch.n_higher_slots = draws[2];

    // Independent class draws can in principle overfill the bin; trim the
    // rarest classes first.
    let mut excess = batch.occupied_slots().saturating_sub(slots_per_bin);
    for count in [
        &mut batch.n_higher_slots,
        &mut batch.n_pair_slots,
        &mut batch.n_single_slots,
    ] {
        let cut = excess.min(*count);
        *count -= cut;
        excess -= cut;
    }
    Ok(batch)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn attenuation_examples() {
        assert_relative_eq!(
            attenuated_power(136e-6, 8.74).unwrap(),
            2.4748e-13,
            max_relative = 1e-4
        );
        assert_relative_eq!(
            attenuated_power(136e-6, 14.9).unwrap(),
            1.7121e-19,
            max_relative = 1e-4
        );
        assert_eq!(attenuated_power(3.5, 0.0).unwrap(), 3.5);
        assert!(matches!(attenuated_power(-1.0, 1.0), Err(Error::Domain(_))));
        assert!(matches!(attenuated_power(1.0, -1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn flux_examples() {
        assert_relative_eq!(
            photon_flux(0.29e-12, 632.8e-9).unwrap(),
            9.2382e5,
            max_relative = 1e-4
        );
        assert_eq!(photon_flux(0.0, 632.8e-9).unwrap(), 0.0);
        assert_relative_eq!(
            photon_flux(3.139e-19, 632.8e-9).unwrap(),
            1.0,
            max_relative = 1e-4
        );
        assert!(photon_flux(1.0, 0.0).is_err());
    }

    #[test]
    fn mean_photon_examples() {
        assert_relative_eq!(
            mean_photon_number(5.4e5, 1.0, 22e-9).unwrap(),
            0.01188,
            max_relative = 1e-9
        );
        assert_relative_eq!(
            mean_photon_number(539.0, 1e-3, 22e-9).unwrap(),
            0.011858,
            max_relative = 1e-9
        );
        assert_eq!(mean_photon_number(0.0, 1.0, 22e-9).unwrap(), 0.0);
        assert!(mean_photon_number(1.0, 0.0, 22e-9).is_err());
    }

    #[test]
    fn pmf_examples() {
        // Series oracle: e^-m = sum_k (-m)^k / k!
        let m: f64 = 0.012;
        let exp_neg: f64 = (0..30)
            .map(|k| (-m).powi(k) / (1..=k).map(f64::from).product::<f64>())
            .sum();
        assert_relative_eq!(poisson_pmf(0, m).unwrap(), exp_neg, max_relative = 1e-14);
        assert_relative_eq!(
            poisson_pmf(1, m).unwrap(),
            m * exp_neg,
            max_relative = 1e-14
        );
        assert_relative_eq!(poisson_pmf(0, m).unwrap(), 0.98807, max_relative = 1e-5);
        assert_relative_eq!(poisson_pmf(1, m).unwrap(), 0.011857, max_relative = 1e-4);
        assert_eq!(poisson_pmf(0, 0.0).unwrap(), 1.0);
        assert_eq!(poisson_pmf(3, 0.0).unwrap(), 0.0);
        assert!(poisson_pmf(1, -0.1).is_err());
    }

    #[test]
    fn pair_fraction_examples() {
        assert_eq!(pair_fraction(0.012).unwrap(), 0.006);
        assert_eq!(pair_fraction(0.0).unwrap(), 0.0);
        assert_eq!(pair_fraction(0.010).unwrap(), 0.005);
    }

    #[test]
    fn zero_mean_batch_is_empty() {
        let b = sample_batch(0.0, 1000, 42).unwrap();
        assert_eq!(b.occupied_slots(), 0);
        assert_eq!(b.slots_per_bin, 1000);
    }

    #[test]
    fn batch_regime_errors() {
        assert!(matches!(sample_batch(1.0, 10, 0), Err(Error::Config(_))));
        assert!(matches!(sample_batch(0.1, 0, 0), Err(Error::Config(_))));
    }

    #[test]
    fn batch_is_deterministic() {
        let a = sample_batch(0.012, 45_454_545, 9).unwrap();
        let b = sample_batch(0.012, 45_454_545, 9).unwrap();
        assert_eq!(a, b);
        assert_ne!(a, sample_batch(0.012, 45_454_545, 10).unwrap());
    }

    #[test]
    fn full_second_batch_near_expectation() {
        let slots = 45_454_545u64;
        let b = sample_batch(0.012, slots, 3).unwrap();
        let e1 = slots as f64 * poisson_pmf(1, 0.012).unwrap();
        let e2 = slots as f64 * poisson_pmf(2, 0.012).unwrap();
        assert!((b.n_single_slots as f64 - e1).abs() < 5.0 * e1.sqrt());
        assert!((b.n_pair_slots as f64 - e2).abs() < 5.0 * e2.sqrt());
        assert!((e1 - 5.39e5).abs() < 1e3);
        assert!((e2 - 3.23e3).abs() < 10.0);
    }

    #[test]
    fn ensemble_means_match_expectation() {
        let slots = 4_545_454u64;
        let seeds = 1000u64;
        let m = 0.012;
        let (mut s1, mut s2) = (0.0, 0.0);
        for seed in 0..seeds {
            let b = sample_batch(m, slots, seed).unwrap();
            s1 += b.n_single_slots as f64;
            s2 += b.n_pair_slots as f64;
        }
        for (sum, k) in [(s1, 1), (s2, 2)] {
            let expected = slots as f64 * poisson_pmf(k, m).unwrap();
            let mean = sum / seeds as f64;
            let stderr = (expected / seeds as f64).sqrt();
            assert!(
                (mean - expected).abs() < 3.0 * stderr,
                "k={k}: mean {mean} vs {expected} (se {stderr})"
            );
        }
    }

    proptest! {
        #[test]
        fn pmf_normalizes(m in 0.0f64..1.0) {
            let total: f64 = (0..=50).map(|n| poisson_pmf(n, m).unwrap()).sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
        }

        #[test]
        fn pair_fraction_is_pmf_ratio(m in 1e-6f64..1.0) {
            let ratio = poisson_pmf(2, m).unwrap() / poisson_pmf(1, m).unwrap();
            let pf = pair_fraction(m).unwrap();
            prop_assert!(((ratio - pf) / pf).abs() < 1e-14);
        }

        #[test]
        fn mean_photon_scales_linearly(
            count in 0.0f64..1e7,
            k in 0.1f64..10.0,
            acc in 1e-3f64..10.0,
        ) {
            let base = mean_photon_number(count, acc, 22e-9).unwrap();
            let scaled_count = mean_photon_number(k * count, acc, 22e-9).unwrap();
            let scaled_acc = mean_photon_number(count, k * acc, 22e-9).unwrap();
            prop_assert!((scaled_count - k * base).abs() <= 1e-12 * (1.0 + k * base));
            prop_assert!((scaled_acc - base / k).abs() <= 1e-12 * (1.0 + base / k));
        }

        #[test]
        fn od_chain_composes(p in 1e-9f64..1.0, a in 0.0f64..8.0, b in 0.0f64..8.0) {
            let chained = attenuated_power(attenuated_power(p, a).unwrap(), b).unwrap();
            let direct = attenuated_power(p, a + b).unwrap();
            prop_assert!(((chained - direct) / direct).abs() < 1e-12);
        }

        #[test]
        fn batch_never_overfills(m in 0.0f64..0.99, slots in 1u64..50, seed: u64) {
            let b = sample_batch(m, slots, seed).unwrap();
            prop_assert!(b.validate().is_ok());
        }
    }
}
