//! Wave model of the Mach-Zehnder interferometer.
//!
//! The first beam splitter fixes a π/2 phase between the two arms, so at zero
//! relative phase every photon leaves toward D2. Fringe contrast is the
//! product of a static overlap visibility `V` and a scan-dependent Gaussian
//! envelope `G`.

use std::f64::consts::{FRAC_PI_2, LN_2, PI};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Phase between transmitted and reflected fields of a lossless splitter.
pub const BS_PHASE: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpticalState {
    /// Relative phase of the two arms at the second splitter, rad.
    pub phase: f64,
    pub intrinsic_visibility: f64,
    /// Path-length offset from the zero-difference point, m.
    pub scan_position: f64,
    /// Walk-off envelope FWHM, m.
    pub effective_coherence_length: f64,
    pub laser_coherence_length: f64,
}

impl Default for OpticalState {
    fn default() -> Self {
        Self {
            phase: 0.0,
            intrinsic_visibility: 1.0,
            scan_position: 0.0,
            effective_coherence_length: 2e-6,
            laser_coherence_length: 0.30,
        }
    }
}

impl OpticalState {
    pub fn bs_phase(&self) -> f64 {
        BS_PHASE
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.intrinsic_visibility) {
            return Err(Error::config(format!(
                "intrinsic_visibility must lie in [0, 1], got {}",
                self.intrinsic_visibility
            )));
        }
        if !(self.effective_coherence_length > 0.0) || !(self.laser_coherence_length > 0.0) {
            return Err(Error::config("coherence lengths must be > 0"));
        }
        Ok(())
    }

    /// Envelope at the current scan position. With walk-off disabled the
    /// laser's own coherence length sets the envelope.
    pub fn envelope(&self, asymmetric_walkoff: bool) -> Result<f64> {
        let width = if asymmetric_walkoff {
            self.effective_coherence_length
        } else {
            self.laser_coherence_length
        };
        envelope(self.scan_position, width)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PztConfig {
    pub voltage_min: f64,
    pub voltage_max: f64,
    pub voltage_resolution: f64,
    /// m/V
    pub displacement_per_volt: f64,
    /// s
    pub scan_duration: f64,
}

impl Default for PztConfig {
    fn default() -> Self {
        Self {
            voltage_min: 0.0,
            voltage_max: 100.0,
            voltage_resolution: 1.5e-3,
            displacement_per_volt: 8e-8,
            scan_duration: 316.0,
        }
    }
}

impl PztConfig {
    pub fn center(&self) -> f64 {
        0.5 * (self.voltage_min + self.voltage_max)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.voltage_max > self.voltage_min) {
            return Err(Error::config("pzt.voltage_max must exceed voltage_min"));
        }
        if !(self.voltage_resolution > 0.0) {
            return Err(Error::config("pzt.voltage_resolution must be > 0"));
        }
        if !self.displacement_per_volt.is_finite() {
            return Err(Error::config("pzt.displacement_per_volt must be finite"));
        }
        if !(self.scan_duration > 0.0) {
            return Err(Error::config("pzt.scan_duration must be > 0"));
        }
        Ok(())
    }
}

/// Unwrapped phase for path offset `x`.
pub fn pzt_phase(x: f64, wavelength: f64) -> Result<f64> {
    if !(wavelength > 0.0) {
        return Err(Error::domain(format!(
            "wavelength must be > 0, got {wavelength}"
        )));
    }
    Ok(2.0 * PI * x / wavelength)
}

/// Quantizes `v` to the controller's voltage grid, anchored on the range centre.
pub fn quantize_voltage(v: f64, cfg: &PztConfig) -> f64 {
    let c = cfg.center();
    c + ((v - c) / cfg.voltage_resolution).round() * cfg.voltage_resolution
}

/// PZT displacement; the centre of the voltage range is the zero path
/// difference.
pub fn voltage_to_displacement(v: f64, cfg: &PztConfig) -> Result<f64> {
    if !(v >= cfg.voltage_min && v <= cfg.voltage_max) {
        return Err(Error::Range(format!(
            "voltage {v} V outside [{}, {}] V",
            cfg.voltage_min, cfg.voltage_max
        )));
    }
    let steps = ((v - cfg.center()) / cfg.voltage_resolution).round();
    Ok(steps * cfg.voltage_resolution * cfg.displacement_per_volt)
}

/// Gaussian fringe envelope with full width at half maximum `l_eff`.
pub fn envelope(x: f64, l_eff: f64) -> Result<f64> {
    if !(l_eff > 0.0) {
        return Err(Error::domain(format!(
            "envelope width must be > 0, got {l_eff}"
        )));
    }
    Ok((-4.0 * LN_2 * x * x / (l_eff * l_eff)).exp())
}

fn check_unit(name: &str, v: f64) -> Result<()> {
    if (0.0..=1.0).contains(&v) {
        Ok(())
    } else {
        Err(Error::domain(format!("{name} must lie in [0, 1], got {v}")))
    }
}

/// Probability that a photon leaves toward D1.
pub fn port_probability(phase: f64, g: f64, v: f64) -> Result<f64> {
    check_unit("envelope", g)?;
    check_unit("visibility", v)?;
    Ok(0.5 * (1.0 - v * g * phase.cos()))
}

/// Normalized output intensities `(D1, D2)`; they always sum to one.
pub fn singles_fringe(phase: f64, g: f64, v: f64) -> Result<(f64, f64)> {
    let p = port_probability(phase, g, v)?;
    Ok((p, 1.0 - p))
}

/// Probability that both photons of a bunched pair click different detectors.
pub fn pair_coincidence_probability(phase: f64, g: f64, v: f64) -> Result<f64> {
    let p = port_probability(phase, g, v)?;
    Ok(2.0 * p * (1.0 - p))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    const LAMBDA: f64 = 632.8e-9;

    #[test]
    fn phase_examples() {
        assert_abs_diff_eq!(pzt_phase(316.4e-9, LAMBDA).unwrap(), PI, epsilon = 1e-12);
        assert_eq!(pzt_phase(0.0, LAMBDA).unwrap(), 0.0);
        assert_abs_diff_eq!(
            pzt_phase(LAMBDA, LAMBDA).unwrap(),
            2.0 * PI,
            epsilon = 1e-12
        );
        assert!(pzt_phase(1.0, 0.0).is_err());
    }

    #[test]
    fn voltage_examples() {
        let cfg = PztConfig::default();
        assert_eq!(voltage_to_displacement(50.0, &cfg).unwrap(), 0.0);
        assert_abs_diff_eq!(
            voltage_to_displacement(100.0, &cfg).unwrap(),
            4e-6,
            epsilon = 1e-10
        );
        assert_abs_diff_eq!(
            voltage_to_displacement(0.0, &cfg).unwrap(),
            -4e-6,
            epsilon = 1e-10
        );
        // Nearest grid points are 50.0000 and 50.0015 V.
        assert_abs_diff_eq!(
            voltage_to_displacement(50.0009, &cfg).unwrap(),
            1.2e-10,
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            voltage_to_displacement(50.0007, &cfg).unwrap(),
            0.0,
            epsilon = 1e-16
        );
        assert!(matches!(
            voltage_to_displacement(100.1, &cfg),
            Err(Error::Range(_))
        ));
        assert!(matches!(
            voltage_to_displacement(-0.1, &cfg),
            Err(Error::Range(_))
        ));
    }

    #[test]
    fn envelope_examples() {
        assert_eq!(envelope(0.0, 2e-6).unwrap(), 1.0);
        assert_abs_diff_eq!(envelope(1e-6, 2e-6).unwrap(), 0.5, epsilon = 1e-15);
        // exp(-16 ln 2) = 2^-16
        assert_abs_diff_eq!(
            envelope(4e-6, 2e-6).unwrap(),
            2f64.powi(-16),
            epsilon = 1e-18
        );
        assert!(envelope(0.0, 0.0).is_err());
    }

    #[test]
    fn port_examples() {
        assert_eq!(port_probability(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            port_probability(FRAC_PI_2, 0.3, 0.7).unwrap(),
            0.5,
            epsilon = 1e-16
        );
        assert_eq!(port_probability(0.0, 0.0, 1.0).unwrap(), 0.5);
        assert!(port_probability(0.0, 1.5, 1.0).is_err());
        assert!(port_probability(0.0, 1.0, -0.1).is_err());
    }

    #[test]
    fn singles_examples() {
        assert_eq!(singles_fringe(0.0, 1.0, 1.0).unwrap(), (0.0, 1.0));
        let (a, b) = singles_fringe(PI, 1.0, 0.882).unwrap();
        assert_abs_diff_eq!(a, 0.941, epsilon = 1e-12);
        assert_abs_diff_eq!(b, 0.059, epsilon = 1e-12);
        let (a, b) = singles_fringe(FRAC_PI_2, 0.5, 1.0).unwrap();
        assert_abs_diff_eq!(a, 0.5, epsilon = 1e-16);
        assert_abs_diff_eq!(b, 0.5, epsilon = 1e-16);
    }

    /// Enumerates the four routings of two independently routed photons.
    fn pair_split_by_enumeration(p: f64) -> f64 {
        let mut split = 0.0;
        for first_d1 in [true, false] {
            for second_d1 in [true, false] {
                let w =
                    (if first_d1 { p } else { 1.0 - p }) * (if second_d1 { p } else { 1.0 - p });
                if first_d1 != second_d1 {
                    split += w;
                }
            }
        }
        split
    }

    #[test]
    fn pair_examples() {
        assert_eq!(pair_coincidence_probability(0.0, 1.0, 1.0).unwrap(), 0.0);
        assert_abs_diff_eq!(
            pair_coincidence_probability(FRAC_PI_2, 1.0, 1.0).unwrap(),
            pair_split_by_enumeration(0.5),
            epsilon = 1e-16
        );
        assert_abs_diff_eq!(
            pair_coincidence_probability(FRAC_PI_2, 1.0, 1.0).unwrap(),
            0.5,
            epsilon = 1e-16
        );
        let min = pair_coincidence_probability(0.0, 1.0, 0.88).unwrap();
        assert_abs_diff_eq!(min, 0.1128, epsilon = 1e-12);
        let max = pair_coincidence_probability(FRAC_PI_2, 1.0, 0.88).unwrap();
        assert_abs_diff_eq!(min / max, 0.2256, epsilon = 1e-12);
    }

    #[test]
    fn bs_phase_is_fixed() {
        assert_eq!(OpticalState::default().bs_phase(), FRAC_PI_2);
    }

    proptest! {
        #[test]
        fn singles_sum_to_one(phi in -20.0f64..20.0, g in 0.0f64..=1.0, v in 0.0f64..=1.0) {
            let (a, b) = singles_fringe(phi, g, v).unwrap();
            prop_assert_eq!(a + b, 1.0);
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
        }

        #[test]
        fn pair_is_product_rule(phi in -20.0f64..20.0, g in 0.0f64..=1.0, v in 0.0f64..=1.0) {
            let p = port_probability(phi, g, v).unwrap();
            let c = pair_coincidence_probability(phi, g, v).unwrap();
            prop_assert!((c - 2.0 * p * (1.0 - p)).abs() < 1e-14);
            prop_assert!((c - pair_split_by_enumeration(p)).abs() < 1e-14);
            let closed = 0.5 * (1.0 - (v * g * phi.cos()).powi(2));
            prop_assert!((c - closed).abs() < 1e-14);
        }

        #[test]
        fn double_modulation(phi in -10.0f64..10.0, gv in 0.05f64..=1.0) {
            let c0 = pair_coincidence_probability(phi, gv, 1.0).unwrap();
            let c1 = pair_coincidence_probability(phi + PI, gv, 1.0).unwrap();
            prop_assert!((c0 - c1).abs() < 1e-12);
            // Singles only repeat after 2π; away from the crossings they change under π.
            let p0 = port_probability(phi, gv, 1.0).unwrap();
            let p1 = port_probability(phi + PI, gv, 1.0).unwrap();
            let p2 = port_probability(phi + 2.0 * PI, gv, 1.0).unwrap();
            prop_assert!((p0 - p2).abs() < 1e-12);
            if phi.cos().abs() > 1e-3 {
                prop_assert!((p0 - p1).abs() > 1e-6);
            }
        }

        #[test]
        fn coincidence_extrema_track_singles(k in -6i32..6, gv in 0.05f64..=1.0) {
            // Singles extrema (cos = ±1) give coincidence minima,
            // crossings (p = 1/2) give maxima.
            let extremum = f64::from(k) * PI;
            let crossing = extremum + FRAC_PI_2;
            let cmin = pair_coincidence_probability(extremum, gv, 1.0).unwrap();
            let cmax = pair_coincidence_probability(crossing, gv, 1.0).unwrap();
            prop_assert!((port_probability(crossing, gv, 1.0).unwrap() - 0.5).abs() < 1e-12);
            for d in [-0.3, -0.1, 0.1, 0.3] {
                let c = pair_coincidence_probability(extremum + d, gv, 1.0).unwrap();
                prop_assert!(c >= cmin);
                let c = pair_coincidence_probability(crossing + d, gv, 1.0).unwrap();
                prop_assert!(c <= cmax);
            }
            prop_assert!((cmin / cmax - (1.0 - gv * gv)).abs() < 1e-12);
        }

        #[test]
        fn envelope_shape(x in 0.0f64..1e-5, dx in 1e-9f64..1e-6) {
            let l = 2e-6;
            prop_assert_eq!(envelope(x, l).unwrap(), envelope(-x, l).unwrap());
            prop_assert!(envelope(x + dx, l).unwrap() <= envelope(x, l).unwrap());
            prop_assert!(envelope(x, l).unwrap() <= 1.0);
        }
    }
}
