//! Noise-free fringe, coincidence and g2 curves over a position grid.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::analysis::{averaged_g2, FringeSeries};
use crate::error::{Error, Result};
use crate::interferometer::{envelope, pzt_phase, singles_fringe};

pub const DEFAULT_HALF_WIDTH: f64 = 4e-6;
pub const DEFAULT_POINTS: usize = 4001;

pub const FIG4_HEADER: &str = "x_m,phase_rad,envelope,I_A,I_B,coincidence,coincidence_norm,g2";

#[derive(Debug, Clone, PartialEq)]
pub struct Fig4Curves {
    pub x: Vec<f64>,
    pub phase: Vec<f64>,
    pub envelope: Vec<f64>,
    /// Curve (a): normalized port intensities.
    pub i_a: Vec<f64>,
    pub i_b: Vec<f64>,
    /// Curve (b): pointwise product of the two intensities.
    pub coincidence: Vec<f64>,
    /// Curve (b) scaled so a perfect fringe peaks at 1.
    pub coincidence_norm: Vec<f64>,
    /// Curve (c).
    pub g2: Vec<f64>,
}

impl Fig4Curves {
    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }
}

/// Evenly spaced grid over `[-half_width, half_width]`.
pub fn symmetric_grid(half_width: f64, points: usize) -> Result<Vec<f64>> {
    if !(half_width > 0.0) || points < 2 {
        return Err(Error::domain(
            "grid needs half_width > 0 and at least 2 points",
        ));
    }
    let step = 2.0 * half_width / (points - 1) as f64;
    let mut grid: Vec<f64> = (0..points).map(|i| -half_width + step * i as f64).collect();
    // Mirror the lower half so the grid is exactly symmetric about zero.
    for i in 0..points / 2 {
        grid[points - 1 - i] = -grid[i];
    }
    if points % 2 == 1 {
        grid[points / 2] = 0.0;
    }
    Ok(grid)
}

pub fn analytic_fig4(v: f64, l_eff: f64, grid: &[f64], wavelength: f64) -> Result<Fig4Curves> {
    if !(0.0..=1.0).contains(&v) {
        return Err(Error::domain(format!(
            "visibility must lie in [0, 1], got {v}"
        )));
    }
    if grid.len() < 2 {
        return Err(Error::domain("grid needs at least 2 points"));
    }
    let n = grid.len();
    let mut c = Fig4Curves {
        x: grid.to_vec(),
        phase: Vec::with_capacity(n),
        envelope: Vec::with_capacity(n),
        i_a: Vec::with_capacity(n),
        i_b: Vec::with_capacity(n),
        coincidence: Vec::with_capacity(n),
        coincidence_norm: Vec::with_capacity(n),
        g2: Vec::new(),
    };
    for &x in grid {
        let phase = pzt_phase(x, wavelength)?;
        let g = envelope(x, l_eff)?;
        let (a, b) = singles_fringe(phase, g, v)?;
        c.phase.push(phase);
        c.envelope.push(g);
        c.i_a.push(a);
        c.i_b.push(b);
        c.coincidence.push(a * b);
        c.coincidence_norm.push(4.0 * a * b);
    }
    let a = FringeSeries::new("I_A", c.x.clone(), c.i_a.clone())?;
    let b = FringeSeries::new("I_B", c.x.clone(), c.i_b.clone())?;
    let coinc = FringeSeries::new("coincidence", c.x.clone(), c.coincidence.clone())?;
    c.g2 = averaged_g2(&a, &b, &coinc, &c.envelope)?.values;
    Ok(c)
}

pub fn fig4_csv(curves: &Fig4Curves) -> String {
    let mut s = String::with_capacity(curves.len() * 160);
    s.push_str(FIG4_HEADER);
    s.push('\n');
    for i in 0..curves.len() {
        writeln!(
            s,
            "{},{},{},{},{},{},{},{}",
            curves.x[i],
            curves.phase[i],
            curves.envelope[i],
            curves.i_a[i],
            curves.i_b[i],
            curves.coincidence[i],
            curves.coincidence_norm[i],
            curves.g2[i]
        )
        .expect("string write");
    }
    s
}

pub fn write_fig4_csv(curves: &Fig4Curves, path: &Path) -> Result<()> {
    fs::write(path, fig4_csv(curves)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::source::HENE_WAVELENGTH;

    fn default_curves(v: f64) -> Fig4Curves {
        let grid = symmetric_grid(DEFAULT_HALF_WIDTH, DEFAULT_POINTS).unwrap();
        analytic_fig4(v, 2e-6, &grid, HENE_WAVELENGTH).unwrap()
    }

    #[test]
    fn grid_is_symmetric_with_exact_zero() {
        let g = symmetric_grid(4e-6, 5).unwrap();
        assert_eq!(g, vec![-4e-6, -2e-6, 0.0, 2e-6, 4e-6]);
        assert!(symmetric_grid(0.0, 5).is_err());
    }

    #[test]
    fn product_rule_holds_everywhere() {
        let c = default_curves(0.88);
        for i in 0..c.len() {
            assert!((c.coincidence[i] - c.i_a[i] * c.i_b[i]).abs() <= 1e-14);
        }
    }

    #[test]
    fn center_value_is_zero_at_full_visibility() {
        let c = analytic_fig4(1.0, 2e-6, &[0.0, 1e-7], HENE_WAVELENGTH).unwrap();
        assert_eq!(c.coincidence[0], 0.0);
        assert_eq!(c.g2[0], 0.0);
    }

    #[test]
    fn far_wings_go_classical() {
        let c = default_curves(1.0);
        assert!((c.g2[0] - 0.5).abs() < 1e-3);
        assert!((c.g2[c.len() - 1] - 0.5).abs() < 1e-3);
    }

    #[test]
    fn g2_stays_in_unit_interval() {
        let c = default_curves(1.0);
        assert!(c.g2.iter().all(|g| (0.0..=1.0 + 1e-12).contains(g)));
        let peak = c.g2.iter().copied().fold(0.0, f64::max);
        assert!(peak > 0.99, "{peak}");
    }

    #[test]
    fn csv_has_header_and_rows() {
        let c = analytic_fig4(1.0, 2e-6, &[-1e-6, 0.0, 1e-6], HENE_WAVELENGTH).unwrap();
        let text = fig4_csv(&c);
        assert!(text.starts_with(FIG4_HEADER));
        assert_eq!(text.lines().count(), 4);
    }
}
