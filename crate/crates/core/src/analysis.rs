//! Estimators over fringe series and count records.

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ChiSquared, ContinuousCDF};

use crate::error::{Error, Result};
use crate::source::{mean_photon_number, pair_fraction, poisson_pmf, poisson_tail};

/// Fraction of samples averaged at each end for robust extrema.
pub const EXTREMA_FRACTION: f64 = 0.05;

/// Smallest window accepted by the extrema-based estimators.
pub const MIN_WINDOW_SAMPLES: usize = 8;

/// Visibility above which a fringe is flagged as beyond the classical bound (1/√2).
#[allow(clippy::approx_constant)]
pub const CLASSICAL_VISIBILITY: f64 = 0.7071;

/// Coincidence ratio below which the fringe is flagged nonclassical.
pub const CLASSICAL_G2: f64 = 0.5;

/// Minimum expected count per chi-square cell.
pub const MIN_EXPECTED_PER_CELL: f64 = 5.0;

/// Peak-to-mean periodogram power required to accept a period.
const PEAK_SIGNIFICANCE: f64 = 10.0;

/// Periodogram zero-padding factor.
const PAD_FACTOR: usize = 16;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FringeSeries {
    /// Scan positions (m) or times (s).
    pub positions: Vec<f64>,
    pub values: Vec<f64>,
    pub label: String,
}

impl FringeSeries {
    pub fn new(label: impl Into<String>, positions: Vec<f64>, values: Vec<f64>) -> Result<Self> {
        if positions.len() != values.len() {
            return Err(Error::Alignment(format!(
                "{} positions vs {} values",
                positions.len(),
                values.len()
            )));
        }
        Ok(Self {
            positions,
            values,
            label: label.into(),
        })
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Values whose position lies in the closed `window`, or all values.
    pub fn windowed(&self, window: Option<(f64, f64)>) -> Vec<f64> {
        match window {
            None => self.values.clone(),
            Some((lo, hi)) => self
                .positions
                .iter()
                .zip(&self.values)
                .filter(|(x, _)| **x >= lo && **x <= hi)
                .map(|(_, v)| *v)
                .collect(),
        }
    }

    fn windowed_series(&self, window: Option<(f64, f64)>) -> Self {
        match window {
            None => self.clone(),
            Some((lo, hi)) => {
                let (positions, values) = self
                    .positions
                    .iter()
                    .zip(&self.values)
                    .filter(|(x, _)| **x >= lo && **x <= hi)
                    .map(|(x, v)| (*x, *v))
                    .unzip();
                Self {
                    positions,
                    values,
                    label: self.label.clone(),
                }
            }
        }
    }
}

/// Means of the lowest and highest `EXTREMA_FRACTION` of `values` (at least
/// one sample each).
pub fn robust_extrema(values: &[f64]) -> Result<(f64, f64)> {
    if values.len() < MIN_WINDOW_SAMPLES {
        return Err(Error::InsufficientData(format!(
            "{} samples in window, need at least {MIN_WINDOW_SAMPLES}",
            values.len()
        )));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::domain("series contains non-finite values"));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let k = ((EXTREMA_FRACTION * sorted.len() as f64).ceil() as usize).max(1);
    let low = sorted[..k].iter().sum::<f64>() / k as f64;
    let high = sorted[sorted.len() - k..].iter().sum::<f64>() / k as f64;
    Ok((low, high))
}

/// Fringe visibility `(max − min)/(max + min)` from robust extrema.
pub fn visibility(series: &FringeSeries, window: Option<(f64, f64)>) -> Result<f64> {
    let (low, high) = robust_extrema(&series.windowed(window))?;
    if high + low <= 0.0 {
        return Ok(0.0);
    }
    Ok(((high - low) / (high + low)).clamp(0.0, 1.0))
}

/// Minimum-over-maximum of a coincidence fringe.
pub fn g2_ratio(coinc: &FringeSeries, window: Option<(f64, f64)>) -> Result<f64> {
    let (low, high) = robust_extrema(&coinc.windowed(window))?;
    if high <= 0.0 {
        return Err(Error::UndefinedRatio("coincidence maximum is zero".into()));
    }
    Ok(low / high)
}

/// Rate-normalized intensity correlation `N_c / (N_A N_B) · T / δt`.
pub fn g2_rate(n_a: f64, n_b: f64, n_c: f64, t: f64, delta_t: f64) -> Result<f64> {
    if !(t > 0.0 && delta_t > 0.0) {
        return Err(Error::domain("T and δt must be > 0"));
    }
    if !(n_a > 0.0 && n_b > 0.0) {
        return Err(Error::UndefinedRatio(format!(
            "singles product is zero (N_A = {n_a}, N_B = {n_b})"
        )));
    }
    Ok(n_c / (n_a * n_b) * (t / delta_t))
}

/// Bunched-to-singles ratio across both paths.
pub fn eta21(n_bunched: f64, n_single_per_path: f64) -> Result<f64> {
    if !(n_single_per_path > 0.0) {
        return Err(Error::UndefinedRatio("no singles".into()));
    }
    Ok(n_bunched / (2.0 * n_single_per_path))
}

/// Envelope level at or above which a point belongs to the coherent centre.
pub const COHERENT_CENTER_LEVEL: f64 = 0.5;

/// Intensity correlation with the π-shifted twin averaged in.
///
/// Swapping the two outputs (an extra π of phase) leaves coincidences
/// unchanged, so the twin-averaged denominator is the squared mean singles
/// level. The normalized coherent coincidence `n_c` (peak 1 over the points
/// with `G >= 0.5`) is then blended toward the incoherent level:
/// `g2 = G·n_c + (1 − G)·0.5`.
pub fn averaged_g2(
    singles_a: &FringeSeries,
    singles_b: &FringeSeries,
    coinc: &FringeSeries,
    envelope: &[f64],
) -> Result<FringeSeries> {
    let n = coinc.len();
    if singles_a.len() != n || singles_b.len() != n || envelope.len() != n {
        return Err(Error::Alignment(format!(
            "lengths differ: A {}, B {}, coincidence {}, envelope {}",
            singles_a.len(),
            singles_b.len(),
            n,
            envelope.len()
        )));
    }
    for (i, ((xa, xb), xc)) in singles_a
        .positions
        .iter()
        .zip(&singles_b.positions)
        .zip(&coinc.positions)
        .enumerate()
    {
        let tol = 1e-9 * xc.abs().max(1e-12);
        if (xa - xc).abs() > tol || (xb - xc).abs() > tol {
            return Err(Error::Alignment(format!("positions differ at index {i}")));
        }
    }
    if n == 0 {
        return Err(Error::InsufficientData("empty series".into()));
    }
    if let Some(g) = envelope.iter().find(|g| !(0.0..=1.0).contains(*g)) {
        return Err(Error::domain(format!("envelope value {g} outside [0, 1]")));
    }

    let raw = (0..n)
        .map(|i| {
            let mean_singles = 0.5 * (singles_a.values[i] + singles_b.values[i]);
            if mean_singles <= 0.0 {
                return Err(Error::UndefinedRatio(format!("no singles at index {i}")));
            }
            Ok(coinc.values[i] / (mean_singles * mean_singles))
        })
        .collect::<Result<Vec<f64>>>()?;

    let center_max = raw
        .iter()
        .zip(envelope)
        .filter(|(_, g)| **g >= COHERENT_CENTER_LEVEL)
        .map(|(r, _)| *r)
        .fold(f64::NEG_INFINITY, f64::max);
    let norm = if center_max.is_finite() {
        center_max
    } else {
        raw.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    };
    if !(norm > 0.0) {
        return Err(Error::UndefinedRatio(
            "coherent coincidence maximum is zero".into(),
        ));
    }

    let values = raw
        .iter()
        .zip(envelope)
        .map(|(r, g)| g * (r / norm) + (1.0 - g) * CLASSICAL_G2)
        .collect();
    FringeSeries::new("g2", coinc.positions.clone(), values)
}

/// Dominant period of a uniformly sampled series, in position units.
///
/// Mean-removed, Hann-windowed, zero-padded periodogram; the peak bin is
/// refined by a parabola through the log powers of its neighbours.
pub fn fringe_period(series: &FringeSeries) -> Result<f64> {
    let n = series.len();
    if n < 16 {
        return Err(Error::InsufficientData(format!(
            "{n} samples; need two periods of at least eight points"
        )));
    }
    let span = series.positions[n - 1] - series.positions[0];
    let dx = span.abs() / (n - 1) as f64;
    if !(dx > 0.0) {
        return Err(Error::InsufficientData(
            "positions do not span a range".into(),
        ));
    }

    let mean = series.values.iter().sum::<f64>() / n as f64;
    let scale = series.values.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let centered: Vec<f64> = series.values.iter().map(|v| v - mean).collect();
    if centered
        .iter()
        .all(|v| v.abs() <= 1e-12 * scale.max(f64::MIN_POSITIVE))
    {
        return Err(Error::NoPeriod("series is constant".into()));
    }

    let nfft = n.next_power_of_two() * PAD_FACTOR;
    let mut buf: Vec<Complex<f64>> = vec![Complex::new(0.0, 0.0); nfft];
    for (i, v) in centered.iter().enumerate() {
        let w = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * i as f64 / (n - 1) as f64).cos();
        buf[i] = Complex::new(v * w, 0.0);
    }
    FftPlanner::new().plan_fft_forward(nfft).process(&mut buf);
    let power: Vec<f64> = buf[..nfft / 2].iter().map(|c| c.norm_sqr()).collect();

    // Frequencies between two periods per span and eight samples per period.
    let k_lo = ((2.0 * nfft as f64 / (n - 1) as f64).ceil() as usize).max(1);
    let k_hi = (nfft / 8).min(power.len() - 2);
    if k_lo >= k_hi {
        return Err(Error::InsufficientData(
            "no admissible frequency range".into(),
        ));
    }
    let band = &power[k_lo..=k_hi];
    let (offset, &peak) = band
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .expect("non-empty band");
    let k = k_lo + offset;
    let floor = band.iter().sum::<f64>() / band.len() as f64;
    if !(peak > PEAK_SIGNIFICANCE * floor) || k == k_lo || k == k_hi {
        return Err(Error::NoPeriod(format!(
            "peak/mean power {:.2} at bin {k}",
            peak / floor
        )));
    }

    let (mut l, mut c, mut r) = (power[k - 1], power[k], power[k + 1]);
    if l > 0.0 && r > 0.0 {
        (l, c, r) = (l.ln(), c.ln(), r.ln());
    }
    let delta = 0.5 * (l - r) / (l - 2.0 * c + r);
    let freq = (k as f64 + delta) / (nfft as f64 * dx);
    Ok(1.0 / freq)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PoissonFit {
    pub chi_square: f64,
    pub dof: usize,
    /// Mean used for the expected counts.
    pub mean: f64,
}

impl PoissonFit {
    /// True when the statistic exceeds the `level` quantile (e.g. 0.99).
    pub fn rejects_at(&self, level: f64) -> bool {
        self.chi_square > chi_square_quantile(self.dof, level)
    }
}

pub fn chi_square_quantile(dof: usize, level: f64) -> f64 {
    ChiSquared::new(dof as f64)
        .expect("dof >= 1")
        .inverse_cdf(level)
}

/// Pearson chi-square of an occupancy histogram against the Poisson law.
///
/// `histogram[k]` counts samples with value `k`; the last cell collects the
/// tail `>= k`. Cells are merged until every expected count is at least
/// [`MIN_EXPECTED_PER_CELL`]. With `mean = None` the mean is fitted from the
/// histogram and one further degree of freedom is spent.
pub fn poisson_gof(histogram: &[u64], mean: Option<f64>) -> Result<PoissonFit> {
    let total: u64 = histogram.iter().sum();
    if total == 0 {
        return Err(Error::Degenerate("empty histogram".into()));
    }
    if histogram.iter().filter(|&&h| h > 0).count() < 2 {
        return Err(Error::Degenerate("all mass in one cell".into()));
    }
    let fitted = mean.is_none();
    let mean = match mean {
        Some(m) if m >= 0.0 => m,
        Some(m) => return Err(Error::domain(format!("mean must be >= 0, got {m}"))),
        None => {
            histogram
                .iter()
                .enumerate()
                .map(|(k, &h)| k as f64 * h as f64)
                .sum::<f64>()
                / total as f64
        }
    };

    let last = histogram.len() - 1;
    let n = total as f64;
    let mut cells: Vec<(f64, f64)> = Vec::new();
    let (mut obs, mut exp) = (0.0, 0.0);
    for (k, &h) in histogram.iter().enumerate() {
        let p = if k == last {
            poisson_tail(k as u32, mean)?
        } else {
            poisson_pmf(k as u32, mean)?
        };
        obs += h as f64;
        exp += n * p;
        if exp >= MIN_EXPECTED_PER_CELL {
            cells.push((obs, exp));
            obs = 0.0;
            exp = 0.0;
        }
    }
    if exp > 0.0 || obs > 0.0 {
        match cells.last_mut() {
            Some(c) => {
                c.0 += obs;
                c.1 += exp;
            }
            None => cells.push((obs, exp)),
        }
    }

    let used = 1 + usize::from(fitted);
    if cells.len() <= used {
        return Err(Error::Degenerate(format!(
            "{} cell(s) after merging, no degrees of freedom left",
            cells.len()
        )));
    }
    let mut chi_square = 0.0;
    for &(o, e) in &cells {
        if e <= 0.0 {
            if o > 0.0 {
                return Ok(PoissonFit {
                    chi_square: f64::INFINITY,
                    dof: cells.len() - used,
                    mean,
                });
            }
            continue;
        }
        chi_square += (o - e) * (o - e) / e;
    }
    Ok(PoissonFit {
        chi_square,
        dof: cells.len() - used,
        mean,
    })
}

/// Settings for [`correlation_report`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReportParams {
    /// Accumulation time per point, s.
    pub accumulation: f64,
    /// Coincidence resolution δt of the rate-based g2, s.
    pub delta_t: f64,
    pub dead_time: f64,
    pub window: Option<(f64, f64)>,
}

impl Default for ReportParams {
    fn default() -> Self {
        Self {
            accumulation: 1.0,
            delta_t: 10e-9,
            dead_time: 22e-9,
            window: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub visibility_a: f64,
    pub visibility_b: f64,
    pub g2_ratio_min_over_max: f64,
    pub g2_rate: f64,
    pub eta21: f64,
    pub mean_photon: f64,
    /// P(2)/P(1) at the measured mean.
    pub pair_fraction: f64,
    pub fringe_period: Option<f64>,
    pub coincidence_period: Option<f64>,
    pub visibility_beyond_classical: bool,
    pub g2_below_classical: bool,
}

impl CorrelationReport {
    /// Flat `(key, value)` rows for CSV export.
    pub fn rows(&self) -> Vec<(&'static str, String)> {
        let opt = |v: Option<f64>| v.map(|p| p.to_string()).unwrap_or_default();
        vec![
            ("visibility_a", self.visibility_a.to_string()),
            ("visibility_b", self.visibility_b.to_string()),
            (
                "g2_ratio_min_over_max",
                self.g2_ratio_min_over_max.to_string(),
            ),
            ("g2_rate", self.g2_rate.to_string()),
            ("eta21", self.eta21.to_string()),
            ("mean_photon", self.mean_photon.to_string()),
            ("pair_fraction", self.pair_fraction.to_string()),
            ("fringe_period_m", opt(self.fringe_period)),
            ("coincidence_period_m", opt(self.coincidence_period)),
            (
                "visibility_beyond_classical",
                self.visibility_beyond_classical.to_string(),
            ),
            ("g2_below_classical", self.g2_below_classical.to_string()),
        ]
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Builds the summary statistics of a scan from its three count series.
pub fn correlation_report(
    singles_a: &FringeSeries,
    singles_b: &FringeSeries,
    coinc: &FringeSeries,
    params: &ReportParams,
) -> Result<CorrelationReport> {
    if singles_a.len() != coinc.len() || singles_b.len() != coinc.len() {
        return Err(Error::Alignment("series lengths differ".into()));
    }
    let w = params.window;
    let visibility_a = visibility(singles_a, w)?;
    let visibility_b = visibility(singles_b, w)?;
    let ratio = g2_ratio(coinc, w)?;

    let a = singles_a.windowed(w);
    let b = singles_b.windowed(w);
    let c = coinc.windowed(w);
    let (mean_a, mean_b, mean_c) = (mean(&a), mean(&b), mean(&c));
    let g2 = g2_rate(mean_a, mean_b, mean_c, params.accumulation, params.delta_t)?;
    let (_, c_max) = robust_extrema(&c)?;
    let per_path = 0.5 * (mean_a + mean_b);
    let eta = eta21(c_max, per_path)?;
    let n_mean = mean_photon_number(mean_a + mean_b, params.accumulation, params.dead_time)?;

    let singles_period = fringe_period(&singles_a.windowed_series(w)).ok();
    let coincidence_period = fringe_period(&coinc.windowed_series(w)).ok();

    Ok(CorrelationReport {
        visibility_a,
        visibility_b,
        g2_ratio_min_over_max: ratio,
        g2_rate: g2,
        eta21: eta,
        mean_photon: n_mean,
        pair_fraction: pair_fraction(n_mean)?,
        fringe_period: singles_period,
        coincidence_period,
        visibility_beyond_classical: visibility_a > CLASSICAL_VISIBILITY
            && visibility_b > CLASSICAL_VISIBILITY,
        g2_below_classical: ratio < CLASSICAL_G2,
    })
}
