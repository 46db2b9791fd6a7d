//! Polarization angle-depth matrix.
//!
//! Sweeping the incident polarization angle and taking one cross-polarized
//! depth spectrum per angle gives a matrix with angles down the rows and
//! optical depth across the columns. Its τ = 0 column follows the
//! DC + 2η + 4η law of [`crate::polarimetry`]; the row through the strongest
//! response shows how many separated interfaces the target has.
//!
//! A body surface is nearly isotropic and single layered: weak, flat
//! polarization response and a lone τ = 0 line. Weapon-like targets have
//! strong cross-polarized returns and extra depth lines.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarimetry::{fit_harmonics, AngleSample, HarmonicParams, PolarizationAngle};
use crate::spectral::{
    depth_spectrum, find_peaks_in, synthesize_point_cross_power, synthesize_power, DepthSpectrum,
    FrequencyGrid, PeakList, PeakParams, PointScene, PowerTrace, SpectralParams,
};
use crate::stratified::LayerStack;

/// Incident polarization angles, degrees, inclusive of both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AngleSweep {
    pub start_deg: f64,
    pub stop_deg: f64,
    pub step_deg: f64,
}

impl Default for AngleSweep {
    fn default() -> Self {
        Self {
            start_deg: 0.0,
            stop_deg: 180.0,
            step_deg: 10.0,
        }
    }
}

impl AngleSweep {
    pub fn new(start_deg: f64, stop_deg: f64, step_deg: f64) -> Result<Self> {
        let s = Self {
            start_deg,
            stop_deg,
            step_deg,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        let finite =
            self.start_deg.is_finite() && self.stop_deg.is_finite() && self.step_deg.is_finite();
        if !finite || self.step_deg <= 0.0 || self.stop_deg < self.start_deg {
            return Err(Error::InvalidSweep(format!(
                "need step > 0 and stop ≥ start, got {}:{}:{}",
                self.start_deg, self.step_deg, self.stop_deg
            )));
        }
        let cells = (self.stop_deg - self.start_deg) / self.step_deg;
        if (cells - cells.round()).abs() > 1e-9 * cells.max(1.0) {
            return Err(Error::InvalidSweep(format!(
                "{}..{} is not a whole number of {}° steps",
                self.start_deg, self.stop_deg, self.step_deg
            )));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        ((self.stop_deg - self.start_deg) / self.step_deg).round() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn angles_deg(&self) -> Vec<f64> {
        (0..self.len())
            .map(|n| self.start_deg + n as f64 * self.step_deg)
            .collect()
    }
}

/// Anything that can produce a cross-polarized power trace at a given angle.
pub trait CrossPolSource {
    fn cross_power(&self, grid: &FrequencyGrid, eta: PolarizationAngle) -> Result<PowerTrace>;
}

impl CrossPolSource for LayerStack {
    fn cross_power(&self, grid: &FrequencyGrid, eta: PolarizationAngle) -> Result<PowerTrace> {
        synthesize_power(self, grid, Some(eta))
    }
}

impl CrossPolSource for PointScene {
    fn cross_power(&self, grid: &FrequencyGrid, eta: PolarizationAngle) -> Result<PowerTrace> {
        synthesize_point_cross_power(self, grid, eta)
    }
}

/// Magnitudes `|s′(τ_m, η_n)|`, one row per angle in ascending order.
#[derive(Debug, Clone, PartialEq)]
pub struct PadMatrix {
    angles_deg: Vec<f64>,
    depth_axis: Vec<f64>,
    rows: Vec<Vec<f64>>,
    depth_spacing: f64,
    pad_factor: usize,
}

impl PadMatrix {
    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    /// Optical depth of each column, meters.
    pub fn depth_axis(&self) -> &[f64] {
        &self.depth_axis
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rows
    }

    pub fn row(&self, n: usize) -> &[f64] {
        &self.rows[n]
    }

    /// `(rows, columns)`.
    pub fn shape(&self) -> (usize, usize) {
        (self.rows.len(), self.depth_axis.len())
    }

    pub fn column(&self, m: usize) -> Vec<f64> {
        self.rows.iter().map(|r| r[m]).collect()
    }

    pub fn depth_spacing(&self) -> f64 {
        self.depth_spacing
    }

    pub fn pad_factor(&self) -> usize {
        self.pad_factor
    }

    /// Largest entry, with its `(row, column)`; ties go to the lowest row and
    /// then the lowest column.
    pub fn argmax(&self) -> (usize, usize, f64) {
        let mut best = (0, 0, f64::NEG_INFINITY);
        for (n, row) in self.rows.iter().enumerate() {
            for (m, &v) in row.iter().enumerate() {
                if v > best.2 {
                    best = (n, m, v);
                }
            }
        }
        best
    }

    /// Largest absolute entry-wise difference; `None` if the shapes differ.
    pub fn max_abs_diff(&self, other: &PadMatrix) -> Option<f64> {
        if self.shape() != other.shape() {
            return None;
        }
        Some(
            self.rows
                .iter()
                .zip(&other.rows)
                .flat_map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y).abs()))
                .fold(0.0, f64::max),
        )
    }
}

/// The matrix together with the traces and complex spectra behind each row.
#[derive(Debug, Clone)]
pub struct PadBuild {
    pub matrix: PadMatrix,
    pub traces: Vec<PowerTrace>,
    pub spectra: Vec<DepthSpectrum>,
}

/// Builds the matrix from per-angle traces (measured or simulated).
pub fn pad_from_traces(
    angles_deg: &[f64],
    traces: Vec<PowerTrace>,
    params: &SpectralParams,
) -> Result<PadBuild> {
    if angles_deg.len() != traces.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} angles for {} traces",
            angles_deg.len(),
            traces.len()
        )));
    }
    let Some(first) = traces.first() else {
        return Err(Error::DimensionMismatch(
            "no traces to build a matrix from".into(),
        ));
    };
    let len = first.power().len();
    if let Some(bad) = traces.iter().position(|t| t.power().len() != len) {
        return Err(Error::DimensionMismatch(format!(
            "trace at {}° has {} samples, expected {len}",
            angles_deg[bad],
            traces[bad].power().len()
        )));
    }
    if angles_deg.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::DimensionMismatch(
            "angles must be strictly ascending".into(),
        ));
    }
    let spectra = traces
        .iter()
        .map(|t| depth_spectrum(t, params))
        .collect::<Result<Vec<_>>>()?;
    let rows: Vec<Vec<f64>> = spectra.iter().map(|s| s.magnitudes()).collect();
    let matrix = PadMatrix {
        angles_deg: angles_deg.to_vec(),
        depth_axis: spectra[0].depth_axis(),
        rows,
        depth_spacing: spectra[0].depth_spacing(),
        pad_factor: params.pad_factor,
    };
    Ok(PadBuild {
        matrix,
        traces,
        spectra,
    })
}

pub fn build_pad(
    source: &impl CrossPolSource,
    grid: &FrequencyGrid,
    sweep: &AngleSweep,
    params: &SpectralParams,
) -> Result<PadBuild> {
    sweep.validate()?;
    let angles = sweep.angles_deg();
    let traces = angles
        .iter()
        .map(|&deg| source.cross_power(grid, PolarizationAngle::from_degrees(deg)))
        .collect::<Result<Vec<_>>>()?;
    pad_from_traces(&angles, traces, params)
}

pub fn build_pad_matrix(
    source: &impl CrossPolSource,
    grid: &FrequencyGrid,
    sweep: &AngleSweep,
    params: &SpectralParams,
) -> Result<PadMatrix> {
    build_pad(source, grid, sweep, params).map(|b| b.matrix)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PadFeatures {
    /// τ = 0 column across angles.
    pub pol_profile: Vec<f64>,
    /// Harmonic fit of the τ = 0 column; `None` with fewer than five distinct
    /// angles.
    pub pol_fit: Option<HarmonicParams>,
    /// Row through the global maximum.
    pub depth_profile: Vec<f64>,
    pub depth_profile_angle_deg: f64,
    pub peaks: PeakList,
    pub peak_count: usize,
    pub max_magnitude: f64,
    /// Largest τ = 0 value.
    pub dc_magnitude: f64,
}

pub fn extract_features(u: &PadMatrix, peaks: &PeakParams) -> Result<PadFeatures> {
    let (rows, cols) = u.shape();
    if rows == 0 || cols == 0 {
        return Err(Error::DimensionMismatch("empty matrix".into()));
    }
    peaks.validate()?;
    let pol_profile = u.column(0);
    let samples = u
        .angles_deg
        .iter()
        .zip(&pol_profile)
        .map(|(&deg, &p)| AngleSample::new(PolarizationAngle::from_degrees(deg), p))
        .collect::<Result<Vec<_>>>()?;
    let pol_fit = match fit_harmonics(&samples) {
        Ok(p) => Some(p),
        Err(Error::FitUnderdetermined(_)) => None,
        Err(e) => return Err(e),
    };
    let (n, _, max_magnitude) = u.argmax();
    let depth_profile = u.rows[n].clone();
    let found = find_peaks_in(&depth_profile, u.depth_spacing, u.pad_factor as f64, peaks);
    Ok(PadFeatures {
        pol_fit,
        depth_profile,
        depth_profile_angle_deg: u.angles_deg[n],
        peak_count: found.len(),
        peaks: found,
        max_magnitude,
        dc_magnitude: pol_profile.iter().cloned().fold(0.0, f64::max),
        pol_profile,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Thresholds {
    /// Weapon-suspect when the maximum reaches this multiple of the baseline.
    pub amplitude_ratio: f64,
    /// Weapon-suspect when the depth row has at least this many structural peaks.
    pub min_peaks: usize,
}

impl Default for Thresholds {
    fn default() -> Self {
        Self {
            amplitude_ratio: 10.0,
            min_peaks: 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Label {
    Clear,
    WeaponSuspect,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Verdict {
    pub label: Label,
    /// `max_magnitude / baseline`; infinite (serialized as `null`) when the
    /// baseline is zero and the scene is not.
    pub amplitude_score: f64,
    pub peak_score: usize,
    pub baseline: f64,
    pub thresholds: Thresholds,
}

pub fn classify(
    feat: &PadFeatures,
    thresholds: &Thresholds,
    baseline: Option<f64>,
) -> Result<Verdict> {
    let baseline = baseline.ok_or_else(|| {
        Error::Unconfigured("classification needs a clear-scene baseline magnitude".into())
    })?;
    if !(baseline.is_finite() && baseline >= 0.0) {
        return Err(Error::Unconfigured(format!(
            "baseline must be finite and non-negative, got {baseline}"
        )));
    }
    let amplitude_score = if feat.max_magnitude == 0.0 {
        0.0
    } else if baseline == 0.0 {
        f64::INFINITY
    } else {
        feat.max_magnitude / baseline
    };
    let suspect =
        amplitude_score >= thresholds.amplitude_ratio || feat.peak_count >= thresholds.min_peaks;
    Ok(Verdict {
        label: if suspect {
            Label::WeaponSuspect
        } else {
            Label::Clear
        },
        amplitude_score,
        peak_score: feat.peak_count,
        baseline,
        thresholds: *thresholds,
    })
}
