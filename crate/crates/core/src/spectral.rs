//! Power-only ranging.
//!
//! A direct-detection receiver sees `|S(f)|²` only. Its inverse Fourier
//! transform is the autocorrelation of the time-domain echo, so every pair of
//! echoes separated by a delay `τ` leaves a line at `τ` in the transform (the
//! depth spectrum). Absolute range drops out; only separations survive.
//!
//! Delays are reported as optical depth `c·τ/2`, in meters.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarimetry::{cross_pol_amplitude, PolarizationAngle, ScatteringMatrix};
use crate::stratified::{
    cross_interface_chain, cross_reflection, equivalent_reflection, interface_chain, LayerStack,
    SPEED_OF_LIGHT,
};

/// Uniform frequency grid, Hz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyGrid {
    f_start: f64,
    f_stop: f64,
    step: f64,
    points: usize,
}

impl FrequencyGrid {
    pub fn new(f_start: f64, f_stop: f64, step: f64) -> Result<Self> {
        if !(f_start.is_finite() && f_stop.is_finite() && step.is_finite()) {
            return Err(Error::InvalidGrid("grid values must be finite".into()));
        }
        if !(f_start > 0.0 && f_stop > f_start && step > 0.0) {
            return Err(Error::InvalidGrid(format!(
                "need 0 < f_start < f_stop and step > 0, got {f_start}..{f_stop} step {step}"
            )));
        }
        let span = f_stop - f_start;
        let cells = (span / step).round();
        if (cells * step - span).abs() > 1e-9 * span || cells < 1.0 {
            return Err(Error::InvalidGrid(format!(
                "span {span} Hz is not a whole number of {step} Hz steps"
            )));
        }
        Ok(Self {
            f_start,
            f_stop,
            step,
            points: cells as usize + 1,
        })
    }

    pub fn from_ghz(start: f64, stop: f64, step: f64) -> Result<Self> {
        Self::new(start * 1e9, stop * 1e9, step * 1e9)
    }

    pub fn f_start(&self) -> f64 {
        self.f_start
    }

    pub fn f_stop(&self) -> f64 {
        self.f_stop
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn len(&self) -> usize {
        self.points
    }

    pub fn is_empty(&self) -> bool {
        self.points == 0
    }

    /// Occupied bandwidth `(M − 1)·step`.
    pub fn bandwidth(&self) -> f64 {
        self.f_stop - self.f_start
    }

    pub fn frequency(&self, k: usize) -> f64 {
        self.f_start + k as f64 * self.step
    }

    pub fn frequencies(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.points).map(|k| self.frequency(k))
    }
}

/// Power samples on a frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerTrace {
    grid: FrequencyGrid,
    p: Vec<f64>,
}

impl PowerTrace {
    pub fn new(grid: FrequencyGrid, p: Vec<f64>) -> Result<Self> {
        if p.is_empty() {
            return Err(Error::EmptyTrace);
        }
        if p.len() != grid.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} power samples for a {}-point grid",
                p.len(),
                grid.len()
            )));
        }
        if let Some((k, v)) = p
            .iter()
            .enumerate()
            .find(|(_, v)| !(v.is_finite() && **v >= 0.0))
        {
            return Err(Error::InvalidScene(format!(
                "power sample {k} is {v}; power must be finite and non-negative"
            )));
        }
        Ok(Self { grid, p })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn power(&self) -> &[f64] {
        &self.p
    }

    pub fn mean(&self) -> f64 {
        self.p.iter().sum::<f64>() / self.p.len() as f64
    }
}

/// Taper applied to the power trace before the transform.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Rectangular,
    Hann,
}

impl Window {
    pub fn coefficients(self, m: usize) -> Vec<f64> {
        match self {
            Window::Rectangular => vec![1.0; m],
            Window::Hann if m == 1 => vec![1.0],
            Window::Hann => (0..m)
                .map(|k| 0.5 - 0.5 * (2.0 * PI * k as f64 / (m - 1) as f64).cos())
                .collect(),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Window::Rectangular => "rectangular",
            Window::Hann => "hann",
        }
    }
}

impl std::str::FromStr for Window {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rectangular" | "rect" => Ok(Window::Rectangular),
            "hann" => Ok(Window::Hann),
            other => Err(Error::Config {
                path: "spectral.window".into(),
                message: format!("unknown window `{other}`"),
            }),
        }
    }
}

/// Transform settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralParams {
    pub window: Window,
    /// Zero-padding factor (≥ 1).
    pub pad_factor: usize,
    /// Transform the trace with its (windowed) mean removed and put the mean
    /// back as an exact τ = 0 line. Without this the τ = 0 line leaks a
    /// window-shaped skirt into the structural part of the spectrum.
    pub isolate_dc: bool,
}

impl Default for SpectralParams {
    fn default() -> Self {
        Self {
            window: Window::Rectangular,
            pad_factor: 8,
            isolate_dc: true,
        }
    }
}

impl SpectralParams {
    pub fn validate(&self) -> Result<()> {
        if self.pad_factor == 0 {
            return Err(Error::Config {
                path: "spectral.pad_factor".into(),
                message: "pad factor must be at least 1".into(),
            });
        }
        Ok(())
    }
}

/// Inverse transform of a power trace.
///
/// The full (two-sided) axis is retained; [`DepthSpectrum::magnitudes`]
/// reports the τ ≥ 0 half.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthSpectrum {
    values: Vec<Complex64>,
    step: f64,
    points: usize,
    params: SpectralParams,
}

impl DepthSpectrum {
    /// All `M·pad` bins, bin `n` at delay `n·Δτ` (upper half wraps to negative
    /// delays).
    pub fn full(&self) -> &[Complex64] {
        &self.values
    }

    pub fn params(&self) -> SpectralParams {
        self.params
    }

    /// Unpadded trace length.
    pub fn trace_len(&self) -> usize {
        self.points
    }

    /// Number of τ ≥ 0 bins.
    pub fn positive_len(&self) -> usize {
        self.values.len() / 2 + 1
    }

    pub fn positive(&self) -> &[Complex64] {
        &self.values[..self.positive_len()]
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        self.positive().iter().map(|z| z.norm()).collect()
    }

    pub fn zero_lag(&self) -> Complex64 {
        self.values[0]
    }

    /// Bin spacing `1/(M·pad·step)`, seconds.
    pub fn delay_spacing(&self) -> f64 {
        1.0 / (self.values.len() as f64 * self.step)
    }

    /// Unpadded delay resolution `1/(M·step)`, seconds.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / (self.points as f64 * self.step)
    }

    pub fn depth_spacing(&self) -> f64 {
        SPEED_OF_LIGHT * self.delay_spacing() / 2.0
    }

    pub fn depth_resolution(&self) -> f64 {
        SPEED_OF_LIGHT * self.delay_resolution() / 2.0
    }

    /// Optical depth of each τ ≥ 0 bin, meters.
    pub fn depth_axis(&self) -> Vec<f64> {
        let dz = self.depth_spacing();
        (0..self.positive_len()).map(|m| m as f64 * dz).collect()
    }

    pub fn delay_axis(&self) -> Vec<f64> {
        let dt = self.delay_spacing();
        (0..self.positive_len()).map(|m| m as f64 * dt).collect()
    }
}

/// Windowed, zero-padded inverse DFT of the power trace, normalized so the
/// τ = 0 bin is the window-weighted mean of the trace.
pub fn depth_spectrum(trace: &PowerTrace, params: &SpectralParams) -> Result<DepthSpectrum> {
    params.validate()?;
    let p = trace.power();
    if p.is_empty() {
        return Err(Error::EmptyTrace);
    }
    let m = p.len();
    let w = params.window.coefficients(m);
    let gain: f64 = w.iter().sum();
    let mean = w.iter().zip(p).map(|(w, p)| w * p).sum::<f64>() / gain;
    let centre = if params.isolate_dc { mean } else { 0.0 };

    let n = m * params.pad_factor;
    let mut buf = vec![Complex64::new(0.0, 0.0); n];
    for (k, (w, p)) in w.iter().zip(p).enumerate() {
        buf[k] = Complex64::new(w * (p - centre), 0.0);
    }
    FftPlanner::new().plan_fft_inverse(n).process(&mut buf);
    let scale = 1.0 / gain;
    for z in buf.iter_mut() {
        *z *= scale;
    }
    if params.isolate_dc {
        buf[0] = Complex64::new(mean, 0.0);
    }
    Ok(DepthSpectrum {
        values: buf,
        step: trace.grid().step(),
        points: m,
        params: *params,
    })
}

/// Co-polarized (`eta = None`) or cross-polarized power of a layered stack.
///
/// The standoff phase is common to every echo and cancels in `|·|²`.
pub fn synthesize_power(
    stack: &LayerStack,
    grid: &FrequencyGrid,
    eta: Option<PolarizationAngle>,
) -> Result<PowerTrace> {
    let p = grid
        .frequencies()
        .map(|f| {
            let r = match eta {
                None => equivalent_reflection(stack, f)?,
                Some(eta) => cross_reflection(stack, f, eta)?,
            };
            Ok(r.norm_sqr())
        })
        .collect::<Result<Vec<_>>>()?;
    PowerTrace::new(*grid, p)
}

/// One point scatterer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScatterPoint {
    /// Range from the transceiver, meters.
    pub z: f64,
    pub amplitude: Complex64,
    /// Polarimetric signature; the cross-polarized amplitude at η is
    /// `amplitude · v′ᵀ J h′`.
    pub jones: Option<ScatteringMatrix>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PointScene {
    points: Vec<ScatterPoint>,
}

impl PointScene {
    pub fn new(points: Vec<ScatterPoint>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidScene(
                "point scene needs at least one point".into(),
            ));
        }
        if points.iter().any(|p| !p.z.is_finite()) {
            return Err(Error::InvalidScene("point ranges must be finite".into()));
        }
        if points.windows(2).any(|w| w[1].z <= w[0].z) {
            return Err(Error::InvalidScene(
                "point ranges must be strictly increasing".into(),
            ));
        }
        Ok(Self { points })
    }

    /// Points without polarimetric signatures, from `(z, amplitude)` pairs.
    pub fn from_pairs(pairs: &[(f64, Complex64)]) -> Result<Self> {
        Self::new(
            pairs
                .iter()
                .map(|&(z, amplitude)| ScatterPoint {
                    z,
                    amplitude,
                    jones: None,
                })
                .collect(),
        )
    }

    pub fn points(&self) -> &[ScatterPoint] {
        &self.points
    }

    fn amplitudes(&self, eta: Option<PolarizationAngle>) -> Result<Vec<Complex64>> {
        self.points
            .iter()
            .map(|p| match eta {
                None => Ok(p.amplitude),
                Some(eta) => p
                    .jones
                    .map(|j| p.amplitude * cross_pol_amplitude(&j, eta))
                    .ok_or_else(|| {
                        Error::ModelIncomplete(
                            "cross-polarized evaluation needs a Jones matrix on every point".into(),
                        )
                    }),
            })
            .collect()
    }

    /// Same scene with every Jones matrix rotated by `theta`.
    pub fn rotated(&self, theta: f64) -> Self {
        let points = self
            .points
            .iter()
            .map(|p| ScatterPoint {
                jones: p
                    .jones
                    .map(|j| crate::polarimetry::rotate_target(&j, theta)),
                ..*p
            })
            .collect();
        Self { points }
    }
}

fn point_power(
    scene: &PointScene,
    grid: &FrequencyGrid,
    eta: Option<PolarizationAngle>,
) -> Result<PowerTrace> {
    let amps = scene.amplitudes(eta)?;
    let p = grid
        .frequencies()
        .map(|f| {
            let k = 4.0 * PI * f / SPEED_OF_LIGHT;
            scene
                .points
                .iter()
                .zip(&amps)
                .map(|(pt, a)| a * Complex64::from_polar(1.0, -k * pt.z))
                .sum::<Complex64>()
                .norm_sqr()
        })
        .collect();
    PowerTrace::new(*grid, p)
}

/// `p(f) = |Σ aᵢ exp(−j4πf zᵢ/c)|²`.
pub fn synthesize_point_power(scene: &PointScene, grid: &FrequencyGrid) -> Result<PowerTrace> {
    point_power(scene, grid, None)
}

pub fn synthesize_point_cross_power(
    scene: &PointScene,
    grid: &FrequencyGrid,
    eta: PolarizationAngle,
) -> Result<PowerTrace> {
    point_power(scene, grid, Some(eta))
}

/// One δ-line of an analytic depth spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeltaLine {
    /// Optical (layered) or geometric (point) separation, meters.
    pub depth: f64,
    pub weight: Complex64,
}

/// Depths closer than this are merged into one line.
const LINE_MERGE_TOL: f64 = 1e-12;

/// τ = 0 line with `Σ|qᵢ|²`, then `qᵢ*·qⱼ` at `depth[j] − depth[i]` for `i < j`.
fn autocorrelation_lines(q: &[Complex64], depth: &[f64]) -> Vec<DeltaLine> {
    let mut lines = vec![DeltaLine {
        depth: 0.0,
        weight: q.iter().map(|z| z.norm_sqr()).sum::<f64>().into(),
    }];
    let mut pairs = Vec::new();
    for i in 0..q.len() {
        for j in i + 1..q.len() {
            pairs.push(DeltaLine {
                depth: depth[j] - depth[i],
                weight: q[i].conj() * q[j],
            });
        }
    }
    pairs.sort_by(|a, b| a.depth.total_cmp(&b.depth));
    for line in pairs {
        match lines.last_mut() {
            Some(last) if (line.depth - last.depth).abs() <= LINE_MERGE_TOL => {
                last.weight += line.weight
            }
            _ => lines.push(line),
        }
    }
    lines
}

/// δ-line prediction for a layered stack (co-polarized when `eta` is `None`).
///
/// Only valid when interface amplitudes do not vary over frequency, i.e. for
/// stacks without lossy finite layers.
pub fn analytic_depth_spectrum(
    stack: &LayerStack,
    eta: Option<PolarizationAngle>,
) -> Result<Vec<DeltaLine>> {
    if !stack.is_lossless() {
        return Err(Error::AnalyticModelInapplicable(
            "lossy layers make the interface amplitudes frequency dependent".into(),
        ));
    }
    // any frequency will do once the layers are lossless
    let f = 1e9;
    let q = match eta {
        None => interface_chain(stack, f)?.q,
        Some(eta) => cross_interface_chain(stack, f, eta)?.q,
    };
    Ok(autocorrelation_lines(&q, &stack.interface_depths()))
}

/// δ-line prediction for a point scene, at geometric separations.
pub fn analytic_point_spectrum(scene: &PointScene) -> Vec<DeltaLine> {
    let q: Vec<_> = scene.points.iter().map(|p| p.amplitude).collect();
    let z0 = scene.points[0].z;
    let depth: Vec<_> = scene.points.iter().map(|p| p.z - z0).collect();
    autocorrelation_lines(&q, &depth)
}

pub fn analytic_point_cross_spectrum(
    scene: &PointScene,
    eta: PolarizationAngle,
) -> Result<Vec<DeltaLine>> {
    let q = scene.amplitudes(Some(eta))?;
    let z0 = scene.points[0].z;
    let depth: Vec<_> = scene.points.iter().map(|p| p.z - z0).collect();
    Ok(autocorrelation_lines(&q, &depth))
}

/// Peak picking settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PeakParams {
    /// Minimum magnitude relative to the τ = 0 bin.
    pub min_rel_magnitude: f64,
    /// Peaks closer to τ = 0 than this many unpadded resolution cells are ignored.
    pub exclusion_cells: f64,
}

impl Default for PeakParams {
    fn default() -> Self {
        Self {
            min_rel_magnitude: 0.1,
            exclusion_cells: 1.0,
        }
    }
}

impl PeakParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.min_rel_magnitude > 0.0 && self.min_rel_magnitude < 1.0) {
            return Err(Error::Config {
                path: "spectral.peak_threshold".into(),
                message: format!(
                    "relative threshold must lie in (0, 1), got {}",
                    self.min_rel_magnitude
                ),
            });
        }
        if !(self.exclusion_cells.is_finite() && self.exclusion_cells >= 0.0) {
            return Err(Error::Config {
                path: "spectral.exclusion".into(),
                message: "exclusion must be a non-negative number of cells".into(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Peak {
    /// Optical depth, meters.
    pub depth: f64,
    pub magnitude: f64,
    pub prominence: f64,
}

pub type PeakList = Vec<Peak>;

/// Local maxima of a τ ≥ 0 magnitude profile, with parabolic sub-bin refinement.
///
/// `bins_per_cell` converts the exclusion zone from resolution cells to bins
/// (it is the zero-padding factor).
pub fn find_peaks_in(
    mags: &[f64],
    depth_spacing: f64,
    bins_per_cell: f64,
    params: &PeakParams,
) -> PeakList {
    let Some(&reference) = mags.first() else {
        return Vec::new();
    };
    if reference.is_nan() || reference <= 0.0 || mags.len() < 3 {
        return Vec::new();
    }
    let floor = params.min_rel_magnitude * reference;
    let first = params.exclusion_cells * bins_per_cell;
    let mut peaks = Vec::new();
    for m in 1..mags.len() - 1 {
        let (l, y, r) = (mags[m - 1], mags[m], mags[m + 1]);
        if !(y > l && y >= r && y >= floor && m as f64 > first) {
            continue;
        }
        let curvature = l - 2.0 * y + r;
        let offset = if curvature < 0.0 {
            (0.5 * (l - r) / curvature).clamp(-0.5, 0.5)
        } else {
            0.0
        };
        let height = y - 0.25 * (l - r) * offset;
        peaks.push(Peak {
            depth: (m as f64 + offset) * depth_spacing,
            magnitude: height,
            prominence: prominence(mags, m),
        });
    }
    peaks
}

fn prominence(mags: &[f64], m: usize) -> f64 {
    let y = mags[m];
    let mut left = y;
    for &v in mags[..m].iter().rev() {
        if v > y {
            break;
        }
        left = left.min(v);
    }
    let mut right = y;
    for &v in &mags[m + 1..] {
        if v > y {
            break;
        }
        right = right.min(v);
    }
    y - left.max(right)
}

pub fn find_peaks(ds: &DepthSpectrum, params: &PeakParams) -> PeakList {
    find_peaks_in(
        &ds.magnitudes(),
        ds.depth_spacing(),
        ds.params().pad_factor as f64,
        params,
    )
}
