//! Cross-polarized echo power as a function of the incident linear
//! polarization angle.
//!
//! A target at a fixed aspect is described by its 2×2 scattering matrix in
//! the h–v basis. Illuminating it with a unit linear polarization at angle η
//! and projecting the echo onto the direction orthogonal to the incident one
//! gives the cross-polarized power. That power is a quartic trigonometric form
//! in η, which collapses into a DC level plus one harmonic at 2η and one at
//! 4η:
//!
//! ```text
//! P(η) = A₂η·cos(2η + B₂η) + A₄η·cos(4η + B₄η) + C
//! ```
//!
//! The direct route ([`cross_pol_power_direct`]) and the closed-form route
//! ([`cross_pol_power_closed`]) are computed independently so that each can
//! check the other.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Complex 2×2 polarization scattering matrix in the h–v basis.
///
/// No reciprocity is assumed: `hv` and `vh` are independent.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScatteringMatrix {
    pub hh: Complex64,
    pub hv: Complex64,
    pub vh: Complex64,
    pub vv: Complex64,
}

impl ScatteringMatrix {
    /// Builds a matrix from its entries, rejecting non-finite values.
    pub fn new(hh: Complex64, hv: Complex64, vh: Complex64, vv: Complex64) -> Result<Self> {
        let m = Self { hh, hv, vh, vv };
        if m.entries()
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
        {
            Ok(m)
        } else {
            Err(Error::InvalidScene(
                "scattering matrix entries must be finite".into(),
            ))
        }
    }

    pub fn identity() -> Self {
        Self::diagonal(Complex64::new(1.0, 0.0), Complex64::new(1.0, 0.0))
    }

    pub fn diagonal(hh: Complex64, vv: Complex64) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        Self {
            hh,
            hv: zero,
            vh: zero,
            vv,
        }
    }

    /// Real-valued convenience constructor, row major.
    pub fn from_real(hh: f64, hv: f64, vh: f64, vv: f64) -> Self {
        Self {
            hh: hh.into(),
            hv: hv.into(),
            vh: vh.into(),
            vv: vv.into(),
        }
    }

    /// Idealized dihedral (double-bounce) response with its fold line along h.
    pub fn dihedral() -> Self {
        Self::from_real(1.0, 0.0, 0.0, -1.0)
    }

    pub fn scaled(&self, k: Complex64) -> Self {
        Self {
            hh: self.hh * k,
            hv: self.hv * k,
            vh: self.vh * k,
            vv: self.vv * k,
        }
    }

    pub fn entries(&self) -> [Complex64; 4] {
        [self.hh, self.hv, self.vh, self.vv]
    }

    /// Squared Frobenius norm.
    pub fn frobenius_sq(&self) -> f64 {
        self.entries().iter().map(|z| z.norm_sqr()).sum()
    }

    /// True when the matrix is a scalar multiple of the identity to within
    /// `tol` (relative to its largest entry).
    pub fn is_isotropic(&self, tol: f64) -> bool {
        let scale = self
            .entries()
            .iter()
            .map(|z| z.norm())
            .fold(0.0_f64, f64::max)
            .max(f64::MIN_POSITIVE);
        self.hv.norm() <= tol * scale
            && self.vh.norm() <= tol * scale
            && (self.hh - self.vv).norm() <= tol * scale
    }
}

/// Incident linear polarization angle, reduced to `[0, π)`.
///
/// Cross-polarized power has period π in η, so the reduction loses nothing.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct PolarizationAngle(f64);

impl PolarizationAngle {
    pub fn from_radians(eta: f64) -> Self {
        let mut r = eta.rem_euclid(PI);
        // rem_euclid can round up to exactly π for tiny negative inputs
        if r >= PI {
            r = 0.0;
        }
        Self(r)
    }

    pub fn from_degrees(deg: f64) -> Self {
        Self::from_radians(deg.to_radians())
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    pub fn degrees(self) -> f64 {
        self.0.to_degrees()
    }

    /// Unit incident field `(cos η, sin η)`.
    fn incident(self) -> (f64, f64) {
        let (s, c) = self.0.sin_cos();
        (c, s)
    }
}

/// Coefficients of the quartic form
/// `cos4·c⁴ + cos3_sin1·c³s + cos2_sin2·c²s² + cos1_sin3·cs³ + sin4·s⁴`
/// with `c = cos η`, `s = sin η`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicCoefficients {
    /// `|s_hv|²`
    pub sin4: f64,
    /// `2 Re{s_hv* (s_hh − s_vv)}`
    pub cos1_sin3: f64,
    /// `|s_hh|² + |s_vv|² − 2 Re{s_hv* s_vh} − 2 Re{s_hh* s_vv}`
    pub cos2_sin2: f64,
    /// `2 Re{s_vh* (s_vv − s_hh)}`
    pub cos3_sin1: f64,
    /// `|s_vh|²`
    pub cos4: f64,
}

impl HarmonicCoefficients {
    /// Evaluates the quartic form at `eta`.
    pub fn evaluate(&self, eta: PolarizationAngle) -> f64 {
        let (c, s) = eta.incident();
        self.cos4 * c.powi(4)
            + self.cos3_sin1 * c.powi(3) * s
            + self.cos2_sin2 * c * c * s * s
            + self.cos1_sin3 * c * s.powi(3)
            + self.sin4 * s.powi(4)
    }
}

/// Amplitude/phase form of the cross-polarized power curve.
///
/// Phases lie in `(−π, π]`. A harmonic whose amplitude is negligible next to
/// the DC level reports phase 0.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HarmonicParams {
    /// Amplitude of the 2η harmonic.
    #[serde(rename = "A1")]
    pub amp2: f64,
    /// Phase of the 2η harmonic, radians.
    #[serde(rename = "B1")]
    pub phase2: f64,
    /// Amplitude of the 4η harmonic.
    #[serde(rename = "A2")]
    pub amp4: f64,
    /// Phase of the 4η harmonic, radians.
    #[serde(rename = "B2")]
    pub phase4: f64,
    /// Mean level of the curve.
    #[serde(rename = "C")]
    pub offset: f64,
}

impl HarmonicParams {
    pub const ZERO: Self = Self {
        amp2: 0.0,
        phase2: 0.0,
        amp4: 0.0,
        phase4: 0.0,
        offset: 0.0,
    };

    /// Builds the amplitude/phase form from the Cartesian harmonic weights
    /// `offset + x2·cos2η + y2·sin2η + x4·cos4η + y4·sin4η`.
    pub fn from_cartesian(offset: f64, x2: f64, y2: f64, x4: f64, y4: f64) -> Self {
        let (amp2, phase2) = polar(x2, y2, offset);
        let (amp4, phase4) = polar(x4, y4, offset);
        Self {
            amp2,
            phase2,
            amp4,
            phase4,
            offset,
        }
    }

    /// Largest absolute difference over the five parameters, with phases
    /// compared on the circle. Phases of harmonics with amplitude below
    /// `phase_floor` are not compared.
    pub fn max_abs_diff(&self, other: &Self, phase_floor: f64) -> f64 {
        let mut d = (self.amp2 - other.amp2)
            .abs()
            .max((self.amp4 - other.amp4).abs())
            .max((self.offset - other.offset).abs());
        if self.amp2.max(other.amp2) > phase_floor {
            d = d.max(wrapped_diff(self.phase2, other.phase2));
        }
        if self.amp4.max(other.amp4) > phase_floor {
            d = d.max(wrapped_diff(self.phase4, other.phase4));
        }
        d
    }
}

/// Relative amplitude below which a harmonic phase is reported as 0.
pub const DEGENERATE_AMPLITUDE: f64 = 1e-14;

/// `x·cos φ + y·sin φ = A·cos(φ + B)` with `A = √(x²+y²)`, `B = atan2(−y, x)`.
fn polar(x: f64, y: f64, offset: f64) -> (f64, f64) {
    let amp = x.hypot(y);
    if amp <= DEGENERATE_AMPLITUDE * offset.abs() || amp == 0.0 {
        return (amp, 0.0);
    }
    let mut phase = (-y).atan2(x);
    if phase <= -PI {
        phase += 2.0 * PI;
    }
    (amp, phase)
}

fn wrapped_diff(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(2.0 * PI);
    d.min(2.0 * PI - d)
}

/// Scattered field `S·(cos η, sin η)ᵀ`, returned as `(E_h, E_v)`.
pub fn scatter(s: &ScatteringMatrix, eta: PolarizationAngle) -> (Complex64, Complex64) {
    let (c, sn) = eta.incident();
    (s.hh * c + s.hv * sn, s.vh * c + s.vv * sn)
}

/// Complex echo amplitude orthogonal to the incident polarization.
pub fn cross_pol_amplitude(s: &ScatteringMatrix, eta: PolarizationAngle) -> Complex64 {
    let (c, sn) = eta.incident();
    let (eh, ev) = scatter(s, eta);
    ev * c - eh * sn
}

/// Complex echo amplitude parallel to the incident polarization.
pub fn co_pol_amplitude(s: &ScatteringMatrix, eta: PolarizationAngle) -> Complex64 {
    let (c, sn) = eta.incident();
    let (eh, ev) = scatter(s, eta);
    eh * c + ev * sn
}

/// `|E_v cos η − E_h sin η|²`.
pub fn cross_pol_power_direct(s: &ScatteringMatrix, eta: PolarizationAngle) -> f64 {
    cross_pol_amplitude(s, eta).norm_sqr()
}

pub fn co_pol_power_direct(s: &ScatteringMatrix, eta: PolarizationAngle) -> f64 {
    co_pol_amplitude(s, eta).norm_sqr()
}

pub fn harmonic_coefficients(s: &ScatteringMatrix) -> HarmonicCoefficients {
    HarmonicCoefficients {
        sin4: s.hv.norm_sqr(),
        cos1_sin3: 2.0 * (s.hv.conj() * (s.hh - s.vv)).re,
        cos2_sin2: s.hh.norm_sqr() + s.vv.norm_sqr()
            - 2.0 * ((s.hv.conj() * s.vh).re + (s.hh.conj() * s.vv).re),
        cos3_sin1: 2.0 * (s.vh.conj() * (s.vv - s.hh)).re,
        cos4: s.vh.norm_sqr(),
    }
}

/// Converts the quartic form into DC + 2η + 4η harmonics.
///
/// Phases come from a two-argument arctangent, so the sign of the cosine
/// weight is kept (a lone `arctan` of the ratio would put `diag(1, −1)` at
/// phase 0 instead of π).
pub fn harmonic_params(a: &HarmonicCoefficients) -> HarmonicParams {
    let offset = (3.0 * a.sin4 + 3.0 * a.cos4 + a.cos2_sin2) / 8.0;
    let x2 = (a.cos4 - a.sin4) / 2.0;
    let y2 = (a.cos1_sin3 + a.cos3_sin1) / 4.0;
    let x4 = (a.sin4 + a.cos4 - a.cos2_sin2) / 8.0;
    let y4 = (a.cos3_sin1 - a.cos1_sin3) / 8.0;
    HarmonicParams::from_cartesian(offset, x2, y2, x4, y4)
}

pub fn cross_pol_power_closed(p: &HarmonicParams, eta: PolarizationAngle) -> f64 {
    let e = eta.radians();
    p.amp2 * (2.0 * e + p.phase2).cos() + p.amp4 * (4.0 * e + p.phase4).cos() + p.offset
}

/// Rotates the target by `theta` about the line of sight.
///
/// The result satisfies `P(S′, η) = P(S, η + θ)`, which is realised by
/// `S′ = Rᵀ S R` with `R` the counter-clockwise rotation by `theta`.
pub fn rotate_target(s: &ScatteringMatrix, theta: f64) -> ScatteringMatrix {
    let (sn, c) = theta.sin_cos();
    // S·R
    let a = s.hh * c + s.hv * sn;
    let b = -s.hh * sn + s.hv * c;
    let cc = s.vh * c + s.vv * sn;
    let d = -s.vh * sn + s.vv * c;
    // Rᵀ·(S·R)
    ScatteringMatrix {
        hh: a * c + cc * sn,
        hv: b * c + d * sn,
        vh: -a * sn + cc * c,
        vv: -b * sn + d * c,
    }
}

/// One measured (or simulated) cross-polarized power value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleSample {
    pub eta: PolarizationAngle,
    pub p_cross: f64,
}

impl AngleSample {
    pub fn new(eta: PolarizationAngle, p_cross: f64) -> Result<Self> {
        if !(p_cross.is_finite() && p_cross >= 0.0) {
            return Err(Error::InvalidScene(format!(
                "cross-polarized power must be finite and non-negative, got {p_cross}"
            )));
        }
        Ok(Self { eta, p_cross })
    }
}

/// Relative pivot size under which the harmonic design is treated as rank
/// deficient.
const RANK_TOL: f64 = 1e-10;

/// Least-squares fit of DC + 2η + 4η harmonics to angle samples.
///
/// Needs at least five distinct angles modulo π.
pub fn fit_harmonics(samples: &[AngleSample]) -> Result<HarmonicParams> {
    let mut distinct: Vec<f64> = samples.iter().map(|s| s.eta.radians()).collect();
    distinct.sort_by(f64::total_cmp);
    distinct.dedup_by(|a, b| (*a - *b).abs() < 1e-12);
    // 0 and a value just below π are the same angle on the circle
    if distinct.len() > 1 && PI - distinct[distinct.len() - 1] + distinct[0] < 1e-12 {
        distinct.pop();
    }
    if distinct.len() < 5 {
        return Err(Error::FitUnderdetermined(format!(
            "{} distinct angle(s), need at least 5",
            distinct.len()
        )));
    }

    let n = samples.len();
    let design = DMatrix::from_fn(n, 5, |i, j| {
        let e = samples[i].eta.radians();
        match j {
            0 => 1.0,
            1 => (2.0 * e).cos(),
            2 => (2.0 * e).sin(),
            3 => (4.0 * e).cos(),
            _ => (4.0 * e).sin(),
        }
    });
    let rhs = DVector::from_iterator(n, samples.iter().map(|s| s.p_cross));

    let qr = design.qr();
    let r = qr.r();
    let pivots: Vec<f64> = (0..5).map(|i| r[(i, i)].abs()).collect();
    let largest = pivots.iter().cloned().fold(0.0, f64::max);
    if pivots.iter().any(|&p| p <= RANK_TOL * largest) {
        return Err(Error::FitUnderdetermined(
            "harmonic design matrix is rank deficient".into(),
        ));
    }
    let qtb = qr.q().transpose() * rhs;
    let x = r
        .solve_upper_triangular(&qtb)
        .ok_or_else(|| Error::FitUnderdetermined("singular triangular factor".into()))?;

    Ok(HarmonicParams::from_cartesian(x[0], x[1], x[2], x[3], x[4]))
}
