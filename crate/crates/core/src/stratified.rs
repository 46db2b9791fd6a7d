//! Normal-incidence single-reflection model of a layered medium.
//!
//! Media are numbered front to back: the front half-space, the finite layers
//! in order, then the back half-space. Interface `k` (zero based) separates
//! medium `k` from medium `k + 1`. Each interface contributes one echo whose
//! amplitude is its reflection coefficient, scaled by the two-way
//! transmission through every interface in front of it and by the round-trip
//! attenuation through the layers it sits behind. Multiple bounces inside a
//! layer are ignored.
//!
//! Permittivities follow the `ε′ − jε″` convention with `ε″ ≥ 0`, and square
//! roots use the principal branch.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::polarimetry::{cross_pol_amplitude, rotate_target, PolarizationAngle, ScatteringMatrix};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Complex relative permittivity stored as `ε′ − jε″`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "[f64; 2]", into = "[f64; 2]")]
pub struct Permittivity(Complex64);

impl Permittivity {
    pub const VACUUM: Self = Self(Complex64::new(1.0, 0.0));

    /// `real` is ε′ (> 0), `loss` is ε″ (≥ 0).
    pub fn new(real: f64, loss: f64) -> Result<Self> {
        if !(real.is_finite() && real > 0.0) {
            return Err(Error::InvalidMedium(format!(
                "real permittivity must be positive, got {real}"
            )));
        }
        if !(loss.is_finite() && loss >= 0.0) {
            return Err(Error::InvalidMedium(format!(
                "permittivity loss must be non-negative, got {loss}"
            )));
        }
        Ok(Self(Complex64::new(real, -loss)))
    }

    pub fn lossless(real: f64) -> Result<Self> {
        Self::new(real, 0.0)
    }

    pub fn value(self) -> Complex64 {
        self.0
    }

    pub fn real(self) -> f64 {
        self.0.re
    }

    pub fn loss(self) -> f64 {
        -self.0.im
    }

    /// Principal square root (refractive index for μ = 1).
    pub fn sqrt(self) -> Complex64 {
        self.0.sqrt()
    }
}

impl TryFrom<[f64; 2]> for Permittivity {
    type Error = Error;

    fn try_from(v: [f64; 2]) -> Result<Self> {
        Self::new(v[0], v[1])
    }
}

impl From<Permittivity> for [f64; 2] {
    fn from(p: Permittivity) -> Self {
        [p.real(), p.loss()]
    }
}

/// A finite layer.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Layer {
    pub epsilon: Permittivity,
    /// Relative permeability, only used in the propagation constant.
    pub mu: f64,
    /// Geometric thickness in meters.
    pub thickness: f64,
}

impl Layer {
    pub fn new(epsilon: Permittivity, thickness: f64) -> Result<Self> {
        Self::with_mu(epsilon, 1.0, thickness)
    }

    pub fn with_mu(epsilon: Permittivity, mu: f64, thickness: f64) -> Result<Self> {
        if !(thickness.is_finite() && thickness > 0.0) {
            return Err(Error::InvalidMedium(format!(
                "layer thickness must be positive, got {thickness}"
            )));
        }
        if !(mu.is_finite() && mu > 0.0) {
            return Err(Error::InvalidMedium(format!(
                "relative permeability must be positive, got {mu}"
            )));
        }
        Ok(Self {
            epsilon,
            mu,
            thickness,
        })
    }

    fn index(&self) -> Complex64 {
        (self.epsilon.value() * self.mu).sqrt()
    }
}

/// Ordered description of a layered target.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    front: Permittivity,
    layers: Vec<Layer>,
    back: Permittivity,
    standoff: f64,
    jones: Option<Vec<ScatteringMatrix>>,
}

impl LayerStack {
    pub fn new(front: Permittivity, layers: Vec<Layer>, back: Permittivity) -> Self {
        Self {
            front,
            layers,
            back,
            standoff: 0.0,
            jones: None,
        }
    }

    /// Vacuum in front of a bare half-space.
    pub fn half_space(back: Permittivity) -> Self {
        Self::new(Permittivity::VACUUM, Vec::new(), back)
    }

    pub fn with_standoff(mut self, z0: f64) -> Result<Self> {
        if !(z0.is_finite() && z0 >= 0.0) {
            return Err(Error::InvalidScene(format!(
                "standoff must be non-negative, got {z0}"
            )));
        }
        self.standoff = z0;
        Ok(self)
    }

    /// Attaches one Jones reflection matrix per interface.
    pub fn with_jones(mut self, jones: Vec<ScatteringMatrix>) -> Result<Self> {
        if jones.len() != self.interface_count() {
            return Err(Error::InvalidScene(format!(
                "{} Jones matrices supplied for {} interfaces",
                jones.len(),
                self.interface_count()
            )));
        }
        self.jones = Some(jones);
        Ok(self)
    }

    /// Jones matrices `r_k · I` from the co-polarized Fresnel coefficients, i.e.
    /// a stack without any cross-polarizing mechanism.
    pub fn with_isotropic_jones(self) -> Result<Self> {
        let jones = (0..self.interface_count())
            .map(|k| {
                let (a, b) = self.interface_media(k);
                fresnel(a.value(), b.value()).map(|(r, _)| ScatteringMatrix::diagonal(r, r))
            })
            .collect::<Result<Vec<_>>>()?;
        self.with_jones(jones)
    }

    pub fn front(&self) -> Permittivity {
        self.front
    }

    pub fn back(&self) -> Permittivity {
        self.back
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn standoff(&self) -> f64 {
        self.standoff
    }

    pub fn jones(&self) -> Option<&[ScatteringMatrix]> {
        self.jones.as_deref()
    }

    pub fn interface_count(&self) -> usize {
        self.layers.len() + 1
    }

    fn medium(&self, k: usize) -> Permittivity {
        if k == 0 {
            self.front
        } else if k <= self.layers.len() {
            self.layers[k - 1].epsilon
        } else {
            self.back
        }
    }

    fn interface_media(&self, k: usize) -> (Permittivity, Permittivity) {
        (self.medium(k), self.medium(k + 1))
    }

    /// Same stack with every Jones matrix rotated by `theta` about the line of
    /// sight.
    pub fn rotated(&self, theta: f64) -> Self {
        let mut out = self.clone();
        if let Some(j) = out.jones.as_mut() {
            for m in j.iter_mut() {
                *m = rotate_target(m, theta);
            }
        }
        out
    }

    /// Same stack with all Jones matrices multiplied by `gain`.
    pub fn with_jones_gain(&self, gain: f64) -> Self {
        let mut out = self.clone();
        if let Some(j) = out.jones.as_mut() {
            for m in j.iter_mut() {
                *m = m.scaled(gain.into());
            }
        }
        out
    }

    /// True when no finite layer attenuates, so every interface amplitude is
    /// independent of frequency.
    pub fn is_lossless(&self) -> bool {
        self.layers.iter().all(|l| l.epsilon.loss() == 0.0)
    }

    /// Cumulative optical depth (meters) of each interface below the first.
    pub fn interface_depths(&self) -> Vec<f64> {
        let mut depth = 0.0;
        let mut out = Vec::with_capacity(self.interface_count());
        out.push(0.0);
        for layer in &self.layers {
            depth += optical_thickness(layer);
            out.push(depth);
        }
        out
    }
}

/// Normal-incidence field reflection and transmission from medium `i` into
/// medium `j`.
///
/// `r = (√εᵢ − √εⱼ)/(√εᵢ + √εⱼ)`, `t = 2√εᵢ/(√εᵢ + √εⱼ) = 1 + r`.
pub fn fresnel(eps_i: Complex64, eps_j: Complex64) -> Result<(Complex64, Complex64)> {
    for e in [eps_i, eps_j] {
        if !(e.re > 0.0 && e.re.is_finite() && e.im.is_finite()) {
            return Err(Error::InvalidMedium(format!(
                "permittivity {e} must have a positive real part"
            )));
        }
    }
    let ni = eps_i.sqrt();
    let nj = eps_j.sqrt();
    let sum = ni + nj;
    Ok(((ni - nj) / sum, 2.0 * ni / sum))
}

/// Phase and attenuation constants of a plane wave in a medium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Wavenumber {
    /// rad/m
    pub beta: f64,
    /// Np/m, so the one-way amplitude decays as `exp(−α·d)`.
    pub alpha: f64,
}

pub fn wavenumber(eps: Complex64, mu: f64, f: f64) -> Result<Wavenumber> {
    if !(f.is_finite() && f > 0.0) {
        return Err(Error::InvalidFrequency(f));
    }
    let n = (eps * mu).sqrt();
    let k0 = 2.0 * std::f64::consts::PI * f / SPEED_OF_LIGHT;
    Ok(Wavenumber {
        beta: k0 * n.re,
        alpha: k0 * n.im.abs(),
    })
}

/// Geometric thickness scaled by the real part of the refractive index.
pub fn optical_thickness(layer: &Layer) -> f64 {
    layer.index().re * layer.thickness
}

/// Interface echo amplitudes at one frequency.
#[derive(Debug, Clone, PartialEq)]
pub struct InterfaceChain {
    pub q: Vec<Complex64>,
}

/// Per-interface factors shared by the co- and cross-polarized chains:
/// two-way transmission through the interfaces in front, two-way attenuation,
/// and round-trip phase `Σ 2βd`.
struct PathFactors {
    transmission: Vec<Complex64>,
    attenuation: Vec<f64>,
    phase: Vec<f64>,
}

fn path_factors(stack: &LayerStack, f: f64) -> Result<PathFactors> {
    let n = stack.interface_count();
    let mut transmission = Vec::with_capacity(n);
    let mut attenuation = Vec::with_capacity(n);
    let mut phase = Vec::with_capacity(n);
    let mut t_acc = Complex64::new(1.0, 0.0);
    let mut alpha_d = 0.0;
    let mut beta_d = 0.0;
    for k in 0..n {
        if k > 0 {
            let (a, b) = stack.interface_media(k - 1);
            let (_, t_fwd) = fresnel(a.value(), b.value())?;
            let (_, t_back) = fresnel(b.value(), a.value())?;
            t_acc *= t_fwd * t_back;
            let layer = &stack.layers[k - 1];
            let w = wavenumber(layer.epsilon.value(), layer.mu, f)?;
            alpha_d += w.alpha * layer.thickness;
            beta_d += w.beta * layer.thickness;
        }
        transmission.push(t_acc);
        attenuation.push((-2.0 * alpha_d).exp());
        phase.push(2.0 * beta_d);
    }
    Ok(PathFactors {
        transmission,
        attenuation,
        phase,
    })
}

pub fn interface_chain(stack: &LayerStack, f: f64) -> Result<InterfaceChain> {
    let paths = path_factors(stack, f)?;
    let q = (0..stack.interface_count())
        .map(|k| {
            let (a, b) = stack.interface_media(k);
            let (r, _) = fresnel(a.value(), b.value())?;
            Ok(r * paths.transmission[k] * paths.attenuation[k])
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(InterfaceChain { q })
}

/// Cross-polarized interface amplitudes at one frequency and angle.
pub fn cross_interface_chain(
    stack: &LayerStack,
    f: f64,
    eta: PolarizationAngle,
) -> Result<InterfaceChain> {
    let jones = stack.jones().ok_or_else(|| {
        Error::ModelIncomplete(
            "cross-polarized evaluation needs per-interface Jones matrices".into(),
        )
    })?;
    let paths = path_factors(stack, f)?;
    let q = jones
        .iter()
        .enumerate()
        .map(|(k, j)| cross_pol_amplitude(j, eta) * paths.transmission[k] * paths.attenuation[k])
        .collect();
    Ok(InterfaceChain { q })
}

fn sum_with_phase(q: &[Complex64], phase: &[f64]) -> Complex64 {
    q.iter()
        .zip(phase)
        .map(|(q, &ph)| q * Complex64::from_polar(1.0, -ph))
        .sum()
}

/// Equivalent reflection coefficient `R = Σ Qₖ exp(−j Σ 2βd)`.
pub fn equivalent_reflection(stack: &LayerStack, f: f64) -> Result<Complex64> {
    let chain = interface_chain(stack, f)?;
    let paths = path_factors(stack, f)?;
    Ok(sum_with_phase(&chain.q, &paths.phase))
}

/// Cross-polarized counterpart of [`equivalent_reflection`].
///
/// Cross-coupling happens only at the reflecting interface; transmission on
/// the way in and out uses the co-polarized Fresnel coefficients.
pub fn cross_reflection(stack: &LayerStack, f: f64, eta: PolarizationAngle) -> Result<Complex64> {
    let chain = cross_interface_chain(stack, f, eta)?;
    let paths = path_factors(stack, f)?;
    Ok(sum_with_phase(&chain.q, &paths.phase))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn eps(re: f64) -> Permittivity {
        Permittivity::lossless(re).unwrap()
    }

    fn slab() -> LayerStack {
        LayerStack::new(
            Permittivity::VACUUM,
            vec![Layer::new(eps(2.25), 0.010).unwrap()],
            eps(30.0),
        )
    }

    /// Frequency at which the slab's round-trip phase is `cycles · 2π`.
    fn slab_freq(half_cycles: f64) -> f64 {
        half_cycles * SPEED_OF_LIGHT / (2.0 * 2.0 * 1.5 * 0.010)
    }

    #[test]
    fn fresnel_examples() {
        let (r, t) = fresnel(4.0.into(), 4.0.into()).unwrap();
        assert_eq!((r, t), (0.0.into(), 1.0.into()));

        let (r, t) = fresnel(1.0.into(), 4.0.into()).unwrap();
        assert!((r - Complex64::from(-1.0 / 3.0)).norm() < 1e-15);
        assert!((t - Complex64::from(2.0 / 3.0)).norm() < 1e-15);

        let (r, t) = fresnel(1.0.into(), 30.0.into()).unwrap();
        assert!((r.re - (-0.6912258224102302)).abs() < 1e-12);
        assert!((t - (1.0 + r)).norm() < 1e-15);
    }

    #[test]
    fn fresnel_rejects_bad_medium() {
        assert!(matches!(
            fresnel(Complex64::new(-1.0, 0.0), 1.0.into()),
            Err(Error::InvalidMedium(_))
        ));
        assert!(Permittivity::new(0.0, 0.0).is_err());
        assert!(Permittivity::new(2.0, -0.1).is_err());
        assert!(Layer::new(eps(2.0), 0.0).is_err());
    }

    #[test]
    fn wavenumber_examples() {
        let k0 = 2.0 * PI * 1e11 / SPEED_OF_LIGHT;
        let w = wavenumber(1.0.into(), 1.0, 1e11).unwrap();
        assert!((w.beta - k0).abs() < 1e-9);
        assert_eq!(w.alpha, 0.0);

        let w = wavenumber(2.25.into(), 1.0, 1e11).unwrap();
        assert!((w.beta - 1.5 * k0).abs() < 1e-9);

        // principal root of 2.25 − j0.09, checked against a polar-form
        // evaluation: √|ε|·e^{j·arg(ε)/2}
        let e = Permittivity::new(2.25, 0.09).unwrap().value();
        let root = Complex64::from_polar(e.norm().sqrt(), e.arg() / 2.0);
        let w = wavenumber(e, 1.0, 1e11).unwrap();
        assert!((w.beta - k0 * root.re).abs() < 1e-9);
        assert!((w.alpha - k0 * root.im.abs()).abs() < 1e-9);
        assert!((w.beta - 3144.3959723211615).abs() < 1e-6);
        assert!((w.alpha - 62.86278438267727).abs() < 1e-6);

        assert!(matches!(
            wavenumber(1.0.into(), 1.0, 0.0),
            Err(Error::InvalidFrequency(_))
        ));
    }

    #[test]
    fn chain_examples() {
        let q = interface_chain(&slab(), 1e11).unwrap().q;
        assert_eq!(q.len(), 2);
        assert!((q[0] - Complex64::from(-0.2)).norm() < 1e-15);
        let r23 = (1.5 - 30f64.sqrt()) / (1.5 + 30f64.sqrt());
        assert!((q[1] - Complex64::from(r23 * 0.8 * 1.2)).norm() < 1e-14);
        assert!((q[1].re - (-0.5472284808595033)).abs() < 1e-12);

        let bare = LayerStack::half_space(eps(30.0));
        let q = interface_chain(&bare, 1e11).unwrap().q;
        assert_eq!(q.len(), 1);
    }

    #[test]
    fn chain_attenuation() {
        let f = 1e11;
        let k0 = 2.0 * PI * f / SPEED_OF_LIGHT;
        // pick ε″ so that α·d = 0.5 Np: Im√ε = 0.5/(k0·d)
        let d = 0.010;
        let im = 0.5 / (k0 * d);
        let n = Complex64::new(1.5, -im);
        let e2 = n * n;
        let lossy_eps = Permittivity::new(e2.re, -e2.im).unwrap();
        let wn = wavenumber(lossy_eps.value(), 1.0, f).unwrap();
        assert!((wn.alpha * d - 0.5).abs() < 1e-12);
        let lossy = LayerStack::new(
            Permittivity::VACUUM,
            vec![Layer::new(lossy_eps, d).unwrap()],
            eps(30.0),
        );
        let q = interface_chain(&lossy, f).unwrap().q;
        let (_, t12) = fresnel(1.0.into(), lossy_eps.value()).unwrap();
        let (_, t21) = fresnel(lossy_eps.value(), 1.0.into()).unwrap();
        let (r23, _) = fresnel(lossy_eps.value(), 30.0.into()).unwrap();
        let unattenuated = (r23 * t12 * t21).norm();
        assert!((q[1].norm() / unattenuated - (-1.0f64).exp()).abs() < 1e-12);

        let lossless = interface_chain(&slab(), f).unwrap().q;
        assert!((q[1].norm() / lossless[1].norm() - (-1.0f64).exp()).abs() < 0.02);
    }

    #[test]
    fn equivalent_reflection_examples() {
        let r = equivalent_reflection(&slab(), slab_freq(20.0)).unwrap();
        assert!((r - Complex64::from(-0.7472284808595033)).norm() < 1e-12);
        let r = equivalent_reflection(&slab(), slab_freq(21.0)).unwrap();
        assert!((r - Complex64::from(0.34722848085950325)).norm() < 1e-12);

        let bare = LayerStack::half_space(eps(30.0));
        for f in [75e9, 92.5e9, 110e9] {
            let r = equivalent_reflection(&bare, f).unwrap();
            assert!((r.re - (-0.6912258224102302)).abs() < 1e-12);
        }
    }

    #[test]
    fn optical_thickness_examples() {
        assert!((optical_thickness(&Layer::new(eps(1.0), 0.005).unwrap()) - 0.005).abs() < 1e-15);
        assert!((optical_thickness(&Layer::new(eps(2.25), 0.010).unwrap()) - 0.015).abs() < 1e-15);
        assert!((optical_thickness(&Layer::new(eps(4.0), 0.0045).unwrap()) - 0.009).abs() < 1e-15);
    }

    #[test]
    fn lossless_chain_is_frequency_independent() {
        let stack = LayerStack::new(
            Permittivity::VACUUM,
            vec![
                Layer::new(eps(2.25), 0.010).unwrap(),
                Layer::new(eps(4.0), 0.0045).unwrap(),
            ],
            eps(30.0),
        );
        let a = interface_chain(&stack, 75e9).unwrap().q;
        let b = interface_chain(&stack, 110e9).unwrap().q;
        for (x, y) in a.iter().zip(&b) {
            assert!((x - y).norm() < 1e-14);
        }
    }

    #[test]
    fn reflection_matches_independent_sum_and_bound() {
        let stack = LayerStack::new(
            Permittivity::VACUUM,
            vec![
                Layer::new(Permittivity::new(2.6, 0.05).unwrap(), 0.007).unwrap(),
                Layer::new(eps(4.0), 0.0045).unwrap(),
            ],
            Permittivity::new(30.0, 12.0).unwrap(),
        );
        for k in 0..50 {
            let f = 75e9 + k as f64 * 0.7e9;
            let q = interface_chain(&stack, f).unwrap().q;
            let mut expect = q[0];
            let mut phase = 0.0;
            for (i, layer) in stack.layers().iter().enumerate() {
                let n = (layer.epsilon.value() * layer.mu).sqrt();
                phase += 2.0 * (2.0 * PI * f / SPEED_OF_LIGHT) * n.re * layer.thickness;
                expect += q[i + 1] * Complex64::new(phase.cos(), -phase.sin());
            }
            let r = equivalent_reflection(&stack, f).unwrap();
            assert!((r - expect).norm() < 1e-12);
            assert!(r.norm() <= q.iter().map(|z| z.norm()).sum::<f64>() + 1e-15);
            assert!(q[0].norm() <= 1.0);
        }
    }

    #[test]
    fn cross_reflection_isotropic_is_zero() {
        let stack = slab().with_isotropic_jones().unwrap();
        for k in 0..19 {
            let eta = PolarizationAngle::from_degrees(10.0 * k as f64);
            for f in [75e9, 100e9] {
                assert!(cross_reflection(&stack, f, eta).unwrap().norm() < 1e-15);
            }
        }
    }

    #[test]
    fn cross_reflection_single_dihedral() {
        let stack = LayerStack::half_space(eps(30.0))
            .with_jones(vec![ScatteringMatrix::dihedral()])
            .unwrap();
        for k in 0..=36 {
            let e = k as f64 * PI / 36.0;
            let r = cross_reflection(&stack, 90e9, PolarizationAngle::from_radians(e)).unwrap();
            assert!((r.norm_sqr() - (2.0 * e).sin().powi(2)).abs() < 1e-14);
        }
    }

    #[test]
    fn cross_reflection_two_interfaces_hand_sum() {
        let j1 = ScatteringMatrix::from_real(0.4, 0.1, -0.05, -0.3);
        let j2 = ScatteringMatrix::new(
            Complex64::new(0.2, 0.1),
            Complex64::new(0.0, 0.3),
            Complex64::new(0.15, 0.0),
            Complex64::new(-0.5, 0.05),
        )
        .unwrap();
        let stack = slab().with_jones(vec![j1, j2]).unwrap();
        let f = 93.3e9;
        let e: f64 = 0.61;
        let (s, c) = e.sin_cos();
        // v′ᵀ J h′ written out by hand
        let xamp = |j: &ScatteringMatrix| -s * (j.hh * c + j.hv * s) + c * (j.vh * c + j.vv * s);
        let t = 0.8 * 1.2;
        let phase = 2.0 * (2.0 * PI * f / SPEED_OF_LIGHT) * 1.5 * 0.010;
        let expect = xamp(&j1) + xamp(&j2) * t * Complex64::new(phase.cos(), -phase.sin());
        let got = cross_reflection(&stack, f, PolarizationAngle::from_radians(e)).unwrap();
        assert!((got.norm_sqr() - expect.norm_sqr()).abs() < 1e-12);
        assert!((got - expect).norm() < 1e-12);

        // period π
        let e2 = PolarizationAngle::from_radians(e + PI);
        let again = cross_reflection(&stack, f, e2).unwrap();
        assert!((again - got).norm() < 1e-12);
    }

    #[test]
    fn cross_reflection_needs_jones() {
        assert!(matches!(
            cross_reflection(&slab(), 1e11, PolarizationAngle::from_radians(0.0)),
            Err(Error::ModelIncomplete(_))
        ));
        assert!(slab()
            .with_jones(vec![ScatteringMatrix::identity()])
            .is_err());
    }
}
