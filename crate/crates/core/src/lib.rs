//! Wideband polarimetric depth analysis for direct-detection radar.
//!
//! Scenes (layered dielectrics with Jones interfaces, or point scatterers)
//! are swept over incident polarization angle. Each cross-polarized power
//! trace becomes a depth spectrum, the spectra form an angle-depth matrix,
//! and features of that matrix drive a threshold classifier. Measured sweeps
//! enter through [`ingest`]; the `polscan` binary wraps everything in
//! [`cli`].

pub mod cli;
pub mod error;
pub mod fmt;
pub mod ingest;
pub mod padm;
pub mod polarimetry;
pub mod spectral;
pub mod stratified;
pub use error::{Error, ErrorKind, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    mod introduction {}
    #[doc = include_str!("../../../book/src/cross_pol.md")]
    mod cross_pol {}
    #[doc = include_str!("../../../book/src/layered.md")]
    mod layered {}
    #[doc = include_str!("../../../book/src/depth_spectrum.md")]
    mod depth_spectrum {}
    #[doc = include_str!("../../../book/src/padm.md")]
    mod padm {}
    #[doc = include_str!("../../../book/src/measured.md")]
    mod measured {}
    #[doc = include_str!("../../../book/src/cli.md")]
    mod cli {}
}
