//! JSON configuration documents. Degrees, GHz and millimeters at this
//! boundary; radians, Hz and meters inside the library.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::padm::{AngleSweep, Thresholds};
use crate::polarimetry::ScatteringMatrix;
use crate::spectral::{
    FrequencyGrid, PeakParams, PointScene, ScatterPoint, SpectralParams, Window,
};
use crate::stratified::{Layer, LayerStack, Permittivity};

/// Raw config bytes with their SHA-256, plus the directory relative paths
/// resolve against.
#[derive(Debug, Clone)]
pub struct ConfigSource {
    pub bytes: Vec<u8>,
    pub sha256: String,
    pub base_dir: PathBuf,
}

impl ConfigSource {
    pub fn read(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::Config {
            path: path.display().to_string(),
            message: format!("cannot read config: {e}"),
        })?;
        Ok(Self::from_bytes(
            bytes,
            path.parent().unwrap_or(Path::new("")).to_path_buf(),
        ))
    }

    pub fn from_bytes(bytes: Vec<u8>, base_dir: PathBuf) -> Self {
        let sha256 = hex::encode(Sha256::digest(&bytes));
        Self {
            bytes,
            sha256,
            base_dir,
        }
    }

    /// Deserializes with the failing field path in the error.
    pub fn parse<T: DeserializeOwned>(&self) -> Result<T> {
        let de = &mut serde_json::Deserializer::from_slice(&self.bytes);
        let value = serde_path_to_error::deserialize(de).map_err(|e| Error::Config {
            path: e.path().to_string(),
            message: e.inner().to_string(),
        })?;
        Ok(value)
    }

    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.base_dir.join(p)
        }
    }
}

/// Config for `simulate` and `analyze`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub scene: SceneConfig,
    /// Required for synthetic scenes; measured sweeps carry their own grid.
    #[serde(default)]
    pub grid: Option<GridConfig>,
    #[serde(default)]
    pub angles: AngleSweep,
    #[serde(default)]
    pub spectral: SpectralConfig,
    #[serde(default)]
    pub classifier: Thresholds,
    #[serde(default)]
    pub baseline: Option<BaselineConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub f_start_ghz: f64,
    pub f_stop_ghz: f64,
    pub step_ghz: f64,
}

impl GridConfig {
    pub fn to_grid(self) -> Result<FrequencyGrid> {
        FrequencyGrid::from_ghz(self.f_start_ghz, self.f_stop_ghz, self.step_ghz)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum SceneConfig {
    Stratified(StratifiedConfig),
    Points(PointsConfig),
    Measured(MeasuredConfig),
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StratifiedConfig {
    #[serde(default = "vacuum")]
    pub front: Permittivity,
    /// `[ε′, ε″, thickness_mm]`, front to back.
    #[serde(default)]
    pub layers: Vec<[f64; 3]>,
    pub back: Permittivity,
    #[serde(default)]
    pub standoff_m: f64,
    #[serde(default)]
    pub jones: Option<JonesConfig>,
}

fn vacuum() -> Permittivity {
    Permittivity::VACUUM
}

/// Per-interface (or per-point) Jones matrices, or `"isotropic"`.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum JonesConfig {
    Keyword(JonesKeyword),
    List(Vec<ScatteringMatrix>),
}

#[derive(Debug, Clone, Copy, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JonesKeyword {
    Isotropic,
}

impl StratifiedConfig {
    pub fn to_stack(&self) -> Result<LayerStack> {
        let layers = self
            .layers
            .iter()
            .map(|&[re, loss, d_mm]| Layer::new(Permittivity::new(re, loss)?, d_mm * 1e-3))
            .collect::<Result<Vec<_>>>()?;
        let stack =
            LayerStack::new(self.front, layers, self.back).with_standoff(self.standoff_m)?;
        match &self.jones {
            None => Ok(stack),
            Some(JonesConfig::Keyword(JonesKeyword::Isotropic)) => stack.with_isotropic_jones(),
            Some(JonesConfig::List(j)) => stack.with_jones(j.clone()),
        }
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointsConfig {
    /// `[z_m, re, im]` per scatterer.
    pub points: Vec<[f64; 3]>,
    #[serde(default)]
    pub jones: Option<JonesConfig>,
}

impl PointsConfig {
    pub fn to_scene(&self) -> Result<PointScene> {
        let n = self.points.len();
        let jones: Vec<Option<ScatteringMatrix>> = match &self.jones {
            None => vec![None; n],
            Some(JonesConfig::Keyword(JonesKeyword::Isotropic)) => {
                vec![Some(ScatteringMatrix::identity()); n]
            }
            Some(JonesConfig::List(j)) => {
                if j.len() != n {
                    return Err(Error::Config {
                        path: "scene.jones".into(),
                        message: format!("{} Jones matrices for {n} points", j.len()),
                    });
                }
                j.iter().copied().map(Some).collect()
            }
        };
        let points = self
            .points
            .iter()
            .zip(jones)
            .map(|(&[z, re, im], jones)| ScatterPoint {
                z,
                amplitude: Complex64::new(re, im),
                jones,
            })
            .collect();
        PointScene::new(points)
    }
}

#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MeasuredConfig {
    pub sweep: PathBuf,
    #[serde(default)]
    pub reference: Option<ReferenceConfig>,
}

#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
pub enum ReferenceConfig {
    File(PathBuf),
    Constant { constant: f64 },
}

#[derive(Debug, Clone, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BaselineConfig {
    /// Clear-scene τ = 0 magnitude, given directly.
    Magnitude(f64),
    /// Clear reference scene, run through the same pipeline.
    Scene(Box<SceneConfig>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SpectralConfig {
    pub window: Window,
    pub pad_factor: usize,
    pub isolate_dc: bool,
    pub peak_threshold: f64,
    pub exclusion_cells: f64,
}

impl Default for SpectralConfig {
    fn default() -> Self {
        let s = SpectralParams::default();
        let p = PeakParams::default();
        Self {
            window: s.window,
            pad_factor: s.pad_factor,
            isolate_dc: s.isolate_dc,
            peak_threshold: p.min_rel_magnitude,
            exclusion_cells: p.exclusion_cells,
        }
    }
}

impl SpectralConfig {
    pub fn spectral_params(&self) -> Result<SpectralParams> {
        let p = SpectralParams {
            window: self.window,
            pad_factor: self.pad_factor,
            isolate_dc: self.isolate_dc,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn peak_params(&self) -> Result<PeakParams> {
        let p = PeakParams {
            min_rel_magnitude: self.peak_threshold,
            exclusion_cells: self.exclusion_cells,
        };
        p.validate()?;
        Ok(p)
    }
}

/// Config for `fit`.
#[derive(Debug, Clone, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FitConfig {
    /// `[angle_deg, cross_power]` pairs.
    #[serde(default)]
    pub samples: Option<Vec<[f64; 2]>>,
    /// CSV with header `angle_deg,power`.
    #[serde(default)]
    pub samples_file: Option<PathBuf>,
    /// Theory reference; also the sample source when no samples are given.
    #[serde(default)]
    pub scattering_matrix: Option<ScatteringMatrix>,
    #[serde(default)]
    pub angles: AngleSweep,
}
