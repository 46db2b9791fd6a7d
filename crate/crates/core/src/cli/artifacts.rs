//! On-disk artifacts. JSON floats use serde_json's shortest round-trip
//! formatting and CSV floats use [`format_f64`], so identical inputs give
//! byte-identical files.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::Value;

use crate::error::{Error, Result};
use crate::fmt::format_f64;
use crate::padm::{PadFeatures, PadMatrix, Thresholds, Verdict};
use crate::polarimetry::HarmonicParams;
use crate::spectral::{DeltaLine, DepthSpectrum, FrequencyGrid, Peak};

use super::config::SpectralConfig;

pub const ARTIFACT_VERSION: u32 = 1;
pub const TOOL: &str = "polscan";
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

pub const DECISION_RULE: &str =
    "weapon-suspect iff amplitude_score >= amplitude_ratio or peak_score >= min_peaks";

/// Common header of every JSON artifact.
#[derive(Debug, Serialize)]
pub struct Envelope<'a, T: Serialize> {
    pub kind: &'static str,
    pub artifact_version: u32,
    pub tool: &'static str,
    pub tool_version: &'static str,
    pub config_sha256: &'a str,
    #[serde(flatten)]
    pub body: T,
}

impl<'a, T: Serialize> Envelope<'a, T> {
    pub fn new(kind: &'static str, config_sha256: &'a str, body: T) -> Self {
        Self {
            kind,
            artifact_version: ARTIFACT_VERSION,
            tool: TOOL,
            tool_version: TOOL_VERSION,
            config_sha256,
            body,
        }
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("artifact serialization");
        s.push('\n');
        s
    }
}

fn mm(m: f64) -> f64 {
    m * 1e3
}

#[derive(Debug, Clone, Serialize)]
pub struct GridOut {
    pub f_start_ghz: f64,
    pub f_stop_ghz: f64,
    pub step_ghz: f64,
    pub points: usize,
}

impl From<&FrequencyGrid> for GridOut {
    fn from(g: &FrequencyGrid) -> Self {
        Self {
            f_start_ghz: g.f_start() / 1e9,
            f_stop_ghz: g.f_stop() / 1e9,
            step_ghz: g.step() / 1e9,
            points: g.len(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct ParamsOut {
    pub grid: GridOut,
    pub angles_deg: Vec<f64>,
    pub spectral: SpectralConfig,
    pub classifier: Thresholds,
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct PeakOut {
    pub depth_mm: f64,
    pub magnitude: f64,
    pub prominence: f64,
}

impl From<&Peak> for PeakOut {
    fn from(p: &Peak) -> Self {
        Self {
            depth_mm: mm(p.depth),
            magnitude: p.magnitude,
            prominence: p.prominence,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct FeaturesOut {
    pub angles_deg: Vec<f64>,
    pub pol_profile: Vec<f64>,
    pub pol_fit: Option<HarmonicParams>,
    pub depth_mm: Vec<f64>,
    pub depth_profile_angle_deg: f64,
    pub depth_profile: Vec<f64>,
    pub peaks: Vec<PeakOut>,
    pub peak_count: usize,
    pub max_magnitude: f64,
    pub dc_magnitude: f64,
}

impl FeaturesOut {
    pub fn new(u: &PadMatrix, f: &PadFeatures) -> Self {
        Self {
            angles_deg: u.angles_deg().to_vec(),
            pol_profile: f.pol_profile.clone(),
            pol_fit: f.pol_fit,
            depth_mm: u.depth_axis().iter().map(|&d| mm(d)).collect(),
            depth_profile_angle_deg: f.depth_profile_angle_deg,
            depth_profile: f.depth_profile.clone(),
            peaks: f.peaks.iter().map(PeakOut::from).collect(),
            peak_count: f.peak_count,
            max_magnitude: f.max_magnitude,
            dc_magnitude: f.dc_magnitude,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct VerdictOut {
    #[serde(flatten)]
    pub verdict: Verdict,
    pub baseline_source: String,
    pub rule: &'static str,
    /// Thresholds are engineering defaults, not calibrated decision levels.
    pub thresholds_calibrated: bool,
}

impl VerdictOut {
    pub fn new(verdict: Verdict, baseline_source: String) -> Self {
        Self {
            verdict,
            baseline_source,
            rule: DECISION_RULE,
            thresholds_calibrated: false,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct PadMatrixOut {
    pub angles_deg: Vec<f64>,
    pub depth_mm: Vec<f64>,
    pub depth_spacing_mm: f64,
    pub magnitude: Vec<Vec<f64>>,
    pub params: ParamsOut,
    pub features: FeaturesOut,
    pub verdict: Option<VerdictOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct LineOut {
    pub depth_mm: f64,
    pub weight: [f64; 2],
    pub magnitude: f64,
}

impl From<&DeltaLine> for LineOut {
    fn from(l: &DeltaLine) -> Self {
        Self {
            depth_mm: mm(l.depth),
            weight: [l.weight.re, l.weight.im],
            magnitude: l.weight.norm(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AngleLinesOut {
    pub angle_deg: f64,
    pub lines: Vec<LineOut>,
}

#[derive(Debug, Clone, Serialize)]
pub struct AnalyticLinesOut {
    pub applicable: bool,
    pub reason: Option<String>,
    pub co: Vec<LineOut>,
    pub cross: Vec<AngleLinesOut>,
}

impl AnalyticLinesOut {
    pub fn inapplicable(reason: impl Into<String>) -> Self {
        Self {
            applicable: false,
            reason: Some(reason.into()),
            co: Vec::new(),
            cross: Vec::new(),
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SampleOut {
    pub angle_deg: f64,
    pub power: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct FitOut {
    pub samples: Vec<SampleOut>,
    pub params: HarmonicParams,
    pub residual_rms: f64,
    pub theory: Option<HarmonicParams>,
    pub max_abs_diff: Option<f64>,
}

fn csv_line(out: &mut String, fields: &[String]) {
    out.push_str(&fields.join(","));
    out.push('\n');
}

/// Header row of depths (mm), then one row per angle.
pub fn pad_matrix_csv(u: &PadMatrix) -> String {
    let mut out = String::new();
    let mut header = vec!["angle_deg".to_string()];
    header.extend(u.depth_axis().iter().map(|&d| format_f64(mm(d))));
    csv_line(&mut out, &header);
    for (angle, row) in u.angles_deg().iter().zip(u.rows()) {
        let mut fields = vec![format_f64(*angle)];
        fields.extend(row.iter().map(|&v| format_f64(v)));
        csv_line(&mut out, &fields);
    }
    out
}

pub fn depth_spectra_csv(angles_deg: &[f64], spectra: &[DepthSpectrum]) -> String {
    let mut out = String::from("angle_deg,depth_mm,re,im,magnitude\n");
    for (angle, s) in angles_deg.iter().zip(spectra) {
        for (d, z) in s.depth_axis().iter().zip(s.positive()) {
            csv_line(
                &mut out,
                &[
                    format_f64(*angle),
                    format_f64(mm(*d)),
                    format_f64(z.re),
                    format_f64(z.im),
                    format_f64(z.norm()),
                ],
            );
        }
    }
    out
}

const LINES_HEADER: &str = "polarization,angle_deg,depth_mm,weight_re,weight_im,magnitude\n";

fn push_line(out: &mut String, pol: &str, angle: Option<f64>, l: &LineOut) {
    csv_line(
        out,
        &[
            pol.to_string(),
            angle.map(format_f64).unwrap_or_default(),
            format_f64(l.depth_mm),
            format_f64(l.weight[0]),
            format_f64(l.weight[1]),
            format_f64(l.magnitude),
        ],
    );
}

pub fn analytic_lines_csv(a: &AnalyticLinesOut) -> String {
    let mut out = String::from(LINES_HEADER);
    for l in &a.co {
        push_line(&mut out, "co", None, l);
    }
    for c in &a.cross {
        for l in &c.lines {
            push_line(&mut out, "cross", Some(c.angle_deg), l);
        }
    }
    out
}

/// Writes `(file name, contents)` pairs into `dir`, returning the paths.
pub fn write_all(dir: &Path, files: &[(String, String)]) -> Result<Vec<PathBuf>> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    files
        .iter()
        .map(|(name, text)| {
            let path = dir.join(name);
            crate::ingest::write_text(&path, text)?;
            Ok(path)
        })
        .collect()
}

fn field<'v>(v: &'v Value, key: &str) -> Result<&'v Value> {
    v.get(key)
        .ok_or_else(|| Error::UnknownArtifact(format!("missing field `{key}`")))
}

fn num(v: &Value) -> Result<f64> {
    // non-finite values are serialized as null
    match v {
        Value::Null => Ok(f64::NAN),
        _ => v
            .as_f64()
            .ok_or_else(|| Error::UnknownArtifact(format!("expected a number, found {v}"))),
    }
}

fn nums(v: &Value) -> Result<Vec<f64>> {
    v.as_array()
        .ok_or_else(|| Error::UnknownArtifact("expected an array".into()))?
        .iter()
        .map(num)
        .collect()
}

fn array<'v>(v: &'v Value, key: &str) -> Result<&'v Vec<Value>> {
    field(v, key)?
        .as_array()
        .ok_or_else(|| Error::UnknownArtifact(format!("`{key}` is not an array")))
}

fn lines_rows(out: &mut String, pol: &str, angle: Option<f64>, lines: &[Value]) -> Result<()> {
    for l in lines {
        let w = nums(field(l, "weight")?)?;
        if w.len() != 2 {
            return Err(Error::UnknownArtifact(
                "line weight must be [re, im]".into(),
            ));
        }
        let line = LineOut {
            depth_mm: num(field(l, "depth_mm")?)?,
            weight: [w[0], w[1]],
            magnitude: num(field(l, "magnitude")?)?,
        };
        push_line(out, pol, angle, &line);
    }
    Ok(())
}

fn features_rows(out: &mut String, f: &Value) -> Result<()> {
    let angles = nums(field(f, "angles_deg")?)?;
    let pol = nums(field(f, "pol_profile")?)?;
    let depth = nums(field(f, "depth_mm")?)?;
    let prof = nums(field(f, "depth_profile")?)?;
    let row_angle = num(field(f, "depth_profile_angle_deg")?)?;
    for (a, m) in angles.iter().zip(&pol) {
        csv_line(
            out,
            &[
                "polarization".into(),
                format_f64(*a),
                format_f64(0.0),
                format_f64(*m),
            ],
        );
    }
    for (d, m) in depth.iter().zip(&prof) {
        csv_line(
            out,
            &[
                "depth".into(),
                format_f64(row_angle),
                format_f64(*d),
                format_f64(*m),
            ],
        );
    }
    Ok(())
}

/// Long-form CSV for plotting, from a parsed JSON artifact.
pub fn plot_data(doc: &Value) -> Result<(String, String)> {
    let version = field(doc, "artifact_version")?.as_u64();
    if version != Some(ARTIFACT_VERSION as u64) {
        return Err(Error::UnknownArtifact(format!(
            "unsupported artifact_version {}",
            field(doc, "artifact_version")?
        )));
    }
    let kind = field(doc, "kind")?
        .as_str()
        .ok_or_else(|| Error::UnknownArtifact("`kind` is not a string".into()))?;
    let mut out = String::new();
    match kind {
        "pad_matrix" => {
            out.push_str("angle_deg,depth_mm,magnitude\n");
            let angles = nums(field(doc, "angles_deg")?)?;
            let depth = nums(field(doc, "depth_mm")?)?;
            let rows = array(doc, "magnitude")?;
            if rows.len() != angles.len() {
                return Err(Error::UnknownArtifact(
                    "row count does not match angles".into(),
                ));
            }
            for (a, row) in angles.iter().zip(rows) {
                let row = nums(row)?;
                if row.len() != depth.len() {
                    return Err(Error::UnknownArtifact(
                        "row length does not match depth axis".into(),
                    ));
                }
                for (d, m) in depth.iter().zip(&row) {
                    csv_line(&mut out, &[format_f64(*a), format_f64(*d), format_f64(*m)]);
                }
            }
        }
        "features" => {
            out.push_str("profile,angle_deg,depth_mm,magnitude\n");
            features_rows(&mut out, doc)?;
        }
        "analytic_lines" => {
            out.push_str(LINES_HEADER);
            lines_rows(&mut out, "co", None, array(doc, "co")?)?;
            for c in array(doc, "cross")? {
                let angle = num(field(c, "angle_deg")?)?;
                lines_rows(&mut out, "cross", Some(angle), array(c, "lines")?)?;
            }
        }
        "fit" => {
            out.push_str("angle_deg,power,fitted,theory\n");
            let params = harmonic(field(doc, "params")?)?;
            let theory = match field(doc, "theory")? {
                Value::Null => None,
                t => Some(harmonic(t)?),
            };
            for s in array(doc, "samples")? {
                let a = num(field(s, "angle_deg")?)?;
                let p = num(field(s, "power")?)?;
                let eta = crate::polarimetry::PolarizationAngle::from_degrees(a);
                csv_line(
                    &mut out,
                    &[
                        format_f64(a),
                        format_f64(p),
                        format_f64(crate::polarimetry::cross_pol_power_closed(&params, eta)),
                        theory
                            .map(|t| {
                                format_f64(crate::polarimetry::cross_pol_power_closed(&t, eta))
                            })
                            .unwrap_or_default(),
                    ],
                );
            }
        }
        other => {
            return Err(Error::UnknownArtifact(format!(
                "no plot data for artifact kind `{other}`"
            )))
        }
    }
    Ok((kind.to_string(), out))
}

fn harmonic(v: &Value) -> Result<HarmonicParams> {
    serde_json::from_value(v.clone())
        .map_err(|e| Error::UnknownArtifact(format!("bad harmonic parameters: {e}")))
}
