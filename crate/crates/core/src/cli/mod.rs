//! Command line front end: `simulate`, `fit`, `analyze` and `plotdata`.

pub mod artifacts;
pub mod config;

use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};

use crate::error::{Error, Result};
use crate::ingest::{self, MeasuredSweep, ReferenceTrace};
use crate::padm::{build_pad, classify, extract_features, pad_from_traces, PadBuild, PadFeatures};
use crate::polarimetry::{
    cross_pol_power_closed, cross_pol_power_direct, fit_harmonics, harmonic_coefficients,
    harmonic_params, AngleSample, PolarizationAngle,
};
use crate::spectral::{
    analytic_depth_spectrum, analytic_point_cross_spectrum, analytic_point_spectrum, Window,
};

use artifacts::*;
use config::*;

#[derive(Debug, Clone, Parser)]
#[command(
    name = "polscan",
    version,
    about = "Cross-polarized depth analysis of layered and point scenes"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// JSON config file.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Reserved for noise injection; recorded in artifacts.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Spectral window override (`rectangular` or `hann`).
    #[arg(long, global = true)]
    pub window: Option<Window>,
    /// Zero-padding factor override.
    #[arg(long, global = true)]
    pub pad: Option<usize>,
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Synthesize a stratified or point scene and build its angle-depth matrix.
    Simulate,
    /// Fit the two-harmonic cross-pol model to angle samples.
    Fit,
    /// Calibrate and analyze a measured sweep.
    Analyze,
    /// Emit long-form CSV from a JSON artifact.
    Plotdata {
        /// Artifact JSON file.
        artifact: PathBuf,
    },
}

/// Runs a parsed command and returns the paths written (or, for `plotdata`
/// without `--out`, prints the CSV to stdout).
pub fn run(cli: &Cli) -> Result<Vec<PathBuf>> {
    match &cli.command {
        Command::Simulate => {
            let (src, out) = config_and_out(cli)?;
            write_all(&out, &simulate(&src, cli)?)
        }
        Command::Analyze => {
            let (src, out) = config_and_out(cli)?;
            write_all(&out, &analyze(&src, cli)?)
        }
        Command::Fit => {
            let (src, out) = config_and_out(cli)?;
            write_all(&out, &fit(&src)?)
        }
        Command::Plotdata { artifact } => {
            let text = std::fs::read_to_string(artifact).map_err(|e| Error::io(artifact, e))?;
            let doc: serde_json::Value = serde_json::from_str(&text)
                .map_err(|e| Error::UnknownArtifact(format!("{}: {e}", artifact.display())))?;
            let (kind, csv) = plot_data(&doc)?;
            match &cli.out {
                Some(dir) => write_all(dir, &[(format!("{kind}.plot.csv"), csv)]),
                None => {
                    print!("{csv}");
                    Ok(Vec::new())
                }
            }
        }
    }
}

fn config_and_out(cli: &Cli) -> Result<(ConfigSource, PathBuf)> {
    let path = cli.config.as_ref().ok_or_else(|| Error::Config {
        path: "--config".into(),
        message: "a config file is required".into(),
    })?;
    let out = cli.out.clone().ok_or_else(|| Error::Config {
        path: "--out".into(),
        message: "an output directory is required".into(),
    })?;
    Ok((ConfigSource::read(path)?, out))
}

fn effective_spectral(cfg: &RunConfig, cli: &Cli) -> SpectralConfig {
    let mut s = cfg.spectral;
    if let Some(w) = cli.window {
        s.window = w;
    }
    if let Some(p) = cli.pad {
        s.pad_factor = p;
    }
    s
}

/// A scene carried through synthesis or calibration and matrix assembly.
struct SceneRun {
    build: PadBuild,
    analytic: AnalyticLinesOut,
    /// Metadata for the exported traces.
    metadata: Vec<(String, String)>,
}

fn run_scene(
    scene: &SceneConfig,
    cfg: &RunConfig,
    spectral: &SpectralConfig,
    src: &ConfigSource,
) -> Result<SceneRun> {
    let params = spectral.spectral_params()?;
    let grid = || {
        cfg.grid
            .ok_or_else(|| Error::Config {
                path: "grid".into(),
                message: "synthetic scenes need a frequency grid".into(),
            })?
            .to_grid()
    };
    let angles = cfg.angles.angles_deg();
    match scene {
        SceneConfig::Stratified(s) => {
            let stack = s.to_stack()?;
            let build = build_pad(&stack, &grid()?, &cfg.angles, &params)?;
            let analytic = if stack.is_lossless() {
                let co = analytic_depth_spectrum(&stack, None)?;
                let cross = angles
                    .iter()
                    .map(|&a| {
                        let lines = analytic_depth_spectrum(
                            &stack,
                            Some(PolarizationAngle::from_degrees(a)),
                        )?;
                        Ok(AngleLinesOut {
                            angle_deg: a,
                            lines: lines.iter().map(LineOut::from).collect(),
                        })
                    })
                    .collect::<Result<Vec<_>>>()?;
                AnalyticLinesOut {
                    applicable: true,
                    reason: None,
                    co: co.iter().map(LineOut::from).collect(),
                    cross,
                }
            } else {
                AnalyticLinesOut::inapplicable(
                    "lossy layers make interface amplitudes frequency dependent",
                )
            };
            Ok(SceneRun {
                build,
                analytic,
                metadata: vec![("source".into(), "polscan simulate".into())],
            })
        }
        SceneConfig::Points(p) => {
            let scene = p.to_scene()?;
            let build = build_pad(&scene, &grid()?, &cfg.angles, &params)?;
            let cross = angles
                .iter()
                .map(|&a| {
                    let lines =
                        analytic_point_cross_spectrum(&scene, PolarizationAngle::from_degrees(a))?;
                    Ok(AngleLinesOut {
                        angle_deg: a,
                        lines: lines.iter().map(LineOut::from).collect(),
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            let analytic = AnalyticLinesOut {
                applicable: true,
                reason: None,
                co: analytic_point_spectrum(&scene)
                    .iter()
                    .map(LineOut::from)
                    .collect(),
                cross,
            };
            Ok(SceneRun {
                build,
                analytic,
                metadata: vec![("source".into(), "polscan simulate".into())],
            })
        }
        SceneConfig::Measured(m) => {
            let sweep_path = src.resolve(&m.sweep);
            let sweep = ingest::load_sweep(&sweep_path)?;
            let reference = match &m.reference {
                None => {
                    return Err(Error::Unconfigured(format!(
                        "measured sweep {} has no calibration reference",
                        m.sweep.display()
                    )))
                }
                Some(ReferenceConfig::File(p)) => ingest::load_reference(src.resolve(p))?,
                Some(ReferenceConfig::Constant { constant }) => {
                    ReferenceTrace::constant(sweep.freqs_ghz(), *constant)?
                }
            };
            let cal = ingest::calibrate(&sweep, &reference)?;
            let build = pad_from_traces(&cal.angles_deg, cal.traces, &params)?;
            let mut metadata = vec![
                ("source".to_string(), "polscan analyze".to_string()),
                ("calibrated".to_string(), "true".to_string()),
            ];
            metadata.extend(sweep.metadata().iter().cloned());
            Ok(SceneRun {
                build,
                analytic: AnalyticLinesOut::inapplicable("measured data"),
                metadata,
            })
        }
    }
}

/// Resolves the classifier baseline, returning `(magnitude, source)`.
fn resolve_baseline(
    cfg: &RunConfig,
    spectral: &SpectralConfig,
    src: &ConfigSource,
) -> Result<Option<(f64, String)>> {
    match &cfg.baseline {
        None => Ok(None),
        Some(BaselineConfig::Magnitude(m)) => Ok(Some((*m, "magnitude".into()))),
        Some(BaselineConfig::Scene(scene)) => {
            let run = run_scene(scene, cfg, spectral, src)?;
            let feat = extract_features(&run.build.matrix, &spectral.peak_params()?)?;
            Ok(Some((feat.dc_magnitude, "scene".into())))
        }
    }
}

fn render_run(
    run: SceneRun,
    features: &PadFeatures,
    verdict: Option<VerdictOut>,
    params: ParamsOut,
    sha: &str,
) -> Result<Vec<(String, String)>> {
    let u = &run.build.matrix;
    let feat_out = FeaturesOut::new(u, features);
    let pad = PadMatrixOut {
        angles_deg: u.angles_deg().to_vec(),
        depth_mm: u.depth_axis().iter().map(|d| d * 1e3).collect(),
        depth_spacing_mm: u.depth_spacing() * 1e3,
        magnitude: u.rows().to_vec(),
        params,
        features: feat_out.clone(),
        verdict: verdict.clone(),
    };
    let mut metadata = run.metadata.clone();
    metadata.push(("config_sha256".into(), sha.into()));
    let sweep = MeasuredSweep::from_traces(u.angles_deg(), &run.build.traces, metadata)?;
    let mut files = vec![
        ("pad_matrix.csv".to_string(), pad_matrix_csv(u)),
        (
            "pad_matrix.json".to_string(),
            Envelope::new("pad_matrix", sha, pad).to_json(),
        ),
        (
            "features.json".to_string(),
            Envelope::new("features", sha, feat_out).to_json(),
        ),
        (
            "analytic_lines.json".to_string(),
            Envelope::new("analytic_lines", sha, &run.analytic).to_json(),
        ),
        (
            "analytic_lines.csv".to_string(),
            analytic_lines_csv(&run.analytic),
        ),
        ("traces.csv".to_string(), ingest::write_sweep(&sweep)),
        (
            "depth_spectra.csv".to_string(),
            depth_spectra_csv(u.angles_deg(), &run.build.spectra),
        ),
    ];
    if let Some(v) = verdict {
        files.push((
            "verdict.json".to_string(),
            Envelope::new("verdict", sha, v).to_json(),
        ));
    }
    Ok(files)
}

fn pipeline(
    src: &ConfigSource,
    cli: &Cli,
    cfg: &RunConfig,
    require_baseline: bool,
) -> Result<Vec<(String, String)>> {
    let spectral = effective_spectral(cfg, cli);
    let peaks = spectral.peak_params()?;
    let run = run_scene(&cfg.scene, cfg, &spectral, src)?;
    let features = extract_features(&run.build.matrix, &peaks)?;
    let baseline = resolve_baseline(cfg, &spectral, src)?;
    let verdict = match baseline {
        Some((b, source)) => Some(VerdictOut::new(
            classify(&features, &cfg.classifier, Some(b))?,
            source,
        )),
        None if require_baseline => {
            return Err(Error::Unconfigured(
                "analyze needs a `baseline` (magnitude or clear reference scene)".into(),
            ))
        }
        None => None,
    };
    let params = ParamsOut {
        grid: GridOut::from(run.build.traces[0].grid()),
        angles_deg: run.build.matrix.angles_deg().to_vec(),
        spectral,
        classifier: cfg.classifier,
        seed: cli.seed,
    };
    render_run(run, &features, verdict, params, &src.sha256)
}

/// Artifacts for a synthetic scene, as `(file name, contents)`.
pub fn simulate(src: &ConfigSource, cli: &Cli) -> Result<Vec<(String, String)>> {
    let cfg: RunConfig = src.parse()?;
    if matches!(cfg.scene, SceneConfig::Measured(_)) {
        return Err(Error::Config {
            path: "scene.type".into(),
            message: "simulate needs a stratified or points scene; use analyze for measured data"
                .into(),
        });
    }
    pipeline(src, cli, &cfg, false)
}

/// Artifacts for a measured scene; a baseline is required.
pub fn analyze(src: &ConfigSource, cli: &Cli) -> Result<Vec<(String, String)>> {
    let cfg: RunConfig = src.parse()?;
    if !matches!(cfg.scene, SceneConfig::Measured(_)) {
        return Err(Error::Config {
            path: "scene.type".into(),
            message: "analyze needs a measured scene; use simulate for synthetic scenes".into(),
        });
    }
    pipeline(src, cli, &cfg, true)
}

fn read_samples_csv(path: &Path) -> Result<Vec<[f64; 2]>> {
    let file = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut lines = text.lines().enumerate();
    match lines.next() {
        Some((_, h)) if h.trim() == "angle_deg,power" => {}
        _ => {
            return Err(Error::Format {
                file,
                row: 1,
                message: "expected header `angle_deg,power`".into(),
            })
        }
    }
    lines
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            let bad = || Error::Format {
                file: file.clone(),
                row: i + 1,
                message: format!("cannot parse `{l}`"),
            };
            let (a, p) = l.split_once(',').ok_or_else(bad)?;
            Ok([
                a.trim().parse().map_err(|_| bad())?,
                p.trim().parse().map_err(|_| bad())?,
            ])
        })
        .collect()
}

/// Harmonic fit artifact, as `(file name, contents)`.
pub fn fit(src: &ConfigSource) -> Result<Vec<(String, String)>> {
    let cfg: FitConfig = src.parse()?;
    let raw = match (&cfg.samples, &cfg.samples_file, &cfg.scattering_matrix) {
        (Some(_), Some(_), _) => {
            return Err(Error::Config {
                path: "samples_file".into(),
                message: "give either samples or samples_file, not both".into(),
            })
        }
        (Some(s), None, _) => s.clone(),
        (None, Some(p), _) => read_samples_csv(&src.resolve(p))?,
        (None, None, Some(s)) => {
            cfg.angles.validate()?;
            cfg.angles
                .angles_deg()
                .into_iter()
                .map(|a| {
                    [
                        a,
                        cross_pol_power_direct(s, PolarizationAngle::from_degrees(a)),
                    ]
                })
                .collect()
        }
        (None, None, None) => {
            return Err(Error::Config {
                path: ".".into(),
                message: "need samples, samples_file or scattering_matrix".into(),
            })
        }
    };
    let samples = raw
        .iter()
        .map(|&[a, p]| AngleSample::new(PolarizationAngle::from_degrees(a), p))
        .collect::<Result<Vec<_>>>()?;
    let params = fit_harmonics(&samples)?;
    let residual_rms = (samples
        .iter()
        .map(|s| (cross_pol_power_closed(&params, s.eta) - s.p_cross).powi(2))
        .sum::<f64>()
        / samples.len() as f64)
        .sqrt();
    let theory = cfg
        .scattering_matrix
        .map(|s| harmonic_params(&harmonic_coefficients(&s)));
    let max_abs_diff =
        theory.map(|t| t.max_abs_diff(&params, PHASE_FLOOR * t.offset.abs().max(1.0)));
    let body = FitOut {
        samples: raw
            .iter()
            .map(|&[angle_deg, power]| SampleOut { angle_deg, power })
            .collect(),
        params,
        residual_rms,
        theory,
        max_abs_diff,
    };
    Ok(vec![(
        "fit.json".to_string(),
        Envelope::new("fit", &src.sha256, body).to_json(),
    )])
}

/// Harmonic amplitude (relative to the offset) below which phases are not compared.
const PHASE_FLOOR: f64 = 1e-9;
