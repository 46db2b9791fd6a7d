//! Measured power sweeps.
//!
//! Interchange format: UTF-8 text, LF line endings, optional leading
//! metadata lines of the form `# key: value`, then the header
//! `freq_ghz,angle_deg,power` and one row per sample. Canonical files list
//! rows sorted by angle then frequency, with floats written as the shortest
//! decimal that round-trips. A file whose name ends in `.gz` is read and
//! written gzip-compressed.

use std::collections::BTreeMap;
use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use flate2::read::GzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;

use crate::error::{Error, Result};
use crate::fmt::format_f64;
use crate::spectral::{FrequencyGrid, PowerTrace};

pub const HEADER: &str = "freq_ghz,angle_deg,power";

/// Relative tolerance on frequency spacing when checking that a grid is uniform.
const UNIFORM_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepRecord {
    pub freq_ghz: f64,
    pub angle_deg: f64,
    pub power: f64,
}

/// A validated measured sweep: every angle shares one uniform frequency grid.
#[derive(Debug, Clone, PartialEq)]
pub struct MeasuredSweep {
    records: Vec<SweepRecord>,
    metadata: Vec<(String, String)>,
    angles_deg: Vec<f64>,
    freqs_ghz: Vec<f64>,
    grid: FrequencyGrid,
}

impl MeasuredSweep {
    /// Validates and sorts raw records. `source` names the input in errors; row
    /// numbers refer to positions in `rows` (file line numbers when loaded).
    fn from_rows(
        rows: Vec<(usize, SweepRecord)>,
        metadata: Vec<(String, String)>,
        source: &str,
    ) -> Result<Self> {
        let format_err = |row: usize, message: String| Error::Format {
            file: source.to_string(),
            row,
            message,
        };
        if rows.is_empty() {
            return Err(Error::Ingest {
                file: source.into(),
                message: "no data rows".into(),
            });
        }
        for &(row, r) in &rows {
            if !(r.freq_ghz.is_finite() && r.freq_ghz > 0.0) {
                return Err(format_err(
                    row,
                    format!("frequency must be positive, got {}", r.freq_ghz),
                ));
            }
            if !r.angle_deg.is_finite() {
                return Err(format_err(row, "angle must be finite".into()));
            }
            if !(r.power.is_finite() && r.power >= 0.0) {
                return Err(format_err(
                    row,
                    format!("power must be non-negative, got {}", r.power),
                ));
            }
        }

        // group by angle bit pattern; BTreeMap over total order keeps it sorted
        let mut groups: BTreeMap<OrdF64, Vec<(usize, SweepRecord)>> = BTreeMap::new();
        for (row, r) in rows {
            groups
                .entry(OrdF64(r.angle_deg))
                .or_default()
                .push((row, r));
        }
        let mut records = Vec::new();
        let mut angles_deg = Vec::new();
        let mut reference: Option<Vec<f64>> = None;
        for (angle, mut group) in groups {
            group.sort_by(|a, b| a.1.freq_ghz.total_cmp(&b.1.freq_ghz));
            if let Some(w) = group
                .windows(2)
                .find(|w| w[0].1.freq_ghz == w[1].1.freq_ghz)
            {
                return Err(format_err(
                    w[1].0,
                    format!(
                        "duplicate sample at {} GHz, {}° (first seen on row {})",
                        w[1].1.freq_ghz, angle.0, w[0].0
                    ),
                ));
            }
            let freqs: Vec<f64> = group.iter().map(|(_, r)| r.freq_ghz).collect();
            match &reference {
                None => {
                    check_uniform(&freqs).map_err(|m| Error::Ingest {
                        file: source.into(),
                        message: format!("angle {}°: {m}", angle.0),
                    })?;
                    reference = Some(freqs);
                }
                Some(expected) if expected.len() != freqs.len() => {
                    return Err(Error::Ingest {
                        file: source.into(),
                        message: format!(
                            "ragged grid: angle {}° has {} frequencies, expected {}",
                            angle.0,
                            freqs.len(),
                            expected.len()
                        ),
                    });
                }
                Some(expected) if *expected != freqs => {
                    return Err(Error::Ingest {
                        file: source.into(),
                        message: format!(
                            "ragged grid: frequencies at angle {}° differ from the first angle",
                            angle.0
                        ),
                    });
                }
                Some(_) => {}
            }
            angles_deg.push(angle.0);
            records.extend(group.into_iter().map(|(_, r)| r));
        }
        let freqs_ghz = reference.unwrap_or_default();
        let grid = grid_of(&freqs_ghz).map_err(|e| Error::Ingest {
            file: source.into(),
            message: e.to_string(),
        })?;
        Ok(Self {
            records,
            metadata,
            angles_deg,
            freqs_ghz,
            grid,
        })
    }

    /// Builds a sweep from per-angle traces, e.g. to export simulated data.
    pub fn from_traces(
        angles_deg: &[f64],
        traces: &[PowerTrace],
        metadata: Vec<(String, String)>,
    ) -> Result<Self> {
        if angles_deg.len() != traces.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} angles for {} traces",
                angles_deg.len(),
                traces.len()
            )));
        }
        let mut rows = Vec::new();
        for (&angle_deg, t) in angles_deg.iter().zip(traces) {
            for (f, &power) in t.grid().frequencies().zip(t.power()) {
                rows.push((
                    rows.len() + 1,
                    SweepRecord {
                        freq_ghz: f / 1e9,
                        angle_deg,
                        power,
                    },
                ));
            }
        }
        Self::from_rows(rows, metadata, "<traces>")
    }

    pub fn records(&self) -> &[SweepRecord] {
        &self.records
    }

    pub fn metadata(&self) -> &[(String, String)] {
        &self.metadata
    }

    pub fn metadata_value(&self, key: &str) -> Option<&str> {
        self.metadata
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Distinct angles, ascending.
    pub fn angles_deg(&self) -> &[f64] {
        &self.angles_deg
    }

    pub fn freqs_ghz(&self) -> &[f64] {
        &self.freqs_ghz
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    /// Uncalibrated per-angle traces; records are grouped by angle.
    pub fn raw_traces(&self) -> Result<Vec<PowerTrace>> {
        let m = self.freqs_ghz.len();
        self.records
            .chunks(m)
            .map(|chunk| PowerTrace::new(self.grid, chunk.iter().map(|r| r.power).collect()))
            .collect()
    }
}

/// f64 ordered by `total_cmp`, for grouping.
#[derive(Debug, Clone, Copy)]
struct OrdF64(f64);

impl PartialEq for OrdF64 {
    fn eq(&self, other: &Self) -> bool {
        self.0.total_cmp(&other.0).is_eq()
    }
}
impl Eq for OrdF64 {}
impl PartialOrd for OrdF64 {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for OrdF64 {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.total_cmp(&other.0)
    }
}

fn check_uniform(freqs: &[f64]) -> std::result::Result<(), String> {
    if freqs.len() < 2 {
        return Err("need at least two frequencies".into());
    }
    let step = (freqs[freqs.len() - 1] - freqs[0]) / (freqs.len() - 1) as f64;
    for (k, w) in freqs.windows(2).enumerate() {
        if ((w[1] - w[0]) - step).abs() > UNIFORM_TOL * step {
            return Err(format!(
                "frequency grid is not uniform near {} GHz (sample {})",
                w[1],
                k + 1
            ));
        }
    }
    Ok(())
}

fn grid_of(freqs_ghz: &[f64]) -> Result<FrequencyGrid> {
    let n = freqs_ghz.len();
    if n < 2 {
        return Err(Error::InvalidGrid("need at least two frequencies".into()));
    }
    let start = freqs_ghz[0];
    let stop = freqs_ghz[n - 1];
    FrequencyGrid::from_ghz(start, stop, (stop - start) / (n - 1) as f64)
}

fn read_text(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    if is_gz {
        let mut s = String::new();
        GzDecoder::new(bytes.as_slice())
            .read_to_string(&mut s)
            .map_err(|e| Error::io(path, e))?;
        Ok(s)
    } else {
        String::from_utf8(bytes).map_err(|_| Error::Ingest {
            file: path.display().to_string(),
            message: "file is not valid UTF-8".into(),
        })
    }
}

/// Writes text, gzip-compressed when the path ends in `.gz`.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let is_gz = path.extension().is_some_and(|e| e == "gz");
    let bytes = if is_gz {
        let mut enc = GzEncoder::new(Vec::new(), Compression::default());
        enc.write_all(text.as_bytes())
            .map_err(|e| Error::io(path, e))?;
        enc.finish().map_err(|e| Error::io(path, e))?
    } else {
        text.as_bytes().to_vec()
    };
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

struct ParsedTable {
    metadata: Vec<(String, String)>,
    rows: Vec<(usize, SweepRecord)>,
}

fn parse_table(text: &str, source: &str) -> Result<ParsedTable> {
    let format_err = |row: usize, message: String| Error::Format {
        file: source.to_string(),
        row,
        message,
    };
    let mut metadata = Vec::new();
    let mut rows = Vec::new();
    let mut header_seen = false;
    for (idx, raw) in text.split('\n').enumerate() {
        let line_no = idx + 1;
        let line = raw.strip_suffix('\r').unwrap_or(raw);
        if line.is_empty() {
            continue;
        }
        if !header_seen {
            if let Some(comment) = line.strip_prefix('#') {
                let comment = comment.strip_prefix(' ').unwrap_or(comment);
                match comment.split_once(':') {
                    Some((k, v)) => metadata.push((
                        k.trim().to_string(),
                        v.strip_prefix(' ').unwrap_or(v).to_string(),
                    )),
                    None => {
                        return Err(format_err(
                            line_no,
                            "metadata line must be `# key: value`".into(),
                        ))
                    }
                }
                continue;
            }
            if line.trim() != HEADER {
                return Err(format_err(line_no, format!("expected header `{HEADER}`")));
            }
            header_seen = true;
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != 3 {
            return Err(format_err(
                line_no,
                format!("expected 3 fields, found {}", fields.len()),
            ));
        }
        let mut v = [0.0; 3];
        for (slot, (name, field)) in v
            .iter_mut()
            .zip(["freq_ghz", "angle_deg", "power"].iter().zip(&fields))
        {
            *slot = field
                .trim()
                .parse::<f64>()
                .map_err(|_| format_err(line_no, format!("cannot parse {name} `{field}`")))?;
        }
        rows.push((
            line_no,
            SweepRecord {
                freq_ghz: v[0],
                angle_deg: v[1],
                power: v[2],
            },
        ));
    }
    if !header_seen {
        return Err(Error::Ingest {
            file: source.into(),
            message: format!("missing header `{HEADER}`"),
        });
    }
    Ok(ParsedTable { metadata, rows })
}

pub fn parse_sweep(text: &str, source: &str) -> Result<MeasuredSweep> {
    let table = parse_table(text, source)?;
    MeasuredSweep::from_rows(table.rows, table.metadata, source)
}

pub fn load_sweep(path: impl AsRef<Path>) -> Result<MeasuredSweep> {
    let path = path.as_ref();
    parse_sweep(&read_text(path)?, &path.display().to_string())
}

/// Canonical CSV text for a sweep.
pub fn write_sweep(sweep: &MeasuredSweep) -> String {
    let mut out = String::new();
    for (k, v) in &sweep.metadata {
        out.push_str(&format!("# {k}: {v}\n"));
    }
    out.push_str(HEADER);
    out.push('\n');
    for r in &sweep.records {
        out.push_str(&format_f64(r.freq_ghz));
        out.push(',');
        out.push_str(&format_f64(r.angle_deg));
        out.push(',');
        out.push_str(&format_f64(r.power));
        out.push('\n');
    }
    out
}

pub fn save_sweep(sweep: &MeasuredSweep, path: impl AsRef<Path>) -> Result<()> {
    write_text(path.as_ref(), &write_sweep(sweep))
}

/// Reference response used to normalize raw power (metal plate capture or
/// transmitted-power response).
#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceTrace {
    freqs_ghz: Vec<f64>,
    power: Vec<f64>,
}

impl ReferenceTrace {
    pub fn new(freqs_ghz: Vec<f64>, power: Vec<f64>) -> Result<Self> {
        if freqs_ghz.len() != power.len() || freqs_ghz.is_empty() {
            return Err(Error::DimensionMismatch(format!(
                "{} reference frequencies for {} power samples",
                freqs_ghz.len(),
                power.len()
            )));
        }
        if let Some(k) = power.iter().position(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::Ingest {
                file: "<reference>".into(),
                message: format!(
                    "reference power must be strictly positive; sample {k} at {} GHz is {}",
                    freqs_ghz[k], power[k]
                ),
            });
        }
        Ok(Self { freqs_ghz, power })
    }

    /// Constant reference on the sweep's grid.
    pub fn constant(freqs_ghz: &[f64], value: f64) -> Result<Self> {
        Self::new(freqs_ghz.to_vec(), vec![value; freqs_ghz.len()])
    }

    pub fn freqs_ghz(&self) -> &[f64] {
        &self.freqs_ghz
    }

    pub fn power(&self) -> &[f64] {
        &self.power
    }
}

/// Parses a reference in the sweep format; the angle column is ignored.
pub fn parse_reference(text: &str, source: &str) -> Result<ReferenceTrace> {
    let mut table = parse_table(text, source)?;
    table
        .rows
        .sort_by(|a, b| a.1.freq_ghz.total_cmp(&b.1.freq_ghz));
    if let Some(w) = table
        .rows
        .windows(2)
        .find(|w| w[0].1.freq_ghz == w[1].1.freq_ghz)
    {
        return Err(Error::Format {
            file: source.into(),
            row: w[1].0,
            message: format!("duplicate reference frequency {} GHz", w[1].1.freq_ghz),
        });
    }
    for &(row, r) in &table.rows {
        if !(r.power.is_finite() && r.power > 0.0) {
            return Err(Error::Format {
                file: source.into(),
                row,
                message: format!("reference power must be strictly positive, got {}", r.power),
            });
        }
    }
    let freqs: Vec<f64> = table.rows.iter().map(|(_, r)| r.freq_ghz).collect();
    check_uniform(&freqs).map_err(|message| Error::Ingest {
        file: source.into(),
        message,
    })?;
    ReferenceTrace::new(freqs, table.rows.iter().map(|(_, r)| r.power).collect())
}

pub fn load_reference(path: impl AsRef<Path>) -> Result<ReferenceTrace> {
    let path = path.as_ref();
    parse_reference(&read_text(path)?, &path.display().to_string())
}

/// Calibrated traces in ascending angle order.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibratedSweep {
    pub angles_deg: Vec<f64>,
    pub traces: Vec<PowerTrace>,
}

/// `p_cal(f, η) = p_raw(f, η) / p_ref(f)`.
pub fn calibrate(sweep: &MeasuredSweep, reference: &ReferenceTrace) -> Result<CalibratedSweep> {
    if sweep.freqs_ghz() != reference.freqs_ghz() {
        return Err(Error::Ingest {
            file: "<reference>".into(),
            message: format!(
                "reference grid ({} points) does not match the sweep grid ({} points)",
                reference.freqs_ghz().len(),
                sweep.freqs_ghz().len()
            ),
        });
    }
    let traces = sweep
        .raw_traces()?
        .into_iter()
        .map(|t| {
            let p = t
                .power()
                .iter()
                .zip(reference.power())
                .map(|(raw, r)| raw / r)
                .collect();
            PowerTrace::new(*t.grid(), p)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(CalibratedSweep {
        angles_deg: sweep.angles_deg().to_vec(),
        traces,
    })
}
