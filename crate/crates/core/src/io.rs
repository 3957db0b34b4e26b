//! Text file formats.
//!
//! Sweeps use a key-value header followed by `freq_hz,re,im` rows, with
//! coefficients written to 17 significant digits so a write/read round trip
//! is exact. Plot tables are plain CSV with optional `# key value` metadata
//! lines. Model sets and estimates are JSON.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::attenuation::AttenuationSeries;
use crate::cir::PowerDelayProfile;
use crate::error::{Error, Result};
use crate::features::{CirFeatureSet, MultipathComponent, PerturbationReport};
use crate::freqclass::SampleDistribution;
use crate::geometry::{BandConfig, BandId, Scene};
use crate::sweep::FrequencySweep;

pub const FORMAT_VERSION: u32 = 1;

/// Rows whose frequency is further than this from the grid are rejected.
pub const GRID_TOLERANCE_HZ: f64 = 0.5;

const SWEEP_COLUMNS: &str = "freq_hz,re,im";
const ATTENUATION_COLUMNS: &str = "freq_hz,a_db";
const FEATURE_COLUMNS: &str = "index,z_m,delay_s,amplitude,amplitude_db";

pub fn read_text(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

/// Writes `text`, creating parent directories as needed.
pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn parse_err(path: &str, line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_string(),
        line,
        msg: msg.into(),
    }
}

fn parse_f64(field: &str, path: &str, line: usize) -> Result<f64> {
    field
        .parse()
        .map_err(|_| parse_err(path, line, format!("'{field}' is not a number")))
}

fn one_line(label: &str) -> String {
    label.replace(['\n', '\r'], " ").trim().to_string()
}

fn split_key(line: &str) -> (&str, &str) {
    match line.split_once(char::is_whitespace) {
        Some((k, v)) => (k, v.trim()),
        None => (line, ""),
    }
}

fn numbered(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines().enumerate().map(|(i, l)| (i + 1, l.trim()))
}

/// Header fields shared by sweeps and attenuation tables.
#[derive(Default)]
struct BandHeader {
    format_version: Option<u32>,
    band_id: Option<BandId>,
    f_start: Option<f64>,
    f_stop: Option<f64>,
    n_points: Option<usize>,
    label: Option<String>,
}

impl BandHeader {
    fn write(out: &mut String, band: &BandConfig, label: &str, prefix: &str) {
        let _ = writeln!(out, "{prefix}format_version {FORMAT_VERSION}");
        let _ = writeln!(out, "{prefix}band_id {}", band.band_id.as_str());
        let _ = writeln!(out, "{prefix}f_start_hz {}", band.f_start);
        let _ = writeln!(out, "{prefix}f_stop_hz {}", band.f_stop);
        let _ = writeln!(out, "{prefix}n_points {}", band.n_points);
        let _ = writeln!(out, "{prefix}label {}", one_line(label));
    }

    /// Returns false for unknown keys.
    fn set(&mut self, key: &str, value: &str, path: &str, line: usize) -> Result<bool> {
        match key {
            "format_version" => {
                let v: u32 = value
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("bad format_version '{value}'")))?;
                if v != FORMAT_VERSION {
                    return Err(parse_err(
                        path,
                        line,
                        format!("unsupported format_version {v}"),
                    ));
                }
                self.format_version = Some(v);
            }
            "band_id" => {
                let id = BandId::parse(value)
                    .ok_or_else(|| parse_err(path, line, format!("unknown band_id '{value}'")))?;
                self.band_id = Some(id);
            }
            "f_start_hz" => self.f_start = Some(parse_f64(value, path, line)?),
            "f_stop_hz" => self.f_stop = Some(parse_f64(value, path, line)?),
            "n_points" => {
                let n = value
                    .parse()
                    .map_err(|_| parse_err(path, line, format!("bad n_points '{value}'")))?;
                self.n_points = Some(n);
            }
            "label" => self.label = Some(value.to_string()),
            _ => return Ok(false),
        }
        Ok(true)
    }

    fn finish(self, path: &str, line: usize) -> Result<(BandConfig, String)> {
        let missing = |k: &str| parse_err(path, line, format!("header is missing {k}"));
        self.format_version
            .ok_or_else(|| missing("format_version"))?;
        let band = BandConfig::new(
            self.band_id.ok_or_else(|| missing("band_id"))?,
            self.f_start.ok_or_else(|| missing("f_start_hz"))?,
            self.f_stop.ok_or_else(|| missing("f_stop_hz"))?,
            self.n_points.ok_or_else(|| missing("n_points"))?,
        )
        .map_err(|e| parse_err(path, line, e.to_string()))?;
        Ok((band, self.label.unwrap_or_default()))
    }
}

/// Reads header lines up to and including the column line. `comment_header`
/// selects `# key value` metadata (tables) over bare `key value` (sweeps).
fn read_header<'a>(
    lines: &mut impl Iterator<Item = (usize, &'a str)>,
    columns: &str,
    comment_header: bool,
    path: &str,
) -> Result<(BandConfig, String, usize)> {
    let mut header = BandHeader::default();
    let mut last = 0;
    for (line, text) in lines.by_ref() {
        last = line;
        if text.is_empty() {
            continue;
        }
        if text.replace(' ', "") == columns {
            let (band, label) = header.finish(path, line)?;
            return Ok((band, label, line));
        }
        let entry = match (comment_header, text.strip_prefix('#')) {
            (true, Some(rest)) => rest.trim(),
            (true, None) => return Err(parse_err(path, line, format!("expected '{columns}'"))),
            (false, Some(_)) => continue,
            (false, None) => text,
        };
        let (key, value) = split_key(entry);
        if !header.set(key, value, path, line)? && !comment_header {
            return Err(parse_err(path, line, format!("unknown header key '{key}'")));
        }
    }
    Err(parse_err(path, last, format!("missing '{columns}' line")))
}

/// Parses data rows, checking frequencies against the band grid and the row
/// count against `n_points`.
fn read_rows<'a, T>(
    lines: impl Iterator<Item = (usize, &'a str)>,
    band: &BandConfig,
    n_fields: usize,
    path: &str,
    mut parse_rest: impl FnMut(&[&str], usize) -> Result<T>,
) -> Result<Vec<T>> {
    let mut out = Vec::with_capacity(band.n_points);
    let mut found = 0;
    for (line, text) in lines {
        if text.is_empty() || text.starts_with('#') {
            continue;
        }
        found += 1;
        if found > band.n_points {
            continue;
        }
        let fields: Vec<&str> = text.split(',').map(str::trim).collect();
        if fields.len() != n_fields {
            return Err(parse_err(
                path,
                line,
                format!("expected {n_fields} fields, found {}", fields.len()),
            ));
        }
        let f = parse_f64(fields[0], path, line)?;
        let grid = band.frequency(found - 1);
        if (f - grid).abs() > GRID_TOLERANCE_HZ {
            return Err(parse_err(
                path,
                line,
                format!("frequency {} Hz is off the grid value {grid} Hz", fields[0]),
            ));
        }
        out.push(parse_rest(&fields[1..], line)?);
    }
    if found != band.n_points {
        return Err(Error::RowCount {
            path: path.to_string(),
            expected: band.n_points,
            found,
        });
    }
    Ok(out)
}

fn grid_hz(f: f64) -> f64 {
    f.round()
}

pub fn format_sweep(sweep: &FrequencySweep) -> String {
    let mut out = String::with_capacity(64 * sweep.len() + 256);
    BandHeader::write(&mut out, sweep.band(), sweep.label(), "");
    out.push_str(SWEEP_COLUMNS);
    out.push('\n');
    for (f, v) in sweep.frequencies().iter().zip(sweep.values()) {
        let _ = writeln!(out, "{},{:.16e},{:.16e}", grid_hz(*f), v.re, v.im);
    }
    out
}

/// `path` only labels error messages.
pub fn parse_sweep(text: &str, path: &str) -> Result<FrequencySweep> {
    let mut lines = numbered(text);
    let (band, label, line) = read_header(&mut lines, SWEEP_COLUMNS, false, path)?;
    let values = read_rows(lines, &band, 3, path, |f, line| {
        Ok(Complex64::new(
            parse_f64(f[0], path, line)?,
            parse_f64(f[1], path, line)?,
        ))
    })?;
    FrequencySweep::new(band, values, label).map_err(|e| parse_err(path, line, e.to_string()))
}

pub fn write_sweep(sweep: &FrequencySweep, path: &Path) -> Result<()> {
    write_text(path, &format_sweep(sweep))
}

pub fn read_sweep(path: &Path) -> Result<FrequencySweep> {
    parse_sweep(&read_text(path)?, &path.display().to_string())
}

/// `freq_hz,a_db` with the band header as `#` metadata.
pub fn format_attenuation(series: &AttenuationSeries) -> String {
    let mut out = String::new();
    BandHeader::write(&mut out, series.band(), series.label(), "# ");
    out.push_str(ATTENUATION_COLUMNS);
    out.push('\n');
    for (k, a) in series.values().iter().enumerate() {
        let _ = writeln!(out, "{},{:e}", grid_hz(series.band().frequency(k)), a);
    }
    out
}

pub fn parse_attenuation(text: &str, path: &str) -> Result<AttenuationSeries> {
    let mut lines = numbered(text);
    let (band, label, line) = read_header(&mut lines, ATTENUATION_COLUMNS, true, path)?;
    let values = read_rows(lines, &band, 2, path, |f, line| parse_f64(f[0], path, line))?;
    AttenuationSeries::new(band, values, label).map_err(|e| parse_err(path, line, e.to_string()))
}

pub fn write_attenuation(series: &AttenuationSeries, path: &Path) -> Result<()> {
    write_text(path, &format_attenuation(series))
}

pub fn read_attenuation(path: &Path) -> Result<AttenuationSeries> {
    parse_attenuation(&read_text(path)?, &path.display().to_string())
}

/// `path_length_cm,power_db`, the plot axes of a delay profile.
pub fn format_pdp(pdp: &PowerDelayProfile) -> String {
    let mut out = String::with_capacity(40 * pdp.len() + 256);
    let _ = writeln!(out, "# window {}", pdp.window);
    let _ = writeln!(out, "# zero_pad_factor {}", pdp.zero_pad_factor);
    let _ = writeln!(out, "# delay_resolution_m {:e}", pdp.delay_resolution);
    let _ = writeln!(out, "# alias_free_range_m {:e}", pdp.alias_free_range);
    let _ = writeln!(out, "# peak_power {:e}", pdp.peak_power());
    if pdp.aliasing_warning() {
        let _ = writeln!(
            out,
            "# warning {:.3}% of energy in the upper half of the delay axis",
            100.0 * pdp.upper_half_energy_fraction
        );
    }
    out.push_str("path_length_cm,power_db\n");
    for (z, p) in pdp.path_lengths.iter().zip(&pdp.power_db) {
        let _ = writeln!(out, "{},{}", 100.0 * z, p);
    }
    out
}

pub fn format_features(set: &CirFeatureSet) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# label {}", one_line(set.label()));
    let _ = writeln!(out, "# delay_resolution_m {:e}", set.delay_resolution_m());
    out.push_str(FEATURE_COLUMNS);
    out.push('\n');
    for (i, c) in set.components().iter().enumerate() {
        let _ = writeln!(
            out,
            "{i},{:e},{:e},{:e},{}",
            c.path_length_m,
            c.delay_s,
            c.amplitude,
            c.amplitude_db()
        );
    }
    out
}

pub fn parse_features(text: &str, path: &str) -> Result<CirFeatureSet> {
    let mut label = String::new();
    let mut resolution = None;
    let mut components = Vec::new();
    let mut in_rows = false;
    let mut last = 0;
    for (line, text) in numbered(text) {
        last = line;
        if text.is_empty() {
            continue;
        }
        if let Some(meta) = text.strip_prefix('#') {
            let (key, value) = split_key(meta.trim());
            match key {
                "label" => label = value.to_string(),
                "delay_resolution_m" => resolution = Some(parse_f64(value, path, line)?),
                _ => {}
            }
            continue;
        }
        if !in_rows {
            if text.replace(' ', "") != FEATURE_COLUMNS {
                return Err(parse_err(
                    path,
                    line,
                    format!("expected '{FEATURE_COLUMNS}'"),
                ));
            }
            in_rows = true;
            continue;
        }
        let f: Vec<&str> = text.split(',').map(str::trim).collect();
        if f.len() != 5 {
            return Err(parse_err(
                path,
                line,
                format!("expected 5 fields, found {}", f.len()),
            ));
        }
        if f[0].parse::<usize>().ok() != Some(components.len()) {
            return Err(parse_err(
                path,
                line,
                format!("expected index {}", components.len()),
            ));
        }
        components.push(MultipathComponent {
            path_length_m: parse_f64(f[1], path, line)?,
            delay_s: parse_f64(f[2], path, line)?,
            amplitude: parse_f64(f[3], path, line)?,
        });
    }
    if !in_rows {
        return Err(parse_err(
            path,
            last,
            format!("missing '{FEATURE_COLUMNS}' line"),
        ));
    }
    let resolution =
        resolution.ok_or_else(|| parse_err(path, 1, "missing '# delay_resolution_m' metadata"))?;
    CirFeatureSet::new(components, resolution, label)
        .map_err(|e| parse_err(path, last, e.to_string()))
}

pub fn write_features(set: &CirFeatureSet, path: &Path) -> Result<()> {
    write_text(path, &format_features(set))
}

pub fn read_features(path: &Path) -> Result<CirFeatureSet> {
    parse_features(&read_text(path)?, &path.display().to_string())
}

/// Component table `index,z_m,amplitude_db,rho_db,status`, sorted by path
/// length. `index` refers to the observed set except for `lost` rows, which
/// refer to the baseline.
pub fn format_perturbation(report: &PerturbationReport) -> String {
    struct Row<'a> {
        index: usize,
        c: MultipathComponent,
        rho_db: Option<f64>,
        status: &'a str,
    }
    let obs = report.observed.components();
    let base = report.baseline.components();
    let mut rows: Vec<Row> = report
        .matched_pairs
        .iter()
        .map(|m| Row {
            index: m.observed_index,
            c: obs[m.observed_index],
            rho_db: Some(m.rho_db()),
            status: "matched",
        })
        .chain(report.new_indices.iter().map(|&j| Row {
            index: j,
            c: obs[j],
            rho_db: None,
            status: "new",
        }))
        .chain(report.unmatched_baseline.iter().map(|&i| Row {
            index: i,
            c: base[i],
            rho_db: None,
            status: "lost",
        }))
        .collect();
    rows.sort_by(|a, b| {
        a.c.path_length_m
            .total_cmp(&b.c.path_length_m)
            .then_with(|| a.status.cmp(b.status))
    });

    let mut out = String::new();
    let _ = writeln!(out, "# delta_k {}", report.delta_k);
    let _ = writeln!(out, "# delay_tolerance_s {:e}", report.delay_tolerance_s);
    out.push_str("index,z_m,amplitude_db,rho_db,status\n");
    for r in rows {
        let rho = r.rho_db.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{:e},{},{},{}",
            r.index,
            r.c.path_length_m,
            r.c.amplitude_db(),
            rho,
            r.status
        );
    }
    out
}

/// Versioned set of fitted hypothesis distributions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSet {
    pub format_version: u32,
    pub band_id: Option<BandId>,
    pub models: Vec<SampleDistribution>,
}

impl ModelSet {
    pub fn new(band_id: Option<BandId>, models: Vec<SampleDistribution>) -> Self {
        Self {
            format_version: FORMAT_VERSION,
            band_id,
            models,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.format_version != FORMAT_VERSION {
            return Err(Error::invalid(
                "model set",
                format!("unsupported format_version {}", self.format_version),
            ));
        }
        if self.models.len() < 2 {
            return Err(Error::invalid("model set", "need at least two hypotheses"));
        }
        for m in &self.models {
            m.validate()?;
        }
        if self
            .models
            .iter()
            .any(|m| m.bin_edges != self.models[0].bin_edges)
        {
            return Err(Error::EdgeMismatch);
        }
        Ok(())
    }
}

pub fn format_models(set: &ModelSet) -> String {
    let mut s = serde_json::to_string_pretty(set).expect("model set serializes");
    s.push('\n');
    s
}

pub fn parse_models(text: &str, path: &str) -> Result<ModelSet> {
    let set: ModelSet =
        serde_json::from_str(text).map_err(|e| parse_err(path, e.line(), e.to_string()))?;
    set.validate()?;
    Ok(set)
}

pub fn write_models(set: &ModelSet, path: &Path) -> Result<()> {
    write_text(path, &format_models(set))
}

pub fn read_models(path: &Path) -> Result<ModelSet> {
    parse_models(&read_text(path)?, &path.display().to_string())
}

/// Pretty JSON with a trailing newline.
pub fn to_json<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("value serializes");
    s.push('\n');
    s
}

/// A scene from a TOML file holding either a bare scene table or a session
/// with a `[scene]` table.
pub fn parse_scene(text: &str, path: &str) -> Result<Scene> {
    let table: toml::Table =
        toml::from_str(text).map_err(|e| Error::Config(format!("{path}: {e}")))?;
    let scene = match table.get("scene") {
        Some(v) => v.clone().try_into::<Scene>(),
        None => {
            let bare = toml::Value::Table(table.clone()).try_into::<Scene>();
            // a session file relying on the default scene
            bare.or_else(|e| {
                crate::session::SessionConfig::from_toml(text)
                    .map(|s| s.scene)
                    .map_err(|_| e)
            })
        }
    }
    .map_err(|e| Error::Config(format!("{path}: {e}")))?;
    scene.validate()?;
    Ok(scene)
}

pub fn read_scene(path: &Path) -> Result<Scene> {
    parse_scene(&read_text(path)?, &path.display().to_string())
}
