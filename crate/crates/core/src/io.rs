//! Text file formats.
//!
//! | file        | layout                                                      |
//! |-------------|-------------------------------------------------------------|
//! | coordinates | CSV, `lat,lon` per line                                     |
//! | grid        | two `#` header lines, then CSV `cell_id,center_lat,center_lon,count,depth` |
//! | predictions | `#` header naming the grid, then one TAB-separated record per line |
//! | scores      | CSV `image_id,method,d_km,score,orientation`                |
//! | rc curve    | CSV `theta,coverage,risk`                                   |
//! | calibration, report | JSON                                                |
//!
//! A predictions record is
//! `image_id <TAB> true_lat <TAB> true_lon <TAB> entries [<TAB> pass ...]`,
//! where `entries` and every Monte-Carlo `pass` are space-separated
//! `cell_id:probability` pairs.
//!
//! Writers return the whole file as a `String`; output depends only on the
//! values written.

use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::cellgrid::{Cell, CellGrid, CellId, GridFingerprint, PartitionParams};
use crate::distribution::{CellDistribution, DistributionError, EvalRecord};
use crate::geodesy::{DistanceKm, GeoPoint, EARTH_RADIUS_KM};
use crate::selection::{ConfidenceScore, Method};
use crate::selective::{CalibrationResult, RcPoint, SelectiveReport};

pub const GRID_MAGIC: &str = "# geosel grid v1";
pub const PREDICTIONS_MAGIC: &str = "# geosel predictions v1";
const GRID_COLUMNS: &str = "cell_id,center_lat,center_lon,count,depth";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum FormatError {
    /// The text does not parse or holds invalid values.
    #[error("line {line}: {message}")]
    Syntax { line: usize, message: String },
    /// The text parses but refers to something the grid does not have.
    #[error("line {line}: {message}")]
    Consistency { line: usize, message: String },
    #[error("json: {0}")]
    Json(String),
}

impl FormatError {
    fn syntax(line: usize, message: impl Into<String>) -> Self {
        FormatError::Syntax {
            line,
            message: message.into(),
        }
    }

    pub fn is_consistency(&self) -> bool {
        matches!(self, FormatError::Consistency { .. })
    }
}

/// Shortest decimal that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

/// `v` rounded to nine significant digits, printed shortest.
pub fn fmt_f64_sig9(v: f64) -> String {
    let rounded: f64 = format!("{v:.8e}").parse().expect("float formatting parses");
    fmt_f64(rounded)
}

fn parse_f64(line: usize, field: &str, what: &str) -> Result<f64, FormatError> {
    field
        .trim()
        .parse()
        .map_err(|_| FormatError::syntax(line, format!("invalid {what} '{field}'")))
}

fn parse_point(line: usize, lat: &str, lon: &str) -> Result<GeoPoint, FormatError> {
    GeoPoint::new(
        parse_f64(line, lat, "latitude")?,
        parse_f64(line, lon, "longitude")?,
    )
    .map_err(|e| FormatError::syntax(line, e.to_string()))
}

/// Content lines with 1-based line numbers, skipping blanks and `#` comments.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.starts_with('#'))
}

/// Training coordinates, one `lat,lon` per line. A leading `lat,lon`
/// header line is allowed.
pub fn parse_coordinates(text: &str) -> Result<Vec<GeoPoint>, FormatError> {
    let mut points = Vec::new();
    for (k, (line, l)) in content_lines(text).enumerate() {
        if k == 0 && l.trim().eq_ignore_ascii_case("lat,lon") {
            continue;
        }
        let fields: Vec<&str> = l.split(',').collect();
        if fields.len() != 2 {
            return Err(FormatError::syntax(line, "expected 'lat,lon'"));
        }
        points.push(parse_point(line, fields[0], fields[1])?);
    }
    Ok(points)
}

pub fn write_coordinates(points: &[GeoPoint]) -> String {
    let mut out = String::from("lat,lon\n");
    for p in points {
        let _ = writeln!(out, "{},{}", fmt_f64(p.lat()), fmt_f64(p.lon()));
    }
    out
}

pub fn write_grid(grid: &CellGrid) -> String {
    let p = grid.params();
    let mut out = String::new();
    let _ = writeln!(out, "{GRID_MAGIC}");
    let _ = writeln!(
        out,
        "# min_count={} max_count={} max_depth={} earth_radius_km={}",
        p.min_count,
        p.max_count,
        p.max_depth,
        fmt_f64(EARTH_RADIUS_KM)
    );
    let _ = writeln!(out, "{GRID_COLUMNS}");
    for c in grid.cells() {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            c.id,
            fmt_f64(c.center.lat()),
            fmt_f64(c.center.lon()),
            c.count,
            c.depth
        );
    }
    out
}

fn parse_grid_header(line: usize, header: &str) -> Result<PartitionParams, FormatError> {
    let body = header
        .strip_prefix('#')
        .ok_or_else(|| FormatError::syntax(line, "missing parameter header"))?;
    let mut params = PartitionParams::default();
    let mut radius = None;
    for kv in body.split_whitespace() {
        let (key, value) = kv
            .split_once('=')
            .ok_or_else(|| FormatError::syntax(line, format!("malformed header field '{kv}'")))?;
        let bad = || FormatError::syntax(line, format!("invalid value for {key}: '{value}'"));
        match key {
            "min_count" => params.min_count = value.parse().map_err(|_| bad())?,
            "max_count" => params.max_count = value.parse().map_err(|_| bad())?,
            "max_depth" => params.max_depth = value.parse().map_err(|_| bad())?,
            "earth_radius_km" => radius = Some(value.parse::<f64>().map_err(|_| bad())?),
            _ => {
                return Err(FormatError::syntax(
                    line,
                    format!("unknown header field '{key}'"),
                ))
            }
        }
    }
    if radius != Some(EARTH_RADIUS_KM) {
        return Err(FormatError::syntax(
            line,
            format!("earth_radius_km must be {EARTH_RADIUS_KM}"),
        ));
    }
    Ok(params)
}

pub fn parse_grid(text: &str) -> Result<CellGrid, FormatError> {
    let mut lines = text
        .lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')));
    match lines.next() {
        Some((_, GRID_MAGIC)) => {}
        _ => return Err(FormatError::syntax(1, format!("expected '{GRID_MAGIC}'"))),
    }
    let (hline, header) = lines
        .next()
        .ok_or_else(|| FormatError::syntax(2, "missing parameter header"))?;
    let params = parse_grid_header(hline, header)?;
    match lines.next() {
        Some((_, GRID_COLUMNS)) => {}
        _ => return Err(FormatError::syntax(3, format!("expected '{GRID_COLUMNS}'"))),
    }
    let mut cells = Vec::new();
    for (line, l) in lines.filter(|(_, l)| !l.trim().is_empty()) {
        let f: Vec<&str> = l.split(',').collect();
        if f.len() != 5 {
            return Err(FormatError::syntax(line, "expected 5 columns"));
        }
        let raw: u64 = f[0]
            .parse()
            .map_err(|_| FormatError::syntax(line, format!("invalid cell id '{}'", f[0])))?;
        let id = CellId::from_raw(raw).map_err(|e| FormatError::syntax(line, e.to_string()))?;
        let center = parse_point(line, f[1], f[2])?;
        let count = f[3]
            .parse()
            .map_err(|_| FormatError::syntax(line, format!("invalid count '{}'", f[3])))?;
        let depth = f[4]
            .parse()
            .map_err(|_| FormatError::syntax(line, format!("invalid depth '{}'", f[4])))?;
        cells.push(Cell {
            id,
            center,
            count,
            depth,
        });
    }
    let data_start = 4;
    CellGrid::from_cells(cells, params).map_err(|e| FormatError::syntax(data_start, e.to_string()))
}

/// How probabilities are printed in a predictions file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ProbabilityFormat {
    /// Nine significant digits; the loader's sum tolerance absorbs the
    /// rounding.
    Significant9,
    /// Shortest round-trip form; reading back reproduces the records
    /// exactly.
    Exact,
}

fn write_entries(out: &mut String, dist: &CellDistribution, format: ProbabilityFormat) {
    for (k, (id, p)) in dist.entries().iter().enumerate() {
        if k > 0 {
            out.push(' ');
        }
        let v = match format {
            ProbabilityFormat::Significant9 => fmt_f64_sig9(*p),
            ProbabilityFormat::Exact => fmt_f64(*p),
        };
        let _ = write!(out, "{id}:{v}");
    }
}

pub fn write_predictions(
    records: &[EvalRecord],
    grid: &CellGrid,
    format: ProbabilityFormat,
) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{PREDICTIONS_MAGIC} grid={}", grid.fingerprint());
    for r in records {
        let _ = write!(
            out,
            "{}\t{}\t{}\t",
            r.image_id,
            fmt_f64(r.truth.lat()),
            fmt_f64(r.truth.lon())
        );
        write_entries(&mut out, &r.dist, format);
        for pass in r.mc_dists.iter().flatten() {
            out.push('\t');
            write_entries(&mut out, pass, format);
        }
        out.push('\n');
    }
    out
}

fn parse_entries(line: usize, field: &str) -> Result<Vec<(CellId, f64)>, FormatError> {
    field
        .split_whitespace()
        .map(|pair| {
            let (id, p) = pair.split_once(':').ok_or_else(|| {
                FormatError::syntax(line, format!("expected cell_id:p, got '{pair}'"))
            })?;
            let raw: u64 = id
                .parse()
                .map_err(|_| FormatError::syntax(line, format!("invalid cell id '{id}'")))?;
            let id = CellId::from_raw(raw).map_err(|_| FormatError::Consistency {
                line,
                message: format!("unknown cell id {raw}"),
            })?;
            Ok((id, parse_f64(line, p, "probability")?))
        })
        .collect()
}

fn distribution_error(line: usize, image_id: &str, e: DistributionError) -> FormatError {
    let message = format!("record {image_id}: {e}");
    match e {
        DistributionError::UnknownCell(_) | DistributionError::GridMismatch { .. } => {
            FormatError::Consistency { line, message }
        }
        _ => FormatError::Syntax { line, message },
    }
}

/// Parses a predictions file against `grid`. A header naming a different
/// grid fingerprint is a consistency error; a missing header is accepted.
pub fn parse_predictions(text: &str, grid: &CellGrid) -> Result<Vec<EvalRecord>, FormatError> {
    if let Some(first) = text.lines().next() {
        if let Some(rest) = first.strip_prefix(PREDICTIONS_MAGIC) {
            if let Some(fp) = rest.trim().strip_prefix("grid=") {
                let named = GridFingerprint::parse(fp.trim()).ok_or_else(|| {
                    FormatError::syntax(1, format!("invalid grid fingerprint '{fp}'"))
                })?;
                if named != grid.fingerprint() {
                    return Err(FormatError::Consistency {
                        line: 1,
                        message: format!(
                            "predictions were written for grid {named}, not {}",
                            grid.fingerprint()
                        ),
                    });
                }
            }
        }
    }
    let mut records = Vec::new();
    for (line, l) in content_lines(text) {
        let fields: Vec<&str> = l.split('\t').collect();
        if fields.len() < 4 {
            return Err(FormatError::syntax(
                line,
                "expected image_id, true_lat, true_lon and entries separated by tabs",
            ));
        }
        let image_id = fields[0];
        if image_id.is_empty() {
            return Err(FormatError::syntax(line, "empty image_id"));
        }
        let truth = parse_point(line, fields[1], fields[2])?;
        let validate = |field: &str| {
            CellDistribution::validate(parse_entries(line, field)?, grid)
                .map_err(|e| distribution_error(line, image_id, e))
        };
        let dist = validate(fields[3])?;
        let mc = if fields.len() > 4 {
            Some(
                fields[4..]
                    .iter()
                    .map(|f| validate(f))
                    .collect::<Result<Vec<_>, _>>()?,
            )
        } else {
            None
        };
        let record = EvalRecord::new(image_id, truth, dist, mc)
            .map_err(|e| distribution_error(line, image_id, e))?;
        records.push(record);
    }
    Ok(records)
}

pub const SCORES_COLUMNS: &str = "image_id,method,d_km,score,orientation";

/// One row of a scores file.
#[derive(Debug, Clone, PartialEq)]
pub struct ScoreRow<'a> {
    pub image_id: &'a str,
    pub scale: DistanceKm,
    pub score: ConfidenceScore,
}

pub fn write_scores(rows: &[ScoreRow<'_>]) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "{SCORES_COLUMNS}");
    for r in rows {
        let _ = writeln!(
            out,
            "{},{},{},{},{}",
            r.image_id,
            r.score.method,
            fmt_f64(r.scale.value()),
            fmt_f64(r.score.value),
            r.score.orientation.name()
        );
    }
    out
}

/// Points with undefined risk (zero coverage) are omitted.
pub fn write_rc_curve(points: &[RcPoint]) -> String {
    let mut out = String::from("theta,coverage,risk\n");
    for p in points {
        if let Some(risk) = p.risk().value() {
            let _ = writeln!(
                out,
                "{},{},{}",
                fmt_f64(p.theta),
                fmt_f64(p.coverage()),
                fmt_f64(risk)
            );
        }
    }
    out
}

/// Threshold as JSON: a number, or `"inf"` / `"-inf"` for the sentinels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
enum ThetaRepr {
    Finite(f64),
    Sentinel(String),
}

impl From<f64> for ThetaRepr {
    fn from(v: f64) -> Self {
        if v.is_finite() {
            ThetaRepr::Finite(v)
        } else if v > 0.0 {
            ThetaRepr::Sentinel("inf".into())
        } else {
            ThetaRepr::Sentinel("-inf".into())
        }
    }
}

impl ThetaRepr {
    fn value(&self) -> Result<f64, FormatError> {
        match self {
            ThetaRepr::Finite(v) => Ok(*v),
            ThetaRepr::Sentinel(s) if s == "inf" => Ok(f64::INFINITY),
            ThetaRepr::Sentinel(s) if s == "-inf" => Ok(f64::NEG_INFINITY),
            ThetaRepr::Sentinel(s) => Err(FormatError::Json(format!("invalid theta '{s}'"))),
        }
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationJson {
    method: String,
    scale_km: f64,
    theta_star: ThetaRepr,
    target_coverage: f64,
    achieved_coverage: f64,
    n_validation: usize,
}

pub fn write_calibration(c: &CalibrationResult) -> String {
    let json = CalibrationJson {
        method: c.method.name().to_string(),
        scale_km: c.scale.value(),
        theta_star: c.theta_star.into(),
        target_coverage: c.target_coverage,
        achieved_coverage: c.achieved_coverage,
        n_validation: c.n_validation,
    };
    serde_json::to_string_pretty(&json).expect("plain data serializes") + "\n"
}

pub fn parse_calibration(text: &str) -> Result<CalibrationResult, FormatError> {
    let json: CalibrationJson =
        serde_json::from_str(text).map_err(|e| FormatError::Json(e.to_string()))?;
    let method: Method = json.method.parse().map_err(FormatError::Json)?;
    Ok(CalibrationResult {
        method,
        scale: DistanceKm::new(json.scale_km).map_err(|e| FormatError::Json(e.to_string()))?,
        theta_star: json.theta_star.value()?,
        target_coverage: json.target_coverage,
        achieved_coverage: json.achieved_coverage,
        n_validation: json.n_validation,
    })
}

#[derive(Serialize)]
struct ConfusionJson {
    tp: usize,
    fp: usize,
    tn: usize,
    #[serde(rename = "fn")]
    fn_: usize,
}

#[derive(Serialize)]
struct AccuracyJson {
    scales_km: Vec<f64>,
    all: Vec<f64>,
    localizable: Option<Vec<f64>>,
    non_localizable: Option<Vec<f64>>,
}

#[derive(Serialize)]
struct ReportJson {
    method: String,
    scale_km: f64,
    theta: ThetaRepr,
    n: usize,
    confusion: ConfusionJson,
    accuracy: f64,
    f1: f64,
    optimal_risk: Option<f64>,
    optimal_coverage: f64,
    geolocation_accuracy: AccuracyJson,
}

pub fn write_report(r: &SelectiveReport) -> String {
    let json = ReportJson {
        method: r.method.name().to_string(),
        scale_km: r.scale.value(),
        theta: r.theta.into(),
        n: r.n,
        confusion: ConfusionJson {
            tp: r.confusion.tp,
            fp: r.confusion.fp,
            tn: r.confusion.tn,
            fn_: r.confusion.fn_,
        },
        accuracy: r.accuracy,
        f1: r.f1,
        optimal_risk: r.optimal_risk.value(),
        optimal_coverage: r.optimal_coverage,
        geolocation_accuracy: AccuracyJson {
            scales_km: r.scales.iter().map(|d| d.value()).collect(),
            all: r.accuracy_all.clone(),
            localizable: r.accuracy_accepted.clone(),
            non_localizable: r.accuracy_rejected.clone(),
        },
    };
    serde_json::to_string_pretty(&json).expect("plain data serializes") + "\n"
}

/// Planted ground truth of a synthetic corpus, CSV `image_id,planted`.
pub fn write_planted_labels(records: &[EvalRecord], planted: &[bool]) -> String {
    let mut out = String::from("image_id,planted\n");
    for (r, &p) in records.iter().zip(planted) {
        let _ = writeln!(
            out,
            "{},{}",
            r.image_id,
            if p { "localizable" } else { "dispersed" }
        );
    }
    out
}

pub fn parse_planted_labels(text: &str) -> Result<Vec<(String, bool)>, FormatError> {
    content_lines(text)
        .skip(1)
        .map(|(line, l)| {
            let (id, label) = l
                .split_once(',')
                .ok_or_else(|| FormatError::syntax(line, "expected image_id,planted"))?;
            let planted = match label {
                "localizable" => true,
                "dispersed" => false,
                other => {
                    return Err(FormatError::syntax(
                        line,
                        format!("unknown label '{other}'"),
                    ))
                }
            };
            Ok((id.to_string(), planted))
        })
        .collect()
}
