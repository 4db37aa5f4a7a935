//! Telemetry and irradiance CSV files.
//!
//! Timestamps are UTC hour starts written `YYYY-MM-DDTHH:00:00Z`. Parsing
//! checks every row, sorts by time and rejects duplicates; turning records
//! into hourly series fills short gaps and refuses long ones.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDateTime;
use log::warn;
use serde::{Deserialize, Serialize};
use simctl_core::{Hour, HourlyTimeSeries, SeriesKind};
use thiserror::Error;

pub const TELEMETRY_HEADER: [&str; 4] = ["timestamp", "pv_energy_wh", "cons_energy_wh", "soc_pct"];
pub const IRRADIANCE_HEADER: [&str; 3] = ["timestamp", "ghi_wh_m2", "source"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("line {line}: {reason}")]
    MalformedRow { line: u64, reason: String },
    #[error("line {line}: duplicate timestamp {timestamp}")]
    DuplicateTimestamp { line: u64, timestamp: Hour },
    #[error("no data rows")]
    EmptyFile,
    #[error("gap of {hours} h after {after} exceeds the {max_h} h limit")]
    GapTooLong { after: Hour, hours: i64, max_h: i64 },
    #[error("no {0} irradiance rows")]
    MissingSource(IrradianceSource),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub timestamp: Hour,
    pub pv_energy_wh: f64,
    pub cons_energy_wh: f64,
    pub soc_pct: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IrradianceSource {
    Forecast,
    Analysis,
}

impl std::fmt::Display for IrradianceSource {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            IrradianceSource::Forecast => "forecast",
            IrradianceSource::Analysis => "analysis",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct IrradianceRecord {
    pub timestamp: Hour,
    pub ghi_wh_m2: f64,
    pub source: IrradianceSource,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct GapPolicy {
    /// Longest run of missing hours that is filled rather than rejected.
    pub max_gap_h: i64,
}

impl Default for GapPolicy {
    fn default() -> Self {
        GapPolicy { max_gap_h: 6 }
    }
}

/// The three telemetry channels on one hourly grid.
#[derive(Clone, Debug, PartialEq)]
pub struct TelemetrySeries {
    pub pv: HourlyTimeSeries,
    pub cons: HourlyTimeSeries,
    pub soc: HourlyTimeSeries,
}

/// Both irradiance sources, each on its own hourly grid.
#[derive(Clone, Debug, PartialEq)]
pub struct IrradianceSeries {
    pub forecast: HourlyTimeSeries,
    pub analysis: HourlyTimeSeries,
}

pub fn parse_timestamp(s: &str) -> Option<Hour> {
    let dt = NaiveDateTime::parse_from_str(s.trim(), "%Y-%m-%dT%H:%M:%SZ").ok()?;
    Hour::from_naive_utc(dt)
}

fn open(path: &Path) -> Result<File, IngestError> {
    File::open(path).map_err(|source| IngestError::Io { path: path.display().to_string(), source })
}

fn reader<R: Read>(r: R) -> csv::Reader<R> {
    csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(r)
}

fn check_header(rdr: &mut csv::Reader<impl Read>, want: &[&str]) -> Result<(), IngestError> {
    let header = rdr.headers().map_err(|e| IngestError::MalformedRow { line: 1, reason: e.to_string() })?;
    if header.iter().ne(want.iter().copied()) {
        return Err(IngestError::MalformedRow {
            line: 1,
            reason: format!("expected header `{}`", want.join(",")),
        });
    }
    Ok(())
}

fn number(field: Option<&str>, name: &str, line: u64) -> Result<f64, IngestError> {
    let raw = field.ok_or_else(|| IngestError::MalformedRow { line, reason: format!("missing {name}") })?;
    match raw.parse::<f64>() {
        Ok(v) if v.is_finite() => Ok(v),
        _ => Err(IngestError::MalformedRow { line, reason: format!("{name} `{raw}` is not a number") }),
    }
}

fn timestamp(field: Option<&str>, line: u64) -> Result<Hour, IngestError> {
    let raw = field.unwrap_or("");
    parse_timestamp(raw)
        .ok_or_else(|| IngestError::MalformedRow { line, reason: format!("timestamp `{raw}` is not a UTC hour") })
}

/// Sorts by timestamp and rejects repeats, reporting the later line.
fn sort_unique<T>(mut rows: Vec<(u64, T)>, key: impl Fn(&T) -> Hour) -> Result<Vec<T>, IngestError> {
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    rows.sort_by_key(|(line, r)| (key(r), *line));
    for w in rows.windows(2) {
        if key(&w[0].1) == key(&w[1].1) {
            return Err(IngestError::DuplicateTimestamp { line: w[1].0, timestamp: key(&w[1].1) });
        }
    }
    Ok(rows.into_iter().map(|(_, r)| r).collect())
}

pub fn parse_telemetry<R: Read>(input: R) -> Result<Vec<TelemetryRecord>, IngestError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &TELEMETRY_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| IngestError::MalformedRow { line, reason: e.to_string() })?;
        let r = TelemetryRecord {
            timestamp: timestamp(rec.get(0), line)?,
            pv_energy_wh: number(rec.get(1), "pv_energy_wh", line)?,
            cons_energy_wh: number(rec.get(2), "cons_energy_wh", line)?,
            soc_pct: number(rec.get(3), "soc_pct", line)?,
        };
        if r.pv_energy_wh < 0.0 || r.cons_energy_wh < 0.0 {
            return Err(IngestError::MalformedRow { line, reason: "negative energy".into() });
        }
        if !(0.0..=100.0).contains(&r.soc_pct) {
            return Err(IngestError::MalformedRow { line, reason: format!("soc_pct {} outside [0, 100]", r.soc_pct) });
        }
        rows.push((line, r));
    }
    sort_unique(rows, |r| r.timestamp)
}

pub fn parse_telemetry_csv(path: &Path) -> Result<Vec<TelemetryRecord>, IngestError> {
    parse_telemetry(open(path)?)
}

pub fn parse_irradiance<R: Read>(input: R) -> Result<Vec<IrradianceRecord>, IngestError> {
    let mut rdr = reader(input);
    check_header(&mut rdr, &IRRADIANCE_HEADER)?;
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i as u64 + 2;
        let rec = rec.map_err(|e| IngestError::MalformedRow { line, reason: e.to_string() })?;
        let source = match rec.get(2) {
            Some("forecast") => IrradianceSource::Forecast,
            Some("analysis") => IrradianceSource::Analysis,
            other => {
                return Err(IngestError::MalformedRow {
                    line,
                    reason: format!("source `{}` is neither forecast nor analysis", other.unwrap_or("")),
                })
            }
        };
        let r = IrradianceRecord {
            timestamp: timestamp(rec.get(0), line)?,
            ghi_wh_m2: number(rec.get(1), "ghi_wh_m2", line)?,
            source,
        };
        if r.ghi_wh_m2 < 0.0 {
            return Err(IngestError::MalformedRow { line, reason: "negative ghi_wh_m2".into() });
        }
        rows.push((line, r));
    }
    if rows.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    // Each source has its own timeline, so duplicates are checked per source.
    let (fc, an): (Vec<_>, Vec<_>) = rows.into_iter().partition(|(_, r)| r.source == IrradianceSource::Forecast);
    let mut out = Vec::new();
    for part in [fc, an] {
        if !part.is_empty() {
            out.extend(sort_unique(part, |r| r.timestamp)?);
        }
    }
    Ok(out)
}

pub fn parse_irradiance_csv(path: &Path) -> Result<Vec<IrradianceRecord>, IngestError> {
    parse_irradiance(open(path)?)
}

#[derive(Clone, Copy)]
enum Fill {
    Zero,
    CarryForward,
}

/// Places time-sorted samples on a contiguous hourly grid.
fn to_grid(
    samples: &[(Hour, f64)],
    kind: SeriesKind,
    fill: Fill,
    policy: &GapPolicy,
    channel: &str,
) -> Result<HourlyTimeSeries, IngestError> {
    let (first, _) = *samples.first().ok_or(IngestError::EmptyFile)?;
    let mut values = Vec::with_capacity(samples.len());
    let mut prev: Option<(Hour, f64)> = None;
    for &(t, v) in samples {
        if let Some((pt, pv)) = prev {
            let missing = t - pt - 1;
            if missing > policy.max_gap_h {
                return Err(IngestError::GapTooLong { after: pt, hours: missing, max_h: policy.max_gap_h });
            }
            if missing > 0 {
                warn!("{channel}: filling {missing} missing hour(s) after {pt}");
                let filler = match fill {
                    Fill::Zero => 0.0,
                    Fill::CarryForward => pv,
                };
                values.extend(std::iter::repeat_n(filler, missing as usize));
            }
        }
        values.push(v);
        prev = Some((t, v));
    }
    HourlyTimeSeries::new(first, values, kind).map_err(|e| IngestError::MalformedRow { line: 0, reason: e.to_string() })
}

pub fn telemetry_to_hourly(records: &[TelemetryRecord], policy: &GapPolicy) -> Result<TelemetrySeries, IngestError> {
    let pick = |f: fn(&TelemetryRecord) -> f64| -> Vec<(Hour, f64)> { records.iter().map(|r| (r.timestamp, f(r))).collect() };
    Ok(TelemetrySeries {
        pv: to_grid(&pick(|r| r.pv_energy_wh), SeriesKind::EnergyWh, Fill::Zero, policy, "pv_energy_wh")?,
        cons: to_grid(&pick(|r| r.cons_energy_wh), SeriesKind::EnergyWh, Fill::Zero, policy, "cons_energy_wh")?,
        soc: to_grid(&pick(|r| r.soc_pct), SeriesKind::SocPct, Fill::CarryForward, policy, "soc_pct")?,
    })
}

pub fn irradiance_to_hourly(
    records: &[IrradianceRecord],
    source: IrradianceSource,
    policy: &GapPolicy,
) -> Result<HourlyTimeSeries, IngestError> {
    let samples: Vec<(Hour, f64)> =
        records.iter().filter(|r| r.source == source).map(|r| (r.timestamp, r.ghi_wh_m2)).collect();
    if samples.is_empty() {
        return Err(IngestError::MissingSource(source));
    }
    to_grid(&samples, SeriesKind::IrradiationWhM2, Fill::Zero, policy, &format!("ghi ({source})"))
}

pub fn irradiance_series(records: &[IrradianceRecord], policy: &GapPolicy) -> Result<IrradianceSeries, IngestError> {
    Ok(IrradianceSeries {
        forecast: irradiance_to_hourly(records, IrradianceSource::Forecast, policy)?,
        analysis: irradiance_to_hourly(records, IrradianceSource::Analysis, policy)?,
    })
}

pub fn write_telemetry<W: Write>(out: W, records: &[TelemetryRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TELEMETRY_HEADER)?;
    for r in records {
        w.write_record([
            r.timestamp.to_string(),
            r.pv_energy_wh.to_string(),
            r.cons_energy_wh.to_string(),
            r.soc_pct.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_irradiance<W: Write>(out: W, records: &[IrradianceRecord]) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(IRRADIANCE_HEADER)?;
    for r in records {
        w.write_record([r.timestamp.to_string(), r.ghi_wh_m2.to_string(), r.source.to_string()])?;
    }
    w.flush()?;
    Ok(())
}
