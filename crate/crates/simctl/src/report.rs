//! Report files: sweep tables, KPI and sweep JSON, trajectories, setpoint logs,
//! plot data and forecasts.
//!
//! Floats are written in Rust's shortest round-trip form, so every CSV and
//! JSON file here parses back to exactly the values that were written.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use simctl_core::analysis::{plot_rows, FanRow, KpiReport, SweepFigure, SweepResult, SweepRow};
use simctl_core::forecast::EnergyTriplet;
use simctl_core::simulator::ScenarioOutput;
use simctl_core::Hour;

use crate::error::AppError;
use crate::pipeline::ErrorStats;

pub const SWEEP_HEADER: [&str; 12] = [
    "soc_low_limit_pct",
    "system_id",
    "avg_soc_pct",
    "full_charge_h_per_day",
    "outage_h",
    "pv_gen_wh",
    "consumption_wh",
    "efficiency",
    "dcr",
    "capacity_factor",
    "soc_ci_lo",
    "soc_ci_hi",
];

pub const TRAJECTORY_HEADER: [&str; 7] =
    ["timestamp", "soc_pct", "pv_direct_wh", "batt_charge_wh", "batt_discharge_wh", "curtailed_wh", "unserved_wh"];

pub const SETPOINT_HEADER: [&str; 8] =
    ["t_p", "soc_now", "soc_low_goal", "soc_up_limit", "t_start_charge", "t_sd", "t_ed", "mode"];

pub const FAN_HEADER: [&str; 6] = ["hour_of_day", "p5", "p25", "p50", "p75", "p95"];

pub const FORECAST_HEADER: [&str; 4] = ["timestamp", "low_wh", "exp_wh", "up_wh"];

fn csv_err(path: &Path, e: csv::Error) -> AppError {
    AppError::Report(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, AppError> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    }
    File::create(path).map(BufWriter::new).map_err(|e| AppError::io(path, e))
}

/// Writes a CSV file from a header and string rows.
fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), AppError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_writer(create(path)?);
    w.write_record(header).map_err(|e| csv_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| csv_err(path, e))?;
    }
    w.flush().map_err(|e| AppError::io(path, e))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), AppError> {
    let mut f = create(path)?;
    serde_json::to_writer_pretty(&mut f, value).map_err(|e| AppError::Report(e.to_string()))?;
    f.write_all(b"\n").and_then(|_| f.flush()).map_err(|e| AppError::io(path, e))
}

fn sweep_record(r: &SweepRow) -> Vec<String> {
    let k = &r.kpis;
    vec![
        r.soc_low_limit_pct.to_string(),
        r.system_id.clone(),
        k.avg_soc_pct.to_string(),
        k.full_charge_hours_per_day.to_string(),
        k.outage_hours.to_string(),
        k.pv_generation_wh.to_string(),
        k.consumption_wh.to_string(),
        k.avg_system_efficiency.to_string(),
        k.direct_consumption_rate.to_string(),
        k.capacity_factor.to_string(),
        k.soc_ci_lo_pct.to_string(),
        k.soc_ci_hi_pct.to_string(),
    ]
}

fn non_empty(result: &SweepResult) -> Result<(), AppError> {
    if result.rows.is_empty() {
        Err(AppError::Report("sweep has no rows".into()))
    } else {
        Ok(())
    }
}

/// `sweep.csv`; an empty sweep is an error and creates no file.
pub fn write_sweep_csv(path: &Path, result: &SweepResult) -> Result<(), AppError> {
    non_empty(result)?;
    write_csv(path, &SWEEP_HEADER, result.rows.iter().map(sweep_record))
}

pub fn parse_sweep_csv<R: Read>(input: R) -> Result<SweepResult, AppError> {
    let mut rdr = csv::Reader::from_reader(input);
    let bad = |line: usize, what: &str| AppError::Report(format!("sweep line {line}: {what}"));
    let header = rdr.headers().map_err(|e| AppError::Report(e.to_string()))?;
    if header.iter().ne(SWEEP_HEADER.iter().copied()) {
        return Err(bad(1, "unexpected header"));
    }
    let mut rows = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let line = i + 2;
        let rec = rec.map_err(|e| bad(line, &e.to_string()))?;
        let f = |j: usize| rec.get(j).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| bad(line, SWEEP_HEADER[j]));
        rows.push(SweepRow {
            soc_low_limit_pct: f(0)?,
            system_id: rec.get(1).unwrap_or_default().to_string(),
            kpis: KpiReport {
                avg_soc_pct: f(2)?,
                full_charge_hours_per_day: f(3)?,
                outage_hours: rec.get(4).and_then(|s| s.parse().ok()).ok_or_else(|| bad(line, "outage_h"))?,
                pv_generation_wh: f(5)?,
                consumption_wh: f(6)?,
                avg_system_efficiency: f(7)?,
                direct_consumption_rate: f(8)?,
                capacity_factor: f(9)?,
                soc_ci_lo_pct: f(10)?,
                soc_ci_hi_pct: f(11)?,
            },
        });
    }
    Ok(SweepResult { rows })
}

/// Provenance stamped into every JSON report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunMeta {
    pub config_hash: String,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    #[serde(flatten)]
    pub meta: RunMeta,
    pub result: SweepResult,
}

pub fn write_sweep_json(path: &Path, report: &SweepReport) -> Result<(), AppError> {
    non_empty(&report.result)?;
    write_json(path, report)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiFile {
    #[serde(flatten)]
    pub meta: RunMeta,
    pub system_id: String,
    pub strategy: String,
    /// Absent for the greedy baseline.
    pub soc_low_limit_pct: Option<f64>,
    pub kpis: KpiReport,
}

pub fn write_kpi_json(path: &Path, report: &KpiFile) -> Result<(), AppError> {
    write_json(path, report)
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, AppError> {
    let text = fs::read_to_string(path).map_err(|e| AppError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| AppError::Report(format!("{}: {e}", path.display())))
}

pub fn write_trajectory(path: &Path, out: &ScenarioOutput) -> Result<(), AppError> {
    let rows = out.soc.iter().zip(&out.steps).map(|((t, soc), s)| {
        vec![
            t.to_string(),
            soc.to_string(),
            s.pv_direct_wh.to_string(),
            s.batt_charge_wh.to_string(),
            s.batt_discharge_wh.to_string(),
            s.curtailed_wh.to_string(),
            s.unserved_wh.to_string(),
        ]
    });
    write_csv(path, &TRAJECTORY_HEADER, rows)
}

pub fn write_setpoints(path: &Path, out: &ScenarioOutput) -> Result<(), AppError> {
    let rows = out.setpoints.iter().map(|r| {
        vec![
            r.t_p.to_string(),
            r.soc_now.to_string(),
            r.soc_low_goal.to_string(),
            r.soc_up_limit.to_string(),
            r.t_start_charge.to_string(),
            r.t_sd.to_string(),
            r.t_ed.to_string(),
            r.mode.as_str().to_string(),
        ]
    });
    write_csv(path, &SETPOINT_HEADER, rows)
}

pub fn write_fan_chart(path: &Path, rows: &[FanRow]) -> Result<(), AppError> {
    write_csv(
        path,
        &FAN_HEADER,
        rows.iter().map(|r| {
            let mut v = vec![r.hour_of_day.to_string()];
            v.extend(r.percentiles.iter().map(f64::to_string));
            v
        }),
    )
}

pub fn plot_file_name(figure: SweepFigure) -> String {
    format!("plot_{}.csv", figure.name())
}

/// One long-format file per indicator: `soc_low_limit_pct,system_id,value`.
pub fn write_plot_data(dir: &Path, result: &SweepResult) -> Result<Vec<PathBuf>, AppError> {
    non_empty(result)?;
    SweepFigure::ALL
        .iter()
        .map(|&fig| {
            let path = dir.join(plot_file_name(fig));
            let rows =
                plot_rows(result, fig).into_iter().map(|r| vec![r.limit.to_string(), r.system_id, r.value.to_string()]);
            write_csv(&path, &["soc_low_limit_pct", "system_id", "value"], rows)?;
            Ok(path)
        })
        .collect()
}

pub fn write_forecast(path: &Path, start: Hour, triplets: &[EnergyTriplet]) -> Result<(), AppError> {
    let rows = triplets
        .iter()
        .enumerate()
        .map(|(i, t)| vec![(start + i as i64).to_string(), t.low.to_string(), t.exp.to_string(), t.up.to_string()]);
    write_csv(path, &FORECAST_HEADER, rows)
}

/// Forecast skill against telemetry, written by `simctl forecast`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AccuracyReport {
    #[serde(flatten)]
    pub meta: RunMeta,
    pub system_id: String,
    pub date: String,
    pub load: Option<ErrorStats>,
    /// Only hours whose PV telemetry is not curtailed by a full battery.
    pub pv: Option<ErrorStats>,
}

pub fn write_accuracy(path: &Path, report: &AccuracyReport) -> Result<(), AppError> {
    write_json(path, report)
}
