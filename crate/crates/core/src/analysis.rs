//! Operating indicators, the SOC-limit sweep and plot data.

use alloc::string::String;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::Forecaster;
use crate::math;
use crate::model::{HourlyTimeSeries, SiteConfig};
use crate::simulator::{run_scenario, RunOptions, ScenarioOutput, SimError, StepResult};
use crate::strategy::{Strategy, StrategyParams};

/// SOC at or above this counts as fully charged.
pub const FULL_CHARGE_SOC_PCT: f64 = 99.5;

/// Fan-chart percentiles.
pub const FAN_PERCENTILES: [f64; 5] = [5.0, 25.0, 50.0, 75.0, 95.0];

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnalysisError {
    #[error("nothing to evaluate: the span is empty")]
    EmptySpan,
    #[error("the sweep has no rows")]
    EmptySweep,
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct KpiReport {
    /// PV energy harvested (direct use plus charging).
    pub pv_generation_wh: f64,
    /// Load energy served.
    pub consumption_wh: f64,
    pub avg_system_efficiency: f64,
    pub soc_ci_lo_pct: f64,
    pub soc_ci_hi_pct: f64,
    pub direct_consumption_rate: f64,
    pub capacity_factor: f64,
    pub outage_hours: u32,
    pub avg_soc_pct: f64,
    pub full_charge_hours_per_day: f64,
}

fn ratio(a: f64, b: f64) -> f64 {
    if b > 0.0 {
        a / b
    } else {
        0.0
    }
}

/// Indicators over a simulated span. The SOC band holds the central 75% of
/// hourly SOC values, percentiles interpolated linearly.
pub fn compute_kpis(soc: &HourlyTimeSeries, steps: &[StepResult], site: &SiteConfig) -> Result<KpiReport, AnalysisError> {
    if soc.is_empty() || steps.is_empty() {
        return Err(AnalysisError::EmptySpan);
    }
    let hours = steps.len() as f64;
    let generation: f64 = steps.iter().map(|s| s.pv_direct_wh + s.pv_charge_input_wh).sum();
    let served: f64 = steps.iter().map(StepResult::served_wh).sum();
    let direct: f64 = steps.iter().map(|s| s.load_direct_wh).sum();
    let outages = steps.iter().filter(|s| s.is_outage()).count() as u32;

    let mut sorted = soc.values().to_vec();
    sorted.sort_by(f64::total_cmp);
    let full = soc.values().iter().filter(|&&v| v >= FULL_CHARGE_SOC_PCT).count() as f64;

    Ok(KpiReport {
        pv_generation_wh: generation,
        consumption_wh: served,
        avg_system_efficiency: ratio(served, generation),
        soc_ci_lo_pct: math::percentile_sorted(&sorted, 12.5),
        soc_ci_hi_pct: math::percentile_sorted(&sorted, 87.5),
        direct_consumption_rate: ratio(direct, served),
        capacity_factor: generation / hours / site.pv_peak_w,
        outage_hours: outages,
        avg_soc_pct: math::mean(soc.values()),
        full_charge_hours_per_day: full / (soc.len() as f64 / 24.0),
    })
}

/// Indicators of a scenario run.
pub fn scenario_kpis(out: &ScenarioOutput, site: &SiteConfig) -> Result<KpiReport, AnalysisError> {
    compute_kpis(&out.soc, &out.steps, site)
}

/// Shares of the demanded energy served directly, served from the battery,
/// and not served.
pub fn load_shares(steps: &[StepResult]) -> (f64, f64, f64) {
    let direct: f64 = steps.iter().map(|s| s.load_direct_wh).sum();
    let battery: f64 = steps.iter().map(|s| s.load_battery_wh).sum();
    let unserved: f64 = steps.iter().map(|s| s.unserved_wh).sum();
    let total = direct + battery + unserved;
    (ratio(direct, total), ratio(battery, total), ratio(unserved, total))
}

/// `n` limits evenly spaced over `[lo, hi]`, ascending.
pub fn sweep_limits(n: usize, lo: f64, hi: f64) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => alloc::vec![hi],
        _ => (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect(),
    }
}

/// The default sweep: 40 limits from 20% to 100%.
pub fn default_sweep_limits() -> Vec<f64> {
    sweep_limits(40, 20.0, 100.0)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub soc_low_limit_pct: f64,
    pub system_id: String,
    pub kpis: KpiReport,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn extend(&mut self, other: SweepResult) {
        self.rows.extend(other.rows);
    }

    pub fn for_system<'a>(&'a self, id: &'a str) -> impl Iterator<Item = &'a SweepRow> + 'a {
        self.rows.iter().filter(move |r| r.system_id == id)
    }
}

/// Everything one system's sweep needs.
pub struct SweepInputs<'a> {
    pub system_id: &'a str,
    pub pv_potential: &'a HourlyTimeSeries,
    pub load: &'a HourlyTimeSeries,
    pub forecaster: &'a dyn Forecaster,
    pub site: &'a SiteConfig,
    pub eta_charge: f64,
    pub options: RunOptions,
}

/// Runs the forecast-based strategy once per limit, in ascending order.
pub fn sweep_soc_low_limit(inputs: &SweepInputs<'_>, limits: &[f64]) -> Result<SweepResult, AnalysisError> {
    if limits.is_empty() {
        return Err(AnalysisError::EmptySweep);
    }
    let mut sorted = limits.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut rows = Vec::with_capacity(sorted.len());
    for limit in sorted {
        let params = StrategyParams {
            soc_low_limit_pct: limit,
            e_batt_wh: inputs.site.battery.capacity_wh,
            eta_charge: inputs.eta_charge,
        };
        let out = run_scenario(
            inputs.pv_potential,
            inputs.load,
            &Strategy::ForecastBased(params),
            Some(inputs.forecaster),
            inputs.site,
            &inputs.options,
        )?;
        rows.push(SweepRow {
            soc_low_limit_pct: limit,
            system_id: String::from(inputs.system_id),
            kpis: scenario_kpis(&out, inputs.site)?,
        });
    }
    Ok(SweepResult { rows })
}

/// Which indicator a plot-data file carries.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SweepFigure {
    OutageHours,
    AvgSoc,
    FullChargeHours,
}

impl SweepFigure {
    pub const ALL: [SweepFigure; 3] = [SweepFigure::OutageHours, SweepFigure::AvgSoc, SweepFigure::FullChargeHours];

    pub fn name(&self) -> &'static str {
        match self {
            SweepFigure::OutageHours => "outage_hours",
            SweepFigure::AvgSoc => "avg_soc",
            SweepFigure::FullChargeHours => "full_charge_hours_per_day",
        }
    }

    fn value(&self, k: &KpiReport) -> f64 {
        match self {
            SweepFigure::OutageHours => k.outage_hours as f64,
            SweepFigure::AvgSoc => k.avg_soc_pct,
            SweepFigure::FullChargeHours => k.full_charge_hours_per_day,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlotRow {
    pub limit: f64,
    pub system_id: String,
    pub value: f64,
}

/// Long-format rows for one indicator, one per sweep row.
pub fn plot_rows(result: &SweepResult, figure: SweepFigure) -> Vec<PlotRow> {
    result
        .rows
        .iter()
        .map(|r| PlotRow { limit: r.soc_low_limit_pct, system_id: r.system_id.clone(), value: figure.value(&r.kpis) })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FanRow {
    pub hour_of_day: usize,
    /// Values at [`FAN_PERCENTILES`].
    pub percentiles: [f64; 5],
}

/// Hour-of-day percentiles of a series, in local time.
pub fn fan_chart(series: &HourlyTimeSeries, utc_offset_h: i32) -> Result<Vec<FanRow>, AnalysisError> {
    if series.is_empty() {
        return Err(AnalysisError::EmptySpan);
    }
    let mut by_hour: Vec<Vec<f64>> = (0..24).map(|_| Vec::new()).collect();
    for (h, v) in series.iter() {
        by_hour[h.local_hour(utc_offset_h)].push(v);
    }
    Ok(by_hour
        .into_iter()
        .enumerate()
        .filter(|(_, v)| !v.is_empty())
        .map(|(hour, mut v)| {
            v.sort_by(f64::total_cmp);
            let mut p = [0.0; 5];
            for (slot, q) in p.iter_mut().zip(FAN_PERCENTILES) {
                *slot = math::percentile_sorted(&v, q);
            }
            FanRow { hour_of_day: hour, percentiles: p }
        })
        .collect())
}
