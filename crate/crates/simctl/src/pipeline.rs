//! From configured input files to simulation-ready series and forecasters.

use log::info;
use simctl_core::analysis::{scenario_kpis, sweep_limits, sweep_soc_low_limit, KpiReport, SweepInputs, SweepResult};
use simctl_core::forecast::pv::curtailment_mask;
use simctl_core::forecast::{
    ClusterSettings, DayAheadForecaster, Forecaster, LoadForecaster, LoadSettings, OracleForecaster, PvForecaster,
};
use simctl_core::simulator::{reconstruct_potential_pv, run_scenario, RunOptions, ScenarioOutput};
use simctl_core::strategy::{PeriodOptions, Strategy, StrategyParams};
use simctl_core::{Hour, HourlyTimeSeries, SiteConfig};

use crate::config::{ForecastMode, RunConfig, StrategyKind, SystemConfig};
use crate::error::AppError;
use crate::ingest::{self, GapPolicy, IngestError, IrradianceSeries, TelemetrySeries};
use crate::synth::SyntheticSystem;

/// One system's files, parsed onto hourly grids.
#[derive(Clone, Debug)]
pub struct SystemData {
    pub id: String,
    pub site: SiteConfig,
    pub telemetry: TelemetrySeries,
    pub irradiance: IrradianceSeries,
}

pub fn load_system(cfg: &RunConfig, sys: &SystemConfig) -> Result<SystemData, AppError> {
    let policy = GapPolicy { max_gap_h: cfg.forecaster.max_gap_h };
    let tele = ingest::parse_telemetry_csv(&sys.telemetry)?;
    let telemetry = ingest::telemetry_to_hourly(&tele, &policy)?;
    let irr = ingest::parse_irradiance_csv(&sys.irradiance)?;
    let irradiance = ingest::irradiance_series(&irr, &policy)?;
    Ok(SystemData { id: sys.id.clone(), site: cfg.site_for(sys).clone(), telemetry, irradiance })
}

impl From<&SyntheticSystem> for SystemData {
    /// What the system's files would contain, without the round trip
    /// through disk.
    fn from(s: &SyntheticSystem) -> Self {
        SystemData {
            id: s.id.clone(),
            site: s.site.clone(),
            telemetry: TelemetrySeries { pv: s.pv_delivered.clone(), cons: s.load.clone(), soc: s.soc.clone() },
            irradiance: IrradianceSeries { forecast: s.ghi_forecast.clone(), analysis: s.ghi_analysis.clone() },
        }
    }
}

fn window(s: &HourlyTimeSeries, from: Hour, to: Hour) -> Result<HourlyTimeSeries, AppError> {
    Ok(HourlyTimeSeries::new(from, s.window(from, to).to_vec(), s.kind())?)
}

/// The fitted forecasting models of one system.
#[derive(Clone, Debug)]
pub struct FittedModels {
    pub load: LoadForecaster,
    pub pv: PvForecaster,
}

pub fn fit_models(cfg: &RunConfig, data: &SystemData) -> Result<FittedModels, AppError> {
    let f = &cfg.forecaster;
    let settings = LoadSettings {
        clusters: ClusterSettings {
            k_max: f.k_max,
            restarts: f.kmeans_restarts,
            seed: cfg.seed,
            utc_offset_h: data.site.timezone_offset_h,
        },
        order_grid: f.order_grid.clone(),
        z: f.z,
    };
    let load = LoadForecaster::fit(&data.telemetry.cons, &settings)?;
    let t = &data.telemetry;
    let pv = PvForecaster::fit(data.site.clone(), &t.pv, &t.soc, &data.irradiance.analysis, f.z)?;
    info!(
        "{}: {} load cluster(s); PV slope {:.3} W per Wh/m², residual sd {:.1} Wh",
        data.id, load.clusters.k, pv.model.slope, pv.model.residual_std
    );
    Ok(FittedModels { load, pv })
}

/// Everything a simulation of one system needs.
pub struct Prepared {
    pub id: String,
    pub site: SiteConfig,
    pub load: HourlyTimeSeries,
    pub pv_potential: HourlyTimeSeries,
    pub forecaster: Box<dyn Forecaster>,
    pub options: RunOptions,
    pub eta_charge: f64,
}

/// Fits the models, reconstructs the PV potential over the hours covered by
/// both telemetry and irradiation analysis, and builds the forecaster.
pub fn prepare(cfg: &RunConfig, data: &SystemData) -> Result<Prepared, AppError> {
    let t = &data.telemetry;
    let an = &data.irradiance.analysis;
    let from = t.cons.start().max(an.start());
    let to = t.cons.end().min(an.end());
    if to <= from {
        return Err(IngestError::EmptyFile.into());
    }
    let load = window(&t.cons, from, to)?;
    let models = fit_models(cfg, data)?;
    let pv_potential = reconstruct_potential_pv(&window(an, from, to)?, &models.pv.model, &data.site)?;
    let forecaster: Box<dyn Forecaster> = match cfg.forecaster.mode {
        ForecastMode::Oracle => Box::new(OracleForecaster::new(&pv_potential, &load)?),
        ForecastMode::Fitted => {
            Box::new(DayAheadForecaster::build(&models.load, &models.pv, &data.irradiance.forecast, from, to)?)
        }
    };
    let initial = cfg.simulation.initial_soc_pct.or_else(|| t.soc.get(from)).unwrap_or(100.0);
    Ok(Prepared {
        id: data.id.clone(),
        site: data.site.clone(),
        load,
        pv_potential,
        forecaster,
        options: RunOptions {
            initial_soc_pct: initial,
            periods: PeriodOptions {
                dead_band_pct_per_h: cfg.strategy.dead_band_pct_per_h,
                utc_offset_h: data.site.timezone_offset_h,
            },
        },
        eta_charge: cfg.strategy.eta_charge.unwrap_or_else(|| data.site.default_eta_charge()),
    })
}

impl Prepared {
    pub fn strategy(&self, kind: StrategyKind, limit: f64) -> Strategy {
        match kind {
            StrategyKind::Greedy => Strategy::Greedy,
            StrategyKind::Forecast => Strategy::ForecastBased(StrategyParams {
                soc_low_limit_pct: limit,
                e_batt_wh: self.site.battery.capacity_wh,
                eta_charge: self.eta_charge,
            }),
        }
    }

    pub fn simulate(&self, kind: StrategyKind, limit: f64) -> Result<(ScenarioOutput, KpiReport), AppError> {
        let out = run_scenario(
            &self.pv_potential,
            &self.load,
            &self.strategy(kind, limit),
            Some(self.forecaster.as_ref()),
            &self.site,
            &self.options,
        )?;
        let kpis = scenario_kpis(&out, &self.site)?;
        Ok((out, kpis))
    }

    pub fn sweep(&self, limits: &[f64]) -> Result<SweepResult, AppError> {
        let inputs = SweepInputs {
            system_id: &self.id,
            pv_potential: &self.pv_potential,
            load: &self.load,
            forecaster: self.forecaster.as_ref(),
            site: &self.site,
            eta_charge: self.eta_charge,
            options: self.options,
        };
        Ok(sweep_soc_low_limit(&inputs, limits)?)
    }
}

pub fn configured_limits(cfg: &RunConfig) -> Vec<f64> {
    let s = &cfg.simulation;
    sweep_limits(s.sweep_points, s.sweep_min_pct, s.sweep_max_pct)
}

/// Mean absolute and root-mean-square error over the selected hours.
#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ErrorStats {
    pub hours: usize,
    pub mae_wh: f64,
    pub rmse_wh: f64,
}

pub fn error_stats(forecast: &[f64], truth: &[f64], keep: &[bool]) -> Option<ErrorStats> {
    let errs: Vec<f64> =
        forecast.iter().zip(truth).zip(keep).filter(|(_, k)| **k).map(|((f, t), _)| f - t).collect();
    if errs.is_empty() {
        return None;
    }
    let n = errs.len() as f64;
    Some(ErrorStats {
        hours: errs.len(),
        mae_wh: errs.iter().map(|e| e.abs()).sum::<f64>() / n,
        rmse_wh: (errs.iter().map(|e| e * e).sum::<f64>() / n).sqrt(),
    })
}

/// Hours of `soc` whose PV telemetry is free of curtailment, aligned to
/// `[from, from + len)`. Hours without telemetry count as curtailed.
pub fn comparable_pv_hours(soc: &HourlyTimeSeries, from: Hour, len: usize) -> Vec<bool> {
    let mask = curtailment_mask(soc);
    (0..len)
        .map(|i| {
            let off = (from + i as i64) - soc.start();
            off >= 0 && mask.get(off as usize).is_some_and(|c| !c)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use simctl_core::SeriesKind;

    #[test]
    fn error_stats_respects_mask() {
        let s = error_stats(&[1.0, 5.0, 3.0], &[0.0, 0.0, 0.0], &[true, false, true]).unwrap();
        assert_eq!(s.hours, 2);
        assert_eq!(s.mae_wh, 2.0);
        assert!((s.rmse_wh - 5f64.sqrt()).abs() < 1e-12);
        assert!(error_stats(&[1.0], &[1.0], &[false]).is_none());
    }

    #[test]
    fn full_battery_hours_are_not_comparable() {
        let soc = HourlyTimeSeries::new(Hour(100), vec![50.0, 100.0, 80.0, 60.0], SeriesKind::SocPct).unwrap();
        assert_eq!(comparable_pv_hours(&soc, Hour(99), 6), vec![false, true, false, false, true, false]);
    }
}
