//! Hourly energy-balance replay of a PV-battery system under a strategy.
//!
//! The plant is DC coupled: PV passes an MPPT tracker onto the DC bus, the
//! battery sits on the bus, and one inverter feeds the AC load. Each hour PV
//! first serves the load directly, the battery covers what is left down to
//! its hard floor, and any PV surplus charges the battery up to the
//! commanded cap. Whatever cannot be stored is curtailed.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::{ForecastError, Forecaster, PvForecaster, RegressionModel};
use crate::model::{soc_after, HourlyTimeSeries, ModelError, SeriesKind, SiteConfig};
use crate::strategy::{
    decide, greedy_decision, plan, ChargeCommand, ChargeLatch, ChargeMode, PeriodOptions, Strategy, StrategyError,
};
use crate::time::Hour;

/// Energies below this many Wh count as zero.
const ENERGY_EPS_WH: f64 = 1e-9;

/// Largest accepted relative residual of an hourly energy balance.
pub const BALANCE_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("input series are not aligned: {0}")]
    SeriesMisaligned(&'static str),
    #[error("the forecast-based strategy needs a forecaster")]
    MissingForecaster,
    #[error("invariant violated at {hour}: {what}")]
    InvariantBreach { hour: Hour, what: &'static str },
    #[error(transparent)]
    Forecast(#[from] ForecastError),
    #[error(transparent)]
    Strategy(#[from] StrategyError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepInput {
    /// DC energy the panels could deliver this hour.
    pub pv_potential_wh: f64,
    /// AC demand this hour.
    pub load_wh: f64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// PV energy sent straight to the inverter.
    pub pv_direct_wh: f64,
    /// PV energy sent towards the battery.
    pub pv_charge_input_wh: f64,
    /// Energy entering the battery terminals.
    pub batt_charge_wh: f64,
    /// Energy leaving the battery terminals.
    pub batt_discharge_wh: f64,
    pub curtailed_wh: f64,
    /// Load served from PV.
    pub load_direct_wh: f64,
    /// Load served from the battery.
    pub load_battery_wh: f64,
    pub unserved_wh: f64,
    pub soc_end_pct: f64,
}

impl StepResult {
    pub fn served_wh(&self) -> f64 {
        self.load_direct_wh + self.load_battery_wh
    }

    pub fn is_outage(&self) -> bool {
        self.unserved_wh > ENERGY_EPS_WH
    }

    /// Largest relative mismatch of the PV and load balances.
    pub fn balance_residual(&self, input: &StepInput) -> f64 {
        let pv = input.pv_potential_wh - self.pv_direct_wh - self.pv_charge_input_wh - self.curtailed_wh;
        let load = input.load_wh - self.load_direct_wh - self.load_battery_wh - self.unserved_wh;
        let rel = |r: f64, scale: f64| r.abs() / scale.max(1.0);
        rel(pv, input.pv_potential_wh).max(rel(load, input.load_wh))
    }
}

/// One simulated hour.
pub fn step(soc_pct: f64, input: &StepInput, cmd: &ChargeCommand, site: &SiteConfig) -> StepResult {
    let batt = &site.battery;
    let eff = &site.eff;
    let pv = input.pv_potential_wh.max(0.0);
    let load = input.load_wh.max(0.0);

    let direct_eff = eff.direct();
    let pv_direct = pv.min(load / direct_eff);
    let load_direct = if pv_direct * direct_eff >= load { load } else { pv_direct * direct_eff };
    let mut deficit = load - load_direct;

    let mut soc = soc_pct;
    let mut discharge = 0.0;
    let mut load_battery = 0.0;
    if deficit > ENERGY_EPS_WH {
        let out_eff = eff.battery_to_load();
        let above_floor = ((soc - batt.soc_hard_min_pct) / 100.0 * batt.capacity_wh).max(0.0);
        let power_limit = batt.max_discharge_w.unwrap_or(f64::INFINITY);
        let wanted = deficit / out_eff;
        discharge = wanted.min(above_floor).min(power_limit);
        load_battery = if discharge == wanted { deficit } else { discharge * out_eff };
        deficit -= load_battery;
        soc = soc_after(soc, -discharge, batt);
    }
    let unserved = if deficit > ENERGY_EPS_WH { deficit } else { 0.0 };
    let load_battery = load_battery + (deficit - unserved);

    let surplus = pv - pv_direct;
    let in_eff = eff.pv_to_battery();
    let headroom = ((cmd.soc_cap_pct.min(100.0) - soc) / 100.0 * batt.capacity_wh).max(0.0);
    let charge_limit = batt.max_charge_w.unwrap_or(f64::INFINITY);
    let charge = (surplus * in_eff).min(headroom).min(charge_limit);
    let pv_charge_input = if charge == surplus * in_eff { surplus } else { charge / in_eff };
    let curtailed = (surplus - pv_charge_input).max(0.0);
    soc = soc_after(soc, charge, batt);

    StepResult {
        pv_direct_wh: pv_direct,
        pv_charge_input_wh: pv_charge_input,
        batt_charge_wh: charge,
        batt_discharge_wh: discharge,
        curtailed_wh: curtailed,
        load_direct_wh: load_direct,
        load_battery_wh: load_battery,
        unserved_wh: unserved,
        soc_end_pct: soc,
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SimState {
    pub t: Hour,
    pub soc_pct: f64,
    pub latched_charge: bool,
    pub served_wh: f64,
    pub curtailed_wh: f64,
    pub unserved_wh: f64,
    pub outage_hours: u32,
}

impl SimState {
    fn record(&mut self, r: &StepResult) {
        self.soc_pct = r.soc_end_pct;
        self.served_wh += r.served_wh();
        self.curtailed_wh += r.curtailed_wh;
        self.unserved_wh += r.unserved_wh;
        if r.is_outage() {
            self.outage_hours += 1;
        }
        self.t = self.t + 1;
    }
}

/// One row per processing hour of the forecast-based strategy.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SetpointLogRow {
    pub t_p: Hour,
    pub soc_now: f64,
    pub soc_low_goal: f64,
    pub soc_up_limit: f64,
    pub t_start_charge: Hour,
    pub t_sd: Hour,
    pub t_ed: Hour,
    pub mode: ChargeMode,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunOptions {
    pub initial_soc_pct: f64,
    pub periods: PeriodOptions,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { initial_soc_pct: 100.0, periods: PeriodOptions::default() }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScenarioOutput {
    /// SOC at the end of each hour.
    pub soc: HourlyTimeSeries,
    pub steps: Vec<StepResult>,
    pub setpoints: Vec<SetpointLogRow>,
    pub state: SimState,
}

impl ScenarioOutput {
    pub fn start(&self) -> Hour {
        self.soc.start()
    }
}

/// Replays `load` against `pv_potential` hour by hour.
pub fn run_scenario(
    pv_potential: &HourlyTimeSeries,
    load: &HourlyTimeSeries,
    strategy: &Strategy,
    forecaster: Option<&dyn Forecaster>,
    site: &SiteConfig,
    options: &RunOptions,
) -> Result<ScenarioOutput, SimError> {
    if pv_potential.start() != load.start() || pv_potential.len() != load.len() {
        return Err(SimError::SeriesMisaligned("PV potential and load must cover the same hours"));
    }
    if !(0.0..=100.0).contains(&options.initial_soc_pct) {
        return Err(ModelError::InvalidParameter { name: "initial_soc_pct", value: options.initial_soc_pct }.into());
    }
    site.validate()?;
    let forecast_params = match strategy {
        Strategy::Greedy => None,
        Strategy::ForecastBased(p) => {
            p.validate()?;
            Some((*p, forecaster.ok_or(SimError::MissingForecaster)?))
        }
    };

    let n = load.len();
    let mut state = SimState { t: load.start(), soc_pct: options.initial_soc_pct, ..SimState::default() };
    let mut latch = ChargeLatch::default();
    let mut steps = Vec::with_capacity(n);
    let mut soc_out = Vec::with_capacity(n);
    let mut log = Vec::new();
    for (i, (t_p, load_wh)) in load.iter().enumerate() {
        let input = StepInput { pv_potential_wh: pv_potential.values()[i], load_wh };
        let cmd = match forecast_params {
            None => greedy_decision(state.soc_pct),
            Some((params, fc)) => {
                let f = fc.forecast(t_p)?;
                let sp = plan(&f, &params, &options.periods, state.soc_pct, t_p)?;
                let latched = latch.is_set(t_p);
                let cmd = decide(state.soc_pct, &sp, &params, t_p, latched);
                latch.update(&cmd, &sp, t_p);
                state.latched_charge = latch.is_set(t_p);
                log.push(SetpointLogRow {
                    t_p,
                    soc_now: state.soc_pct,
                    soc_low_goal: sp.soc_low_goal_pct,
                    soc_up_limit: sp.soc_up_limit_pct,
                    t_start_charge: sp.t_start_charge,
                    t_sd: sp.periods.t_sd,
                    t_ed: sp.periods.t_ed,
                    mode: cmd.mode,
                });
                cmd
            }
        };
        let r = step(state.soc_pct, &input, &cmd, site);
        if !(0.0..=100.0).contains(&r.soc_end_pct) {
            return Err(SimError::InvariantBreach { hour: t_p, what: "SOC outside [0, 100]" });
        }
        if !(r.balance_residual(&input) < BALANCE_TOLERANCE) {
            return Err(SimError::InvariantBreach { hour: t_p, what: "energy balance" });
        }
        state.record(&r);
        soc_out.push(r.soc_end_pct);
        steps.push(r);
    }
    Ok(ScenarioOutput {
        soc: HourlyTimeSeries::new(load.start(), soc_out, SeriesKind::SocPct)?,
        steps,
        setpoints: log,
        state,
    })
}

/// PV the plant could have produced each hour, from irradiation analysis.
pub fn reconstruct_potential_pv(
    ghi: &HourlyTimeSeries,
    model: &RegressionModel,
    site: &SiteConfig,
) -> Result<HourlyTimeSeries, SimError> {
    let f = PvForecaster::new(site.clone(), model.clone(), 0.0);
    let values = ghi.iter().map(|(h, g)| f.potential(h, g)).collect();
    Ok(HourlyTimeSeries::new(ghi.start(), values, SeriesKind::EnergyWh)?)
}
