//! The forecast-based charging strategy and the greedy baseline.
//!
//! Every processing hour the planner finds the coming charge and discharge
//! periods from the expected net SOC rate, sizes a buffer for the discharge
//! from the forecast spread, caps charging at the SOC that just covers the
//! expected discharge, and delays the start of charging until the remaining
//! pessimistic surplus is no more than what is needed to reach that cap.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::forecast::EnergyForecast;
use crate::model::{delta_soc, ModelError, SocDeltaTriplet};
use crate::time::Hour;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum StrategyError {
    #[error("expected discharge must not be positive, got {0}")]
    PositiveDischarge(f64),
    #[error("forecast horizon is empty")]
    EmptyForecast,
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct StrategyParams {
    pub soc_low_limit_pct: f64,
    pub e_batt_wh: f64,
    pub eta_charge: f64,
}

impl StrategyParams {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(0.0..=100.0).contains(&self.soc_low_limit_pct) {
            return Err(ModelError::InvalidParameter { name: "soc_low_limit_pct", value: self.soc_low_limit_pct });
        }
        if !(self.e_batt_wh > 0.0) {
            return Err(ModelError::InvalidParameter { name: "e_batt_wh", value: self.e_batt_wh });
        }
        if !(self.eta_charge > 0.0 && self.eta_charge <= 1.0) {
            return Err(ModelError::InvalidParameter { name: "eta_charge", value: self.eta_charge });
        }
        Ok(())
    }

    fn rate(&self, pv_wh: f64, cons_wh: f64) -> Result<f64, ModelError> {
        delta_soc(pv_wh, cons_wh, self.eta_charge, self.e_batt_wh)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PeriodOptions {
    /// Net SOC rates within ± this many %/h count as neither charge nor discharge.
    pub dead_band_pct_per_h: f64,
    /// Local time offset; only charge runs starting on the local day of the
    /// processing hour are planned for.
    pub utc_offset_h: i32,
}

impl Default for PeriodOptions {
    fn default() -> Self {
        PeriodOptions { dead_band_pct_per_h: 0.1, utc_offset_h: 0 }
    }
}

/// Period boundaries as hour starts; a period `[a, b)` ends where the next
/// hour begins.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct PeriodBoundaries {
    pub t_sc: Hour,
    pub t_ec: Hour,
    pub t_sd: Hour,
    pub t_ed: Hour,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DaySetpoints {
    pub soc_low_goal_pct: f64,
    pub soc_up_limit_pct: f64,
    pub t_start_charge: Hour,
    /// Cap for the start hour alone. Charging begins partway through that
    /// hour, so the battery only takes what the rest of the period cannot
    /// supply.
    pub start_hour_cap_pct: f64,
    pub periods: PeriodBoundaries,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ChargeMode {
    ChargeFromSurplus,
    HoldCurtailAboveCap,
    SafeguardCharge,
}

impl ChargeMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChargeMode::ChargeFromSurplus => "charge",
            ChargeMode::HoldCurtailAboveCap => "hold",
            ChargeMode::SafeguardCharge => "safeguard",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChargeCommand {
    pub mode: ChargeMode,
    pub soc_cap_pct: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum Strategy {
    Greedy,
    ForecastBased(StrategyParams),
}

#[derive(Clone, Copy, PartialEq, Eq)]
enum Sign {
    Surplus,
    Deficit,
    Neutral,
}

/// Finds the charge period and the discharge period that follows it.
///
/// The charge period is the run of surplus hours holding the largest
/// expected rate among runs that start on the processing hour's local day.
/// The discharge period runs from the end of charging to the last deficit
/// hour before the next surplus hour; neutral hours inside it do not split it.
pub fn detect_periods(
    forecast: &EnergyForecast,
    params: &StrategyParams,
    opts: &PeriodOptions,
    t_p: Hour,
) -> Result<PeriodBoundaries, StrategyError> {
    let n = forecast.len();
    if n == 0 {
        return Err(StrategyError::EmptyForecast);
    }
    let start = forecast.start();
    let pv = forecast.pv.expected();
    let cons = forecast.cons.expected();
    let mut rate = Vec::with_capacity(n);
    for i in 0..n {
        rate.push(params.rate(pv[i], cons[i])?);
    }
    let eps = opts.dead_band_pct_per_h;
    let sign: Vec<Sign> = rate
        .iter()
        .map(|&r| if r > eps { Sign::Surplus } else if r < -eps { Sign::Deficit } else { Sign::Neutral })
        .collect();

    let today = t_p.local_day(opts.utc_offset_h);
    let mut best: Option<(usize, usize, f64)> = None;
    let mut i = 0;
    while i < n {
        if sign[i] != Sign::Surplus {
            i += 1;
            continue;
        }
        let s = i;
        while i < n && sign[i] == Sign::Surplus {
            i += 1;
        }
        if (start + s as i64).local_day(opts.utc_offset_h) != today {
            continue;
        }
        let peak = rate[s..i].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if best.is_none_or(|(_, _, p)| peak > p) {
            best = Some((s, i, peak));
        }
    }

    let (sc, ec) = match best {
        Some((s, e, _)) => (s, e),
        None => (0, 0),
    };
    let next_surplus = (ec..n).find(|&j| sign[j] == Sign::Surplus).unwrap_or(n);
    let ed = (ec..next_surplus).rev().find(|&j| sign[j] == Sign::Deficit).map_or(ec, |j| j + 1);
    let at = |k: usize| start + k as i64;
    Ok(PeriodBoundaries { t_sc: at(sc), t_ec: at(ec), t_sd: at(ec), t_ed: at(ed) })
}

/// Limit plus the expected shortfall of the pessimistic discharge forecast.
pub fn compute_soc_low_goal(params: &StrategyParams, dsoc_discharge: &SocDeltaTriplet) -> f64 {
    (params.soc_low_limit_pct + (dsoc_discharge.exp() - dsoc_discharge.low())).clamp(params.soc_low_limit_pct, 100.0)
}

/// The SOC from which the expected discharge ends at the goal.
pub fn compute_soc_up_limit(soc_low_goal: f64, dsoc_exp_discharge: f64) -> Result<f64, StrategyError> {
    if dsoc_exp_discharge > 0.0 {
        return Err(StrategyError::PositiveDischarge(dsoc_exp_discharge));
    }
    Ok((soc_low_goal - dsoc_exp_discharge).clamp(soc_low_goal, 100.0))
}

/// Whether the pessimistic charge still to come fits under the cap.
pub fn should_start_charging(soc_now: f64, soc_up_limit: f64, dsoc_low_remaining_charge: f64) -> bool {
    soc_now < soc_up_limit && soc_up_limit >= soc_now + dsoc_low_remaining_charge
}

/// Setpoints for the horizon starting at `t_p`.
///
/// `t_start_charge` is the last hour of the charge period from which the
/// pessimistic surplus still reaches the cap. With hourly steps the start
/// condition is tested for the SOC one hour ahead: if waiting through hour
/// `i` would leave too little surplus, charging starts at `i`. The start is
/// also pulled forward to any hour where the SOC, drifting down through
/// deficits while charging waits, is below the limit.
pub fn plan(
    forecast: &EnergyForecast,
    params: &StrategyParams,
    opts: &PeriodOptions,
    soc_now: f64,
    t_p: Hour,
) -> Result<DaySetpoints, StrategyError> {
    let periods = detect_periods(forecast, params, opts, t_p)?;
    let idx = |t: Hour| (t - forecast.start()) as usize;
    let (sd, ed, sc, ec) = (idx(periods.t_sd), idx(periods.t_ed), idx(periods.t_sc), idx(periods.t_ec));

    let pv = forecast.pv.interval(sd, ed);
    let cons = forecast.cons.interval(sd, ed);
    let discharge = SocDeltaTriplet::from_energies(pv.as_tuple(), cons.as_tuple(), params.eta_charge, params.e_batt_wh)?;
    let goal = compute_soc_low_goal(params, &discharge);
    let cap = compute_soc_up_limit(goal, discharge.exp().min(0.0))?;

    let pv_rem = forecast.pv.intervals_ending_at(ec);
    let cons_rem = forecast.cons.intervals_ending_at(ec);
    let pv_exp = forecast.pv.expected();
    let cons_exp = forecast.cons.expected();
    let mut soc_pred = soc_now;
    let mut t_start = periods.t_ec;
    let mut start_cap = cap;
    for i in 0..ec {
        let next = soc_pred + params.rate(pv_exp[i], cons_exp[i])?.min(0.0);
        if i >= sc {
            let remaining_after = params.rate(pv_rem[i + 1].low, cons_rem[i + 1].up)?;
            if soc_pred < params.soc_low_limit_pct {
                t_start = forecast.start() + i as i64;
                break;
            }
            if should_start_charging(next, cap, remaining_after) {
                t_start = forecast.start() + i as i64;
                start_cap = (cap - remaining_after).clamp(next, cap);
                break;
            }
        }
        soc_pred = next;
    }

    Ok(DaySetpoints {
        soc_low_goal_pct: goal,
        soc_up_limit_pct: cap,
        t_start_charge: t_start,
        start_hour_cap_pct: start_cap,
        periods,
    })
}

/// The command for the coming hour. `latched` is true once charging has
/// started in the current charge period.
pub fn decide(soc_now: f64, setpoints: &DaySetpoints, params: &StrategyParams, t_p: Hour, latched: bool) -> ChargeCommand {
    if soc_now < params.soc_low_limit_pct {
        return ChargeCommand { mode: ChargeMode::SafeguardCharge, soc_cap_pct: 100.0 };
    }
    if latched || t_p > setpoints.t_start_charge {
        return ChargeCommand { mode: ChargeMode::ChargeFromSurplus, soc_cap_pct: setpoints.soc_up_limit_pct };
    }
    if t_p == setpoints.t_start_charge {
        return ChargeCommand { mode: ChargeMode::ChargeFromSurplus, soc_cap_pct: setpoints.start_hour_cap_pct };
    }
    ChargeCommand { mode: ChargeMode::HoldCurtailAboveCap, soc_cap_pct: soc_now.clamp(0.0, 100.0) }
}

/// Conventional operation: charge from any surplus up to full.
pub fn greedy_decision(_soc_now: f64) -> ChargeCommand {
    ChargeCommand { mode: ChargeMode::ChargeFromSurplus, soc_cap_pct: 100.0 }
}

/// Keeps a started charge going until the end of its charge period, so a
/// refreshed forecast cannot stop it halfway.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct ChargeLatch {
    until: Option<Hour>,
}

impl ChargeLatch {
    /// Whether the latch holds at `t_p`, releasing it once its period is over.
    pub fn is_set(&mut self, t_p: Hour) -> bool {
        match self.until {
            Some(u) if t_p < u => true,
            _ => {
                self.until = None;
                false
            }
        }
    }

    /// Records the outcome of this hour's decision.
    pub fn update(&mut self, cmd: &ChargeCommand, setpoints: &DaySetpoints, t_p: Hour) {
        if self.until.is_none() && cmd.mode == ChargeMode::ChargeFromSurplus && t_p < setpoints.periods.t_ec {
            self.until = Some(setpoints.periods.t_ec);
        }
    }
}
