//! PV generation forecast: a linear model of hourly energy against
//! plane-of-array irradiation, driven by an irradiation forecast.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::solar::{project_to_poa, sun_position, DEFAULT_ALBEDO};
use super::{ErrorStructure, ForecastBlock, ForecastChannel, ForecastError, HORIZON_H};
use crate::math;
use crate::model::{HourlyTimeSeries, SiteConfig};
use crate::time::Hour;

/// Fewest usable hours accepted for a regression fit.
pub const MIN_TRAINING_PAIRS: usize = 48;

/// Hours whose SOC is at or above this were likely curtailed.
pub const CURTAILED_SOC_PCT: f64 = 99.9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegressionModel {
    /// Wh per Wh/m².
    pub slope: f64,
    pub intercept: f64,
    pub residual_std: f64,
    pub n_train: usize,
}

impl RegressionModel {
    pub fn predict(&self, poa_wh_m2: f64) -> f64 {
        self.slope * poa_wh_m2 + self.intercept
    }
}

/// Marks hours that started or ended with a full battery. PV output in those
/// hours may have been throttled and says little about the resource.
pub fn curtailment_mask(soc: &HourlyTimeSeries) -> Vec<bool> {
    let v = soc.values();
    (0..v.len())
        .map(|i| v[i] >= CURTAILED_SOC_PCT || (i > 0 && v[i - 1] >= CURTAILED_SOC_PCT))
        .collect()
}

/// Plane-of-array irradiation for every hour of a horizontal series.
pub fn poa_series(ghi: &HourlyTimeSeries, site: &SiteConfig) -> Vec<f64> {
    ghi.iter().map(|(h, g)| project_to_poa(g, &sun_position(site, h), site, DEFAULT_ALBEDO)).collect()
}

/// Ordinary least squares of PV energy on POA irradiation over hours that
/// are not curtailed and have daylight on the panel.
pub fn fit_power_regression(
    poa_wh_m2: &[f64],
    pv_wh: &[f64],
    curtailed: &[bool],
) -> Result<RegressionModel, ForecastError> {
    let n = poa_wh_m2.len().min(pv_wh.len()).min(curtailed.len());
    let pairs: Vec<(f64, f64)> = (0..n)
        .filter(|&i| !curtailed[i] && poa_wh_m2[i] > 0.0 && pv_wh[i].is_finite())
        .map(|i| (poa_wh_m2[i], pv_wh[i]))
        .collect();
    if pairs.len() < MIN_TRAINING_PAIRS {
        return Err(ForecastError::InsufficientData { needed: MIN_TRAINING_PAIRS, got: pairs.len() });
    }
    let m = pairs.len() as f64;
    let mx = pairs.iter().map(|p| p.0).sum::<f64>() / m;
    let my = pairs.iter().map(|p| p.1).sum::<f64>() / m;
    let sxx: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    let sxy: f64 = pairs.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    if !(sxx > 1e-9 * m * (1.0 + mx * mx)) {
        return Err(ForecastError::DegenerateInput("POA irradiation has no variance"));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let sse: f64 = pairs.iter().map(|p| { let r = p.1 - slope * p.0 - intercept; r * r }).sum();
    let dof = (pairs.len() - 2) as f64;
    Ok(RegressionModel { slope, intercept, residual_std: math::sqrt(sse / dof), n_train: pairs.len() })
}

/// Turns horizontal irradiation forecasts into PV energy forecasts for a site.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PvForecaster {
    pub site: SiteConfig,
    pub model: RegressionModel,
    pub z: f64,
}

impl PvForecaster {
    pub fn new(site: SiteConfig, model: RegressionModel, z: f64) -> Self {
        PvForecaster { site, model, z }
    }

    /// Fits the regression from telemetry and the irradiation analysis
    /// covering the same hours.
    pub fn fit(
        site: SiteConfig,
        pv: &HourlyTimeSeries,
        soc: &HourlyTimeSeries,
        ghi_analysis: &HourlyTimeSeries,
        z: f64,
    ) -> Result<Self, ForecastError> {
        let from = pv.start().max(ghi_analysis.start());
        let to = pv.end().min(ghi_analysis.end());
        if to <= from {
            return Err(ForecastError::InsufficientData { needed: MIN_TRAINING_PAIRS, got: 0 });
        }
        let ghi = HourlyTimeSeries::new(from, ghi_analysis.window(from, to).to_vec(), ghi_analysis.kind())?;
        let poa = poa_series(&ghi, &site);
        let mask = curtailment_mask(soc);
        let off = (from - soc.start()).max(0) as usize;
        let curtailed: Vec<bool> =
            (0..poa.len()).map(|i| mask.get(off + i).copied().unwrap_or(true)).collect();
        let model = fit_power_regression(&poa, pv.window(from, to), &curtailed)?;
        Ok(PvForecaster { site, model, z })
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    /// Expected PV energy for an hour given its horizontal irradiation, or
    /// `None` when the sun is down and no energy is possible.
    fn expected(&self, hour: Hour, ghi_wh_m2: f64) -> Option<f64> {
        let sun = sun_position(&self.site, hour);
        if ghi_wh_m2 <= 0.0 || !sun.is_up() {
            return None;
        }
        let poa = project_to_poa(ghi_wh_m2, &sun, &self.site, DEFAULT_ALBEDO);
        Some(self.model.predict(poa).clamp(0.0, self.site.pv_peak_w))
    }

    /// PV energy the plant could have produced, without curtailment.
    pub fn potential(&self, hour: Hour, ghi_wh_m2: f64) -> f64 {
        self.expected(hour, ghi_wh_m2).unwrap_or(0.0)
    }

    /// Forecast block for `len` hours from `start`. Hours outside
    /// `ghi_forecast` are treated as dark.
    pub fn issue_block(&self, start: Hour, len: usize, ghi_forecast: &HourlyTimeSeries) -> ForecastBlock {
        let mut expected = Vec::with_capacity(len);
        let mut sd = Vec::with_capacity(len);
        for i in 0..len {
            let hour = start + i as i64;
            match ghi_forecast.get(hour).and_then(|g| self.expected(hour, g)) {
                Some(e) => {
                    expected.push(e);
                    sd.push(self.model.residual_std);
                }
                None => {
                    expected.push(0.0);
                    sd.push(0.0);
                }
            }
        }
        ForecastBlock { start, expected, ceiling_wh: self.site.pv_peak_w, errors: ErrorStructure::Independent(sd) }
    }
}

/// Hourly PV energy forecast.
#[derive(Clone, Debug)]
pub struct PvForecast(pub ForecastChannel);

/// Forecast for the 24 hours covered by `ghi_forecast`.
pub fn forecast_pv_24h(
    model: &RegressionModel,
    ghi_forecast: &HourlyTimeSeries,
    site: &SiteConfig,
    z: f64,
) -> Result<PvForecast, ForecastError> {
    if model.n_train < 2 || !model.slope.is_finite() {
        return Err(ForecastError::UnfittedModel("PV regression"));
    }
    if ghi_forecast.len() < HORIZON_H {
        return Err(ForecastError::OutOfRange(ghi_forecast.end()));
    }
    let f = PvForecaster::new(site.clone(), model.clone(), z);
    Ok(PvForecast(ForecastChannel::whole(f.issue_block(ghi_forecast.start(), HORIZON_H, ghi_forecast), z)))
}
