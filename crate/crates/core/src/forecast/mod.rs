//! Day-ahead forecasts of PV generation and consumption with prediction
//! intervals.
//!
//! A forecast channel keeps the hourly expectation together with a linear
//! Gaussian error model: the error of hour `h` is `Σ_j w[h][j] ξ_j` for
//! independent unit shocks `ξ_j`. That lets interval energies (the sums the
//! planner works with) carry the correct variance instead of adding hourly
//! bounds, which would overstate the width whenever hourly errors are not
//! perfectly correlated.

pub mod arima;
pub mod cluster;
pub mod load;
pub mod pv;
pub mod solar;

use alloc::boxed::Box;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::model::{HourlyTimeSeries, ModelError};
use crate::time::{Day, Hour};

pub use arima::{fit_arima, ArimaModel, ArimaOrder};
pub use cluster::{cluster_days, ClusterModel, ClusterSettings};
pub use load::{LoadForecast, LoadForecaster, LoadSettings};
pub use pv::{fit_power_regression, forecast_pv_24h, PvForecast, PvForecaster, RegressionModel};
pub use solar::{project_to_poa, sun_position, SunPosition};

/// Planning horizon in hours.
pub const HORIZON_H: usize = 24;

/// Two-sided 95% Gaussian quantile.
pub const Z_95: f64 = 1.96;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ForecastError {
    #[error("insufficient history: need {needed}, got {got}")]
    InsufficientHistory { needed: usize, got: usize },
    #[error("insufficient training data: need {needed} usable pairs, got {got}")]
    InsufficientData { needed: usize, got: usize },
    #[error("degenerate regression input: {0}")]
    DegenerateInput(&'static str),
    #[error("no admissible ARIMA order in the grid")]
    NonConvergence { best: Option<Box<ArimaModel>> },
    #[error("model not fitted: {0}")]
    UnfittedModel(&'static str),
    #[error("no forecast available for hour {0}")]
    OutOfRange(Hour),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// A (low, expected, up) energy triple in Wh.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct EnergyTriplet {
    pub low: f64,
    pub exp: f64,
    pub up: f64,
}

impl EnergyTriplet {
    pub fn exact(v: f64) -> Self {
        EnergyTriplet { low: v, exp: v, up: v }
    }

    pub fn as_tuple(&self) -> (f64, f64, f64) {
        (self.low, self.exp, self.up)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ErrorStructure {
    /// Zero-width intervals.
    Exact,
    /// Independent hourly errors with the given standard deviations.
    Independent(Vec<f64>),
    /// Lower-triangular `n × n` loading matrix, row-major.
    Linear(Vec<f64>),
}

/// Hourly expectations over a contiguous block of hours and their error model.
#[derive(Clone, Debug, PartialEq)]
pub struct ForecastBlock {
    pub start: Hour,
    pub expected: Vec<f64>,
    /// Per-hour physical ceiling (PV peak × 1 h); infinite for consumption.
    pub ceiling_wh: f64,
    pub errors: ErrorStructure,
}

impl ForecastBlock {
    pub fn exact(start: Hour, expected: Vec<f64>) -> Self {
        ForecastBlock { start, expected, ceiling_wh: f64::INFINITY, errors: ErrorStructure::Exact }
    }

    pub fn len(&self) -> usize {
        self.expected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.expected.is_empty()
    }
}

/// A view of `len` hours of a block, starting `offset` hours in.
#[derive(Clone, Debug)]
pub struct ForecastChannel {
    block: Arc<ForecastBlock>,
    offset: usize,
    len: usize,
    z: f64,
}

impl ForecastChannel {
    pub fn new(block: Arc<ForecastBlock>, offset: usize, len: usize, z: f64) -> Self {
        assert!(offset + len <= block.len(), "channel view exceeds its block");
        ForecastChannel { block, offset, len, z }
    }

    /// A channel owning its whole block.
    pub fn whole(block: ForecastBlock, z: f64) -> Self {
        let len = block.len();
        ForecastChannel::new(Arc::new(block), 0, len, z)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn start(&self) -> Hour {
        self.block.start + self.offset as i64
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn expected(&self) -> &[f64] {
        &self.block.expected[self.offset..self.offset + self.len]
    }

    pub fn hourly(&self, i: usize) -> EnergyTriplet {
        self.interval(i, i + 1)
    }

    pub fn triplets(&self) -> Vec<EnergyTriplet> {
        (0..self.len).map(|i| self.hourly(i)).collect()
    }

    /// Interval energy over channel hours `[a, b)`.
    pub fn interval(&self, a: usize, b: usize) -> EnergyTriplet {
        assert!(a <= b && b <= self.len);
        if a == b {
            return EnergyTriplet::exact(0.0);
        }
        let exp: f64 = self.expected()[a..b].iter().sum();
        let var = match &self.block.errors {
            ErrorStructure::Exact => 0.0,
            ErrorStructure::Independent(sd) => {
                sd[self.offset + a..self.offset + b].iter().map(|s| s * s).sum()
            }
            ErrorStructure::Linear(w) => {
                let n = self.block.len();
                let last = self.offset + b;
                let mut col = vec![0.0; last];
                for r in self.offset + a..last {
                    let row = &w[r * n..r * n + r + 1];
                    for (c, v) in col.iter_mut().zip(row) {
                        *c += v;
                    }
                }
                col.iter().map(|c| c * c).sum()
            }
        };
        self.bound(exp, var, b - a)
    }

    /// `interval(t, end)` for every `t` in `0..=end`.
    pub fn intervals_ending_at(&self, end: usize) -> Vec<EnergyTriplet> {
        assert!(end <= self.len);
        let mut out = vec![EnergyTriplet::exact(0.0); end + 1];
        let n = self.block.len();
        let last = self.offset + end;
        let mut col = vec![0.0; last];
        let mut exp = 0.0;
        let mut var_indep = 0.0;
        for t in (0..end).rev() {
            let r = self.offset + t;
            exp += self.block.expected[r];
            let var = match &self.block.errors {
                ErrorStructure::Exact => 0.0,
                ErrorStructure::Independent(sd) => {
                    var_indep += sd[r] * sd[r];
                    var_indep
                }
                ErrorStructure::Linear(w) => {
                    for (c, v) in col.iter_mut().zip(&w[r * n..r * n + r + 1]) {
                        *c += v;
                    }
                    col.iter().map(|c| c * c).sum()
                }
            };
            out[t] = self.bound(exp, var, end - t);
        }
        out
    }

    fn bound(&self, exp: f64, var: f64, hours: usize) -> EnergyTriplet {
        let ceiling = self.block.ceiling_wh * hours as f64;
        let exp = exp.clamp(0.0, ceiling);
        let half = self.z * math::sqrt(var.max(0.0));
        EnergyTriplet { low: (exp - half).clamp(0.0, exp), exp, up: (exp + half).clamp(exp, ceiling) }
    }
}

/// PV and consumption forecasts over the same horizon.
#[derive(Clone, Debug)]
pub struct EnergyForecast {
    pub pv: ForecastChannel,
    pub cons: ForecastChannel,
}

impl EnergyForecast {
    pub fn new(pv: ForecastChannel, cons: ForecastChannel) -> Self {
        debug_assert_eq!(pv.start(), cons.start());
        EnergyForecast { pv, cons }
    }

    pub fn start(&self) -> Hour {
        self.pv.start()
    }

    pub fn len(&self) -> usize {
        self.pv.len().min(self.cons.len())
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Anything that can produce the rolling 24 h forecast at a processing hour.
pub trait Forecaster {
    fn forecast(&self, t_p: Hour) -> Result<EnergyForecast, ForecastError>;
}

/// Perfect foresight: the expectation is the realized series and intervals
/// have zero width. Near the end of the data the horizon is truncated.
#[derive(Clone, Debug)]
pub struct OracleForecaster {
    pv: Arc<ForecastBlock>,
    cons: Arc<ForecastBlock>,
}

impl OracleForecaster {
    pub fn new(pv_truth: &HourlyTimeSeries, load_truth: &HourlyTimeSeries) -> Result<Self, ForecastError> {
        if pv_truth.start() != load_truth.start() || pv_truth.len() != load_truth.len() {
            return Err(ForecastError::OutOfRange(load_truth.start()));
        }
        Ok(OracleForecaster {
            pv: Arc::new(ForecastBlock::exact(pv_truth.start(), pv_truth.values().to_vec())),
            cons: Arc::new(ForecastBlock::exact(load_truth.start(), load_truth.values().to_vec())),
        })
    }
}

impl Forecaster for OracleForecaster {
    fn forecast(&self, t_p: Hour) -> Result<EnergyForecast, ForecastError> {
        let offset = t_p - self.pv.start;
        if offset < 0 || offset as usize >= self.pv.len() {
            return Err(ForecastError::OutOfRange(t_p));
        }
        let offset = offset as usize;
        let len = HORIZON_H.min(self.pv.len() - offset);
        Ok(EnergyForecast::new(
            ForecastChannel::new(self.pv.clone(), offset, len, Z_95),
            ForecastChannel::new(self.cons.clone(), offset, len, Z_95),
        ))
    }
}

/// Perfect-foresight load and PV forecasts for the horizon starting at `t_p`.
pub fn oracle_forecasts(
    pv_truth: &HourlyTimeSeries,
    load_truth: &HourlyTimeSeries,
    t_p: Hour,
) -> Result<(LoadForecast, PvForecast), ForecastError> {
    let f = OracleForecaster::new(pv_truth, load_truth)?.forecast(t_p)?;
    Ok((LoadForecast(f.cons), PvForecast(f.pv)))
}

/// Forecasts issued once per local day at midnight, covering that day and the
/// next. A processing hour reads the 24 h window starting at itself from the
/// issue of its own day, so nothing observed after the issue is used.
#[derive(Clone, Debug)]
pub struct DayAheadForecaster {
    first_day: Day,
    utc_offset_h: i32,
    issues: Vec<(Arc<ForecastBlock>, Arc<ForecastBlock>)>,
    pv_z: f64,
    load_z: f64,
}

impl DayAheadForecaster {
    /// Precomputes one issue per local day touching `[from, to)`.
    /// `ghi_forecast` is the horizontal irradiation forecast; hours it does
    /// not cover are treated as dark.
    pub fn build(
        load: &LoadForecaster,
        pv: &PvForecaster,
        ghi_forecast: &HourlyTimeSeries,
        from: Hour,
        to: Hour,
    ) -> Result<Self, ForecastError> {
        let offset = load.utc_offset_h();
        let first_day = from.local_day(offset);
        let last_day = (to - 1).local_day(offset);
        let mut issues = Vec::with_capacity((last_day.0 - first_day.0 + 1).max(0) as usize);
        let mut day = first_day;
        while day <= last_day {
            let cons = load.issue_block(day, 2)?;
            let pv_block = pv.issue_block(day.first_hour(offset), 2 * HORIZON_H, ghi_forecast);
            issues.push((Arc::new(pv_block), Arc::new(cons)));
            day = day.next();
        }
        Ok(DayAheadForecaster { first_day, utc_offset_h: offset, issues, pv_z: pv.z(), load_z: load.z() })
    }
}

impl Forecaster for DayAheadForecaster {
    fn forecast(&self, t_p: Hour) -> Result<EnergyForecast, ForecastError> {
        let day = t_p.local_day(self.utc_offset_h);
        let idx = day.0 - self.first_day.0;
        if idx < 0 || idx as usize >= self.issues.len() {
            return Err(ForecastError::OutOfRange(t_p));
        }
        let (pv, cons) = &self.issues[idx as usize];
        let offset = (t_p - pv.start) as usize;
        Ok(EnergyForecast::new(
            ForecastChannel::new(pv.clone(), offset, HORIZON_H, self.pv_z),
            ForecastChannel::new(cons.clone(), offset, HORIZON_H, self.load_z),
        ))
    }
}
