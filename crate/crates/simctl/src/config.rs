//! The run configuration: one JSON document, with command-line flags
//! overriding individual fields.
//!
//! ```json
//! {
//!   "seed": 42,
//!   "site": { "latitude_deg": 6.45, "longitude_deg": 3.4, "pv_peak_w": 9750 },
//!   "strategy": { "kind": "forecast", "soc_low_limit_pct": 65 },
//!   "forecaster": { "mode": "fitted", "z": 1.96, "k_max": 7 },
//!   "systems": [
//!     { "id": "sys01", "telemetry": "sys01_telemetry.csv", "irradiance": "sys01_irradiance.csv" }
//!   ],
//!   "output_dir": "out"
//! }
//! ```
//!
//! Relative paths are resolved against the directory holding the config file.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use simctl_core::forecast::{ArimaOrder, Z_95};
use simctl_core::SiteConfig;

use crate::error::AppError;
use crate::synth::Profile;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum StrategyKind {
    Greedy,
    Forecast,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ForecastMode {
    /// Forecasters fitted on the telemetry and irradiation files.
    Fitted,
    /// Perfect foresight of the simulated series.
    Oracle,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StrategyConfig {
    pub kind: StrategyKind,
    pub soc_low_limit_pct: f64,
    /// PV-to-battery efficiency used by the planner; defaults to the site's
    /// MPPT and charge-path product.
    pub eta_charge: Option<f64>,
    pub dead_band_pct_per_h: f64,
}

impl Default for StrategyConfig {
    fn default() -> Self {
        StrategyConfig { kind: StrategyKind::Forecast, soc_low_limit_pct: 65.0, eta_charge: None, dead_band_pct_per_h: 0.1 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ForecasterConfig {
    pub mode: ForecastMode,
    pub order_grid: Vec<ArimaOrder>,
    pub z: f64,
    pub k_max: usize,
    pub kmeans_restarts: usize,
    /// Longest telemetry gap, in hours, that is filled instead of rejected.
    pub max_gap_h: i64,
}

impl Default for ForecasterConfig {
    fn default() -> Self {
        ForecasterConfig {
            mode: ForecastMode::Fitted,
            order_grid: ArimaOrder::default_grid(),
            z: Z_95,
            k_max: 7,
            kmeans_restarts: 10,
            max_gap_h: 6,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulationConfig {
    /// Starting SOC; the first telemetry SOC when absent.
    pub initial_soc_pct: Option<f64>,
    pub sweep_points: usize,
    pub sweep_min_pct: f64,
    pub sweep_max_pct: f64,
}

impl Default for SimulationConfig {
    fn default() -> Self {
        SimulationConfig { initial_soc_pct: None, sweep_points: 40, sweep_min_pct: 20.0, sweep_max_pct: 100.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub id: String,
    pub telemetry: PathBuf,
    pub irradiance: PathBuf,
    /// Overrides the top-level site for this system.
    #[serde(default)]
    pub site: Option<SiteConfig>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub profile: Profile,
    pub days: usize,
    pub systems: usize,
    pub start_date: NaiveDate,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            profile: Profile::MarketLike,
            days: 365,
            systems: 1,
            start_date: NaiveDate::from_ymd_opt(2019, 1, 1).expect("valid date"),
        }
    }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    /// Mandatory so every run can be reproduced.
    pub seed: u64,
    #[serde(default)]
    pub site: SiteConfig,
    #[serde(default)]
    pub strategy: StrategyConfig,
    #[serde(default)]
    pub forecaster: ForecasterConfig,
    #[serde(default)]
    pub simulation: SimulationConfig,
    #[serde(default)]
    pub systems: Vec<SystemConfig>,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    #[serde(default)]
    pub synth: SynthConfig,
}

/// Command-line values that take precedence over the file.
#[derive(Clone, Debug, Default)]
pub struct Overrides {
    pub limit: Option<f64>,
    pub strategy: Option<StrategyKind>,
    pub seed: Option<u64>,
    pub out: Option<PathBuf>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self, AppError> {
        serde_json::from_str(text).map_err(|e| AppError::Config(e.to_string()))
    }

    /// Reads the file and resolves relative paths against its directory.
    pub fn load(path: &Path) -> Result<Self, AppError> {
        let text = fs::read_to_string(path).map_err(|e| AppError::Config(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_json(&text)?;
        cfg.resolve_paths(path.parent().unwrap_or(Path::new("")));
        Ok(cfg)
    }

    pub fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.output_dir);
        for s in &mut self.systems {
            fix(&mut s.telemetry);
            fix(&mut s.irradiance);
        }
    }

    pub fn apply(&mut self, o: &Overrides) {
        if let Some(l) = o.limit {
            self.strategy.soc_low_limit_pct = l;
        }
        if let Some(k) = o.strategy {
            self.strategy.kind = k;
        }
        if let Some(s) = o.seed {
            self.seed = s;
        }
        if let Some(out) = &o.out {
            self.output_dir = out.clone();
        }
    }

    /// Checks parameter ranges and, when `need_inputs`, that every system's
    /// files exist.
    pub fn validate(&self, need_inputs: bool) -> Result<(), AppError> {
        let bad = |msg: String| Err(AppError::Config(msg));
        self.site.validate()?;
        let s = &self.strategy;
        if !(0.0..=100.0).contains(&s.soc_low_limit_pct) {
            return bad(format!("soc_low_limit_pct {} outside [0, 100]", s.soc_low_limit_pct));
        }
        if let Some(eta) = s.eta_charge {
            if !(eta > 0.0 && eta <= 1.0) {
                return bad(format!("eta_charge {eta} outside (0, 1]"));
            }
        }
        if !(s.dead_band_pct_per_h >= 0.0) {
            return bad("dead_band_pct_per_h must be non-negative".into());
        }
        let f = &self.forecaster;
        if !(f.z > 0.0 && f.z.is_finite()) {
            return bad(format!("z {} must be positive", f.z));
        }
        if f.order_grid.is_empty() || f.k_max == 0 || f.kmeans_restarts == 0 || f.max_gap_h < 0 {
            return bad("order_grid, k_max and kmeans_restarts must be non-empty/positive".into());
        }
        let sim = &self.simulation;
        if let Some(soc) = sim.initial_soc_pct {
            if !(0.0..=100.0).contains(&soc) {
                return bad(format!("initial_soc_pct {soc} outside [0, 100]"));
            }
        }
        if sim.sweep_points == 0 || !(sim.sweep_min_pct <= sim.sweep_max_pct) || sim.sweep_min_pct < 0.0 || sim.sweep_max_pct > 100.0 {
            return bad("sweep range must be non-empty and within [0, 100]".into());
        }
        if self.synth.days == 0 || self.synth.systems == 0 {
            return bad("synth days and systems must be positive".into());
        }
        let mut ids: Vec<&str> = self.systems.iter().map(|s| s.id.as_str()).collect();
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("system ids must be unique".into());
        }
        for sys in &self.systems {
            if let Some(site) = &sys.site {
                site.validate()?;
            }
        }
        if need_inputs {
            if self.systems.is_empty() {
                return bad("no systems configured".into());
            }
            for sys in &self.systems {
                for p in [&sys.telemetry, &sys.irradiance] {
                    // A missing input is a data problem, not a bad config.
                    if !p.is_file() {
                        return Err(AppError::io(p, std::io::Error::from(std::io::ErrorKind::NotFound)));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn site_for<'a>(&'a self, sys: &'a SystemConfig) -> &'a SiteConfig {
        sys.site.as_ref().unwrap_or(&self.site)
    }

    /// SHA-256 of the effective configuration's canonical JSON.
    pub fn hash(&self) -> String {
        let bytes = serde_json::to_vec(self).expect("config serializes");
        hex::encode(Sha256::digest(&bytes))
    }
}
