//! Synthetic PV-battery systems.
//!
//! Weather is a Haurwitz clear sky scaled by a day-to-day clearness process,
//! plus a noisy forecast of it. PV truth is the plane-of-array irradiation
//! times a fixed plant factor. Telemetry comes from replaying the load against
//! that PV with the greedy controller, so it is curtailed whenever the battery
//! is full, as on the real systems.

use chrono::NaiveDate;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use simctl_core::forecast::solar::DEFAULT_ALBEDO;
use simctl_core::forecast::{project_to_poa, sun_position};
use simctl_core::simulator::{run_scenario, RunOptions, SimError};
use simctl_core::strategy::Strategy;
use simctl_core::{Day, Hour, HourlyTimeSeries, ModelError, SeriesKind, SiteConfig};

use crate::ingest::{IrradianceRecord, IrradianceSource, TelemetryRecord};

/// DC output per unit of plane-of-array irradiation, as a share of the peak
/// rating: 1000 Wh/m² yields this fraction of `pv_peak_w`.
pub const PLANT_FACTOR: f64 = 0.8;

/// Annual consumption of the default five-system fleet, in Wh.
pub const FLEET_ANNUAL_LOADS_WH: [f64; 5] = [2.2e6, 2.7e6, 3.3e6, 3.9e6, 5.5e6];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum Profile {
    /// Shop open Monday to Saturday 07:00–20:00, busiest in the evening,
    /// barely used on Sundays, nothing at night.
    MarketLike,
    /// Noiseless clear-ish days: surplus 07:00–15:00, a fixed evening deficit
    /// 15:00–19:00, no flows at night.
    SinglePeak,
    /// The market shape at the top of the load range with a night base load.
    HighLoad,
}

impl Profile {
    pub fn default_annual_load_wh(self) -> f64 {
        match self {
            Profile::MarketLike => 3.3e6,
            Profile::SinglePeak => 0.0,
            Profile::HighLoad => 6.0e6,
        }
    }

    fn is_noiseless(self) -> bool {
        self == Profile::SinglePeak
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SynthOptions {
    pub profile: Profile,
    pub days: usize,
    pub start: NaiveDate,
    pub seed: u64,
}

impl SynthOptions {
    pub fn new(profile: Profile, days: usize, seed: u64) -> Self {
        SynthOptions { profile, days, start: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(), seed }
    }
}

/// One generated system with its hidden truth and its observable files.
#[derive(Clone, Debug)]
pub struct SyntheticSystem {
    pub id: String,
    pub site: SiteConfig,
    pub ghi_analysis: HourlyTimeSeries,
    pub ghi_forecast: HourlyTimeSeries,
    pub pv_potential: HourlyTimeSeries,
    pub load: HourlyTimeSeries,
    /// SOC of the greedy replay, end of each hour.
    pub soc: HourlyTimeSeries,
    /// PV the plant actually delivered during the replay.
    pub pv_delivered: HourlyTimeSeries,
}

impl SyntheticSystem {
    pub fn telemetry_records(&self) -> Vec<TelemetryRecord> {
        self.load
            .iter()
            .zip(self.pv_delivered.values())
            .zip(self.soc.values())
            .map(|(((t, cons), &pv), &soc)| TelemetryRecord {
                timestamp: t,
                pv_energy_wh: pv,
                cons_energy_wh: cons,
                soc_pct: soc,
            })
            .collect()
    }

    pub fn irradiance_records(&self) -> Vec<IrradianceRecord> {
        let rows = |s: &HourlyTimeSeries, source| {
            s.iter().map(move |(t, g)| IrradianceRecord { timestamp: t, ghi_wh_m2: g, source }).collect::<Vec<_>>()
        };
        let mut out = rows(&self.ghi_forecast, IrradianceSource::Forecast);
        out.extend(rows(&self.ghi_analysis, IrradianceSource::Analysis));
        out
    }
}

fn stream(seed: u64, tag: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(tag);
    rng
}

fn first_hour(opts: &SynthOptions, site: &SiteConfig) -> Hour {
    Day::from_date(opts.start).first_hour(site.timezone_offset_h)
}

/// Haurwitz clear-sky irradiation for the hour, in Wh/m².
pub fn clear_sky_ghi(site: &SiteConfig, hour: Hour) -> f64 {
    let sun = sun_position(site, hour);
    let cz = (sun.zenith_deg.to_radians()).cos();
    if cz <= 0.0 {
        0.0
    } else {
        1098.0 * cz * (-0.057 / cz).exp()
    }
}

/// Irradiation analysis and forecast for `opts.days` local days.
pub fn weather(opts: &SynthOptions, site: &SiteConfig) -> Result<(HourlyTimeSeries, HourlyTimeSeries), ModelError> {
    let start = first_hour(opts, site);
    let n = opts.days * 24;
    let mut rng = stream(opts.seed, 1);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let mut analysis = Vec::with_capacity(n);
    let mut forecast = Vec::with_capacity(n);
    let mut cloud = 0.0_f64;
    for d in 0..opts.days {
        let (clearness, fc_day) = if opts.profile.is_noiseless() {
            (0.8, 0.0)
        } else {
            cloud = 0.6 * cloud + 0.1 * unit.sample(&mut rng);
            ((0.82 + cloud).clamp(0.3, 1.0), 0.1 * unit.sample(&mut rng))
        };
        for h in 0..24 {
            let t = start + (d * 24 + h) as i64;
            let (hour_noise, fc_noise) = if opts.profile.is_noiseless() {
                (0.0, 0.0)
            } else {
                (0.05 * unit.sample(&mut rng), 0.08 * unit.sample(&mut rng))
            };
            let a = (clear_sky_ghi(site, t) * clearness * (1.0 + hour_noise)).max(0.0);
            analysis.push(a);
            forecast.push((a * (1.0 + fc_day + fc_noise)).max(0.0));
        }
    }
    Ok((
        HourlyTimeSeries::new(start, analysis, SeriesKind::IrradiationWhM2)?,
        HourlyTimeSeries::new(start, forecast, SeriesKind::IrradiationWhM2)?,
    ))
}

/// DC energy the plant produces from the given irradiation, before any
/// curtailment. `noise` is a multiplicative error drawn per hour.
pub fn pv_truth(ghi: &HourlyTimeSeries, site: &SiteConfig, noise_sd: f64, seed: u64) -> Result<HourlyTimeSeries, ModelError> {
    let mut rng = stream(seed, 2);
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    let k = PLANT_FACTOR * site.pv_peak_w / 1000.0;
    let values = ghi
        .iter()
        .map(|(t, g)| {
            let sun = sun_position(site, t);
            if g <= 0.0 || !sun.is_up() {
                return 0.0;
            }
            let e = if noise_sd > 0.0 { noise_sd * unit.sample(&mut rng) } else { 0.0 };
            (k * project_to_poa(g, &sun, site, DEFAULT_ALBEDO) * (1.0 + e)).clamp(0.0, site.pv_peak_w)
        })
        .collect();
    HourlyTimeSeries::new(ghi.start(), values, SeriesKind::EnergyWh)
}

/// Relative weight of each opening hour 07..20 of the market profile.
const MARKET_SHAPE: [f64; 13] = [0.6, 0.7, 0.8, 0.9, 1.0, 1.0, 1.0, 1.0, 1.1, 1.2, 1.6, 2.0, 2.2];
const SUNDAY_SHARE: f64 = 0.15;
const HIGH_LOAD_NIGHT_WH: f64 = 150.0;

fn market_weight(weekday: usize, local_hour: usize) -> f64 {
    if !(7..20).contains(&local_hour) {
        return 0.0;
    }
    let w = MARKET_SHAPE[local_hour - 7];
    if weekday == 6 {
        w * SUNDAY_SHARE
    } else {
        w
    }
}

/// Hourly consumption in Wh on the AC side.
pub fn load_series(
    opts: &SynthOptions,
    site: &SiteConfig,
    annual_load_wh: f64,
    pv_potential: &HourlyTimeSeries,
    seed: u64,
) -> Result<HourlyTimeSeries, ModelError> {
    let start = first_hour(opts, site);
    let offset = site.timezone_offset_h;
    let n = opts.days * 24;
    let direct = site.eff.direct();
    let values: Vec<f64> = match opts.profile {
        Profile::SinglePeak => (0..n)
            .map(|i| {
                let t = start + i as i64;
                let delivered = pv_potential.values()[i] * direct;
                match t.local_hour(offset) {
                    7..=14 => 0.4 * delivered,
                    15..=18 => delivered + 900.0,
                    _ => 0.0,
                }
            })
            .collect(),
        Profile::MarketLike | Profile::HighLoad => {
            let night = if opts.profile == Profile::HighLoad { HIGH_LOAD_NIGHT_WH } else { 0.0 };
            let week: f64 = (0..7).map(|wd| (0..24).map(|h| market_weight(wd, h)).sum::<f64>()).sum();
            let night_year = night * 24.0 * 365.0 - night * 13.0 * 365.0;
            let level = ((annual_load_wh - night_year).max(0.0)) / (week * 365.0 / 7.0);
            let mut rng = stream(seed, 3);
            // Hour-to-hour AR(1) error on open hours with a 15% marginal spread.
            let innov = Normal::new(0.0, 0.15 * (1.0f64 - 0.25).sqrt()).expect("valid sd");
            let mut e: f64 = 0.0;
            (0..n)
                .map(|i| {
                    let t = start + i as i64;
                    let w = market_weight(t.local_day(offset).weekday_index(), t.local_hour(offset));
                    if w > 0.0 {
                        e = 0.5 * e + innov.sample(&mut rng);
                        (level * w * (1.0 + e)).max(0.0)
                    } else if (7..20).contains(&t.local_hour(offset)) {
                        0.0
                    } else {
                        night
                    }
                })
                .collect()
        }
    };
    HourlyTimeSeries::new(start, values, SeriesKind::EnergyWh)
}

/// Generates system `index` of a fleet. All systems of one seed share the
/// weather; loads differ per system.
pub fn synth_system(
    opts: &SynthOptions,
    site: &SiteConfig,
    id: &str,
    index: u64,
    annual_load_wh: f64,
) -> Result<SyntheticSystem, SimError> {
    let (ghi_analysis, ghi_forecast) = weather(opts, site)?;
    let noise = if opts.profile.is_noiseless() { 0.0 } else { 0.03 };
    let system_seed = opts.seed.wrapping_add(0x9E37_79B9_7F4A_7C15u64.wrapping_mul(index + 1));
    let pv_potential = pv_truth(&ghi_analysis, site, noise, system_seed)?;
    let load = load_series(opts, site, annual_load_wh, &pv_potential, system_seed)?;
    let run = run_scenario(&pv_potential, &load, &Strategy::Greedy, None, site, &RunOptions::default())?;
    let delivered = run.steps.iter().map(|s| s.pv_direct_wh + s.pv_charge_input_wh).collect();
    Ok(SyntheticSystem {
        id: id.to_string(),
        site: site.clone(),
        ghi_analysis,
        ghi_forecast,
        pv_potential,
        pv_delivered: HourlyTimeSeries::new(load.start(), delivered, SeriesKind::EnergyWh)?,
        soc: run.soc,
        load,
    })
}

/// Annual loads for an `n`-system fleet: the default five for `n = 5`,
/// otherwise spread evenly over the same range.
pub fn fleet_loads(n: usize) -> Vec<f64> {
    match n {
        5 => FLEET_ANNUAL_LOADS_WH.to_vec(),
        1 => vec![FLEET_ANNUAL_LOADS_WH[2]],
        _ => {
            let (lo, hi) = (FLEET_ANNUAL_LOADS_WH[0], FLEET_ANNUAL_LOADS_WH[4]);
            (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64).collect()
        }
    }
}

/// `n` systems named `sys01`, `sys02`, …
pub fn synth_fleet(opts: &SynthOptions, site: &SiteConfig, n: usize) -> Result<Vec<SyntheticSystem>, SimError> {
    let loads = if opts.profile == Profile::MarketLike { fleet_loads(n) } else { vec![opts.profile.default_annual_load_wh(); n] };
    loads
        .iter()
        .enumerate()
        .map(|(i, &annual)| synth_system(opts, site, &format!("sys{:02}", i + 1), i as u64, annual))
        .collect()
}
