//! Day-ahead consumption forecast.
//!
//! Days are grouped by weekday cluster. Within a cluster the hour-of-day mean
//! and spread are removed first, and the ARIMA model runs on the standardized
//! remainder of the member days laid end to end. Hours that never vary within
//! a cluster (a shop closed at night) are deterministic and left out of that
//! series. A forecast for a target day adds the model's extrapolation back onto
//! the cluster's daily shape.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use super::arima::{fit_arima, ArimaModel, ArimaOrder, ArimaState, MIN_SAMPLES};
use super::cluster::{cluster_days, complete_days, ClusterModel, ClusterSettings};
use super::{ErrorStructure, ForecastBlock, ForecastChannel, ForecastError, HORIZON_H, Z_95};
use crate::math;
use crate::model::HourlyTimeSeries;
use crate::time::Day;

/// Clusters with fewer member days use a mean-only model.
pub const MIN_CLUSTER_DAYS: usize = 7;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadSettings {
    pub clusters: ClusterSettings,
    pub order_grid: Vec<ArimaOrder>,
    pub z: f64,
}

impl Default for LoadSettings {
    fn default() -> Self {
        LoadSettings { clusters: ClusterSettings::default(), order_grid: ArimaOrder::default_grid(), z: Z_95 }
    }
}

/// Daily shape of one cluster and the model of its deviations.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClusterProfile {
    /// Hour-of-day mean in Wh.
    pub mean: Vec<f64>,
    /// Hour-of-day standard deviation in Wh.
    pub scale: Vec<f64>,
    pub arima: ArimaModel,
}

/// Below this spread an hour of the day is treated as deterministic.
const MIN_SCALE_WH: f64 = 1e-9;

impl ClusterProfile {
    /// A profile that leaves the ARIMA model in raw Wh.
    pub fn raw(arima: ArimaModel) -> Self {
        ClusterProfile { mean: vec![0.0; HORIZON_H], scale: vec![1.0; HORIZON_H], arima }
    }

    /// Hours of the day the ARIMA model steps through.
    pub fn active_hours(&self) -> Vec<usize> {
        (0..HORIZON_H).filter(|&h| self.scale[h] > MIN_SCALE_WH).collect()
    }
}

/// Observed history of one cluster in standardized units.
#[derive(Clone, Debug, Default, PartialEq)]
struct ClusterHistory {
    days: Vec<Day>,
    series: Vec<f64>,
    innovations: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LoadForecaster {
    pub clusters: ClusterModel,
    pub profiles: Vec<ClusterProfile>,
    pub utc_offset_h: i32,
    pub z: f64,
    #[serde(skip)]
    history: Vec<ClusterHistory>,
}

/// Hourly consumption forecast.
#[derive(Clone, Debug)]
pub struct LoadForecast(pub ForecastChannel);

impl LoadForecaster {
    /// Clusters the history, then fits each cluster's profile and ARIMA model.
    /// The fitted history also conditions later forecasts: a forecast issued
    /// for day `D` only looks at member days before `D`.
    pub fn fit(history: &HourlyTimeSeries, settings: &LoadSettings) -> Result<Self, ForecastError> {
        let offset = settings.clusters.utc_offset_h;
        let clusters = cluster_days(history, &settings.clusters)?;
        let days = complete_days(history, offset);

        let mut profiles = Vec::with_capacity(clusters.k);
        let mut hist = Vec::with_capacity(clusters.k);
        for members in &clusters.member_days {
            let rows: Vec<&[f64]> =
                days.iter().filter(|(d, _)| members.binary_search(d).is_ok()).map(|(_, v)| *v).collect();
            let mut mean = vec![0.0; HORIZON_H];
            let mut scale = vec![0.0; HORIZON_H];
            for h in 0..HORIZON_H {
                let col: Vec<f64> = rows.iter().map(|r| r[h]).collect();
                let m = math::mean(&col);
                mean[h] = m;
                scale[h] = math::sqrt(col.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / col.len().max(1) as f64);
            }
            let active: Vec<usize> = (0..HORIZON_H).filter(|&h| scale[h] > MIN_SCALE_WH).collect();
            let series: Vec<f64> = rows
                .iter()
                .flat_map(|r| {
                    let (mean, scale, active) = (&mean, &scale, &active);
                    active.iter().map(move |&h| (r[h] - mean[h]) / scale[h])
                })
                .collect();
            let arima = if series.is_empty() {
                ArimaModel::white_noise(0.0, 0.0)
            } else if rows.len() < MIN_CLUSTER_DAYS || series.len() < MIN_SAMPLES {
                let m = math::mean(&series);
                let var = series.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / series.len() as f64;
                ArimaModel::white_noise(m, math::sqrt(var))
            } else {
                fit_arima(&series, &settings.order_grid)?
            };
            let innovations = arima.innovations(&series);
            hist.push(ClusterHistory { days: members.clone(), series, innovations });
            profiles.push(ClusterProfile { mean, scale, arima });
        }
        Ok(LoadForecaster { clusters, profiles, utc_offset_h: offset, z: settings.z, history: hist })
    }

    /// A forecaster from already fitted parts. With no history attached each
    /// forecast starts from the models' unconditional state.
    pub fn from_parts(
        clusters: ClusterModel,
        profiles: Vec<ClusterProfile>,
        utc_offset_h: i32,
        z: f64,
    ) -> Result<Self, ForecastError> {
        if profiles.len() != clusters.k || clusters.weekday_to_cluster.iter().any(|&c| c >= clusters.k) {
            return Err(ForecastError::UnfittedModel("one profile per cluster"));
        }
        let history = vec![ClusterHistory::default(); clusters.k];
        Ok(LoadForecaster { clusters, profiles, utc_offset_h, z, history })
    }

    pub fn utc_offset_h(&self) -> i32 {
        self.utc_offset_h
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    fn state(&self, cluster: usize, before: Day, per_day: usize) -> ArimaState {
        let model = &self.profiles[cluster].arima;
        match self.history.get(cluster) {
            Some(h) if !h.days.is_empty() => {
                let n_days = h.days.partition_point(|d| *d < before);
                model.state_at(&h.series, &h.innovations, n_days * per_day)
            }
            _ => ArimaState::default(),
        }
    }

    /// Forecast for `n_days` local days starting at `day`, issued at the
    /// start of `day`. Consecutive days in the same cluster share one
    /// forecast path, so their errors are correlated.
    pub fn issue_block(&self, day: Day, n_days: usize) -> Result<ForecastBlock, ForecastError> {
        if self.profiles.len() != self.clusters.k {
            return Err(ForecastError::UnfittedModel("load forecaster"));
        }
        let n = HORIZON_H * n_days;
        let mut expected = vec![0.0; n];
        let mut w = vec![0.0; n * n];
        let mut d = 0;
        while d < n_days {
            let c = self.clusters.cluster_for(Day(day.0 + d as i64));
            let mut e = d + 1;
            while e < n_days && self.clusters.cluster_for(Day(day.0 + e as i64)) == c {
                e += 1;
            }
            let profile = &self.profiles[c];
            let active = profile.active_hours();
            let base = HORIZON_H * d;
            for i in 0..HORIZON_H * (e - d) {
                expected[base + i] = profile.mean[i % HORIZON_H].max(0.0);
            }
            // The ARIMA path runs over active hours only; `rows[k]` is the
            // block row of the k-th step along it.
            let rows: Vec<usize> =
                (0..e - d).flat_map(|dd| active.iter().map(move |&h| base + dd * HORIZON_H + h)).collect();
            let mean = profile.arima.forecast_mean(&self.state(c, day, active.len()), rows.len());
            let psi = profile.arima.psi(rows.len());
            let sigma = profile.arima.residual_std;
            for (k, &r) in rows.iter().enumerate() {
                let h = r % HORIZON_H;
                expected[r] = (profile.mean[h] + profile.scale[h] * mean[k]).max(0.0);
                let s = profile.scale[h] * sigma;
                for (j, &col) in rows[..=k].iter().enumerate() {
                    w[r * n + col] = s * psi[k - j];
                }
            }
            d = e;
        }
        Ok(ForecastBlock {
            start: day.first_hour(self.utc_offset_h),
            expected,
            ceiling_wh: f64::INFINITY,
            errors: ErrorStructure::Linear(w),
        })
    }

    /// The 24 hourly triplets of a target local day.
    pub fn forecast_load_24h(&self, day: Day) -> Result<LoadForecast, ForecastError> {
        Ok(LoadForecast(ForecastChannel::whole(self.issue_block(day, 1)?, self.z)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::forecast::{EnergyTriplet, ErrorStructure};
    use crate::model::SeriesKind;
    use crate::time::Hour;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, Normal};

    fn single_cluster(model: ArimaModel) -> LoadForecaster {
        LoadForecaster::from_parts(ClusterModel::single(0.0, Vec::new()), vec![ClusterProfile::raw(model)], 0, Z_95)
            .unwrap()
    }

    #[test]
    fn mean_model_triplets() {
        let f = single_cluster(ArimaModel::white_noise(500.0, 100.0));
        let t = f.forecast_load_24h(Day(19_000)).unwrap().0.triplets();
        assert_eq!(t.len(), 24);
        for tr in t {
            assert!((tr.exp - 500.0).abs() < 1e-9);
            assert!((tr.low - 304.0).abs() < 1e-9);
            assert!((tr.up - 696.0).abs() < 1e-9);
        }
    }

    #[test]
    fn zero_residual_collapses_interval() {
        let f = single_cluster(ArimaModel::white_noise(300.0, 0.0));
        for tr in f.forecast_load_24h(Day(19_000)).unwrap().0.triplets() {
            assert_eq!(tr, EnergyTriplet::exact(300.0));
        }
    }

    #[test]
    fn from_parts_checks_cluster_count() {
        let r = LoadForecaster::from_parts(ClusterModel::single(0.0, Vec::new()), Vec::new(), 0, Z_95);
        assert!(matches!(r, Err(ForecastError::UnfittedModel(_))));
    }

    /// Market-like shape: open 07–20, Sunday light.
    fn shape(weekday: usize, hour: usize) -> f64 {
        let open = (7..20).contains(&hour);
        match (weekday, open) {
            (6, true) => 60.0,
            (_, true) => 300.0 + 20.0 * hour as f64,
            _ => 0.0,
        }
    }

    fn market_history(days: usize, noise_sd: f64, seed: u64) -> HourlyTimeSeries {
        let start = Hour::from_ymdh(2019, 1, 7, 0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let noise = Normal::new(0.0, 1.0).unwrap();
        let mut values = Vec::with_capacity(days * 24);
        for d in 0..days {
            let wd = Day(start.local_day(0).0 + d as i64).weekday_index();
            for h in 0..24 {
                let base = shape(wd, h);
                let v = if base > 0.0 { base + noise_sd * base / 300.0 * noise.sample(&mut rng) } else { 0.0 };
                values.push(v.max(0.0));
            }
        }
        HourlyTimeSeries::new(start, values, SeriesKind::EnergyWh).unwrap()
    }

    #[test]
    fn noiseless_periodic_history_fits_exactly() {
        let h = market_history(42, 0.0, 0);
        let f = LoadForecaster::fit(&h, &LoadSettings::default()).unwrap();
        assert_eq!(f.clusters.k, 2);
        for p in &f.profiles {
            assert!(p.arima.residual_std < 1e-9);
        }
        let day = h.start().local_day(0);
        for d in 0..7 {
            let target = Day(day.0 + 42 + d);
            let t = f.forecast_load_24h(target).unwrap().0.triplets();
            for (hour, tr) in t.iter().enumerate() {
                let want = shape(target.weekday_index(), hour);
                assert!((tr.exp - want).abs() < 1e-6, "day {d} hour {hour}: {} vs {want}", tr.exp);
                assert!(tr.up - tr.low < 1e-6);
            }
        }
    }

    #[test]
    fn closed_hours_are_exact_and_open_hours_keep_unit_variance() {
        let h = market_history(140, 30.0, 11);
        let f = LoadForecaster::fit(&h, &LoadSettings::default()).unwrap();
        for p in &f.profiles {
            assert_eq!(p.active_hours(), (7..20).collect::<Vec<_>>());
            // Independent noise standardizes to unit variance.
            assert!((p.arima.residual_std - 1.0).abs() < 0.08, "{}", p.arima.residual_std);
        }
        let day = Day(h.start().local_day(0).0 + 140);
        for (hour, tr) in f.forecast_load_24h(day).unwrap().0.triplets().iter().enumerate() {
            if !(7..20).contains(&hour) {
                assert_eq!(*tr, EnergyTriplet::exact(0.0));
            } else {
                assert!(tr.up > tr.low);
            }
        }
    }

    #[test]
    fn sunday_forecast_follows_sunday_cluster() {
        let h = market_history(120, 30.0, 4);
        let f = LoadForecaster::fit(&h, &LoadSettings::default()).unwrap();
        let first = h.start().local_day(0);
        let sunday = (0..7).map(|i| Day(first.0 + 120 + i)).find(|d| d.weekday_index() == 6).unwrap();
        let monday = Day(sunday.0 + 1);
        let sun_tot: f64 = f.forecast_load_24h(sunday).unwrap().0.expected().iter().sum();
        let mon_tot: f64 = f.forecast_load_24h(monday).unwrap().0.expected().iter().sum();
        // Cluster-mean oracle: the Sunday member days' average total.
        let days = complete_days(&h, 0);
        let sundays: Vec<f64> =
            days.iter().filter(|(d, _)| d.weekday_index() == 6).map(|(_, v)| v.iter().sum()).collect();
        let oracle = sundays.iter().sum::<f64>() / sundays.len() as f64;
        assert!((sun_tot - oracle).abs() < 0.1 * oracle, "{sun_tot} vs {oracle}");
        assert!(mon_tot > 3.0 * sun_tot);
    }

    #[test]
    fn issue_block_is_lower_triangular_and_ordered() {
        let h = market_history(60, 40.0, 9);
        let f = LoadForecaster::fit(&h, &LoadSettings::default()).unwrap();
        let day = Day(h.start().local_day(0).0 + 30);
        let b = f.issue_block(day, 2).unwrap();
        assert_eq!(b.len(), 48);
        let ErrorStructure::Linear(w) = &b.errors else { panic!("expected linear errors") };
        for r in 0..48 {
            for c in r + 1..48 {
                assert_eq!(w[r * 48 + c], 0.0);
            }
        }
        let ch = ForecastChannel::whole(b, Z_95);
        for tr in ch.triplets() {
            assert!(0.0 <= tr.low && tr.low <= tr.exp && tr.exp <= tr.up);
        }
    }

    #[test]
    fn model_round_trips_through_json() {
        let h = market_history(30, 20.0, 2);
        let f = LoadForecaster::fit(&h, &LoadSettings::default()).unwrap();
        let json = serde_json::to_string(&f).unwrap();
        let back: LoadForecaster = serde_json::from_str(&json).unwrap();
        assert_eq!(back.clusters, f.clusters);
        assert_eq!(back.profiles, f.profiles);
    }
}
