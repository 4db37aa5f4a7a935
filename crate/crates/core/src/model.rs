//! Shared domain types and the SOC/energy arithmetic.
//!
//! Units are fixed across the crate: energy in Wh, power in W, SOC in percent
//! of nominal capacity, time in whole UTC hours. SOC is treated as state of
//! energy, so it is linear in the energy stored at the battery terminals.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::math;
use crate::time::Hour;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid {name}: {value}")]
    InvalidParameter { name: &'static str, value: f64 },
    #[error("sample {index} of {kind:?} series is out of range: {value}")]
    InvalidSample { kind: SeriesKind, index: usize, value: f64 },
    #[error("charge and discharge efficiencies multiply to {product}, expected round trip {roundtrip}")]
    EfficiencyMismatch { product: f64, roundtrip: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SeriesKind {
    EnergyWh,
    SocPct,
    /// Horizontal or in-plane irradiation in Wh/m² per hour.
    IrradiationWhM2,
}

/// Contiguous hourly samples starting at `start`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HourlyTimeSeries {
    start: Hour,
    values: Vec<f64>,
    kind: SeriesKind,
}

impl HourlyTimeSeries {
    pub fn new(start: Hour, values: Vec<f64>, kind: SeriesKind) -> Result<Self, ModelError> {
        for (index, &value) in values.iter().enumerate() {
            let ok = match kind {
                SeriesKind::EnergyWh | SeriesKind::IrradiationWhM2 => value.is_finite() && value >= 0.0,
                SeriesKind::SocPct => value.is_finite() && (0.0..=100.0).contains(&value),
            };
            if !ok {
                return Err(ModelError::InvalidSample { kind, index, value });
            }
        }
        Ok(HourlyTimeSeries { start, values, kind })
    }

    pub fn start(&self) -> Hour {
        self.start
    }

    /// One past the last sample.
    pub fn end(&self) -> Hour {
        self.start + self.values.len() as i64
    }

    pub fn kind(&self) -> SeriesKind {
        self.kind
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn get(&self, hour: Hour) -> Option<f64> {
        let i = hour - self.start;
        if i < 0 {
            return None;
        }
        self.values.get(i as usize).copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (Hour, f64)> + '_ {
        self.values.iter().enumerate().map(move |(i, &v)| (self.start + i as i64, v))
    }

    /// Samples in `[from, to)`, clipped to the series.
    pub fn window(&self, from: Hour, to: Hour) -> &[f64] {
        let a = (from - self.start).clamp(0, self.len() as i64) as usize;
        let b = (to - self.start).clamp(a as i64, self.len() as i64) as usize;
        &self.values[a..b]
    }

    pub fn sum(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BatterySpec {
    pub capacity_wh: f64,
    #[serde(default = "default_hard_min")]
    pub soc_hard_min_pct: f64,
    #[serde(default = "default_roundtrip")]
    pub roundtrip_eff: f64,
    #[serde(default)]
    pub max_charge_w: Option<f64>,
    #[serde(default)]
    pub max_discharge_w: Option<f64>,
}

fn default_hard_min() -> f64 {
    20.0
}

fn default_roundtrip() -> f64 {
    0.90
}

impl BatterySpec {
    pub fn new(capacity_wh: f64) -> Self {
        BatterySpec {
            capacity_wh,
            soc_hard_min_pct: default_hard_min(),
            roundtrip_eff: default_roundtrip(),
            max_charge_w: None,
            max_discharge_w: None,
        }
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        if !(self.capacity_wh > 0.0 && self.capacity_wh.is_finite()) {
            return Err(ModelError::InvalidParameter { name: "capacity_wh", value: self.capacity_wh });
        }
        if !(0.0..100.0).contains(&self.soc_hard_min_pct) {
            return Err(ModelError::InvalidParameter { name: "soc_hard_min_pct", value: self.soc_hard_min_pct });
        }
        if !(self.roundtrip_eff > 0.0 && self.roundtrip_eff <= 1.0) {
            return Err(ModelError::InvalidParameter { name: "roundtrip_eff", value: self.roundtrip_eff });
        }
        for (name, limit) in [("max_charge_w", self.max_charge_w), ("max_discharge_w", self.max_discharge_w)] {
            if let Some(v) = limit {
                if !(v >= 0.0) {
                    return Err(ModelError::InvalidParameter { name, value: v });
                }
            }
        }
        Ok(())
    }
}

/// Static conversion efficiencies of the DC-coupled topology.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EfficiencyChain {
    pub mppt_eff: f64,
    pub inverter_eff: f64,
    pub batt_charge_eff: f64,
    pub batt_discharge_eff: f64,
}

impl EfficiencyChain {
    /// Default converter efficiencies with the battery round trip split evenly
    /// between charge and discharge.
    pub fn for_roundtrip(roundtrip_eff: f64) -> Self {
        let leg = math::sqrt(roundtrip_eff);
        EfficiencyChain { mppt_eff: 0.98, inverter_eff: 0.943, batt_charge_eff: leg, batt_discharge_eff: leg }
    }

    /// PV to AC load without touching the battery.
    pub fn direct(&self) -> f64 {
        self.mppt_eff * self.inverter_eff
    }

    /// PV to battery terminals.
    pub fn pv_to_battery(&self) -> f64 {
        self.mppt_eff * self.batt_charge_eff
    }

    /// Battery terminals to AC load.
    pub fn battery_to_load(&self) -> f64 {
        self.batt_discharge_eff * self.inverter_eff
    }

    pub fn validate(&self, roundtrip_eff: f64) -> Result<(), ModelError> {
        for (name, v) in [
            ("mppt_eff", self.mppt_eff),
            ("inverter_eff", self.inverter_eff),
            ("batt_charge_eff", self.batt_charge_eff),
            ("batt_discharge_eff", self.batt_discharge_eff),
        ] {
            if !(v > 0.0 && v <= 1.0) {
                return Err(ModelError::InvalidParameter { name, value: v });
            }
        }
        let product = self.batt_charge_eff * self.batt_discharge_eff;
        if math::abs(product - roundtrip_eff) > 1e-9 {
            return Err(ModelError::EfficiencyMismatch { product, roundtrip: roundtrip_eff });
        }
        Ok(())
    }
}

impl Default for EfficiencyChain {
    fn default() -> Self {
        EfficiencyChain::for_roundtrip(default_roundtrip())
    }
}

/// Missing fields in serialized form take the [`Default`] site's values.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SiteConfig {
    pub latitude_deg: f64,
    pub longitude_deg: f64,
    pub panel_tilt_deg: f64,
    /// Clockwise from north; 180 faces due south.
    pub panel_azimuth_deg: f64,
    pub pv_peak_w: f64,
    pub battery: BatterySpec,
    #[serde(default)]
    pub eff: EfficiencyChain,
    #[serde(default)]
    pub timezone_offset_h: i32,
}

impl SiteConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        if !(math::abs(self.latitude_deg) <= 90.0) {
            return Err(ModelError::InvalidParameter { name: "latitude_deg", value: self.latitude_deg });
        }
        if !(math::abs(self.longitude_deg) <= 180.0) {
            return Err(ModelError::InvalidParameter { name: "longitude_deg", value: self.longitude_deg });
        }
        if !(0.0..=90.0).contains(&self.panel_tilt_deg) {
            return Err(ModelError::InvalidParameter { name: "panel_tilt_deg", value: self.panel_tilt_deg });
        }
        if !(self.pv_peak_w > 0.0 && self.pv_peak_w.is_finite()) {
            return Err(ModelError::InvalidParameter { name: "pv_peak_w", value: self.pv_peak_w });
        }
        if !(-12..=14).contains(&self.timezone_offset_h) {
            return Err(ModelError::InvalidParameter {
                name: "timezone_offset_h",
                value: self.timezone_offset_h as f64,
            });
        }
        self.battery.validate()?;
        self.eff.validate(self.battery.roundtrip_eff)
    }

    /// The strategy-side charge efficiency: PV through the MPPT into the battery.
    pub fn default_eta_charge(&self) -> f64 {
        self.eff.pv_to_battery()
    }
}

impl Default for SiteConfig {
    /// A 9.75 kWp / 10 kWh market system near Lagos.
    fn default() -> Self {
        SiteConfig {
            latitude_deg: 6.45,
            longitude_deg: 3.40,
            panel_tilt_deg: 10.0,
            panel_azimuth_deg: 180.0,
            pv_peak_w: 9750.0,
            battery: BatterySpec::new(10_000.0),
            eff: EfficiencyChain::default(),
            timezone_offset_h: 1,
        }
    }
}

/// Predicted SOC change over an interval under the pessimistic, expected and
/// optimistic forecast scenarios, in percentage points.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocDeltaTriplet {
    low: f64,
    exp: f64,
    up: f64,
}

impl SocDeltaTriplet {
    pub fn new(low: f64, exp: f64, up: f64) -> Result<Self, ModelError> {
        if !(low <= exp) {
            return Err(ModelError::InvalidParameter { name: "delta_soc_low", value: low });
        }
        if !(exp <= up) {
            return Err(ModelError::InvalidParameter { name: "delta_soc_up", value: up });
        }
        Ok(SocDeltaTriplet { low, exp, up })
    }

    /// Pairs pessimistic PV with high consumption for `low` and the reverse
    /// for `up`. `pv` and `cons` are `(low, exp, up)` energies in Wh.
    pub fn from_energies(
        pv: (f64, f64, f64),
        cons: (f64, f64, f64),
        eta_charge: f64,
        e_batt_wh: f64,
    ) -> Result<Self, ModelError> {
        let exp = delta_soc(pv.1, cons.1, eta_charge, e_batt_wh)?;
        let up = delta_soc(pv.2, cons.0, eta_charge, e_batt_wh)?;
        let low = delta_soc(pv.0, cons.2, eta_charge, e_batt_wh)?;
        SocDeltaTriplet::new(low, exp, up)
    }

    pub fn low(&self) -> f64 {
        self.low
    }

    pub fn exp(&self) -> f64 {
        self.exp
    }

    pub fn up(&self) -> f64 {
        self.up
    }
}

/// SOC after moving `net_batt_energy_wh` through the battery terminals
/// (positive charges). Efficiencies are the caller's business.
pub fn soc_after(soc_pct: f64, net_batt_energy_wh: f64, batt: &BatterySpec) -> f64 {
    (soc_pct + 100.0 * net_batt_energy_wh / batt.capacity_wh).clamp(0.0, 100.0)
}

/// Expected SOC change in percentage points when `e_pv_wh` of PV (scaled by
/// the charge efficiency) meets `e_cons_wh` of consumption.
pub fn delta_soc(e_pv_wh: f64, e_cons_wh: f64, eta_charge: f64, e_batt_wh: f64) -> Result<f64, ModelError> {
    if !(e_batt_wh > 0.0) {
        return Err(ModelError::InvalidParameter { name: "e_batt_wh", value: e_batt_wh });
    }
    Ok(100.0 * (e_pv_wh * eta_charge - e_cons_wh) / e_batt_wh)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn batt() -> BatterySpec {
        BatterySpec::new(10_000.0)
    }

    #[test]
    fn soc_after_examples() {
        assert_eq!(soc_after(50.0, 1000.0, &batt()), 60.0);
        assert_eq!(soc_after(50.0, 0.0, &batt()), 50.0);
        assert_eq!(soc_after(95.0, 1000.0, &batt()), 100.0);
        assert_eq!(soc_after(5.0, -1000.0, &batt()), 0.0);
    }

    #[test]
    fn delta_soc_examples() {
        assert!((delta_soc(5000.0, 2000.0, 0.9, 10_000.0).unwrap() - 25.0).abs() < 1e-12);
        assert_eq!(delta_soc(0.0, 0.0, 0.9, 10_000.0).unwrap(), 0.0);
        assert!((delta_soc(0.0, 3000.0, 0.9, 10_000.0).unwrap() + 30.0).abs() < 1e-12);
        assert!(delta_soc(1.0, 1.0, 0.9, 0.0).is_err());
        assert!(delta_soc(1.0, 1.0, 0.9, -5.0).is_err());
    }

    #[test]
    fn default_chain_matches_roundtrip() {
        let site = SiteConfig::default();
        site.validate().unwrap();
        let e = &site.eff;
        assert!((e.batt_charge_eff * e.batt_discharge_eff - 0.9).abs() < 1e-12);
        assert!((site.default_eta_charge() - 0.98 * 0.9_f64.sqrt()).abs() < 1e-12);
    }

    #[test]
    fn rejects_bad_site() {
        let mut site = SiteConfig::default();
        site.panel_tilt_deg = 95.0;
        assert!(site.validate().is_err());
        let mut site = SiteConfig::default();
        site.eff.batt_charge_eff = 0.99;
        assert!(matches!(site.validate(), Err(ModelError::EfficiencyMismatch { .. })));
        let mut site = SiteConfig::default();
        site.battery.capacity_wh = 0.0;
        assert!(site.validate().is_err());
    }

    #[test]
    fn series_rejects_out_of_range_samples() {
        assert!(HourlyTimeSeries::new(Hour(0), vec![1.0, -1.0], SeriesKind::EnergyWh).is_err());
        assert!(HourlyTimeSeries::new(Hour(0), vec![50.0, 101.0], SeriesKind::SocPct).is_err());
        assert!(HourlyTimeSeries::new(Hour(0), vec![f64::NAN], SeriesKind::EnergyWh).is_err());
        let s = HourlyTimeSeries::new(Hour(10), vec![1.0, 2.0, 3.0], SeriesKind::EnergyWh).unwrap();
        assert_eq!(s.get(Hour(11)), Some(2.0));
        assert_eq!(s.get(Hour(9)), None);
        assert_eq!(s.window(Hour(11), Hour(20)), &[2.0, 3.0]);
        assert_eq!(s.end(), Hour(13));
    }

    #[test]
    fn triplet_rejects_inverted_ordering() {
        assert!(SocDeltaTriplet::new(-45.0, -50.0, -40.0).is_err());
        assert!(SocDeltaTriplet::new(-50.0, -45.0, -40.0).is_ok());
    }

    proptest! {
        #[test]
        fn delta_soc_sign(e in 0.0..1e5f64, eta in 0.01..1.0f64, cap in 1.0..1e5f64) {
            prop_assert!(delta_soc(e, 0.0, eta, cap).unwrap() >= 0.0);
            prop_assert!(delta_soc(0.0, e, eta, cap).unwrap() <= 0.0);
        }

        #[test]
        fn delta_soc_is_linear(a in 0.0..1e4f64, b in 0.0..1e4f64, c in 0.0..1e4f64, eta in 0.5..1.0f64) {
            let whole = delta_soc(a + b, c, eta, 10_000.0).unwrap();
            let parts = delta_soc(a, c, eta, 10_000.0).unwrap() + delta_soc(b, 0.0, eta, 10_000.0).unwrap();
            prop_assert!((whole - parts).abs() < 1e-9);
        }

        #[test]
        fn triplet_ordered_for_consistent_forecasts(
            pv in prop::array::uniform3(0.0..2e4f64),
            cons in prop::array::uniform3(0.0..2e4f64),
            eta in 0.5..1.0f64,
        ) {
            let mut pv = pv; pv.sort_by(f64::total_cmp);
            let mut cons = cons; cons.sort_by(f64::total_cmp);
            let t = SocDeltaTriplet::from_energies(
                (pv[0], pv[1], pv[2]), (cons[0], cons[1], cons[2]), eta, 10_000.0).unwrap();
            prop_assert!(t.low() <= t.exp() && t.exp() <= t.up());
        }

        #[test]
        fn soc_after_stays_in_range_and_composes(
            soc in 0.0..=100.0f64, e1 in -3000.0..3000.0f64, e2 in -3000.0..3000.0f64,
        ) {
            let b = batt();
            let one = soc_after(soc, e1, &b);
            prop_assert!((0.0..=100.0).contains(&one));
            let mid = soc + 100.0 * e1 / b.capacity_wh;
            let end = mid + 100.0 * e2 / b.capacity_wh;
            if (0.0..=100.0).contains(&mid) && (0.0..=100.0).contains(&end) {
                let two = soc_after(soc_after(soc, e1, &b), e2, &b);
                prop_assert!((two - soc_after(soc, e1 + e2, &b)).abs() < 1e-9);
            }
        }
    }
}
