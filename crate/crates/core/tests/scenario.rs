//! Whole-scenario properties that hold for any PV and load profile.

use proptest::prelude::*;
use simctl_core::forecast::OracleForecaster;
use simctl_core::simulator::{run_scenario, RunOptions, StepInput};
use simctl_core::strategy::{Strategy as Charging, StrategyParams};
use simctl_core::{Hour, HourlyTimeSeries, SeriesKind, SiteConfig};

fn series(values: Vec<f64>) -> HourlyTimeSeries {
    HourlyTimeSeries::new(Hour::from_ymdh(2019, 3, 4, 0).unwrap(), values, SeriesKind::EnergyWh).unwrap()
}

/// Days of PV shaped by a daylight bump and loads drawn per hour.
fn profile() -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (2usize..6).prop_flat_map(|days| {
        let n = days * 24;
        (
            prop::collection::vec(0.0..1.0f64, days),
            prop::collection::vec(0.0..800.0f64, n),
        )
            .prop_map(move |(clear, load)| {
                let pv = (0..n)
                    .map(|i| {
                        let h = (i % 24) as f64;
                        let bump = ((h - 6.0) * (18.0 - h)).max(0.0) / 36.0;
                        3000.0 * clear[i / 24] * bump
                    })
                    .collect();
                (pv, load)
            })
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn greedy_never_holds_less_energy((pv, load) in profile(), limit in 20.0..100.0f64, soc0 in 20.0..100.0f64) {
        let site = SiteConfig::default();
        let pv = series(pv);
        let load = series(load);
        let oracle = OracleForecaster::new(&pv, &load).unwrap();
        let opts = RunOptions { initial_soc_pct: soc0, ..RunOptions::default() };
        let params = StrategyParams {
            soc_low_limit_pct: limit,
            e_batt_wh: site.battery.capacity_wh,
            eta_charge: site.default_eta_charge(),
        };
        let g = run_scenario(&pv, &load, &Charging::Greedy, None, &site, &opts).unwrap();
        let f = run_scenario(&pv, &load, &Charging::ForecastBased(params), Some(&oracle), &site, &opts).unwrap();

        for (i, (a, b)) in g.steps.iter().zip(&f.steps).enumerate() {
            prop_assert!(a.soc_end_pct >= b.soc_end_pct - 1e-9, "hour {i}: {} < {}", a.soc_end_pct, b.soc_end_pct);
            prop_assert!(a.unserved_wh <= b.unserved_wh + 1e-9);
            let input = StepInput { pv_potential_wh: pv.values()[i], load_wh: load.values()[i] };
            prop_assert!(b.balance_residual(&input) < 1e-6);
            prop_assert!((0.0..=100.0).contains(&b.soc_end_pct));
            prop_assert!(b.served_wh() <= input.load_wh + 1e-9);
        }
        prop_assert_eq!(f.setpoints.len(), load.len());
    }
}
