use simctl::ingest::{
    irradiance_series, parse_irradiance, parse_telemetry, telemetry_to_hourly, write_irradiance, write_telemetry,
    GapPolicy, IngestError, TelemetryRecord,
};
use simctl::synth::{synth_system, Profile, SynthOptions};
use simctl_core::SiteConfig;

fn system() -> simctl::synth::SyntheticSystem {
    let opts = SynthOptions::new(Profile::MarketLike, 21, 77);
    synth_system(&opts, &SiteConfig::default(), "s", 0, 3.3e6).unwrap()
}

#[test]
fn synthetic_files_round_trip_to_the_same_series() {
    let sys = system();
    let mut buf = Vec::new();
    write_telemetry(&mut buf, &sys.telemetry_records()).unwrap();
    let tele = telemetry_to_hourly(&parse_telemetry(buf.as_slice()).unwrap(), &GapPolicy::default()).unwrap();
    assert_eq!(tele.cons, sys.load);
    assert_eq!(tele.pv.values(), sys.pv_delivered.values());
    assert_eq!(tele.soc.values(), sys.soc.values());

    let mut buf = Vec::new();
    write_irradiance(&mut buf, &sys.irradiance_records()).unwrap();
    let irr = irradiance_series(&parse_irradiance(buf.as_slice()).unwrap(), &GapPolicy::default()).unwrap();
    assert_eq!(irr.analysis.values(), sys.ghi_analysis.values());
    assert_eq!(irr.forecast.values(), sys.ghi_forecast.values());
}

#[test]
fn shuffled_rows_with_short_gaps_are_regridded() {
    let sys = system();
    let mut records: Vec<TelemetryRecord> = sys.telemetry_records();
    // Drop three hours in the middle and reverse the file order.
    let dropped: Vec<TelemetryRecord> = records.drain(100..103).collect();
    records.reverse();
    let mut buf = Vec::new();
    write_telemetry(&mut buf, &records).unwrap();
    let tele = telemetry_to_hourly(&parse_telemetry(buf.as_slice()).unwrap(), &GapPolicy::default()).unwrap();
    assert_eq!(tele.cons.len(), sys.load.len());
    for (k, r) in dropped.iter().enumerate() {
        assert_eq!(tele.cons.get(r.timestamp), Some(0.0));
        assert_eq!(tele.pv.get(r.timestamp), Some(0.0));
        // SOC carries the last reading forward.
        assert_eq!(tele.soc.values()[100 + k], sys.soc.values()[99]);
    }
}

#[test]
fn long_gap_is_refused() {
    let sys = system();
    let mut records = sys.telemetry_records();
    records.drain(50..60);
    let mut buf = Vec::new();
    write_telemetry(&mut buf, &records).unwrap();
    let parsed = parse_telemetry(buf.as_slice()).unwrap();
    match telemetry_to_hourly(&parsed, &GapPolicy::default()) {
        Err(IngestError::GapTooLong { hours, max_h, .. }) => assert_eq!((hours, max_h), (10, 6)),
        other => panic!("expected a gap error, got {other:?}"),
    }
    assert!(telemetry_to_hourly(&parsed, &GapPolicy { max_gap_h: 10 }).is_ok());
}

#[test]
fn bad_rows_report_their_line() {
    let text = "timestamp,pv_energy_wh,cons_energy_wh,soc_pct\n\
                2019-01-01T00:00:00Z,0,10,50\n\
                2019-01-01T01:00:00Z,0,10,101\n";
    match parse_telemetry(text.as_bytes()) {
        Err(IngestError::MalformedRow { line, .. }) => assert_eq!(line, 3),
        other => panic!("{other:?}"),
    }
    let dup = "timestamp,pv_energy_wh,cons_energy_wh,soc_pct\n\
               2019-01-01T00:00:00Z,0,10,50\n\
               2019-01-01T00:00:00Z,0,11,50\n";
    assert!(matches!(parse_telemetry(dup.as_bytes()), Err(IngestError::DuplicateTimestamp { .. })));
    let header_only = "timestamp,pv_energy_wh,cons_energy_wh,soc_pct\n";
    assert!(matches!(parse_telemetry(header_only.as_bytes()), Err(IngestError::EmptyFile)));
}
