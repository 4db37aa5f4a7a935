//! `simctl forecast|simulate|sweep|synth --config <file> [flags]`

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use clap::{Args, Parser, Subcommand};
use log::info;
use simctl_core::analysis::{fan_chart, SweepResult};
use simctl_core::forecast::{ForecastChannel, HORIZON_H};
use simctl_core::{Day, HourlyTimeSeries};

use crate::config::{Overrides, RunConfig, StrategyKind, SystemConfig};
use crate::error::AppError;
use crate::ingest::{write_irradiance, write_telemetry};
use crate::pipeline::{self, comparable_pv_hours, error_stats, load_system, prepare};
use crate::report::{self, AccuracyReport, KpiFile, RunMeta, SweepReport};
use crate::synth::{synth_fleet, Profile, SynthOptions};

#[derive(Debug, Parser)]
#[command(name = "simctl", version, about = "Forecast-based charging for standalone PV-battery systems")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub common: Common,
}

#[derive(Debug, Args)]
pub struct Common {
    /// Run configuration (JSON).
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// SOC low limit in percent.
    #[arg(long, global = true)]
    pub limit: Option<f64>,
    #[arg(long, global = true, value_enum)]
    pub strategy: Option<StrategyKind>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Day-ahead load and PV forecast for one local day, with accuracy
    /// against telemetry when the day is covered.
    Forecast {
        /// Local date (YYYY-MM-DD); defaults to the last full day of telemetry.
        #[arg(long)]
        date: Option<NaiveDate>,
        /// Only this system.
        #[arg(long)]
        system: Option<String>,
    },
    /// Replay each system with one strategy.
    Simulate,
    /// Sweep the SOC low limit for every system.
    Sweep,
    /// Generate synthetic telemetry and irradiation files plus a config
    /// pointing at them.
    Synth {
        #[arg(long, value_enum)]
        profile: Option<Profile>,
        #[arg(long)]
        days: Option<usize>,
        #[arg(long)]
        systems: Option<usize>,
    },
}

fn load_config(common: &Common, need_inputs: bool) -> Result<RunConfig, AppError> {
    let path = common.config.as_ref().ok_or_else(|| AppError::Config("--config <file> is required".into()))?;
    let mut cfg = RunConfig::load(path)?;
    cfg.apply(&Overrides { limit: common.limit, strategy: common.strategy, seed: common.seed, out: common.out.clone() });
    cfg.validate(need_inputs)?;
    Ok(cfg)
}

fn meta(cfg: &RunConfig) -> RunMeta {
    RunMeta { config_hash: cfg.hash(), seed: cfg.seed }
}

pub fn run(cli: Cli) -> Result<(), AppError> {
    match cli.command {
        Command::Forecast { date, system } => {
            let cfg = load_config(&cli.common, true)?;
            cmd_forecast(&cfg, date, system.as_deref())
        }
        Command::Simulate => cmd_simulate(&load_config(&cli.common, true)?),
        Command::Sweep => cmd_sweep(&load_config(&cli.common, true)?),
        Command::Synth { profile, days, systems } => {
            let mut cfg = load_config(&cli.common, false)?;
            if let Some(p) = profile {
                cfg.synth.profile = p;
            }
            if let Some(d) = days {
                cfg.synth.days = d;
            }
            if let Some(n) = systems {
                cfg.synth.systems = n;
            }
            cfg.validate(false)?;
            cmd_synth(&cfg)
        }
    }
}

fn system_dir(cfg: &RunConfig, id: &str) -> PathBuf {
    cfg.output_dir.join(id)
}

pub fn cmd_forecast(cfg: &RunConfig, date: Option<NaiveDate>, only: Option<&str>) -> Result<(), AppError> {
    let systems: Vec<&SystemConfig> = cfg.systems.iter().filter(|s| only.is_none_or(|id| s.id == id)).collect();
    if systems.is_empty() {
        return Err(AppError::Config(format!("no system named {}", only.unwrap_or_default())));
    }
    for sys in systems {
        let data = load_system(cfg, sys)?;
        let models = pipeline::fit_models(cfg, &data)?;
        let offset = data.site.timezone_offset_h;
        let cons = &data.telemetry.cons;
        let day = match date {
            Some(d) => Day::from_date(d),
            // The last local day fully covered by telemetry.
            None => Day(cons.end().local_day(offset).0 - 1),
        };
        let start = day.first_hour(offset);
        let load = models.load.forecast_load_24h(day)?.0;
        let pv = ForecastChannel::whole(models.pv.issue_block(start, HORIZON_H, &data.irradiance.forecast), models.pv.z());

        let dir = system_dir(cfg, &sys.id);
        let tag = day.date().format("%Y-%m-%d").to_string();
        report::write_forecast(&dir.join(format!("forecast_{tag}_load.csv")), start, &load.triplets())?;
        report::write_forecast(&dir.join(format!("forecast_{tag}_pv.csv")), start, &pv.triplets())?;

        let end = start + HORIZON_H as i64;
        let covered = |s: &HourlyTimeSeries| s.start() <= start && end <= s.end();
        let all = vec![true; HORIZON_H];
        let load_stats =
            if covered(cons) { error_stats(load.expected(), cons.window(start, end), &all) } else { None };
        let pv_t = &data.telemetry.pv;
        let pv_stats = if covered(pv_t) {
            let keep = comparable_pv_hours(&data.telemetry.soc, start, HORIZON_H);
            error_stats(pv.expected(), pv_t.window(start, end), &keep)
        } else {
            None
        };
        let acc = AccuracyReport { meta: meta(cfg), system_id: sys.id.clone(), date: tag.clone(), load: load_stats, pv: pv_stats };
        report::write_accuracy(&dir.join(format!("forecast_{tag}_accuracy.json")), &acc)?;
        let fmt = |s: Option<pipeline::ErrorStats>| match s {
            Some(s) => format!("MAE {:.1} Wh, RMSE {:.1} Wh over {} h", s.mae_wh, s.rmse_wh, s.hours),
            None => "no truth".to_string(),
        };
        println!("{} {tag}: load {}; pv {}", sys.id, fmt(load_stats), fmt(pv_stats));
    }
    Ok(())
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<(), AppError> {
    let kind = cfg.strategy.kind;
    let limit = cfg.strategy.soc_low_limit_pct;
    for sys in &cfg.systems {
        let data = load_system(cfg, sys)?;
        let prepared = prepare(cfg, &data)?;
        let (out, kpis) = prepared.simulate(kind, limit)?;
        let dir = system_dir(cfg, &sys.id);
        report::write_trajectory(&dir.join("trajectory.csv"), &out)?;
        if kind == StrategyKind::Forecast {
            report::write_setpoints(&dir.join("setpoints.csv"), &out)?;
        }
        report::write_fan_chart(&dir.join("fan_soc.csv"), &fan_chart(&out.soc, data.site.timezone_offset_h)?)?;
        let name = match kind {
            StrategyKind::Greedy => "greedy",
            StrategyKind::Forecast => "forecast",
        };
        let file = KpiFile {
            meta: meta(cfg),
            system_id: sys.id.clone(),
            strategy: name.to_string(),
            soc_low_limit_pct: (kind == StrategyKind::Forecast).then_some(limit),
            kpis,
        };
        report::write_kpi_json(&dir.join("kpis.json"), &file)?;
        println!(
            "{} {name}: avg SOC {:.1}%, full {:.2} h/day, outages {} h",
            sys.id, kpis.avg_soc_pct, kpis.full_charge_hours_per_day, kpis.outage_hours
        );
    }
    Ok(())
}

pub fn cmd_sweep(cfg: &RunConfig) -> Result<(), AppError> {
    let limits = pipeline::configured_limits(cfg);
    let mut result = SweepResult::default();
    for sys in &cfg.systems {
        let data = load_system(cfg, sys)?;
        let prepared = prepare(cfg, &data)?;
        info!("{}: sweeping {} limits", sys.id, limits.len());
        result.extend(prepared.sweep(&limits)?);
        let offset = data.site.timezone_offset_h;
        let t = &data.telemetry;
        for (name, series) in [("soc", &t.soc), ("consumption", &t.cons), ("pv", &t.pv)] {
            let path = cfg.output_dir.join(format!("fan_{}_{name}.csv", sys.id));
            report::write_fan_chart(&path, &fan_chart(series, offset)?)?;
        }
    }
    report::write_sweep_csv(&cfg.output_dir.join("sweep.csv"), &result)?;
    report::write_sweep_json(&cfg.output_dir.join("sweep.json"), &SweepReport { meta: meta(cfg), result: result.clone() })?;
    report::write_plot_data(&cfg.output_dir, &result)?;
    println!("{} sweep rows written to {}", result.rows.len(), cfg.output_dir.display());
    Ok(())
}

fn write_file(path: &Path, f: impl FnOnce(BufWriter<File>) -> csv::Result<()>) -> Result<(), AppError> {
    let file = File::create(path).map_err(|e| AppError::io(path, e))?;
    f(BufWriter::new(file)).map_err(|e| AppError::Report(format!("{}: {e}", path.display())))
}

/// Writes `<id>_telemetry.csv`, `<id>_irradiance.csv` and a `config.json`
/// that runs the other commands on them.
pub fn cmd_synth(cfg: &RunConfig) -> Result<(), AppError> {
    let s = &cfg.synth;
    let opts = SynthOptions { profile: s.profile, days: s.days, start: s.start_date, seed: cfg.seed };
    let fleet = synth_fleet(&opts, &cfg.site, s.systems)?;
    let dir = &cfg.output_dir;
    fs::create_dir_all(dir).map_err(|e| AppError::io(dir, e))?;
    let mut out_cfg = cfg.clone();
    out_cfg.output_dir = PathBuf::from("out");
    out_cfg.systems.clear();
    for sys in &fleet {
        let tele = format!("{}_telemetry.csv", sys.id);
        let irr = format!("{}_irradiance.csv", sys.id);
        write_file(&dir.join(&tele), |w| write_telemetry(w, &sys.telemetry_records()))?;
        write_file(&dir.join(&irr), |w| write_irradiance(w, &sys.irradiance_records()))?;
        out_cfg.systems.push(SystemConfig { id: sys.id.clone(), telemetry: tele.into(), irradiance: irr.into(), site: None });
    }
    let path = dir.join("config.json");
    let text = serde_json::to_string_pretty(&out_cfg).map_err(|e| AppError::Report(e.to_string()))?;
    fs::write(&path, text + "\n").map_err(|e| AppError::io(&path, e))?;
    println!("{} {:?} system(s), {} days, written to {}", fleet.len(), s.profile, s.days, dir.display());
    Ok(())
}
