use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};
use mspc_guard::bench::{self, ExperimentConfig, Scenario, MODEL_FILE};
use mspc_guard::{Error, MonitorBundle, Result, RunLength};

/// Detect and diagnose anomalies in a simulated control system.
#[derive(Debug, Parser)]
#[command(name = "mspc-guard", version)]
struct Cli {
    /// Output directory.
    #[arg(long, global = true, env = "MSPC_GUARD_OUT", default_value = "mspc-out")]
    out: PathBuf,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration (JSON). Unset fields take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Simulate attack-free runs and build the monitoring model.
    Calibrate {
        #[command(flatten)]
        common: Common,
        /// Master seed for the calibration runs.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Simulate one scenario run and monitor both views.
    Run {
        #[command(flatten)]
        common: Common,
        /// D1, A1, A2, A3 or a scenario template (.json).
        #[arg(long)]
        scenario: String,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Model file; defaults to <out>/model.json.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Diagnose the alarms of a recorded run.
    Diagnose {
        #[command(flatten)]
        common: Common,
        /// Run CSV (its .meta.json sidecar must sit next to it).
        #[arg(long)]
        run: PathBuf,
        /// Alarm list written by `run`.
        #[arg(long)]
        alarms: PathBuf,
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Run a scenario over many seeds and aggregate detection and diagnosis.
    Experiment {
        #[command(flatten)]
        common: Common,
        /// Overrides the configured scenario.
        #[arg(long)]
        scenario: Option<String>,
        /// Overrides the configured seeds; repeat for several.
        #[arg(long)]
        seed: Vec<u64>,
        /// Model file; calibrated and written there when missing.
        #[arg(long)]
        model: Option<PathBuf>,
    },
}

fn load_config(common: &Common) -> Result<ExperimentConfig> {
    match &common.config {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}

fn model_path(model: &Option<PathBuf>, out: &Path) -> PathBuf {
    model.clone().unwrap_or_else(|| out.join(MODEL_FILE))
}

fn fmt_arl(arl: RunLength) -> String {
    match arl {
        RunLength::Detected { seconds } => format!("{seconds} s"),
        RunLength::NotDetected => "not detected".into(),
    }
}

fn execute(cli: Cli) -> Result<()> {
    let out = cli.out;
    match cli.command {
        Command::Calibrate { common, seed } => {
            let mut config = load_config(&common)?;
            if let Some(s) = seed {
                config.calibration_seed = s;
            }
            let (path, bundle) = bench::cmd_calibrate(&config, &out)?;
            let m = &bundle.model;
            println!(
                "model: {} variables ({} excluded), {} components, {:.1}% variance",
                m.variable_names().len(),
                m.excluded_variables().len(),
                m.retained(),
                100.0 * m.explained_variance()
            );
            println!(
                "limits: D95 {:.4} D99 {:.4} Q95 {:.4} Q99 {:.4} ({:?})",
                bundle.limits.d_95, bundle.limits.d_99, bundle.limits.q_95, bundle.limits.q_99, bundle.limits.method
            );
            println!("wrote {}", path.display());
        }
        Command::Run {
            common,
            scenario,
            seed,
            model,
        } => {
            let config = load_config(&common)?;
            let scenario: Scenario = scenario.parse()?;
            let bundle = MonitorBundle::load(&model_path(&model, &out))?;
            let (files, outcome) = bench::cmd_run_scenario(&bundle, &config, &scenario, seed, &out)?;
            println!(
                "{scenario} seed {seed}: {} alarms, run length {}",
                outcome.all_alarms().len(),
                fmt_arl(outcome.arl)
            );
            if let Some(d) = &outcome.diagnosis {
                println!(
                    "diagnosis: {:?} (max divergence {:.3}), localized {}",
                    d.classification,
                    d.max_divergence,
                    d.localized_variable.as_deref().unwrap_or("-")
                );
            }
            for p in [&files.run_csv, &files.stats_csv, &files.alarms_json] {
                println!("wrote {}", p.display());
            }
        }
        Command::Diagnose {
            common,
            run,
            alarms,
            model,
        } => {
            let config = load_config(&common)?;
            let bundle = MonitorBundle::load(&model_path(&model, &out))?;
            let result = bench::cmd_diagnose(&bundle, &config, &run, &alarms, &out)?;
            if let Some(msg) = result.message {
                println!("{msg}");
            }
            for (i, r) in result.reports.iter().enumerate() {
                println!(
                    "event {i} ({:?}, {} view, alarm at {} s): {:?}, top controller {}, top process {}",
                    r.alarm.statistic,
                    r.alarm.view.label(),
                    r.alarm.alarm_t,
                    r.classification,
                    r.implicated.controller.first().map_or("-", String::as_str),
                    r.implicated.process.first().map_or("-", String::as_str),
                );
            }
            for p in &result.files {
                println!("wrote {}", p.display());
            }
        }
        Command::Experiment {
            common,
            scenario,
            seed,
            model,
        } => {
            let mut config = load_config(&common)?;
            if let Some(s) = scenario {
                config.scenario = s.parse()?;
            }
            if !seed.is_empty() {
                config.seeds = seed;
            }
            let (files, report) = bench::cmd_experiment(&config, model.as_deref(), &out)?;
            let a = &report.aggregate;
            let secs = |v: Option<f64>| v.map_or("-".to_string(), |s| format!("{s}"));
            println!(
                "{}: {} runs ({} failed), detection rate {:.2}",
                report.scenario, a.runs, a.failed_runs, a.detection_rate
            );
            println!(
                "run length s: median {} min {} max {}",
                secs(a.arl_median_s),
                secs(a.arl_min_s),
                secs(a.arl_max_s)
            );
            for (label, rate) in &a.classification_rates {
                println!("  {label}: {rate:.2}");
            }
            if let Some(rate) = a.localization_rate {
                println!("localization rate: {rate:.2}");
            }
            for s in report.seeds.iter().filter(|s| s.error.is_some()) {
                println!("seed {} failed: {}", s.seed, s.error.as_deref().unwrap_or_default());
            }
            println!("model {}", files.model.display());
            println!("wrote {}", files.report_json.display());
            println!("wrote {}", files.report_csv.display());
            println!("wrote {} charts", report.charts.len());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => ExitCode::SUCCESS,
                _ => ExitCode::from(1),
            };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    e.exit_code().clamp(1, 255) as u8
}
