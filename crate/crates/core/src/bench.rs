//! Experiment harness: calibration from attack-free runs, the four
//! reference scenarios, multi-seed experiments, and file emission.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::channel::{AttackSpec, Direction};
use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::io::{read_json, read_run, write_json, write_run, write_stats_csv, AlarmLog};
use crate::mspc::limits::{empirical_limits, quantile, theoretical_limits, LimitMethod};
use crate::mspc::monitor::{compute_arl, monitor_stream, statistics, AlarmEvent, MonitorOutput, RunLength, Statistic, View};
use crate::mspc::pca::{calibrate, RetainPolicy};
use crate::mspc::MonitorBundle;
use crate::omeda::{
    diagnose_event, noise_floor, Classification, DiagnosisConfig, DiagnosisReport, OmedaVector, DEFAULT_GROUP_SIZE,
    DEFAULT_TAU,
};
use crate::plant::{variable_names, PlantParams};
use crate::sim::{simulate_run, DisturbanceSpec, RunRecord, ScenarioConfig};
use crate::svg::{bar_chart, ControlChart};

pub const MODEL_FILE: &str = "model.json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Scenario {
    /// Feed-A loss disturbance.
    D1,
    /// Integrity attack closing the feed-A valve.
    A1,
    /// Integrity attack forcing the feed-A flow reading to 0.
    A2,
    /// DoS on the feed-A valve command.
    A3,
    /// Scenario template read from a JSON file.
    Custom(PathBuf),
}

impl Scenario {
    pub const BUILT_IN: [Scenario; 4] = [Scenario::D1, Scenario::A1, Scenario::A2, Scenario::A3];

    /// Short label used in file names.
    pub fn label(&self) -> String {
        match self {
            Scenario::Custom(p) => p.file_stem().map_or("custom".into(), |s| s.to_string_lossy().into_owned()),
            other => other.to_string(),
        }
    }

    pub fn template(&self, onset_h: f64) -> Result<ScenarioTemplate> {
        let t = |name: &str, disturbances, attacks| ScenarioTemplate {
            name: name.to_string(),
            duration_h: None,
            onset_h: Some(onset_h),
            disturbances,
            attacks,
        };
        Ok(match self {
            Scenario::D1 => t("D1", vec![DisturbanceSpec::feed_a_loss(0.0, onset_h)], vec![]),
            Scenario::A1 => t(
                "A1",
                vec![],
                vec![AttackSpec::integrity("u_a", Direction::ToActuator, 0.0, onset_h, None)],
            ),
            Scenario::A2 => t(
                "A2",
                vec![],
                vec![AttackSpec::integrity("flow_a", Direction::ToController, 0.0, onset_h, None)],
            ),
            Scenario::A3 => t("A3", vec![], vec![AttackSpec::dos("u_a", Direction::ToActuator, onset_h)]),
            Scenario::Custom(path) => {
                let mut tpl: ScenarioTemplate = read_json(path)?;
                if tpl.name.is_empty() {
                    tpl.name = self.label();
                }
                tpl
            }
        })
    }

    /// Concrete run configuration for one seed.
    pub fn config(&self, duration_h: f64, onset_h: f64, seed: u64) -> Result<ScenarioConfig> {
        let tpl = self.template(onset_h)?;
        let cfg = ScenarioConfig {
            name: tpl.name,
            duration_h: tpl.duration_h.unwrap_or(duration_h),
            seed,
            onset_h: tpl.onset_h.unwrap_or(onset_h),
            disturbances: tpl.disturbances,
            attacks: tpl.attacks,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Scenario::D1 => f.write_str("D1"),
            Scenario::A1 => f.write_str("A1"),
            Scenario::A2 => f.write_str("A2"),
            Scenario::A3 => f.write_str("A3"),
            Scenario::Custom(p) => write!(f, "{}", p.display()),
        }
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        Ok(match key.as_str() {
            "d1" | "d1_feedloss" | "d1_feed_loss" => Scenario::D1,
            "a1" | "a1_integrityactuator" | "a1_integrity_actuator" => Scenario::A1,
            "a2" | "a2_integritysensor" | "a2_integrity_sensor" => Scenario::A2,
            "a3" | "a3_dosactuator" | "a3_dos_actuator" => Scenario::A3,
            _ if key.ends_with(".json") => Scenario::Custom(PathBuf::from(s)),
            _ => {
                return Err(Error::Config(format!(
                    "unknown scenario \"{s}\" (expected D1, A1, A2, A3 or a .json template)"
                )))
            }
        })
    }
}

impl Serialize for Scenario {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.collect_str(self)
    }
}

impl<'de> Deserialize<'de> for Scenario {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Custom scenario file. Missing duration / onset fall back to the experiment's.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTemplate {
    #[serde(default)]
    pub name: String,
    #[serde(default)]
    pub duration_h: Option<f64>,
    #[serde(default)]
    pub onset_h: Option<f64>,
    #[serde(default)]
    pub disturbances: Vec<DisturbanceSpec>,
    #[serde(default)]
    pub attacks: Vec<AttackSpec>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seeds: Vec<u64>,
    pub calibration_runs: usize,
    /// Master seed from which calibration run seeds are derived.
    pub calibration_seed: u64,
    pub duration_h: f64,
    pub onset_h: f64,
    pub group_size: usize,
    pub tau: f64,
    pub limit_method: LimitMethod,
    pub retain: RetainPolicy,
    /// Subset of recorded variables to monitor; all eight when absent.
    pub monitored_variables: Option<Vec<String>>,
    pub params: PlantParams,
    pub log_scale_charts: bool,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::D1,
            seeds: (1..=10).collect(),
            calibration_runs: 30,
            calibration_seed: 20_240_101,
            duration_h: 24.0,
            onset_h: 10.0,
            group_size: DEFAULT_GROUP_SIZE,
            tau: DEFAULT_TAU,
            limit_method: LimitMethod::Empirical,
            retain: RetainPolicy::default(),
            monitored_variables: None,
            params: PlantParams::default(),
            log_scale_charts: true,
        }
    }
}

impl ExperimentConfig {
    /// A missing file is an I/O fault; anything unparsable is a configuration error.
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = read_json(path).map_err(|e| match e {
            Error::Json { path, source } => Error::Config(format!("{}: {source}", path.display())),
            other => other,
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.seeds.is_empty() {
            return Err(Error::Config("seed list is empty".into()));
        }
        if self.calibration_runs < 2 {
            return Err(Error::Config(format!(
                "calibration_runs must be >= 2, got {}",
                self.calibration_runs
            )));
        }
        if !(self.duration_h.is_finite() && self.duration_h > 0.0) {
            return Err(Error::Config(format!("duration_h must be > 0, got {}", self.duration_h)));
        }
        if !(self.onset_h >= 0.0 && self.onset_h < self.duration_h) {
            return Err(Error::Config(format!("onset_h ({}) must lie in [0, duration_h)", self.onset_h)));
        }
        self.diagnosis(0.0).validate()?;
        self.params.validate()?;
        if let Some(vars) = &self.monitored_variables {
            let all = variable_names();
            if vars.is_empty() {
                return Err(Error::Config("monitored_variables is empty".into()));
            }
            for (i, v) in vars.iter().enumerate() {
                if !all.contains(v) {
                    return Err(Error::Config(format!("unknown variable \"{v}\"")));
                }
                if vars[..i].contains(v) {
                    return Err(Error::Config(format!("variable \"{v}\" listed twice")));
                }
            }
        }
        Ok(())
    }

    pub fn monitored(&self) -> Vec<String> {
        self.monitored_variables.clone().unwrap_or_else(variable_names)
    }

    pub fn diagnosis(&self, noise_floor: f64) -> DiagnosisConfig {
        DiagnosisConfig {
            group_size: self.group_size,
            tau: self.tau,
            noise_floor,
        }
    }
}

/// Seeds of the calibration runs, derived from the master seed.
pub fn calibration_seeds(master: u64, runs: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(master);
    (0..runs).map(|_| rng.next_u64()).collect()
}

pub fn simulate_calibration_runs(config: &ExperimentConfig) -> Result<Vec<RunRecord>> {
    config.validate()?;
    calibration_seeds(config.calibration_seed, config.calibration_runs)
        .into_par_iter()
        .map(|seed| {
            let cfg = ScenarioConfig::attack_free("calibration", config.duration_h, 0.0, seed);
            simulate_run(&cfg, &config.params)
        })
        .collect()
}

/// Calibrates model, limits and oMEDA noise floor from the given runs.
pub fn calibrate_from_runs(runs: &[RunRecord], config: &ExperimentConfig) -> Result<MonitorBundle> {
    let names = config.monitored();
    let views: Vec<DataMatrix> = runs
        .iter()
        .map(|r| r.controller_view.select(&names))
        .collect::<Result<_>>()?;
    let stacked = DataMatrix::vstack(&views)?;
    let model = calibrate(&stacked, config.retain)?;
    let times: Vec<f64> = (0..stacked.nrows()).map(|i| i as f64).collect();
    let points = statistics(&model, &times, &stacked)?;
    let limits = match config.limit_method {
        LimitMethod::Empirical => empirical_limits(&points)?,
        LimitMethod::Theoretical => {
            let q: Vec<f64> = points.iter().map(|p| p.q).collect();
            theoretical_limits(model.retained(), stacked.nrows(), &q)?
        }
    };
    let floor = noise_floor(&model, &views, config.group_size)?;
    Ok(MonitorBundle {
        model,
        limits,
        omeda_noise_floor: floor,
    })
}

pub fn calibrate_bundle(config: &ExperimentConfig) -> Result<MonitorBundle> {
    calibrate_from_runs(&simulate_calibration_runs(config)?, config)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArlEntry {
    pub statistic: Statistic,
    pub view: View,
    pub arl: RunLength,
}

/// Everything produced by one monitored scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub run: RunRecord,
    pub controller: MonitorOutput,
    pub process: MonitorOutput,
    /// Earliest detection over both views and both statistics.
    pub arl: RunLength,
    pub arl_table: Vec<ArlEntry>,
    /// Alarm used for diagnosis.
    pub event: Option<AlarmEvent>,
    pub diagnosis: Option<DiagnosisReport>,
}

impl ScenarioOutcome {
    pub fn output(&self, view: View) -> &MonitorOutput {
        match view {
            View::Controller => &self.controller,
            View::Process => &self.process,
        }
    }

    pub fn all_alarms(&self) -> Vec<AlarmEvent> {
        self.controller.alarms.iter().chain(&self.process.alarms).cloned().collect()
    }

    pub fn alarm_log(&self, limits: &crate::mspc::limits::ControlLimits) -> AlarmLog {
        AlarmLog {
            scenario: self.run.meta.scenario.name.clone(),
            seed: self.run.meta.seed,
            onset_h: self.run.meta.onset_h,
            limits: *limits,
            alarms: self.all_alarms(),
        }
    }
}

/// First alarm at or after the onset; ties go to the controller view, then D.
pub fn diagnostic_event<'a>(alarms: impl IntoIterator<Item = &'a AlarmEvent>, onset_h: f64) -> Option<AlarmEvent> {
    let onset_s = onset_h * 3600.0;
    alarms
        .into_iter()
        .filter(|a| a.alarm_t >= onset_s)
        .min_by(|a, b| {
            a.alarm_t
                .total_cmp(&b.alarm_t)
                .then(a.view.cmp(&b.view))
                .then(a.statistic.cmp(&b.statistic))
        })
        .cloned()
}

/// Monitors both views of a finished run and diagnoses its first event.
pub fn analyze_run(bundle: &MonitorBundle, diag: &DiagnosisConfig, run: RunRecord) -> Result<ScenarioOutcome> {
    let (model, limits) = (&bundle.model, &bundle.limits);
    let controller = monitor_stream(model, limits, View::Controller, &run.times, &run.controller_view)?;
    let process = monitor_stream(model, limits, View::Process, &run.times, &run.process_view)?;
    let onset = run.meta.onset_h;
    let mut arl_table = Vec::new();
    for (view, out) in [(View::Controller, &controller), (View::Process, &process)] {
        for stat in [Statistic::D, Statistic::Q] {
            arl_table.push(ArlEntry {
                statistic: stat,
                view,
                arl: compute_arl(out.alarms.iter().filter(|a| a.statistic == stat), onset),
            });
        }
    }
    let all: Vec<&AlarmEvent> = controller.alarms.iter().chain(&process.alarms).collect();
    let arl = compute_arl(all.iter().copied(), onset);
    let event = diagnostic_event(all.iter().copied(), onset);
    let diagnosis = event
        .as_ref()
        .map(|e| diagnose_event(model, &run, e, diag))
        .transpose()?;
    Ok(ScenarioOutcome {
        run,
        controller,
        process,
        arl,
        arl_table,
        event,
        diagnosis,
    })
}

pub fn run_scenario(
    bundle: &MonitorBundle,
    config: &ExperimentConfig,
    scenario: &Scenario,
    seed: u64,
) -> Result<ScenarioOutcome> {
    let cfg = scenario.config(config.duration_h, config.onset_h, seed)?;
    let run = simulate_run(&cfg, &config.params)?;
    analyze_run(bundle, &config.diagnosis(bundle.omeda_noise_floor), run)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ArlRow {
    pub seed: u64,
    pub statistic: Statistic,
    pub view: View,
    pub detected: bool,
    pub arl_s: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedResult {
    pub seed: u64,
    /// Set when the run failed; the remaining fields are then empty.
    pub error: Option<String>,
    pub detected: bool,
    pub arl_s: Option<f64>,
    pub classification: Option<Classification>,
    pub localized_variable: Option<String>,
    pub localization_correct: Option<bool>,
    pub controller_top: Option<String>,
    pub process_top: Option<String>,
    pub diagnosis: Option<DiagnosisReport>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub runs: usize,
    pub failed_runs: usize,
    pub detection_rate: f64,
    pub arl_median_s: Option<f64>,
    pub arl_min_s: Option<f64>,
    pub arl_max_s: Option<f64>,
    /// Fraction of all seeds per classification label.
    pub classification_rates: BTreeMap<String, f64>,
    /// Fraction of all seeds whose localized variable is the attacked one.
    pub localization_rate: Option<f64>,
    /// How often each variable ranked first in the controller view.
    pub controller_top_counts: BTreeMap<String, usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeanOmeda {
    pub runs: usize,
    pub controller: OmedaVector,
    pub process: OmedaVector,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub scenario: String,
    pub attacked_variable: Option<String>,
    pub rows: Vec<ArlRow>,
    pub seeds: Vec<SeedResult>,
    pub aggregate: Aggregate,
    pub mean_omeda: Option<MeanOmeda>,
    pub charts: Vec<PathBuf>,
}

fn seed_result(seed: u64, outcome: &Result<ScenarioOutcome>, target: Option<&str>) -> SeedResult {
    match outcome {
        Err(e) => SeedResult {
            seed,
            error: Some(e.to_string()),
            detected: false,
            arl_s: None,
            classification: None,
            localized_variable: None,
            localization_correct: None,
            controller_top: None,
            process_top: None,
            diagnosis: None,
        },
        Ok(o) => {
            let d = o.diagnosis.as_ref();
            let localized = d.and_then(|d| d.localized_variable.clone());
            SeedResult {
                seed,
                error: None,
                detected: o.arl.is_detected(),
                arl_s: o.arl.seconds(),
                classification: d.map(|d| d.classification),
                localization_correct: target.map(|t| localized.as_deref() == Some(t)),
                localized_variable: localized,
                controller_top: d.and_then(|d| d.controller_omeda.top().map(str::to_string)),
                process_top: d.and_then(|d| d.process_omeda.top().map(str::to_string)),
                diagnosis: d.cloned(),
            }
        }
    }
}

fn mean_vector(vs: &[&OmedaVector]) -> OmedaVector {
    let n = vs.len() as f64;
    let m = vs[0].contributions.len();
    OmedaVector {
        variable_names: vs[0].variable_names.clone(),
        contributions: (0..m).map(|j| vs.iter().map(|v| v.contributions[j]).sum::<f64>() / n).collect(),
    }
}

/// Builds the report from per-seed outcomes, ordered as `seeds`.
pub fn summarize(
    scenario: &Scenario,
    attacked_variable: Option<String>,
    seeds: &[u64],
    outcomes: &[Result<ScenarioOutcome>],
) -> ExperimentReport {
    let mut rows = Vec::new();
    for (&seed, o) in seeds.iter().zip(outcomes) {
        if let Ok(o) = o {
            rows.extend(o.arl_table.iter().map(|e| ArlRow {
                seed,
                statistic: e.statistic,
                view: e.view,
                detected: e.arl.is_detected(),
                arl_s: e.arl.seconds(),
            }));
        }
    }
    let results: Vec<SeedResult> = seeds
        .iter()
        .zip(outcomes)
        .map(|(&s, o)| seed_result(s, o, attacked_variable.as_deref()))
        .collect();

    let total = results.len() as f64;
    let arls: Vec<f64> = results.iter().filter_map(|r| r.arl_s).collect();
    let mut classification_rates = BTreeMap::new();
    for label in [Classification::Disturbance, Classification::Attack, Classification::Inconclusive] {
        let n = results.iter().filter(|r| r.classification == Some(label)).count();
        classification_rates.insert(format!("{label:?}"), n as f64 / total);
    }
    let mut controller_top_counts = BTreeMap::new();
    for top in results.iter().filter_map(|r| r.controller_top.clone()) {
        *controller_top_counts.entry(top).or_insert(0) += 1;
    }
    let aggregate = Aggregate {
        runs: results.len(),
        failed_runs: results.iter().filter(|r| r.error.is_some()).count(),
        detection_rate: results.iter().filter(|r| r.detected).count() as f64 / total,
        arl_median_s: (!arls.is_empty()).then(|| quantile(&arls, 0.5)),
        arl_min_s: arls.iter().copied().reduce(f64::min),
        arl_max_s: arls.iter().copied().reduce(f64::max),
        classification_rates,
        localization_rate: attacked_variable
            .as_ref()
            .map(|_| results.iter().filter(|r| r.localization_correct == Some(true)).count() as f64 / total),
        controller_top_counts,
    };

    let diagnosed: Vec<&DiagnosisReport> = results.iter().filter_map(|r| r.diagnosis.as_ref()).collect();
    let mean_omeda = (!diagnosed.is_empty()).then(|| {
        let c: Vec<&OmedaVector> = diagnosed.iter().map(|d| &d.controller_omeda).collect();
        let p: Vec<&OmedaVector> = diagnosed.iter().map(|d| &d.process_omeda).collect();
        MeanOmeda {
            runs: diagnosed.len(),
            controller: mean_vector(&c),
            process: mean_vector(&p),
        }
    });

    ExperimentReport {
        scenario: scenario.to_string(),
        attacked_variable,
        rows,
        seeds: results,
        aggregate,
        mean_omeda,
        charts: Vec::new(),
    }
}

/// Runs every seed (in parallel) and aggregates in seed order.
pub fn run_experiment(
    bundle: &MonitorBundle,
    config: &ExperimentConfig,
) -> Result<(ExperimentReport, Vec<Result<ScenarioOutcome>>)> {
    config.validate()?;
    let target = config
        .scenario
        .template(config.onset_h)?
        .attacks
        .first()
        .map(|a| a.target.clone());
    let outcomes: Vec<Result<ScenarioOutcome>> = config
        .seeds
        .par_iter()
        .map(|&seed| run_scenario(bundle, config, &config.scenario, seed))
        .collect();
    let report = summarize(&config.scenario, target, &config.seeds, &outcomes);
    Ok((report, outcomes))
}

fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn control_chart_svg(outcome: &ScenarioOutcome, view: View, stat: Statistic, bundle: &MonitorBundle, log: bool) -> String {
    let series: Vec<(f64, f64)> = outcome
        .output(view)
        .points
        .iter()
        .map(|p| {
            let v = match stat {
                Statistic::D => p.d,
                Statistic::Q => p.q,
            };
            (p.t / 3600.0, v)
        })
        .collect();
    let (l95, l99) = match stat {
        Statistic::D => (bundle.limits.d_95, bundle.limits.d_99),
        Statistic::Q => (bundle.limits.q_95, bundle.limits.q_99),
    };
    let title = format!(
        "{} seed {}: {stat:?} statistic, {} view",
        outcome.run.meta.scenario.name,
        outcome.run.meta.seed,
        view.label()
    );
    let y_label = format!("{stat:?}");
    ControlChart {
        title: &title,
        y_label: &y_label,
        series: &series,
        limit_95: l95,
        limit_99: l99,
        onset_h: Some(outcome.run.meta.onset_h),
        log_scale: log,
    }
    .render()
}

fn omeda_chart(title: &str, v: &OmedaVector) -> String {
    bar_chart(title, &v.variable_names, &v.contributions)
}

/// Writes `model.json` into `out_dir`.
pub fn cmd_calibrate(config: &ExperimentConfig, out_dir: &Path) -> Result<(PathBuf, MonitorBundle)> {
    config.validate()?;
    ensure_dir(out_dir)?;
    let bundle = calibrate_bundle(config)?;
    let path = out_dir.join(MODEL_FILE);
    bundle.save(&path)?;
    Ok((path, bundle))
}

#[derive(Debug, Clone)]
pub struct RunFiles {
    pub run_csv: PathBuf,
    pub stats_csv: PathBuf,
    pub alarms_json: PathBuf,
}

pub fn write_outcome(outcome: &ScenarioOutcome, bundle: &MonitorBundle, stem: &str, out_dir: &Path) -> Result<RunFiles> {
    ensure_dir(out_dir)?;
    let files = RunFiles {
        run_csv: out_dir.join(format!("{stem}.csv")),
        stats_csv: out_dir.join(format!("{stem}_stats.csv")),
        alarms_json: out_dir.join(format!("{stem}_alarms.json")),
    };
    write_run(&outcome.run, &files.run_csv)?;
    write_stats_csv(&files.stats_csv, &outcome.controller.points, &outcome.process.points)?;
    write_json(&files.alarms_json, &outcome.alarm_log(&bundle.limits))?;
    Ok(files)
}

/// Simulates and monitors one scenario run and writes its files.
pub fn cmd_run_scenario(
    bundle: &MonitorBundle,
    config: &ExperimentConfig,
    scenario: &Scenario,
    seed: u64,
    out_dir: &Path,
) -> Result<(RunFiles, ScenarioOutcome)> {
    let outcome = run_scenario(bundle, config, scenario, seed)?;
    let stem = format!("{}_seed{seed}", scenario.label());
    let files = write_outcome(&outcome, bundle, &stem, out_dir)?;
    Ok((files, outcome))
}

#[derive(Debug, Clone, Default)]
pub struct DiagnoseOutput {
    pub reports: Vec<DiagnosisReport>,
    pub files: Vec<PathBuf>,
    /// Explanation when nothing was diagnosed.
    pub message: Option<String>,
}

/// Diagnoses every alarm in `alarms_path` against the run in `run_path`.
pub fn cmd_diagnose(
    bundle: &MonitorBundle,
    config: &ExperimentConfig,
    run_path: &Path,
    alarms_path: &Path,
    out_dir: &Path,
) -> Result<DiagnoseOutput> {
    let log: AlarmLog = read_json(alarms_path)?;
    if log.alarms.is_empty() {
        return Ok(DiagnoseOutput {
            message: Some(format!("no alarms in {}, nothing to diagnose", alarms_path.display())),
            ..Default::default()
        });
    }
    let run = read_run(run_path)?;
    let diag = config.diagnosis(bundle.omeda_noise_floor);
    let mut alarms = log.alarms.clone();
    alarms.sort_by(|a, b| a.alarm_t.total_cmp(&b.alarm_t).then(a.view.cmp(&b.view)));
    let reports = alarms
        .iter()
        .map(|a| {
            if a.first_exceedance_index >= run.len() {
                return Err(Error::Input(format!("alarm at index {} is outside the run", a.first_exceedance_index)));
            }
            diagnose_event(&bundle.model, &run, a, &diag)
        })
        .collect::<Result<Vec<_>>>()?;

    ensure_dir(out_dir)?;
    let stem = run_path.file_stem().map_or("run".into(), |s| s.to_string_lossy().into_owned());
    let mut files = Vec::new();
    let json = out_dir.join(format!("{stem}_diagnosis.json"));
    write_json(&json, &reports)?;
    files.push(json);
    for (i, r) in reports.iter().enumerate() {
        for (view, v) in [(View::Controller, &r.controller_omeda), (View::Process, &r.process_omeda)] {
            let path = out_dir.join(format!("{stem}_event{i}_omeda_{}.svg", view.label()));
            let title = format!("{stem} event {i}: oMEDA, {} view ({:?})", view.label(), r.classification);
            write_text(&path, &omeda_chart(&title, v))?;
            files.push(path);
        }
    }
    Ok(DiagnoseOutput {
        reports,
        files,
        message: None,
    })
}

#[derive(Debug, Clone)]
pub struct ExperimentFiles {
    pub report_json: PathBuf,
    pub report_csv: PathBuf,
    pub model: PathBuf,
}

fn rows_csv(rows: &[ArlRow]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["seed", "statistic", "view", "detected", "arl_s"])?;
    for r in rows {
        w.write_record([
            r.seed.to_string(),
            format!("{:?}", r.statistic),
            r.view.label().to_string(),
            r.detected.to_string(),
            r.arl_s.map_or(String::new(), |a| a.to_string()),
        ])?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Csv(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Csv(e.to_string()))
}

/// Runs the configured experiment. Uses the model at `model_path` when it
/// exists, otherwise calibrates one and stores it in `out_dir`.
pub fn cmd_experiment(
    config: &ExperimentConfig,
    model_path: Option<&Path>,
    out_dir: &Path,
) -> Result<(ExperimentFiles, ExperimentReport)> {
    config.validate()?;
    ensure_dir(out_dir)?;
    let (model, bundle) = match model_path.filter(|p| p.exists()) {
        Some(p) => (p.to_path_buf(), MonitorBundle::load(p)?),
        None => {
            let bundle = calibrate_bundle(config)?;
            let p = model_path.map_or_else(|| out_dir.join(MODEL_FILE), Path::to_path_buf);
            bundle.save(&p)?;
            (p, bundle)
        }
    };
    let (mut report, outcomes) = run_experiment(&bundle, config)?;

    let label = config.scenario.label();
    let charts_dir = out_dir.join("charts");
    ensure_dir(&charts_dir)?;
    for (seed, outcome) in config.seeds.iter().zip(&outcomes) {
        let Ok(o) = outcome else { continue };
        for view in View::BOTH {
            for stat in [Statistic::D, Statistic::Q] {
                let path = charts_dir.join(format!("{label}_seed{seed}_{}_{stat:?}.svg", view.label()));
                write_text(&path, &control_chart_svg(o, view, stat, &bundle, config.log_scale_charts))?;
                report.charts.push(path);
            }
            if let Some(d) = &o.diagnosis {
                let v = match view {
                    View::Controller => &d.controller_omeda,
                    View::Process => &d.process_omeda,
                };
                let path = charts_dir.join(format!("{label}_seed{seed}_omeda_{}.svg", view.label()));
                let title = format!("{label} seed {seed}: oMEDA, {} view", view.label());
                write_text(&path, &omeda_chart(&title, v))?;
                report.charts.push(path);
            }
        }
    }
    if let Some(mean) = &report.mean_omeda {
        for (view, v) in [(View::Controller, &mean.controller), (View::Process, &mean.process)] {
            let path = charts_dir.join(format!("{label}_omeda_mean_{}.svg", view.label()));
            let title = format!("{label}: mean oMEDA over {} runs, {} view", mean.runs, view.label());
            write_text(&path, &omeda_chart(&title, v))?;
            report.charts.push(path);
        }
    }

    let files = ExperimentFiles {
        report_json: out_dir.join(format!("{label}_experiment.json")),
        report_csv: out_dir.join(format!("{label}_experiment.csv")),
        model,
    };
    write_json(&files.report_json, &report)?;
    write_text(&files.report_csv, &rows_csv(&report.rows)?)?;
    Ok((files, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scenario_names_parse() {
        assert_eq!("d1".parse::<Scenario>().unwrap(), Scenario::D1);
        assert_eq!("A3_DoSActuator".parse::<Scenario>().unwrap(), Scenario::A3);
        assert_eq!(
            "x/my.json".parse::<Scenario>().unwrap(),
            Scenario::Custom(PathBuf::from("x/my.json"))
        );
        assert!(matches!("Z9".parse::<Scenario>(), Err(Error::Config(_))));
    }

    #[test]
    fn config_rules() {
        let mut c = ExperimentConfig::default();
        c.validate().unwrap();
        c.seeds.clear();
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = ExperimentConfig {
            calibration_runs: 1,
            ..Default::default()
        };
        assert!(matches!(c.validate(), Err(Error::Config(_))));
        let c = ExperimentConfig {
            monitored_variables: Some(vec!["level".into(), "nope".into()]),
            ..Default::default()
        };
        assert!(c.validate().is_err());
    }

    #[test]
    fn config_json_defaults() {
        let c: ExperimentConfig = serde_json::from_str(r#"{"scenario": "A1", "seeds": [3]}"#).unwrap();
        assert_eq!(c.scenario, Scenario::A1);
        assert_eq!(c.calibration_runs, 30);
        assert_eq!(c.duration_h, 24.0);
    }

    #[test]
    fn calibration_seeds_are_distinct_and_reproducible() {
        let a = calibration_seeds(7, 30);
        assert_eq!(a, calibration_seeds(7, 30));
        let mut b = a.clone();
        b.sort();
        b.dedup();
        assert_eq!(b.len(), 30);
    }

    #[test]
    fn built_in_scenarios_start_at_onset() {
        for s in Scenario::BUILT_IN {
            let cfg = s.config(24.0, 10.0, 1).unwrap();
            let starts: Vec<f64> = cfg
                .disturbances
                .iter()
                .map(|d| d.start_h)
                .chain(cfg.attacks.iter().map(|a| a.start_h))
                .collect();
            assert_eq!(starts, vec![10.0]);
        }
    }
}
