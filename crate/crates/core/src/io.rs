//! File formats: wide run CSV with a JSON sidecar, statistic series CSV,
//! and plain JSON documents.
//!
//! Floats are written with Rust's shortest round-trip formatting, so every
//! emitted CSV parses back to the identical values.

use std::fs::{self, File};
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::data::DataMatrix;
use crate::error::{Error, Result};
use crate::mspc::limits::ControlLimits;
use crate::mspc::monitor::{AlarmEvent, StatPoint};
use crate::sim::{RunMeta, RunRecord};

pub const CONTROLLER_SUFFIX: &str = "_c";
pub const PROCESS_SUFFIX: &str = "_p";

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

/// `runs/d1.csv` → `runs/d1.meta.json`.
pub fn meta_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("meta.json")
}

pub fn run_header(names: &[String]) -> Vec<String> {
    std::iter::once("time_s".to_string())
        .chain(names.iter().map(|n| format!("{n}{CONTROLLER_SUFFIX}")))
        .chain(names.iter().map(|n| format!("{n}{PROCESS_SUFFIX}")))
        .collect()
}

pub fn write_run_csv_to<W: Write>(run: &RunRecord, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(run_header(&run.variable_names))?;
    let (c, p) = (run.controller_view.values(), run.process_view.values());
    let m = run.variable_names.len();
    let mut row = Vec::with_capacity(1 + 2 * m);
    for (i, t) in run.times.iter().enumerate() {
        row.clear();
        row.push(t.to_string());
        row.extend((0..m).map(|j| c[(i, j)].to_string()));
        row.extend((0..m).map(|j| p[(i, j)].to_string()));
        w.write_record(&row)?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

/// Writes `<path>` and its `<stem>.meta.json` sidecar.
pub fn write_run(run: &RunRecord, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_run_csv_to(run, BufWriter::new(file))?;
    write_json(&meta_path(path), &run.meta)
}

/// The three blocks of a run CSV.
#[derive(Debug, Clone, PartialEq)]
pub struct RunTable {
    pub times: Vec<f64>,
    pub controller_view: DataMatrix,
    pub process_view: DataMatrix,
}

fn parse_f64(field: &str, line: usize) -> Result<f64> {
    field
        .trim()
        .parse::<f64>()
        .map_err(|_| Error::Csv(format!("line {line}: \"{field}\" is not a number")))
}

pub fn read_run_csv_from<R: Read>(input: R) -> Result<RunTable> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header.first().map(String::as_str) != Some("time_s") || header.len() < 3 || header.len().is_multiple_of(2) {
        return Err(Error::Csv("header must be time_s followed by paired _c/_p columns".into()));
    }
    let m = (header.len() - 1) / 2;
    let mut names = Vec::with_capacity(m);
    for j in 0..m {
        let (c, p) = (&header[1 + j], &header[1 + m + j]);
        let base = c
            .strip_suffix(CONTROLLER_SUFFIX)
            .ok_or_else(|| Error::Csv(format!("column \"{c}\" lacks the {CONTROLLER_SUFFIX} suffix")))?;
        if p.strip_suffix(PROCESS_SUFFIX) != Some(base) {
            return Err(Error::Csv(format!("column \"{p}\" does not pair with \"{c}\"")));
        }
        names.push(base.to_string());
    }
    let (mut times, mut ctrl, mut proc) = (Vec::new(), Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != header.len() {
            return Err(Error::Csv(format!("line {line}: {} fields, expected {}", rec.len(), header.len())));
        }
        times.push(parse_f64(&rec[0], line)?);
        for j in 0..m {
            ctrl.push(parse_f64(&rec[1 + j], line)?);
        }
        for j in 0..m {
            proc.push(parse_f64(&rec[1 + m + j], line)?);
        }
    }
    Ok(RunTable {
        times,
        controller_view: DataMatrix::from_row_major(&ctrl, m, names.clone())?,
        process_view: DataMatrix::from_row_major(&proc, m, names)?,
    })
}

/// Reads a run CSV and its sidecar back into a `RunRecord`.
pub fn read_run(path: &Path) -> Result<RunRecord> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let table = read_run_csv_from(std::io::BufReader::new(file))?;
    let meta: RunMeta = read_json(&meta_path(path))?;
    Ok(RunRecord {
        times: table.times,
        variable_names: table.controller_view.names().to_vec(),
        controller_view: table.controller_view,
        process_view: table.process_view,
        meta,
    })
}

pub const STATS_HEADER: [&str; 5] = ["time_s", "d_controller", "q_controller", "d_process", "q_process"];

pub fn write_stats_csv_to<W: Write>(controller: &[StatPoint], process: &[StatPoint], out: W) -> Result<()> {
    if controller.len() != process.len() {
        return Err(Error::Input("views have different statistic series lengths".into()));
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(STATS_HEADER)?;
    for (c, p) in controller.iter().zip(process) {
        w.write_record([c.t.to_string(), c.d.to_string(), c.q.to_string(), p.d.to_string(), p.q.to_string()])?;
    }
    w.flush().map_err(|e| Error::Csv(e.to_string()))
}

pub fn write_stats_csv(path: &Path, controller: &[StatPoint], process: &[StatPoint]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_stats_csv_to(controller, process, BufWriter::new(file))
}

/// Returns the controller and process series.
pub fn read_stats_csv_from<R: Read>(input: R) -> Result<(Vec<StatPoint>, Vec<StatPoint>)> {
    let mut r = csv::Reader::from_reader(input);
    if r.headers()?.iter().ne(STATS_HEADER) {
        return Err(Error::Csv(format!("expected header {}", STATS_HEADER.join(","))));
    }
    let (mut c, mut p) = (Vec::new(), Vec::new());
    for (i, rec) in r.records().enumerate() {
        let rec = rec?;
        let line = i + 2;
        if rec.len() != STATS_HEADER.len() {
            return Err(Error::Csv(format!("line {line}: wrong field count")));
        }
        let f: Vec<f64> = rec.iter().map(|s| parse_f64(s, line)).collect::<Result<_>>()?;
        c.push(StatPoint { t: f[0], d: f[1], q: f[2] });
        p.push(StatPoint { t: f[0], d: f[3], q: f[4] });
    }
    Ok((c, p))
}

/// Alarms of one run, with what is needed to interpret them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlarmLog {
    pub scenario: String,
    pub seed: u64,
    pub onset_h: f64,
    pub limits: ControlLimits,
    pub alarms: Vec<AlarmEvent>,
}
