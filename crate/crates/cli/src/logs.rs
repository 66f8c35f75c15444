//! Run directory layout: CSV logs plus a `run.meta` manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use subnav_core::estimation::Backend;
use subnav_core::evaluation::Course;
use subnav_core::simcore::RunLog;

use crate::config::ExperimentConfig;
use crate::error::{CliError, Result};

pub const META_FILE: &str = "run.meta";
pub const TRUTH_FILE: &str = "truth.csv";
pub const SENSORS_FILE: &str = "sensors.csv";
pub const COMMANDS_FILE: &str = "commands.csv";
pub const COURSE_FILE: &str = "course.csv";

pub const TRUTH_HEADER: [&str; 19] = [
    "t", "x", "y", "z", "phi", "theta", "psi", "u", "v", "w", "p", "q", "r", "du", "dv", "dw", "dp", "dq", "dr",
];
pub const SENSORS_HEADER: [&str; 14] = [
    "t", "acc_x", "acc_y", "acc_z", "gyro_p", "gyro_q", "gyro_r", "heading", "dvl_u", "dvl_v", "dvl_w", "gps_x",
    "gps_y", "depth",
];
pub const ESTIMATE_HEADER: [&str; 21] = [
    "t", "pred_x", "pred_y", "pred_z", "pred_psi", "x", "y", "z", "psi", "p_xx", "p_yy", "p_zz", "p_psipsi",
    "innov_x", "innov_y", "innov_z", "innov_psi", "acc_u", "acc_v", "acc_w", "acc_r",
];

pub fn estimate_file(backend: Backend) -> String {
    format!("est_{}.csv", backend.name())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum RunStatus {
    Completed,
    Failed,
}

impl RunStatus {
    pub fn name(self) -> &'static str {
        match self {
            RunStatus::Completed => "completed",
            RunStatus::Failed => "failed",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunMeta {
    pub run_id: String,
    pub course: String,
    pub backends: Vec<String>,
    pub seed: u64,
    pub status: RunStatus,
    pub message: String,
    /// largest ground-truth |roll| and |pitch| over every physics step, rad
    pub max_abs_roll: f64,
    pub max_abs_pitch: f64,
    /// SHA-256 over every CSV in the directory, in file-name order
    pub content_sha256: String,
    pub config: ExperimentConfig,
}

impl RunMeta {
    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(META_FILE);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        toml::from_str(&text).map_err(|e| CliError::Parse {
            path: path.display().to_string(),
            message: e.to_string(),
        })
    }
}

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn table<I, R>(header: &[&str], rows: I) -> Vec<u8>
where
    I: IntoIterator<Item = R>,
    R: IntoIterator<Item = String>,
{
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(r).expect("in-memory write");
    }
    w.into_inner().expect("in-memory flush")
}

/// Renders every CSV of a run log, keyed by file name.
pub fn render_log(log: &RunLog, course: &Course) -> BTreeMap<String, Vec<u8>> {
    let mut files = BTreeMap::new();
    files.insert(
        TRUTH_FILE.to_string(),
        table(
            &TRUTH_HEADER,
            log.truth.iter().map(|r| {
                let (p, v, a) = (r.pose, r.vel, r.acc);
                [
                    r.t, p.x, p.y, p.z, p.phi, p.theta, p.psi, v.u, v.v, v.w, v.p, v.q, v.r, a.du, a.dv, a.dw, a.dp,
                    a.dq, a.dr,
                ]
                .map(fmt)
            }),
        ),
    );
    files.insert(
        SENSORS_FILE.to_string(),
        table(
            &SENSORS_HEADER,
            log.sensors.iter().map(|s| {
                let mut row: Vec<String> = [s.t]
                    .into_iter()
                    .chain(s.imu_accel)
                    .chain(s.imu_gyro)
                    .chain([s.heading])
                    .chain(s.dvl)
                    .map(fmt)
                    .collect();
                match s.gps {
                    Some([x, y]) => row.extend([fmt(x), fmt(y)]),
                    None => row.extend([String::new(), String::new()]),
                }
                row.push(s.depth.map(fmt).unwrap_or_default());
                row
            }),
        ),
    );
    for (backend, records) in &log.estimates {
        files.insert(
            estimate_file(*backend),
            table(
                &ESTIMATE_HEADER,
                records.iter().map(|e| {
                    [e.t]
                        .into_iter()
                        .chain(e.predicted.iter().copied())
                        .chain(e.posterior.iter().copied())
                        .chain(e.p_diag.iter().copied())
                        .chain(e.innovation.iter().copied())
                        .chain(e.acc.iter().copied())
                        .map(fmt)
                        .collect::<Vec<_>>()
                }),
            ),
        );
    }
    let mut header: Vec<String> = ["t", "waypoint", "delta", "surge_cmd", "yaw_rate_cmd", "tau_x", "tau_y", "tau_z", "tau_psi"]
        .map(String::from)
        .to_vec();
    let n_cmd = log.commands.first().map_or(8, |c| c.commands.len());
    header.extend((0..n_cmd).map(|i| format!("cmd_{i}")));
    let header_refs: Vec<&str> = header.iter().map(String::as_str).collect();
    files.insert(
        COMMANDS_FILE.to_string(),
        table(
            &header_refs,
            log.commands.iter().map(|c| {
                let mut row = vec![fmt(c.t), c.waypoint.to_string()];
                row.extend(
                    [c.delta, c.surge_cmd, c.yaw_rate_cmd, c.tau.tx, c.tau.ty, c.tau.tz, c.tau.tpsi]
                        .into_iter()
                        .chain(c.commands)
                        .map(fmt),
                );
                row
            }),
        ),
    );
    files.insert(COURSE_FILE.to_string(), course.to_csv_string().into_bytes());
    files
}

pub fn content_hash(files: &BTreeMap<String, Vec<u8>>) -> String {
    let mut h = Sha256::new();
    for (name, bytes) in files {
        h.update(name.as_bytes());
        h.update([0u8]);
        h.update((bytes.len() as u64).to_le_bytes());
        h.update(bytes);
    }
    hex::encode(h.finalize())
}

/// Writes all CSVs and the manifest into `dir`, creating it if needed.
pub fn write_run_dir(
    dir: &Path,
    log: &RunLog,
    course: &Course,
    meta_base: RunMetaBase,
) -> Result<RunMeta> {
    fs::create_dir_all(dir).map_err(|e| CliError::io(dir, e))?;
    let files = render_log(log, course);
    for (name, bytes) in &files {
        let path = dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
    }
    let meta = RunMeta {
        run_id: meta_base.run_id,
        course: course.name.clone(),
        backends: meta_base.backends.iter().map(|b| b.name().to_string()).collect(),
        seed: meta_base.seed,
        status: meta_base.status,
        message: meta_base.message,
        max_abs_roll: log.max_abs_roll,
        max_abs_pitch: log.max_abs_pitch,
        content_sha256: content_hash(&files),
        config: meta_base.config,
    };
    let path = dir.join(META_FILE);
    let text = toml::to_string(&meta).expect("manifest serializes to TOML");
    fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    Ok(meta)
}

/// Manifest fields known before the CSVs are hashed.
#[derive(Debug, Clone)]
pub struct RunMetaBase {
    pub run_id: String,
    pub backends: Vec<Backend>,
    pub seed: u64,
    pub status: RunStatus,
    pub message: String,
    pub config: ExperimentConfig,
}

/// A CSV file read back with named columns.
#[derive(Debug, Clone)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn read(path: &Path) -> Result<Self> {
        let mut r = csv::Reader::from_path(path).map_err(|e| CliError::csv(path, e))?;
        let header = r
            .headers()
            .map_err(|e| CliError::csv(path, e))?
            .iter()
            .map(String::from)
            .collect();
        let mut rows = Vec::new();
        for rec in r.records() {
            let rec = rec.map_err(|e| CliError::csv(path, e))?;
            rows.push(rec.iter().map(String::from).collect());
        }
        Ok(Self { header, rows })
    }

    /// Parsed numeric column; empty cells become NaN.
    pub fn column(&self, name: &str, path: &Path) -> Result<Vec<f64>> {
        let i = self
            .header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CliError::csv(path, format!("missing column `{name}`")))?;
        self.rows
            .iter()
            .enumerate()
            .map(|(n, row)| {
                let cell = row.get(i).map(String::as_str).unwrap_or("");
                if cell.is_empty() {
                    Ok(f64::NAN)
                } else {
                    cell.parse()
                        .map_err(|_| CliError::csv(path, format!("row {}: bad number `{cell}` in `{name}`", n + 2)))
                }
            })
            .collect()
    }
}

/// Key used to align rows from different files by time stamp.
pub fn time_key(t: f64) -> i64 {
    (t * 1e6).round() as i64
}
