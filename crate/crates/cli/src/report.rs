//! Metrics recomputed from run directories on disk.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use subnav_core::estimation::Backend;
use subnav_core::evaluation::{error_report, total_error, Course, ErrorReport};

use crate::error::{CliError, Result};
use crate::logs::{estimate_file, time_key, RunMeta, RunStatus, Table, COURSE_FILE, META_FILE, TRUTH_FILE};

pub const REPORT_FILE: &str = "report.csv";
pub const SUMMARY_FILE: &str = "summary.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ReportRow {
    pub course: String,
    pub backend: Backend,
    pub seed: u64,
    pub status: RunStatus,
    /// NaN when the log is too short to score
    pub metrics: ErrorReport,
}

fn nan_report() -> ErrorReport {
    ErrorReport {
        total: f64::NAN,
        x_kalman: f64::NAN,
        y_kalman: f64::NAN,
        total_est: f64::NAN,
    }
}

/// Run directories directly under `root`, in name order.
pub fn run_dirs(root: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(root).map_err(|e| CliError::io(root, e))?;
    let mut dirs = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| CliError::io(root, e))?;
        let path = entry.path();
        if path.join(META_FILE).is_file() {
            dirs.push(path);
        }
    }
    dirs.sort();
    Ok(dirs)
}

pub fn load_course(dir: &Path) -> Result<Course> {
    let path = dir.join(COURSE_FILE);
    let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
    Ok(Course::from_csv_str(&text)?)
}

/// Per-backend metrics of one run directory.
pub fn score_run(dir: &Path) -> Result<Vec<ReportRow>> {
    let meta = RunMeta::read(dir)?;
    let course = load_course(dir)?;
    let truth_path = dir.join(TRUTH_FILE);
    let truth = Table::read(&truth_path)?;
    let tt = truth.column("t", &truth_path)?;
    let tx = truth.column("x", &truth_path)?;
    let ty = truth.column("y", &truth_path)?;
    let truth_xy: Vec<(f64, f64)> = tx.iter().copied().zip(ty.iter().copied()).collect();
    let by_time: BTreeMap<i64, usize> = tt.iter().enumerate().map(|(i, t)| (time_key(*t), i)).collect();

    let mut rows = Vec::new();
    for name in &meta.backends {
        let backend = Backend::parse(name)
            .ok_or_else(|| CliError::csv(dir.join(META_FILE), format!("unknown backend `{name}`")))?;
        let path = dir.join(estimate_file(backend));
        let metrics = if path.is_file() {
            let est = Table::read(&path)?;
            let et = est.column("t", &path)?;
            let ex = est.column("x", &path)?;
            let ey = est.column("y", &path)?;
            let mut t_xy = Vec::with_capacity(et.len());
            let mut e_xy = Vec::with_capacity(et.len());
            for i in 0..et.len() {
                if let Some(&j) = by_time.get(&time_key(et[i])) {
                    t_xy.push(truth_xy[j]);
                    e_xy.push((ex[i], ey[i]));
                }
            }
            match error_report(&t_xy, &e_xy, &course.reference) {
                Ok(mut r) => {
                    r.total = total_error(&truth_xy, &course.reference)?;
                    r
                }
                Err(_) => nan_report(),
            }
        } else {
            nan_report()
        };
        rows.push(ReportRow {
            course: meta.course.clone(),
            backend,
            seed: meta.seed,
            status: meta.status,
            metrics,
        });
    }
    Ok(rows)
}

/// Scores every run under `root`, sorted by course, backend and seed.
pub fn collect(root: &Path) -> Result<Vec<ReportRow>> {
    let mut rows = Vec::new();
    for dir in run_dirs(root)? {
        rows.extend(score_run(&dir)?);
    }
    rows.sort_by(|a, b| (&a.course, a.backend, a.seed).cmp(&(&b.course, b.backend, b.seed)));
    Ok(rows)
}

fn f6(v: f64) -> String {
    format!("{v:.6}")
}

pub fn render_report(rows: &[ReportRow]) -> String {
    let mut out = String::from("course,backend,seed,status,total,x_kalman,y_kalman,total_est\n");
    for r in rows {
        let m = &r.metrics;
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{}\n",
            r.course,
            r.backend,
            r.seed,
            r.status.name(),
            f6(m.total),
            f6(m.x_kalman),
            f6(m.y_kalman),
            f6(m.total_est)
        ));
    }
    out
}

fn mean_std(v: &[f64]) -> (f64, f64) {
    if v.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = v.len() as f64;
    let mean = v.iter().sum::<f64>() / n;
    let var = if v.len() > 1 {
        v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    (mean, var.sqrt())
}

/// Mean and sample standard deviation per (course, backend) over completed runs.
pub fn render_summary(rows: &[ReportRow]) -> String {
    let mut groups: BTreeMap<(String, Backend), Vec<&ReportRow>> = BTreeMap::new();
    for r in rows {
        groups.entry((r.course.clone(), r.backend)).or_default().push(r);
    }
    let mut out = String::from(
        "course,backend,runs,completed,total_mean,total_std,x_kalman_mean,x_kalman_std,y_kalman_mean,y_kalman_std,total_est_mean,total_est_std\n",
    );
    for ((course, backend), rs) in groups {
        let done: Vec<&ReportRow> = rs.iter().copied().filter(|r| r.status == RunStatus::Completed).collect();
        out.push_str(&format!("{course},{backend},{},{}", rs.len(), done.len()));
        let fields: [fn(&ErrorReport) -> f64; 4] = [|m| m.total, |m| m.x_kalman, |m| m.y_kalman, |m| m.total_est];
        for f in fields {
            let vals: Vec<f64> = done.iter().map(|r| f(&r.metrics)).collect();
            let (m, s) = mean_std(&vals);
            out.push_str(&format!(",{},{}", f6(m), f6(s)));
        }
        out.push('\n');
    }
    out
}

/// Writes `report.csv` and `summary.csv` into `root`; returns the rows.
pub fn write_reports(root: &Path) -> Result<Vec<ReportRow>> {
    let rows = collect(root)?;
    for (name, text) in [(REPORT_FILE, render_report(&rows)), (SUMMARY_FILE, render_summary(&rows))] {
        let path = root.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(rows)
}
