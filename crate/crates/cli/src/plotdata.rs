//! Plot-ready tables derived from one run directory.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use subnav_core::estimation::Backend;

use crate::error::{CliError, Result};
use crate::logs::{estimate_file, time_key, Table, SENSORS_FILE, TRUTH_FILE};
use crate::report::load_course;

pub const OVERLAY_FILE: &str = "traj_overlay.csv";
pub const ACCEL_FILE: &str = "accel_compare.csv";

/// Closest point on a polyline.
pub fn nearest_on_polyline(path: &[(f64, f64)], p: (f64, f64)) -> (f64, f64) {
    if path.len() == 1 {
        return path[0];
    }
    let mut best = (f64::INFINITY, path[0]);
    for w in path.windows(2) {
        let (a, b) = (w[0], w[1]);
        let (dx, dy) = (b.0 - a.0, b.1 - a.1);
        let len2 = dx * dx + dy * dy;
        let s = if len2 > 0.0 {
            (((p.0 - a.0) * dx + (p.1 - a.1) * dy) / len2).clamp(0.0, 1.0)
        } else {
            0.0
        };
        let q = (a.0 + s * dx, a.1 + s * dy);
        let d = (p.0 - q.0).powi(2) + (p.1 - q.1).powi(2);
        if d < best.0 {
            best = (d, q);
        }
    }
    best.1
}

struct Trace {
    t: Vec<f64>,
    x: Vec<f64>,
    y: Vec<f64>,
    acc_u: Vec<f64>,
}

fn read_trace(dir: &Path, backend: Backend) -> Result<Option<Trace>> {
    let path = dir.join(estimate_file(backend));
    if !path.is_file() {
        return Ok(None);
    }
    let t = Table::read(&path)?;
    Ok(Some(Trace {
        t: t.column("t", &path)?,
        x: t.column("x", &path)?,
        y: t.column("y", &path)?,
        acc_u: t.column("acc_u", &path)?,
    }))
}

fn index(t: &[f64]) -> BTreeMap<i64, usize> {
    t.iter().enumerate().map(|(i, t)| (time_key(*t), i)).collect()
}

fn cell(v: Option<f64>) -> String {
    match v {
        Some(v) if v.is_finite() => format!("{v}"),
        _ => "nan".to_string(),
    }
}

/// Writes `traj_overlay.csv` and `accel_compare.csv` for `run_dir` into `out_dir`.
pub fn write_plotdata(run_dir: &Path, out_dir: &Path) -> Result<()> {
    let dyn_trace = read_trace(run_dir, Backend::Dynamic)?;
    let kin_trace = read_trace(run_dir, Backend::Kinematic)?;
    let has_rows = |tr: &Option<Trace>| tr.as_ref().is_some_and(|t| !t.t.is_empty());
    if !has_rows(&dyn_trace) && !has_rows(&kin_trace) {
        return Err(CliError::IncompleteLog {
            path: run_dir.to_path_buf(),
            message: "no estimator trace with at least one row".to_string(),
        });
    }
    let course = load_course(run_dir)?;
    let truth_path = run_dir.join(TRUTH_FILE);
    let truth = Table::read(&truth_path)?;
    let tt = truth.column("t", &truth_path)?;
    let tx = truth.column("x", &truth_path)?;
    let ty = truth.column("y", &truth_path)?;
    if tt.is_empty() {
        return Err(CliError::IncompleteLog {
            path: run_dir.to_path_buf(),
            message: "truth log is empty".to_string(),
        });
    }
    let sensors_path = run_dir.join(SENSORS_FILE);
    let sensors = Table::read(&sensors_path)?;
    let st = sensors.column("t", &sensors_path)?;
    let sax = sensors.column("acc_x", &sensors_path)?;
    let s_idx = index(&st);

    let idx = |tr: &Option<Trace>| tr.as_ref().map(|t| index(&t.t));
    let (dyn_idx, kin_idx) = (idx(&dyn_trace), idx(&kin_trace));
    let lookup = |tr: &Option<Trace>, ix: &Option<BTreeMap<i64, usize>>, k: i64, f: fn(&Trace, usize) -> f64| {
        match (tr, ix) {
            (Some(tr), Some(ix)) => ix.get(&k).map(|&i| f(tr, i)),
            _ => None,
        }
    };

    let mut overlay = String::from("t,ref_x,ref_y,truth_x,truth_y,dyn_x,dyn_y,kin_x,kin_y\n");
    let mut accel = String::from("t,model_du,imu_ax\n");
    for i in 0..tt.len() {
        let k = time_key(tt[i]);
        let r = nearest_on_polyline(&course.reference, (tx[i], ty[i]));
        let row = [
            Some(tt[i]),
            Some(r.0),
            Some(r.1),
            Some(tx[i]),
            Some(ty[i]),
            lookup(&dyn_trace, &dyn_idx, k, |t, i| t.x[i]),
            lookup(&dyn_trace, &dyn_idx, k, |t, i| t.y[i]),
            lookup(&kin_trace, &kin_idx, k, |t, i| t.x[i]),
            lookup(&kin_trace, &kin_idx, k, |t, i| t.y[i]),
        ];
        overlay.push_str(&row.map(cell).join(","));
        overlay.push('\n');

        let arow = [
            Some(tt[i]),
            lookup(&dyn_trace, &dyn_idx, k, |t, i| t.acc_u[i]),
            s_idx.get(&k).map(|&j| sax[j]),
        ];
        accel.push_str(&arow.map(cell).join(","));
        accel.push('\n');
    }
    fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
    for (name, text) in [(OVERLAY_FILE, overlay), (ACCEL_FILE, accel)] {
        let path = out_dir.join(name);
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
    }
    Ok(())
}
