use std::fs;
use std::path::Path;
use std::process::Command;

use subnav_cli::config::{parse_config, Overrides};
use subnav_cli::logs::{RunMeta, ESTIMATE_HEADER, SENSORS_HEADER, TRUTH_HEADER};
use subnav_cli::plotdata::write_plotdata;
use subnav_cli::report::{run_dirs, REPORT_FILE, SUMMARY_FILE};
use subnav_cli::CliError;

fn subnav(args: &[&str], cwd: &Path) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_subnav")).args(args).current_dir(cwd).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) {
    fs::write(dir.join(name), text).unwrap();
}

fn first_line(path: &Path) -> String {
    fs::read_to_string(path).unwrap().lines().next().unwrap().to_string()
}

/// Short runs keep the suite fast; they end in a timeout, which still
/// leaves complete artifacts.
const SHORT: &str = "courses = [\"BE1\", \"BE3\"]\nbackend = \"both\"\nseeds = [0, 1]\noutput_dir = \"out\"\n[sim]\ntimeout = 20.0\n";

#[test]
fn minimal_config_materializes_defaults() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "min.toml", "course = \"BE1\"\n");
    let out = subnav(&["run", "min.toml", "--dry-run"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for needle in [
        "imu_accel_var = 0.004",
        "gps_var = 0.25",
        "dvl_var = 0.0001",
        "look_ahead = 1.0",
        "cruise_speed = 0.3",
        "vicinity_radius = 0.5",
        "q_diag = [0.0001, 0.0001, 0.0001, 0.0001]",
        "r_diag = [0.25, 0.25, 0.01, 0.0001]",
        "mass = 1863.0",
        "xdu = 779.79",
        "dt_physics = 0.01",
        "# BE1_dynamic_s0",
    ] {
        assert!(text.contains(needle), "missing `{needle}` in\n{text}");
    }
    assert!(!tmp.path().join("runs").exists(), "dry run wrote output");
}

#[test]
fn negative_variance_names_the_field() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "course = \"BE1\"\n[sensors]\ndepth_var = -0.5\n");
    let out = subnav(&["run", "bad.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("sensors.depth_var"), "{err}");
}

#[test]
fn syntax_error_reports_line() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "bad.toml", "course = \"BE1\"\n[controller]\ngain = \n");
    let out = subnav(&["run", "bad.toml"], tmp.path());
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8(out.stderr).unwrap().contains("line 3"));
}

#[test]
fn grid_run_report_and_echo() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "exp.toml", &format!("{SHORT}[vehicle.added_mass]\nxdu = 800.0\n"));
    let out = subnav(&["run", "exp.toml", "--jobs", "2"], tmp.path());
    assert_eq!(out.status.code(), Some(2), "timeouts are runtime failures");
    let root = tmp.path().join("out");
    let dirs = run_dirs(&root).unwrap();
    assert_eq!(dirs.len(), 8);
    let meta = RunMeta::read(&root.join("BE3_kinematic_s1")).unwrap();
    assert_eq!(meta.seed, 1);
    assert_eq!(meta.config.vehicle.added_mass.xdu, 800.0);
    assert_eq!(meta.config.courses, ["BE3"]);
    assert!(meta.message.contains("timeout"), "{}", meta.message);

    let dir = root.join("BE1_dynamic_s0");
    assert_eq!(first_line(&dir.join("truth.csv")), TRUTH_HEADER.join(","));
    assert_eq!(first_line(&dir.join("sensors.csv")), SENSORS_HEADER.join(","));
    assert_eq!(first_line(&dir.join("est_dynamic.csv")), ESTIMATE_HEADER.join(","));
    assert!(!dir.join("est_kinematic.csv").exists());

    let report = fs::read_to_string(root.join(REPORT_FILE)).unwrap();
    assert_eq!(report.lines().count(), 9);
    assert_eq!(report.lines().next().unwrap(), "course,backend,seed,status,total,x_kalman,y_kalman,total_est");
    assert!(report.lines().nth(1).unwrap().starts_with("BE1,dynamic,0,failed,"));
    assert_eq!(fs::read_to_string(root.join(SUMMARY_FILE)).unwrap().lines().count(), 5);

    let again = subnav(&["report", "out"], tmp.path());
    assert!(again.status.success());
    assert_eq!(fs::read_to_string(root.join(REPORT_FILE)).unwrap(), report);
}

#[test]
fn reruns_are_byte_identical_regardless_of_jobs() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "exp.toml", SHORT);
    subnav(&["run", "exp.toml", "--jobs", "1", "--out", "a"], tmp.path());
    subnav(&["run", "exp.toml", "--jobs", "3", "--out", "b"], tmp.path());
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    assert_eq!(fs::read(a.join(REPORT_FILE)).unwrap(), fs::read(b.join(REPORT_FILE)).unwrap());
    for d in run_dirs(&a).unwrap() {
        let name = d.file_name().unwrap();
        for f in ["truth.csv", "sensors.csv", "commands.csv"] {
            assert_eq!(fs::read(d.join(f)).unwrap(), fs::read(b.join(name).join(f)).unwrap());
        }
        let (ma, mb) = (RunMeta::read(&d).unwrap(), RunMeta::read(&b.join(name)).unwrap());
        assert_eq!(ma.content_sha256, mb.content_sha256);
    }
}

#[test]
fn seed_and_backend_flags_override_config() {
    let tmp = tempfile::tempdir().unwrap();
    write(tmp.path(), "exp.toml", SHORT);
    let ov = Overrides { seed: Some(7), backends: Some(vec!["kinematic".into()]), output_dir: None };
    let spec = parse_config(&tmp.path().join("exp.toml"), &ov).unwrap();
    let ids: Vec<String> = spec.plans().into_iter().map(|p| p.id).collect();
    assert_eq!(ids, ["BE1_kinematic_s7", "BE3_kinematic_s7"]);
    assert_eq!(spec.output_dir, tmp.path().join("out"));
}

#[test]
fn plotdata_schema_and_incomplete_logs() {
    let tmp = tempfile::tempdir().unwrap();
    write(
        tmp.path(),
        "exp.toml",
        "course = \"BE3\"\nbackend = \"both\"\noutput_dir = \"out\"\n[sim]\npairing = \"shared\"\ntimeout = 15.0\n",
    );
    subnav(&["run", "exp.toml"], tmp.path());
    let run = tmp.path().join("out").join("BE3_both_s0");
    let out = subnav(&["plotdata", run.to_str().unwrap()], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let overlay = fs::read_to_string(run.join("traj_overlay.csv")).unwrap();
    let mut lines = overlay.lines();
    assert_eq!(lines.next().unwrap(), "t,ref_x,ref_y,truth_x,truth_y,dyn_x,dyn_y,kin_x,kin_y");
    let row: Vec<f64> = lines.nth(5).unwrap().split(',').map(|c| c.parse().unwrap()).collect();
    assert_eq!(row.len(), 9);
    assert!(row.iter().all(|v| v.is_finite()));
    let accel = fs::read_to_string(run.join("accel_compare.csv")).unwrap();
    assert_eq!(accel.lines().next().unwrap(), "t,model_du,imu_ax");
    assert_eq!(accel.lines().count(), overlay.lines().count());

    for f in ["est_dynamic.csv", "est_kinematic.csv"] {
        let path = run.join(f);
        fs::write(&path, format!("{}\n", ESTIMATE_HEADER.join(","))).unwrap();
    }
    let err = write_plotdata(&run, &run).unwrap_err();
    assert!(matches!(err, CliError::IncompleteLog { .. }), "{err}");
    let out = subnav(&["plotdata", run.to_str().unwrap()], tmp.path());
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn courses_list_names_all_builtins() {
    let tmp = tempfile::tempdir().unwrap();
    let out = subnav(&["courses", "list"], tmp.path());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(out.status.success());
    for (name, n) in [("BE1", "21"), ("BE2", "56"), ("BE3", "31")] {
        assert!(text.lines().any(|l| l.starts_with(name) && l.contains(&format!("{n} waypoints"))), "{text}");
    }
}

#[test]
fn course_files_resolve_relative_to_config() {
    let tmp = tempfile::tempdir().unwrap();
    fs::create_dir(tmp.path().join("cfg")).unwrap();
    write(
        &tmp.path().join("cfg"),
        "line.csv",
        "# name: LINE\nx,y,z\n0,0,20\n5,0,20\n10,0,20\n",
    );
    write(&tmp.path().join("cfg"), "exp.toml", "course = \"line.csv\"\noutput_dir = \"out\"\n");
    let out = subnav(&["run", "cfg/exp.toml"], tmp.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let meta = RunMeta::read(&tmp.path().join("cfg/out/LINE_dynamic_s0")).unwrap();
    assert_eq!(meta.course, "LINE");
}
