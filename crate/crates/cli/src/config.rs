//! Experiment configuration: TOML parsing, defaults, validation and echo.
//!
//! A config names the course × backend × seed grid at the top level and
//! carries one table per module. Every field is optional; the echoed form
//! written to `run.meta` has every default filled in.

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use subnav_core::control::ControllerConfig;
use subnav_core::dynamics::VehicleParams;
use subnav_core::estimation::{Backend, FilterConfig};
use subnav_core::evaluation::{Course, CourseId};
use subnav_core::sensors::SensorConfig;
use subnav_core::simcore::{ControlSource, InnerLoopConfig, Integrator, RunConfig, ThrusterConfig};
use subnav_core::thrusters::{HeaveFormula, ThrustLookup};

use crate::error::{CliError, Result};

/// How backends share trajectories.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Pairing {
    /// one run per backend, each steering from its own estimate
    #[default]
    Separate,
    /// one run per seed with every backend filtering the same trajectory
    Shared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimSection {
    pub dt_physics: f64,
    pub filter_rate: f64,
    /// simulated seconds
    pub timeout: f64,
    pub integrator: Integrator,
    pub control_source: ControlSource,
    pub pairing: Pairing,
}

impl Default for SimSection {
    fn default() -> Self {
        Self {
            dt_physics: 0.01,
            filter_rate: 10.0,
            timeout: 900.0,
            integrator: Integrator::SemiImplicitEuler,
            control_source: ControlSource::Estimate,
            pairing: Pairing::Separate,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ThrustersSection {
    pub heave_formula: HeaveFormula,
    /// per-thruster |thrust| limit, N
    #[serde(skip_serializing_if = "Option::is_none")]
    pub clamp: Option<f64>,
    /// CSV with `command,thrust_newtons`; identity mapping when absent
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lookup_table: Option<String>,
}

#[derive(Debug, Clone, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    course: Option<String>,
    courses: Option<Vec<String>>,
    backend: Option<String>,
    backends: Option<Vec<String>>,
    seed: Option<u64>,
    seeds: Option<Vec<u64>>,
    output_dir: Option<String>,
    #[serde(default)]
    sim: SimSection,
    #[serde(default)]
    vehicle: VehicleParams,
    #[serde(default)]
    sensors: SensorConfig,
    #[serde(default)]
    controller: ControllerConfig,
    #[serde(default)]
    inner_loop: InnerLoopConfig,
    #[serde(default)]
    filter: FilterConfig,
    #[serde(default)]
    thrusters: ThrustersSection,
}

/// Fully materialized configuration; serializes back to a config file that
/// parses to the same value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub courses: Vec<String>,
    pub backends: Vec<String>,
    pub seeds: Vec<u64>,
    pub output_dir: String,
    pub sim: SimSection,
    pub vehicle: VehicleParams,
    pub sensors: SensorConfig,
    pub controller: ControllerConfig,
    pub inner_loop: InnerLoopConfig,
    pub filter: FilterConfig,
    pub thrusters: ThrustersSection,
}

impl ExperimentConfig {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes to TOML")
    }
}

/// Overrides supplied on the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub backends: Option<Vec<String>>,
    pub output_dir: Option<PathBuf>,
}

fn parse_backends(names: &[String], errors: &mut Vec<String>) -> Vec<Backend> {
    let mut out = BTreeSet::new();
    for n in names {
        match n.as_str() {
            "both" => out.extend(Backend::ALL),
            other => match Backend::parse(other) {
                Some(b) => {
                    out.insert(b);
                }
                None => errors.push(format!(
                    "backends: unknown backend `{other}` (expected dynamic, kinematic or both)"
                )),
            },
        }
    }
    out.into_iter().collect()
}

/// A validated experiment: the resolved config plus loaded artifacts.
#[derive(Debug, Clone)]
pub struct ExperimentSpec {
    pub config: ExperimentConfig,
    pub courses: Vec<(String, Course)>,
    pub backends: Vec<Backend>,
    pub lookup: ThrustLookup,
    pub output_dir: PathBuf,
}

/// One cell of the course × backend × seed grid.
#[derive(Debug, Clone)]
pub struct RunPlan {
    pub id: String,
    pub course_spec: String,
    pub backends: Vec<Backend>,
    pub seed: u64,
    pub run: RunConfig,
}

impl RunPlan {
    pub fn backend_label(&self) -> String {
        backend_label(&self.backends)
    }
}

pub fn backend_label(backends: &[Backend]) -> String {
    match backends {
        [b] => b.name().to_string(),
        _ if backends.len() == Backend::ALL.len() => "both".to_string(),
        _ => backends.iter().map(|b| b.name()).collect::<Vec<_>>().join("+"),
    }
}

impl ExperimentSpec {
    /// Run grid in deterministic order: course, backend group, seed.
    pub fn plans(&self) -> Vec<RunPlan> {
        let groups: Vec<Vec<Backend>> = match self.config.sim.pairing {
            Pairing::Separate => self.backends.iter().map(|b| vec![*b]).collect(),
            Pairing::Shared => vec![self.backends.clone()],
        };
        let mut plans = Vec::new();
        for (spec, course) in &self.courses {
            for group in &groups {
                for &seed in &self.config.seeds {
                    let mut run = self.run_config(course.clone());
                    run.backends = group.clone();
                    run.seed = seed;
                    plans.push(RunPlan {
                        id: format!("{}_{}_s{}", course.name, backend_label(group), seed),
                        course_spec: spec.clone(),
                        backends: group.clone(),
                        seed,
                        run,
                    });
                }
            }
        }
        plans
    }

    fn run_config(&self, course: Course) -> RunConfig {
        let c = &self.config;
        RunConfig {
            dt_physics: c.sim.dt_physics,
            filter_rate: c.sim.filter_rate,
            timeout: c.sim.timeout,
            integrator: c.sim.integrator,
            course,
            params: c.vehicle,
            sensors: c.sensors,
            controller: c.controller,
            inner_loop: c.inner_loop,
            filter: c.filter,
            thrusters: ThrusterConfig {
                heave_formula: c.thrusters.heave_formula,
                clamp: c.thrusters.clamp,
            },
            lookup: self.lookup.clone(),
            control_source: c.sim.control_source,
            backends: self.backends.clone(),
            seed: 0,
        }
    }

    /// The config narrowed to a single grid cell, as echoed into `run.meta`.
    pub fn echo_for(&self, plan: &RunPlan) -> ExperimentConfig {
        let mut c = self.config.clone();
        c.courses = vec![plan.course_spec.clone()];
        c.backends = plan.backends.iter().map(|b| b.name().to_string()).collect();
        c.seeds = vec![plan.seed];
        c
    }
}

fn resolve_path(base: &Path, p: &str) -> PathBuf {
    let p = Path::new(p);
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

/// Reads and validates a config file. Relative paths inside it resolve
/// against the file's directory.
pub fn parse_config(path: &Path, overrides: &Overrides) -> Result<ExperimentSpec> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let base = path.parent().unwrap_or(Path::new("."));
    parse_config_str(&text, &path.display().to_string(), base, overrides)
}

pub fn parse_config_str(text: &str, origin: &str, base: &Path, overrides: &Overrides) -> Result<ExperimentSpec> {
    let raw: RawConfig = toml::from_str(text).map_err(|e| CliError::Parse {
        path: origin.to_string(),
        message: e.to_string(),
    })?;
    resolve(raw, base, overrides)
}

fn one_or_many<T: Clone>(
    one: Option<T>,
    many: Option<Vec<T>>,
    name: &str,
    plural: &str,
    errors: &mut Vec<String>,
) -> Vec<T> {
    match (one, many) {
        (Some(_), Some(_)) => {
            errors.push(format!("{name}/{plural}: give one or the other, not both"));
            Vec::new()
        }
        (Some(v), None) => vec![v],
        (None, Some(v)) => v,
        (None, None) => Vec::new(),
    }
}

fn resolve(raw: RawConfig, base: &Path, ov: &Overrides) -> Result<ExperimentSpec> {
    let mut errors = Vec::new();

    let courses = one_or_many(raw.course, raw.courses, "course", "courses", &mut errors);
    if courses.is_empty() && errors.is_empty() {
        errors.push("courses: at least one course is required".to_string());
    }
    let mut backend_names = match &ov.backends {
        Some(b) => b.clone(),
        None => one_or_many(raw.backend, raw.backends, "backend", "backends", &mut errors),
    };
    if backend_names.is_empty() {
        backend_names.push("dynamic".to_string());
    }
    let backends = parse_backends(&backend_names, &mut errors);
    let seeds = match ov.seed {
        Some(s) => vec![s],
        None => {
            let s = one_or_many(raw.seed, raw.seeds, "seed", "seeds", &mut errors);
            if s.is_empty() {
                vec![0]
            } else {
                s
            }
        }
    };
    let unique: BTreeSet<_> = seeds.iter().collect();
    if unique.len() != seeds.len() {
        errors.push("seeds: duplicate seeds give duplicate run ids".to_string());
    }

    let mut resolved = Vec::new();
    for spec in &courses {
        let loaded = match CourseId::parse(spec) {
            Ok(id) => Ok(subnav_core::evaluation::builtin_course(id)),
            Err(_) => Course::load(&resolve_path(base, spec)),
        };
        match loaded {
            Ok(c) => resolved.push((spec.clone(), c)),
            Err(e) => errors.push(format!("courses: `{spec}`: {e}")),
        }
    }
    let names: BTreeSet<_> = resolved.iter().map(|(_, c)| c.name.clone()).collect();
    if names.len() != resolved.len() {
        errors.push("courses: course names must be unique".to_string());
    }

    let lookup = match &raw.thrusters.lookup_table {
        None => ThrustLookup::identity(),
        Some(p) => {
            let full = resolve_path(base, p);
            match std::fs::read_to_string(&full) {
                Ok(text) => ThrustLookup::from_csv_str(&text).unwrap_or_else(|e| {
                    errors.push(format!("thrusters.lookup_table: {e}"));
                    ThrustLookup::identity()
                }),
                Err(e) => {
                    errors.push(format!("thrusters.lookup_table: {}: {e}", full.display()));
                    ThrustLookup::identity()
                }
            }
        }
    };

    let mut filter = raw.filter;
    if filter.r_diag.is_none() {
        let s = &raw.sensors;
        filter.r_diag = Some([s.gps_var, s.gps_var, s.depth_var, s.heading_var]);
    }
    let output_dir = match &ov.output_dir {
        Some(p) => p.display().to_string(),
        None => raw.output_dir.clone().unwrap_or_else(|| "runs".to_string()),
    };
    let config = ExperimentConfig {
        courses,
        backends: backends.iter().map(|b| b.name().to_string()).collect(),
        seeds,
        output_dir: output_dir.clone(),
        sim: raw.sim,
        vehicle: raw.vehicle,
        sensors: raw.sensors,
        controller: raw.controller,
        inner_loop: raw.inner_loop,
        filter,
        thrusters: raw.thrusters,
    };

    let out_path = match &ov.output_dir {
        Some(p) => p.clone(),
        None => resolve_path(base, &output_dir),
    };
    let spec = ExperimentSpec {
        config,
        courses: resolved,
        backends,
        lookup,
        output_dir: out_path,
    };
    if let Some((_, c)) = spec.courses.first() {
        let mut rc = spec.run_config(c.clone());
        if rc.backends.is_empty() {
            rc.backends.push(Backend::Dynamic);
        }
        errors.extend(rc.violations());
    }
    if errors.is_empty() {
        Ok(spec)
    } else {
        Err(CliError::Validation(errors))
    }
}
