use nalgebra::Vector4;
use subnav_core::control::{ControllerConfig, PurePursuit};
use subnav_core::dynamics::{VehicleParams, Wrench6};
use subnav_core::estimation::{Backend, Estimator, FilterConfig, ModelContext};
use subnav_core::evaluation::{axis_rmse, builtin_course, CourseId};
use subnav_core::frames::{BodyVel6, Pose6};
use subnav_core::sensors::{SensorConfig, SensorFrame};
use subnav_core::simcore::{integrate_step, run_episode, InnerLoopConfig, Integrator, RunConfig, TruthState};
use subnav_core::thrusters::{Allocator, ThrusterLayout};

fn noiseless(course: CourseId) -> RunConfig {
    let mut cfg = RunConfig::new(builtin_course(course));
    cfg.sensors = SensorConfig::noiseless();
    cfg
}

#[test]
fn noiseless_estimate_tracks_truth() {
    let cfg = noiseless(CourseId::Be1);
    let log = run_episode(&cfg).unwrap();
    assert!(log.completed);
    let (truth, est) = log.aligned_xy(Backend::Dynamic).unwrap();
    let col = |v: &[(f64, f64)], i: usize| v.iter().map(|p| if i == 0 { p.0 } else { p.1 }).collect::<Vec<_>>();
    for i in 0..2 {
        let rmse = axis_rmse(&col(&est, i), &col(&truth, i)).unwrap();
        assert!(rmse < 0.01, "axis {i}: {rmse}");
    }
}

#[test]
fn same_seed_same_log_and_seeds_differ() {
    let mut cfg = RunConfig::new(builtin_course(CourseId::Be3));
    cfg.timeout = 60.0;
    cfg.seed = 11;
    let a = run_episode(&cfg).unwrap_err().log;
    let b = run_episode(&cfg).unwrap_err().log;
    assert_eq!(a, b);
    cfg.seed = 12;
    let c = run_episode(&cfg).unwrap_err().log;
    assert_ne!(a.sensors, c.sensors);
}

#[test]
fn extra_backend_does_not_perturb_the_run() {
    let mut single = RunConfig::new(builtin_course(CourseId::Be2));
    single.timeout = 80.0;
    single.seed = 5;
    let mut both = single.clone();
    both.backends = vec![Backend::Dynamic, Backend::Kinematic];
    let a = run_episode(&single).unwrap_err().log;
    let b = run_episode(&both).unwrap_err().log;
    assert_eq!(a.sensors, b.sensors);
    assert_eq!(a.truth, b.truth);
    assert_eq!(a.estimates[&Backend::Dynamic], b.estimates[&Backend::Dynamic]);
    assert_eq!(b.estimates[&Backend::Kinematic].len(), b.estimates[&Backend::Dynamic].len());
}

#[test]
fn sensor_timestamps_never_decrease() {
    let mut cfg = RunConfig::new(builtin_course(CourseId::Be1));
    cfg.timeout = 30.0;
    let log = run_episode(&cfg).unwrap_err().log;
    assert!(log.sensors.windows(2).all(|w| w[1].t >= w[0].t));
    assert!(log.truth.windows(2).all(|w| w[1].t > w[0].t));
}

/// Dead reckoning with a constant IMU bias `b` and no position fixes: the
/// kinematic backend picks up `½·b·dt²` every step on top of the DVL
/// velocity, so after `n` steps the drift is `n·½·b·dt²`. The dynamic
/// backend does not read the IMU and stays on truth.
#[test]
fn imu_bias_drives_only_the_kinematic_backend() {
    let params = VehicleParams::default();
    let layout = ThrusterLayout::default();
    let alloc = Allocator::new(&layout).unwrap();
    let u = 0.3;
    let lin = params.linear_damping.xu + params.quadratic_damping.xuu * u;
    let hold = Wrench6::planar(-lin * u, 0.0, params.buoyancy - params.weight(), 0.0);
    let thrusts = alloc.allocate(&hold);
    let ctx = ModelContext { params: &params, layout: &layout, thrusts: &thrusts };

    let (b, dt, n) = (0.02, 0.1, 600);
    let filter = FilterConfig { r_diag: Some([0.25, 0.25, 0.01, 1e-4]), ..FilterConfig::default() };
    let noise = filter.noise(&SensorConfig::default());
    let start = Vector4::new(0.0, 0.0, 20.0, 0.0);
    let mut kin = Estimator::new(Backend::Kinematic, start, noise, filter);
    let mut dynm = Estimator::new(Backend::Dynamic, start, noise, filter);
    let frame = |k: usize| SensorFrame {
        t: k as f64 * dt,
        imu_accel: [b, 0.0, 0.0],
        heading: 0.0,
        dvl: [u, 0.0, 0.0],
        ..Default::default()
    };
    kin.prime(&frame(0));
    dynm.prime(&frame(0));
    for k in 1..=n {
        kin.step(&frame(k), dt, &ctx).unwrap();
        dynm.step(&frame(k), dt, &ctx).unwrap();
    }
    let truth_x = n as f64 * u * dt;
    let expected = n as f64 * 0.5 * b * dt * dt;
    let kin_err = kin.state().x[0] - truth_x;
    let dyn_err = dynm.state().x[0] - truth_x;
    assert!((kin_err - expected).abs() < 1e-9, "{kin_err} vs {expected}");
    assert!(dyn_err.abs() < 1e-9, "{dyn_err}");
    assert!(kin.state().x[1].abs() < 1e-12 && dynm.state().x[1].abs() < 1e-12);
}

/// Truth-fed pursuit of BE1's opening straight from a 2 m lateral offset.
#[test]
fn cross_track_error_decays_on_straight() {
    let params = VehicleParams::default();
    let layout = ThrusterLayout::default();
    let alloc = Allocator::new(&layout).unwrap();
    let inner = InnerLoopConfig::default();
    let straight: Vec<_> = builtin_course(CourseId::Be1).waypoints.into_iter().take(7).collect();
    assert!(straight.iter().all(|w| w.y == 0.0));
    let mut pursuit = PurePursuit::new(straight, ControllerConfig::default()).unwrap();
    let mut s = TruthState { t: 0.0, pose: Pose6::planar(0.0, 2.0, 20.0, 0.0), vel: BodyVel6::default() };
    let mut offsets = Vec::new();
    for _ in 0..1500 {
        let out = pursuit.update(&s.pose).unwrap();
        if out.done {
            break;
        }
        offsets.push(s.pose.y.abs());
        let frame = SensorFrame {
            imu_gyro: [s.vel.p, s.vel.q, s.vel.r],
            heading: s.pose.psi,
            dvl: [s.vel.u, s.vel.v, s.vel.w],
            ..Default::default()
        };
        let tau = inner.wrench(&params, out.surge, out.yaw_rate, out.depth, s.pose.z, &frame);
        let applied = layout.wrench_from_thrusts(&alloc.allocate(&tau));
        for _ in 0..10 {
            s = integrate_step(&s, &applied, &params, 0.01, Integrator::SemiImplicitEuler).unwrap();
        }
    }
    let peak = offsets.iter().enumerate().fold(0, |m, (i, v)| if *v > offsets[m] { i } else { m });
    let settle = offsets.iter().position(|v| *v < 0.01).expect("converges onto the line");
    assert!(peak < settle);
    for w in offsets[peak..settle].windows(2) {
        assert!(w[1] < w[0], "not decreasing: {} -> {}", w[0], w[1]);
    }
    assert!(offsets.last().unwrap() < &0.02);
}

/// Constant thrust, so the forcing adds no sample-and-hold error, and
/// velocities that keep their sign, so the `|ν|ν` damping stays smooth.
fn open_loop(dt: f64, integrator: Integrator) -> TruthState {
    let params = VehicleParams::default();
    let mut s = TruthState {
        t: 0.0,
        pose: Pose6::planar(0.0, 0.0, 20.0, 0.3),
        vel: BodyVel6::new(0.2, 0.05, 0.0, 0.0, 0.0, -0.02),
    };
    let steps = (20.0 / dt).round() as usize;
    let tau = Wrench6::planar(600.0, 150.0, params.buoyancy - params.weight(), -80.0);
    for _ in 0..steps {
        s = integrate_step(&s, &tau, &params, dt, integrator).unwrap();
    }
    s
}

fn distance(a: &TruthState, b: &TruthState) -> f64 {
    (a.pose.to_vector() - b.pose.to_vector()).norm() + (a.vel.to_vector() - b.vel.to_vector()).norm()
}

#[test]
fn integrators_converge_at_their_order() {
    let reference = open_loop(0.000625, Integrator::Rk4);
    let err = |dt, i| distance(&open_loop(dt, i), &reference);
    let euler = [err(0.02, Integrator::SemiImplicitEuler), err(0.01, Integrator::SemiImplicitEuler), err(0.005, Integrator::SemiImplicitEuler)];
    for w in euler.windows(2) {
        let ratio = w[0] / w[1];
        assert!((1.7..2.3).contains(&ratio), "euler ratio {ratio}");
    }
    let rk4 = [err(0.04, Integrator::Rk4), err(0.02, Integrator::Rk4)];
    let ratio = rk4[0] / rk4[1];
    assert!((12.0..20.0).contains(&ratio), "rk4 ratio {ratio}");
}
