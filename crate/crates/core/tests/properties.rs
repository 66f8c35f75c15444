use nalgebra::{Matrix4, SymmetricEigen, Vector4};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use subnav_core::control::{command, steering, ControllerConfig, Waypoint};
use subnav_core::dynamics::{
    accel_full, accel_reduced, coriolis_added, coriolis_rb, damping, kinetic_energy, LinearDamping, QuadraticDamping,
    VehicleParams, Wrench6,
};
use subnav_core::estimation::{ekf_step, EstimatorState, FilterConfig, FilterNoise, PredictInputs};
use subnav_core::evaluation::{axis_rmse, point_segment_distance, total_error};
use subnav_core::frames::{angle_diff, body_to_ned, rotation_matrix, wrap_angle, BodyVel6, EulerAngles, Pose6};
use subnav_core::sensors::SensorFrame;
use subnav_core::simcore::{integrate_step, Integrator, TruthState};
use subnav_core::thrusters::{Allocator, ThrusterLayout};

fn vel6(max: f64) -> impl Strategy<Value = BodyVel6> {
    prop::array::uniform6(-max..max).prop_map(|a| BodyVel6::new(a[0], a[1], a[2], a[3], a[4], a[5]))
}

fn near(a: f64, b: f64, tol: f64) -> bool {
    (a - b).abs() <= tol
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn coriolis_does_no_work(nu in vel6(5.0)) {
        let p = VehicleParams::default();
        let n = nu.to_vector();
        let tol = 1e-9 * n.norm_squared();
        prop_assert!(n.dot(&coriolis_rb(&nu, &p)).abs() <= tol);
        prop_assert!(n.dot(&coriolis_added(&nu, &p)).abs() <= tol);
    }

    #[test]
    fn reduced_model_is_projection_of_full(
        u in -2.0..2.0f64, v in -2.0..2.0f64, w in -2.0..2.0f64, r in -1.0..1.0f64,
        x in -50.0..50.0f64, y in -50.0..50.0f64, z in 0.0..50.0f64, psi in -3.2..3.2f64,
        tau in prop::array::uniform4(-2000.0..2000.0f64),
    ) {
        let p = VehicleParams::default();
        let vel = BodyVel6::new(u, v, w, 0.0, 0.0, r);
        let wrench = Wrench6::planar(tau[0], tau[1], tau[2], tau[3]);
        let full = accel_full(&vel, &Pose6::planar(x, y, z, psi), &wrench, &p);
        let red = accel_reduced(&vel, &wrench, &p);
        for (a, b) in [(full.du, red[0]), (full.dv, red[1]), (full.dw, red[2]), (full.dr, red[3])] {
            prop_assert!(near(a, b, 1e-12 * (1.0 + a.abs())), "{a} vs {b}");
        }
    }

    #[test]
    fn damping_opposes_motion(nu in vel6(3.0)) {
        let d = damping(&nu, &VehicleParams::default());
        let n = nu.to_vector();
        for i in 0..6 {
            prop_assert!(d[i] * n[i] <= 0.0);
        }
    }

    #[test]
    fn acceleration_is_linear_in_thrust_without_dissipation(
        t1 in prop::array::uniform6(-500.0..500.0f64), t2 in prop::array::uniform6(-500.0..500.0f64),
        a in -2.0..2.0f64,
    ) {
        let mut p = VehicleParams::default();
        p.linear_damping = LinearDamping { xu: 0.0, yv: 0.0, zw: 0.0, kp: 0.0, mq: 0.0, nr: 0.0 };
        p.quadratic_damping = QuadraticDamping { xuu: 0.0, yvv: 0.0, zww: 0.0, kpp: 0.0, mqq: 0.0, nrr: 0.0 };
        p.buoyancy = p.weight();
        p.z_b = 0.0;
        let pose = Pose6::default();
        let rest = BodyVel6::default();
        let w = |t: [f64; 6]| Wrench6::new(t[0], t[1], t[2], t[3], t[4], t[5]);
        let f = |t: [f64; 6]| accel_full(&rest, &pose, &w(t), &p).to_vector();
        let mix: [f64; 6] = std::array::from_fn(|i| t1[i] + a * t2[i]);
        let rhs = f(t1) + f(t2) * a;
        prop_assert!((f(mix) - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
    }

    #[test]
    fn rotation_is_orthonormal(phi in -1.5..1.5f64, theta in -1.5..1.5f64, psi in -7.0..7.0f64) {
        let r = rotation_matrix(EulerAngles::new(phi, theta, psi));
        prop_assert!((r.transpose() * r - nalgebra::Matrix3::identity()).abs().max() <= 1e-10);
        prop_assert!(near(r.determinant(), 1.0, 1e-10));
    }

    #[test]
    fn body_to_ned_is_linear(
        phi in -1.0..1.0f64, theta in -1.0..1.0f64, psi in -4.0..4.0f64,
        n1 in vel6(2.0), n2 in vel6(2.0), a in -3.0..3.0f64, b in -3.0..3.0f64,
    ) {
        let att = EulerAngles::new(phi, theta, psi);
        let mix = BodyVel6::from_vector(&(n1.to_vector() * a + n2.to_vector() * b));
        let lhs = body_to_ned(att, &mix).unwrap();
        let rhs = body_to_ned(att, &n1).unwrap() * a + body_to_ned(att, &n2).unwrap() * b;
        prop_assert!((lhs - rhs).abs().max() <= 1e-12 * (1.0 + rhs.abs().max()));
    }

    #[test]
    fn wrap_is_idempotent(a in -100.0..100.0f64) {
        let w = wrap_angle(a);
        prop_assert!((0.0..std::f64::consts::TAU).contains(&w));
        prop_assert_eq!(wrap_angle(w), w);
    }

    #[test]
    fn thrust_map_is_linear(t1 in prop::array::uniform8(-200.0..200.0f64), t2 in prop::array::uniform8(-200.0..200.0f64), a in -2.0..2.0f64) {
        let layout = ThrusterLayout::default();
        let mix: [f64; 8] = std::array::from_fn(|i| t1[i] + a * t2[i]);
        let lhs = layout.wrench_from_thrusts(&mix).to_vector();
        let rhs = layout.wrench_from_thrusts(&t1).to_vector() + layout.wrench_from_thrusts(&t2).to_vector() * a;
        prop_assert!((lhs - rhs).abs().max() <= 1e-12 * (1.0 + rhs.abs().max()));
    }

    #[test]
    fn allocation_round_trip(tau in prop::array::uniform4(-1000.0..1000.0f64)) {
        let layout = ThrusterLayout::default();
        let alloc = Allocator::new(&layout).unwrap();
        let want = Wrench6::planar(tau[0], tau[1], tau[2], tau[3]);
        let got = layout.wrench_from_thrusts(&alloc.allocate(&want));
        let scale = tau.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        for (g, w) in [(got.tx, want.tx), (got.ty, want.ty), (got.tz, want.tz), (got.tpsi, want.tpsi)] {
            prop_assert!(near(g, w, 1e-8 * scale));
        }
    }

    #[test]
    fn steering_is_bounded(
        x in -20.0..20.0f64, y in -20.0..20.0f64, psi in -4.0..4.0f64,
        tx in -20.0..20.0f64, ty in -20.0..20.0f64,
    ) {
        let cfg = ControllerConfig::default();
        let prev = Waypoint::new(0.0, 0.0, 20.0);
        let target = Waypoint::new(tx, ty, 20.0);
        prop_assume!(tx.hypot(ty) > 1e-3);
        let d = steering(&Pose6::planar(x, y, 20.0, psi), &target, &prev, &cfg).unwrap();
        prop_assert!(d.abs() < std::f64::consts::FRAC_PI_2);
        let (_, rate) = command(d, &cfg);
        prop_assert!(rate.abs() <= 0.3 * std::f64::consts::FRAC_PI_2);
    }

    #[test]
    fn translation_invariant_metrics(
        pts in prop::collection::vec((-30.0..30.0f64, -30.0..30.0f64), 2..30),
        refs in prop::collection::vec((-30.0..30.0f64, -30.0..30.0f64), 2..30),
        dx in -100.0..100.0f64, dy in -100.0..100.0f64,
    ) {
        let shift = |v: &[(f64, f64)]| v.iter().map(|(x, y)| (x + dx, y + dy)).collect::<Vec<_>>();
        let a = total_error(&pts, &refs).unwrap();
        let b = total_error(&shift(&pts), &shift(&refs)).unwrap();
        prop_assert!(near(a, b, 1e-9 * (1.0 + a)));
        let xs: Vec<f64> = pts.iter().map(|p| p.0).collect();
        let rx: Vec<f64> = refs.iter().take(xs.len()).map(|p| p.0).collect();
        let xs = &xs[..rx.len()];
        let moved: Vec<f64> = xs.iter().map(|v| v + dx).collect();
        let rmoved: Vec<f64> = rx.iter().map(|v| v + dx).collect();
        let r1 = axis_rmse(xs, &rx).unwrap();
        let r2 = axis_rmse(&moved, &rmoved).unwrap();
        prop_assert!(near(r1, r2, 1e-9 * (1.0 + r1)));
    }

    #[test]
    fn rms_dominates_mean(pairs in prop::collection::vec((-10.0..10.0f64, -10.0..10.0f64), 1..200)) {
        let est: Vec<f64> = pairs.iter().map(|p| p.0).collect();
        let truth: Vec<f64> = pairs.iter().map(|p| p.1).collect();
        let mean = pairs.iter().map(|(e, t)| e - t).sum::<f64>() / pairs.len() as f64;
        prop_assert!(axis_rmse(&est, &truth).unwrap() >= mean.abs() * (1.0 - 1e-12));
    }

    #[test]
    fn total_error_matches_brute_force(
        pts in prop::collection::vec((-30.0..30.0f64, -30.0..30.0f64), 1..60),
        refs in prop::collection::vec((-30.0..30.0f64, -30.0..30.0f64), 1..60),
    ) {
        let brute = pts
            .iter()
            .map(|p| {
                if refs.len() == 1 {
                    return (p.0 - refs[0].0).hypot(p.1 - refs[0].1);
                }
                refs.windows(2).map(|w| point_segment_distance(*p, w[0], w[1])).fold(f64::INFINITY, f64::min)
            })
            .sum::<f64>()
            / pts.len() as f64;
        prop_assert!(near(total_error(&pts, &refs).unwrap(), brute, 1e-9));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn steering_is_continuous_away_from_antipode(
        x in -20.0..20.0f64, y in -20.0..20.0f64, psi in -3.0..3.0f64,
        tx in -20.0..20.0f64, ty in -20.0..20.0f64,
        ex in -1.0..1.0f64, ey in -1.0..1.0f64, epsi in -1.0..1.0f64,
    ) {
        let cfg = ControllerConfig::default();
        let prev = Waypoint::new(0.0, 0.0, 20.0);
        let target = Waypoint::new(tx, ty, 20.0);
        prop_assume!(tx.hypot(ty) > 1.0);
        let pose = Pose6::planar(x, y, 20.0, psi);
        let (lx, ly) = subnav_core::control::look_ahead_point(&pose, &target, &prev, cfg.look_ahead).unwrap();
        prop_assume!((lx - x).hypot(ly - y) > 0.1);
        let alpha = angle_diff((ly - y).atan2(lx - x), psi);
        prop_assume!(alpha.abs() < std::f64::consts::PI - 0.01);
        let h = 1e-7;
        let moved = Pose6::planar(x + h * ex, y + h * ey, 20.0, psi + h * epsi);
        let d0 = steering(&pose, &target, &prev, &cfg).unwrap();
        let d1 = steering(&moved, &target, &prev, &cfg).unwrap();
        prop_assert!((d1 - d0).abs() < 1e-4, "{d0} -> {d1}");
    }

    #[test]
    fn free_coast_never_gains_energy(nu in vel6(0.5)) {
        let mut p = VehicleParams::default();
        p.buoyancy = p.weight();
        p.z_b = 0.0;
        let mut s = TruthState { t: 0.0, pose: Pose6::planar(0.0, 0.0, 20.0, 0.0), vel: nu };
        let mut e = kinetic_energy(&s.vel, &p);
        for _ in 0..200 {
            s = integrate_step(&s, &Wrench6::default(), &p, 0.01, Integrator::SemiImplicitEuler).unwrap();
            let e_next = kinetic_energy(&s.vel, &p);
            prop_assert!(e_next <= e + 1e-9, "{e} -> {e_next}");
            e = e_next;
        }
    }
}

fn random_psd(rng: &mut ChaCha8Rng, scale: f64) -> Matrix4<f64> {
    let a = Matrix4::from_fn(|_, _| rng.random_range(-1.0..1.0));
    a * a.transpose() * scale
}

fn assert_psd(p: &Matrix4<f64>, step: usize) {
    assert!((p - p.transpose()).abs().max() <= 1e-9, "asymmetric at step {step}");
    let eig = SymmetricEigen::new(*p).eigenvalues;
    let floor = -1e-9 * (1.0 + p.abs().max());
    assert!(eig.iter().all(|&l| l >= floor), "negative eigenvalue {eig} at step {step}");
}

#[test]
fn covariance_stays_psd_over_long_random_runs() {
    for seed in 0..4u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let cfg = FilterConfig::default();
        let noise = FilterNoise {
            q: random_psd(&mut rng, 1e-3),
            r: random_psd(&mut rng, 0.1) + Matrix4::identity() * 1e-6,
        };
        let mut s = EstimatorState::new(Vector4::zeros(), Matrix4::identity());
        let mut acc_prev = Vector4::zeros();
        for step in 0..10_000 {
            let vel = Vector4::from_fn(|_, _| rng.random_range(-0.5..0.5));
            let acc = Vector4::from_fn(|_, _| rng.random_range(-0.2..0.2));
            let inp = PredictInputs { vel, acc, acc_prev, dt: 0.1 };
            acc_prev = acc;
            let frame = SensorFrame {
                t: step as f64 * 0.1,
                heading: wrap_angle(rng.random_range(-4.0..4.0)),
                gps: rng.random_bool(0.7).then(|| [rng.random_range(-5.0..5.0), rng.random_range(-5.0..5.0)]),
                depth: rng.random_bool(0.7).then(|| rng.random_range(15.0..25.0)),
                ..Default::default()
            };
            let out = ekf_step(&s, &inp, &frame, &noise, &cfg).unwrap();
            assert_psd(&out.predicted.p, step);
            assert_psd(&out.posterior.p, step);
            s = out.posterior;
        }
    }
}

#[test]
fn heading_update_ignores_full_turns() {
    let cfg = FilterConfig::default();
    let noise = FilterNoise { q: Matrix4::identity() * 1e-4, r: Matrix4::identity() * 0.01 };
    let s = EstimatorState::new(Vector4::new(1.0, 2.0, 20.0, 0.1), Matrix4::identity() * 0.5);
    let inp = PredictInputs { vel: Vector4::new(0.3, 0.0, 0.0, 0.01), acc: Vector4::zeros(), acc_prev: Vector4::zeros(), dt: 0.1 };
    let frame = |h: f64| SensorFrame { heading: h, gps: Some([1.0, 2.1]), depth: Some(20.0), ..Default::default() };
    let a = ekf_step(&s, &inp, &frame(6.2), &noise, &cfg).unwrap();
    let b = ekf_step(&s, &inp, &frame(6.2 + std::f64::consts::TAU), &noise, &cfg).unwrap();
    assert!(angle_diff(a.posterior.x[3], b.posterior.x[3]).abs() < 1e-12);
    assert!((a.posterior.x.xyz() - b.posterior.x.xyz()).norm() < 1e-12);
}
