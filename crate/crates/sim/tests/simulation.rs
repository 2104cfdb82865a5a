use nalgebra::Matrix3;
use wbc_core::dynamics::{self, potential_energy, spatial_momentum, GravityField};
use wbc_core::{fixtures, parse_urdf, BaseKind, JointKind, JointSpec, LinkSpec, MultibodyModel};
use wbc_core::{RobotConfiguration, RobotVelocity, Rotation, Vec3, Wrench};
use wbc_interface::{
    ControlMode, EstimateKind, InterfaceOptions, RobotBackend, SensorKind, Sensors, State, WholeBodyInterface,
};
use wbc_sim::{SimError, SimOptions, SimRobot, TrajectoryLogger};

fn sim(doc: &str, base: BaseKind, options: SimOptions) -> SimRobot {
    SimRobot::new(parse_urdf(doc, base).unwrap(), options).unwrap()
}

fn zero_g() -> SimOptions {
    SimOptions { gravity: GravityField::zero(), ..Default::default() }
}

fn unit_rotor() -> MultibodyModel {
    MultibodyModel::builder("rotor")
        .link(LinkSpec::point_mass("base", 1.0, Vec3::zeros()))
        .link(LinkSpec::new("wheel", 1.0, Vec3::zeros(), Matrix3::identity()))
        .joint(JointSpec::new("spin", JointKind::Revolute, "base", "wheel").with_axis(Vec3::z()))
        .build()
        .unwrap()
}

#[test]
fn at_rest_without_gravity_nothing_moves() {
    let mut s = sim(fixtures::FIVE_JOINT_TREE, BaseKind::Floating, zero_g());
    s.set_all_modes(ControlMode::Torque);
    let before = s.state().clone();
    for _ in 0..100 {
        s.step(0.001).unwrap();
    }
    let after = s.state();
    assert_eq!(after.q, before.q);
    assert_eq!(after.nu, before.nu);
    assert!((after.time - 0.1).abs() < 1e-12);
}

#[test]
fn semi_implicit_velocity_first() {
    let mut s = SimRobot::new(unit_rotor(), zero_g()).unwrap();
    s.set_all_modes(ControlMode::Torque);
    s.set_references(&[2.0]).unwrap();
    s.step(0.001).unwrap();
    assert!((s.state().nu.joint_velocities[0] - 0.002).abs() < 1e-15);
    assert!((s.state().q.joint_positions[0] - 0.002 * 0.001).abs() < 1e-18);
}

#[test]
fn step_size_is_bounded() {
    let mut s = SimRobot::new(unit_rotor(), zero_g()).unwrap();
    for dt in [0.0, -0.001, 0.0100001, f64::NAN] {
        assert!(matches!(s.step(dt), Err(SimError::InvalidStep(_))), "{dt}");
    }
    s.step(0.01).unwrap();
}

#[test]
fn pendulum_gravity_compensation_holds() {
    let mut s = sim(fixtures::PENDULUM, BaseKind::Fixed, SimOptions::default());
    s.set_all_modes(ControlMode::Torque);
    s.reset(RobotConfiguration::from_joints(vec![0.3]), RobotVelocity::zeros(1)).unwrap();
    let mut max_rate = 0.0f64;
    for _ in 0..5000 {
        let g = dynamics::gravity_bias(s.model(), &s.state().q, s.gravity()).unwrap();
        s.set_references(g.joints()).unwrap();
        s.step(0.001).unwrap();
        max_rate = max_rate.max(s.state().nu.joint_velocities[0].abs());
    }
    assert!(max_rate < 1e-3, "{max_rate}");
}

#[test]
fn zero_wrench_changes_nothing() {
    let run = |push: bool| {
        let mut s = sim(fixtures::TWO_LINK_ARM, BaseKind::Fixed, SimOptions::default());
        s.set_all_modes(ControlMode::Torque);
        if push {
            s.apply_external_wrench("forearm", Wrench::zero(), 1.0).unwrap();
        }
        for _ in 0..200 {
            s.step(0.001).unwrap();
        }
        s.state().q.clone()
    };
    assert_eq!(run(false), run(true));
}

#[test]
fn hovering_body() {
    let body = MultibodyModel::builder("puck")
        .base(BaseKind::Floating)
        .link(LinkSpec::new("puck", 2.5, Vec3::zeros(), Matrix3::from_diagonal(&Vec3::new(0.1, 0.2, 0.3))))
        .build()
        .unwrap();
    let mut s = SimRobot::new(body, SimOptions::default()).unwrap();
    s.apply_external_wrench("puck", Wrench::new(Vec3::new(0.0, 0.0, 2.5 * 9.81), Vec3::zeros()), 0.5).unwrap();
    s.step(0.001).unwrap();
    assert!(s.acceleration().as_vector().amax() < 1e-12);
    assert!(s.state().nu.base_linear.norm() < 1e-12);
}

#[test]
fn lateral_push_matches_jacobian_transpose() {
    let mut s = sim(fixtures::PENDULUM, BaseKind::Fixed, SimOptions::default());
    s.set_all_modes(ControlMode::Torque);
    let hanging = RobotConfiguration::from_joints(vec![-std::f64::consts::FRAC_PI_2]);
    s.reset(hanging.clone(), RobotVelocity::zeros(1)).unwrap();
    // force of 3 N along +x at the rod tip, moved to the rod frame origin
    let tip = dynamics::forward_kinematics(s.model(), &hanging).unwrap()["rod"].transform_point(&Vec3::x());
    let origin = dynamics::forward_kinematics(s.model(), &hanging).unwrap()["rod"].translation;
    let force = Vec3::new(3.0, 0.0, 0.0);
    let wrench = Wrench::new(force, (tip - origin).cross(&force));
    s.apply_external_wrench("rod", wrench, 0.001).unwrap();
    s.step(0.001).unwrap();
    let j = dynamics::frame_jacobian(s.model(), &hanging, "rod").unwrap().matrix;
    let generalized = j.transpose() * nalgebra::DVector::from_column_slice(wrench.to_vector().as_slice());
    let m = dynamics::mass_matrix(s.model(), &hanging).unwrap();
    let acc = s.acceleration().as_slice()[0];
    assert!(generalized[0].abs() > 1.0);
    assert_eq!(acc.signum(), generalized[0].signum());
    assert!((acc - generalized[0] / m[(0, 0)]).abs() < 1e-9);
}

#[test]
fn wrench_lasts_ceil_duration_over_dt_steps() {
    let mut s = SimRobot::new(unit_rotor(), zero_g()).unwrap();
    s.set_all_modes(ControlMode::Torque);
    s.apply_external_wrench("wheel", Wrench::new(Vec3::zeros(), Vec3::new(0.0, 0.0, 1.0)), 0.0025).unwrap();
    let mut active = 0;
    for _ in 0..10 {
        s.step(0.001).unwrap();
        if !s.state().contacts.is_empty() {
            active += 1;
        }
    }
    assert_eq!(active, 3);
    assert!((s.state().nu.joint_velocities[0] - 0.003).abs() < 1e-15);
    assert_eq!(
        s.apply_external_wrench("nope", Wrench::zero(), 1.0),
        Err(SimError::UnknownFrame("nope".into()))
    );
}

#[test]
fn reset_behaviour() {
    let mut s = sim(fixtures::FIVE_JOINT_TREE, BaseKind::Floating, SimOptions::default());
    for _ in 0..10 {
        s.step(0.001).unwrap();
    }
    s.reset(s.model().neutral_configuration(), RobotVelocity::zeros(5)).unwrap();
    assert_eq!(s.time(), 0.0);
    assert_eq!(s.read_sensor(SensorKind::Encoder).unwrap().values, vec![0.0; 5]);

    let mut bad = s.model().neutral_configuration();
    bad.base_rotation = Rotation::from_matrix_unchecked(Matrix3::identity() * 1.1);
    assert!(matches!(s.reset(bad, RobotVelocity::zeros(5)), Err(SimError::InvalidRotation(_))));
    assert!(matches!(
        s.reset(RobotConfiguration::from_joints(vec![0.0; 4]), RobotVelocity::zeros(5)),
        Err(SimError::DimensionMismatch { .. })
    ));
}

fn run_noisy(seed: u64) -> Vec<f64> {
    let options = SimOptions { encoder_noise_std: 0.01, seed, ..Default::default() };
    let mut s = sim(fixtures::TWO_LINK_ARM, BaseKind::Fixed, options);
    s.set_all_modes(ControlMode::Torque);
    s.set_references(&[0.5, -0.2]).unwrap();
    let mut out = Vec::new();
    for _ in 0..50 {
        s.step(0.001).unwrap();
        out.extend(s.read_sensor(SensorKind::Encoder).unwrap().values);
        out.extend(s.state().q.joint_positions.iter());
    }
    out
}

#[test]
fn deterministic_runs() {
    assert_eq!(run_noisy(4), run_noisy(4));
    assert_ne!(run_noisy(4), run_noisy(5));
}

#[test]
fn encoder_noise_is_sampled_per_step() {
    let options = SimOptions { encoder_noise_std: 0.01, seed: 1, ..Default::default() };
    let mut s = sim(fixtures::TWO_LINK_ARM, BaseKind::Fixed, options);
    s.step(0.001).unwrap();
    let a = s.read_sensor(SensorKind::Encoder).unwrap();
    assert_eq!(s.read_sensor(SensorKind::Encoder).unwrap(), a);
    assert_ne!(a.values, s.state().q.joint_positions);
    s.step(0.001).unwrap();
    assert!(s.read_sensor(SensorKind::Encoder).unwrap().timestamp > a.timestamp);
}

#[test]
fn position_mode_holds_reset_pose() {
    let mut s = sim(fixtures::TWO_LINK_ARM, BaseKind::Fixed, SimOptions::default());
    let q0 = RobotConfiguration::from_joints(vec![0.4, -0.3]);
    s.reset(q0, RobotVelocity::zeros(2)).unwrap();
    for _ in 0..3000 {
        s.step(0.001).unwrap();
    }
    // steady state: kp (q_ref − q) = G(q)
    let q = &s.state().q;
    let g = dynamics::gravity_bias(s.model(), q, s.gravity()).unwrap();
    for d in 0..2 {
        let err = [0.4, -0.3][d] - q.joint_positions[d];
        assert!((100.0 * err - g.joints()[d]).abs() < 1e-3, "joint {d}");
    }
    assert!(s.state().nu.joint_velocities.iter().all(|v| v.abs() < 1e-4));
}

#[test]
fn velocity_mode_tracks_rate() {
    let mut s = SimRobot::new(unit_rotor(), zero_g()).unwrap();
    s.set_all_modes(ControlMode::Velocity);
    s.set_references(&[1.5]).unwrap();
    for _ in 0..2000 {
        s.step(0.001).unwrap();
    }
    assert!((s.state().nu.joint_velocities[0] - 1.5).abs() < 1e-6);
}

#[test]
fn effort_limits_clip_torque() {
    let mut s = sim(fixtures::TWO_LINK_ARM, BaseKind::Fixed, zero_g());
    s.set_all_modes(ControlMode::Torque);
    s.set_references(&[500.0, 0.0]).unwrap();
    s.step(0.001).unwrap();
    assert_eq!(s.applied_torques(), &[100.0, 0.0]);
    assert_eq!(s.saturation_events(), 1);
}

#[test]
fn backend_through_interface() {
    let order = vec!["elbow".to_string(), "shoulder".to_string()];
    let options = SimOptions { joint_order: Some(order), native_velocity: false, ..Default::default() };
    let s = sim(fixtures::TWO_LINK_ARM, BaseKind::Fixed, options);
    let model = s.model().clone();
    let mut wbi =
        WholeBodyInterface::with_model(model, &["shoulder", "elbow"], s, InterfaceOptions::default()).unwrap();
    wbi.set_all_control_modes(ControlMode::Torque).unwrap();
    assert_eq!(wbi.backend().state().modes, vec![ControlMode::Torque; 2]);
    use wbc_interface::Actuators;
    wbi.set_control_reference(&[3.0, -1.0]).unwrap();
    assert_eq!(wbi.backend().state().references, vec![3.0, -1.0]);
    for _ in 0..20 {
        wbi.backend_mut().step(0.001).unwrap();
        wbi.get_estimates(EstimateKind::JointPosition).unwrap();
    }
    let q = wbi.get_estimates(EstimateKind::JointPosition).unwrap();
    assert_eq!(q, wbi.backend().state().q.joint_positions);
    assert_eq!(wbi.read(SensorKind::Encoder).unwrap().values, q);
    let filtered = wbi.get_estimates(EstimateKind::JointVelocity).unwrap();
    let truth = &wbi.backend().state().nu.joint_velocities;
    assert!(filtered.iter().zip(truth).all(|(f, t)| f.signum() == t.signum()));
    assert!(wbi.get_estimates(EstimateKind::BasePose).unwrap().len() == 12);
    assert_eq!(wbi.read(SensorKind::ForceTorque), Err(wbc_interface::InterfaceError::NoSuchSensor(SensorKind::ForceTorque)));
}

#[test]
fn native_estimates_in_board_order() {
    let order = vec!["elbow".to_string(), "shoulder".to_string()];
    let mut s = sim(fixtures::TWO_LINK_ARM, BaseKind::Fixed, SimOptions { joint_order: Some(order), ..Default::default() });
    s.set_all_modes(ControlMode::Torque);
    s.step(0.001).unwrap();
    let v = s.native_estimate(EstimateKind::JointVelocity).unwrap().values;
    let nu = &s.state().nu.joint_velocities;
    assert_eq!(v, vec![nu[1], nu[0]]);
    let a = s.native_estimate(EstimateKind::JointAcceleration).unwrap().values;
    assert_eq!(a, vec![s.acceleration().joints()[1], s.acceleration().joints()[0]]);
}

#[test]
fn sensors() {
    let options = SimOptions { force_torque_frames: vec!["l_shin".into()], ..Default::default() };
    let mut s = sim(fixtures::FIVE_JOINT_TREE, BaseKind::Floating, options);
    let w = Wrench::new(Vec3::new(1.0, 2.0, 3.0), Vec3::new(-1.0, 0.0, 0.5));
    s.apply_external_wrench("l_shin", w, 0.01).unwrap();
    s.step(0.001).unwrap();
    let ft = s.read_sensor(SensorKind::ForceTorque).unwrap();
    assert_eq!(ft.values, w.to_vector().as_slice());
    // free fall: proper acceleration of the base is zero... up to the pushing wrench
    let mut falling = sim(fixtures::FIVE_JOINT_TREE, BaseKind::Floating, SimOptions::default());
    falling.step(0.001).unwrap();
    let acc = falling.read_sensor(SensorKind::Accelerometer).unwrap();
    assert!(acc.values.iter().all(|a| a.abs() < 1e-9), "{:?}", acc.values);
    // a welded base measures −g
    let fixed = sim(fixtures::TWO_LINK_ARM, BaseKind::Fixed, SimOptions::default());
    assert_eq!(fixed.read_sensor(SensorKind::Accelerometer).unwrap().values, vec![0.0, 0.0, 9.81]);
}

#[test]
fn trajectory_csv() {
    let mut s = sim(fixtures::FIVE_JOINT_TREE, BaseKind::Fixed, SimOptions::default());
    let joints = vec!["r_knee".to_string(), "l_hip".to_string()];
    let mut log = TrajectoryLogger::new(Vec::new(), &s, &joints, 2).unwrap();
    assert_eq!(log.columns(), 7);
    for _ in 0..5 {
        s.step(0.001).unwrap();
        log.record(&s).unwrap();
    }
    let text = String::from_utf8(log.into_inner().unwrap()).unwrap();
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "time,l_hip_pos,l_hip_vel,l_hip_tau,r_knee_pos,r_knee_vel,r_knee_tau");
    assert_eq!(lines.len(), 4);
    assert!(lines[1..].iter().all(|l| l.split(',').count() == 7));

    let s = sim(fixtures::FIVE_JOINT_TREE, BaseKind::Floating, SimOptions::default());
    let mut log = TrajectoryLogger::new(Vec::new(), &s, &joints, 1).unwrap();
    assert_eq!(log.columns(), 1 + 6 + 13);
    log.record(&s).unwrap();
    let text = String::from_utf8(log.into_inner().unwrap()).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().ends_with("base_qw,base_qx,base_qy,base_qz,base_vx,base_vy,base_vz,base_wx,base_wy,base_wz"));
    let row: Vec<f64> = lines.next().unwrap().split(',').map(|v| v.parse().unwrap()).collect();
    assert_eq!(row.len(), 20);
    assert_eq!(row[10], 1.0);
}

fn pendulum_energy_drift(dt: f64) -> f64 {
    let mut s = sim(fixtures::PENDULUM, BaseKind::Fixed, SimOptions::default());
    s.set_all_modes(ControlMode::Torque);
    let g = GravityField::default();
    let hanging = potential_energy(s.model(), &RobotConfiguration::from_joints(vec![-std::f64::consts::FRAC_PI_2]), &g).unwrap();
    let energy = |s: &SimRobot| {
        let st = s.state();
        dynamics::kinetic_energy(s.model(), &st.q, &st.nu).unwrap() + potential_energy(s.model(), &st.q, &g).unwrap()
            - hanging
    };
    let e0 = energy(&s);
    let steps = (10.0 / dt).round() as usize;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        s.step(dt).unwrap();
        worst = worst.max((energy(&s) - e0).abs() / e0);
    }
    worst
}

#[test]
fn pendulum_energy_drift_is_first_order() {
    let coarse = pendulum_energy_drift(1e-3);
    let fine = pendulum_energy_drift(5e-4);
    assert!(coarse < 1e-2, "{coarse}");
    let ratio = coarse / fine;
    assert!((1.6..2.4).contains(&ratio), "{ratio}");
}

#[test]
fn free_floating_momentum_is_conserved() {
    let mut s = sim(fixtures::THREE_LINK_CHAIN, BaseKind::Floating, zero_g());
    s.set_all_modes(ControlMode::Torque);
    let nu0 = RobotVelocity {
        base_linear: Vec3::new(0.1, -0.05, 0.02),
        base_angular: Vec3::new(0.05, 0.1, -0.08),
        joint_velocities: vec![0.2, -0.15],
    };
    s.reset(s.model().neutral_configuration(), nu0).unwrap();
    let h = |s: &SimRobot| spatial_momentum(s.model(), &s.state().q, &s.state().nu).unwrap().to_vector();
    let h0 = h(&s);
    let mut worst = 0.0f64;
    for _ in 0..10_000 {
        s.step(1e-4).unwrap();
        worst = worst.max((h(&s) - h0).norm());
    }
    assert!(worst < 1e-6, "{worst}");
}

#[test]
fn rotation_stays_orthonormal() {
    let body = MultibodyModel::builder("top")
        .base(BaseKind::Floating)
        .link(LinkSpec::new("top", 1.0, Vec3::zeros(), Matrix3::from_diagonal(&Vec3::new(0.1, 0.2, 0.3))))
        .build()
        .unwrap();
    let mut s = SimRobot::new(body, zero_g()).unwrap();
    let nu0 = RobotVelocity { base_linear: Vec3::zeros(), base_angular: Vec3::new(3.0, 0.2, -1.0), joint_velocities: vec![] };
    s.reset(RobotConfiguration::from_joints(vec![]), nu0).unwrap();
    for _ in 0..1_000_000 {
        s.step(1e-3).unwrap();
    }
    let r = s.state().q.base_rotation;
    assert!(r.orthonormality_error() < 1e-9);
    assert!((r.matrix().determinant() - 1.0).abs() < 1e-9);
}
