use nalgebra::{DMatrix, Vector3};
use wbc_core::dynamics::{self, GravityField};
use wbc_core::{fixtures, parse_urdf, BaseKind, JointKind, JointLimits, JointSpec, LinkSpec, MultibodyModel};
use wbc_core::{RobotConfiguration, RobotVelocity, Rotation, Transform, Vec3};
use wbc_interface::*;

fn frames(joints: usize, positions: &[&[f64]], dt: f64) -> Vec<ReplayFrame> {
    positions
        .iter()
        .enumerate()
        .map(|(k, p)| {
            assert_eq!(p.len(), joints);
            ReplayFrame { time: k as f64 * dt, positions: p.to_vec(), velocities: None, accelerations: None }
        })
        .collect()
}

fn replay(names: &[&str], positions: &[&[f64]]) -> ReplayBackend {
    let names = names.iter().map(|s| s.to_string()).collect();
    ReplayBackend::new(names, frames(positions[0].len(), positions, 0.01)).unwrap()
}

/// Three revolute joints in a chain, effort limit 10 and position limit ±1.
fn limited_chain() -> MultibodyModel {
    let link = |n: &str| LinkSpec::point_mass(n, 1.0, Vec3::new(0.3, 0.0, 0.0));
    let limits = JointLimits { position: Some((-1.0, 1.0)), effort: Some(10.0) };
    let joint = |n: &str, p: &str, c: &str| {
        JointSpec::new(n, JointKind::Revolute, p, c)
            .with_axis(Vec3::y())
            .with_origin(Transform::from_translation(Vec3::new(0.3, 0.0, 0.0)))
            .with_limits(limits)
    };
    MultibodyModel::builder("limited")
        .link(link("l0"))
        .link(link("l1"))
        .link(link("l2"))
        .link(link("l3"))
        .joint(joint("j0", "l0", "l1"))
        .joint(joint("j1", "l1", "l2"))
        .joint(joint("j2", "l2", "l3"))
        .build()
        .unwrap()
}

fn interface(selection: &[&str], backend: ReplayBackend) -> WholeBodyInterface<ReplayBackend> {
    WholeBodyInterface::with_model(limited_chain(), selection, backend, InterfaceOptions::default()).unwrap()
}

#[test]
fn references_are_permuted_to_backend_order() {
    let mut wbi = interface(&["j2", "j0"], replay(&["j0", "j1", "j2"], &[&[0.0, 0.0, 0.0]]));
    wbi.set_control_reference(&[1.0, -1.0]).unwrap();
    let sent = &wbi.backend().sent()[0];
    assert_eq!(sent.joints, vec![2, 0]);
    assert_eq!(sent.values, vec![1.0, -1.0]);
    assert!(!wbi.saturation_flag());
}

#[test]
fn wrong_reference_length() {
    let mut wbi = interface(&["j2", "j0"], replay(&["j0", "j1", "j2"], &[&[0.0, 0.0, 0.0]]));
    assert_eq!(
        wbi.set_control_reference(&[1.0]),
        Err(InterfaceError::DimensionMismatch { what: "control reference", expected: 2, actual: 1 })
    );
}

#[test]
fn torque_and_position_saturation() {
    let mut wbi = interface(&["j0", "j1"], replay(&["j0", "j1", "j2"], &[&[0.0, 0.0, 0.0]]));
    wbi.set_control_reference(&[100.0, -3.0]).unwrap();
    assert_eq!(wbi.backend().sent()[0].values, vec![10.0, -3.0]);
    assert!(wbi.saturation_flag());
    assert_eq!(wbi.saturation_events(), 1);

    wbi.set_control_reference(&[0.0, 0.0]).unwrap();
    assert!(wbi.saturation_flag(), "flag is sticky");
    wbi.clear_saturation();
    assert!(!wbi.saturation_flag());

    wbi.set_control_mode(&["j1"], ControlMode::Position).unwrap();
    wbi.set_control_reference(&[-20.0, 2.0]).unwrap();
    assert_eq!(wbi.backend().sent()[2].values, vec![-10.0, 1.0]);
    assert_eq!(wbi.saturation_events(), 3);
}

#[test]
fn control_modes() {
    let mut wbi = interface(&["j2", "j0"], replay(&["j0", "j1", "j2"], &[&[0.0, 0.0, 0.0]]));
    wbi.set_control_mode(&[], ControlMode::Velocity).unwrap();
    assert_eq!(wbi.control_modes(), &[ControlMode::Torque, ControlMode::Torque]);
    assert_eq!(wbi.set_control_mode(&["j1"], ControlMode::Torque), Err(InterfaceError::UnknownJoint("j1".into())));
    wbi.set_all_control_modes(ControlMode::Velocity).unwrap();
    assert_eq!(wbi.control_modes(), &[ControlMode::Velocity; 2]);
    assert_eq!(wbi.backend().control_mode(2), ControlMode::Velocity);
    assert_eq!(wbi.backend().control_mode(1), ControlMode::Torque);
}

struct TorqueOnly(ReplayBackend);

impl RobotBackend for TorqueOnly {
    fn joint_names(&self) -> &[String] {
        self.0.joint_names()
    }
    fn supports_mode(&self, _joint: usize, mode: ControlMode) -> bool {
        mode == ControlMode::Torque
    }
    fn control_mode(&self, joint: usize) -> ControlMode {
        self.0.control_mode(joint)
    }
    fn set_control_mode(&mut self, joint: usize, mode: ControlMode) -> Result<(), BackendError> {
        self.0.set_control_mode(joint, mode)
    }
    fn set_references(&mut self, joints: &[usize], values: &[f64]) -> Result<(), BackendError> {
        self.0.set_references(joints, values)
    }
    fn read_sensor(&self, kind: SensorKind) -> Option<SensorReading> {
        self.0.read_sensor(kind)
    }
}

#[test]
fn unsupported_mode_names_the_joint() {
    let backend = TorqueOnly(replay(&["j0", "j1", "j2"], &[&[0.0, 0.0, 0.0]]));
    let mut wbi =
        WholeBodyInterface::with_model(limited_chain(), &["j0", "j1"], backend, InterfaceOptions::default()).unwrap();
    assert_eq!(
        wbi.set_control_mode(&["j0", "j1"], ControlMode::Position),
        Err(InterfaceError::UnsupportedMode { joint: "j0".into(), mode: ControlMode::Position })
    );
    assert_eq!(wbi.control_modes(), &[ControlMode::Torque; 2]);
    wbi.set_control_mode(&["j1"], ControlMode::Torque).unwrap();
}

#[test]
fn shuffled_reads() {
    let mut wbi = interface(&["j2", "j0"], replay(&["j0", "j1", "j2"], &[&[0.1, 0.2, 0.3]]));
    assert_eq!(wbi.get_estimates(EstimateKind::JointPosition).unwrap(), vec![0.3, 0.1]);
    let reading = wbi.read(SensorKind::Encoder).unwrap();
    assert_eq!(reading.values, vec![0.3, 0.1]);
    assert_eq!(wbi.read(SensorKind::Encoder).unwrap(), reading);
    assert_eq!(wbi.read(SensorKind::ForceTorque), Err(InterfaceError::NoSuchSensor(SensorKind::ForceTorque)));
}

#[test]
fn backend_order_differs_from_model_order() {
    let mut wbi = interface(&["j0", "j1", "j2"], replay(&["j2", "j0", "j1"], &[&[0.3, 0.1, 0.2]]));
    assert_eq!(wbi.get_estimates(EstimateKind::JointPosition).unwrap(), vec![0.1, 0.2, 0.3]);
    wbi.set_control_reference(&[1.0, 2.0, 3.0]).unwrap();
    assert_eq!(wbi.backend().sent()[0].joints, vec![1, 2, 0]);
}

#[test]
fn ramp_velocity_through_filter() {
    let samples: Vec<Vec<f64>> = (0..30).map(|k| vec![k as f64 * 0.01, 0.5, 0.0]).collect();
    let refs: Vec<&[f64]> = samples.iter().map(|s| s.as_slice()).collect();
    let mut wbi = interface(&["j1", "j0"], replay(&["j0", "j1", "j2"], &refs));
    assert_eq!(wbi.get_estimates(EstimateKind::JointVelocity).unwrap(), vec![0.0, 0.0]);
    loop {
        wbi.get_estimates(EstimateKind::JointPosition).unwrap();
        if !wbi.backend_mut().advance() {
            break;
        }
    }
    let v = wbi.get_estimates(EstimateKind::JointVelocity).unwrap();
    assert_eq!(v[0], 0.0);
    assert!((v[1] - 1.0).abs() < 1e-12, "{v:?}");
    let a = wbi.get_estimates(EstimateKind::JointAcceleration).unwrap();
    assert!(a.iter().all(|x| x.abs() < 1e-9), "{a:?}");
}

#[test]
fn native_estimates_take_precedence() {
    let frame = ReplayFrame {
        time: 0.0,
        positions: vec![0.0, 0.0, 0.0],
        velocities: Some(vec![1.0, 2.0, 3.0]),
        accelerations: None,
    };
    let backend = ReplayBackend::new(vec!["j0".into(), "j1".into(), "j2".into()], vec![frame]).unwrap();
    let mut wbi = interface(&["j2", "j0"], backend);
    assert_eq!(wbi.get_estimates(EstimateKind::JointVelocity).unwrap(), vec![3.0, 1.0]);
    assert_eq!(wbi.get_estimates(EstimateKind::JointAcceleration).unwrap(), vec![0.0, 0.0]);
    assert_eq!(
        wbi.get_estimates(EstimateKind::BasePose),
        Err(InterfaceError::EstimateUnavailable(EstimateKind::BasePose))
    );
}

#[test]
fn disconnected_backend_is_stale() {
    let mut wbi = interface(&["j0"], replay(&["j0", "j1", "j2"], &[&[0.0, 0.0, 0.0]]));
    wbi.backend_mut().disconnect();
    assert_eq!(wbi.set_control_reference(&[0.0]), Err(InterfaceError::StaleInterface));
    assert_eq!(wbi.get_estimates(EstimateKind::JointPosition), Err(InterfaceError::StaleInterface));
    assert_eq!(wbi.gravity_bias(&BaseState::default(), &[0.0]), Err(InterfaceError::StaleInterface));
}

#[test]
fn initialization_errors() {
    let backend = || replay(&["j0", "j1", "j2"], &[&[0.0, 0.0, 0.0]]);
    let init = |joints: &[&str], b| WholeBodyInterface::with_model(limited_chain(), joints, b, InterfaceOptions::default());
    assert_eq!(init(&["j0", "jl"], backend()).err(), Some(InterfaceError::UnknownJoint("jl".into())));
    assert_eq!(init(&[], backend()).err(), Some(InterfaceError::EmptySelection));
    assert_eq!(init(&["j0", "j0"], backend()).err(), Some(InterfaceError::DuplicateJoint("j0".into())));
    let mut dead = backend();
    dead.disconnect();
    assert_eq!(init(&["j0"], dead).err(), Some(InterfaceError::BackendUnavailable));
    let missing = replay(&["j0", "j1"], &[&[0.0, 0.0]]);
    assert_eq!(init(&["j2"], missing).err(), Some(InterfaceError::UnknownJoint("j2".into())));

    let source = ModelSource::File { path: "/nonexistent/robot.urdf".into(), base: BaseKind::Fixed };
    let err = WholeBodyInterface::initialize(source, &["j0"], backend(), InterfaceOptions::default()).err();
    assert!(matches!(err, Some(InterfaceError::ModelLoad(_))), "{err:?}");

    let source = ModelSource::Urdf { text: fixtures::CORRUPTED_INERTIA.into(), base: BaseKind::Fixed };
    let err = WholeBodyInterface::initialize(source, &["j0"], backend(), InterfaceOptions::default()).err();
    assert!(matches!(err, Some(InterfaceError::ModelLoad(_))), "{err:?}");

    let options = InterfaceOptions { filter_window: 1, ..Default::default() };
    assert!(matches!(
        WholeBodyInterface::with_model(limited_chain(), &["j0"], backend(), options).err(),
        Some(InterfaceError::InvalidFilter(_))
    ));
}

#[test]
fn full_selection_matches_dynamics_exactly() {
    let model = parse_urdf(fixtures::DOUBLE_PENDULUM, BaseKind::Fixed).unwrap();
    let backend = replay(&["joint1", "joint2"], &[&[0.0, 0.0]]);
    let wbi = WholeBodyInterface::with_model(model.clone(), &["joint1", "joint2"], backend, Default::default())
        .unwrap();
    assert_eq!(wbi.dofs(), 2);
    let q = [0.4, -1.1];
    let dq = [0.3, 2.0];
    let base = BaseState::default();
    let config = RobotConfiguration::from_joints(q.to_vec());
    let g = GravityField::default();
    assert_eq!(wbi.mass_matrix(&base, &q).unwrap(), dynamics::mass_matrix(&model, &config).unwrap());
    assert_eq!(
        wbi.gravity_bias(&base, &q).unwrap(),
        dynamics::gravity_bias(&model, &config, &g).unwrap().into_vector()
    );
    let nu = RobotVelocity::from_joints(dq.to_vec());
    assert_eq!(
        wbi.bias_forces(&base, &q, &dq).unwrap(),
        dynamics::bias_forces(&model, &config, &nu, &g).unwrap().into_vector()
    );
    assert_eq!(
        wbi.frame_jacobian(&base, &q, "link2").unwrap(),
        dynamics::frame_jacobian(&model, &config, "link2").unwrap().matrix
    );
    assert_eq!(
        wbi.forward_kinematics(&base, &q, "link2").unwrap(),
        dynamics::forward_kinematics(&model, &config).unwrap()["link2"]
    );
    assert!(matches!(
        wbi.frame_jacobian(&base, &q, "nope"),
        Err(InterfaceError::Dynamics(dynamics::DynamicsError::UnknownFrame(_)))
    ));
    assert!(matches!(wbi.gravity_bias(&base, &q[..1]), Err(InterfaceError::DimensionMismatch { .. })));
}

#[test]
fn subset_freezes_other_joints_at_measurement() {
    let model = parse_urdf(fixtures::DOUBLE_PENDULUM, BaseKind::Fixed).unwrap();
    let measured = [0.7, -0.25];
    let backend = replay(&["joint1", "joint2"], &[&measured]);
    let wbi = WholeBodyInterface::with_model(model.clone(), &["joint2"], backend, Default::default()).unwrap();
    let g = wbi.gravity_bias(&BaseState::default(), &[1.3]).unwrap();
    let full = dynamics::gravity_bias(
        &model,
        &RobotConfiguration::from_joints(vec![measured[0], 1.3]),
        &GravityField::default(),
    )
    .unwrap();
    assert_eq!(g.as_slice(), &[full.joints()[1]]);
    // closed form: g cos(q1 + q2)
    assert!((g[0] - 9.81 * (0.7f64 + 1.3).cos()).abs() < 1e-12);
}

#[test]
fn permuted_selection_congruence() {
    let model = parse_urdf(fixtures::FIVE_JOINT_TREE, BaseKind::Fixed).unwrap();
    let order = model.canonical_joint_order();
    let names: Vec<&str> = order.iter().map(String::as_str).collect();
    let backend = replay(&names, &[&[0.1, 0.2, 0.3, 0.4, 0.5]]);
    let shuffled = ["r_knee", "neck", "l_hip", "r_hip", "l_knee"];
    let wbi = WholeBodyInterface::with_model(model.clone(), &shuffled, backend, Default::default()).unwrap();
    let perm: Vec<usize> = shuffled.iter().map(|n| model.dof_index(n).unwrap()).collect();
    let q_model = [0.3, -0.2, 0.9, 1.1, -0.6];
    let q_ctrl: Vec<f64> = perm.iter().map(|&d| q_model[d]).collect();
    let m_full = dynamics::mass_matrix(&model, &RobotConfiguration::from_joints(q_model.to_vec())).unwrap();
    let p = DMatrix::from_fn(5, 5, |r, c| if perm[c] == r { 1.0 } else { 0.0 });
    let expected = p.transpose() * &m_full * &p;
    let m = wbi.mass_matrix(&BaseState::default(), &q_ctrl).unwrap();
    assert!((m - expected).amax() < 1e-15);
}

#[test]
fn floating_subset_keeps_base_coordinates() {
    let model = parse_urdf(fixtures::FIVE_JOINT_TREE, BaseKind::Floating).unwrap();
    let order = model.canonical_joint_order();
    let names: Vec<&str> = order.iter().map(String::as_str).collect();
    let measured = [0.1, 0.2, 0.3, 0.4, 0.5];
    let backend = replay(&names, &[&measured]);
    let wbi = WholeBodyInterface::with_model(model.clone(), &["r_hip", "neck"], backend, Default::default()).unwrap();
    assert!(wbi.is_floating());
    let pose = Transform::new(Rotation::from_axis_angle(&Vector3::new(0.0, 0.6, 0.8), 0.7), Vec3::new(1.0, 2.0, 0.5));
    let base = BaseState::at(pose);
    let q = [-0.4, 0.8];
    let mut full_q = measured.to_vec();
    full_q[model.dof_index("r_hip").unwrap()] = q[0];
    full_q[model.dof_index("neck").unwrap()] = q[1];
    let config =
        RobotConfiguration { base_position: pose.translation, base_rotation: pose.rotation, joint_positions: full_q };
    let idx: Vec<usize> =
        (0..6).chain(["r_hip", "neck"].iter().map(|n| 6 + model.dof_index(n).unwrap())).collect();

    let g = wbi.gravity_bias(&base, &q).unwrap();
    let g_full = dynamics::gravity_bias(&model, &config, &GravityField::default()).unwrap();
    assert_eq!(g.len(), 8);
    for (k, &i) in idx.iter().enumerate() {
        assert_eq!(g[k], g_full.as_slice()[i]);
    }
    let j = wbi.frame_jacobian(&base, &q, "r_shin").unwrap();
    let j_full = dynamics::frame_jacobian(&model, &config, "r_shin").unwrap().matrix;
    assert_eq!(j.ncols(), 8);
    for (k, &i) in idx.iter().enumerate() {
        assert_eq!(j.column(k), j_full.column(i));
    }
}

#[test]
fn config_file_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("arm.urdf"), fixtures::TWO_LINK_ARM).unwrap();
    let text = r#"
        [model]
        path = "arm.urdf"

        [selection]
        joints = ["elbow", "shoulder"]
        filter_cutoff_hz = 25.0
    "#;
    let config = InterfaceConfig::from_toml(text).unwrap();
    assert_eq!(config.model.gravity, [0.0, 0.0, -9.81]);
    assert_eq!(config.selection.backend, "sim");
    assert_eq!(config.selection.filter_window, 2);
    let options = config.options();
    assert_eq!(options.filter_cutoff_hz, 25.0);
    let source = config.model.source(dir.path()).unwrap();
    let backend = replay(&["shoulder", "elbow"], &[&[0.0, 0.0]]);
    let wbi = WholeBodyInterface::initialize(source, &config.selection.joints, backend, options).unwrap();
    assert_eq!(wbi.joint_names(), &["elbow".to_string(), "shoulder".to_string()]);

    let echoed = toml::to_string(&config).unwrap();
    assert_eq!(InterfaceConfig::from_toml(&echoed).unwrap(), config);

    assert!(InterfaceConfig::from_toml("[model]\npath = \"a\"\ncolour = 1\n[selection]\njoints = []\n").is_err());
    let no_path = InterfaceConfig::from_toml("[model]\n[selection]\njoints = [\"a\"]\n").unwrap();
    assert!(no_path.model.source(dir.path()).unwrap_err().to_string().contains("model.path"));
}
