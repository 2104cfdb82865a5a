//! Oracles that share no code path with the dynamics algorithms they check,
//! seeded random models, and the invariant measurements used by the test
//! suites and by `wbc verify`.

use nalgebra::{DMatrix, DVector, Matrix3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use wbc_core::dynamics::{
    self, kinetic_energy, potential_energy, velocity_vector, ContactSet, DynamicsError, GeneralizedVector,
    GravityField,
};
use wbc_core::model::{BaseKind, JointKind, JointLimits, JointSpec, LinkSpec, MultibodyModel};
use wbc_core::spatial::vee;
use wbc_core::{
    exp_so3, fixtures, forward_kinematics, parse_urdf, RobotConfiguration, RobotVelocity, Transform, Twist, Vec3,
    Wrench,
};
use wbc_interface::ControlMode;
use wbc_sim::{SimOptions, SimRobot};

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Closed-form Lagrangian dynamics of the bundled double pendulum: unit point
/// masses on unit massless rods, joint angles measured from the horizontal
/// and growing upward, gravity `g` along −z.
pub mod double_pendulum {
    use super::*;

    pub fn mass_matrix(q: [f64; 2]) -> DMatrix<f64> {
        let c2 = q[1].cos();
        DMatrix::from_row_slice(2, 2, &[3.0 + 2.0 * c2, 1.0 + c2, 1.0 + c2, 1.0])
    }

    /// `C(q, q̇) q̇` from the Christoffel symbols of [`mass_matrix`].
    pub fn coriolis(q: [f64; 2], dq: [f64; 2]) -> DVector<f64> {
        let s2 = q[1].sin();
        DVector::from_vec(vec![-s2 * (2.0 * dq[0] * dq[1] + dq[1] * dq[1]), s2 * dq[0] * dq[0]])
    }

    /// Gradient of `U = g (z1 + z2)` with `z1 = sin q1`, `z2 = sin q1 + sin(q1 + q2)`.
    pub fn gravity(q: [f64; 2], g: f64) -> DVector<f64> {
        let c1 = q[0].cos();
        let c12 = (q[0] + q[1]).cos();
        DVector::from_vec(vec![g * (2.0 * c1 + c12), g * c12])
    }

    pub fn inverse_dynamics(q: [f64; 2], dq: [f64; 2], ddq: [f64; 2], g: f64) -> DVector<f64> {
        mass_matrix(q) * DVector::from_vec(ddq.to_vec()) + coriolis(q, dq) + gravity(q, g)
    }
}

/// Twist of `frame` at `q` moving with `nu`, by central differences of the
/// forward kinematics along `q ⊕ t ν`.
pub fn finite_difference_twist(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
    frame: &str,
    h: f64,
) -> Twist {
    let pose = |t: f64| -> Transform { forward_kinematics(model, &q.integrate(nu, t)).unwrap()[frame] };
    let (plus, minus, now) = (pose(h), pose(-h), pose(0.0));
    let linear = (plus.translation - minus.translation) / (2.0 * h);
    let r_dot = (plus.rotation.matrix() - minus.rotation.matrix()) / (2.0 * h);
    let angular = vee(&(r_dot * now.rotation.matrix().transpose()));
    Twist::new(linear, angular)
}

fn random_vec(rng: &mut impl Rng, scale: f64) -> Vec3 {
    Vec3::new(
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
        rng.random_range(-scale..scale),
    )
}

fn random_unit(rng: &mut impl Rng) -> Vec3 {
    loop {
        let v = random_vec(rng, 1.0);
        let n = v.norm();
        if n > 0.2 && n <= 1.0 {
            return v / n;
        }
    }
}

/// Physically consistent inertia: second moments of a random mass cloud, rotated.
fn random_inertia(rng: &mut impl Rng) -> Matrix3<f64> {
    let x: f64 = rng.random_range(0.002..0.05);
    let y: f64 = rng.random_range(0.002..0.05);
    let z: f64 = rng.random_range(0.002..0.05);
    let d = Matrix3::from_diagonal(&Vec3::new(y + z, x + z, x + y));
    let r = exp_so3(&random_vec(rng, 3.0), 1.0);
    let r = r.matrix();
    let i = r * d * r.transpose();
    (i + i.transpose()) * 0.5
}

/// Serial chain with `dofs` moving joints (revolute or prismatic, random axes
/// and offsets) and, sometimes, a fixed joint welding an extra body.
pub fn random_chain(rng: &mut impl Rng, dofs: usize, base: BaseKind) -> MultibodyModel {
    let mut builder = MultibodyModel::builder(format!("random_chain_{dofs}")).base(base);
    let link = |rng: &mut ChaCha8Rng, name: String| {
        LinkSpec::new(name, rng.random_range(0.3..2.0), random_vec(rng, 0.2), random_inertia(rng))
    };
    let mut local = ChaCha8Rng::seed_from_u64(rng.random());
    builder = builder.link(link(&mut local, "link0".into()));
    let mut parent = "link0".to_string();
    let mut index = 1;
    let weld_at = if local.random_bool(0.5) { Some(local.random_range(0..=dofs)) } else { None };
    for d in 0..=dofs {
        if weld_at == Some(d) {
            let name = format!("link{index}");
            builder = builder.link(link(&mut local, name.clone())).joint(
                JointSpec::new(format!("weld{index}"), JointKind::Fixed, parent.clone(), name.clone())
                    .with_origin(random_origin(&mut local)),
            );
            parent = name;
            index += 1;
        }
        if d == dofs {
            break;
        }
        let name = format!("link{index}");
        let kind = if local.random_bool(0.25) { JointKind::Prismatic } else { JointKind::Revolute };
        builder = builder.link(link(&mut local, name.clone())).joint(
            JointSpec::new(format!("joint{index}"), kind, parent.clone(), name.clone())
                .with_origin(random_origin(&mut local))
                .with_axis(random_unit(&mut local))
                .with_limits(JointLimits { position: None, effort: Some(100.0) }),
        );
        parent = name;
        index += 1;
    }
    builder.build().expect("random chain is valid")
}

fn random_origin(rng: &mut impl Rng) -> Transform {
    Transform::new(exp_so3(&random_vec(rng, 1.5), 1.0), random_vec(rng, 0.4))
}

pub fn random_configuration(rng: &mut impl Rng, model: &MultibodyModel) -> RobotConfiguration {
    let joint_positions = (0..model.dof_count()).map(|_| rng.random_range(-2.0..2.0)).collect();
    if model.is_floating() {
        RobotConfiguration {
            base_position: random_vec(rng, 2.0),
            base_rotation: exp_so3(&random_vec(rng, 3.0), 1.0),
            joint_positions,
        }
    } else {
        RobotConfiguration::from_joints(joint_positions)
    }
}

pub fn random_velocity(rng: &mut impl Rng, model: &MultibodyModel, scale: f64) -> RobotVelocity {
    let joint_velocities = (0..model.dof_count()).map(|_| rng.random_range(-scale..scale)).collect();
    if model.is_floating() {
        RobotVelocity {
            base_linear: random_vec(rng, scale),
            base_angular: random_vec(rng, scale),
            joint_velocities,
        }
    } else {
        RobotVelocity::from_joints(joint_velocities)
    }
}

pub fn random_vector(rng: &mut impl Rng, len: usize, scale: f64) -> Vec<f64> {
    (0..len).map(|_| rng.random_range(-scale..scale)).collect()
}

/// `max |ν̇ − FD(ID(ν̇))|`. On floating models the base rows of the inverse
/// dynamics go back in as a wrench on the base link, whose Jacobian has an
/// identity base block.
pub fn round_trip_error(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
    nu_dot: &GeneralizedVector,
    gravity: &GravityField,
) -> Result<f64, DynamicsError> {
    let tau = dynamics::inverse_dynamics(model, q, nu, nu_dot, gravity, &ContactSet::new())?;
    let mut contacts = ContactSet::new();
    if let Some(base) = tau.base() {
        contacts.push(model.base_link().name.clone(), Wrench::from_vector(&base));
    }
    let acc = dynamics::forward_dynamics(model, q, nu, tau.joints(), gravity, &contacts)?;
    Ok((acc.as_vector() - nu_dot.as_vector()).amax())
}

/// Largest gap between `J ν` and the finite-difference twist over every link.
pub fn jacobian_error(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
) -> Result<f64, DynamicsError> {
    let v = velocity_vector(model, nu)?;
    let mut worst = 0.0f64;
    for link in model.links() {
        let j = dynamics::frame_jacobian(model, q, &link.name)?;
        let twist = &j.matrix * v.as_vector();
        let fd = finite_difference_twist(model, q, nu, &link.name, 1e-5).to_vector();
        worst = worst.max((twist - DVector::from_column_slice(fd.as_slice())).amax());
    }
    Ok(worst)
}

/// Largest relative energy error of the bundled pendulum released from the
/// horizontal, unactuated, over `duration` seconds of steps `dt`. Potential
/// energy is measured from the hanging position.
pub fn pendulum_energy_drift(dt: f64, duration: f64) -> f64 {
    let model = parse_urdf(fixtures::PENDULUM, BaseKind::Fixed).expect("bundled fixture");
    let g = GravityField::default();
    let hanging = RobotConfiguration::from_joints(vec![-std::f64::consts::FRAC_PI_2]);
    let floor = potential_energy(&model, &hanging, &g).expect("valid");
    let mut sim = SimRobot::new(model, SimOptions::default()).expect("valid");
    sim.set_all_modes(ControlMode::Torque);
    let energy = |sim: &SimRobot| {
        let s = sim.state();
        kinetic_energy(sim.model(), &s.q, &s.nu).expect("valid") + potential_energy(sim.model(), &s.q, &g).expect("valid")
            - floor
    };
    let e0 = energy(&sim);
    let steps = (duration / dt).round() as usize;
    let mut worst = 0.0f64;
    for _ in 0..steps {
        sim.step(dt).expect("valid step");
        worst = worst.max((energy(&sim) - e0).abs() / e0);
    }
    worst
}
