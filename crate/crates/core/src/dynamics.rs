//! Kinematics and dynamics of a multibody tree.
//!
//! Internally every six-vector is expressed in inertial-frame coordinates
//! about the inertial origin, linear part first. Public results use the
//! mixed representation: base linear velocity is the time derivative of the
//! base position and angular velocities satisfy `Ṙ = S(ω) R`. Frame
//! Jacobians map `ν` to the derivative of the frame origin and the frame's
//! angular velocity.
//!
//! The mass matrix is assembled with the composite-rigid-body algorithm and
//! inverse dynamics with recursive Newton-Euler. `C(q, ν)` is never formed;
//! only the product `C(q, ν) ν` is available through [`bias_forces`].

use indexmap::IndexMap;
use nalgebra::{Cholesky, DMatrix, DVector, Matrix3, Matrix6, Vector6};
use thiserror::Error;

use crate::model::{JointKind, LinkSpec, MultibodyModel, RobotConfiguration, RobotVelocity};
use crate::spatial::{skew, SpatialError, Transform, Vec3, Wrench};

/// Largest accepted (estimated) condition number of the mass matrix.
pub const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum DynamicsError {
    #[error("dimension mismatch for {what}: expected {expected}, got {actual}")]
    DimensionMismatch { what: &'static str, expected: usize, actual: usize },
    #[error("unknown frame `{0}`")]
    UnknownFrame(String),
    #[error("mass matrix is singular or ill-conditioned (condition estimate {condition:e})")]
    SingularMassMatrix { condition: f64 },
    #[error(transparent)]
    InvalidConfiguration(#[from] SpatialError),
}

fn check_dim(what: &'static str, expected: usize, actual: usize) -> Result<(), DynamicsError> {
    if expected == actual {
        Ok(())
    } else {
        Err(DynamicsError::DimensionMismatch { what, expected, actual })
    }
}

/// Uniform gravitational acceleration in the inertial frame (m/s²).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GravityField(pub Vec3);

impl Default for GravityField {
    fn default() -> Self {
        Self(Vec3::new(0.0, 0.0, -9.81))
    }
}

impl GravityField {
    pub fn zero() -> Self {
        Self(Vec3::zeros())
    }

    pub fn acceleration(&self) -> &Vec3 {
        &self.0
    }
}

/// Vector in generalized coordinates: six base rows (linear, angular) when the
/// base floats, followed by one row per joint.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneralizedVector {
    floating: bool,
    data: DVector<f64>,
}

impl GeneralizedVector {
    pub fn zeros(floating: bool, joints: usize) -> Self {
        Self { floating, data: DVector::zeros(joints + if floating { 6 } else { 0 }) }
    }

    pub fn from_parts(base: Option<Vector6<f64>>, joints: &[f64]) -> Self {
        match base {
            Some(b) => Self {
                floating: true,
                data: DVector::from_iterator(6 + joints.len(), b.iter().copied().chain(joints.iter().copied())),
            },
            None => Self { floating: false, data: DVector::from_column_slice(joints) },
        }
    }

    pub fn from_vector(floating: bool, data: DVector<f64>) -> Self {
        assert!(!floating || data.len() >= 6, "floating generalized vector needs six base rows");
        Self { floating, data }
    }

    pub fn is_floating(&self) -> bool {
        self.floating
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    fn offset(&self) -> usize {
        if self.floating {
            6
        } else {
            0
        }
    }

    /// Base rows, present only for floating-base models.
    pub fn base(&self) -> Option<Vector6<f64>> {
        self.floating.then(|| self.data.fixed_rows::<6>(0).into_owned())
    }

    pub fn joints(&self) -> &[f64] {
        &self.data.as_slice()[self.offset()..]
    }

    pub fn as_slice(&self) -> &[f64] {
        self.data.as_slice()
    }

    pub fn as_vector(&self) -> &DVector<f64> {
        &self.data
    }

    pub fn into_vector(self) -> DVector<f64> {
        self.data
    }
}

/// Maps joint torques into generalized forces. All joints are actuated, so
/// the base rows are zero and the joint rows carry `τ`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ActuationSelector {
    pub joints: usize,
    pub floating: bool,
}

impl ActuationSelector {
    pub fn for_model(model: &MultibodyModel) -> Self {
        Self { joints: model.dof_count(), floating: model.is_floating() }
    }

    pub fn apply(&self, tau: &[f64]) -> Result<GeneralizedVector, DynamicsError> {
        check_dim("torque vector", self.joints, tau.len())?;
        Ok(GeneralizedVector::from_parts(self.floating.then(Vector6::zeros), tau))
    }

    /// Dense `B`; only for inspection.
    pub fn to_matrix(&self) -> DMatrix<f64> {
        let off = if self.floating { 6 } else { 0 };
        let mut b = DMatrix::zeros(self.joints + off, self.joints);
        for i in 0..self.joints {
            b[(off + i, i)] = 1.0;
        }
        b
    }
}

/// External wrench on a link, expressed in inertial coordinates and applied
/// at the link frame origin.
#[derive(Debug, Clone, PartialEq)]
pub struct Contact {
    pub frame: String,
    pub wrench: Wrench,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ContactSet {
    contacts: Vec<Contact>,
}

impl ContactSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, frame: impl Into<String>, wrench: Wrench) {
        self.contacts.push(Contact { frame: frame.into(), wrench });
    }

    pub fn with(mut self, frame: impl Into<String>, wrench: Wrench) -> Self {
        self.push(frame, wrench);
        self
    }

    pub fn len(&self) -> usize {
        self.contacts.len()
    }

    pub fn is_empty(&self) -> bool {
        self.contacts.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &Contact> {
        self.contacts.iter()
    }

    /// Sum of wrenches acting on `frame`.
    pub fn total_on(&self, frame: &str) -> Wrench {
        self.contacts.iter().filter(|c| c.frame == frame).fold(Wrench::zero(), |acc, c| {
            Wrench::new(acc.force + c.wrench.force, acc.moment + c.wrench.moment)
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FrameJacobian {
    pub frame: String,
    /// 6 × (n + 6) floating, 6 × n fixed; rows are (linear, angular).
    pub matrix: DMatrix<f64>,
}

fn motion_cross(v: &Vector6<f64>, m: &Vector6<f64>) -> Vector6<f64> {
    let (vl, va) = split(v);
    let (ml, ma) = split(m);
    join(&(va.cross(&ml) + vl.cross(&ma)), &va.cross(&ma))
}

fn force_cross(v: &Vector6<f64>, f: &Vector6<f64>) -> Vector6<f64> {
    let (vl, va) = split(v);
    let (fl, fa) = split(f);
    join(&va.cross(&fl), &(va.cross(&fa) + vl.cross(&fl)))
}

fn split(v: &Vector6<f64>) -> (Vec3, Vec3) {
    (v.fixed_rows::<3>(0).into(), v.fixed_rows::<3>(3).into())
}

fn join(top: &Vec3, bottom: &Vec3) -> Vector6<f64> {
    Vector6::new(top.x, top.y, top.z, bottom.x, bottom.y, bottom.z)
}

fn block(tl: Matrix3<f64>, tr: Matrix3<f64>, bl: Matrix3<f64>, br: Matrix3<f64>) -> Matrix6<f64> {
    let mut m = Matrix6::zeros();
    m.fixed_view_mut::<3, 3>(0, 0).copy_from(&tl);
    m.fixed_view_mut::<3, 3>(0, 3).copy_from(&tr);
    m.fixed_view_mut::<3, 3>(3, 0).copy_from(&bl);
    m.fixed_view_mut::<3, 3>(3, 3).copy_from(&br);
    m
}

/// Spatial inertia of a link about the inertial origin.
fn world_inertia(link: &LinkSpec, pose: &Transform) -> Matrix6<f64> {
    let c = pose.transform_point(&link.com);
    let r = pose.rotation.matrix();
    let ic = r * link.inertia * r.transpose();
    let sc = skew(&c) * link.mass;
    block(
        Matrix3::identity() * link.mass,
        -sc,
        sc,
        ic - skew(&c) * sc,
    )
}

/// Maps mixed base velocity (ṗ, ω) to the spatial velocity at the origin.
fn base_map(base_position: &Vec3) -> Matrix6<f64> {
    block(Matrix3::identity(), skew(base_position), Matrix3::zeros(), Matrix3::identity())
}

/// Maps an origin-referenced spatial velocity to the mixed twist of a frame at `point`.
fn mixed_at(point: &Vec3) -> Matrix6<f64> {
    block(Matrix3::identity(), -skew(point), Matrix3::zeros(), Matrix3::identity())
}

struct TreeKinematics {
    poses: Vec<Transform>,
    /// Motion subspace of the joint above each link, if it moves.
    subspace: Vec<Option<Vector6<f64>>>,
}

fn tree_kinematics(model: &MultibodyModel, q: &RobotConfiguration) -> Result<TreeKinematics, DynamicsError> {
    check_dim("joint positions", model.dof_count(), q.joint_positions.len())?;
    let n_links = model.links().len();
    let mut poses = Vec::with_capacity(n_links);
    let mut subspace = Vec::with_capacity(n_links);
    poses.push(q.base_pose());
    subspace.push(None);
    for link in 1..n_links {
        let joint = &model.joints()[link - 1];
        let parent = model.parent_of(link).expect("non-base link has a parent");
        let joint_frame = poses[parent].compose(&joint.origin);
        let (pose, s) = match model.link_dof(link) {
            None => (joint_frame, None),
            Some(dof) => {
                let value = q.joint_positions[dof];
                let axis = joint_frame.transform_vector(&joint.axis);
                let s = match joint.kind {
                    JointKind::Revolute => join(&joint_frame.translation.cross(&axis), &axis),
                    JointKind::Prismatic => join(&axis, &Vec3::zeros()),
                    JointKind::Fixed => unreachable!("fixed joints carry no DoF"),
                };
                (joint_frame.compose(&joint.motion(value)), Some(s))
            }
        };
        poses.push(pose);
        subspace.push(s);
    }
    Ok(TreeKinematics { poses, subspace })
}

/// World pose of every link frame, in model link order.
pub fn forward_kinematics(
    model: &MultibodyModel,
    q: &RobotConfiguration,
) -> Result<IndexMap<String, Transform>, DynamicsError> {
    let kin = tree_kinematics(model, q)?;
    Ok(model.links().iter().map(|l| l.name.clone()).zip(kin.poses).collect())
}

/// Jacobian mapping `ν` to the mixed twist `(ṗ, ω)` of a link frame.
pub fn frame_jacobian(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    frame: &str,
) -> Result<FrameJacobian, DynamicsError> {
    let link = model.link_index(frame).ok_or_else(|| DynamicsError::UnknownFrame(frame.to_string()))?;
    let kin = tree_kinematics(model, q)?;
    let x = mixed_at(&kin.poses[link].translation);
    let off = model.base_offset();
    let mut j = DMatrix::zeros(6, model.velocity_dim());
    if model.is_floating() {
        let cols = x * base_map(&q.base_position);
        j.view_mut((0, 0), (6, 6)).copy_from(&cols);
    }
    let mut cur = Some(link);
    while let Some(l) = cur {
        if let (Some(dof), Some(s)) = (model.link_dof(l), kin.subspace[l]) {
            j.column_mut(off + dof).copy_from(&(x * s));
        }
        cur = model.parent_of(l);
    }
    Ok(FrameJacobian { frame: frame.to_string(), matrix: j })
}

/// Joint-space mass matrix by the composite-rigid-body algorithm.
pub fn mass_matrix(model: &MultibodyModel, q: &RobotConfiguration) -> Result<DMatrix<f64>, DynamicsError> {
    let kin = tree_kinematics(model, q)?;
    let n_links = model.links().len();
    let off = model.base_offset();
    let mut composite: Vec<Matrix6<f64>> =
        model.links().iter().zip(&kin.poses).map(|(l, p)| world_inertia(l, p)).collect();
    for link in (1..n_links).rev() {
        let parent = model.parent_of(link).expect("non-base link has a parent");
        let child = composite[link];
        composite[parent] += child;
    }

    let mut m = DMatrix::zeros(model.velocity_dim(), model.velocity_dim());
    let sb = base_map(&q.base_position);
    if model.is_floating() {
        let mbb = sb.transpose() * composite[0] * sb;
        m.view_mut((0, 0), (6, 6)).copy_from(&mbb);
    }
    #[allow(clippy::needless_range_loop)]
    for link in 1..n_links {
        let (Some(dof), Some(s)) = (model.link_dof(link), kin.subspace[link]) else {
            continue;
        };
        let f = composite[link] * s;
        let row = off + dof;
        m[(row, row)] = s.dot(&f);
        let mut cur = model.parent_of(link);
        while let Some(anc) = cur {
            if let (Some(d), Some(sa)) = (model.link_dof(anc), kin.subspace[anc]) {
                let v = sa.dot(&f);
                m[(off + d, row)] = v;
                m[(row, off + d)] = v;
            }
            cur = model.parent_of(anc);
        }
        if model.is_floating() {
            let coupling = sb.transpose() * f;
            for k in 0..6 {
                m[(k, row)] = coupling[k];
                m[(row, k)] = coupling[k];
            }
        }
    }
    Ok(m)
}

fn check_velocity(model: &MultibodyModel, nu: &RobotVelocity) -> Result<(), DynamicsError> {
    check_dim("joint velocities", model.dof_count(), nu.joint_velocities.len())
}

fn contact_link(model: &MultibodyModel, frame: &str) -> Result<usize, DynamicsError> {
    model.link_index(frame).ok_or_else(|| DynamicsError::UnknownFrame(frame.to_string()))
}

/// Recursive Newton-Euler over the tree. `nu_dot = None` means zero acceleration.
fn rnea(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
    nu_dot: Option<&GeneralizedVector>,
    gravity: &GravityField,
    contacts: &ContactSet,
) -> Result<GeneralizedVector, DynamicsError> {
    check_velocity(model, nu)?;
    if let Some(a) = nu_dot {
        check_dim("generalized acceleration", model.velocity_dim(), a.len())?;
    }
    let kin = tree_kinematics(model, q)?;
    let n_links = model.links().len();
    let off = model.base_offset();
    let accel = |i: usize| nu_dot.map_or(0.0, |a| a.as_slice()[i]);

    let mut external = vec![Vector6::zeros(); n_links];
    for c in contacts.iter() {
        let link = contact_link(model, &c.frame)?;
        let at = kin.poses[link].translation;
        external[link] += join(&c.wrench.force, &(c.wrench.moment + at.cross(&c.wrench.force)));
    }

    let sb = base_map(&q.base_position);
    let g = gravity.acceleration();
    let mut vel = vec![Vector6::zeros(); n_links];
    let mut acc = vec![Vector6::zeros(); n_links];
    acc[0] = join(&-g, &Vec3::zeros());
    if model.is_floating() {
        let base_nu = join(&nu.base_linear, &nu.base_angular);
        let base_nu_dot = Vector6::from_fn(|k, _| accel(k));
        vel[0] = sb * base_nu;
        acc[0] += sb * base_nu_dot + join(&nu.base_linear.cross(&nu.base_angular), &Vec3::zeros());
    }
    for link in 1..n_links {
        let parent = model.parent_of(link).expect("non-base link has a parent");
        vel[link] = vel[parent];
        acc[link] = acc[parent];
        if let (Some(dof), Some(s)) = (model.link_dof(link), kin.subspace[link]) {
            let sq = s * nu.joint_velocities[dof];
            vel[link] += sq;
            acc[link] += s * accel(off + dof) + motion_cross(&vel[link], &sq);
        }
    }

    let mut force: Vec<Vector6<f64>> = (0..n_links)
        .map(|l| {
            let inertia = world_inertia(&model.links()[l], &kin.poses[l]);
            inertia * acc[l] + force_cross(&vel[l], &(inertia * vel[l])) - external[l]
        })
        .collect();
    let mut out = GeneralizedVector::zeros(model.is_floating(), model.dof_count());
    for link in (1..n_links).rev() {
        if let (Some(dof), Some(s)) = (model.link_dof(link), kin.subspace[link]) {
            out.data[off + dof] = s.dot(&force[link]);
        }
        let parent = model.parent_of(link).expect("non-base link has a parent");
        let f = force[link];
        force[parent] += f;
    }
    if model.is_floating() {
        let base = sb.transpose() * force[0];
        out.data.rows_mut(0, 6).copy_from(&base);
    }
    Ok(out)
}

/// Generalized force `M ν̇ + C ν + G − Σ Jᵀ f` required to realize `nu_dot`.
pub fn inverse_dynamics(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
    nu_dot: &GeneralizedVector,
    gravity: &GravityField,
    contacts: &ContactSet,
) -> Result<GeneralizedVector, DynamicsError> {
    rnea(model, q, nu, Some(nu_dot), gravity, contacts)
}

/// `G(q)`.
pub fn gravity_bias(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    gravity: &GravityField,
) -> Result<GeneralizedVector, DynamicsError> {
    rnea(model, q, &RobotVelocity::zeros(model.dof_count()), None, gravity, &ContactSet::new())
}

/// `C(q, ν) ν + G(q)`.
pub fn bias_forces(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
    gravity: &GravityField,
) -> Result<GeneralizedVector, DynamicsError> {
    rnea(model, q, nu, None, gravity, &ContactSet::new())
}

/// Solves `M ν̇ + C ν + G = B τ + Σ Jᵀ f` for `ν̇`.
pub fn forward_dynamics(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
    tau: &[f64],
    gravity: &GravityField,
    contacts: &ContactSet,
) -> Result<GeneralizedVector, DynamicsError> {
    let actuation = ActuationSelector::for_model(model).apply(tau)?;
    let bias = rnea(model, q, nu, None, gravity, contacts)?;
    let m = mass_matrix(model, q)?;
    let rhs = actuation.into_vector() - bias.into_vector();
    let solution = solve_spd(m, rhs)?;
    Ok(GeneralizedVector::from_vector(model.is_floating(), solution))
}

fn solve_spd(m: DMatrix<f64>, rhs: DVector<f64>) -> Result<DVector<f64>, DynamicsError> {
    if m.is_empty() {
        return Ok(rhs);
    }
    let chol = Cholesky::new(m).ok_or(DynamicsError::SingularMassMatrix { condition: f64::INFINITY })?;
    // squared ratio of Cholesky pivots: a cheap lower bound on cond(M)
    let l = chol.l_dirty();
    let diag = l.diagonal();
    let (lo, hi) = diag.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), &d| (lo.min(d), hi.max(d)));
    let condition = (hi / lo).powi(2);
    if !condition.is_finite() || condition > MAX_CONDITION {
        return Err(DynamicsError::SingularMassMatrix { condition });
    }
    Ok(chol.solve(&rhs))
}

/// `½ νᵀ M ν`, summed link by link.
pub fn kinetic_energy(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
) -> Result<f64, DynamicsError> {
    let twists = link_spatial_velocities(model, q, nu)?;
    let kin = tree_kinematics(model, q)?;
    Ok(model
        .links()
        .iter()
        .zip(&kin.poses)
        .zip(&twists)
        .map(|((l, p), v)| 0.5 * v.dot(&(world_inertia(l, p) * v)))
        .sum())
}

/// `U(q) = −Σ mᵢ gᵀ cᵢ`.
pub fn potential_energy(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    gravity: &GravityField,
) -> Result<f64, DynamicsError> {
    let kin = tree_kinematics(model, q)?;
    Ok(model
        .links()
        .iter()
        .zip(&kin.poses)
        .map(|(l, p)| -l.mass * gravity.acceleration().dot(&p.transform_point(&l.com)))
        .sum())
}

pub fn center_of_mass(model: &MultibodyModel, q: &RobotConfiguration) -> Result<Vec3, DynamicsError> {
    let kin = tree_kinematics(model, q)?;
    let total = model.total_mass();
    let weighted = model
        .links()
        .iter()
        .zip(&kin.poses)
        .fold(Vec3::zeros(), |acc, (l, p)| acc + p.transform_point(&l.com) * l.mass);
    Ok(if total > 0.0 { weighted / total } else { Vec3::zeros() })
}

/// Total linear momentum and angular momentum about the center of mass.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Momentum {
    pub linear: Vec3,
    pub angular: Vec3,
}

impl Momentum {
    pub fn to_vector(&self) -> Vector6<f64> {
        join(&self.linear, &self.angular)
    }
}

pub fn spatial_momentum(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
) -> Result<Momentum, DynamicsError> {
    let twists = link_spatial_velocities(model, q, nu)?;
    let kin = tree_kinematics(model, q)?;
    let h: Vector6<f64> = model
        .links()
        .iter()
        .zip(&kin.poses)
        .zip(&twists)
        .map(|((l, p), v)| world_inertia(l, p) * v)
        .sum();
    let (linear, about_origin) = split(&h);
    let com = center_of_mass(model, q)?;
    Ok(Momentum { linear, angular: about_origin - com.cross(&linear) })
}

fn link_spatial_velocities(
    model: &MultibodyModel,
    q: &RobotConfiguration,
    nu: &RobotVelocity,
) -> Result<Vec<Vector6<f64>>, DynamicsError> {
    check_velocity(model, nu)?;
    let kin = tree_kinematics(model, q)?;
    let mut vel = vec![Vector6::zeros(); model.links().len()];
    if model.is_floating() {
        vel[0] = base_map(&q.base_position) * join(&nu.base_linear, &nu.base_angular);
    }
    for link in 1..vel.len() {
        let parent = model.parent_of(link).expect("non-base link has a parent");
        vel[link] = vel[parent];
        if let (Some(dof), Some(s)) = (model.link_dof(link), kin.subspace[link]) {
            vel[link] += s * nu.joint_velocities[dof];
        }
    }
    Ok(vel)
}

/// Packs `ν` into a generalized vector for the model's base mode.
pub fn velocity_vector(model: &MultibodyModel, nu: &RobotVelocity) -> Result<GeneralizedVector, DynamicsError> {
    check_velocity(model, nu)?;
    let base = model.is_floating().then(|| join(&nu.base_linear, &nu.base_angular));
    Ok(GeneralizedVector::from_parts(base, &nu.joint_velocities))
}

/// Unpacks a generalized vector into the velocity triplet.
pub fn velocity_from_vector(v: &GeneralizedVector) -> RobotVelocity {
    let (base_linear, base_angular) = v.base().map_or((Vec3::zeros(), Vec3::zeros()), |b| split(&b));
    RobotVelocity { base_linear, base_angular, joint_velocities: v.joints().to_vec() }
}
