//! Kinematic tree of rigid links connected by one-DoF joints.

use std::collections::{HashMap, HashSet};

use nalgebra::{Matrix3, SymmetricEigen};
use thiserror::Error;

use crate::spatial::{Rotation, SpatialError, Transform, Vec3, ROTATION_TOLERANCE};

const AXIS_TOLERANCE: f64 = 1e-9;
const INERTIA_SYMMETRY_TOLERANCE: f64 = 1e-12;
const INERTIA_TRIANGLE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("malformed XML: {0}")]
    MalformedXml(String),
    #[error("link `{0}` has no <inertial> block")]
    MissingInertial(String),
    #[error("kinematic graph is not a tree: {0}")]
    NonTreeTopology(String),
    #[error("joint `{name}` has unsupported type `{kind}`")]
    UnsupportedJointType { name: String, kind: String },
    #[error("`{element}` is missing attribute or child `{attribute}`")]
    MissingAttribute { element: String, attribute: String },
    #[error("invalid number `{value}` in `{context}`")]
    InvalidNumber { context: String, value: String },
    #[error("duplicate {what} name `{name}`")]
    DuplicateName { what: &'static str, name: String },
    #[error("joint `{joint}` references unknown link `{link}`")]
    UnknownLink { joint: String, link: String },
    #[error("link `{link}` has invalid inertial data: {reason}")]
    InvalidInertia { link: String, reason: String },
    #[error("joint `{joint}` is invalid: {reason}")]
    InvalidJoint { joint: String, reason: String },
    #[error("unsupported model format `{0}`")]
    UnsupportedFormat(String),
    #[error("cannot read model file: {0}")]
    Io(String),
}

/// Inertial properties of one rigid link.
#[derive(Debug, Clone, PartialEq)]
pub struct LinkSpec {
    pub name: String,
    /// kg
    pub mass: f64,
    /// Center of mass in the link frame (m).
    pub com: Vec3,
    /// Rotational inertia about the center of mass, link-frame axes (kg m²).
    pub inertia: Matrix3<f64>,
}

impl LinkSpec {
    pub fn new(name: impl Into<String>, mass: f64, com: Vec3, inertia: Matrix3<f64>) -> Self {
        Self { name: name.into(), mass, com, inertia }
    }

    /// Point mass at `com`.
    pub fn point_mass(name: impl Into<String>, mass: f64, com: Vec3) -> Self {
        Self::new(name, mass, com, Matrix3::zeros())
    }

    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::InvalidInertia { link: self.name.clone(), reason };
        if !self.mass.is_finite() || self.mass < 0.0 {
            return Err(bad(format!("mass {} must be finite and non-negative", self.mass)));
        }
        if self.com.iter().chain(self.inertia.iter()).any(|v| !v.is_finite()) {
            return Err(bad("non-finite value".into()));
        }
        let asym = (self.inertia - self.inertia.transpose()).amax();
        if asym > INERTIA_SYMMETRY_TOLERANCE {
            return Err(bad(format!("inertia not symmetric (error {asym:e})")));
        }
        let scale = self.inertia.amax().max(1.0);
        let eig = SymmetricEigen::new(self.inertia).eigenvalues;
        let mut p = [eig[0], eig[1], eig[2]];
        p.sort_by(f64::total_cmp);
        if p[0] < -INERTIA_TRIANGLE_TOLERANCE * scale {
            return Err(bad(format!("inertia not positive semi-definite (eigenvalue {})", p[0])));
        }
        // smallest two must dominate the largest
        if p[0] + p[1] < p[2] - INERTIA_TRIANGLE_TOLERANCE * scale {
            return Err(bad(format!(
                "principal moments {:?} violate the triangle inequality",
                p
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

impl JointKind {
    pub fn is_fixed(self) -> bool {
        self == JointKind::Fixed
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointLimits {
    /// Position bounds (rad or m).
    pub position: Option<(f64, f64)>,
    /// Maximum absolute effort (N m or N).
    pub effort: Option<f64>,
}

impl JointLimits {
    pub fn clamp_position(&self, value: f64) -> f64 {
        match self.position {
            Some((lo, hi)) => value.clamp(lo, hi),
            None => value,
        }
    }

    pub fn clamp_effort(&self, value: f64) -> f64 {
        match self.effort {
            Some(max) => value.clamp(-max, max),
            None => value,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointSpec {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Parent link frame to joint frame.
    pub origin: Transform,
    /// Unit axis in the joint frame. Ignored for fixed joints.
    pub axis: Vec3,
    pub limits: Option<JointLimits>,
}

impl JointSpec {
    pub fn new(
        name: impl Into<String>,
        kind: JointKind,
        parent: impl Into<String>,
        child: impl Into<String>,
    ) -> Self {
        Self {
            name: name.into(),
            kind,
            parent: parent.into(),
            child: child.into(),
            origin: Transform::identity(),
            axis: Vec3::z(),
            limits: None,
        }
    }

    pub fn with_origin(mut self, origin: Transform) -> Self {
        self.origin = origin;
        self
    }

    pub fn with_axis(mut self, axis: Vec3) -> Self {
        self.axis = axis;
        self
    }

    pub fn with_limits(mut self, limits: JointLimits) -> Self {
        self.limits = Some(limits);
        self
    }

    /// Joint frame relative to the joint's zero position for displacement `q`.
    pub fn motion(&self, q: f64) -> Transform {
        match self.kind {
            JointKind::Revolute => Transform::from_rotation(Rotation::from_axis_angle(&self.axis, q)),
            JointKind::Prismatic => Transform::from_translation(self.axis * q),
            JointKind::Fixed => Transform::identity(),
        }
    }

    // Negated comparisons also reject NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<(), ModelError> {
        let bad = |reason: String| ModelError::InvalidJoint { joint: self.name.clone(), reason };
        if !self.kind.is_fixed() && (self.axis.norm() - 1.0).abs() > AXIS_TOLERANCE {
            return Err(bad(format!("axis norm {} is not 1", self.axis.norm())));
        }
        if self.origin.rotation.orthonormality_error() > ROTATION_TOLERANCE {
            return Err(bad("origin rotation is not orthonormal".into()));
        }
        if let Some(JointLimits { position: Some((lo, hi)), .. }) = self.limits {
            if !(lo <= hi) {
                return Err(bad(format!("lower limit {lo} exceeds upper limit {hi}")));
            }
        }
        if let Some(JointLimits { effort: Some(e), .. }) = self.limits {
            if !(e >= 0.0) {
                return Err(bad(format!("effort limit {e} must be non-negative")));
            }
        }
        Ok(())
    }
}

/// Whether the base link moves freely (n + 6 DoF) or is welded to the world (n DoF).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum BaseKind {
    #[default]
    Fixed,
    Floating,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ModelWarning {
    /// A terminal link behind a moving joint carries no mass.
    ZeroMassTerminalLink { link: String, joint: String },
}

/// Immutable multibody tree.
///
/// Links are stored in depth-first pre-order from the base link, visiting
/// children in the order their joints appear in the source document. Every
/// link except the base has exactly one parent joint, stored at the same
/// position in `joints` shifted by one.
#[derive(Debug, Clone, PartialEq)]
pub struct MultibodyModel {
    name: String,
    base: BaseKind,
    links: Vec<LinkSpec>,
    /// `joints[i]` connects `parent_link[i + 1]` to link `i + 1`.
    joints: Vec<JointSpec>,
    parent_link: Vec<Option<usize>>,
    /// DoF index of the joint above each link, if it moves.
    link_dof: Vec<Option<usize>>,
    /// Link index driven by each DoF, canonical order.
    dof_link: Vec<usize>,
    warnings: Vec<ModelWarning>,
}

impl MultibodyModel {
    pub fn builder(name: impl Into<String>) -> ModelBuilder {
        ModelBuilder::new(name)
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn base_kind(&self) -> BaseKind {
        self.base
    }

    pub fn is_floating(&self) -> bool {
        self.base == BaseKind::Floating
    }

    /// Same tree with a different base mode.
    pub fn with_base(mut self, base: BaseKind) -> Self {
        self.base = base;
        self
    }

    /// Number of actuated joints `n`.
    pub fn dof_count(&self) -> usize {
        self.dof_link.len()
    }

    /// Size of the generalized velocity: `n + 6` floating, `n` fixed.
    pub fn velocity_dim(&self) -> usize {
        self.dof_count() + self.base_offset()
    }

    /// Index of the first joint coordinate inside generalized vectors.
    pub fn base_offset(&self) -> usize {
        if self.is_floating() {
            6
        } else {
            0
        }
    }

    pub fn base_link(&self) -> &LinkSpec {
        &self.links[0]
    }

    pub fn links(&self) -> &[LinkSpec] {
        &self.links
    }

    pub fn joints(&self) -> &[JointSpec] {
        &self.joints
    }

    pub fn warnings(&self) -> &[ModelWarning] {
        &self.warnings
    }

    pub fn total_mass(&self) -> f64 {
        self.links.iter().map(|l| l.mass).sum()
    }

    pub fn link_index(&self, name: &str) -> Option<usize> {
        self.links.iter().position(|l| l.name == name)
    }

    pub fn parent_of(&self, link: usize) -> Option<usize> {
        self.parent_link[link]
    }

    /// Joint above `link`; `None` for the base.
    pub fn parent_joint(&self, link: usize) -> Option<&JointSpec> {
        link.checked_sub(1).map(|j| &self.joints[j])
    }

    pub fn link_dof(&self, link: usize) -> Option<usize> {
        self.link_dof[link]
    }

    pub fn dof_link(&self, dof: usize) -> usize {
        self.dof_link[dof]
    }

    /// Joint driven by DoF `dof`.
    pub fn dof_joint(&self, dof: usize) -> &JointSpec {
        &self.joints[self.dof_link[dof] - 1]
    }

    /// DoF index of a moving joint.
    pub fn dof_index(&self, joint_name: &str) -> Option<usize> {
        (0..self.dof_count()).find(|&d| self.dof_joint(d).name == joint_name)
    }

    pub fn joint_limits(&self, dof: usize) -> Option<JointLimits> {
        self.dof_joint(dof).limits
    }

    /// True when `ancestor` lies on the path from the base to `link` (inclusive).
    pub fn is_ancestor(&self, ancestor: usize, link: usize) -> bool {
        let mut cur = Some(link);
        while let Some(l) = cur {
            if l == ancestor {
                return true;
            }
            cur = self.parent_link[l];
        }
        false
    }

    pub fn canonical_joint_order(&self) -> Vec<String> {
        canonical_joint_order(self)
    }

    pub fn neutral_configuration(&self) -> RobotConfiguration {
        neutral_configuration(self)
    }
}

/// Moving joints in depth-first order from the base, children in document order.
pub fn canonical_joint_order(model: &MultibodyModel) -> Vec<String> {
    (0..model.dof_count()).map(|d| model.dof_joint(d).name.clone()).collect()
}

/// Base at the origin, identity orientation, joints at zero clamped into their limits.
pub fn neutral_configuration(model: &MultibodyModel) -> RobotConfiguration {
    let joint_positions = (0..model.dof_count())
        .map(|d| model.joint_limits(d).map_or(0.0, |l| l.clamp_position(0.0)))
        .collect();
    RobotConfiguration {
        base_position: Vec3::zeros(),
        base_rotation: Rotation::identity(),
        joint_positions,
    }
}

/// Builds a [`MultibodyModel`] from links and joints in document order.
#[derive(Debug, Clone)]
pub struct ModelBuilder {
    name: String,
    base: BaseKind,
    links: Vec<LinkSpec>,
    joints: Vec<JointSpec>,
}

impl ModelBuilder {
    pub fn new(name: impl Into<String>) -> Self {
        Self { name: name.into(), base: BaseKind::Fixed, links: Vec::new(), joints: Vec::new() }
    }

    pub fn base(mut self, base: BaseKind) -> Self {
        self.base = base;
        self
    }

    pub fn link(mut self, link: LinkSpec) -> Self {
        self.links.push(link);
        self
    }

    pub fn joint(mut self, joint: JointSpec) -> Self {
        self.joints.push(joint);
        self
    }

    pub fn build(self) -> Result<MultibodyModel, ModelError> {
        let mut by_name = HashMap::new();
        for (i, link) in self.links.iter().enumerate() {
            link.validate()?;
            if by_name.insert(link.name.as_str(), i).is_some() {
                return Err(ModelError::DuplicateName { what: "link", name: link.name.clone() });
            }
        }
        if self.links.is_empty() {
            return Err(ModelError::NonTreeTopology("model has no links".into()));
        }
        let mut joint_names = HashSet::new();
        let mut parent_joint: Vec<Option<usize>> = vec![None; self.links.len()];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); self.links.len()];
        for (j, joint) in self.joints.iter().enumerate() {
            joint.validate()?;
            if !joint_names.insert(joint.name.as_str()) {
                return Err(ModelError::DuplicateName { what: "joint", name: joint.name.clone() });
            }
            let lookup = |link: &str| {
                by_name.get(link).copied().ok_or_else(|| ModelError::UnknownLink {
                    joint: joint.name.clone(),
                    link: link.to_string(),
                })
            };
            let parent = lookup(&joint.parent)?;
            let child = lookup(&joint.child)?;
            if let Some(other) = parent_joint[child] {
                return Err(ModelError::NonTreeTopology(format!(
                    "link `{}` is the child of both `{}` and `{}`",
                    joint.child, self.joints[other].name, joint.name
                )));
            }
            parent_joint[child] = Some(j);
            children[parent].push(j);
        }
        let roots: Vec<usize> = (0..self.links.len()).filter(|&l| parent_joint[l].is_none()).collect();
        let root = match roots.as_slice() {
            [r] => *r,
            [] => return Err(ModelError::NonTreeTopology("no root link (kinematic loop)".into())),
            many => {
                let names: Vec<_> = many.iter().map(|&l| self.links[l].name.as_str()).collect();
                return Err(ModelError::NonTreeTopology(format!(
                    "multiple root links: {}",
                    names.join(", ")
                )));
            }
        };

        // depth-first pre-order, children in document order
        let mut order = Vec::with_capacity(self.links.len());
        let mut new_index = vec![usize::MAX; self.links.len()];
        let mut stack = vec![root];
        while let Some(l) = stack.pop() {
            new_index[l] = order.len();
            order.push(l);
            for &j in children[l].iter().rev() {
                let child = by_name[self.joints[j].child.as_str()];
                stack.push(child);
            }
        }
        if order.len() != self.links.len() {
            return Err(ModelError::NonTreeTopology(
                "some links are not reachable from the root (kinematic loop)".into(),
            ));
        }

        let mut links = Vec::with_capacity(order.len());
        let mut joints = Vec::with_capacity(order.len() - 1);
        let mut parent_link = Vec::with_capacity(order.len());
        let mut link_dof = Vec::with_capacity(order.len());
        let mut dof_link = Vec::new();
        for (new, &old) in order.iter().enumerate() {
            links.push(self.links[old].clone());
            match parent_joint[old] {
                None => {
                    parent_link.push(None);
                    link_dof.push(None);
                }
                Some(j) => {
                    let joint = self.joints[j].clone();
                    parent_link.push(Some(new_index[by_name[joint.parent.as_str()]]));
                    if joint.kind.is_fixed() {
                        link_dof.push(None);
                    } else {
                        link_dof.push(Some(dof_link.len()));
                        dof_link.push(new);
                    }
                    joints.push(joint);
                }
            }
        }

        let mut has_children = vec![false; links.len()];
        for p in parent_link.iter().flatten() {
            has_children[*p] = true;
        }
        let warnings = (1..links.len())
            .filter(|&l| !has_children[l] && links[l].mass == 0.0 && link_dof[l].is_some())
            .map(|l| ModelWarning::ZeroMassTerminalLink {
                link: links[l].name.clone(),
                joint: joints[l - 1].name.clone(),
            })
            .collect();

        Ok(MultibodyModel {
            name: self.name,
            base: self.base,
            links,
            joints,
            parent_link,
            link_dof,
            dof_link,
            warnings,
        })
    }
}

/// Configuration `q = (base position, base rotation, joint positions)`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotConfiguration {
    pub base_position: Vec3,
    pub base_rotation: Rotation,
    pub joint_positions: Vec<f64>,
}

impl RobotConfiguration {
    /// Base at the origin with identity orientation.
    pub fn from_joints(joint_positions: Vec<f64>) -> Self {
        Self { base_position: Vec3::zeros(), base_rotation: Rotation::identity(), joint_positions }
    }

    pub fn base_pose(&self) -> Transform {
        Transform::new(self.base_rotation, self.base_position)
    }

    /// Checks the rotation invariants and that every value is finite.
    pub fn validate(&self) -> Result<(), SpatialError> {
        Rotation::try_from_matrix(*self.base_rotation.matrix())?;
        if self.base_position.iter().chain(self.joint_positions.iter()).any(|v| !v.is_finite()) {
            return Err(SpatialError::NonFinite("configuration"));
        }
        Ok(())
    }

    /// Follows `velocity` for `dt` seconds: positions advance linearly and the
    /// base rotation by `exp(S(ω) dt) R`.
    pub fn integrate(&self, velocity: &RobotVelocity, dt: f64) -> RobotConfiguration {
        RobotConfiguration {
            base_position: self.base_position + velocity.base_linear * dt,
            base_rotation: crate::spatial::exp_so3(&velocity.base_angular, dt) * self.base_rotation,
            joint_positions: self
                .joint_positions
                .iter()
                .zip(&velocity.joint_velocities)
                .map(|(q, dq)| q + dq * dt)
                .collect(),
        }
    }
}

/// Velocity `ν = (base linear, base angular, joint rates)` with `Ṙ = S(ω) R`.
#[derive(Debug, Clone, PartialEq)]
pub struct RobotVelocity {
    pub base_linear: Vec3,
    pub base_angular: Vec3,
    pub joint_velocities: Vec<f64>,
}

impl RobotVelocity {
    pub fn zeros(n: usize) -> Self {
        Self { base_linear: Vec3::zeros(), base_angular: Vec3::zeros(), joint_velocities: vec![0.0; n] }
    }

    pub fn from_joints(joint_velocities: Vec<f64>) -> Self {
        Self { base_linear: Vec3::zeros(), base_angular: Vec3::zeros(), joint_velocities }
    }
}
