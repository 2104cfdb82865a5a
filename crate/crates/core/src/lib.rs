//! Rigid multibody model and floating-base dynamics.
//!
//! A robot is a tree of rigid links joined by revolute, prismatic or fixed
//! joints, usually loaded from URDF. Its configuration is the triplet
//! `(base position, base rotation, joint positions)` and its velocity the
//! triplet `(base linear, base angular, joint rates)`. The [`dynamics`]
//! module evaluates every term of
//!
//! ```text
//! M(q) ν̇ + C(q, ν) ν + G(q) = B τ + Σ Jᵀ(q) f
//! ```
//!
//! for both floating-base (`n + 6` coordinates) and fixed-base (`n`) models.

pub mod dynamics;
pub mod fixtures;
pub mod model;
pub mod spatial;
pub mod urdf;

pub use dynamics::{
    bias_forces, forward_dynamics, forward_kinematics, frame_jacobian, gravity_bias, inverse_dynamics,
    mass_matrix, ActuationSelector, ContactSet, DynamicsError, FrameJacobian, GeneralizedVector, GravityField,
};
pub use model::{
    canonical_joint_order, neutral_configuration, BaseKind, JointKind, JointLimits, JointSpec, LinkSpec,
    ModelError, ModelWarning, MultibodyModel, RobotConfiguration, RobotVelocity,
};
pub use spatial::{exp_so3, skew, transform_point, Rotation, Transform, Twist, Vec3, Wrench};
pub use urdf::{load_model, parse_urdf, to_urdf};
