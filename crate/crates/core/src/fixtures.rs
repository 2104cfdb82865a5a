//! URDF models bundled with the crate for tests, demos and self-checks.

pub const PENDULUM: &str = include_str!("../fixtures/pendulum.urdf");
pub const DOUBLE_PENDULUM: &str = include_str!("../fixtures/double_pendulum.urdf");
pub const TWO_LINK_ARM: &str = include_str!("../fixtures/two_link_arm.urdf");
pub const FOUR_LINK_ARM: &str = include_str!("../fixtures/four_link_arm.urdf");
pub const FIVE_JOINT_TREE: &str = include_str!("../fixtures/five_joint_tree.urdf");
pub const THREE_LINK_CHAIN: &str = include_str!("../fixtures/three_link_chain.urdf");
/// Fails to parse: its inertia violates the triangle inequality.
pub const CORRUPTED_INERTIA: &str = include_str!("../fixtures/corrupted_inertia.urdf");

/// Every well-formed fixture with its name.
pub const ALL: [(&str, &str); 6] = [
    ("pendulum", PENDULUM),
    ("double_pendulum", DOUBLE_PENDULUM),
    ("two_link_arm", TWO_LINK_ARM),
    ("four_link_arm", FOUR_LINK_ARM),
    ("five_joint_tree", FIVE_JOINT_TREE),
    ("three_link_chain", THREE_LINK_CHAIN),
];
