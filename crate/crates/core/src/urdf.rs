//! URDF subset reader and writer.
//!
//! Supported: `<robot>`, `<link>` with `<inertial>`, and `<joint>` of type
//! revolute, continuous, prismatic or fixed with `<origin>`, `<axis>` and
//! `<limit>`. Visual, collision, transmission and other elements are skipped.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::Matrix3;
use roxmltree::{Document, Node};

use crate::model::{BaseKind, JointKind, JointLimits, JointSpec, LinkSpec, ModelError, MultibodyModel};
use crate::spatial::{Rotation, Transform, Vec3};

/// Parses a URDF document. The base link is the root of the joint tree.
pub fn parse_urdf(document: &str, base: BaseKind) -> Result<MultibodyModel, ModelError> {
    let doc = Document::parse(document).map_err(|e| ModelError::MalformedXml(e.to_string()))?;
    let robot = doc.root_element();
    if !robot.has_tag_name("robot") {
        return Err(ModelError::MalformedXml(format!(
            "root element is <{}>, expected <robot>",
            robot.tag_name().name()
        )));
    }
    let name = robot.attribute("name").unwrap_or("robot");
    let mut builder = MultibodyModel::builder(name).base(base);
    for node in robot.children().filter(Node::is_element) {
        match node.tag_name().name() {
            "link" => builder = builder.link(parse_link(node)?),
            "joint" => builder = builder.joint(parse_joint(node)?),
            _ => {}
        }
    }
    builder.build()
}

/// Loads a model file, dispatching on its extension. Only URDF (`.urdf`, `.xml`)
/// is currently understood.
pub fn load_model(path: &Path, base: BaseKind) -> Result<MultibodyModel, ModelError> {
    let ext = path.extension().and_then(|e| e.to_str()).unwrap_or("").to_ascii_lowercase();
    match ext.as_str() {
        "urdf" | "xml" => {
            let text = std::fs::read_to_string(path)
                .map_err(|e| ModelError::Io(format!("{}: {e}", path.display())))?;
            parse_urdf(&text, base)
        }
        other => Err(ModelError::UnsupportedFormat(other.to_string())),
    }
}

fn required<'a>(node: Node<'a, '_>, attribute: &str) -> Result<&'a str, ModelError> {
    node.attribute(attribute).ok_or_else(|| ModelError::MissingAttribute {
        element: element_label(node),
        attribute: attribute.to_string(),
    })
}

fn element_label(node: Node) -> String {
    match node.attribute("name") {
        Some(n) => format!("{} `{n}`", node.tag_name().name()),
        None => node.tag_name().name().to_string(),
    }
}

fn number(node: Node, attribute: &str, text: &str) -> Result<f64, ModelError> {
    text.trim().parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| ModelError::InvalidNumber {
        context: format!("{}@{attribute}", element_label(node)),
        value: text.to_string(),
    })
}

fn vector(node: Node, attribute: &str, default: Vec3) -> Result<Vec3, ModelError> {
    let Some(text) = node.attribute(attribute) else {
        return Ok(default);
    };
    let parts: Vec<&str> = text.split_whitespace().collect();
    if parts.len() != 3 {
        return Err(ModelError::InvalidNumber {
            context: format!("{}@{attribute}", element_label(node)),
            value: text.to_string(),
        });
    }
    Ok(Vec3::new(
        number(node, attribute, parts[0])?,
        number(node, attribute, parts[1])?,
        number(node, attribute, parts[2])?,
    ))
}

fn child<'a, 'i>(node: Node<'a, 'i>, tag: &str) -> Option<Node<'a, 'i>> {
    node.children().find(|c| c.has_tag_name(tag))
}

fn origin(node: Node) -> Result<Transform, ModelError> {
    match child(node, "origin") {
        None => Ok(Transform::identity()),
        Some(o) => {
            let xyz = vector(o, "xyz", Vec3::zeros())?;
            let rpy = vector(o, "rpy", Vec3::zeros())?;
            Ok(Transform::new(Rotation::from_rpy(rpy.x, rpy.y, rpy.z), xyz))
        }
    }
}

fn parse_link(node: Node) -> Result<LinkSpec, ModelError> {
    let name = required(node, "name")?.to_string();
    let inertial = child(node, "inertial").ok_or_else(|| ModelError::MissingInertial(name.clone()))?;
    let mass_node = child(inertial, "mass").ok_or_else(|| ModelError::MissingAttribute {
        element: format!("link `{name}` inertial"),
        attribute: "mass".into(),
    })?;
    let mass = number(mass_node, "value", required(mass_node, "value")?)?;
    let frame = origin(inertial)?;
    let inertia = match child(inertial, "inertia") {
        None => Matrix3::zeros(),
        Some(i) => {
            let get = |a: &str| i.attribute(a).map_or(Ok(0.0), |t| number(i, a, t));
            let (ixx, ixy, ixz) = (get("ixx")?, get("ixy")?, get("ixz")?);
            let (iyy, iyz, izz) = (get("iyy")?, get("iyz")?, get("izz")?);
            Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz)
        }
    };
    // rotate into link-frame axes; the translation becomes the com
    let r = frame.rotation.matrix();
    let inertia = r * inertia * r.transpose();
    let inertia = (inertia + inertia.transpose()) * 0.5;
    Ok(LinkSpec { name, mass, com: frame.translation, inertia })
}

fn parse_joint(node: Node) -> Result<JointSpec, ModelError> {
    let name = required(node, "name")?.to_string();
    let type_name = required(node, "type")?;
    let kind = match type_name {
        "revolute" | "continuous" => JointKind::Revolute,
        "prismatic" => JointKind::Prismatic,
        "fixed" => JointKind::Fixed,
        other => {
            return Err(ModelError::UnsupportedJointType { name, kind: other.to_string() });
        }
    };
    let link_ref = |tag: &str| -> Result<String, ModelError> {
        let c = child(node, tag).ok_or_else(|| ModelError::MissingAttribute {
            element: format!("joint `{name}`"),
            attribute: tag.to_string(),
        })?;
        Ok(required(c, "link")?.to_string())
    };
    let parent = link_ref("parent")?;
    let child_link = link_ref("child")?;
    let axis = match child(node, "axis") {
        Some(a) => vector(a, "xyz", Vec3::x())?,
        None => Vec3::x(),
    };
    let axis = if kind.is_fixed() {
        axis
    } else {
        let norm = axis.norm();
        if norm == 0.0 {
            return Err(ModelError::InvalidJoint { joint: name, reason: "zero axis".into() });
        }
        axis / norm
    };
    let limits = match child(node, "limit") {
        None => None,
        Some(l) => {
            let get = |a: &str| l.attribute(a).map(|t| number(l, a, t)).transpose();
            let lower = get("lower")?;
            let upper = get("upper")?;
            let effort = get("effort")?;
            let position = if type_name == "continuous" || (lower.is_none() && upper.is_none()) {
                None
            } else {
                Some((lower.unwrap_or(0.0), upper.unwrap_or(0.0)))
            };
            Some(JointLimits { position, effort })
        }
    };
    Ok(JointSpec { name, kind, parent, child: child_link, origin: origin(node)?, axis, limits })
}

/// Writes the model back as the supported URDF subset.
pub fn to_urdf(model: &MultibodyModel) -> String {
    let mut out = String::new();
    let v = |x: &Vec3| format!("{:?} {:?} {:?}", x.x, x.y, x.z);
    let _ = writeln!(out, "<?xml version=\"1.0\"?>");
    let _ = writeln!(out, "<robot name=\"{}\">", escape(model.name()));
    for link in model.links() {
        let i = &link.inertia;
        let _ = writeln!(out, "  <link name=\"{}\">", escape(&link.name));
        let _ = writeln!(out, "    <inertial>");
        let _ = writeln!(out, "      <origin xyz=\"{}\" rpy=\"0 0 0\"/>", v(&link.com));
        let _ = writeln!(out, "      <mass value=\"{:?}\"/>", link.mass);
        let _ = writeln!(
            out,
            "      <inertia ixx=\"{:?}\" ixy=\"{:?}\" ixz=\"{:?}\" iyy=\"{:?}\" iyz=\"{:?}\" izz=\"{:?}\"/>",
            i[(0, 0)],
            i[(0, 1)],
            i[(0, 2)],
            i[(1, 1)],
            i[(1, 2)],
            i[(2, 2)]
        );
        let _ = writeln!(out, "    </inertial>");
        let _ = writeln!(out, "  </link>");
    }
    for joint in model.joints() {
        let type_name = match (joint.kind, joint.limits.and_then(|l| l.position)) {
            (JointKind::Revolute, None) => "continuous",
            (JointKind::Revolute, Some(_)) => "revolute",
            (JointKind::Prismatic, _) => "prismatic",
            (JointKind::Fixed, _) => "fixed",
        };
        let (roll, pitch, yaw) = joint.origin.rotation.to_rpy();
        let _ = writeln!(out, "  <joint name=\"{}\" type=\"{type_name}\">", escape(&joint.name));
        let _ = writeln!(out, "    <parent link=\"{}\"/>", escape(&joint.parent));
        let _ = writeln!(out, "    <child link=\"{}\"/>", escape(&joint.child));
        let _ = writeln!(
            out,
            "    <origin xyz=\"{}\" rpy=\"{:?} {:?} {:?}\"/>",
            v(&joint.origin.translation),
            roll,
            pitch,
            yaw
        );
        let _ = writeln!(out, "    <axis xyz=\"{}\"/>", v(&joint.axis));
        if let Some(limits) = joint.limits {
            let mut attrs = String::new();
            if let Some((lo, hi)) = limits.position {
                let _ = write!(attrs, " lower=\"{lo:?}\" upper=\"{hi:?}\"");
            }
            if let Some(e) = limits.effort {
                let _ = write!(attrs, " effort=\"{e:?}\"");
            }
            let _ = writeln!(out, "    <limit{attrs}/>");
        }
        let _ = writeln!(out, "  </joint>");
    }
    out.push_str("</robot>\n");
    out
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('"', "&quot;").replace('<', "&lt;").replace('>', "&gt;")
}
