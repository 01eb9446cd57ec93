//! Robot description file loading.
//!
//! The file is TOML with top-level keys `links`, `joints`, `end_effectors`,
//! `collision_primitives`, `collision_pairs` and an optional `nominal`
//! section. All quantities are SI (m, kg, rad).

use std::collections::HashMap;
use std::path::Path;

use nalgebra::{DVector, Isometry3, Matrix3, Translation3, Unit, UnitQuaternion, Vector3};
use serde::Deserialize;

use super::{
    ActuatorClass, CollisionPrimitive, CollisionShape, EeKind, EndEffector, Joint, JointKind,
    Link, ModelError, RobotDescription, WORLD,
};
use crate::math::rotation_zyx;

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawDescription {
    #[serde(default)]
    name: String,
    links: Vec<RawLink>,
    joints: Vec<RawJoint>,
    #[serde(default)]
    end_effectors: Vec<RawEndEffector>,
    #[serde(default)]
    collision_primitives: Vec<RawPrimitive>,
    #[serde(default)]
    collision_pairs: Vec<RawPair>,
    #[serde(default)]
    nominal: Option<RawNominal>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLink {
    name: String,
    mass: f64,
    #[serde(default)]
    com: [f64; 3],
    /// [ixx, iyy, izz, ixy, ixz, iyz] about the CoM in the link frame.
    inertia: [f64; 6],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawJoint {
    name: String,
    #[serde(rename = "type")]
    kind: String,
    parent: String,
    child: String,
    #[serde(default)]
    origin: [f64; 3],
    /// Fixed joint-frame rotation as (roll, pitch, yaw) applied ZYX.
    #[serde(default)]
    rpy: [f64; 3],
    #[serde(default = "default_axis")]
    axis: [f64; 3],
    limits: Option<[f64; 2]>,
    #[serde(default)]
    actuator: Option<String>,
}

fn default_axis() -> [f64; 3] {
    [0.0, 0.0, 1.0]
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawEndEffector {
    name: String,
    kind: String,
    link: String,
    #[serde(default)]
    offset: [f64; 3],
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPrimitive {
    link: String,
    #[serde(rename = "type")]
    kind: String,
    #[serde(default)]
    center: [f64; 3],
    #[serde(default)]
    a: [f64; 3],
    #[serde(default)]
    b: [f64; 3],
    radius: f64,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawPair {
    a: String,
    b: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawNominal {
    #[serde(default)]
    base_pose: [f64; 6],
    #[serde(default)]
    joints: HashMap<String, f64>,
}

fn schema_err(path: &str, message: impl Into<String>) -> ModelError {
    ModelError::Schema {
        path: path.to_string(),
        message: message.into(),
    }
}

/// Load and validate a robot description from a file path.
pub fn load_robot_description(path: impl AsRef<Path>) -> Result<RobotDescription, ModelError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_robot_description(&text)
}

/// Parse and validate a robot description from TOML text.
pub fn parse_robot_description(text: &str) -> Result<RobotDescription, ModelError> {
    let raw: RawDescription =
        toml::from_str(text).map_err(|e| schema_err("<document>", e.to_string()))?;
    build(raw)
}

fn vec3(v: [f64; 3]) -> Vector3<f64> {
    Vector3::new(v[0], v[1], v[2])
}

fn build(raw: RawDescription) -> Result<RobotDescription, ModelError> {
    let mut link_index: HashMap<String, usize> = HashMap::new();
    let mut links = Vec::with_capacity(raw.links.len());
    for (i, l) in raw.links.iter().enumerate() {
        if link_index.insert(l.name.clone(), i).is_some() {
            return Err(schema_err(
                &format!("links[{i}].name"),
                format!("duplicate link name '{}'", l.name),
            ));
        }
        let [ixx, iyy, izz, ixy, ixz, iyz] = l.inertia;
        links.push(Link {
            name: l.name.clone(),
            mass: l.mass,
            com: vec3(l.com),
            inertia: Matrix3::new(ixx, ixy, ixz, ixy, iyy, iyz, ixz, iyz, izz),
        });
    }

    let mut base_link = None;
    let mut floating_count = 0usize;
    let mut joints = Vec::new();
    for (i, j) in raw.joints.iter().enumerate() {
        let field = format!("joints[{i}] ('{}')", j.name);
        match j.kind.as_str() {
            "floating-base" => {
                floating_count += 1;
                if j.parent != WORLD {
                    return Err(schema_err(
                        &format!("{field}.parent"),
                        "floating-base joint must have parent 'world'",
                    ));
                }
                let child = *link_index.get(&j.child).ok_or_else(|| {
                    ModelError::UnknownLink {
                        joint: j.name.clone(),
                        link: j.child.clone(),
                    }
                })?;
                base_link = Some(child);
            }
            "revolute" | "continuous-wheel" => {
                let parent =
                    *link_index
                        .get(&j.parent)
                        .ok_or_else(|| ModelError::UnknownLink {
                            joint: j.name.clone(),
                            link: j.parent.clone(),
                        })?;
                let child = *link_index
                    .get(&j.child)
                    .ok_or_else(|| ModelError::UnknownLink {
                        joint: j.name.clone(),
                        link: j.child.clone(),
                    })?;
                let kind = if j.kind == "revolute" {
                    JointKind::Revolute
                } else {
                    JointKind::Wheel
                };
                let axis = vec3(j.axis);
                if axis.norm() < 1e-12 {
                    return Err(schema_err(&format!("{field}.axis"), "axis must be nonzero"));
                }
                let actuator = match &j.actuator {
                    Some(s) => ActuatorClass::parse(s).ok_or_else(|| {
                        schema_err(
                            &format!("{field}.actuator"),
                            format!("unknown actuator class '{s}'"),
                        )
                    })?,
                    None => {
                        if kind == JointKind::Wheel {
                            ActuatorClass::Wheel
                        } else {
                            ActuatorClass::Medium
                        }
                    }
                };
                let limits = match (kind, j.limits) {
                    (JointKind::Wheel, _) => None,
                    (JointKind::Revolute, Some([lo, hi])) => {
                        if lo >= hi {
                            return Err(schema_err(
                                &format!("{field}.limits"),
                                format!("lower limit {lo} must be below upper limit {hi}"),
                            ));
                        }
                        Some((lo, hi))
                    }
                    (JointKind::Revolute, None) => None,
                };
                let rot = rotation_zyx(j.rpy[2], j.rpy[1], j.rpy[0]);
                joints.push(Joint {
                    name: j.name.clone(),
                    kind,
                    parent,
                    child,
                    origin: Isometry3::from_parts(
                        Translation3::from(vec3(j.origin)),
                        UnitQuaternion::from_rotation_matrix(&rot),
                    ),
                    axis: Unit::new_normalize(axis),
                    limits,
                    actuator,
                });
            }
            other => {
                return Err(schema_err(
                    &format!("{field}.type"),
                    format!("unknown joint type '{other}'"),
                ));
            }
        }
    }
    if floating_count != 1 {
        return Err(ModelError::FloatingBaseCount(floating_count));
    }
    let base_link = base_link.expect("floating base present");

    // End effectors: legs first, then arms, preserving file order within kind.
    let mut end_effectors = Vec::new();
    for kind_pass in [EeKind::Leg, EeKind::Arm] {
        for (i, e) in raw.end_effectors.iter().enumerate() {
            let kind = match e.kind.as_str() {
                "leg" => EeKind::Leg,
                "arm" => EeKind::Arm,
                other => {
                    return Err(schema_err(
                        &format!("end_effectors[{i}].kind"),
                        format!("unknown end-effector kind '{other}'"),
                    ));
                }
            };
            if kind != kind_pass {
                continue;
            }
            let link = *link_index
                .get(&e.link)
                .ok_or_else(|| ModelError::BadEndEffector(e.name.clone(), format!(
                    "references undeclared link '{}'", e.link
                )))?;
            end_effectors.push(EndEffector {
                name: e.name.clone(),
                kind,
                link,
                offset: vec3(e.offset),
            });
        }
    }

    let mut primitive_of_link = vec![None; links.len()];
    let mut collision_primitives = Vec::new();
    for (i, p) in raw.collision_primitives.iter().enumerate() {
        let link = *link_index.get(&p.link).ok_or_else(|| {
            schema_err(
                &format!("collision_primitives[{i}].link"),
                format!("undeclared link '{}'", p.link),
            )
        })?;
        if p.radius <= 0.0 {
            return Err(schema_err(
                &format!("collision_primitives[{i}].radius"),
                "radius must be positive",
            ));
        }
        let shape = match p.kind.as_str() {
            "sphere" => CollisionShape::Sphere {
                center: vec3(p.center),
                radius: p.radius,
            },
            "capsule" => CollisionShape::Capsule {
                a: vec3(p.a),
                b: vec3(p.b),
                radius: p.radius,
            },
            other => {
                return Err(schema_err(
                    &format!("collision_primitives[{i}].type"),
                    format!("unknown primitive type '{other}'"),
                ));
            }
        };
        primitive_of_link[link] = Some(collision_primitives.len());
        collision_primitives.push(CollisionPrimitive { link, shape });
    }

    let mut collision_pairs = Vec::new();
    for (i, pair) in raw.collision_pairs.iter().enumerate() {
        let a = *link_index.get(&pair.a).ok_or_else(|| {
            schema_err(
                &format!("collision_pairs[{i}].a"),
                format!("undeclared link '{}'", pair.a),
            )
        })?;
        let b = *link_index.get(&pair.b).ok_or_else(|| {
            schema_err(
                &format!("collision_pairs[{i}].b"),
                format!("undeclared link '{}'", pair.b),
            )
        })?;
        collision_pairs.push((a, b));
    }

    // Topological joint order (parents before children).
    let mut parent_joint = vec![None; links.len()];
    for (ji, j) in joints.iter().enumerate() {
        parent_joint[j.child] = Some(ji);
    }
    let mut joint_order = Vec::with_capacity(joints.len());
    let mut placed = vec![false; links.len()];
    placed[base_link] = true;
    let mut progress = true;
    while joint_order.len() < joints.len() && progress {
        progress = false;
        for (ji, j) in joints.iter().enumerate() {
            if !placed[j.child] && placed[j.parent] {
                joint_order.push(ji);
                placed[j.child] = true;
                progress = true;
            }
        }
    }
    if joint_order.len() < joints.len() {
        let stuck = joints
            .iter()
            .find(|j| !placed[j.child])
            .map(|j| j.name.clone())
            .unwrap_or_default();
        return Err(ModelError::BadTree(format!(
            "cycle or disconnected subtree involving joint '{stuck}'"
        )));
    }

    let total_mass = links.iter().map(|l| l.mass).sum();

    let n_a = joints.len();
    let (nominal_base, nominal_joints) = match raw.nominal {
        Some(nom) => {
            let mut qj = DVector::zeros(n_a);
            for (name, value) in &nom.joints {
                let idx = joints.iter().position(|j| &j.name == name).ok_or_else(|| {
                    schema_err("nominal.joints", format!("unknown joint '{name}'"))
                })?;
                qj[idx] = *value;
            }
            (nom.base_pose, qj)
        }
        None => ([0.0; 6], DVector::zeros(n_a)),
    };

    let desc = RobotDescription {
        name: raw.name,
        links,
        joints,
        base_link,
        end_effectors,
        collision_primitives,
        collision_pairs,
        nominal_base,
        nominal_joints,
        total_mass,
        parent_joint,
        joint_order,
        primitive_of_link,
    };
    desc.validate()?;
    Ok(desc)
}

#[cfg(test)]
mod tests {
    use super::*;

    const PENDULUM: &str = r#"
name = "pendulum"

[[links]]
name = "base"
mass = 1.0
inertia = [0.01, 0.01, 0.01, 0.0, 0.0, 0.0]

[[links]]
name = "rod"
mass = 0.5
com = [0.0, 0.0, -0.25]
inertia = [0.02, 0.02, 0.001, 0.0, 0.0, 0.0]

[[joints]]
name = "float"
type = "floating-base"
parent = "world"
child = "base"

[[joints]]
name = "pivot"
type = "revolute"
parent = "base"
child = "rod"
axis = [0.0, 1.0, 0.0]
limits = [-3.0, 3.0]
actuator = "small"
"#;

    #[test]
    fn parses_minimal_pendulum() {
        let desc = parse_robot_description(PENDULUM).unwrap();
        assert_eq!(desc.n_actuated(), 1);
        assert_eq!(desc.links.len(), 2);
        assert_eq!(desc.n_ee(), 0);
        assert!((desc.total_mass - 1.5).abs() < 1e-12);
    }

    #[test]
    fn unknown_parent_link_names_the_joint() {
        let bad = PENDULUM.replace("parent = \"base\"", "parent = \"missing\"");
        let err = parse_robot_description(&bad).unwrap_err();
        match err {
            ModelError::UnknownLink { joint, link } => {
                assert_eq!(joint, "pivot");
                assert_eq!(link, "missing");
            }
            other => panic!("expected UnknownLink, got {other}"),
        }
    }

    #[test]
    fn rejects_nonpositive_mass() {
        let bad = PENDULUM.replace("mass = 0.5", "mass = -0.5");
        assert!(matches!(
            parse_robot_description(&bad).unwrap_err(),
            ModelError::NonPositive { .. }
        ));
    }

    #[test]
    fn rejects_two_floating_bases() {
        let extra = format!(
            "{PENDULUM}\n[[joints]]\nname = \"float2\"\ntype = \"floating-base\"\nparent = \"world\"\nchild = \"rod\"\n"
        );
        assert!(matches!(
            parse_robot_description(&extra).unwrap_err(),
            ModelError::FloatingBaseCount(2)
        ));
    }
}
