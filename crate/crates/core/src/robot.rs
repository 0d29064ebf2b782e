//! Serial-chain robot model read from a small URDF subset.
//!
//! Supported elements: `robot`, `link`, `joint` (`revolute`, `prismatic`,
//! `fixed`) with `parent`, `child`, `origin xyz/rpy`, `axis xyz` and
//! `limit lower/upper`. Collision geometry comes from a
//! `<collision_primitive type="sphere|capsule" radius=".." [length=".."]>`
//! element inside `link`, with an optional nested `origin`. `visual`,
//! `inertial`, `collision`, `material`, `transmission` and `gazebo` elements
//! are skipped; anything else is rejected.
//!
//! The root link is the robot base. Fixed joints between the root and the
//! first movable joint form the mount, whose composition is the arm base
//! pose in the robot-base frame. Fixed joints after the last movable joint
//! form the tool and fold into the TCP offset.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::fmt::Write;

use nalgebra::{UnitQuaternion, Vector3};
use sha2::{Digest, Sha256};

use crate::collision::{CollisionPrimitive, PlacedPrimitive, PrimitiveKind};
use crate::error::RobotError;
use crate::geometry::Pose;
use crate::warning::{Reported, Warning};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JointKind {
    Revolute,
    Prismatic,
    Fixed,
}

impl JointKind {
    fn as_str(self) -> &'static str {
        match self {
            JointKind::Revolute => "revolute",
            JointKind::Prismatic => "prismatic",
            JointKind::Fixed => "fixed",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Joint {
    pub name: String,
    pub kind: JointKind,
    pub parent: String,
    pub child: String,
    /// Unit axis in the joint frame.
    pub axis: Vector3<f64>,
    /// Joint frame in the parent link frame.
    pub origin: Pose,
    pub lower_limit: f64,
    pub upper_limit: f64,
}

impl Joint {
    pub fn is_movable(&self) -> bool {
        self.kind != JointKind::Fixed
    }

    /// Child-link pose in the parent-link frame for joint value `q`.
    pub fn transform(&self, q: f64) -> Pose {
        match self.kind {
            JointKind::Fixed => self.origin,
            JointKind::Revolute => self.origin.compose(&Pose::from_rotation(
                UnitQuaternion::from_scaled_axis(self.axis * q),
            )),
            JointKind::Prismatic => self
                .origin
                .compose(&Pose::new(self.axis * q, UnitQuaternion::identity())),
        }
    }
}

/// Which part of the robot a link belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum LinkRole {
    Static,
    Arm,
}

#[derive(Debug, Clone)]
struct PrimitiveSlot {
    link_seq: usize,
    role: LinkRole,
}

/// A serial manipulator: mount, movable section and tool.
#[derive(Debug, Clone)]
pub struct KinematicChain {
    name: String,
    /// Links from root to tip.
    links: Vec<String>,
    mount: Vec<Joint>,
    joints: Vec<Joint>,
    tool: Vec<Joint>,
    static_body: Vec<CollisionPrimitive>,
    arm_body: Vec<CollisionPrimitive>,
    tcp_offset: Pose,
    arm_to_robot_base: Pose,
    /// Static primitives resolved into the arm-base frame.
    static_placed: Vec<PlacedPrimitive>,
    arm_slots: Vec<PrimitiveSlot>,
    collision_pairs: Vec<(usize, usize)>,
    dof: usize,
}

impl KinematicChain {
    /// Assembles a chain from joints ordered root to tip. Primitives are
    /// split into static and arm bodies according to the link they are
    /// attached to.
    pub fn new(
        name: &str,
        path: Vec<Joint>,
        primitives: Vec<CollisionPrimitive>,
    ) -> Result<Self, RobotError> {
        let first = path.iter().position(Joint::is_movable).ok_or_else(|| {
            RobotError::DegenerateChain("chain has no revolute or prismatic joint".into())
        })?;
        let last = path.iter().rposition(Joint::is_movable).unwrap_or(first);
        for w in path.windows(2) {
            if w[0].child != w[1].parent {
                return Err(RobotError::UnsupportedTopology {
                    line: 0,
                    message: format!(
                        "joint '{}' does not continue from '{}'",
                        w[1].name, w[0].name
                    ),
                });
            }
        }
        for j in path.iter().filter(|j| j.is_movable()) {
            if j.lower_limit > j.upper_limit {
                return Err(RobotError::DegenerateChain(format!(
                    "joint '{}' has lower limit above upper limit",
                    j.name
                )));
            }
            if (j.axis.norm() - 1.0).abs() > 1e-9 {
                return Err(RobotError::DegenerateChain(format!(
                    "joint '{}' axis is not unit length",
                    j.name
                )));
            }
        }

        let mut links = vec![path[0].parent.clone()];
        links.extend(path.iter().map(|j| j.child.clone()));
        let link_seq: HashMap<&str, usize> =
            links.iter().enumerate().map(|(i, l)| (l.as_str(), i)).collect();

        let mount: Vec<Joint> = path[..first].to_vec();
        let joints: Vec<Joint> = path[first..=last].to_vec();
        let tool: Vec<Joint> = path[last + 1..].to_vec();

        let arm_to_robot_base = mount
            .iter()
            .fold(Pose::identity(), |acc, j| acc.compose(&j.origin));
        let tcp_offset = tool
            .iter()
            .fold(Pose::identity(), |acc, j| acc.compose(&j.origin));

        // Static link poses in the arm-base frame.
        let base_inv = arm_to_robot_base.invert();
        let mut static_link_pose = vec![base_inv];
        for j in &mount {
            let prev = *static_link_pose.last().expect("non-empty");
            static_link_pose.push(prev.compose(&j.origin));
        }

        let mut static_body = Vec::new();
        let mut arm_body = Vec::new();
        let mut static_slots = Vec::new();
        let mut arm_slots = Vec::new();
        let mut static_placed = Vec::new();
        for p in primitives {
            if !(p.radius > 0.0) || p.length < 0.0 {
                return Err(RobotError::DegenerateChain(format!(
                    "primitive on '{}' needs radius > 0 and length >= 0",
                    p.attached_link
                )));
            }
            let seq = *link_seq.get(p.attached_link.as_str()).ok_or_else(|| {
                RobotError::DegenerateChain(format!(
                    "primitive attached to unknown link '{}'",
                    p.attached_link
                ))
            })?;
            if seq <= first {
                static_placed.push(p.placed(&static_link_pose[seq]));
                static_slots.push(PrimitiveSlot {
                    link_seq: seq,
                    role: LinkRole::Static,
                });
                static_body.push(p);
            } else {
                arm_slots.push(PrimitiveSlot {
                    link_seq: seq,
                    role: LinkRole::Arm,
                });
                arm_body.push(p);
            }
        }

        // Pairs index into arm_slots for the first entry and into
        // arm_slots ++ static_slots for the second.
        let mut collision_pairs = Vec::new();
        for (i, a) in arm_slots.iter().enumerate() {
            for (j, b) in arm_slots.iter().enumerate().skip(i + 1) {
                if a.link_seq.abs_diff(b.link_seq) >= 2 {
                    collision_pairs.push((i, j));
                }
            }
            for (j, b) in static_slots.iter().enumerate() {
                debug_assert_eq!(b.role, LinkRole::Static);
                if a.link_seq.abs_diff(b.link_seq) >= 2 {
                    collision_pairs.push((i, arm_slots.len() + j));
                }
            }
        }

        let dof = joints.iter().filter(|j| j.is_movable()).count();
        Ok(Self {
            name: name.to_owned(),
            links,
            mount,
            joints,
            tool,
            static_body,
            arm_body,
            tcp_offset,
            arm_to_robot_base,
            static_placed,
            arm_slots,
            collision_pairs,
            dof,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    /// Joints from the first to the last movable joint, fixed joints in
    /// between included.
    pub fn joints(&self) -> &[Joint] {
        &self.joints
    }

    pub fn movable_joints(&self) -> impl Iterator<Item = &Joint> {
        self.joints.iter().filter(|j| j.is_movable())
    }

    pub fn mount(&self) -> &[Joint] {
        &self.mount
    }

    pub fn tool(&self) -> &[Joint] {
        &self.tool
    }

    pub fn links(&self) -> &[String] {
        &self.links
    }

    /// Number of movable joints.
    pub fn dof(&self) -> usize {
        self.dof
    }

    pub fn tcp_offset(&self) -> &Pose {
        &self.tcp_offset
    }

    /// Arm base pose in the robot-base (root link) frame.
    pub fn arm_to_robot_base(&self) -> &Pose {
        &self.arm_to_robot_base
    }

    pub fn static_body(&self) -> &[CollisionPrimitive] {
        &self.static_body
    }

    pub fn arm_body(&self) -> &[CollisionPrimitive] {
        &self.arm_body
    }

    pub(crate) fn static_placed(&self) -> &[PlacedPrimitive] {
        &self.static_placed
    }

    /// Link-sequence index of each arm primitive's link, counted from the
    /// arm base (0 = arm base link).
    pub(crate) fn arm_primitive_frames(&self) -> impl Iterator<Item = usize> + '_ {
        let base = self.mount.len();
        self.arm_slots.iter().map(move |s| s.link_seq - base)
    }

    pub(crate) fn collision_pairs(&self) -> &[(usize, usize)] {
        &self.collision_pairs
    }

    /// Upper bound on the TCP distance from the arm-base origin.
    pub fn reach_bound(&self) -> f64 {
        let mut bound = 0.0;
        for j in self.joints.iter().chain(&self.tool) {
            bound += j.origin.position.norm();
            if j.kind == JointKind::Prismatic {
                bound += j.lower_limit.abs().max(j.upper_limit.abs());
            }
        }
        bound
    }

    /// True iff `point` (arm-base frame) lies inside any static-body
    /// primitive, surface included.
    pub fn point_in_body(&self, point: &Vector3<f64>) -> bool {
        self.static_placed.iter().any(|p| p.contains(point))
    }

    /// Lower and upper limits of the movable joints.
    pub fn limits(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.movable_joints().map(|j| (j.lower_limit, j.upper_limit))
    }

    /// SHA-256 of the canonical description.
    pub fn fingerprint(&self) -> String {
        let digest = Sha256::digest(write_robot(self).as_bytes());
        digest.iter().fold(String::with_capacity(64), |mut s, b| {
            let _ = write!(s, "{b:02x}");
            s
        })
    }
}

/// Parses a robot description.
pub fn parse_robot(text: &str) -> Result<Reported<KinematicChain>, RobotError> {
    let doc = roxmltree::Document::parse(text).map_err(|e| {
        let pos = e.pos();
        RobotError::Xml {
            line: pos.row,
            column: pos.col,
            message: e.to_string(),
        }
    })?;
    let line_of = |node: roxmltree::Node| doc.text_pos_at(node.range().start).row;

    let root = doc.root_element();
    if root.tag_name().name() != "robot" {
        return Err(RobotError::Element {
            element: root.tag_name().name().to_owned(),
            line: line_of(root),
            message: "document root must be <robot>".into(),
        });
    }
    let robot_name = root.attribute("name").unwrap_or("robot");

    let mut warnings = Vec::new();
    let mut links: Vec<(String, u32)> = Vec::new();
    let mut primitives = Vec::new();
    let mut joints: Vec<(Joint, u32)> = Vec::new();

    for node in root.children().filter(|n| n.is_element()) {
        let line = line_of(node);
        let err = |message: String| RobotError::Element {
            element: node.tag_name().name().to_owned(),
            line,
            message,
        };
        match node.tag_name().name() {
            "link" => {
                let name = node
                    .attribute("name")
                    .ok_or_else(|| err("missing 'name'".into()))?
                    .to_owned();
                if links.iter().any(|(l, _)| *l == name) {
                    return Err(err(format!("duplicate link '{name}'")));
                }
                for child in node.children().filter(|n| n.is_element()) {
                    match child.tag_name().name() {
                        "collision_primitive" => {
                            primitives.push(parse_primitive(&name, child, line_of(child))?)
                        }
                        "visual" | "inertial" | "collision" => {}
                        other => {
                            return Err(RobotError::Element {
                                element: other.to_owned(),
                                line: line_of(child),
                                message: "unsupported element inside <link>".into(),
                            })
                        }
                    }
                }
                links.push((name, line));
            }
            "joint" => {
                let joint = parse_joint(node, line, &mut warnings)?;
                joints.push((joint, line));
            }
            "material" | "transmission" | "gazebo" => {}
            other => return Err(err(format!("unsupported element <{other}>"))),
        }
    }

    let link_line: HashMap<&str, u32> = links.iter().map(|(l, n)| (l.as_str(), *n)).collect();
    let mut child_joint: HashMap<&str, usize> = HashMap::new();
    let mut parent_joints: HashMap<&str, Vec<usize>> = HashMap::new();
    for (idx, (j, line)) in joints.iter().enumerate() {
        for link in [&j.parent, &j.child] {
            if !link_line.contains_key(link.as_str()) {
                return Err(RobotError::Element {
                    element: "joint".into(),
                    line: *line,
                    message: format!("joint '{}' references undefined link '{link}'", j.name),
                });
            }
        }
        if child_joint.insert(j.child.as_str(), idx).is_some() {
            return Err(RobotError::UnsupportedTopology {
                line: *line,
                message: format!("link '{}' has more than one parent joint", j.child),
            });
        }
        parent_joints.entry(j.parent.as_str()).or_default().push(idx);
    }
    for (link, children) in &parent_joints {
        if children.len() > 1 {
            return Err(RobotError::UnsupportedTopology {
                line: joints[children[1]].1,
                message: format!(
                    "link '{link}' has {} child joints; only serial chains are supported",
                    children.len()
                ),
            });
        }
    }

    let roots: Vec<&(String, u32)> = links
        .iter()
        .filter(|(l, _)| !child_joint.contains_key(l.as_str()))
        .collect();
    if roots.len() != 1 {
        return Err(RobotError::UnsupportedTopology {
            line: line_of(root),
            message: format!("expected exactly one root link, found {}", roots.len()),
        });
    }
    let mut path = Vec::new();
    let mut current = roots[0].0.as_str();
    while let Some(children) = parent_joints.get(current) {
        let (j, _) = &joints[children[0]];
        path.push(j.clone());
        current = j.child.as_str();
    }
    if path.len() != joints.len() {
        return Err(RobotError::UnsupportedTopology {
            line: line_of(root),
            message: "joints do not form a single connected chain".into(),
        });
    }
    if path.is_empty() {
        return Err(RobotError::DegenerateChain("description has no joints".into()));
    }
    let chain = KinematicChain::new(robot_name, path, primitives)?;
    Ok(Reported::new(chain, warnings))
}

fn parse_floats<const N: usize>(
    s: &str,
    what: &str,
    err: &dyn Fn(String) -> RobotError,
) -> Result<[f64; N], RobotError> {
    let vals: Vec<f64> = s
        .split_whitespace()
        .map(str::parse::<f64>)
        .collect::<Result<_, _>>()
        .map_err(|e| err(format!("bad {what} '{s}': {e}")))?;
    let arr: [f64; N] = vals
        .try_into()
        .map_err(|_| err(format!("{what} needs {N} numbers, got '{s}'")))?;
    if arr.iter().any(|v| !v.is_finite()) {
        return Err(err(format!("{what} must be finite")));
    }
    Ok(arr)
}

fn parse_scalar(s: &str, what: &str, err: &dyn Fn(String) -> RobotError) -> Result<f64, RobotError> {
    let [v] = parse_floats::<1>(s, what, err)?;
    Ok(v)
}

fn parse_origin(node: roxmltree::Node, line: u32) -> Result<Pose, RobotError> {
    let err = |message: String| RobotError::Element {
        element: "origin".into(),
        line,
        message,
    };
    let xyz = match node.attribute("xyz") {
        Some(s) => parse_floats::<3>(s, "xyz", &err)?,
        None => [0.0; 3],
    };
    let rpy = match node.attribute("rpy") {
        Some(s) => parse_floats::<3>(s, "rpy", &err)?,
        None => [0.0; 3],
    };
    Ok(Pose::from_xyz_rpy(xyz, rpy))
}

fn parse_primitive(
    link: &str,
    node: roxmltree::Node,
    line: u32,
) -> Result<CollisionPrimitive, RobotError> {
    let err = |message: String| RobotError::Element {
        element: "collision_primitive".into(),
        line,
        message,
    };
    let kind = match node.attribute("type") {
        Some("sphere") => PrimitiveKind::Sphere,
        Some("capsule") => PrimitiveKind::Capsule,
        other => return Err(err(format!("type must be sphere or capsule, got {other:?}"))),
    };
    let radius = parse_scalar(
        node.attribute("radius")
            .ok_or_else(|| err("missing 'radius'".into()))?,
        "radius",
        &err,
    )?;
    if radius <= 0.0 {
        return Err(err("radius must be positive".into()));
    }
    let length = match (kind, node.attribute("length")) {
        (PrimitiveKind::Capsule, Some(s)) => parse_scalar(s, "length", &err)?,
        (PrimitiveKind::Capsule, None) => return Err(err("capsule needs 'length'".into())),
        (PrimitiveKind::Sphere, _) => 0.0,
    };
    if length < 0.0 {
        return Err(err("length must be non-negative".into()));
    }
    let mut offset = Pose::identity();
    for child in node.children().filter(|n| n.is_element()) {
        if child.tag_name().name() == "origin" {
            offset = parse_origin(child, line)?;
        } else {
            return Err(err(format!(
                "unsupported element <{}>",
                child.tag_name().name()
            )));
        }
    }
    Ok(CollisionPrimitive {
        kind,
        attached_link: link.to_owned(),
        local_offset: offset,
        radius,
        length,
    })
}

fn parse_joint(
    node: roxmltree::Node,
    line: u32,
    warnings: &mut Vec<Warning>,
) -> Result<Joint, RobotError> {
    let err = |message: String| RobotError::Element {
        element: "joint".into(),
        line,
        message,
    };
    let name = node
        .attribute("name")
        .ok_or_else(|| err("missing 'name'".into()))?
        .to_owned();
    let kind = match node.attribute("type") {
        Some("revolute") => JointKind::Revolute,
        Some("prismatic") => JointKind::Prismatic,
        Some("fixed") => JointKind::Fixed,
        other => {
            return Err(err(format!(
                "joint '{name}': type must be revolute, prismatic or fixed, got {other:?}"
            )))
        }
    };
    let mut parent = None;
    let mut child = None;
    let mut origin = Pose::identity();
    let mut axis = Vector3::x();
    let mut limits: (Option<f64>, Option<f64>) = (None, None);
    for c in node.children().filter(|n| n.is_element()) {
        let cline = node.document().text_pos_at(c.range().start).row;
        let cerr = |message: String| RobotError::Element {
            element: c.tag_name().name().to_owned(),
            line: cline,
            message,
        };
        match c.tag_name().name() {
            "parent" => parent = c.attribute("link").map(str::to_owned),
            "child" => child = c.attribute("link").map(str::to_owned),
            "origin" => origin = parse_origin(c, cline)?,
            "axis" => {
                let v = parse_floats::<3>(
                    c.attribute("xyz").ok_or_else(|| cerr("missing 'xyz'".into()))?,
                    "axis",
                    &cerr,
                )?;
                let v = Vector3::from(v);
                if v.norm() < 1e-12 {
                    return Err(cerr("axis must be non-zero".into()));
                }
                axis = v.normalize();
            }
            "limit" => {
                if let Some(s) = c.attribute("lower") {
                    limits.0 = Some(parse_scalar(s, "lower", &cerr)?);
                }
                if let Some(s) = c.attribute("upper") {
                    limits.1 = Some(parse_scalar(s, "upper", &cerr)?);
                }
            }
            "dynamics" | "calibration" | "safety_controller" => {}
            other => return Err(cerr(format!("unsupported element <{other}> inside <joint>"))),
        }
    }
    let parent = parent.ok_or_else(|| err(format!("joint '{name}' needs <parent link=..>")))?;
    let child = child.ok_or_else(|| err(format!("joint '{name}' needs <child link=..>")))?;
    let (lower, upper) = match (kind, limits) {
        (JointKind::Fixed, _) => (0.0, 0.0),
        (_, (Some(l), Some(u))) => (l, u),
        (JointKind::Revolute, (l, u)) => {
            warnings.push(Warning::DefaultJointLimits { joint: name.clone() });
            (l.unwrap_or(-PI), u.unwrap_or(PI))
        }
        (JointKind::Prismatic, _) => {
            return Err(err(format!("prismatic joint '{name}' needs lower and upper limits")))
        }
    };
    if lower > upper {
        return Err(err(format!("joint '{name}': lower limit {lower} above upper {upper}")));
    }
    Ok(Joint {
        name,
        kind,
        parent,
        child,
        axis,
        origin,
        lower_limit: lower,
        upper_limit: upper,
    })
}

fn write_origin(out: &mut String, indent: &str, pose: &Pose) {
    let p = pose.position;
    let [r, pi, y] = pose.rpy();
    let _ = writeln!(
        out,
        "{indent}<origin xyz=\"{} {} {}\" rpy=\"{r} {pi} {y}\"/>",
        p.x, p.y, p.z
    );
}

/// Canonical description of `chain`, readable by [`parse_robot`].
pub fn write_robot(chain: &KinematicChain) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "<robot name=\"{}\">", xml_escape(&chain.name));
    let all_prims: Vec<&CollisionPrimitive> =
        chain.static_body.iter().chain(&chain.arm_body).collect();
    for link in &chain.links {
        let prims: Vec<&&CollisionPrimitive> =
            all_prims.iter().filter(|p| &p.attached_link == link).collect();
        if prims.is_empty() {
            let _ = writeln!(out, "  <link name=\"{}\"/>", xml_escape(link));
            continue;
        }
        let _ = writeln!(out, "  <link name=\"{}\">", xml_escape(link));
        for p in prims {
            match p.kind {
                PrimitiveKind::Sphere => {
                    let _ = writeln!(
                        out,
                        "    <collision_primitive type=\"sphere\" radius=\"{}\">",
                        p.radius
                    );
                }
                PrimitiveKind::Capsule => {
                    let _ = writeln!(
                        out,
                        "    <collision_primitive type=\"capsule\" radius=\"{}\" length=\"{}\">",
                        p.radius, p.length
                    );
                }
            }
            write_origin(&mut out, "      ", &p.local_offset);
            out.push_str("    </collision_primitive>\n");
        }
        out.push_str("  </link>\n");
    }
    for j in chain.mount.iter().chain(&chain.joints).chain(&chain.tool) {
        let _ = writeln!(
            out,
            "  <joint name=\"{}\" type=\"{}\">",
            xml_escape(&j.name),
            j.kind.as_str()
        );
        let _ = writeln!(out, "    <parent link=\"{}\"/>", xml_escape(&j.parent));
        let _ = writeln!(out, "    <child link=\"{}\"/>", xml_escape(&j.child));
        write_origin(&mut out, "    ", &j.origin);
        if j.is_movable() {
            let _ = writeln!(
                out,
                "    <axis xyz=\"{} {} {}\"/>",
                j.axis.x, j.axis.y, j.axis.z
            );
            let _ = writeln!(
                out,
                "    <limit lower=\"{}\" upper=\"{}\"/>",
                j.lower_limit, j.upper_limit
            );
        }
        out.push_str("  </joint>\n");
    }
    out.push_str("</robot>\n");
    out
}

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;")
        .replace('<', "&lt;")
        .replace('>', "&gt;")
        .replace('"', "&quot;")
}
