#![allow(dead_code)]

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use reachkit::geometry::Pose;
use reachkit::kinematics::{forward_kinematics, self_collision, IkSettings, MatchMode};
use reachkit::robot::{parse_robot, KinematicChain};

pub const PLANAR_2R: &str = r#"<robot name="planar2r">
  <link name="base"/>
  <link name="upper"/>
  <link name="fore"/>
  <link name="tcp"/>
  <joint name="shoulder" type="revolute">
    <parent link="base"/><child link="upper"/>
    <axis xyz="0 0 1"/><limit lower="-3.141592653589793" upper="3.141592653589793"/>
  </joint>
  <joint name="elbow" type="revolute">
    <parent link="upper"/><child link="fore"/>
    <origin xyz="1 0 0"/><axis xyz="0 0 1"/><limit lower="-3.141592653589793" upper="3.141592653589793"/>
  </joint>
  <joint name="tip" type="fixed">
    <parent link="fore"/><child link="tcp"/><origin xyz="1 0 0"/>
  </joint>
</robot>
"#;

const ARM6_LINKS: &str = r#"
  <link name="base"><collision_primitive type="sphere" radius="0.12"/></link>
  <link name="shoulder"/>
  <link name="upper"/>
  <link name="fore">
    <collision_primitive type="capsule" radius="0.04" length="0.3">
      <origin xyz="0.2 0 0" rpy="0 1.5707963267948966 0"/>
    </collision_primitive>
  </link>
  <link name="wrist1"/>
  <link name="wrist2"/>
  <link name="wrist3"/>
  <link name="tcp"/>
  <joint name="j1" type="revolute"><parent link="base"/><child link="shoulder"/>
    <origin xyz="0 0 0.3"/><axis xyz="0 0 1"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="j2" type="revolute"><parent link="shoulder"/><child link="upper"/>
    <axis xyz="0 1 0"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="j3" type="revolute"><parent link="upper"/><child link="fore"/>
    <origin xyz="0.5 0 0"/><axis xyz="0 1 0"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="j4" type="revolute"><parent link="fore"/><child link="wrist1"/>
    <origin xyz="0.4 0 0"/><axis xyz="1 0 0"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="j5" type="revolute"><parent link="wrist1"/><child link="wrist2"/>
    <axis xyz="0 1 0"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="j6" type="revolute"><parent link="wrist2"/><child link="wrist3"/>
    <axis xyz="1 0 0"/><limit lower="-3.141592653589793" upper="3.141592653589793"/></joint>
  <joint name="flange" type="fixed"><parent link="wrist3"/><child link="tcp"/>
    <origin xyz="0.1 0 0"/></joint>
"#;

/// Six-joint arm with a spherical wrist, arm base at the robot base.
pub fn arm6_urdf() -> String {
    format!("<robot name=\"arm6\">{ARM6_LINKS}</robot>\n")
}

/// The same arm bolted 0.4 m above a mobile base.
pub fn arm6_mounted_urdf() -> String {
    format!(
        "<robot name=\"arm6_mounted\">\n  <link name=\"cart\"/>\n  <joint name=\"mount\" type=\"fixed\"><parent link=\"cart\"/><child link=\"base\"/><origin xyz=\"0 0 0.4\"/></joint>{ARM6_LINKS}</robot>\n"
    )
}

pub fn planar_2r() -> KinematicChain {
    parse_robot(PLANAR_2R).unwrap().value
}

pub fn arm6() -> KinematicChain {
    parse_robot(&arm6_urdf()).unwrap().value
}

pub fn arm6_mounted() -> KinematicChain {
    parse_robot(&arm6_mounted_urdf()).unwrap().value
}

pub fn planar_settings() -> IkSettings {
    IkSettings {
        match_mode: MatchMode::PlanarPosition,
        ..IkSettings::default()
    }
}

pub fn random_config(chain: &KinematicChain, rng: &mut ChaCha8Rng) -> Vec<f64> {
    chain.limits().map(|(lo, hi)| rng.gen_range(lo..=hi)).collect()
}

/// Table-side TCP poses in the arm-base frame of [`arm6`], each produced by
/// forward kinematics of a collision-free configuration whose wrist center
/// stays well inside the reachable shell.
pub fn table_side_tasks(count: usize, seed: u64) -> Vec<Pose> {
    let chain = arm6();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shoulder = nalgebra::Vector3::new(0.0, 0.0, 0.3);
    let mut out = Vec::new();
    while out.len() < count {
        let q = random_config(&chain, &mut rng);
        if self_collision(&chain, &q).unwrap() {
            continue;
        }
        let tcp = forward_kinematics(&chain, &q).unwrap();
        let wrist = tcp.position - tcp.x_axis() * 0.1;
        let d = (wrist - shoulder).norm();
        let p = tcp.position;
        if (0.3..=0.75).contains(&d) && (0.35..=0.75).contains(&p.x) && p.y.abs() <= 0.35 && (0.1..=0.6).contains(&p.z) {
            out.push(tcp);
        }
    }
    out
}

pub fn seeded(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}
