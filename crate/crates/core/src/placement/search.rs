use std::cmp::Ordering;
use std::f64::consts::TAU;

use nalgebra::{Matrix3, SymmetricEigen, UnitQuaternion, Vector3};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, PlacementError};
use crate::geometry::Pose;
use crate::inverse::InverseReachabilityMap;
use crate::kinematics::{solve_ik_multi_seeded, IkSettings, JointConfig};
use crate::robot::KinematicChain;
use crate::warning::{Reported, Warning};

use super::union::{build_union_map_with_offset, PlacebaseMode, UnionMap, UnionMember};
use super::TaskPoseSet;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMethod {
    Pca,
    GraspReachability,
    IkSolution,
    Vertical,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlacementParams {
    /// Candidates returned.
    pub n: usize,
    /// Union-map spheres searched.
    pub m: usize,
    pub yaw_samples: usize,
    pub ground_z: f64,
    pub placebase_mode: PlacebaseMode,
    pub settings: IkSettings,
}

impl Default for PlacementParams {
    fn default() -> Self {
        Self {
            n: 3,
            m: 10,
            yaw_samples: 16,
            ground_z: 0.0,
            placebase_mode: PlacebaseMode::Normalized,
            settings: IkSettings::default(),
        }
    }
}

impl PlacementParams {
    pub fn validate(&self) -> Result<(), Error> {
        if self.n == 0 || self.m == 0 {
            return Err(PlacementError::InvalidParameter("n and m must be at least 1".into()).into());
        }
        if self.n > self.m {
            return Err(PlacementError::InvalidParameter(format!(
                "n must not exceed m (n = {}, m = {})",
                self.n, self.m
            ))
            .into());
        }
        if self.yaw_samples == 0 {
            return Err(PlacementError::InvalidParameter("yaw_samples must be at least 1".into()).into());
        }
        if !self.ground_z.is_finite() {
            return Err(PlacementError::InvalidParameter("ground_z must be finite".into()).into());
        }
        self.settings.validate()?;
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskEvidence {
    pub task_index: usize,
    pub reachable: bool,
    pub ik_solution_count: usize,
    /// Present iff `reachable`; reaches the task from `arm_base_pose`.
    pub witness: Option<JointConfig>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaseCandidate {
    /// Pose of the robot base in the world frame.
    pub base_pose: Pose,
    /// Pose of the arm base (equal to `base_pose` for floating bases).
    pub arm_base_pose: Pose,
    pub score: f64,
    pub voxel_index: usize,
    pub placebase_index: f64,
    pub per_task: Vec<TaskEvidence>,
}

impl BaseCandidate {
    pub fn reached(&self) -> usize {
        self.per_task.iter().filter(|t| t.reachable).count()
    }

    pub fn total_solutions(&self) -> usize {
        self.per_task.iter().map(|t| t.ik_solution_count).sum()
    }
}

/// IK evidence for every task from `arm_base`. `hint` seeds the search for
/// one task with a known solution. With `stop_at_miss`, evaluation ends at
/// the first unreachable task and `None` is returned.
fn evaluate(
    chain: &KinematicChain,
    arm_base: &Pose,
    tasks: &TaskPoseSet,
    settings: &IkSettings,
    hint: Option<(usize, &JointConfig)>,
    stop_at_miss: bool,
) -> Option<Vec<TaskEvidence>> {
    let inv = arm_base.invert();
    let mut out = Vec::with_capacity(tasks.len());
    for (task_index, task) in tasks.poses().enumerate() {
        let seeds: Vec<JointConfig> = match hint {
            Some((i, q)) if i == task_index => vec![q.clone()],
            _ => Vec::new(),
        };
        let sols = solve_ik_multi_seeded(chain, &inv.compose(task), settings, &seeds)
            .expect("settings and seeds validated");
        if sols.is_empty() && stop_at_miss {
            return None;
        }
        out.push(TaskEvidence {
            task_index,
            reachable: !sols.is_empty(),
            ik_solution_count: sols.len(),
            witness: sols.into_iter().next(),
        });
    }
    Some(out)
}

fn ik_score(per_task: &[TaskEvidence], settings: &IkSettings) -> f64 {
    let total: usize = per_task.iter().map(|t| t.ik_solution_count).sum();
    100.0 * total as f64 / (settings.max_solutions * per_task.len()) as f64
}

fn reach_score(per_task: &[TaskEvidence]) -> f64 {
    let reached = per_task.iter().filter(|t| t.reachable).count();
    100.0 * reached as f64 / per_task.len() as f64
}

/// Ranks by score, then placebase index, then voxel index; equal keys keep
/// their input order.
fn rank(mut candidates: Vec<BaseCandidate>, n: usize, extra: impl Fn(&BaseCandidate, &BaseCandidate) -> Ordering) -> Vec<BaseCandidate> {
    candidates.sort_by(|a, b| {
        b.score
            .total_cmp(&a.score)
            .then_with(|| extra(a, b))
            .then_with(|| b.placebase_index.total_cmp(&a.placebase_index))
            .then_with(|| a.voxel_index.cmp(&b.voxel_index))
    });
    candidates.truncate(n);
    candidates
}

fn finish(candidates: Vec<BaseCandidate>, mut warnings: Vec<Warning>) -> Reported<Vec<BaseCandidate>> {
    if candidates.iter().all(|c| c.reached() == 0) {
        warnings.push(Warning::NoReachableTasks);
    }
    Reported::new(candidates, warnings)
}

fn check_inputs(union: &UnionMap, tasks: &TaskPoseSet, params: &PlacementParams) -> Result<(), Error> {
    params.validate()?;
    if tasks.is_empty() {
        return Err(PlacementError::EmptyTasks.into());
    }
    if union.spheres.is_empty() {
        return Err(PlacementError::EmptyMap.into());
    }
    Ok(())
}

/// Yaw of the dominant principal axis of `points` projected onto the x-y
/// plane, with the sign fixed so the axis points toward +x (or +y when it
/// is parallel to y). Zero when the projection vanishes.
pub fn pca_yaw(points: &[Vector3<f64>]) -> f64 {
    if points.len() < 2 {
        return 0.0;
    }
    let mean = points.iter().sum::<Vector3<f64>>() / points.len() as f64;
    let cov = points
        .iter()
        .map(|p| (p - mean) * (p - mean).transpose())
        .sum::<Matrix3<f64>>()
        / points.len() as f64;
    let eig = SymmetricEigen::new(cov);
    let (i, &largest) = eig
        .eigenvalues
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.cmp(&a.0)))
        .expect("three eigenvalues");
    if largest <= 1e-18 {
        return 0.0;
    }
    let axis = eig.eigenvectors.column(i);
    let (mut x, mut y) = (axis[0], axis[1]);
    if x.hypot(y) < 1e-9 {
        return 0.0;
    }
    if x < -1e-12 || (x.abs() <= 1e-12 && y < 0.0) {
        x = -x;
        y = -y;
    }
    y.atan2(x)
}

fn yaw_pose(position: Vector3<f64>, yaw: f64) -> Pose {
    Pose::new(position, UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw))
}

/// One candidate per searched sphere: its center, yawed along the principal
/// axis of the member positions, scored by IK solution counts.
pub fn find_base_pca(
    union: &UnionMap,
    tasks: &TaskPoseSet,
    chain: &KinematicChain,
    params: &PlacementParams,
) -> Result<Reported<Vec<BaseCandidate>>, Error> {
    check_inputs(union, tasks, params)?;
    let top = union.top_spheres(params.m);
    let candidates: Vec<BaseCandidate> = top
        .value
        .par_iter()
        .map(|s| {
            let positions: Vec<Vector3<f64>> = s.members.iter().map(|m| m.pose.position).collect();
            let pose = yaw_pose(s.center, pca_yaw(&positions));
            let per_task = evaluate(chain, &pose, tasks, &params.settings, None, false).expect("no early stop");
            BaseCandidate {
                base_pose: pose,
                arm_base_pose: pose,
                score: ik_score(&per_task, &params.settings),
                voxel_index: s.voxel_index,
                placebase_index: s.placebase_index,
                per_task,
            }
        })
        .collect();
    Ok(finish(rank(candidates, params.n, |_, _| Ordering::Equal), top.warnings))
}

fn member_candidates(union: &UnionMap, tasks: &TaskPoseSet, chain: &KinematicChain, params: &PlacementParams) -> Reported<Vec<BaseCandidate>> {
    let top = union.top_spheres(params.m);
    let members: Vec<(&UnionMember, usize, f64)> = top
        .value
        .iter()
        .flat_map(|s| s.members.iter().map(move |m| (m, s.voxel_index, s.placebase_index)))
        .collect();
    let candidates = members
        .par_iter()
        .map(|&(m, voxel_index, placebase_index)| {
            let hint = Some((m.task_index, &m.witness));
            let per_task = evaluate(chain, &m.pose, tasks, &params.settings, hint, false).expect("no early stop");
            BaseCandidate {
                base_pose: m.pose,
                arm_base_pose: m.pose,
                score: 0.0,
                voxel_index,
                placebase_index,
                per_task,
            }
        })
        .collect();
    Reported {
        value: candidates,
        warnings: top.warnings,
    }
}

/// Every member pose of the searched spheres, scored by the fraction of
/// tasks it reaches.
pub fn find_base_grasp_reachability(
    union: &UnionMap,
    tasks: &TaskPoseSet,
    chain: &KinematicChain,
    params: &PlacementParams,
) -> Result<Reported<Vec<BaseCandidate>>, Error> {
    check_inputs(union, tasks, params)?;
    let Reported { value, warnings } = member_candidates(union, tasks, chain, params);
    let scored = value
        .into_iter()
        .map(|mut c| {
            c.score = reach_score(&c.per_task);
            c
        })
        .collect();
    let ranked = rank(scored, params.n, |a, b| b.total_solutions().cmp(&a.total_solutions()));
    Ok(finish(ranked, warnings))
}

/// Every member pose of the searched spheres, scored by IK solution counts.
pub fn find_base_ik_score(
    union: &UnionMap,
    tasks: &TaskPoseSet,
    chain: &KinematicChain,
    params: &PlacementParams,
) -> Result<Reported<Vec<BaseCandidate>>, Error> {
    check_inputs(union, tasks, params)?;
    let Reported { value, warnings } = member_candidates(union, tasks, chain, params);
    let scored = value
        .into_iter()
        .map(|mut c| {
            c.score = ik_score(&c.per_task, &params.settings);
            c
        })
        .collect();
    Ok(finish(rank(scored, params.n, |_, _| Ordering::Equal), warnings))
}

/// Union map of robot-base poses (the arm-base offset removed) restricted
/// to the ground slice.
pub fn vertical_union_map(
    irm: &InverseReachabilityMap,
    tasks: &TaskPoseSet,
    chain: &KinematicChain,
    params: &PlacementParams,
) -> Result<Reported<UnionMap>, Error> {
    let mount = chain.arm_to_robot_base();
    let offset = (*mount != Pose::identity()).then(|| mount.invert());
    let full = build_union_map_with_offset(irm, tasks, params.placebase_mode, offset.as_ref())?;
    Ok(Reported {
        value: full.value.ground_slice(params.ground_z),
        warnings: full.warnings,
    })
}

/// Ground-plane bases with yaw-only orientation. Candidates that miss any
/// task are discarded; survivors are scored by IK solution counts.
pub fn find_base_vertical(
    irm: &InverseReachabilityMap,
    tasks: &TaskPoseSet,
    chain: &KinematicChain,
    params: &PlacementParams,
) -> Result<Reported<Vec<BaseCandidate>>, Error> {
    params.validate()?;
    let Reported {
        value: slice,
        mut warnings,
    } = vertical_union_map(irm, tasks, chain, params)?;
    if slice.spheres.is_empty() {
        return Err(PlacementError::NoGroundSpheres {
            ground_z: params.ground_z,
            tolerance: slice.resolution / 2.0,
        }
        .into());
    }
    let top = slice.top_spheres(params.m);
    warnings.extend(top.warnings);
    let mount = *chain.arm_to_robot_base();
    let grid: Vec<(usize, usize)> = (0..top.value.len())
        .flat_map(|s| (0..params.yaw_samples).map(move |j| (s, j)))
        .collect();
    let survivors: Vec<BaseCandidate> = grid
        .par_iter()
        .filter_map(|&(s, j)| {
            let sphere = top.value[s];
            let yaw = TAU * j as f64 / params.yaw_samples as f64;
            let c = sphere.center;
            let base = yaw_pose(Vector3::new(c.x, c.y, params.ground_z), yaw);
            let arm_base = base.compose(&mount);
            let per_task = evaluate(chain, &arm_base, tasks, &params.settings, None, true)?;
            Some(BaseCandidate {
                base_pose: base,
                arm_base_pose: arm_base,
                score: ik_score(&per_task, &params.settings),
                voxel_index: sphere.voxel_index,
                placebase_index: sphere.placebase_index,
                per_task,
            })
        })
        .collect();
    if survivors.is_empty() {
        return Err(PlacementError::NoYawReachesAllTasks { tasks: tasks.len() }.into());
    }
    // candidates are generated in (sphere rank, yaw index) order, which the
    // stable sort keeps among equal keys
    Ok(finish(rank(survivors, params.n, |_, _| Ordering::Equal), warnings))
}

/// Runs `method`, building the union map as needed.
pub fn find_base(
    method: PlacementMethod,
    irm: &InverseReachabilityMap,
    tasks: &TaskPoseSet,
    chain: &KinematicChain,
    params: &PlacementParams,
) -> Result<Reported<Vec<BaseCandidate>>, Error> {
    params.validate()?;
    if method == PlacementMethod::Vertical {
        return find_base_vertical(irm, tasks, chain, params);
    }
    let union = super::build_union_map(irm, tasks, params.placebase_mode)?;
    let mut found = match method {
        PlacementMethod::Pca => find_base_pca(&union.value, tasks, chain, params),
        PlacementMethod::GraspReachability => find_base_grasp_reachability(&union.value, tasks, chain, params),
        PlacementMethod::IkSolution => find_base_ik_score(&union.value, tasks, chain, params),
        PlacementMethod::Vertical => unreachable!(),
    }?;
    let mut warnings = union.warnings;
    warnings.append(&mut found.warnings);
    Ok(Reported {
        value: found.value,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::inverse::invert_map;
    use crate::kinematics::fixtures::planar_2r;
    use crate::kinematics::{forward_kinematics, MatchMode};
    use crate::placement::build_union_map;
    use crate::reachability::{generate_reachability_map, MapParams};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn planar_irm() -> InverseReachabilityMap {
        let params = MapParams {
            resolution: 0.5,
            radius: 2.5,
            samples_per_sphere: 6,
            workers: 1,
        };
        let rm = generate_reachability_map(&planar_2r(), &params, &planar_settings())
            .unwrap()
            .value;
        invert_map(&rm).unwrap().value
    }

    fn planar_settings() -> IkSettings {
        IkSettings {
            match_mode: MatchMode::PlanarPosition,
            ..IkSettings::default()
        }
    }

    fn params() -> PlacementParams {
        PlacementParams {
            n: 2,
            m: 4,
            settings: planar_settings(),
            ..PlacementParams::default()
        }
    }

    fn two_tasks() -> TaskPoseSet {
        TaskPoseSet::from_poses(&[
            Pose::from_translation(1.2, 0.5, 0.0),
            Pose::from_translation(0.5, 1.2, 0.0),
        ])
        .unwrap()
    }

    fn assert_sound(c: &BaseCandidate, tasks: &TaskPoseSet, settings: &IkSettings) {
        let chain = planar_2r();
        for (ev, task) in c.per_task.iter().zip(tasks.poses()) {
            assert_eq!(ev.reachable, ev.witness.is_some());
            assert_eq!(ev.reachable, ev.ik_solution_count > 0);
            if let Some(q) = &ev.witness {
                // planar matching is defined in the arm-base frame
                let fk = forward_kinematics(&chain, q).unwrap();
                assert!(settings.accepts(&fk, &c.arm_base_pose.invert().compose(task)));
            }
        }
    }

    #[test]
    fn pca_axis_matches_variance_maximizer() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let theta: f64 = rng.gen_range(-3.0..3.0);
            let dir = Vector3::new(theta.cos(), theta.sin(), 0.3);
            let pts: Vec<Vector3<f64>> = (0..40)
                .map(|_| {
                    let t: f64 = rng.gen_range(-1.0..1.0);
                    dir * t + Vector3::from_fn(|_, _| rng.gen_range(-0.05..0.05))
                })
                .collect();
            let mean = pts.iter().sum::<Vector3<f64>>() / pts.len() as f64;
            // brute force over directions on a fine longitude/latitude grid
            let mut best = (f64::NEG_INFINITY, Vector3::zeros());
            for a in 0..720 {
                for b in 0..181 {
                    let phi = a as f64 * std::f64::consts::PI / 360.0;
                    let lat = (b as f64 - 90.0).to_radians();
                    let d = Vector3::new(lat.cos() * phi.cos(), lat.cos() * phi.sin(), lat.sin());
                    let var: f64 = pts.iter().map(|p| (p - mean).dot(&d).powi(2)).sum();
                    if var > best.0 {
                        best = (var, d);
                    }
                }
            }
            let expected = best.1.y.atan2(best.1.x);
            let got = pca_yaw(&pts);
            let diff = (got - expected).rem_euclid(std::f64::consts::PI);
            let diff = diff.min(std::f64::consts::PI - diff);
            assert!(diff < 0.02, "yaw {got} vs {expected}");
            assert!(got > -std::f64::consts::FRAC_PI_2 - 1e-12 && got <= std::f64::consts::FRAC_PI_2 + 1e-12);
        }
    }

    #[test]
    fn pca_of_degenerate_sets_is_zero() {
        assert_eq!(pca_yaw(&[Vector3::new(1.0, 2.0, 3.0)]), 0.0);
        let vertical = [Vector3::new(0.0, 0.0, 0.0), Vector3::new(0.0, 0.0, 1.0)];
        assert_eq!(pca_yaw(&vertical), 0.0);
    }

    #[test]
    fn n_above_m_rejected() {
        let irm = planar_irm();
        let p = PlacementParams { n: 5, m: 3, ..params() };
        let err = find_base(PlacementMethod::Pca, &irm, &two_tasks(), &planar_2r(), &p).unwrap_err();
        assert!(err.to_string().contains("n must not exceed m"));
    }

    #[test]
    fn floating_methods_reach_both_tasks() {
        let irm = planar_irm();
        let tasks = two_tasks();
        let chain = planar_2r();
        let p = params();
        for method in [PlacementMethod::Pca, PlacementMethod::GraspReachability, PlacementMethod::IkSolution] {
            let found = find_base(method, &irm, &tasks, &chain, &p).unwrap().value;
            assert_eq!(found.len(), 2, "{method:?}");
            let top = &found[0];
            assert_eq!(top.reached(), 2, "{method:?}");
            for c in &found {
                assert_sound(c, &tasks, &p.settings);
                let expected = match method {
                    PlacementMethod::GraspReachability => 100.0 * c.reached() as f64 / 2.0,
                    _ => 100.0 * c.total_solutions() as f64 / 16.0,
                };
                assert_eq!(c.score, expected);
            }
            assert!(found.windows(2).all(|w| w[0].score >= w[1].score));
        }
    }

    #[test]
    fn pca_candidates_are_upright_at_sphere_centers() {
        let irm = planar_irm();
        let tasks = two_tasks();
        let p = params();
        let union = build_union_map(&irm, &tasks, p.placebase_mode).unwrap().value;
        let found = find_base_pca(&union, &tasks, &planar_2r(), &p).unwrap().value;
        for c in &found {
            let [roll, pitch, _] = c.base_pose.rpy();
            assert_eq!((roll, pitch), (0.0, 0.0));
            assert!(union.spheres.iter().any(|s| s.center == c.base_pose.position));
        }
    }

    #[test]
    fn ik_score_of_two_interior_tasks_is_a_quarter() {
        // a base at the origin reaches both tasks with two elbows each
        let chain = planar_2r();
        let tasks = two_tasks();
        let s = planar_settings();
        let ev = evaluate(&chain, &Pose::identity(), &tasks, &s, None, false).unwrap();
        assert_eq!(ev.iter().map(|e| e.ik_solution_count).collect::<Vec<_>>(), vec![2, 2]);
        assert_eq!(ik_score(&ev, &s), 25.0);
    }

    #[test]
    fn unreachable_everywhere_still_returns_candidates() {
        // planar arm asked to match full orientations it can never produce
        let irm = planar_irm();
        let tilted = Pose::from_xyz_rpy([1.0, 0.0, 0.0], [0.0, 0.0, 0.0]);
        let tasks = TaskPoseSet::from_poses(&[tilted]).unwrap();
        let p = PlacementParams {
            n: 2,
            m: 2,
            settings: IkSettings {
                restarts: 2,
                ..IkSettings::default()
            },
            ..PlacementParams::default()
        };
        let r = find_base(PlacementMethod::GraspReachability, &irm, &tasks, &planar_2r(), &p).unwrap();
        assert_eq!(r.value.len(), 2);
        assert!(r.value.iter().all(|c| c.score == 0.0));
        assert!(r.warnings.contains(&Warning::NoReachableTasks));
    }

    #[test]
    fn vertical_reaches_all_tasks() {
        let irm = planar_irm();
        let tasks = two_tasks();
        let p = params();
        let found = find_base_vertical(&irm, &tasks, &planar_2r(), &p).unwrap().value;
        assert!(!found.is_empty());
        for c in &found {
            assert_eq!(c.reached(), 2);
            assert_eq!(c.base_pose.position.z, 0.0);
            let q = c.base_pose.orientation;
            assert_eq!((q.i, q.j), (0.0, 0.0));
            assert_sound(c, &tasks, &p.settings);
        }
    }

    #[test]
    fn vertical_identity_mount_matches_floating_slice() {
        let irm = planar_irm();
        let tasks = two_tasks();
        let p = params();
        let floating = build_union_map(&irm, &tasks, p.placebase_mode).unwrap().value;
        let vertical = vertical_union_map(&irm, &tasks, &planar_2r(), &p).unwrap().value;
        assert_eq!(vertical, floating.ground_slice(0.0));
    }

    #[test]
    fn vertical_failure_modes() {
        let irm = planar_irm();
        let chain = planar_2r();
        let far_apart = TaskPoseSet::from_poses(&[
            Pose::from_translation(0.0, 0.0, 0.0),
            Pose::from_translation(10.0, 0.0, 0.0),
        ])
        .unwrap();
        let err = find_base_vertical(&irm, &far_apart, &chain, &params()).unwrap_err();
        assert!(matches!(err, Error::Placement(PlacementError::NoYawReachesAllTasks { tasks: 2 })));

        let high = PlacementParams {
            ground_z: 50.0,
            ..params()
        };
        let err = find_base_vertical(&irm, &two_tasks(), &chain, &high).unwrap_err();
        assert!(matches!(err, Error::Placement(PlacementError::NoGroundSpheres { .. })));
    }

    #[test]
    fn methods_are_deterministic() {
        let irm = planar_irm();
        let tasks = two_tasks();
        let chain = planar_2r();
        for method in [
            PlacementMethod::Pca,
            PlacementMethod::GraspReachability,
            PlacementMethod::IkSolution,
            PlacementMethod::Vertical,
        ] {
            let a = find_base(method, &irm, &tasks, &chain, &params()).unwrap().value;
            let b = find_base(method, &irm, &tasks, &chain, &params()).unwrap().value;
            assert_eq!(a, b);
        }
    }
}
