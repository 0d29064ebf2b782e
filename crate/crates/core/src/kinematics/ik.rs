//! Damped least-squares IK with Levenberg-style damping adaptation and
//! seeded random restarts.

use std::f64::consts::TAU;

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{check_dim, jacobian_unchecked, self_collision_unchecked, JointConfig};
use crate::error::KinematicsError;
use crate::geometry::Pose;
use crate::robot::{JointKind, KinematicChain};

/// Which part of the target pose must be matched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MatchMode {
    /// Position and full orientation.
    #[default]
    Pose,
    /// Position and the direction of the TCP z-axis; rotation about it is free.
    ZAxis,
    /// Position only.
    Position,
    /// Position projected onto the arm-base x-y plane. Meant for planar arms,
    /// whose TCP never leaves that plane.
    PlanarPosition,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IkSettings {
    /// Meters.
    pub position_tol: f64,
    /// Radians.
    pub orientation_tol: f64,
    pub max_iterations: u32,
    /// Random seeds tried after the caller's seed.
    pub restarts: u32,
    /// Initial damping factor; adapted per step.
    pub damping: f64,
    pub max_solutions: usize,
    /// Solutions closer than this in joint-space L-infinity are duplicates.
    pub dedup_threshold: f64,
    pub match_mode: MatchMode,
    pub rng_seed: u64,
}

impl Default for IkSettings {
    fn default() -> Self {
        Self {
            position_tol: 1e-4,
            orientation_tol: 1e-3,
            max_iterations: 200,
            restarts: 16,
            damping: 0.05,
            max_solutions: 8,
            dedup_threshold: 1e-2,
            match_mode: MatchMode::Pose,
            rng_seed: 0,
        }
    }
}

impl IkSettings {
    pub fn validate(&self) -> Result<(), KinematicsError> {
        let bad = |m: &str| Err(KinematicsError::InvalidSettings(m.to_owned()));
        if !(self.position_tol > 0.0) || !(self.orientation_tol > 0.0) {
            return bad("tolerances must be positive");
        }
        if self.max_solutions == 0 {
            return bad("max_solutions must be at least 1");
        }
        if !(self.damping > 0.0) {
            return bad("damping must be positive");
        }
        if !(self.dedup_threshold > 0.0) {
            return bad("dedup_threshold must be positive");
        }
        Ok(())
    }

    /// Whether `current` matches `target` within tolerance under the match
    /// mode.
    pub fn accepts(&self, current: &Pose, target: &Pose) -> bool {
        let (p, r) = pose_error(self.match_mode, current, target);
        p <= self.position_tol && r <= self.orientation_tol
    }
}

/// Position error (m) and orientation error (rad) under `mode`.
pub fn pose_error(mode: MatchMode, current: &Pose, target: &Pose) -> (f64, f64) {
    let dp = target.position - current.position;
    match mode {
        MatchMode::Pose => (dp.norm(), current.orientation.angle_to(&target.orientation)),
        MatchMode::ZAxis => (dp.norm(), current.z_axis().angle(&target.z_axis())),
        MatchMode::Position => (dp.norm(), 0.0),
        MatchMode::PlanarPosition => (dp.xy().norm(), 0.0),
    }
}

/// Residual vector and the matching Jacobian rows.
fn residual(
    mode: MatchMode,
    current: &Pose,
    target: &Pose,
    jac: &DMatrix<f64>,
) -> (DVector<f64>, DMatrix<f64>) {
    let dp = target.position - current.position;
    let n = jac.ncols();
    match mode {
        MatchMode::Pose => {
            let rot = (target.orientation * current.orientation.inverse()).scaled_axis();
            let mut e = DVector::zeros(6);
            e.fixed_rows_mut::<3>(0).copy_from(&dp);
            e.fixed_rows_mut::<3>(3).copy_from(&rot);
            (e, jac.clone())
        }
        MatchMode::ZAxis => {
            let zc = current.z_axis();
            let zt = target.z_axis();
            let cross = zc.cross(&zt);
            let s = cross.norm();
            let angle = s.atan2(zc.dot(&zt));
            let rot = if s > 1e-12 {
                cross * (angle / s)
            } else if angle > 1.0 {
                // antiparallel: any axis normal to zc works
                let helper = if zc.x.abs() < 0.9 { Vector3::x() } else { Vector3::y() };
                zc.cross(&helper).normalize() * angle
            } else {
                Vector3::zeros()
            };
            let proj = Matrix3::identity() - zc * zc.transpose();
            let mut e = DVector::zeros(6);
            e.fixed_rows_mut::<3>(0).copy_from(&dp);
            e.fixed_rows_mut::<3>(3).copy_from(&rot);
            let mut j = DMatrix::zeros(6, n);
            j.rows_mut(0, 3).copy_from(&jac.rows(0, 3));
            j.rows_mut(3, 3).copy_from(&(proj * jac.fixed_rows::<3>(3)));
            (e, j)
        }
        MatchMode::Position => (DVector::from_column_slice(dp.as_slice()), jac.rows(0, 3).into_owned()),
        MatchMode::PlanarPosition => (
            DVector::from_column_slice(&[dp.x, dp.y]),
            jac.rows(0, 2).into_owned(),
        ),
    }
}

fn full_circle(kind: JointKind, lo: f64, hi: f64) -> bool {
    kind == JointKind::Revolute && hi - lo >= TAU - 1e-9
}

struct Limits {
    bounds: Vec<(f64, f64, bool)>,
}

impl Limits {
    fn of(chain: &KinematicChain) -> Self {
        Self {
            bounds: chain
                .movable_joints()
                .map(|j| (j.lower_limit, j.upper_limit, full_circle(j.kind, j.lower_limit, j.upper_limit)))
                .collect(),
        }
    }

    /// Wraps full-circle revolute joints into `[lower, lower + 2pi)` and
    /// clamps everything into limits.
    fn project(&self, q: &mut [f64]) {
        for (v, &(lo, hi, wrap)) in q.iter_mut().zip(&self.bounds) {
            if wrap {
                *v = lo + (*v - lo).rem_euclid(TAU);
            }
            *v = v.clamp(lo, hi);
        }
    }

    fn random(&self, rng: &mut ChaCha8Rng) -> Vec<f64> {
        self.bounds
            .iter()
            .map(|&(lo, hi, _)| if hi > lo { rng.gen_range(lo..=hi) } else { lo })
            .collect()
    }

    fn home(&self) -> Vec<f64> {
        self.bounds.iter().map(|&(lo, hi, _)| 0f64.clamp(lo, hi)).collect()
    }

    /// L-infinity distance, measured around the circle for full-circle joints.
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter()
            .zip(b)
            .zip(&self.bounds)
            .map(|((x, y), &(_, _, wrap))| {
                let d = (x - y).abs();
                if wrap {
                    d.min(TAU - d)
                } else {
                    d
                }
            })
            .fold(0.0, f64::max)
    }
}

const POLISH: f64 = 1e-3;
const MIN_DAMPING: f64 = 1e-9;
const MAX_DAMPING: f64 = 1e6;

/// One damped least-squares descent from `q`.
fn descend(
    chain: &KinematicChain,
    target: &Pose,
    settings: &IkSettings,
    limits: &Limits,
    mut q: Vec<f64>,
) -> Option<Vec<f64>> {
    limits.project(&mut q);
    let mode = settings.match_mode;
    let (mut pose, mut jac) = jacobian_unchecked(chain, &q);
    let (mut e, mut jr) = residual(mode, &pose, target, &jac);
    let mut cost = e.norm_squared();
    let mut lambda = settings.damping;

    for _ in 0..settings.max_iterations {
        let (pe, re) = pose_error(mode, &pose, target);
        if pe <= settings.position_tol * POLISH && re <= settings.orientation_tol * POLISH {
            break;
        }
        let m = jr.nrows();
        let a = &jr * jr.transpose() + DMatrix::identity(m, m) * (lambda * lambda);
        let Some(chol) = a.cholesky() else {
            lambda *= 4.0;
            if lambda > MAX_DAMPING {
                break;
            }
            continue;
        };
        let dq = jr.transpose() * chol.solve(&e);
        if dq.amax() < 1e-14 {
            break;
        }
        let mut next: Vec<f64> = q.iter().zip(dq.iter()).map(|(a, b)| a + b).collect();
        limits.project(&mut next);
        let (npose, njac) = jacobian_unchecked(chain, &next);
        let (ne, njr) = residual(mode, &npose, target, &njac);
        let ncost = ne.norm_squared();
        if ncost < cost {
            let gain = cost - ncost;
            q = next;
            pose = npose;
            jac = njac;
            e = ne;
            jr = njr;
            cost = ncost;
            lambda = (lambda * 0.5).max(MIN_DAMPING);
            if gain <= 1e-12 * cost && !settings.accepts(&pose, target) {
                break;
            }
        } else {
            lambda *= 4.0;
            if lambda > MAX_DAMPING {
                break;
            }
        }
    }
    let _ = jac;
    if settings.accepts(&pose, target) && !self_collision_unchecked(chain, &q) {
        Some(q)
    } else {
        None
    }
}

fn obviously_unreachable(chain: &KinematicChain, target: &Pose, settings: &IkSettings) -> bool {
    let dist = match settings.match_mode {
        MatchMode::PlanarPosition => target.position.xy().norm(),
        _ => target.position.norm(),
    };
    dist > chain.reach_bound() + settings.position_tol
}

fn rng_for(settings: &IkSettings, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(settings.rng_seed);
    rng.set_stream(stream);
    rng
}

/// Single-solution search: `seed` first, then `restarts` random seeds drawn
/// from stream `stream` of the generator keyed by `settings.rng_seed`.
pub(crate) fn solve_ik_stream(
    chain: &KinematicChain,
    target: &Pose,
    settings: &IkSettings,
    seed: &[f64],
    stream: u64,
) -> Option<JointConfig> {
    if obviously_unreachable(chain, target, settings) {
        return None;
    }
    let limits = Limits::of(chain);
    if let Some(q) = descend(chain, target, settings, &limits, seed.to_vec()) {
        return Some(JointConfig::new(q));
    }
    let mut rng = rng_for(settings, stream);
    (0..settings.restarts).find_map(|_| {
        let start = limits.random(&mut rng);
        descend(chain, target, settings, &limits, start).map(JointConfig::new)
    })
}

/// Finds one joint configuration reaching `target`, starting from `seed`.
///
/// A returned solution is within joint limits, matches the target within
/// the settings' tolerances and is free of self-collision. `None` only means
/// the search budget ran out.
pub fn solve_ik(
    chain: &KinematicChain,
    target: &Pose,
    settings: &IkSettings,
    seed: &JointConfig,
) -> Result<Option<JointConfig>, KinematicsError> {
    settings.validate()?;
    check_dim(chain, seed)?;
    Ok(solve_ik_stream(chain, target, settings, seed, 0))
}

/// Up to `max_solutions` distinct solutions, sorted lexicographically.
pub fn solve_ik_multi(
    chain: &KinematicChain,
    target: &Pose,
    settings: &IkSettings,
) -> Result<Vec<JointConfig>, KinematicsError> {
    solve_ik_multi_seeded(chain, target, settings, &[])
}

/// Like [`solve_ik_multi`], trying `seeds` before the home configuration and
/// the random restarts.
pub fn solve_ik_multi_seeded(
    chain: &KinematicChain,
    target: &Pose,
    settings: &IkSettings,
    seeds: &[JointConfig],
) -> Result<Vec<JointConfig>, KinematicsError> {
    settings.validate()?;
    for s in seeds {
        check_dim(chain, s)?;
    }
    if obviously_unreachable(chain, target, settings) {
        return Ok(Vec::new());
    }
    let limits = Limits::of(chain);
    let mut rng = rng_for(settings, 0);
    let starts = seeds
        .iter()
        .map(|s| s.values().to_vec())
        .chain(std::iter::once(limits.home()))
        .chain((0..settings.restarts).map(|_| limits.random(&mut rng)));

    let mut found: Vec<Vec<f64>> = Vec::new();
    for start in starts {
        if found.len() >= settings.max_solutions {
            break;
        }
        if let Some(q) = descend(chain, target, settings, &limits, start) {
            if found
                .iter()
                .all(|f| limits.distance(f, &q) > settings.dedup_threshold)
            {
                found.push(q);
            }
        }
    }
    found.sort_by(|a, b| {
        a.iter()
            .zip(b)
            .map(|(x, y)| x.total_cmp(y))
            .find(|o| o.is_ne())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    Ok(found.into_iter().map(JointConfig::new).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kinematics::fixtures::*;
    use crate::kinematics::{analytic_ik_2r, forward_kinematics, self_collision};

    fn position_only() -> IkSettings {
        IkSettings {
            match_mode: MatchMode::Position,
            ..IkSettings::default()
        }
    }

    #[test]
    fn settings_validation() {
        assert!(IkSettings::default().validate().is_ok());
        let bad = IkSettings {
            max_solutions: 0,
            ..IkSettings::default()
        };
        assert!(bad.validate().is_err());
        let bad = IkSettings {
            position_tol: 0.0,
            ..IkSettings::default()
        };
        assert!(solve_ik_multi(&planar_2r(), &Pose::identity(), &bad).is_err());
    }

    #[test]
    fn boundary_target_is_unique() {
        let chain = planar_2r();
        let target = Pose::from_translation(2.0, 0.0, 0.0);
        let q = solve_ik(&chain, &target, &position_only(), &JointConfig::zeros(2))
            .unwrap()
            .unwrap();
        assert!(q.linf_distance(&JointConfig::zeros(2)) < 1e-2);
        let all = solve_ik_multi(&chain, &target, &position_only()).unwrap();
        assert_eq!(all.len(), 1, "{all:?}");
    }

    #[test]
    fn outside_reach_has_no_solution() {
        let chain = planar_2r();
        let target = Pose::from_translation(3.0, 0.0, 0.0);
        assert!(solve_ik(&chain, &target, &position_only(), &JointConfig::zeros(2))
            .unwrap()
            .is_none());
        assert!(solve_ik_multi(&chain, &target, &position_only()).unwrap().is_empty());
        // just outside the reach bound is also rejected by the search itself
        let target = Pose::from_translation(2.01, 0.0, 0.0);
        assert!(solve_ik_multi(&chain, &target, &position_only()).unwrap().is_empty());
    }

    #[test]
    fn interior_target_finds_both_elbows() {
        let chain = planar_2r();
        let target = Pose::from_translation(1.2, 0.5, 0.0);
        let oracle = analytic_ik_2r(1.0, 1.0, [1.2, 0.5]);
        assert_eq!(oracle.solutions.len(), 2);
        let found = solve_ik_multi(&chain, &target, &position_only()).unwrap();
        assert_eq!(found.len(), 2);
        for exact in &oracle.solutions {
            let best = found
                .iter()
                .map(|q| q.linf_distance(exact))
                .fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6, "closest numerical solution off by {best}");
        }
    }

    #[test]
    fn seeded_solve_converges_to_nearby_elbow() {
        let chain = planar_2r();
        let target = Pose::from_translation(1.2, 0.5, 0.0);
        let oracle = analytic_ik_2r(1.0, 1.0, [1.2, 0.5]);
        for exact in &oracle.solutions {
            let seed: Vec<f64> = exact.iter().map(|v| v + 0.1).collect();
            let q = solve_ik(&chain, &target, &position_only(), &JointConfig::new(seed))
                .unwrap()
                .unwrap();
            assert!(q.linf_distance(exact) < 1e-6);
        }
    }

    #[test]
    fn multi_is_deterministic() {
        let chain = planar_3r();
        let target = Pose::from_translation(1.1, 0.9, 0.0);
        let s = IkSettings {
            match_mode: MatchMode::Position,
            rng_seed: 42,
            ..IkSettings::default()
        };
        let a = solve_ik_multi(&chain, &target, &s).unwrap();
        let b = solve_ik_multi(&chain, &target, &s).unwrap();
        assert_eq!(a, b);
        assert!(!a.is_empty());
        for q in &a {
            assert!(q.within_limits(&chain));
            assert!(!self_collision(&chain, q).unwrap());
            let fk = forward_kinematics(&chain, q).unwrap();
            assert!(s.accepts(&fk, &target));
        }
        // pairwise distinct
        for (i, x) in a.iter().enumerate() {
            for y in &a[i + 1..] {
                assert!(x.linf_distance(y) > s.dedup_threshold);
            }
        }
    }

    #[test]
    fn full_pose_match_on_planar_3r() {
        let chain = planar_3r();
        let q_ref = [0.3, 0.8, -0.5];
        let target = forward_kinematics(&chain, &q_ref).unwrap();
        let s = IkSettings::default();
        let q = solve_ik(&chain, &target, &s, &JointConfig::zeros(3))
            .unwrap()
            .unwrap();
        let fk = forward_kinematics(&chain, &q).unwrap();
        let (pe, re) = pose_error(MatchMode::Pose, &fk, &target);
        assert!(pe <= s.position_tol && re <= s.orientation_tol);
    }

    #[test]
    fn z_axis_mode_ignores_spin() {
        // a target whose z-axis is flipped relative to the planar TCP z can
        // never be met; one spun about z is met in z-axis mode only
        let chain = planar_3r();
        let base = forward_kinematics(&chain, &[0.2, 0.4, 0.1]).unwrap();
        let spun = base.compose(&Pose::rot_z(0.7));
        let z_mode = IkSettings {
            match_mode: MatchMode::ZAxis,
            ..IkSettings::default()
        };
        assert!(z_mode.accepts(&base, &spun));
        assert!(!IkSettings::default().accepts(&base, &spun));
        let q = solve_ik(&chain, &spun, &z_mode, &JointConfig::zeros(3))
            .unwrap()
            .unwrap();
        let fk = forward_kinematics(&chain, &q).unwrap();
        assert!(z_mode.accepts(&fk, &spun));
    }

    #[test]
    fn planar_mode_ignores_height() {
        let chain = planar_2r();
        let target = Pose::from_translation(1.0, 1.0, 0.4);
        let s = IkSettings {
            match_mode: MatchMode::PlanarPosition,
            ..IkSettings::default()
        };
        assert_eq!(solve_ik_multi(&chain, &target, &s).unwrap().len(), 2);
        assert!(solve_ik_multi(&chain, &target, &position_only())
            .unwrap()
            .is_empty());
    }

    #[test]
    fn colliding_solutions_are_rejected() {
        // Target right next to the base: only reachable by folding link3
        // over link1, which collides.
        let chain = planar_3r();
        let q = [0.0, 178f64.to_radians(), -178f64.to_radians()];
        assert!(self_collision(&chain, &q).unwrap());
        let target = forward_kinematics(&chain, &q).unwrap();
        let s = IkSettings::default();
        for sol in solve_ik_multi(&chain, &target, &s).unwrap() {
            assert!(!self_collision(&chain, &sol).unwrap());
        }
        let direct = solve_ik(&chain, &target, &s, &JointConfig::new(q.to_vec())).unwrap();
        if let Some(sol) = direct {
            assert!(!self_collision(&chain, &sol).unwrap());
        }
    }

    #[test]
    fn dimension_errors() {
        let chain = planar_2r();
        assert!(matches!(
            solve_ik(&chain, &Pose::identity(), &IkSettings::default(), &JointConfig::zeros(3)),
            Err(KinematicsError::Dimension { .. })
        ));
    }
}
