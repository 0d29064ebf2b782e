//! Reachability map generation.

use nalgebra::Vector3;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, MapError};
use crate::geometry::{frame_at_point, sphere_points, Pose};
use crate::grid::voxelize;
use crate::kinematics::{solve_ik_stream, IkSettings, JointConfig};
use crate::robot::KinematicChain;
use crate::warning::{Reported, Warning};

/// Five reachability bins, from least to most reachable.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ColorBin {
    Red,
    Yellow,
    Green,
    SkyBlue,
    Blue,
}

impl ColorBin {
    pub const ALL: [ColorBin; 5] = [
        ColorBin::Red,
        ColorBin::Yellow,
        ColorBin::Green,
        ColorBin::SkyBlue,
        ColorBin::Blue,
    ];

    pub fn rgb(self) -> [u8; 3] {
        match self {
            ColorBin::Red => [255, 0, 0],
            ColorBin::Yellow => [255, 255, 0],
            ColorBin::Green => [0, 255, 0],
            ColorBin::SkyBlue => [135, 206, 235],
            ColorBin::Blue => [0, 0, 255],
        }
    }
}

/// Quintile bin of a measure in `[0, 100]`; bins are closed on the left.
pub fn color_bin(d: f64) -> Result<ColorBin, MapError> {
    if !(0.0..=100.0).contains(&d) {
        return Err(MapError::InvalidParameter(format!(
            "measure {d} outside [0, 100]"
        )));
    }
    Ok(match d {
        d if d < 20.0 => ColorBin::Red,
        d if d < 40.0 => ColorBin::Yellow,
        d if d < 60.0 => ColorBin::Green,
        d if d < 80.0 => ColorBin::SkyBlue,
        _ => ColorBin::Blue,
    })
}

/// Percentage of sampled poses that were reachable.
pub fn reach_measure(reached: usize, sampled: usize) -> Result<f64, MapError> {
    if sampled == 0 {
        return Err(MapError::InvalidParameter("sample count must be positive".into()));
    }
    if reached > sampled {
        return Err(MapError::InvalidParameter(format!(
            "{reached} reached poses exceed {sampled} samples"
        )));
    }
    Ok(100.0 * reached as f64 / sampled as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReachablePose {
    pub pose: Pose,
    pub witness: JointConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SphereRecord {
    pub voxel_index: usize,
    pub center: Vector3<f64>,
    pub n_sampled: usize,
    pub reachable_poses: Vec<ReachablePose>,
    pub reach_measure: f64,
    pub color_bin: ColorBin,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReachabilityMap {
    pub chain_fingerprint: String,
    pub resolution: f64,
    pub radius: f64,
    pub samples_per_sphere: usize,
    pub settings: IkSettings,
    /// Sorted by voxel index.
    pub spheres: Vec<SphereRecord>,
}

impl ReachabilityMap {
    pub fn pose_count(&self) -> usize {
        self.spheres.iter().map(|s| s.reachable_poses.len()).sum()
    }

    /// All reachable poses in sphere order, with their source voxel.
    pub fn poses(&self) -> impl Iterator<Item = (usize, &ReachablePose)> + '_ {
        self.spheres
            .iter()
            .flat_map(|s| s.reachable_poses.iter().map(move |p| (s.voxel_index, p)))
    }
}

/// Parameters of a map build besides the chain and IK settings.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MapParams {
    pub resolution: f64,
    pub radius: f64,
    pub samples_per_sphere: usize,
    /// Worker threads; results do not depend on it.
    pub workers: usize,
}

impl Default for MapParams {
    fn default() -> Self {
        Self {
            resolution: 0.08,
            radius: 1.0,
            samples_per_sphere: 50,
            workers: 1,
        }
    }
}

/// Sampled TCP frames on the sphere inscribed in a voxel.
pub fn sphere_frames(center: &Vector3<f64>, resolution: f64, samples: usize) -> Result<Vec<Pose>, Error> {
    Ok(frames_on(sphere_points(samples)?.points(), center, resolution / 2.0))
}

fn frames_on(unit: &[Vector3<f64>], center: &Vector3<f64>, radius: f64) -> Vec<Pose> {
    unit.iter().map(|u| frame_at_point(center, radius, u)).collect()
}

pub(crate) fn home_config(chain: &KinematicChain) -> Vec<f64> {
    chain.limits().map(|(lo, hi)| 0f64.clamp(lo, hi)).collect()
}

fn build_sphere(
    chain: &KinematicChain,
    settings: &IkSettings,
    voxel_index: usize,
    center: Vector3<f64>,
    frames: &[Pose],
) -> SphereRecord {
    let local = IkSettings {
        rng_seed: settings.rng_seed ^ voxel_index as u64,
        ..settings.clone()
    };
    let home = home_config(chain);
    let reachable_poses: Vec<ReachablePose> = frames
        .iter()
        .enumerate()
        .filter_map(|(j, frame)| {
            solve_ik_stream(chain, frame, &local, &home, j as u64).map(|q| ReachablePose {
                pose: *frame,
                witness: q,
            })
        })
        .collect();
    let d = 100.0 * reachable_poses.len() as f64 / frames.len() as f64;
    SphereRecord {
        voxel_index,
        center,
        n_sampled: frames.len(),
        reachable_poses,
        reach_measure: d,
        color_bin: color_bin(d).expect("measure within range"),
    }
}

/// Voxelizes the workspace around the arm base, samples frames on every
/// voxel sphere outside the static body and keeps those with an IK solution.
pub fn generate_reachability_map(
    chain: &KinematicChain,
    params: &MapParams,
    settings: &IkSettings,
) -> Result<Reported<ReachabilityMap>, Error> {
    settings.validate()?;
    if params.workers == 0 {
        return Err(MapError::InvalidParameter("workers must be at least 1".into()).into());
    }
    let grid = voxelize(params.radius, params.resolution, Vector3::zeros())?;
    let unit = sphere_points(params.samples_per_sphere)?;
    let radius = params.resolution / 2.0;

    let voxels: Vec<(usize, Vector3<f64>)> = (0..grid.len())
        .map(|i| (i, grid.center(i)))
        .filter(|(_, c)| !chain.point_in_body(c))
        .collect();

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(params.workers)
        .build()
        .map_err(|e| MapError::InvalidParameter(format!("cannot start workers: {e}")))?;
    let spheres: Vec<SphereRecord> = pool.install(|| {
        voxels
            .par_iter()
            .map(|&(i, c)| build_sphere(chain, settings, i, c, &frames_on(unit.points(), &c, radius)))
            .collect()
    });

    let warnings = if spheres.is_empty() {
        vec![Warning::EmptyWorkspace]
    } else {
        Vec::new()
    };
    Ok(Reported::new(
        ReachabilityMap {
            chain_fingerprint: chain.fingerprint(),
            resolution: params.resolution,
            radius: params.radius,
            samples_per_sphere: params.samples_per_sphere,
            settings: settings.clone(),
            spheres,
        },
        warnings,
    ))
}
