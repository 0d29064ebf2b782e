//! `reachkit` command-line driver.

mod commands;
mod manifest;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use reachkit::kinematics::MatchMode;
use reachkit::placement::{PlacebaseMode, PlacementMethod};
use reachkit::ErrorClass;

#[derive(Debug, Parser)]
#[command(name = "reachkit", version, about = "Reachability maps, inverse reachability maps and robot base placement")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Build a reachability map for a robot description.
    Generate(GenerateArgs),
    /// Invert a reachability map into an inverse reachability map.
    Invert(InvertArgs),
    /// Rank robot base poses for a set of task poses.
    Place(PlaceArgs),
    /// Summarize a map file.
    Inspect(InspectArgs),
    /// Write a map file's spheres as a colored PLY point cloud.
    ExportPly(ExportPlyArgs),
    /// Rerun a command from its manifest and compare output hashes.
    Replay(ReplayArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MatchArg {
    Pose,
    ZAxis,
    Position,
    PlanarPosition,
}

impl From<MatchArg> for MatchMode {
    fn from(m: MatchArg) -> Self {
        match m {
            MatchArg::Pose => MatchMode::Pose,
            MatchArg::ZAxis => MatchMode::ZAxis,
            MatchArg::Position => MatchMode::Position,
            MatchArg::PlanarPosition => MatchMode::PlanarPosition,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MethodArg {
    Pca,
    Grasp,
    Ik,
    Vertical,
}

impl From<MethodArg> for PlacementMethod {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Pca => PlacementMethod::Pca,
            MethodArg::Grasp => PlacementMethod::GraspReachability,
            MethodArg::Ik => PlacementMethod::IkSolution,
            MethodArg::Vertical => PlacementMethod::Vertical,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum PlacebaseArg {
    Normalized,
    AsPrinted,
}

impl From<PlacebaseArg> for PlacebaseMode {
    fn from(m: PlacebaseArg) -> Self {
        match m {
            PlacebaseArg::Normalized => PlacebaseMode::Normalized,
            PlacebaseArg::AsPrinted => PlacebaseMode::AsPrinted,
        }
    }
}

#[derive(Debug, Args)]
pub struct SeedArg {
    /// Random seed for IK restarts.
    #[arg(long, env = "REACHKIT_SEED", default_value_t = 0)]
    pub seed: u64,
}

#[derive(Debug, Args)]
pub struct GenerateArgs {
    /// Robot description (URDF subset).
    pub robot: PathBuf,
    /// Voxel edge length in meters.
    #[arg(long, default_value_t = 0.08)]
    pub resolution: f64,
    /// Half-extent of the voxelized workspace in meters.
    #[arg(long, default_value_t = 1.0)]
    pub radius: f64,
    /// Frames sampled on each voxel sphere.
    #[arg(long, default_value_t = 50)]
    pub samples: usize,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Worker threads; the map does not depend on it.
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Which part of each sampled frame the TCP must match.
    #[arg(long, value_enum, default_value_t = MatchArg::Pose)]
    pub match_mode: MatchArg,
    /// Random IK restarts per frame.
    #[arg(long, default_value_t = 16)]
    pub restarts: u32,
    /// IK iterations per attempt.
    #[arg(long, default_value_t = 200)]
    pub max_iterations: u32,
    /// Output map file; the PLY export and manifest are written beside it.
    #[arg(long, default_value = "reachability_map.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct InvertArgs {
    /// Reachability map file.
    pub map: PathBuf,
    /// Output inverse map file; the PLY export and manifest are written beside it.
    #[arg(long, default_value = "inverse_map.json")]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PlaceArgs {
    /// Inverse reachability map file.
    pub irm: PathBuf,
    /// Task pose file (JSON array of {position, orientation_quaternion, label?}).
    pub tasks: PathBuf,
    /// Robot description the map was generated for.
    #[arg(long)]
    pub robot: PathBuf,
    #[arg(long, value_enum, default_value_t = MethodArg::Pca)]
    pub method: MethodArg,
    /// Candidates returned; must not exceed --m.
    #[arg(long, default_value_t = 3)]
    pub n: usize,
    /// Highest-scoring union-map spheres searched.
    #[arg(long, default_value_t = 10)]
    pub m: usize,
    /// Yaw samples per ground sphere (vertical method).
    #[arg(long, default_value_t = 16)]
    pub yaw_samples: usize,
    /// Ground height in meters (vertical method).
    #[arg(long, default_value_t = 0.0, allow_negative_numbers = true)]
    pub ground_z: f64,
    #[arg(long, value_enum, default_value_t = PlacebaseArg::Normalized)]
    pub placebase_mode: PlacebaseArg,
    #[command(flatten)]
    pub seed: SeedArg,
    /// Load the map even if it was generated for a different description.
    #[arg(long)]
    pub allow_fingerprint_mismatch: bool,
    /// Output report file; the manifest is written beside it.
    #[arg(long, default_value = "placement.json")]
    pub out: PathBuf,
    /// Also export the union map as a PLY point cloud.
    #[arg(long)]
    pub ply: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct InspectArgs {
    /// Reachability or inverse reachability map file.
    pub map: PathBuf,
    /// Print the summary as JSON.
    #[arg(long)]
    pub json: bool,
    /// Also write the JSON summary (and a manifest) to this file.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ExportPlyArgs {
    /// Reachability or inverse reachability map file.
    pub map: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ReplayArgs {
    /// Manifest written by an earlier run.
    pub manifest: PathBuf,
}

fn exit_code(class: ErrorClass) -> u8 {
    match class {
        ErrorClass::Parse => 2,
        ErrorClass::Parameter => 3,
        ErrorClass::NoSolution => 4,
        ErrorClass::Io => 5,
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    match commands::run(cli, args) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(e.class()))
        }
    }
}
