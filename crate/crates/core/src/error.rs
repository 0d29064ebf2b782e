use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum GeometryError {
    #[error("sphere sampling needs at least one point")]
    EmptySampling,
    #[error("invalid pose: {0}")]
    InvalidPose(String),
}

#[derive(Debug, Error)]
pub enum RobotError {
    #[error("malformed robot description at line {line}, column {column}: {message}")]
    Xml {
        line: u32,
        column: u32,
        message: String,
    },
    #[error("<{element}> at line {line}: {message}")]
    Element {
        element: String,
        line: u32,
        message: String,
    },
    #[error("unsupported topology at line {line}: {message}")]
    UnsupportedTopology { line: u32, message: String },
    #[error("degenerate chain: {0}")]
    DegenerateChain(String),
}

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("joint configuration has {got} values, chain has {expected} movable joints")]
    Dimension { expected: usize, got: usize },
    #[error("invalid IK settings: {0}")]
    InvalidSettings(String),
}

#[derive(Debug, Error)]
pub enum GridError {
    #[error("resolution must satisfy 0 < resolution <= radius (resolution {resolution}, radius {radius})")]
    InvalidResolution { resolution: f64, radius: f64 },
}

#[derive(Debug, Error)]
pub enum MapError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("corrupt map file: {0}")]
    Corrupt(String),
    #[error("unsupported map format version {found} (expected {expected})")]
    VersionMismatch { found: u32, expected: u32 },
    #[error("map was generated for chain fingerprint {found}, expected {expected}")]
    FingerprintMismatch { expected: String, found: String },
    #[error("expected a {expected} map, file holds a {found} map")]
    WrongKind { expected: String, found: String },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
}

#[derive(Debug, Error)]
pub enum PlacementError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("task pose set is empty")]
    EmptyTasks,
    #[error("inverse reachability map is empty")]
    EmptyMap,
    #[error("no union-map sphere lies within {tolerance} m of ground height {ground_z}")]
    NoGroundSpheres { ground_z: f64, tolerance: f64 },
    #[error("no sampled yaw at any ground sphere reaches all {tasks} task poses")]
    NoYawReachesAllTasks { tasks: usize },
}

/// Broad failure classes, used by the command-line front end to pick exit
/// codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Parse,
    Parameter,
    NoSolution,
    Io,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Robot(#[from] RobotError),
    #[error(transparent)]
    Kinematics(#[from] KinematicsError),
    #[error(transparent)]
    Grid(#[from] GridError),
    #[error(transparent)]
    Map(#[from] MapError),
    #[error(transparent)]
    Placement(#[from] PlacementError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Format(String),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Robot(_) | Error::Format(_) => ErrorClass::Parse,
            Error::Map(MapError::Io { .. }) | Error::Io { .. } => ErrorClass::Io,
            Error::Map(MapError::Corrupt(_))
            | Error::Map(MapError::VersionMismatch { .. })
            | Error::Map(MapError::WrongKind { .. }) => ErrorClass::Parse,
            Error::Map(_) => ErrorClass::Parameter,
            Error::Placement(PlacementError::NoGroundSpheres { .. })
            | Error::Placement(PlacementError::NoYawReachesAllTasks { .. }) => {
                ErrorClass::NoSolution
            }
            Error::Geometry(_) | Error::Kinematics(_) | Error::Grid(_) | Error::Placement(_) => {
                ErrorClass::Parameter
            }
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
