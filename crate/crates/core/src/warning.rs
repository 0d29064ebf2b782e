use std::fmt;

use serde::Serialize;

/// Non-fatal conditions reported alongside a result.
#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Warning {
    DefaultJointLimits { joint: String },
    EmptyWorkspace,
    EmptyMap,
    OutOfGridPoints { count: usize },
    FewerSpheresThanRequested { requested: usize, available: usize },
    NoReachableTasks,
    FingerprintMismatch { expected: String, found: String },
}

impl fmt::Display for Warning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Warning::DefaultJointLimits { joint } => {
                write!(f, "joint '{joint}' has no limits, using [-pi, pi]")
            }
            Warning::EmptyWorkspace => write!(f, "every voxel was filtered out, map is empty"),
            Warning::EmptyMap => write!(f, "source map holds no poses"),
            Warning::OutOfGridPoints { count } => {
                write!(f, "{count} points fell outside the grid and were snapped to boundary voxels")
            }
            Warning::FewerSpheresThanRequested {
                requested,
                available,
            } => write!(f, "requested {requested} spheres, only {available} available"),
            Warning::NoReachableTasks => {
                write!(f, "no candidate reaches any task pose")
            }
            Warning::FingerprintMismatch { expected, found } => {
                write!(f, "map chain fingerprint {found} differs from {expected}")
            }
        }
    }
}

/// A value together with the warnings raised while producing it.
#[derive(Debug, Clone)]
pub struct Reported<T> {
    pub value: T,
    pub warnings: Vec<Warning>,
}

impl<T> Reported<T> {
    pub fn new(value: T, warnings: Vec<Warning>) -> Self {
        for w in &warnings {
            log::warn!("{w}");
        }
        Self { value, warnings }
    }

    pub fn clean(value: T) -> Self {
        Self {
            value,
            warnings: Vec::new(),
        }
    }
}
