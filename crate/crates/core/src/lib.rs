//! Reachability maps, inverse reachability maps and base placement for
//! serial manipulators.

pub mod collision;
pub mod error;
pub mod geometry;
pub mod grid;
pub mod inverse;
pub mod io;
pub mod kinematics;
pub mod placement;
pub mod reachability;
pub mod robot;
pub mod warning;

pub use error::{Error, ErrorClass, Result};
pub use geometry::Pose;
pub use warning::{Reported, Warning};
