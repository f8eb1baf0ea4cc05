//! Gathering of asynchronous, oblivious, crash-prone point robots in 3D
//! that agree only on the direction of the Z axis.
//!
//! - [`geom3`]: horizontal circles, 45° cones, triangle peaks, nearest points.
//! - [`config`]: plane stacks and the three configuration classes.
//! - [`robot`]: local frames and the destination rule.
//! - [`sim`]: the Look-Compute-Move simulator and its invariant monitors.
//! - [`cli`]: file formats and the `gather3d` subcommands.

pub mod cli;
pub mod config;
pub mod geom3;
pub mod robot;
pub mod sim;

pub use config::{ConfigClass, Configuration, PlaneStack};
pub use geom3::{CircleZ, Point3, Tolerances};
pub use robot::{Decision, LocalFrame, Rule, Snapshot};
pub use sim::{run, FaultPlan, SimParams, Trace};
