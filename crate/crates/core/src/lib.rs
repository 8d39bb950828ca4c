//! Near-minimum-lap-time racing trajectories for closed circuits and open
//! track segments.
//!
//! Each iteration computes a friction-limited speed profile for the current
//! path ([`speed`]), then moves the path inside the track by solving a convex
//! curvature-minimization problem over an affine time-varying bicycle model
//! ([`curvature`], [`vehicle`], [`qp`]). The loop in [`pipeline`] repeats the
//! two steps until the predicted lap time stops improving. [`sim`] checks the
//! result with a closed-loop nonlinear simulation.

pub mod curvature;
pub mod error;
pub mod exec;
pub mod fixtures;
pub mod io;
pub mod pipeline;
pub mod qp;
pub mod sim;
pub mod speed;
pub mod track;
pub mod vehicle;

pub use error::{Error, Result};
pub use exec::Exec;
pub use track::{BoundaryCloud, Point, TrackPath};
pub use vehicle::VehicleParams;
