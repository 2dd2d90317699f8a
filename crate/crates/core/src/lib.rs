//! Corridor-constrained motion planning and tracking for a truck towing an
//! off-axle hitched trailer.
//!
//! - [`vehicle`]: kinematic model and RK4 integration
//! - [`geometry`]: convex corridors, body vertices, route checks
//! - [`ocp`]: three-stage corridor optimal control problem
//! - [`trajectory`]: timed reference trajectories and stitching
//! - [`mpc`]: receding-horizon planner
//! - [`tracking`]: cascaded feedback controller
//! - [`sim`]: deterministic closed-loop simulator

pub mod geometry;
pub mod mpc;
pub mod ocp;
pub mod sim;
pub mod tracking;
pub mod trajectory;
pub mod vehicle;

pub use geometry::{Body, Corridor, Halfplane, Pose, Route};
pub use vehicle::{Control, State, VehicleParams};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum CoreError {
    #[error("invalid vehicle parameters: {0}")]
    InvalidParams(String),
    #[error("invalid corridor: {0}")]
    InvalidCorridor(String),
    #[error("invalid route: {0}")]
    InvalidRoute(String),
    #[error("invalid OCP specification: {0}")]
    InvalidSpec(String),
    #[error("invalid trajectory: {0}")]
    InvalidTrajectory(String),
    #[error("initial state is outside the first corridor")]
    StartOutsideRoute,
    #[error("planning failed: {0}")]
    PlanFailed(String),
    #[error("simulation failed: {0}")]
    SimFailed(String),
}
