//! Simulation and verification engine for networks of boundary-controlled
//! heat-equation agents coupled over an undirected graph.
//!
//! The crate provides the graph/spectral layer, spatially sampled agent
//! fields with discrete Sobolev norms, the linear averaging and dynamic
//! sliding-mode protocols, boundary disturbances, the Lyapunov/disagreement
//! analysis toolkit, and a scenario runner with CSV/plot emission.

pub mod analysis;
pub mod disturbance;
pub mod dynamics;
pub mod experiments;
pub mod field;
pub mod graph;
pub mod protocols;
pub mod verify;
