//! Environments the swarm can be run against.

mod centralized;
pub mod grid_file;
pub mod persistent;
pub mod quadratic;
pub mod terrain;
pub mod voronoi;

pub use centralized::Centralized;
pub use grid_file::GridFile;
