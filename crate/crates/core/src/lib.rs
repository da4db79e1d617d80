//! Simulation and analysis of a two-dimensional incompressible shear flow in a
//! periodic channel whose flat bottom wall drives the fluid through a Tresca
//! friction law.
//!
//! The unknown is the perturbation velocity `v = u - U(x2) e1` around a smooth
//! background profile, evolved with a penalty-regularized friction functional.
//! On top of the solver sit energy diagnostics (Poincaré and Ladyzhenskaya
//! constants, energy inequality, absorbing ball) and trajectory-window tools
//! (shifts, Hölder fits, dimension estimates).

pub mod background;
pub mod diagnostics;
pub mod dynamics;
mod error;
pub mod friction;
pub mod geometry;
pub mod harness;
pub mod linalg;
pub mod sampling;
pub mod solver;

pub use background::BackgroundFlow;
pub use error::{Error, Result};
pub use friction::{FrictionModel, WallTrace};
pub use geometry::{ChannelGeometry, GapProfile, MappedGrid};
pub use solver::{SolverConfig, State};
