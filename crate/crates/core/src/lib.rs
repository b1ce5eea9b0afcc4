//! Finite-volume solvers for hierarchies of orientation moments of rod-like particles
//! sedimenting in a viscous fluid.
//!
//! The moment systems are advanced with a high-resolution wave-propagation scheme that
//! allows the number of moments to change between regions of a 1D grid. They are
//! coupled to a shear-flow diffusion equation in 1D or an incompressible Navier-Stokes
//! solver in 2D by Strang splitting. Residual indicators estimate where more moments
//! are needed.

pub mod error;
pub mod flow;
pub mod harness;
pub mod indicator;
pub mod linalg;
pub mod moment_model;
pub mod par;
pub mod riemann;
pub mod solver1d;
pub mod solver2d;
pub mod splitting;

pub use error::{Error, Result};
pub use flow::{Grid2D, NavierStokes2D, StaggeredVelocity1D, StaggeredVelocity2D};
pub use moment_model::{ModelParams, MomentVector, VelocityGradient2D};
pub use par::Execution;
pub use riemann::Limiter;
pub use solver1d::{Grid1D, MomentField1D, Region, ResolutionMap, SolverOptions};
pub use solver2d::MomentField2D;
pub use splitting::{ShearState, TwoDimState};
