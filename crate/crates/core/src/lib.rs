//! Numerical laboratory for the two-species Vlasov-Poisson-Landau system near a
//! global Maxwellian.

pub mod error;
pub mod fft;
pub mod grid;
pub mod initial;
pub mod coercivity;
pub mod collision;
pub mod decay;
pub mod dense;
pub mod energy;
pub mod kernel;
pub mod macroscopic;
pub mod mode;
pub mod norms;
pub mod solver;
pub mod spectral;
pub mod symmetry;
pub mod weyl;

pub use error::{Result, VplError};
pub use grid::{Branch, GridConfig, Maxwellian, PhaseGrid, SpatialGrid, VelocityGrid, VelocityWeight};
