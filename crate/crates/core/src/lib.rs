//! Phase-plane analysis, Poincaré maps, stretching verification and
//! connecting orbits for `ε²u'' + u(1-u)(u-a(s)) = 0` with a two-valued
//! stepwise weight `a`.

pub mod error;
pub mod flow;
pub mod itinerary;
pub mod manifolds;
pub mod ode;
pub mod path;
pub mod phase;
pub mod quadrature;
pub mod regions;
pub mod roots;
pub mod stretch;

pub use error::{Error, Result};
pub use path::{PathPoint, PlanarPath};
pub use phase::{EnergyLevel, LevelClass, LevelTag, PhasePoint, SystemParams};
