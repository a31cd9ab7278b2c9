//! Finite elements and Monte Carlo sampling for coupled free-flow / porous
//! heat transport with a random hydraulic conductivity.

pub mod assembly;
pub mod elements;
pub mod error;
pub mod linalg;
pub mod mcm;
pub mod mesh;
#[cfg(any(test, feature = "oracle"))]
pub mod properties;
pub mod randfield;
pub mod space;
pub mod stepper;
pub mod verify;
