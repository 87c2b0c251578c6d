//! Numerical realization of finite-dimensional Kuranishi atlases: axiom
//! validation, reductions, collared thickenings, gluing into a weighted
//! branched space with a global section, and exact rational zero counts.

pub mod atlas;
pub mod circles;
pub mod collar;
pub mod error;
pub mod euler;
pub mod examples;
pub mod gluing;
pub mod reduction;
pub mod report;
pub mod thickening;
pub mod util;
pub mod vfc;

pub use atlas::{Atlas, IndexSet, Mutation};
pub use error::{KgError, Result};
pub use report::Report;
