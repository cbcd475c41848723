//! Maximal structuring of acyclic process models.
//!
//! The pipeline decomposes a model into its refined process structure tree,
//! maps unstructured (rigid) components to workflow nets, computes a complete
//! prefix of the net unfolding, derives the ordering relations between
//! observable events, and rebuilds each rigid from the modular decomposition
//! of those relations — synthesizing structured logic from behavior where the
//! original gateway layout has none.

pub mod equivalence;
pub mod error;
pub mod fixtures;
pub mod model;
pub mod mdt;
pub mod net;
pub mod org;
pub mod restructure;
pub mod rpst;
pub mod synthesis;
pub mod unfold;

pub use error::{Error, Result};
