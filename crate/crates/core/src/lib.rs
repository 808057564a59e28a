//! Height-growth profiles of rational points under polynomial self-maps of products of
//! projective spaces, and orbit-intersection search with explicit gap bounds.
//!
//! Everything is computed from exact integer orbits; floating point only enters through
//! logarithms of exact integers.

pub mod asymptotics;
pub mod canonical;
pub mod dml;
pub mod error;
pub mod geometry;
pub mod heights;
pub mod linalg;
pub mod poly;
pub mod precision;
pub mod profile;
pub mod spectrum;
pub mod stats;

pub use error::{Error, Result};
pub use geometry::{MorphismSpec, OrbitSegment, ProductSpace, ProjectiveTuplePoint, RegularityMode};
pub use heights::{DivisorClass, HeightSequence};
