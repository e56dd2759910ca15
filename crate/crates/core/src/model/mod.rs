//! A piecewise-affine, partially hyperbolic model of a simple cycle.
//!
//! Charts cover each phase of the saddles A and B and each step of the two
//! transitions. Orbits are given by itinerary words and realized as fixed
//! points of the composed branch maps.

mod orbit;
mod system;
mod word;

use thiserror::Error;

pub use orbit::{
    central_exponent, child_cycle, min_orbit_gap, orbit_points, realize_orbit, CentralIter,
    CentralPoint, ChildCycle, OrbitPoints, PeriodicOrbit,
};
pub use system::{
    build_model, AmbientPoint, BranchMap, ChartId, CycleSpec, CycleSystem, StrongOffsets,
};
pub use word::{ItineraryWord, Move, Moves, Token};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ModelError {
    #[error("model specification violated: {0}")]
    SpecViolation(String),
    #[error("no branch from chart {from} to chart {to}")]
    NoBranch { from: ChartId, to: ChartId },
    #[error("word has central multiplier {slope} of modulus 1")]
    DegenerateWord { slope: f64 },
    #[error("parent orbit is not anchored: {0}")]
    ParentNotAnchored(String),
    #[error("malformed word: {0}")]
    MalformedWord(String),
}
