//! Simulation and exact numerics for perturbed lattices `{v + ξ_v : v ∈ ℤ^d}`:
//! hole probabilities, multiscale dyadic covers, cover-neighborhood
//! matchings and one-dimensional greedy stable matchings.

pub mod analytics;
pub mod cover;
pub mod error;
pub mod geometry;
pub mod matching;
pub mod oned;
pub mod process;
pub mod rng;
pub mod special;

pub use error::{Error, Result};
pub use geometry::{enclosing_box, linf_distance, segment_intersects_box, Cube, DyadicBox};
pub use process::{sample_realization, LawKind, LawSpec, PerturbationLaw, WindowRealization};
