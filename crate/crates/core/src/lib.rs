//! Spectral analysis of nearly uncoupled stochastic matrices: planted
//! societies, main eigen-data, fundamental matrices, perturbation
//! expansions, family identification and seriation.

pub mod cli;
pub mod error;
pub mod fundamental;
pub mod generator;
pub mod identify;
pub mod io;
pub mod linalg;
pub mod model;
pub mod ordering;
pub mod perturbation;
pub mod render;
pub mod spectra;
pub mod verify;

pub use error::{Error, Result};
pub use model::{FamilyStructure, GroundTruth, Member, Permutation, PoliticsMatrix, Society};
