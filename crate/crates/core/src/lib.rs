//! Simulation and analysis toolkit for a heralded single-photon entanglement
//! link between two spin-wave memory nodes.
//!
//! - [`models`]: closed-form memory, source and interference models
//! - [`tomography`]: density-matrix elements and entanglement metrics
//! - [`tsanalysis`]: timestamp streams, coincidence histograms, fringe fits
//! - [`linksim`]: seeded Monte Carlo link simulator and rate budget

pub mod linksim;
pub mod measure;
pub mod models;
pub mod tomography;
pub mod tsanalysis;

pub use measure::Measured;
