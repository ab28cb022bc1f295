//! Surface texture decomposition into form, waviness and roughness.
//!
//! Three backends split a height field: a multilevel bior4.4 wavelet
//! transform with an energy-jump level threshold ([`dwt`]), a 2D DCT with an
//! entropy-slope mode threshold ([`dct`]), and Gaussian filtering
//! ([`gauss`]). Roughness components feed the profile and areal parameters
//! in [`features`], which drive the cross-validated baseline classifier in
//! [`classify`]. [`pipeline`] ties generation, decomposition, features and
//! evaluation together.

pub mod classify;
pub mod dct;
pub mod decomposition;
pub mod dwt;
pub mod error;
pub mod features;
pub mod gauss;
pub mod grid;
pub mod io;
pub mod pipeline;
pub mod preprocess;
pub mod report;
mod spectral;
pub mod synth;

pub use decomposition::{Decomposition, ReportFlags, ThresholdMethod, ThresholdReport, ThresholdValue};
pub use error::{Error, Result};
pub use grid::{extract_profiles, quantize_to_gray, Direction, GrayImage, Profile, ProfileOrigin, SurfaceGrid};
