//! Pointwise algebraic curvature analysis: Weyl decomposition, Jacobi
//! spectra, conformally Osserman tests and recovery of complex structures
//! on conformally complex space forms.

pub mod chart_geometry;
pub mod classifier;
pub mod cli_report;
pub mod curvature_algebra;
pub mod error;
pub mod jet;
pub mod models;
pub mod spectral;
pub mod tensor_core;
pub mod tolerance;

pub use error::{Error, Result};
pub use tensor_core::{
    CurvatureTensor, HermitianStructure, InnerProduct, SelfAdjointEndo, SkewAdjointEndo, TangentVector,
};
pub use tolerance::Tier;
