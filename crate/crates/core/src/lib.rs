//! Volumetric MRI slice-thickness normalization and radiogenomic evaluation.
//!
//! The crate is organized bottom-up:
//!
//! - [`volume`]: 3D scalar grids, orientation handling, NIfTI-1 I/O, analytic phantoms.
//! - [`tensorkit`]: a small reverse-mode autodiff engine (conv, transposed conv, dense).
//! - [`isgen`]: the intermediate-slice generator, its discriminator, losses and On-Off training.
//! - [`normalize`]: copy and generator-based imputation to a fixed slice count.
//! - [`radiomics`]: location, shape, first-order, GLCM and GLRLM features.
//! - [`selection`]: central-image and tumor-centered slice windows.
//! - [`mlkit`]: CART trees, random forests, cross validation, metrics and ANOVA.

pub mod isgen;
pub mod mlkit;
pub mod normalize;
pub mod radiomics;
pub mod selection;
pub mod stats;
pub mod tensorkit;
pub mod volume;

pub use volume::{Mask3D, Orientation, Volume3D};
