//! Volumetric toolkit for new-lesion detection in longitudinal FLAIR MRI.
//!
//! The crate is split into four areas:
//!
//! - [`volume`]: the `Volume` / mask data model, a strict NIfTI-1 subset reader
//!   and writer, 3D connected components and lesion volumetrics.
//! - [`augment`]: image-quality artifact simulation (spatial filters,
//!   resolution loss, noise, bias field and k-space artifacts) driven by
//!   reproducible, serializable plans.
//! - [`synth`]: generation of synthetic time-point pairs with a known
//!   new-lesion mask from a single scan and its lesion segmentation.
//! - [`metrics`]: Dice, lesion-wise detection metrics, ensemble consensus
//!   and the Wilcoxon signed-rank test.
//!
//! All voxel buffers use x-fastest order: `index = x + nx * (y + ny * z)`,
//! which is also the on-disk NIfTI order. Axis 2 (z) is the axial axis.

pub mod augment;
pub mod error;
pub mod fft;
pub mod filter;
pub mod metrics;
pub mod range;
pub mod synth;
pub mod volume;

pub use error::{Error, Result};
pub use volume::{BinaryMask, Connectivity, Geometry, LabeledMask, Volume};
