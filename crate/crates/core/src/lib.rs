//! Thickness stratification of binary vessel masks.
//!
//! The crate splits a binary vessel mask into disjoint thickness strata by
//! hierarchical morphological opening, checks the erasure behaviour of the
//! opening against a discrete Fréchet diameter oracle, evaluates the
//! two-stream training objectives on supplied arrays, fuses prediction maps,
//! and scores segmentations (Acc/Sens/Spec, ROC and AUC).
//!
//! Module map:
//!
//! - [`raster`]: masks, gray images, PNG/PNM I/O, mask algebra, labeling
//! - [`morphology`]: erosion, dilation and opening with square kernels
//! - [`stratify`]: semi-limited masks, strata, the thin/stem/raw stack, fusion
//! - [`geometry`]: Chebyshev metric, discrete Fréchet distance, synthetic tubes
//! - [`losses`]: Frobenius, adversarial and L1 objective evaluators
//! - [`metrics`]: confusion counts, summaries, ROC/AUC, dataset aggregation
//! - [`cli`]: dataset manifests, run configuration and the subcommands

pub mod cli;
pub mod error;
pub mod geometry;
pub mod losses;
pub mod metrics;
pub mod morphology;
pub mod raster;
pub mod stratify;

pub use error::{Error, Result};
pub use raster::{BinaryMask, GrayImage, PixelCoord};
