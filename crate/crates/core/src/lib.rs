//! Per-region scan resolution acceptability.
//!
//! Given a 300 dpi page and its segmentation, each raster-image region is
//! degraded to 200, 150 and 100 dpi, compared against the original through
//! nine quality features, and classified acceptable or not by a kernel SVM.
//! The crate also covers the surrounding experiment: noise augmentation
//! calibrated on SSIM, sequential floating forward selection, repeated
//! stratified cross-validation, a synthetic corpus generator and an HTTP
//! service for collecting human ratings.

pub mod cli;
pub mod corpus;
pub mod error;
pub mod eval;
pub mod learn;
pub mod metrics;
pub mod noise;
pub mod raster;
pub mod seed;
pub mod serve;
pub mod sffs;

pub use error::{Error, Result};
pub use raster::{DpiLevel, GrayImage};
