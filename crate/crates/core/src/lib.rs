//! Integer lookup-table image restoration.
//!
//! The pipeline splits each 8-bit pixel into most/least significant bit
//! planes, runs both planes through separable 3x3 table layers, fuses them,
//! pushes the result through a stack of shift blocks (channel-wise integer
//! shift, pointwise tables, depthwise 3x3 tables), and finishes with a
//! pointwise layer and a pixel shuffle. Four rotated passes are averaged.
//!
//! Every table is a one-dimensional map from a small integer index to an
//! `i8` entry, so inference is nothing but reads and integer sums.
//!
//! - [`tensor`]: planes, feature maps, bit split, shifts, pixel shuffle, rotation
//! - [`model`]: model descriptors and layer layout
//! - [`reference`]: seedable floating-point model built from scalar unit functions
//! - [`transfer`]: exhaustive conversion of a reference model into tables
//! - [`engine`]: table types and the integer forward pass
//! - [`eas`]: error-bounded per-table stride search and cached inference
//! - [`metrics`]: PSNR, SSIM, PSNR-B, receptive field, storage accounting
//! - [`color`]: RGB images and luma conversion
//!
//! The crate is `no_std` (with `alloc`) unless the `std` feature is enabled.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod color;
pub mod eas;
pub mod engine;
mod error;
pub mod metrics;
pub mod model;
mod num;
pub mod reference;
pub mod tensor;
pub mod transfer;

pub use error::{Error, Result};
pub use num::{round_div, round_half_away};
