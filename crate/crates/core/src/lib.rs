//! Out-of-intended-distribution detection primitives.
//!
//! An input is judged by its semantically relevant part only: the foreground
//! of a segmentation map (scored with [`segscore::bls`] / [`segscore::ods`]) or
//! a binarized expert segmentation compared against a per-class reference set
//! with a non-negative SSIM ([`refdetect`]). Every score follows the same
//! orientation: higher means more in-distribution, and an input is flagged
//! when its score falls strictly below a threshold.
//!
//! The crate is `no_std` and needs only `alloc`. File formats, persistence and
//! the command line live in the `oidd` companion crate.

#![cfg_attr(not(test), no_std)]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(feature = "std")]
extern crate std;

mod error;
mod math;

pub mod empdist;
pub mod felzseg;
pub mod image;
pub mod metrics;
pub mod odin;
pub mod refdetect;
pub mod segscore;
pub mod ssim;
pub mod synth;
pub mod toyseg;

pub use error::{Error, Result};
pub use image::{BinaryMap, GrayMap, Plane, RgbImage, SegMap};
pub use segscore::{DetectionScore, ScoreKind, SegmentationBackend, Verdict};
