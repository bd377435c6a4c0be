//! File formats, persistence, experiments and the command line for
//! out-of-intended-distribution detection.
//!
//! The detection algorithms live in [`oidd_core`] (re-exported as
//! [`core`]); this crate adds the OIDT tensor format and PGM/PPM images
//! ([`tensorio`]), a file-backed segmentation backend ([`backend`]),
//! on-disk reference sets ([`refstore`]) and synthetic corpora
//! ([`corpus_io`]), and the evaluation runner ([`experiment`]).

pub mod backend;
pub mod convergence;
pub mod corpus_io;
pub mod error;
pub mod experiment;
pub mod params;
pub mod refstore;
pub mod tensorio;

pub use error::{Error, Result};
pub use oidd_core as core;
