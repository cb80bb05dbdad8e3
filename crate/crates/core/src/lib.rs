//! Logical composition of closed visual questions.
//!
//! Boolean formulas over yes/no questions, their surface realization and
//! parsing, dataset generation from VQA/COCO annotations, the Fréchet
//! compatibility loss and an evaluation harness.

pub mod antonyms;
pub mod boolform;
pub mod cli;
pub mod datagen;
pub mod evalharness;
pub mod lossmath;
pub mod qparser;
pub mod synth;
pub mod textgen;
mod util;

pub use boolform::{Formula, Source};
pub use datagen::{ComposedSample, GenConfig};
