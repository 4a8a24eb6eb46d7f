//! Raster multi-criteria site suitability analysis for utility-scale solar.
//!
//! The modules follow the processing chain: grids and I/O ([`raster`]),
//! terrain and proximity derivations ([`spatial`], [`kriging`]), criterion
//! grading ([`reclass`]), judgment-based weighting ([`ahp`]), and the
//! decision step itself ([`mcda`]). [`pipeline`] ties them together behind
//! scenario config files and writes run artifacts.

// Negated comparisons are how NaN inputs get rejected; matrix code keeps
// explicit indices.
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod ahp;
pub mod error;
pub mod kriging;
pub mod mcda;
pub mod pipeline;
pub mod presets;
pub mod raster;
pub mod reclass;
pub mod spatial;

pub use error::{Error, Result};
pub use raster::{Grid, GridHeader};
pub use reclass::CriterionId;
