//! Interaction-point representation for human-object interaction detection.
//!
//! Ground-truth triplets are encoded as per-action Gaussian heatmaps plus an
//! unsigned vector field pointing from each interaction point to its human.
//! At inference, heatmap peaks are decoded into candidates and grouped with
//! detector boxes; [`evaluator`] scores the resulting triplets with role mAP.

pub mod error;
pub mod evaluator;
pub mod geometry;
pub mod grouping;
pub mod heatmap;
pub mod hoi;
pub mod io;
pub mod losses;

pub use error::{Error, Result};
pub use evaluator::{evaluate, EvalReport, EvalSetting, GroundTruthSet};
pub use geometry::{BBox, CornerSet, Point2, UnsignedVector};
pub use grouping::{group, GroupedTriplet, GroupingConfig, GroupingMode};
pub use heatmap::{ClassHeatmap, InteractionCandidate, VectorField};
pub use hoi::{HoiRecord, InteractionSource, InteractionTriplet, ScoredDetection};
pub use losses::{FocalParams, LossReport};
