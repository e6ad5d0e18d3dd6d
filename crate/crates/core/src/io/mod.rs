//! File formats: binary tensors, line-delimited records and the run config.
//!
//! File geometry is image-space; [`records::ingest_detections`] is the one
//! place that converts to grid units.

pub mod config;
pub mod records;
pub mod tensor;

pub use config::{DatasetMeta, DynamicThresholds, RunConfig};
pub use records::{
    candidates_to_string, detections_to_string, ingest_detections, read_candidates, read_records, records_to_string,
    CandidateRecord, DetectionRecord, DetectionSet, ImageDetections, IngestConfig, RecordSchema,
};
pub use tensor::{read_tensor, write_tensor, Tensor};
