//! Closed-form calculators and the end-to-end pipeline report.

pub mod area;
pub mod occupancy;
pub mod pipeline;

pub use area::{area_estimate, AreaModel, Arch, Breakdown};
pub use occupancy::{occupancy, Limiter, Occupancy, OccupancyError, OccupancyInput, SmResources};
pub use pipeline::{run_pipeline, ErrorClass, PipelineConfig, PipelineError, PipelineRun, Report, Stage};
