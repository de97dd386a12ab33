//! Per-view coarse-to-fine depth refinement driver.

mod adam;
mod config;
mod consistency;
mod objective;
mod refine;
mod scheduler;

pub use adam::{AdamState, DepthBounds, ADAM_BETA1, ADAM_BETA2, ADAM_EPS};
pub use config::{Preset, RefineConfig};
pub use consistency::consistency_filter;
pub use objective::{CameraView, Evaluation, Objective, ViewTerm};
pub use refine::{
    depth_threshold_from_init, level_objective, refine_dataset, refine_view, DatasetOutput, LevelReport, RefineOutput, RefineReport, RunRecord,
    DEPTH_THRESHOLD_FLOOR,
};
pub use scheduler::{PlateauScheduler, ScheduleAction};
