//! Orchestration of the whole pipeline, synthetic corpora and statistics.

mod config;
mod corpus;
mod run;
mod stats;

pub use config::PipelineConfig;
pub use corpus::{box_mesh, cylinder_mesh, gen_synthetic_corpus, ShapeFamily};
pub use run::*;
pub use stats::{report_stats, PlaneCounts, StageTimings, StatsReport, NO_INTERSECTIONS_WARNING};
