//! Ingestion and preprocessing of case data into SIR observation series.

mod cases;
mod dataset;
mod derive;
mod metadata;
mod queue;
mod synth;

pub use cases::{load_case_csv, parse_case_csv, CaseLoad, GapFill, RawCaseRecord};
pub use dataset::{build_region_dataset, PipelineOptions, RegionDataset, DEFAULT_START};
pub use derive::derive_susceptible_removed;
pub use metadata::{load_region_metadata, parse_region_metadata, RegionMeta};
pub use queue::{recovery_queue, DeathPolicy};
pub use synth::{piecewise_rt_at, synth_generate, synth_piecewise_rt, SYNTH_STEPS_PER_DAY};
