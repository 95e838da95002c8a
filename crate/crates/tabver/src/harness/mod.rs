//! Dataset handling, configuration, the end-to-end pipeline, evaluation,
//! and synthetic corpus generation.

mod config;
mod dataset;
mod eval;
mod pipeline;
mod synthetic;

pub use config::{
    BackendSpec, ConfigError, EncoderSection, PipelineConfig, RetrievalSection, RuntimeSection,
    SynthSection, TrainSection, VerifierSection,
};
pub use dataset::{
    load_dataset, load_tables, resolve_table_path, write_manifest, Channel, DatasetError,
    PredictionRecord, Sample,
};
pub use eval::{evaluate, ChannelStats, EvalOptions, EvalReport};
pub use pipeline::{
    evidence_graph, prepare_inputs, EvidenceInfo, Pipeline, PipelineError, Verdict,
};
pub use synthetic::{gen_synthetic, SyntheticSpec};
