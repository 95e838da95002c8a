//! Pipeline configuration: one versioned TOML file is the single source
//! of hyperparameters; CLI flags override individual fields.

use std::path::Path;
use std::time::Duration;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::encoder::{Backend, EncoderConfig};
use crate::retrieval::RetrievalConfig;
use crate::synth::SearchBudget;
use crate::verifier::{TrainSchedule, VerifierParams};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("parse: {0}")]
    Parse(String),
    #[error("unsupported config version {0}")]
    Version(u32),
}

fn default_version() -> u32 {
    1
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct EncoderSection {
    pub dim: usize,
    pub max_sequence_length: usize,
    pub seed: u64,
    /// "hashed", or the adapter argv for the external protocol.
    pub backend: BackendSpec,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(untagged)]
pub enum BackendSpec {
    Named(String),
    Command(Vec<String>),
}

impl Default for EncoderSection {
    fn default() -> Self {
        EncoderSection {
            dim: 64,
            max_sequence_length: 256,
            seed: 17,
            backend: BackendSpec::Named("hashed".into()),
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct SynthSection {
    pub max_depth: usize,
    pub max_programs: usize,
    pub max_intermediates: usize,
    pub time_limit_ms: u64,
}

impl Default for SynthSection {
    fn default() -> Self {
        let b = SearchBudget::default();
        SynthSection {
            max_depth: b.max_depth,
            max_programs: b.max_programs,
            max_intermediates: b.max_intermediates,
            time_limit_ms: b.time_limit.as_millis() as u64,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RetrievalSection {
    pub negative_threshold: usize,
    pub max_evidence: usize,
}

impl Default for RetrievalSection {
    fn default() -> Self {
        let r = RetrievalConfig::default();
        RetrievalSection {
            negative_threshold: r.negative_threshold,
            max_evidence: r.max_evidence,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct VerifierSection {
    pub layers: usize,
    pub theta: f64,
    pub seed: u64,
}

impl Default for VerifierSection {
    fn default() -> Self {
        VerifierSection {
            layers: 2,
            theta: 0.3,
            seed: 17,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct TrainSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub warmup_steps: usize,
    pub seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainSchedule::default();
        TrainSection {
            epochs: t.epochs,
            batch_size: t.batch_size,
            learning_rate: t.learning_rate,
            warmup_steps: t.warmup_steps,
            seed: t.seed,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct RuntimeSection {
    pub parallel: bool,
    pub delimiter: char,
}

impl Default for RuntimeSection {
    fn default() -> Self {
        RuntimeSection {
            parallel: true,
            delimiter: crate::table::DEFAULT_DELIMITER,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(default)]
pub struct PipelineConfig {
    #[serde(default = "default_version")]
    pub version: u32,
    pub encoder: EncoderSection,
    pub synth: SynthSection,
    pub retrieval: RetrievalSection,
    pub verifier: VerifierSection,
    pub train: TrainSection,
    pub runtime: RuntimeSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            version: default_version(),
            encoder: EncoderSection::default(),
            synth: SynthSection::default(),
            retrieval: RetrievalSection::default(),
            verifier: VerifierSection::default(),
            train: TrainSection::default(),
            runtime: RuntimeSection::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let cfg: PipelineConfig =
            toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        if cfg.version != 1 {
            return Err(ConfigError::Version(cfg.version));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    pub fn encoder_config(&self) -> EncoderConfig {
        let backend = match &self.encoder.backend {
            BackendSpec::Named(_) => Backend::Hashed,
            BackendSpec::Command(argv) => Backend::External {
                command: argv.clone(),
            },
        };
        EncoderConfig {
            dim: self.encoder.dim,
            max_sequence_length: self.encoder.max_sequence_length,
            backend,
            seed: self.encoder.seed,
            truncate: true,
        }
    }

    pub fn search_budget(&self) -> SearchBudget {
        SearchBudget {
            max_depth: self.synth.max_depth,
            max_programs: self.synth.max_programs,
            max_intermediates: self.synth.max_intermediates,
            time_limit: Duration::from_millis(self.synth.time_limit_ms),
        }
    }

    pub fn retrieval_config(&self) -> RetrievalConfig {
        RetrievalConfig {
            negative_threshold: self.retrieval.negative_threshold,
            max_evidence: self.retrieval.max_evidence,
        }
    }

    pub fn train_schedule(&self) -> TrainSchedule {
        TrainSchedule {
            epochs: self.train.epochs,
            batch_size: self.train.batch_size,
            learning_rate: self.train.learning_rate,
            warmup_steps: self.train.warmup_steps,
            seed: self.train.seed,
            parallel: self.runtime.parallel,
            ..TrainSchedule::default()
        }
    }

    pub fn init_params(&self) -> VerifierParams {
        VerifierParams::init(
            self.encoder.dim,
            self.verifier.layers,
            self.verifier.theta,
            self.verifier.seed,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = PipelineConfig::default();
        let text = cfg.to_toml();
        let back = PipelineConfig::parse(&text).unwrap();
        assert_eq!(cfg.encoder.dim, back.encoder.dim);
        assert_eq!(cfg.runtime.delimiter, back.runtime.delimiter);
    }

    #[test]
    fn partial_files_fill_defaults() {
        let cfg = PipelineConfig::parse("version = 1\n[encoder]\ndim = 32\n").unwrap();
        assert_eq!(cfg.encoder.dim, 32);
        assert_eq!(cfg.verifier.layers, 2);
        assert_eq!(cfg.verifier.theta, 0.3);
    }

    #[test]
    fn unknown_version_rejected() {
        assert!(matches!(
            PipelineConfig::parse("version = 9"),
            Err(ConfigError::Version(9))
        ));
    }

    #[test]
    fn external_backend_is_an_argv_list() {
        let cfg =
            PipelineConfig::parse("[encoder]\nbackend = [\"python3\", \"adapter.py\"]\n").unwrap();
        match cfg.encoder_config().backend {
            Backend::External { command } => {
                assert_eq!(command, vec!["python3", "adapter.py"]);
            }
            other => panic!("expected external backend, got {other:?}"),
        }
    }
}
