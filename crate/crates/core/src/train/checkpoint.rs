//! JSON checkpoints: config, per-model parameters and loss summaries.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::value::RawValue;
use thiserror::Error;

use super::{LossSummary, TrainConfig, TrainError};
use crate::hypernet::{layout, param_count, ParameterBundle};

pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum CheckpointError {
    #[error("io error on {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("checkpoint is truncated: {0}")]
    Truncated(String),
    #[error("checkpoint is not valid JSON: {0}")]
    Parse(String),
    #[error("checkpoint format version {found}, this build reads version {expected}")]
    Version { found: u64, expected: u32 },
    #[error("checkpoint layout mismatch: {0}")]
    Layout(String),
    #[error("checkpoint config is invalid: {0}")]
    Config(#[from] TrainError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format_version: u32,
    pub config: TrainConfig,
    /// One bundle per anchor (connected) or a single shared bundle.
    pub models: Vec<ParameterBundle>,
    pub loss: Vec<LossSummary>,
    pub wall_clock_s: f64,
    pub seed: u64,
}

impl Checkpoint {
    pub fn new(config: TrainConfig, models: Vec<ParameterBundle>, loss: Vec<LossSummary>, wall_clock_s: f64) -> Self {
        let seed = config.seed;
        Self { format_version: CHECKPOINT_VERSION, config, models, loss, wall_clock_s, seed }
    }

    pub fn to_json(&self) -> String {
        // Parameters are written in exponent form with 17 significant digits
        // so that they round-trip bit for bit.
        #[derive(Serialize)]
        struct Model<'a> {
            arch: &'a crate::hypernet::ArchitectureSpec,
            layout: &'a [crate::hypernet::LayoutEntry],
            params: Box<RawValue>,
        }
        #[derive(Serialize)]
        struct Out<'a> {
            format_version: u32,
            config: &'a TrainConfig,
            models: Vec<Model<'a>>,
            loss: &'a [LossSummary],
            wall_clock_s: f64,
            seed: u64,
        }
        let models = self
            .models
            .iter()
            .map(|b| {
                let body: Vec<String> = b.params.iter().map(|v| format!("{v:.16e}")).collect();
                Model {
                    arch: &b.arch,
                    layout: &b.layout,
                    params: RawValue::from_string(format!("[{}]", body.join(","))).expect("valid JSON array"),
                }
            })
            .collect();
        let out = Out {
            format_version: self.format_version,
            config: &self.config,
            models,
            loss: &self.loss,
            wall_clock_s: self.wall_clock_s,
            seed: self.seed,
        };
        serde_json::to_string(&out).expect("checkpoint serializes")
    }

    pub fn from_json(text: &str) -> Result<Self, CheckpointError> {
        let value: serde_json::Value = serde_json::from_str(text).map_err(|e| match e.classify() {
            serde_json::error::Category::Eof => CheckpointError::Truncated(e.to_string()),
            _ => CheckpointError::Parse(e.to_string()),
        })?;
        match value.get("format_version").and_then(|v| v.as_u64()) {
            Some(v) if v == CHECKPOINT_VERSION as u64 => {}
            Some(found) => return Err(CheckpointError::Version { found, expected: CHECKPOINT_VERSION }),
            None => return Err(CheckpointError::Parse("missing format_version".into())),
        }
        let ck: Checkpoint = serde_json::from_value(value).map_err(|e| CheckpointError::Parse(e.to_string()))?;
        ck.check_layout()?;
        ck.config.validate()?;
        Ok(ck)
    }

    fn check_layout(&self) -> Result<(), CheckpointError> {
        let expected = self.config.model_count();
        if self.models.len() != expected {
            return Err(CheckpointError::Layout(format!("{} models, config implies {expected}", self.models.len())));
        }
        for (i, b) in self.models.iter().enumerate() {
            if b.arch != self.config.arch {
                return Err(CheckpointError::Layout(format!("model {i} architecture differs from the config")));
            }
            if b.layout != layout(&b.arch) {
                return Err(CheckpointError::Layout(format!("model {i} layout table differs from its architecture")));
            }
            let count = param_count(&b.arch);
            if b.params.len() != count {
                return Err(CheckpointError::Layout(format!(
                    "model {i} has {} parameters, architecture needs {count}",
                    b.params.len()
                )));
            }
        }
        Ok(())
    }
}

/// Writes atomically via a temporary sibling file.
pub fn save_checkpoint(ck: &Checkpoint, path: &Path) -> Result<(), CheckpointError> {
    let io = |source| CheckpointError::Io { path: path.display().to_string(), source };
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(io)?;
    }
    let tmp = path.with_extension("tmp");
    let mut f = fs::File::create(&tmp).map_err(io)?;
    f.write_all(ck.to_json().as_bytes()).map_err(io)?;
    f.sync_all().map_err(io)?;
    fs::rename(&tmp, path).map_err(io)
}

pub fn load_checkpoint(path: &Path) -> Result<Checkpoint, CheckpointError> {
    let text = fs::read_to_string(path).map_err(|source| CheckpointError::Io { path: path.display().to_string(), source })?;
    Checkpoint::from_json(&text)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hypernet::ArchKind;
    use crate::problems::ProblemId;
    use crate::train::tests::config;
    use crate::train::train;

    fn small() -> Checkpoint {
        let c = config(ProblemId::Cvx1, ArchKind::Trans, &[vec![0.0, 0.0], vec![0.2, 0.4]], 20);
        train(&c, None).unwrap()
    }

    #[test]
    fn round_trip_is_bit_exact() {
        let ck = small();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sub/ck.json");
        save_checkpoint(&ck, &path).unwrap();
        let back = load_checkpoint(&path).unwrap();
        assert_eq!(back, ck);
        for (a, b) in back.models[0].params.iter().zip(&ck.models[0].params) {
            assert_eq!(a.to_bits(), b.to_bits());
        }
    }

    #[test]
    fn truncated_and_garbage_files() {
        let json = small().to_json();
        let cut = &json[..json.len() / 2];
        assert!(matches!(Checkpoint::from_json(cut), Err(CheckpointError::Truncated(_))));
        assert!(matches!(Checkpoint::from_json("{]"), Err(CheckpointError::Parse(_))));
    }

    #[test]
    fn version_mismatch() {
        let json = small().to_json().replacen("\"format_version\":1", "\"format_version\":99", 1);
        match Checkpoint::from_json(&json) {
            Err(CheckpointError::Version { found, expected }) => assert_eq!((found, expected), (99, CHECKPOINT_VERSION)),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn parameter_count_mismatch() {
        let mut ck = small();
        ck.models[1].params.pop();
        assert!(matches!(Checkpoint::from_json(&ck.to_json()), Err(CheckpointError::Layout(_))));
        let mut ck = small();
        ck.models.pop();
        assert!(matches!(Checkpoint::from_json(&ck.to_json()), Err(CheckpointError::Layout(_))));
    }

    #[test]
    fn missing_file_is_io_error() {
        assert!(matches!(load_checkpoint(Path::new("/nonexistent/ck.json")), Err(CheckpointError::Io { .. })));
    }
}
