//! Configuration-driven experiments over `strom-core`: stage timings, FOM/ROM
//! speedups and moment-convergence studies, written as CSV plus a JSON manifest.

pub mod config;
pub mod convergence;
pub mod pipeline;
pub mod propagate;
pub mod report;
pub mod timing;

use serde_json::{json, Value};

pub use config::{parse_config, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum BenchError {
    #[error(transparent)]
    Config(#[from] config::ConfigError),
    #[error(transparent)]
    Core(#[from] strom_core::Error),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Data(String),
}

impl BenchError {
    pub fn kind(&self) -> &'static str {
        match self {
            BenchError::Config(_) => "config",
            BenchError::Core(_) => "solver",
            BenchError::Io { .. } => "io",
            BenchError::Usage(_) => "usage",
            BenchError::Data(_) => "data",
        }
    }

    pub fn exit_code(&self) -> i32 {
        match self {
            BenchError::Config(_) | BenchError::Usage(_) => 2,
            _ => 1,
        }
    }

    /// Machine-readable error record.
    pub fn to_json(&self) -> Value {
        let mut record = json!({"error": {"kind": self.kind(), "message": self.to_string()}});
        if let BenchError::Config(config::ConfigError::Invalid(v)) = self {
            record["error"]["violations"] = v
                .iter()
                .map(|v| json!({"path": v.path, "message": v.message}))
                .collect();
        }
        if let BenchError::Core(strom_core::Error::SampleFailed { index, .. }) = self {
            record["error"]["sample_index"] = json!(index);
        }
        record
    }
}
