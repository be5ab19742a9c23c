//! Run manifest written next to every command's outputs.
//!
//! The output directory and wall-clock time are deliberately left out so that
//! identical runs produce identical bytes.

use std::fs;
use std::path::Path;

use serde::Serialize;
use serde_json::{Map, Value};

use crate::CliResult;

/// JSON Schema every manifest validates against.
pub const MANIFEST_SCHEMA: &str = include_str!("../manifest.schema.json");

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: u64,
    pub jobs: Option<usize>,
    pub inputs: Map<String, Value>,
    pub parameters: Map<String, Value>,
    pub outputs: Vec<String>,
    pub results: Map<String, Value>,
}

impl Manifest {
    pub fn new(command: &'static str, seed: u64, jobs: Option<usize>) -> Self {
        Manifest {
            tool: "mgsp",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            jobs,
            inputs: Map::new(),
            parameters: Map::new(),
            outputs: Vec::new(),
            results: Map::new(),
        }
    }

    pub fn input(&mut self, key: &str, path: &Path) {
        self.inputs.insert(key.into(), Value::String(path.display().to_string()));
    }

    pub fn param(&mut self, key: &str, value: impl Serialize) {
        self.parameters.insert(key.into(), to_value(value));
    }

    pub fn result(&mut self, key: &str, value: impl Serialize) {
        self.results.insert(key.into(), to_value(value));
    }

    /// Writes `manifest.json` into `dir` and records it as an output.
    pub fn write(mut self, dir: &Path) -> CliResult<()> {
        self.outputs.push("manifest.json".into());
        let mut text = serde_json::to_string_pretty(&self).expect("manifest serializes");
        text.push('\n');
        fs::write(dir.join("manifest.json"), text)?;
        Ok(())
    }
}

fn to_value(value: impl Serialize) -> Value {
    serde_json::to_value(value).expect("plain data serializes")
}
