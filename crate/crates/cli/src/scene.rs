use std::fmt;
use std::path::Path;

use nphoton::scenarios::pipeline::PipelineScene;
use nphoton::scenarios::{Example1Config, Example2Config};
use serde::{Deserialize, Serialize};

/// Top-level scene document. The variant name is the single key of the
/// JSON object, e.g. `{"example1": {...}}`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scene {
    Pipeline(PipelineScene),
    Example1(Example1Config),
    Example2(Example2Config),
}

pub const BUILTINS: [&str; 4] = [
    "example1-default",
    "example1-interleaved",
    "example2-default",
    "example2-demagnifying",
];

pub fn builtin(name: &str) -> Option<Scene> {
    match name {
        "example1-default" => Some(Scene::Example1(Example1Config::default())),
        "example1-interleaved" => Some(Scene::Example1(Example1Config::interleaved())),
        "example2-default" => Some(Scene::Example2(Example2Config::default())),
        "example2-demagnifying" => Some(Scene::Example2(Example2Config::demagnifying())),
        _ => None,
    }
}

#[derive(Debug)]
pub struct SceneError {
    pub source: String,
    pub line: usize,
    pub column: usize,
    pub message: String,
}

impl fmt::Display for SceneError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.line > 0 {
            write!(f, "{}:{}:{}: {}", self.source, self.line, self.column, self.message)
        } else {
            write!(f, "{}: {}", self.source, self.message)
        }
    }
}

impl std::error::Error for SceneError {}

pub fn parse(text: &str, source: &str) -> Result<Scene, SceneError> {
    serde_json::from_str(text).map_err(|e| {
        // serde_json appends " at line L column C"; keep only the message
        let full = e.to_string();
        let message = match full.rfind(" at line ") {
            Some(i) => full[..i].to_string(),
            None => full,
        };
        SceneError {
            source: source.to_string(),
            line: e.line(),
            column: e.column(),
            message,
        }
    })
}

/// A builtin scene name or the path of a scene file.
pub fn load(target: &str) -> anyhow::Result<(Scene, String)> {
    let path = Path::new(target);
    if !path.exists() {
        if let Some(scene) = builtin(target) {
            return Ok((scene, format!("builtin:{target}")));
        }
        anyhow::bail!(
            "{target}: no such file and not a builtin scene (builtins: {})",
            BUILTINS.join(", ")
        );
    }
    let text = std::fs::read_to_string(path).map_err(|e| anyhow::anyhow!("{target}: {e}"))?;
    Ok((parse(&text, target)?, target.to_string()))
}
