use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

const BUILTIN: &str = include_str!("schema.toml");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CorpusSchema {
    pub files: FileNames,
    pub positions: PositionSchema,
    pub geometry: GeometrySchema,
    pub vad: VadSchema,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileNames {
    pub meta: String,
    pub audio: String,
    pub array_positions: String,
    pub array_geometry: String,
    pub source_positions: String,
    pub vad: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Delimiter {
    #[default]
    Auto,
    Whitespace,
    Comma,
    Tab,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PositionSchema {
    #[serde(default)]
    pub delimiter: Delimiter,
    /// One seconds column, or year/month/day/hour/minute/second columns.
    pub time: Vec<String>,
    pub position: [String; 3],
    #[serde(default)]
    pub rotation: Option<[String; 9]>,
    pub rate_hz: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySchema {
    #[serde(default)]
    pub delimiter: Delimiter,
    pub position: [String; 3],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VadFormat {
    Intervals,
    Samples,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VadSchema {
    pub format: VadFormat,
    #[serde(default)]
    pub delimiter: Delimiter,
    pub start: String,
    pub end: String,
    pub value: String,
}

impl CorpusSchema {
    pub fn builtin() -> Self {
        Self::parse(BUILTIN).expect("built-in schema is valid")
    }

    pub fn parse(text: &str) -> Result<Self> {
        let schema: Self =
            toml::from_str(text).map_err(|e| Error::Format(format!("corpus schema: {e}")))?;
        if !(schema.positions.time.len() == 1 || schema.positions.time.len() == 6) {
            return Err(Error::Format(
                "corpus schema: positions.time needs 1 or 6 columns".into(),
            ));
        }
        if !(schema.positions.rate_hz > 0.0) {
            return Err(Error::Format(
                "corpus schema: positions.rate_hz must be > 0".into(),
            ));
        }
        Ok(schema)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        Self::parse(&super::read_text(path)?)
    }
}
