//! Scenes as ordered lists of half-open shot frame ranges.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write, DataError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Shot {
    /// First frame, inclusive.
    pub start: u64,
    /// One past the last frame.
    pub end: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
    /// Position in the source boundary list, kept through cleaning so label
    /// files keyed by shot index still join.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub index: Option<usize>,
}

impl Shot {
    pub fn new(start: u64, end: u64) -> Self {
        Shot {
            start,
            end,
            path: None,
            index: None,
        }
    }

    pub fn len(&self) -> u64 {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.end == self.start
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SceneSource {
    Ingested,
    Synthetic,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SceneRecord {
    pub scene_id: String,
    pub shots: Vec<Shot>,
    pub source: SceneSource,
}

impl SceneRecord {
    /// Checks that ranges are nonempty, ascending and non-overlapping.
    pub fn validate(&self) -> Result<(), DataError> {
        if self.scene_id.is_empty() {
            return Err(DataError::Contract("empty scene_id".into()));
        }
        let mut prev_end = None;
        for (i, shot) in self.shots.iter().enumerate() {
            check_range(prev_end, shot).map_err(|m| DataError::Contract(format!("{}: shot {i}: {m}", self.scene_id)))?;
            prev_end = Some(shot.end);
        }
        Ok(())
    }
}

fn check_range(prev_end: Option<u64>, shot: &Shot) -> Result<(), String> {
    if shot.end <= shot.start {
        return Err(format!("end {} must exceed start {}", shot.end, shot.start));
    }
    if let Some(prev) = prev_end {
        if shot.start < prev {
            return Err(format!("start {} overlaps the previous shot ending at {prev}", shot.start));
        }
    }
    Ok(())
}

/// Parses `start end` lines (start inclusive, end exclusive). Blank lines are
/// ignored; everything else must be two non-negative integers.
pub fn parse_boundaries(text: &str, scene_id: &str) -> Result<SceneRecord, DataError> {
    let mut shots = Vec::new();
    let mut prev_end = None;
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        let fields: Vec<&str> = trimmed.split_whitespace().collect();
        if fields.len() != 2 {
            return Err(DataError::format(
                line,
                format!("expected \"start end\", found {} fields", fields.len()),
            ));
        }
        let parse = |s: &str, what: &str| {
            s.parse::<u64>()
                .map_err(|_| DataError::format(line, format!("{what} frame {s:?} is not a non-negative integer")))
        };
        let shot = Shot {
            index: Some(shots.len()),
            ..Shot::new(parse(fields[0], "start")?, parse(fields[1], "end")?)
        };
        check_range(prev_end, &shot).map_err(|m| DataError::format(line, m))?;
        prev_end = Some(shot.end);
        shots.push(shot);
    }
    if shots.is_empty() {
        return Err(DataError::format(1, "no shots"));
    }
    Ok(SceneRecord {
        scene_id: scene_id.to_string(),
        shots,
        source: SceneSource::Ingested,
    })
}

pub fn format_boundaries(scene: &SceneRecord) -> String {
    let mut out = String::new();
    for shot in &scene.shots {
        writeln!(out, "{} {}", shot.start, shot.end).expect("write to String");
    }
    out
}

/// Reads a boundary file; the scene id is the file stem.
pub fn ingest_shot_boundaries(path: &Path) -> Result<SceneRecord, DataError> {
    let scene_id = path
        .file_stem()
        .and_then(|s| s.to_str())
        .ok_or_else(|| DataError::Config(format!("cannot derive a scene id from {}", path.display())))?;
    parse_boundaries(&read_to_string(path)?, scene_id).map_err(|e| e.at(path))
}

pub fn write_boundaries(scene: &SceneRecord, path: &Path) -> Result<(), DataError> {
    write(path, format_boundaries(scene))
}
