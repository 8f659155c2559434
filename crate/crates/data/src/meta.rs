//! Per-scene film metadata and genre vectors.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{read_to_string, write, DataError};

/// Film metadata attached to a scene. Everything but the scene id is
/// optional because public sources are patchy.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MetaRecord {
    pub scene_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imdb_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub title: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub description: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub genres: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub release_year: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rating_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub content_rating: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub keywords: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub duration_minutes: Option<u32>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub actors: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub director: Option<Vec<String>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub creators: Option<Vec<String>>,
}

impl MetaRecord {
    pub fn validate(&self) -> Result<(), String> {
        if self.scene_id.is_empty() {
            return Err("empty scene_id".into());
        }
        if self.genres.as_ref().is_some_and(Vec::is_empty) {
            return Err(format!("{}: genres present but empty", self.scene_id));
        }
        Ok(())
    }

    pub fn genres(&self) -> &[String] {
        self.genres.as_deref().unwrap_or(&[])
    }
}

pub fn parse_meta(text: &str) -> Result<Vec<MetaRecord>, DataError> {
    let mut out = Vec::new();
    let mut seen = std::collections::BTreeSet::new();
    for (idx, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let rec: MetaRecord = serde_json::from_str(line).map_err(|e| DataError::format(idx + 1, e.to_string()))?;
        rec.validate().map_err(|m| DataError::format(idx + 1, m))?;
        if !seen.insert(rec.scene_id.clone()) {
            return Err(DataError::format(idx + 1, format!("duplicate scene_id {}", rec.scene_id)));
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn format_meta(records: &[MetaRecord]) -> String {
    let mut out = String::new();
    for r in records {
        writeln!(out, "{}", serde_json::to_string(r).expect("record serializes")).expect("write to String");
    }
    out
}

pub fn read_meta(path: &Path) -> Result<Vec<MetaRecord>, DataError> {
    parse_meta(&read_to_string(path)?).map_err(|e| e.at(path))
}

pub fn write_meta(records: &[MetaRecord], path: &Path) -> Result<(), DataError> {
    write(path, format_meta(records))
}

pub const DEFAULT_GENRES: [&str; 10] = [
    "Action",
    "Adventure",
    "Animation",
    "Comedy",
    "Crime",
    "Drama",
    "Fantasy",
    "Horror",
    "Romance",
    "Thriller",
];

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GenreMode {
    /// Every listed genre gets weight 1/n.
    #[default]
    MultiHot,
    /// Only the first known genre is set.
    Primary,
}

/// Fixed genre order for the model input.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GenreVocabulary {
    names: Vec<String>,
}

impl Default for GenreVocabulary {
    fn default() -> Self {
        GenreVocabulary::new(DEFAULT_GENRES.iter().map(|s| s.to_string()).collect()).expect("distinct defaults")
    }
}

impl GenreVocabulary {
    pub fn new(names: Vec<String>) -> Result<Self, DataError> {
        let distinct: std::collections::BTreeSet<String> = names.iter().map(|n| n.to_lowercase()).collect();
        if names.is_empty() || distinct.len() != names.len() {
            return Err(DataError::Config("genre vocabulary must be nonempty and distinct".into()));
        }
        Ok(GenreVocabulary { names })
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Case-insensitive lookup.
    pub fn index(&self, genre: &str) -> Option<usize> {
        self.names.iter().position(|n| n.eq_ignore_ascii_case(genre.trim()))
    }

    /// Normalized indicator vector. Unknown genres are ignored; a record with
    /// no known genre gets the uniform vector, like missing labels elsewhere.
    pub fn vector(&self, genres: &[String], mode: GenreMode) -> Vec<f64> {
        let mut known: Vec<usize> = genres.iter().filter_map(|g| self.index(g)).collect();
        if mode == GenreMode::Primary {
            known.truncate(1);
        }
        known.sort_unstable();
        known.dedup();
        let mut v = vec![0.0; self.len()];
        if known.is_empty() {
            v.fill(1.0 / self.len() as f64);
        } else {
            for &i in &known {
                v[i] = 1.0 / known.len() as f64;
            }
        }
        v
    }
}

/// Scene id to metadata.
pub fn index_meta(records: &[MetaRecord]) -> BTreeMap<&str, &MetaRecord> {
    records.iter().map(|r| (r.scene_id.as_str(), r)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vectors() {
        let v = GenreVocabulary::default();
        let g = |xs: &[&str]| xs.iter().map(|s| s.to_string()).collect::<Vec<_>>();
        let multi = v.vector(&g(&["Crime", "drama", "Thriller"]), GenreMode::MultiHot);
        assert!((multi.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        assert_eq!(multi[4], 1.0 / 3.0);
        let primary = v.vector(&g(&["Western", "Drama", "Crime"]), GenreMode::Primary);
        assert_eq!(primary[5], 1.0);
        assert_eq!(primary.iter().filter(|&&x| x > 0.0).count(), 1);
        assert!(v.vector(&g(&["Western"]), GenreMode::MultiHot).iter().all(|&x| x == 0.1));
    }

    #[test]
    fn jsonl_round_trip() {
        let recs = vec![
            MetaRecord {
                scene_id: "tt0001-3".into(),
                title: Some("A Film".into()),
                genres: Some(vec!["Drama".into()]),
                rating_value: Some(7.3),
                release_year: Some(1999),
                ..Default::default()
            },
            MetaRecord {
                scene_id: "x".into(),
                ..Default::default()
            },
        ];
        let text = format_meta(&recs);
        assert_eq!(parse_meta(&text).unwrap(), recs);
        assert_eq!(format_meta(&parse_meta(&text).unwrap()), text);
    }

    #[test]
    fn rejects_empty_genres_and_duplicates() {
        assert!(parse_meta(r#"{"scene_id":"a","genres":[]}"#).is_err());
        assert!(parse_meta("{\"scene_id\":\"a\"}\n{\"scene_id\":\"a\"}").is_err());
        assert!(parse_meta(r#"{"scene_id":""}"#).is_err());
    }
}
