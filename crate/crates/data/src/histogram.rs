//! Genre by shot-class frequency tables.

use std::collections::BTreeMap;

use shotseq_core::{ShotCategory, CATEGORY_COUNT};

use crate::error::DataError;
use crate::labels::LabelProvision;
use crate::meta::{index_meta, MetaRecord};

/// Per genre and category, the normalized class frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct GenreHistogram {
    pub cardinalities: [usize; CATEGORY_COUNT],
    rows: BTreeMap<String, [Vec<f64>; CATEGORY_COUNT]>,
    shots: BTreeMap<String, usize>,
}

impl GenreHistogram {
    pub fn genres(&self) -> impl Iterator<Item = &str> {
        self.rows.keys().map(String::as_str)
    }

    pub fn frequencies(&self, genre: &str, category: ShotCategory) -> Option<&[f64]> {
        self.rows.get(genre).map(|r| r[category.index()].as_slice())
    }

    /// Shots that contributed to a genre.
    pub fn shot_count(&self, genre: &str) -> usize {
        self.shots.get(genre).copied().unwrap_or(0)
    }

    /// `genre,category,class,frequency` rows.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(["genre", "category", "class", "frequency"]).expect("write to Vec");
        for (genre, cats) in &self.rows {
            for cat in ShotCategory::ALL {
                for (class, f) in cats[cat.index()].iter().enumerate() {
                    w.write_record([genre.as_str(), cat.name(), &class.to_string(), &f.to_string()])
                        .expect("write to Vec");
                }
            }
        }
        String::from_utf8(w.into_inner().expect("flush Vec")).expect("utf8")
    }
}

/// Joins labels with metadata on scene id. A multi-genre scene counts toward
/// each listed genre; soft labels contribute their probabilities.
pub fn genre_shot_histogram(meta: &[MetaRecord], labels: &LabelProvision) -> Result<GenreHistogram, DataError> {
    let by_scene = index_meta(meta);
    let mut sums: BTreeMap<String, [Vec<f64>; CATEGORY_COUNT]> = BTreeMap::new();
    let mut shots: BTreeMap<String, usize> = BTreeMap::new();
    let mut joined = 0usize;
    for (scene, _, probs) in labels.entries() {
        let Some(rec) = by_scene.get(scene) else { continue };
        joined += 1;
        for genre in rec.genres() {
            let acc = sums
                .entry(genre.clone())
                .or_insert_with(|| labels.cardinalities.map(|c| vec![0.0; c]));
            for (a, p) in acc.iter_mut().zip(probs) {
                for (x, y) in a.iter_mut().zip(p) {
                    *x += y;
                }
            }
            *shots.entry(genre.clone()).or_default() += 1;
        }
    }
    if joined == 0 {
        return Err(DataError::Join(format!(
            "no scene_id is shared by {} metadata records and {} labelled shots",
            meta.len(),
            labels.len()
        )));
    }
    if sums.is_empty() {
        return Err(DataError::Join("joined scenes carry no genres".into()));
    }
    for cats in sums.values_mut() {
        for v in cats.iter_mut() {
            let total: f64 = v.iter().sum();
            v.iter_mut().for_each(|x| *x /= total);
        }
    }
    Ok(GenreHistogram {
        cardinalities: labels.cardinalities,
        rows: sums,
        shots,
    })
}
