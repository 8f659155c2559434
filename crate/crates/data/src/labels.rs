//! Per-shot category probability files.
//!
//! ```text
//! #provider=ground_truth;cardinalities=shot_size:5,shot_angle:5,shot_motion:6,shot_type:7
//! scene_id,shot_index,category,p0,p1,p2,p3,p4,p5,p6
//! scene-a,0,shot_size,0,1,0,0,0
//! ```
//!
//! Rows carry exactly as many probabilities as their category has classes.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use shotseq_core::{ShotCategory, CATEGORY_COUNT, DEFAULT_CARDINALITIES};

use crate::error::{read_to_string, write, DataError};

pub const SUM_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelProvider {
    GroundTruth,
    Uqn,
    Clip,
    ClipPrompt,
    /// Equal probability for every class; needs no rows.
    Uniform,
}

impl LabelProvider {
    const ALL: [LabelProvider; 5] = [
        LabelProvider::GroundTruth,
        LabelProvider::Uqn,
        LabelProvider::Clip,
        LabelProvider::ClipPrompt,
        LabelProvider::Uniform,
    ];

    pub fn name(self) -> &'static str {
        match self {
            LabelProvider::GroundTruth => "ground_truth",
            LabelProvider::Uqn => "uqn",
            LabelProvider::Clip => "clip",
            LabelProvider::ClipPrompt => "clip_prompt",
            LabelProvider::Uniform => "uniform",
        }
    }
}

impl fmt::Display for LabelProvider {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LabelProvider {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Self::ALL
            .into_iter()
            .find(|p| p.name() == s)
            .ok_or_else(|| format!("unknown label provider {s:?}"))
    }
}

/// Probability vectors for one shot, indexed by category.
pub type ShotProbabilities = [Vec<f64>; CATEGORY_COUNT];

#[derive(Debug, Clone, PartialEq)]
pub struct LabelProvision {
    pub provider: LabelProvider,
    pub cardinalities: [usize; CATEGORY_COUNT],
    entries: BTreeMap<(String, usize), ShotProbabilities>,
}

impl LabelProvision {
    pub fn new(provider: LabelProvider, cardinalities: [usize; CATEGORY_COUNT]) -> Self {
        LabelProvision {
            provider,
            cardinalities,
            entries: BTreeMap::new(),
        }
    }

    pub fn uniform(cardinalities: [usize; CATEGORY_COUNT]) -> Self {
        Self::new(LabelProvider::Uniform, cardinalities)
    }

    fn uniform_shot(&self) -> ShotProbabilities {
        self.cardinalities.map(|c| vec![1.0 / c as f64; c])
    }

    pub fn insert(&mut self, scene_id: &str, shot_index: usize, probs: ShotProbabilities) -> Result<(), DataError> {
        for (cat, p) in ShotCategory::ALL.iter().zip(&probs) {
            check_vector(p, self.cardinalities[cat.index()]).map_err(|m| DataError::Contract(format!("{scene_id}/{shot_index} {}: {m}", cat.name())))?;
        }
        self.entries.insert((scene_id.to_string(), shot_index), probs);
        Ok(())
    }

    /// Stored probabilities, or uniform ones under the uniform provider.
    pub fn get(&self, scene_id: &str, shot_index: usize) -> Option<ShotProbabilities> {
        match self.entries.get(&(scene_id.to_string(), shot_index)) {
            Some(p) => Some(p.clone()),
            None if self.provider == LabelProvider::Uniform => Some(self.uniform_shot()),
            None => None,
        }
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, usize, &ShotProbabilities)> {
        self.entries.iter().map(|((s, i), p)| (s.as_str(), *i, p))
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    fn header_line(&self) -> String {
        let cards: Vec<String> = ShotCategory::ALL
            .iter()
            .map(|c| format!("{}:{}", c.name(), self.cardinalities[c.index()]))
            .collect();
        format!("#provider={};cardinalities={}", self.provider, cards.join(","))
    }

    pub fn to_csv(&self) -> String {
        let width = self.cardinalities.iter().copied().max().unwrap_or(0);
        let mut w = csv::WriterBuilder::new().flexible(true).from_writer(Vec::new());
        let mut header = vec!["scene_id".to_string(), "shot_index".into(), "category".into()];
        header.extend((0..width).map(|i| format!("p{i}")));
        w.write_record(&header).expect("write to Vec");
        for ((scene, idx), probs) in &self.entries {
            for cat in ShotCategory::ALL {
                let mut row = vec![scene.clone(), idx.to_string(), cat.name().to_string()];
                row.extend(probs[cat.index()].iter().map(|p| p.to_string()));
                w.write_record(&row).expect("write to Vec");
            }
        }
        let body = String::from_utf8(w.into_inner().expect("flush Vec")).expect("utf8");
        format!("{}\n{body}", self.header_line())
    }

    pub fn from_csv(text: &str) -> Result<Self, DataError> {
        let (first, rest) = text.split_once('\n').unwrap_or((text, ""));
        let (provider, cardinalities) = parse_header_line(first.trim_end_matches('\r')).map_err(|m| DataError::format(1, m))?;
        let mut out = Self::new(provider, cardinalities);
        let mut partial: BTreeMap<(String, usize), [Option<Vec<f64>>; CATEGORY_COUNT]> = BTreeMap::new();
        let mut first_line: BTreeMap<(String, usize), usize> = BTreeMap::new();
        let mut reader = csv::ReaderBuilder::new().flexible(true).from_reader(rest.as_bytes());
        for row in reader.records() {
            let row = row.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line() as usize);
                DataError::format(line + 1, e.to_string())
            })?;
            let line = row.position().map_or(0, |p| p.line() as usize) + 1;
            let fail = |m: String| DataError::format(line, m);
            if row.len() < 4 {
                return Err(fail(format!("expected at least 4 fields, found {}", row.len())));
            }
            let scene = row[0].to_string();
            let idx: usize = row[1].parse().map_err(|_| fail(format!("shot_index {:?} is not an integer", &row[1])))?;
            let cat = ShotCategory::from_str(&row[2]).map_err(|_| fail(format!("unknown category {:?}", &row[2])))?;
            let probs = row
                .iter()
                .skip(3)
                .map(|f| f.trim().parse::<f64>().map_err(|_| fail(format!("probability {f:?} is not a number"))))
                .collect::<Result<Vec<f64>, _>>()?;
            check_vector(&probs, cardinalities[cat.index()]).map_err(fail)?;
            let key = (scene, idx);
            first_line.entry(key.clone()).or_insert(line);
            let slot = &mut partial.entry(key).or_default()[cat.index()];
            if slot.replace(probs).is_some() {
                return Err(fail(format!("duplicate {} row", cat.name())));
            }
        }
        for (key, cats) in partial {
            let probs: Vec<Vec<f64>> = cats
                .into_iter()
                .enumerate()
                .map(|(c, p)| {
                    p.ok_or_else(|| {
                        DataError::format(
                            first_line[&key],
                            format!("{}/{} lacks a {} row", key.0, key.1, ShotCategory::ALL[c].name()),
                        )
                    })
                })
                .collect::<Result<_, _>>()?;
            let probs: ShotProbabilities = probs.try_into().expect("four categories");
            out.entries.insert(key, probs);
        }
        Ok(out)
    }

    pub fn read(path: &Path) -> Result<Self, DataError> {
        Self::from_csv(&read_to_string(path)?).map_err(|e| e.at(path))
    }

    pub fn write(&self, path: &Path) -> Result<(), DataError> {
        write(path, self.to_csv())
    }
}

fn check_vector(p: &[f64], cardinality: usize) -> Result<(), String> {
    if p.len() != cardinality {
        return Err(format!("{} probabilities for {cardinality} classes", p.len()));
    }
    if p.iter().any(|x| !x.is_finite() || *x < 0.0) {
        return Err("probabilities must be finite and non-negative".into());
    }
    let sum: f64 = p.iter().sum();
    if (sum - 1.0).abs() > SUM_TOLERANCE {
        return Err(format!("probabilities sum to {sum}"));
    }
    Ok(())
}

fn parse_header_line(line: &str) -> Result<(LabelProvider, [usize; CATEGORY_COUNT]), String> {
    let body = line
        .strip_prefix('#')
        .ok_or("first line must be #provider=...;cardinalities=...")?;
    let mut provider = None;
    let mut cards: [Option<usize>; CATEGORY_COUNT] = [None; CATEGORY_COUNT];
    for part in body.split(';').map(str::trim).filter(|p| !p.is_empty()) {
        let (key, value) = part.split_once('=').ok_or_else(|| format!("malformed header field {part:?}"))?;
        match key.trim() {
            "provider" => provider = Some(value.trim().parse::<LabelProvider>()?),
            "cardinalities" => {
                for item in value.split(',') {
                    let (name, n) = item.split_once(':').ok_or_else(|| format!("malformed cardinality {item:?}"))?;
                    let cat = ShotCategory::from_str(name.trim()).map_err(|_| format!("unknown category {name:?}"))?;
                    let n: usize = n.trim().parse().map_err(|_| format!("cardinality {n:?} is not an integer"))?;
                    if n == 0 {
                        return Err(format!("{} has zero classes", cat.name()));
                    }
                    cards[cat.index()] = Some(n);
                }
            }
            other => return Err(format!("unknown header field {other:?}")),
        }
    }
    let provider = provider.ok_or("header lacks provider")?;
    let mut out = DEFAULT_CARDINALITIES;
    for (i, c) in cards.into_iter().enumerate() {
        out[i] = c.ok_or_else(|| format!("header lacks a cardinality for {}", ShotCategory::ALL[i].name()))?;
    }
    Ok((provider, out))
}

/// One-hot probabilities for class indices.
pub fn one_hot(classes: [usize; CATEGORY_COUNT], cardinalities: [usize; CATEGORY_COUNT]) -> ShotProbabilities {
    std::array::from_fn(|c| {
        let mut v = vec![0.0; cardinalities[c]];
        v[classes[c]] = 1.0;
        v
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> LabelProvision {
        let mut p = LabelProvision::new(LabelProvider::Clip, DEFAULT_CARDINALITIES);
        p.insert("a", 0, one_hot([1, 0, 5, 6], DEFAULT_CARDINALITIES)).unwrap();
        let mut soft = one_hot([0, 0, 0, 0], DEFAULT_CARDINALITIES);
        soft[1] = vec![0.1, 0.2, 0.3, 0.25, 0.15];
        p.insert("b,quoted", 2, soft).unwrap();
        p
    }

    #[test]
    fn csv_round_trip() {
        let p = sample();
        let text = p.to_csv();
        assert!(text.starts_with("#provider=clip;cardinalities=shot_size:5,shot_angle:5,shot_motion:6,shot_type:7\n"));
        let back = LabelProvision::from_csv(&text).unwrap();
        assert_eq!(back, p);
        assert_eq!(back.to_csv(), text);
    }

    #[test]
    fn bad_sum_located() {
        let text = sample().to_csv().replace("0.15", "0.5");
        match LabelProvision::from_csv(&text) {
            Err(DataError::Format { line, message, .. }) => {
                assert!(message.contains("sum"), "{message}");
                let bad = text.lines().position(|l| l.contains("0.5")).unwrap() + 1;
                assert_eq!(line, bad);
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn missing_category_and_header() {
        let text = sample().to_csv();
        let cut: Vec<&str> = text.lines().filter(|l| !l.starts_with("a,0,shot_type")).collect();
        assert!(LabelProvision::from_csv(&cut.join("\n")).is_err());
        assert!(LabelProvision::from_csv("scene_id,shot_index\n").is_err());
        assert!(LabelProvision::from_csv("#provider=clip;cardinalities=shot_size:5\n").is_err());
    }

    #[test]
    fn uniform_provider_answers_everything() {
        let p = LabelProvision::uniform(DEFAULT_CARDINALITIES);
        let probs = p.get("any", 7).unwrap();
        assert_eq!(probs[3], vec![1.0 / 7.0; 7]);
        assert!(sample().get("any", 7).is_none());
        let back = LabelProvision::from_csv(&p.to_csv()).unwrap();
        assert_eq!(back, p);
    }
}
