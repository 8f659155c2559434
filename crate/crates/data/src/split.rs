//! Scene-level train/val/test partition.

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::DataError;
use crate::sequence::Split;

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.1, 0.2];

/// Scene counts per split by the largest-remainder method; ties go to the
/// earlier split.
pub fn split_counts(n: usize, ratios: [f64; 3]) -> [usize; 3] {
    let targets = ratios.map(|r| r * n as f64);
    let mut counts = targets.map(|t| t.floor() as usize);
    let mut order = [0usize, 1, 2];
    order.sort_by(|&a, &b| {
        let (fa, fb) = (targets[a] - targets[a].floor(), targets[b] - targets[b].floor());
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let assigned: usize = counts.iter().sum();
    for &i in order.iter().cycle().take(n.saturating_sub(assigned)) {
        counts[i] += 1;
    }
    counts
}

fn check_ratios(ratios: [f64; 3]) -> Result<(), DataError> {
    if ratios.iter().any(|r| !r.is_finite() || *r <= 0.0) {
        return Err(DataError::Config(format!("split ratios must be positive, got {ratios:?}")));
    }
    let sum: f64 = ratios.iter().sum();
    if (sum - 1.0).abs() > 1e-6 {
        return Err(DataError::Config(format!("split ratios sum to {sum}, expected 1")));
    }
    Ok(())
}

/// Sorts the ids, shuffles them under `seed` and cuts the list into train,
/// val and test blocks.
pub fn split_scenes(scene_ids: &[String], ratios: [f64; 3], seed: u64) -> Result<BTreeMap<String, Split>, DataError> {
    check_ratios(ratios)?;
    let unique: BTreeSet<&String> = scene_ids.iter().collect();
    if unique.len() != scene_ids.len() {
        return Err(DataError::Contract("duplicate scene ids".into()));
    }
    if unique.len() < Split::ALL.len() {
        return Err(DataError::Config(format!(
            "{} scenes cannot fill {} splits",
            unique.len(),
            Split::ALL.len()
        )));
    }
    let mut ids: Vec<&String> = unique.into_iter().collect();
    ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let counts = split_counts(ids.len(), ratios);
    let mut out = BTreeMap::new();
    let mut it = ids.into_iter();
    for (split, count) in Split::ALL.into_iter().zip(counts) {
        for id in it.by_ref().take(count) {
            out.insert(id.clone(), split);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ids(n: usize) -> Vec<String> {
        (0..n).map(|i| format!("scene{i:03}")).collect()
    }

    #[test]
    fn ten_scenes_seven_one_two() {
        let a = split_scenes(&ids(10), DEFAULT_RATIOS, 3).unwrap();
        let count = |s| a.values().filter(|&&x| x == s).count();
        assert_eq!([count(Split::Train), count(Split::Val), count(Split::Test)], [7, 1, 2]);
        assert_eq!(a, split_scenes(&ids(10), DEFAULT_RATIOS, 3).unwrap());
    }

    #[test]
    fn counts_within_one_of_target() {
        for n in 3..300 {
            let c = split_counts(n, DEFAULT_RATIOS);
            assert_eq!(c.iter().sum::<usize>(), n);
            for (ci, r) in c.iter().zip(DEFAULT_RATIOS) {
                assert!((*ci as f64 - r * n as f64).abs() < 1.0, "n={n} {c:?}");
            }
        }
    }

    #[test]
    fn input_order_does_not_matter() {
        let mut rev = ids(20);
        rev.reverse();
        assert_eq!(
            split_scenes(&ids(20), DEFAULT_RATIOS, 1).unwrap(),
            split_scenes(&rev, DEFAULT_RATIOS, 1).unwrap()
        );
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(split_scenes(&ids(2), DEFAULT_RATIOS, 0).is_err());
        assert!(split_scenes(&ids(10), [0.5, 0.5, 0.0], 0).is_err());
        assert!(split_scenes(&ids(10), [0.5, 0.3, 0.3], 0).is_err());
        let mut dup = ids(5);
        dup.push("scene000".into());
        assert!(split_scenes(&dup, DEFAULT_RATIOS, 0).is_err());
    }
}
