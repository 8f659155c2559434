use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

use shotseq_data::scene::parse_boundaries;
use shotseq_data::tsn::{segment_bounds, tsn_test_indices};
use shotseq_data::{make_sequences, shuffle_augment, tsn_sample, SampleMode, Split};

/// Upper-tail p-value of Pearson's statistic against a uniform distribution.
fn uniform_p_value(counts: &[usize]) -> f64 {
    let n: usize = counts.iter().sum();
    let expected = n as f64 / counts.len() as f64;
    let stat: f64 = counts.iter().map(|&c| (c as f64 - expected).powi(2) / expected).sum();
    1.0 - ChiSquared::new((counts.len() - 1) as f64).unwrap().cdf(stat)
}

#[test]
fn sixty_thousand_labels_are_uniform() {
    let scene = parse_boundaries("0 20\n20 40\n40 60", "uniformity").unwrap();
    let samples = make_sequences(&scene, 3, 60_000, 2024, Split::Train).unwrap();
    let mut counts = [0usize; 6];
    for s in &samples {
        counts[s.label().class_index()] += 1;
    }
    let p = uniform_p_value(&counts);
    assert!(p > 0.01, "chi-square p = {p}, counts {counts:?}");
    for c in counts {
        assert!((c as f64 / 60_000.0 - 1.0 / 6.0).abs() < 0.01, "{counts:?}");
    }
}

#[test]
fn augmented_labels_are_uniform() {
    let scene = parse_boundaries("0 20\n20 40\n40 60\n60 80", "aug").unwrap();
    let base = make_sequences(&scene, 4, 1, 0, Split::Train).unwrap().remove(0);
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let mut counts = [0usize; 24];
    for _ in 0..48_000 {
        let s = shuffle_augment(&base, &mut rng).unwrap();
        counts[s.label().class_index()] += 1;
        assert_eq!(s.shots, base.shots);
    }
    let p = uniform_p_value(&counts);
    assert!(p > 0.01, "chi-square p = {p}");
}

#[test]
fn train_indices_stay_in_segments() {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for _ in 0..10_000 {
        let len = rng.random_range(1..400);
        let segments = rng.random_range(1..16);
        let idx = tsn_sample(len, segments, SampleMode::Train, &mut rng).unwrap();
        let bounds = segment_bounds(len, segments).unwrap();
        assert_eq!(idx.len(), segments);
        for (i, (lo, hi)) in idx.iter().zip(bounds) {
            assert!(lo <= *i && *i < hi && *i < len, "len {len} segments {segments}: {i} not in [{lo},{hi})");
        }
    }
}

#[test]
fn train_mode_covers_whole_segment() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let mut seen = [false; 80];
    for _ in 0..2_000 {
        for i in tsn_sample(80, 8, SampleMode::Train, &mut rng).unwrap() {
            seen[i] = true;
        }
    }
    assert!(seen.iter().all(|&x| x));
}

proptest! {
    #[test]
    fn test_mode_is_pure_and_central(len in 1usize..2000, segments in 1usize..32, seed: u64) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = tsn_sample(len, segments, SampleMode::Test, &mut rng).unwrap();
        prop_assert_eq!(&a, &tsn_test_indices(len, segments).unwrap());
        for (i, (lo, hi)) in a.iter().zip(segment_bounds(len, segments).unwrap()) {
            prop_assert_eq!(*i, (lo + hi) / 2);
            prop_assert!(*i < len);
        }
        prop_assert!(a.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn every_sample_restores_to_temporal_order(
        lens in proptest::collection::vec(1u64..50, 3..9),
        k in 2usize..=3,
        count in 1usize..40,
        seed: u64,
    ) {
        let mut text = String::new();
        let mut t = 0;
        for l in lens {
            text.push_str(&format!("{t} {}\n", t + l));
            t += l + 1;
        }
        let scene = parse_boundaries(&text, "p").unwrap();
        for s in make_sequences(&scene, k, count, seed, Split::Val).unwrap() {
            let restored = shotseq_data::SequenceSample::restore(s.label(), &s.presented()).unwrap();
            prop_assert!(restored.windows(2).all(|w| w[0].end <= w[1].start));
            prop_assert_eq!(restored, s.shots);
        }
    }
}
