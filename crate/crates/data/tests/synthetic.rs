use std::collections::HashMap;
use std::hash::Hash;

use shotseq_core::{Permutation, ShotCategory, DEFAULT_CARDINALITIES};
use shotseq_data::labels::{one_hot, LabelProvider};
use shotseq_data::{
    genre_shot_histogram, make_sequences, synth_scene, Clip, GenreVocabulary, LabelProvision, Split, SynthFamily,
    SynthParams, SynthScene,
};

const SCENES: usize = 1_000;

/// Plug-in mutual information in bits.
fn mutual_information<A: Hash + Eq + Clone, B: Hash + Eq + Clone>(pairs: &[(A, B)]) -> f64 {
    let n = pairs.len() as f64;
    let mut joint: HashMap<(A, B), f64> = HashMap::new();
    let mut pa: HashMap<A, f64> = HashMap::new();
    let mut pb: HashMap<B, f64> = HashMap::new();
    for (a, b) in pairs {
        *joint.entry((a.clone(), b.clone())).or_default() += 1.0 / n;
        *pa.entry(a.clone()).or_default() += 1.0 / n;
        *pb.entry(b.clone()).or_default() += 1.0 / n;
    }
    joint.iter().map(|((a, b), p)| p * (p / (pa[a] * pb[b])).log2()).sum()
}

fn entropy<A: Hash + Eq + Clone>(xs: &[A]) -> f64 {
    let pairs: Vec<(A, A)> = xs.iter().map(|x| (x.clone(), x.clone())).collect();
    mutual_information(&pairs)
}

/// Positions sorted by key; ties keep position order.
fn argsort<T: PartialOrd>(xs: &[T]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..xs.len()).collect();
    idx.sort_by(|&a, &b| xs[a].partial_cmp(&xs[b]).unwrap());
    idx
}

struct Observation {
    label: usize,
    pixel_feature: Vec<usize>,
    label_feature: Option<(i64, Vec<usize>)>,
}

fn observe(family: SynthFamily, seed: u64) -> Vec<Observation> {
    let params = SynthParams::default();
    let grammar = params.grammar();
    (0..SCENES)
        .map(|i| {
            let s = synth_scene(family, &params, seed, i).unwrap();
            let sample = make_sequences(&s.scene, 3, 1, seed, Split::Test).unwrap().remove(0);
            let order = sample.shuffle.mapping();
            let means: Vec<f64> = s
                .clips
                .iter()
                .map(|c| c.frame_means().iter().sum::<f64>() / c.len() as f64)
                .collect();
            let presented_means: Vec<f64> = order.iter().map(|&j| means[j]).collect();
            let label_feature = s.classes.as_ref().map(|classes| {
                let sizes: Vec<usize> = order.iter().map(|&j| classes[j][ShotCategory::ShotSize.index()]).collect();
                (grammar.direction(ShotCategory::ShotSize, s.genre).unwrap(), argsort(&sizes))
            });
            Observation {
                label: sample.label().class_index(),
                pixel_feature: argsort(&presented_means),
                label_feature,
            }
        })
        .collect()
}

fn pixel_mi(obs: &[Observation]) -> f64 {
    mutual_information(&obs.iter().map(|o| (o.pixel_feature.clone(), o.label)).collect::<Vec<_>>())
}

fn label_mi(obs: &[Observation]) -> f64 {
    mutual_information(&obs.iter().map(|o| (o.label_feature.clone().unwrap(), o.label)).collect::<Vec<_>>())
}

fn label_entropy(obs: &[Observation]) -> f64 {
    entropy(&obs.iter().map(|o| o.label).collect::<Vec<_>>())
}

// The plug-in estimator's bias for two independent 6-valued variables is
// about (6-1)^2 / (2 N ln 2) = 0.018 bits at N = 1000.
const INDEPENDENT_MI_BITS: f64 = 0.05;

#[test]
fn grammar_order_lives_in_labels_only() {
    let obs = observe(SynthFamily::Grammar, 31);
    let h = label_entropy(&obs);
    assert!(h > 2.5, "label entropy {h}");
    let pix = pixel_mi(&obs);
    assert!(pix < INDEPENDENT_MI_BITS, "pixel MI {pix}");
    let lab = label_mi(&obs);
    assert!((lab - h).abs() < 1e-9, "label MI {lab} vs H {h}");
}

#[test]
fn ramp_order_lives_in_pixels() {
    let obs = observe(SynthFamily::Ramp, 32);
    let h = label_entropy(&obs);
    let pix = pixel_mi(&obs);
    assert!((pix - h).abs() < 1e-9, "pixel MI {pix} vs H {h}");
    // Restoring by brightness recovers the true order for every sample.
    for o in &obs {
        // Sorting by brightness yields the inverse of the presentation order.
        let by_brightness = Permutation::new(o.pixel_feature.clone()).unwrap();
        let predicted = by_brightness.inverse().rank().class_index();
        assert_eq!(predicted, o.label);
    }
}

#[test]
fn mixed_carries_both_signals() {
    let obs = observe(SynthFamily::Mixed, 33);
    let h = label_entropy(&obs);
    assert!((pixel_mi(&obs) - h).abs() < 1e-9);
    assert!((label_mi(&obs) - h).abs() < 1e-9);
    let params = SynthParams::default();
    for i in 0..50 {
        let s = synth_scene(SynthFamily::Mixed, &params, 33, i).unwrap();
        let means: Vec<f64> = s.clips.iter().flat_map(Clip::frame_means).collect();
        assert!(means.windows(2).all(|w| w[0] < w[1]));
    }
}

#[test]
fn same_seed_same_bits() {
    let p = SynthParams::default();
    for family in [SynthFamily::Ramp, SynthFamily::Grammar, SynthFamily::Mixed] {
        let a: Vec<SynthScene> = (0..5).map(|i| synth_scene(family, &p, 4, i).unwrap()).collect();
        let b: Vec<SynthScene> = (0..5).map(|i| synth_scene(family, &p, 4, i).unwrap()).collect();
        for (x, y) in a.iter().zip(&b) {
            assert_eq!(x, y);
            let bytes: Vec<Vec<u8>> = x.clips.iter().map(Clip::to_bytes).collect();
            assert_eq!(bytes, y.clips.iter().map(Clip::to_bytes).collect::<Vec<_>>());
        }
    }
}

/// Standardized deviations of the recovered histogram from the generator,
/// one per cell with nonzero sampling variance. Zero-variance cells must
/// match exactly.
fn histogram_z_scores(scenes: usize, seed: u64) -> Vec<f64> {
    let params = SynthParams::default();
    let grammar = params.grammar();
    let vocab = GenreVocabulary::default();
    let mut labels = LabelProvision::new(LabelProvider::GroundTruth, DEFAULT_CARDINALITIES);
    let mut meta = Vec::new();
    let mut per_genre = vec![0usize; params.genres];
    for i in 0..scenes {
        let s = synth_scene(SynthFamily::Grammar, &params, seed, i).unwrap();
        for (j, c) in s.classes.as_ref().unwrap().iter().enumerate() {
            labels.insert(&s.scene.scene_id, j, one_hot(*c, DEFAULT_CARDINALITIES)).unwrap();
        }
        per_genre[s.genre] += 1;
        meta.push(s.meta(&vocab));
    }
    let hist = genre_shot_histogram(&meta, &labels).unwrap();
    let n = params.shots_per_scene as f64;
    let mut z = Vec::new();
    for (g, name) in vocab.names().iter().enumerate() {
        assert_eq!(hist.shot_count(name), per_genre[g] * params.shots_per_scene);
        for cat in ShotCategory::ALL {
            let observed = hist.frequencies(name, cat).unwrap();
            assert!((observed.iter().sum::<f64>() - 1.0).abs() < 1e-9);
            let walk = grammar.direction(cat, g).is_some();
            for (&o, p) in observed.iter().zip(grammar.expected_histogram(cat, g)) {
                // Variance of one scene's class fraction: a walk visits a
                // class at most once, the other categories draw i.i.d.
                let var = if walk { p * (1.0 - n * p) / n } else { p * (1.0 - p) / n };
                if var <= 1e-15 {
                    assert!((o - p).abs() < 1e-12, "{name} {cat}: {o} vs exact {p}");
                } else {
                    z.push((o - p) / (var / per_genre[g] as f64).sqrt());
                }
            }
        }
    }
    z
}

#[test]
fn histogram_recovers_generator_distribution() {
    let z = histogram_z_scores(4_000, 41);
    assert!(z.len() > 150);
    // Deviations are on the scale the standard errors predict...
    let mean_sq = z.iter().map(|x| x * x).sum::<f64>() / z.len() as f64;
    assert!((0.75..1.25).contains(&mean_sq), "mean z^2 = {mean_sq}");
    // ...and none is extreme once the number of cells is accounted for.
    let worst = z.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!(worst < 4.5, "max |z| = {worst}");
}

#[test]
fn histogram_detects_a_wrong_generator() {
    // Same statistic against a shifted expectation must blow up, so the
    // check above has power.
    let params = SynthParams::default();
    let vocab = GenreVocabulary::default();
    let mut labels = LabelProvision::new(LabelProvider::GroundTruth, DEFAULT_CARDINALITIES);
    let mut meta = Vec::new();
    for i in 0..2_000 {
        let s = synth_scene(SynthFamily::Grammar, &params, 5, i).unwrap();
        for (j, c) in s.classes.as_ref().unwrap().iter().enumerate() {
            labels.insert(&s.scene.scene_id, j, one_hot(*c, DEFAULT_CARDINALITIES)).unwrap();
        }
        meta.push(s.meta(&vocab));
    }
    let hist = genre_shot_histogram(&meta, &labels).unwrap();
    let grammar = params.grammar();
    let wrong = grammar.expected_histogram(ShotCategory::ShotMotion, 1);
    let got = hist.frequencies(&vocab.names()[0], ShotCategory::ShotMotion).unwrap();
    let max_gap = got.iter().zip(&wrong).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
    assert!(max_gap > 0.05, "{got:?} vs {wrong:?}");
}
