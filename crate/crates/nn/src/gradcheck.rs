//! Central finite-difference checks of analytic gradients.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::array::ParamStore;
use crate::error::NnError;
use crate::train::{Trainer, TrainingExample};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckOptions {
    pub step: f64,
    /// Number of scalars to probe; all of them when larger than the store.
    pub samples: usize,
    pub seed: u64,
    /// Denominator floor, so near-zero gradients are compared absolutely.
    pub floor: f64,
}

impl Default for GradCheckOptions {
    fn default() -> Self {
        GradCheckOptions {
            step: 1e-5,
            samples: 64,
            seed: 0,
            floor: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub checked: usize,
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    /// Parameter name and flat index of the worst relative error.
    pub worst: Option<(String, usize)>,
}

/// Compares the gradients already held in `store` with central differences
/// of `loss`, on scalars sampled uniformly across all parameters.
pub fn finite_diff_check<F>(
    store: &mut ParamStore<f64>,
    mut loss: F,
    opts: GradCheckOptions,
) -> GradCheckReport
where
    F: FnMut(&ParamStore<f64>) -> f64,
{
    let sizes: Vec<usize> = store.iter().map(|(_, a)| a.len()).collect();
    let total: usize = sizes.iter().sum();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut picks = sample(&mut rng, total, opts.samples.min(total)).into_vec();
    picks.sort_unstable();

    let mut report = GradCheckReport {
        checked: 0,
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        worst: None,
    };
    let names = store.names().to_vec();
    for flat in picks {
        let (mut p, mut i) = (0, flat);
        while i >= sizes[p] {
            i -= sizes[p];
            p += 1;
        }
        let id = store.id_of(&names[p]).expect("registered name");
        let analytic = store.get(id).grad().map_or(0.0, |g| g[i]);
        let orig = store.get(id).values()[i];
        store.get_mut(id).values_mut()[i] = orig + opts.step;
        let up = loss(store);
        store.get_mut(id).values_mut()[i] = orig - opts.step;
        let down = loss(store);
        store.get_mut(id).values_mut()[i] = orig;

        let numeric = (up - down) / (2.0 * opts.step);
        let abs = (analytic - numeric).abs();
        let rel = abs / analytic.abs().max(numeric.abs()).max(opts.floor);
        report.checked += 1;
        report.max_abs_error = report.max_abs_error.max(abs);
        if rel > report.max_rel_error || report.worst.is_none() {
            report.max_rel_error = report.max_rel_error.max(rel);
            report.worst = Some((names[p].clone(), i));
        }
    }
    report
}

/// Checks the full model and loss gradient on `batch`.
pub fn check_trainer(
    trainer: &mut Trainer<f64>,
    batch: &[TrainingExample<f64>],
    opts: GradCheckOptions,
) -> Result<GradCheckReport, NnError> {
    trainer.accumulate_gradients(batch)?;
    let mut store = trainer.model.params().clone();
    let mut probe = trainer.clone();
    let report = finite_diff_check(
        &mut store,
        |s| {
            let values = s.iter().map(|(_, a)| a.values().to_vec()).collect();
            probe.model.load_values(values).expect("same layout");
            probe
                .accumulate_gradients(batch)
                .map(|(v, _)| v.total)
                .unwrap_or(f64::NAN)
        },
        opts,
    );
    Ok(report)
}
