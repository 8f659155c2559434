use shotseq_core::loss::{cross_entropy, cross_entropy_grad};
use shotseq_core::PredictionBatch;
use shotseq_nn::{finite_diff_check, DenseArray, GradCheckOptions, ParamStore};

/// Linear layer `z = x W` under a squared-error loss, gradient written out by
/// hand. The loss is quadratic in `W`, so central differences are exact up to
/// rounding.
fn linear_squared(store: &ParamStore<f64>, x: &[f64], y: &[f64]) -> (f64, Vec<f64>) {
    let w = store.get(store.id_of("w").unwrap()).values();
    let (n, d, c) = (5, 4, 6);
    let mut loss = 0.0;
    let mut dw = vec![0.0; d * c];
    for i in 0..n {
        for j in 0..c {
            let z: f64 = (0..d).map(|t| x[i * d + t] * w[t * c + j]).sum();
            let r = z - y[i * c + j];
            loss += 0.5 * r * r;
            for t in 0..d {
                dw[t * c + j] += x[i * d + t] * r;
            }
        }
    }
    (loss, dw)
}

#[test]
fn linear_model_is_checked_tightly() {
    let x: Vec<f64> = (0..20).map(|i| ((i * 7 % 13) as f64 - 6.0) / 4.0).collect();
    let y: Vec<f64> = (0..30).map(|i| ((i * 3 % 7) as f64 - 3.0) / 2.0).collect();
    let w: Vec<f64> = (0..24).map(|i| ((i * 5 % 11) as f64 - 5.0) / 10.0).collect();
    let mut store = ParamStore::default();
    store.register("w", DenseArray::from_values(&[4, 6], w).unwrap());
    let (_, dw) = linear_squared(&store, &x, &y);
    let id = store.id_of("w").unwrap();
    store.get_mut(id).grad_mut().copy_from_slice(&dw);

    let report = finite_diff_check(
        &mut store,
        |s| linear_squared(s, &x, &y).0,
        GradCheckOptions {
            samples: 24,
            ..GradCheckOptions::default()
        },
    );
    assert_eq!(report.checked, 24);
    assert!(report.max_rel_error < 1e-8, "{report:?}");
}

#[test]
fn cross_entropy_head_is_softmax_minus_onehot() {
    let logits = vec![0.2, -1.0, 0.5, 2.0, 0.0, -0.3, 1.0, 1.0, 1.0, 1.0, 1.0, 1.0];
    let truths = vec![3, 0];
    let mut store = ParamStore::default();
    store.register("z", DenseArray::from_values(&[2, 6], logits.clone()).unwrap());
    let batch = PredictionBatch::new(logits.clone(), truths.clone(), 3).unwrap();
    let analytic = cross_entropy_grad(&batch).unwrap();

    for (i, row) in logits.chunks(6).enumerate() {
        let m = row.iter().cloned().fold(f64::MIN, f64::max);
        let s: f64 = row.iter().map(|v| (v - m).exp()).sum();
        for j in 0..6 {
            let onehot = if j == truths[i] { 1.0 } else { 0.0 };
            let want = (((row[j] - m).exp() / s) - onehot) / 2.0;
            assert!((analytic[i * 6 + j] - want).abs() < 1e-15);
        }
    }

    let id = store.id_of("z").unwrap();
    store.get_mut(id).grad_mut().copy_from_slice(&analytic);
    let report = finite_diff_check(
        &mut store,
        |s| {
            let z = s.get(s.id_of("z").unwrap()).values().to_vec();
            cross_entropy(&PredictionBatch::new(z, truths.clone(), 3).unwrap()).unwrap()
        },
        GradCheckOptions::default(),
    );
    assert_eq!(report.checked, 12);
    assert!(report.max_rel_error < 1e-8, "{report:?}");
}
