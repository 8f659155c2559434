use shotseq_core::{factorial, kendall_tau_distance, KtdMatrix, OrderingLabel, Permutation};

/// Heap-free recursive enumeration, sorted afterwards: independent of the
/// Lehmer-code path used by `Permutation::all`.
fn enumerate(k: usize) -> Vec<Vec<usize>> {
    fn go(prefix: &mut Vec<usize>, used: &mut Vec<bool>, out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for v in 0..used.len() {
            if !used[v] {
                used[v] = true;
                prefix.push(v);
                go(prefix, used, out);
                prefix.pop();
                used[v] = false;
            }
        }
    }
    let mut out = Vec::new();
    go(&mut Vec::new(), &mut vec![false; k], &mut out);
    out.sort();
    out
}

/// Orders positions by `a`, reads `b` in that order and counts the adjacent
/// swaps bubble sort needs to sort the result.
fn oracle_distance(a: &[usize], b: &[usize]) -> usize {
    let mut positions: Vec<usize> = (0..a.len()).collect();
    positions.sort_by_key(|&i| a[i]);
    let mut seq: Vec<usize> = positions.iter().map(|&i| b[i]).collect();
    let mut swaps = 0;
    for pass in 0..seq.len() {
        for i in 0..seq.len() - 1 - pass {
            if seq[i] > seq[i + 1] {
                seq.swap(i, i + 1);
                swaps += 1;
            }
        }
    }
    swaps
}

fn perms(k: usize) -> Vec<Permutation> {
    Permutation::all(k).unwrap().collect()
}

#[test]
fn matrix_matches_brute_force() {
    for k in 2..=5 {
        let m = KtdMatrix::build(k).unwrap();
        let all = enumerate(k);
        for (i, a) in all.iter().enumerate() {
            for (j, b) in all.iter().enumerate() {
                assert_eq!(m.get(i, j) as usize, oracle_distance(a, b), "k={k} ({i},{j})");
            }
        }
    }
}

#[test]
fn matrix_invariants() {
    for k in 2..=6 {
        let m = KtdMatrix::build(k).unwrap();
        let n = factorial(k);
        let max = (k * (k - 1) / 2) as u32;
        for i in 0..n {
            assert_eq!(m.get(i, i), 0);
            let row_sum: u64 = m.row(i).iter().map(|&v| v as u64).sum();
            // Mean k(k-1)/4 per row, so the sum is k! k(k-1)/4.
            assert_eq!(4 * row_sum, (n * k * (k - 1)) as u64, "row {i} of k={k}");
            for j in 0..n {
                assert_eq!(m.get(i, j), m.get(j, i));
                assert!(m.get(i, j) <= max);
            }
        }
    }
}

#[test]
fn metric_axioms_exhaustive() {
    for k in 2..=4 {
        let all = perms(k);
        for a in &all {
            for b in &all {
                let dab = kendall_tau_distance(a, b).unwrap();
                assert_eq!(dab, kendall_tau_distance(b, a).unwrap());
                assert_eq!(dab == 0, a == b);
                for c in &all {
                    let dac = kendall_tau_distance(a, c).unwrap();
                    let dbc = kendall_tau_distance(b, c).unwrap();
                    assert!(dac <= dab + dbc);
                }
            }
        }
    }
}

#[test]
fn right_invariance_exhaustive() {
    for k in 2..=4 {
        let all = perms(k);
        for a in &all {
            for b in &all {
                let d = kendall_tau_distance(a, b).unwrap();
                for c in &all {
                    let ac = a.compose(c).unwrap();
                    let bc = b.compose(c).unwrap();
                    assert_eq!(kendall_tau_distance(&ac, &bc).unwrap(), d);
                }
            }
        }
    }
}

#[test]
fn inversion_invariance_from_identity_only() {
    for k in 2..=5 {
        let id = Permutation::identity(k).unwrap();
        for b in perms(k) {
            assert_eq!(
                kendall_tau_distance(&id, &b).unwrap(),
                kendall_tau_distance(&id, &b.inverse()).unwrap()
            );
        }
    }
    // Between two arbitrary permutations, inverting both changes the distance.
    let a = Permutation::new(vec![1, 2, 0]).unwrap();
    let b = Permutation::new(vec![1, 0, 2]).unwrap();
    assert_eq!(kendall_tau_distance(&a, &b).unwrap(), 3);
    assert_eq!(kendall_tau_distance(&a.inverse(), &b.inverse()).unwrap(), 1);
}

#[test]
fn rank_unrank_inverse_up_to_six() {
    for k in 2..=6 {
        for (i, mapping) in enumerate(k).into_iter().enumerate() {
            let p = Permutation::new(mapping).unwrap();
            assert_eq!(p.rank().class_index(), i);
            assert_eq!(OrderingLabel::new(i, k).unwrap().unrank(), p);
        }
    }
}

#[test]
fn closer_error_for_cyclic_shift() {
    let id = Permutation::new(vec![0, 1, 2]).unwrap();
    let shift = Permutation::new(vec![1, 2, 0]).unwrap();
    let rev = Permutation::new(vec![2, 1, 0]).unwrap();
    assert!(kendall_tau_distance(&id, &shift).unwrap() < kendall_tau_distance(&id, &rev).unwrap());
}

#[test]
fn shuffle_restores_for_every_permutation() {
    for k in 2..=5 {
        let items: Vec<String> = (0..k).map(|i| format!("shot{i}")).collect();
        for p in perms(k) {
            let shuffled = p.apply(&items).unwrap();
            assert_eq!(p.inverse().apply(&shuffled).unwrap(), items);
        }
    }
}
