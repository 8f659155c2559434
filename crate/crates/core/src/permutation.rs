//! Permutations of `k` shots and the ordering labels that encode them.
//!
//! A shuffle is a permutation `p` with `shuffled[i] = original[p[i]]`. Its
//! ordering label is the lexicographic rank of `p.mapping()` among all `k!`
//! permutations, so the identity is label 0 and the reversal is `k! - 1`.
//! Elements are zero based: the "123" / "321" notation used for three shots
//! maps to `(0,1,2)` / `(2,1,0)`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Largest `k` for which a full distance matrix is built. The matrix holds
/// `(k!)^2` entries, so k = 7 is already 25.4M cells.
pub const DEFAULT_MAX_K: usize = 7;

/// Largest `k` whose `k!` fits comfortably in a `usize` on 64-bit targets.
const MAX_ENUMERABLE_K: usize = 20;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum PermError {
    #[error("permutation needs at least 2 elements, got {0}")]
    TooShort(usize),
    #[error("mapping {0:?} is not a bijection on 0..{1}")]
    NotBijection(Vec<usize>, usize),
    #[error("dimension mismatch: {left} vs {right}")]
    Dimension { left: usize, right: usize },
    #[error("class index {index} out of range for k={k} ({count} classes)")]
    LabelRange { index: usize, k: usize, count: usize },
    #[error("k={k} exceeds the configured cap of {cap}: the distance matrix grows as (k!)^2")]
    Capacity { k: usize, cap: usize },
    #[error("sequence length {len} does not match permutation size {k}")]
    Length { len: usize, k: usize },
}

/// `n!`, panicking on overflow past `n = 20`.
pub fn factorial(n: usize) -> usize {
    assert!(n <= MAX_ENUMERABLE_K, "{n}! does not fit in usize");
    (1..=n).product()
}

/// A bijection on `{0, .., k-1}` with `k >= 2`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct Permutation {
    mapping: Vec<usize>,
}

impl TryFrom<Vec<usize>> for Permutation {
    type Error = PermError;

    fn try_from(mapping: Vec<usize>) -> Result<Self, Self::Error> {
        Permutation::new(mapping)
    }
}

impl From<Permutation> for Vec<usize> {
    fn from(p: Permutation) -> Self {
        p.mapping
    }
}

impl Permutation {
    pub fn new(mapping: Vec<usize>) -> Result<Self, PermError> {
        let k = mapping.len();
        if k < 2 {
            return Err(PermError::TooShort(k));
        }
        if k > MAX_ENUMERABLE_K {
            return Err(PermError::Capacity {
                k,
                cap: MAX_ENUMERABLE_K,
            });
        }
        let mut seen = vec![false; k];
        for &v in &mapping {
            if v >= k || seen[v] {
                return Err(PermError::NotBijection(mapping, k));
            }
            seen[v] = true;
        }
        Ok(Permutation { mapping })
    }

    pub fn identity(k: usize) -> Result<Self, PermError> {
        Permutation::new((0..k).collect())
    }

    pub fn k(&self) -> usize {
        self.mapping.len()
    }

    pub fn mapping(&self) -> &[usize] {
        &self.mapping
    }

    pub fn is_identity(&self) -> bool {
        self.mapping.iter().enumerate().all(|(i, &v)| i == v)
    }

    pub fn inverse(&self) -> Permutation {
        let mut inv = vec![0; self.k()];
        for (i, &v) in self.mapping.iter().enumerate() {
            inv[v] = i;
        }
        Permutation { mapping: inv }
    }

    /// `(self ∘ other)[i] = self[other[i]]`.
    pub fn compose(&self, other: &Permutation) -> Result<Permutation, PermError> {
        check_same_k(self.k(), other.k())?;
        Ok(Permutation {
            mapping: other.mapping.iter().map(|&i| self.mapping[i]).collect(),
        })
    }

    /// Lexicographic rank via the Lehmer code.
    pub fn rank(&self) -> OrderingLabel {
        let k = self.k();
        let mut index = 0;
        for i in 0..k {
            let smaller_after = self.mapping[i + 1..]
                .iter()
                .filter(|&&v| v < self.mapping[i])
                .count();
            index += smaller_after * factorial(k - 1 - i);
        }
        OrderingLabel { class_index: index, k }
    }

    /// `output[i] = items[self[i]]`.
    pub fn apply<T: Clone>(&self, items: &[T]) -> Result<Vec<T>, PermError> {
        if items.len() != self.k() {
            return Err(PermError::Length {
                len: items.len(),
                k: self.k(),
            });
        }
        Ok(self.mapping.iter().map(|&i| items[i].clone()).collect())
    }

    /// Iterates all permutations of size `k` in lexicographic order.
    pub fn all(k: usize) -> Result<impl Iterator<Item = Permutation>, PermError> {
        if k < 2 {
            return Err(PermError::TooShort(k));
        }
        let count = factorial(k);
        Ok((0..count).map(move |i| OrderingLabel { class_index: i, k }.unrank()))
    }
}

impl fmt::Display for Permutation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.mapping.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// One of the `k!` ordering classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct OrderingLabel {
    class_index: usize,
    k: usize,
}

impl OrderingLabel {
    pub fn new(class_index: usize, k: usize) -> Result<Self, PermError> {
        if k < 2 {
            return Err(PermError::TooShort(k));
        }
        if k > MAX_ENUMERABLE_K {
            return Err(PermError::Capacity {
                k,
                cap: MAX_ENUMERABLE_K,
            });
        }
        let count = factorial(k);
        if class_index >= count {
            return Err(PermError::LabelRange {
                index: class_index,
                k,
                count,
            });
        }
        Ok(OrderingLabel { class_index, k })
    }

    pub fn class_index(&self) -> usize {
        self.class_index
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn num_classes(&self) -> usize {
        factorial(self.k)
    }

    /// Inverse of [`Permutation::rank`].
    pub fn unrank(&self) -> Permutation {
        let k = self.k;
        let mut pool: Vec<usize> = (0..k).collect();
        let mut rest = self.class_index;
        let mut mapping = Vec::with_capacity(k);
        for i in 0..k {
            let block = factorial(k - 1 - i);
            let digit = rest / block;
            rest %= block;
            mapping.push(pool.remove(digit));
        }
        Permutation { mapping }
    }
}

fn check_same_k(left: usize, right: usize) -> Result<(), PermError> {
    if left != right {
        return Err(PermError::Dimension { left, right });
    }
    Ok(())
}

/// Number of element pairs ordered oppositely by `a` and `b`.
///
/// Plain O(k²) pair scan; k is the number of shots in a sequence.
pub fn kendall_tau_distance(a: &Permutation, b: &Permutation) -> Result<usize, PermError> {
    check_same_k(a.k(), b.k())?;
    let (x, y) = (a.mapping(), b.mapping());
    let n = x.len();
    let mut count_inversions = 0;
    for i in 0..n - 1 {
        for j in i + 1..n {
            if (x[i] < x[j] && y[i] > y[j]) || (x[i] > x[j] && y[i] < y[j]) {
                count_inversions += 1;
            }
        }
    }
    Ok(count_inversions)
}

/// Pairwise Kendall tau distances between all `k!` ordering labels, indexed
/// by class index on both axes.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KtdMatrix {
    k: usize,
    n: usize,
    entries: Vec<u32>,
}

impl KtdMatrix {
    pub fn build(k: usize) -> Result<Self, PermError> {
        Self::build_with_cap(k, DEFAULT_MAX_K)
    }

    pub fn build_with_cap(k: usize, cap: usize) -> Result<Self, PermError> {
        if k < 2 {
            return Err(PermError::TooShort(k));
        }
        if k > cap || k > MAX_ENUMERABLE_K {
            return Err(PermError::Capacity { k, cap });
        }
        let perms: Vec<Permutation> = Permutation::all(k)?.collect();
        let n = perms.len();
        let mut entries = vec![0u32; n * n];
        for i in 0..n {
            for j in (i + 1)..n {
                let d = kendall_tau_distance(&perms[i], &perms[j])? as u32;
                entries[i * n + j] = d;
                entries[j * n + i] = d;
            }
        }
        Ok(KtdMatrix { k, n, entries })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    /// Number of classes, `k!`.
    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, row: usize, col: usize) -> u32 {
        self.entries[row * self.n + col]
    }

    pub fn row(&self, row: usize) -> &[u32] {
        &self.entries[row * self.n..(row + 1) * self.n]
    }

    pub fn entries(&self) -> &[u32] {
        &self.entries
    }

    /// `k(k-1)/2`, the distance between a permutation and its reversal.
    pub fn max_distance(&self) -> u32 {
        (self.k * (self.k - 1) / 2) as u32
    }

    /// Row-major CSV with a header row of class indices.
    pub fn to_csv(&self) -> String {
        let mut out = String::with_capacity(self.n * self.n * 3 + self.n * 4);
        push_joined(&mut out, (0..self.n).map(|i| i.to_string()));
        for r in 0..self.n {
            push_joined(&mut out, self.row(r).iter().map(|v| v.to_string()));
        }
        out
    }
}

fn push_joined(out: &mut String, cells: impl Iterator<Item = String>) {
    for (i, c) in cells.enumerate() {
        if i > 0 {
            out.push(',');
        }
        out.push_str(&c);
    }
    out.push('\n');
}

#[cfg(test)]
mod tests {
    use super::*;

    fn p(m: &[usize]) -> Permutation {
        Permutation::new(m.to_vec()).unwrap()
    }

    #[test]
    fn distance_examples() {
        let id = p(&[0, 1, 2]);
        assert_eq!(kendall_tau_distance(&id, &id).unwrap(), 0);
        assert_eq!(kendall_tau_distance(&id, &p(&[2, 1, 0])).unwrap(), 3);
        assert_eq!(kendall_tau_distance(&id, &p(&[1, 2, 0])).unwrap(), 2);
        assert_eq!(kendall_tau_distance(&id, &p(&[1, 0, 2])).unwrap(), 1);
    }

    #[test]
    fn distance_rejects_mismatched_k() {
        let err = kendall_tau_distance(&p(&[0, 1]), &p(&[0, 1, 2])).unwrap_err();
        assert_eq!(err, PermError::Dimension { left: 2, right: 3 });
    }

    #[test]
    fn construction_errors() {
        assert_eq!(Permutation::new(vec![0]), Err(PermError::TooShort(1)));
        assert!(matches!(
            Permutation::new(vec![0, 0, 1]),
            Err(PermError::NotBijection(..))
        ));
        assert!(matches!(
            Permutation::new(vec![0, 3, 1]),
            Err(PermError::NotBijection(..))
        ));
    }

    #[test]
    fn rank_unrank_examples() {
        assert_eq!(p(&[0, 1, 2]).rank().class_index(), 0);
        assert_eq!(p(&[2, 1, 0]).rank().class_index(), 5);
        assert_eq!(p(&[1, 2, 0]).rank().class_index(), 3);
        let un = |i| OrderingLabel::new(i, 3).unwrap().unrank();
        assert_eq!(un(0), p(&[0, 1, 2]));
        assert_eq!(un(5), p(&[2, 1, 0]));
        assert_eq!(un(3), p(&[1, 2, 0]));
    }

    #[test]
    fn unrank_range_error() {
        assert_eq!(
            OrderingLabel::new(6, 3),
            Err(PermError::LabelRange {
                index: 6,
                k: 3,
                count: 6
            })
        );
    }

    #[test]
    fn rank_is_lexicographic() {
        for k in 2..=5 {
            let perms: Vec<_> = Permutation::all(k).unwrap().collect();
            assert_eq!(perms.len(), factorial(k));
            for w in perms.windows(2) {
                assert!(w[0].mapping() < w[1].mapping());
            }
        }
    }

    #[test]
    fn shuffle_examples() {
        let items = ['A', 'B', 'C'];
        assert_eq!(p(&[0, 1, 2]).apply(&items).unwrap(), vec!['A', 'B', 'C']);
        assert_eq!(p(&[1, 2, 0]).apply(&items).unwrap(), vec!['B', 'C', 'A']);
        assert_eq!(
            p(&[1, 2, 0]).apply(&['A', 'B']),
            Err(PermError::Length { len: 2, k: 3 })
        );
        for perm in Permutation::all(3).unwrap() {
            let shuffled = perm.apply(&items).unwrap();
            assert_eq!(perm.inverse().apply(&shuffled).unwrap(), items.to_vec());
        }
    }

    #[test]
    fn small_matrices() {
        let k2 = KtdMatrix::build(2).unwrap();
        assert_eq!(k2.entries(), &[0, 1, 1, 0]);
        let k3 = KtdMatrix::build(3).unwrap();
        assert_eq!(k3.row(0), &[0, 1, 1, 2, 2, 3]);
        assert_eq!(k3.max_distance(), 3);
    }

    #[test]
    fn matrix_capacity() {
        assert_eq!(
            KtdMatrix::build(8),
            Err(PermError::Capacity { k: 8, cap: 7 })
        );
        assert!(KtdMatrix::build_with_cap(4, 3).is_err());
        assert!(KtdMatrix::build(1).is_err());
    }

    #[test]
    fn csv_layout() {
        let csv = KtdMatrix::build(3).unwrap().to_csv();
        let lines: Vec<_> = csv.lines().collect();
        assert_eq!(lines.len(), 7);
        assert_eq!(lines[0], "0,1,2,3,4,5");
        assert_eq!(lines[1], "0,1,1,2,2,3");
    }

    #[test]
    fn serde_validates() {
        let ok: Permutation = serde_json_like("[1,0,2]").unwrap();
        assert_eq!(ok, p(&[1, 0, 2]));
        assert!(serde_json_like("[1,1,2]").is_err());
    }

    fn serde_json_like(s: &str) -> Result<Permutation, serde_json::Error> {
        serde_json::from_str(s)
    }
}
