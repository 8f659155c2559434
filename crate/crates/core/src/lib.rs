//! Shot-sequence ordering primitives.
//!
//! A sequence of `k` shots is presented in shuffled order and the task is to
//! recover the permutation that was applied, cast as a `k!`-way
//! classification. This crate holds the pieces that do not depend on a model:
//!
//! - [`permutation`]: permutations, lexicographic ordering labels, Kendall tau
//!   distance and the pairwise distance matrix over all labels.
//! - [`metrics`]: Top-1 / Top-k accuracy, mean Kendall tau distance and macro
//!   recall / precision over batches of logits.
//! - [`loss`]: cross-entropy combined with a Kendall-tau term indexed through
//!   a trainable offset matrix, plus an L1 penalty on the offsets.

pub mod category;
pub mod loss;
pub mod metrics;
pub mod permutation;
mod summation;

pub use category::{ShotCategory, CATEGORY_COUNT, DEFAULT_CARDINALITIES};
pub use loss::{KtdMode, LossConfig, LossError, LossValue, OffsetMatrix};
pub use metrics::{MetricsError, MetricsReport, PredictionBatch};
pub use permutation::{
    factorial, kendall_tau_distance, KtdMatrix, OrderingLabel, PermError, Permutation,
    DEFAULT_MAX_K,
};
pub use summation::pairwise_sum;
