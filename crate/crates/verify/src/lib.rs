//! Runner for the acceptance checks in `tests/acceptance.rs`: each check
//! yields an [`Outcome`], printed as one PASS/FAIL line.

use std::time::{Duration, Instant};

pub struct Outcome {
    pub pass: bool,
    pub detail: String,
}

impl Outcome {
    pub fn new(pass: bool, detail: impl Into<String>) -> Self {
        Outcome {
            pass,
            detail: detail.into(),
        }
    }
}

/// Fails the outcome if the check ran longer than `limit`.
pub fn timed(limit: Duration, f: impl FnOnce() -> Outcome) -> Outcome {
    let start = Instant::now();
    let mut out = f();
    let took = start.elapsed();
    if took > limit {
        out.pass = false;
        out.detail = format!("{}; took {took:.1?}, limit {limit:?}", out.detail);
    }
    out
}

pub type Criterion = (u32, &'static str, fn() -> Outcome);

/// Runs the criteria whose numbers appear in `wanted` (all when empty) and
/// returns how many failed.
pub fn run(criteria: &[Criterion], wanted: &[u32]) -> usize {
    let mut failed = 0;
    for &(n, name, check) in criteria {
        if !wanted.is_empty() && !wanted.contains(&n) {
            continue;
        }
        let start = Instant::now();
        let out = check();
        let status = if out.pass { "PASS" } else { "FAIL" };
        failed += usize::from(!out.pass);
        println!("{status} criterion {n:>2} {name}: {} [{:.1?}]", out.detail, start.elapsed());
    }
    failed
}
