//! Seed derivation, binomial confidence intervals and bound checks.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Two-sided 95% normal quantile.
pub const Z95: f64 = 1.959964;

pub const CI_METHOD: &str = "wilson-score-95";
pub const SEED_DERIVATION: &str = "sha256(seed_le64 || index_le64)[0..8] as le64";

/// Seed of trial `index` in a sweep with base seed `base`.
pub fn trial_seed(base: u64, index: u64) -> u64 {
    let mut h = Sha256::new();
    h.update(base.to_le_bytes());
    h.update(index.to_le_bytes());
    let d = h.finalize();
    let mut b = [0u8; 8];
    b.copy_from_slice(&d[..8]);
    u64::from_le_bytes(b)
}

/// Wilson score interval for `k` successes out of `n`. `(0, 1)` for `n = 0`.
pub fn wilson(k: u64, n: u64, z: f64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let (all, none) = (k >= n, k == 0);
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = z * z;
    let denom = 1.0 + z2 / n;
    let centre = (p + z2 / (2.0 * n)) / denom;
    let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    // The endpoints at k = 0 and k = n are exact; avoid rounding residue.
    let lo = if none { 0.0 } else { (centre - half).max(0.0) };
    let hi = if all { 1.0 } else { (centre + half).min(1.0) };
    (lo, hi)
}

pub fn rate(k: u64, n: u64) -> f64 {
    if n == 0 {
        0.0
    } else {
        k as f64 / n as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Verdict {
    Pass,
    Fail,
    Inapplicable,
}

impl Verdict {
    pub fn as_str(self) -> &'static str {
        match self {
            Verdict::Pass => "pass",
            Verdict::Fail => "fail",
            Verdict::Inapplicable => "inapplicable",
        }
    }
}

/// Per-phase connectivity-failure bound `n(n-1)(1-C)^{R(n-f)}`.
pub fn connectivity_bound(n: usize, f: usize, rounds: u32, c: f64) -> f64 {
    let pairs = (n * (n - 1)) as f64;
    pairs * (1.0 - c).powf(rounds as f64 * (n - f) as f64)
}

/// Pass iff `failures / observations <= bound + 3 sigma`, where sigma is the
/// binomial standard error at `min(bound, 1)`.
pub fn bound_check(failures: u64, observations: u64, bound: f64) -> Verdict {
    if observations == 0 || !bound.is_finite() {
        return Verdict::Inapplicable;
    }
    let b = bound.clamp(0.0, 1.0);
    let sigma = (b * (1.0 - b) / observations as f64).sqrt();
    if rate(failures, observations) <= bound + 3.0 * sigma {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}
