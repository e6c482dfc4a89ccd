//! Wilcoxon signed-rank test for paired samples.
//!
//! Zero differences are dropped and tied magnitudes share their average
//! rank. Up to [`EXACT_LIMIT`] non-zero pairs the two-sided p-value comes
//! from the exact sign-flip distribution of W+ (computed on doubled ranks so
//! tie averages stay integral); beyond that a normal approximation with tie
//! and continuity corrections is used. `z` always follows the normal
//! approximation and `effect_r = z / sqrt(n_pairs)`, counting zero pairs.

use serde::{Deserialize, Serialize};
use statrs::function::erf::erfc;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const EXACT_LIMIT: usize = 20;
/// Largest sample for which the exact path can be forced.
pub const EXACT_MAX: usize = 120;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PMethod {
    Exact,
    Normal,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WilcoxonResult {
    pub n_pairs: usize,
    pub n_effective: usize,
    /// W+, the rank sum of positive differences (first minus second).
    pub w: f64,
    pub w_minus: f64,
    pub z: f64,
    pub p_two_sided: f64,
    pub effect_r: f64,
    pub method: PMethod,
}

/// Non-zero differences with their doubled average ranks.
pub(crate) struct SignedRanks {
    pub doubled: Vec<u64>,
    pub positive: Vec<bool>,
    pub tie_sizes: Vec<usize>,
}

pub(crate) fn signed_ranks(diffs: &[f64]) -> SignedRanks {
    let mut nz: Vec<f64> = diffs.iter().copied().filter(|d| *d != 0.0).collect();
    nz.sort_by(|a, b| {
        a.abs()
            .partial_cmp(&b.abs())
            .unwrap_or(std::cmp::Ordering::Equal)
    });
    let n = nz.len();
    let mut doubled = vec![0u64; n];
    let mut tie_sizes = Vec::new();
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j + 1 < n && nz[j + 1].abs() == nz[i].abs() {
            j += 1;
        }
        // Ranks i+1 ..= j+1 averaged, doubled.
        let r2 = (i + 1 + j + 1) as u64;
        doubled[i..=j].iter_mut().for_each(|r| *r = r2);
        tie_sizes.push(j - i + 1);
        i = j + 1;
    }
    SignedRanks {
        doubled,
        positive: nz.iter().map(|d| *d > 0.0).collect(),
        tie_sizes,
    }
}

/// Two-sided exact p from the sign-flip distribution of the doubled W+.
fn exact_p(ranks: &SignedRanks, w2: u64) -> f64 {
    let total: u64 = ranks.doubled.iter().sum();
    let mut counts = vec![0u128; total as usize + 1];
    counts[0] = 1;
    let mut reach = 0usize;
    for &r in &ranks.doubled {
        let r = r as usize;
        for s in (0..=reach).rev() {
            if counts[s] > 0 {
                counts[s + r] += counts[s];
            }
        }
        reach += r;
    }
    let lower: u128 = counts[..=w2 as usize].iter().sum();
    let upper: u128 = counts[w2 as usize..].iter().sum();
    let extreme = 2 * lower.min(upper);
    let all = 1u128 << ranks.doubled.len();
    if extreme >= all {
        1.0
    } else {
        extreme as f64 / all as f64
    }
}

fn normal_z(ranks: &SignedRanks, w: f64) -> f64 {
    let n = ranks.doubled.len() as f64;
    let mean = n * (n + 1.0) / 4.0;
    let ties: f64 = ranks
        .tie_sizes
        .iter()
        .map(|&t| {
            let t = t as f64;
            t * t * t - t
        })
        .sum();
    let var = n * (n + 1.0) * (2.0 * n + 1.0) / 24.0 - ties / 48.0;
    let diff = w - mean;
    if diff == 0.0 || var <= 0.0 {
        return 0.0;
    }
    (diff - 0.5 * diff.signum()) / var.sqrt()
}

/// Picks the exact path for small samples and the normal one otherwise.
pub fn wilcoxon_signed_rank<T: Scalar>(paired: &[(T, T)]) -> Result<WilcoxonResult> {
    wilcoxon_signed_rank_with(paired, None)
}

/// Same test with the p-value path forced when `method` is given.
pub fn wilcoxon_signed_rank_with<T: Scalar>(
    paired: &[(T, T)],
    method: Option<PMethod>,
) -> Result<WilcoxonResult> {
    let diffs: Vec<f64> = paired
        .iter()
        .map(|&(a, b)| (a - b).to_f64().unwrap_or(f64::NAN))
        .collect();
    let ranks = signed_ranks(&diffs);
    let n = ranks.doubled.len();
    if n == 0 {
        return Err(Error::AllZeroDifferences);
    }
    let w2: u64 = ranks
        .doubled
        .iter()
        .zip(&ranks.positive)
        .filter(|(_, p)| **p)
        .map(|(r, _)| *r)
        .sum();
    let total2: u64 = ranks.doubled.iter().sum();
    let w = w2 as f64 / 2.0;
    let z = normal_z(&ranks, w);
    let method = method.unwrap_or(if n <= EXACT_LIMIT {
        PMethod::Exact
    } else {
        PMethod::Normal
    });
    let p = match method {
        PMethod::Exact if n <= EXACT_MAX => exact_p(&ranks, w2),
        PMethod::Exact => {
            return Err(Error::InvalidConfig(format!(
                "exact signed-rank distribution limited to {EXACT_MAX} pairs"
            )))
        }
        PMethod::Normal => erfc(z.abs() / std::f64::consts::SQRT_2).min(1.0),
    };
    Ok(WilcoxonResult {
        n_pairs: paired.len(),
        n_effective: n,
        w,
        w_minus: (total2 - w2) as f64 / 2.0,
        z,
        p_two_sided: p,
        effect_r: z / (paired.len() as f64).sqrt(),
        method,
    })
}
