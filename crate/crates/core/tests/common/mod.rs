//! Brute-force oracles shared by the integration and acceptance suites.
//! They enumerate subsets explicitly and never call the optimizer.
#![allow(dead_code)]

use npss::score::nudge;
use npss::{AlphaPolicy, PValueMatrix, ScoreFunction};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Every data-driven threshold for the p-values in `values`.
pub fn candidate_alphas(values: &[f64], policy: &AlphaPolicy) -> Vec<f64> {
    let mut c: Vec<f64> = values
        .iter()
        .map(|&p| nudge(p))
        .filter(|&a| a <= policy.alpha_max() && a < 1.0)
        .collect();
    c.sort_by(f64::total_cmp);
    c.dedup();
    c
}

fn members(mask: usize, n: usize) -> Vec<usize> {
    (0..n).filter(|i| mask & (1 << i) != 0).collect()
}

/// Max of φ over thresholds for the p-values at `rows × cols`.
fn block_score(p: &PValueMatrix, rows: &[usize], cols: &[usize], alphas: &[f64], f: ScoreFunction) -> f64 {
    let n = (rows.len() * cols.len()) as u64;
    let mut best = 0.0f64;
    for &alpha in alphas {
        let mut hits = 0u64;
        for &r in rows {
            for &c in cols {
                if p.get(r, c) < alpha {
                    hits += 1;
                }
            }
        }
        best = best.max(f.phi(alpha, hits, n).unwrap());
    }
    best
}

/// Best score over all non-empty row subsets for fixed columns.
pub fn brute_force_rows(p: &PValueMatrix, cols: &[usize], f: ScoreFunction, policy: &AlphaPolicy) -> f64 {
    let all_rows: Vec<usize> = (0..p.rows()).collect();
    let alphas = candidate_alphas(&p.values_in(&all_rows, cols), policy);
    (1..1usize << p.rows())
        .map(|mask| block_score(p, &members(mask, p.rows()), cols, &alphas, f))
        .fold(0.0, f64::max)
}

/// Best score over all non-empty row subsets × column subsets.
pub fn brute_force_joint(p: &PValueMatrix, f: ScoreFunction, policy: &AlphaPolicy) -> f64 {
    let alphas = candidate_alphas(&p.to_values(), policy);
    let mut best = 0.0f64;
    for rm in 1..1usize << p.rows() {
        let rows = members(rm, p.rows());
        for cm in 1..1usize << p.cols() {
            best = best.max(block_score(p, &rows, &members(cm, p.cols()), &alphas, f));
        }
    }
    best
}

/// Score of a given block, evaluated directly.
pub fn direct_block_score(p: &PValueMatrix, rows: &[usize], cols: &[usize], f: ScoreFunction, policy: &AlphaPolicy) -> f64 {
    let alphas = candidate_alphas(&p.values_in(rows, cols), policy);
    block_score(p, rows, cols, &alphas, f)
}

/// Random p-value matrix with a random background size and frequent small values.
pub fn random_pvalues(rng: &mut ChaCha8Rng, max_rows: usize, max_cols: usize) -> PValueMatrix {
    let rows = rng.random_range(1..=max_rows);
    let cols = rng.random_range(1..=max_cols);
    random_pvalues_of(rng, rows, cols)
}

pub fn random_pvalues_of(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> PValueMatrix {
    let z = rng.random_range(1..60usize);
    let skew: f64 = rng.random_range(1.0..4.0);
    let levels = (0..rows * cols)
        .map(|_| {
            let u: f64 = rng.random::<f64>().powf(skew);
            1 + (u * (z + 1) as f64).floor().min(z as f64) as u32
        })
        .collect();
    PValueMatrix::from_levels(rows, cols, z, levels).unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn flip(set: &[usize], i: usize) -> Vec<usize> {
    let mut out: Vec<usize> = set.iter().copied().filter(|&x| x != i).collect();
    if out.len() == set.len() {
        out.push(i);
        out.sort_unstable();
    }
    out
}

/// Largest score gain from flipping one row (columns fixed) or one column
/// (rows fixed). Flips that empty a side are skipped.
pub fn best_single_flip_gain(
    p: &PValueMatrix,
    rows: &[usize],
    cols: &[usize],
    f: ScoreFunction,
    policy: &AlphaPolicy,
) -> f64 {
    let base = direct_block_score(p, rows, cols, f, policy);
    let mut gain = f64::NEG_INFINITY;
    for r in 0..p.rows() {
        let rs = flip(rows, r);
        if !rs.is_empty() {
            gain = gain.max(direct_block_score(p, &rs, cols, f, policy) - base);
        }
    }
    for c in 0..p.cols() {
        let cs = flip(cols, c);
        if !cs.is_empty() {
            gain = gain.max(direct_block_score(p, rows, &cs, f, policy) - base);
        }
    }
    gain
}
