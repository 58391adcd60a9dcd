//! Exact subset optimization over one axis of a p-value matrix.
//!
//! For a fixed threshold `t`, each element (a row, or a column when
//! transposed) gets a priority equal to the share of its p-values below `t`.
//! Because every element contributes the same number of p-values and φ is
//! non-decreasing in `N_α`, the best subset at `t` is a prefix of the
//! elements sorted by priority. Taking the maximum over all thresholds and
//! prefix lengths therefore yields the exact optimum over all `2^E` subsets.
//!
//! Elements with equal priority form a group. Along a group the score is a
//! convex (Berk-Jones) or quasi-convex (Higher-Criticism) function of the
//! prefix length, so only prefixes ending on a group boundary are scored.

use crate::error::{Error, Result};
use crate::pvalues::{level_to_pvalue, PValueMatrix};
use crate::score::{nudge, AlphaGrid, AlphaPolicy, ScoreFunction};

/// Best subset found along one axis.
#[derive(Debug, Clone, PartialEq)]
pub struct LtssOptimum {
    pub score: f64,
    /// Selected element indices in ascending order. Never empty.
    pub subset: Vec<usize>,
    pub alpha_at_max: f64,
}

/// A threshold candidate: a p-value counts as significant iff its numerator
/// is at most `level`, which is exactly `p < alpha`.
#[derive(Debug, Clone, Copy)]
struct Threshold {
    alpha: f64,
    level: u32,
}

/// Best rows given the column subset `cols`.
pub fn optimize_rows(
    pvals: &PValueMatrix,
    cols: &[usize],
    f: ScoreFunction,
    policy: &AlphaPolicy,
) -> Result<LtssOptimum> {
    check_indices(cols, pvals.cols(), "column")?;
    optimize_elements(
        pvals.rows(),
        cols.len(),
        |e, m| pvals.level(e, cols[m]),
        pvals.background_size(),
        f,
        policy,
    )
}

/// Best columns given the row subset `rows`: the row routine applied to the
/// transposed restriction.
pub fn optimize_cols(
    pvals: &PValueMatrix,
    rows: &[usize],
    f: ScoreFunction,
    policy: &AlphaPolicy,
) -> Result<LtssOptimum> {
    check_indices(rows, pvals.rows(), "row")?;
    optimize_elements(
        pvals.cols(),
        rows.len(),
        |e, m| pvals.level(rows[m], e),
        pvals.background_size(),
        f,
        policy,
    )
}

fn check_indices(idx: &[usize], bound: usize, what: &str) -> Result<()> {
    if idx.is_empty() {
        return Err(Error::Precondition(format!("empty {what} set")));
    }
    if let Some(&bad) = idx.iter().find(|&&i| i >= bound) {
        return Err(Error::Precondition(format!(
            "{what} index {bad} out of bounds ({bound})"
        )));
    }
    Ok(())
}

/// Number of numerators `k` in `1..=z+1` whose p-value is strictly below `alpha`.
fn level_below(alpha: f64, z: usize) -> u32 {
    let top = (z + 1) as u32;
    let guess = ((alpha * (z + 1) as f64).floor().max(0.0) as u64).min(top as u64) as u32;
    let mut k = guess;
    while k > 0 && level_to_pvalue(k, z) >= alpha {
        k -= 1;
    }
    while k < top && level_to_pvalue(k + 1, z) < alpha {
        k += 1;
    }
    k
}

fn thresholds(present: &[u32], z: usize, policy: &AlphaPolicy) -> Vec<Threshold> {
    match policy.grid() {
        AlphaGrid::DataDriven => present
            .iter()
            .map(|&level| Threshold {
                alpha: nudge(level_to_pvalue(level, z)),
                level,
            })
            .filter(|t| policy.admits(t.alpha))
            .collect(),
        AlphaGrid::Linear { .. } => policy
            .linear_alphas()
            .into_iter()
            .map(|alpha| Threshold {
                alpha,
                level: level_below(alpha, z),
            })
            .filter(|t| t.level > 0)
            .collect(),
    }
}

#[derive(Debug, Clone, Copy)]
struct Best {
    score: f64,
    k: usize,
    threshold: usize,
}

fn optimize_elements<L>(
    elements: usize,
    members: usize,
    level: L,
    z: usize,
    f: ScoreFunction,
    policy: &AlphaPolicy,
) -> Result<LtssOptimum>
where
    L: Fn(usize, usize) -> u32,
{
    if elements == 0 || members == 0 {
        return Err(Error::Precondition(
            "subset optimization needs at least one element and one member".into(),
        ));
    }

    // no admissible threshold lies above this level
    let cap = level_below(nudge(policy.alpha_max()), z);
    let order = LevelOrder::build(elements, members, &level, cap);
    let present: Vec<u32> = order.runs.iter().map(|r| r.0).collect();
    let thresholds = thresholds(&present, z, policy);

    let mut counts = vec![0u32; elements];
    // histogram of counts, used when there are more elements than count values
    let use_hist = elements > members + 1;
    let mut hist = if use_hist {
        let mut h = vec![0usize; members + 1];
        h[0] = elements;
        h
    } else {
        Vec::new()
    };
    let mut max_count = 0usize;
    let mut scratch: Vec<u32> = Vec::with_capacity(elements);
    let mut groups: Vec<(u64, usize)> = Vec::with_capacity(members + 1);

    let mut cursor = 0;
    let mut run = 0;
    let mut best: Option<Best> = None;
    for (ti, t) in thresholds.iter().enumerate() {
        while run < order.runs.len() && order.runs[run].0 <= t.level {
            let end = order.runs[run].1;
            for &e in &order.elems[cursor..end] {
                let e = e as usize;
                let c = counts[e] as usize;
                counts[e] += 1;
                if use_hist {
                    hist[c] -= 1;
                    hist[c + 1] += 1;
                    max_count = max_count.max(c + 1);
                }
            }
            cursor = end;
            run += 1;
        }

        // with a hits fixed, φ only falls as N grows past a, so every prefix
        // here scores at most φ(a, a) for a = all hits at this threshold
        if let Some(b) = best {
            let bound = if cursor == 0 {
                0.0
            } else {
                f.evaluate(t.alpha, cursor as u64, cursor as u64)
            };
            if bound * (1.0 + 1e-9) < b.score {
                continue;
            }
        }

        groups.clear();
        if use_hist {
            for c in (0..=max_count).rev() {
                if hist[c] > 0 {
                    groups.push((c as u64, hist[c]));
                }
            }
        } else {
            scratch.clear();
            scratch.extend_from_slice(&counts);
            scratch.sort_unstable_by(|a, b| b.cmp(a));
            for &c in &scratch {
                match groups.last_mut() {
                    Some((gc, size)) if *gc == c as u64 => *size += 1,
                    _ => groups.push((c as u64, 1)),
                }
            }
        }

        let mut k = 0usize;
        let mut hits = 0u64;
        for &(c, size) in &groups {
            k += size;
            hits += c * size as u64;
            let s = f.evaluate(t.alpha, hits, (k * members) as u64);
            let better = match best {
                None => true,
                Some(b) => s > b.score || (s == b.score && k < b.k),
            };
            if better {
                best = Some(Best {
                    score: s,
                    k,
                    threshold: ti,
                });
            }
        }
    }

    let (alpha, level_cut, k, score) = match best {
        Some(b) if b.score > 0.0 => {
            let t = thresholds[b.threshold];
            (t.alpha, t.level, b.k, b.score)
        }
        // nothing is over-significant: report the single top-priority element at alpha_max
        _ => (
            policy.alpha_max(),
            level_below(policy.alpha_max(), z),
            1,
            0.0,
        ),
    };

    let subset = top_elements(elements, &order, level_cut, k);
    Ok(LtssOptimum {
        score,
        subset,
        alpha_at_max: alpha,
    })
}

/// Element ids of every cell with level at most `cap`, ordered by level,
/// with the end offset of each run of equal level.
struct LevelOrder {
    elems: Vec<u32>,
    runs: Vec<(u32, usize)>,
}

impl LevelOrder {
    fn build<L>(elements: usize, members: usize, level: &L, cap: u32) -> Self
    where
        L: Fn(usize, usize) -> u32,
    {
        let cells = elements * members;
        if cap as usize > 4 * cells {
            let mut pairs: Vec<(u32, u32)> = Vec::with_capacity(cells);
            for e in 0..elements {
                for m in 0..members {
                    let l = level(e, m);
                    if l <= cap {
                        pairs.push((l, e as u32));
                    }
                }
            }
            pairs.sort_unstable();
            let mut runs: Vec<(u32, usize)> = Vec::new();
            for (i, &(l, _)) in pairs.iter().enumerate() {
                match runs.last_mut() {
                    Some(r) if r.0 == l => r.1 = i + 1,
                    _ => runs.push((l, i + 1)),
                }
            }
            let elems = pairs.into_iter().map(|p| p.1).collect();
            return Self { elems, runs };
        }

        // counting sort over levels 1..=cap
        let mut start = vec![0usize; cap as usize + 2];
        for e in 0..elements {
            for m in 0..members {
                let l = level(e, m);
                if l <= cap {
                    start[l as usize + 1] += 1;
                }
            }
        }
        let mut runs = Vec::new();
        for l in 1..start.len() {
            let n = start[l];
            start[l] += start[l - 1];
            if n > 0 {
                runs.push(((l - 1) as u32, start[l]));
            }
        }
        let mut elems = vec![0u32; start[start.len() - 1]];
        for e in 0..elements {
            for m in 0..members {
                let l = level(e, m);
                if l <= cap {
                    let slot = &mut start[l as usize];
                    elems[*slot] = e as u32;
                    *slot += 1;
                }
            }
        }
        Self { elems, runs }
    }
}

/// The first `k` elements in priority order at `level_cut`, ties by index,
/// returned in ascending index order.
fn top_elements(elements: usize, order: &LevelOrder, level_cut: u32, k: usize) -> Vec<usize> {
    let end = order
        .runs
        .iter()
        .take_while(|r| r.0 <= level_cut)
        .last()
        .map_or(0, |r| r.1);
    let mut counts = vec![0usize; elements];
    for &e in &order.elems[..end] {
        counts[e as usize] += 1;
    }
    let mut order: Vec<usize> = (0..elements).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(a.cmp(&b)));
    let mut subset = order[..k].to_vec();
    subset.sort_unstable();
    subset
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::score::score_subset;

    fn all(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    #[test]
    fn two_by_two_example() {
        // Z = 99 so p-values are hundredths
        let p = PValueMatrix::from_levels(2, 2, 99, vec![1, 2, 90, 80]).unwrap();
        let opt = optimize_rows(&p, &all(2), ScoreFunction::BerkJones, &AlphaPolicy::default()).unwrap();
        assert_eq!(opt.subset, vec![0]);
        let expected = -2.0 * nudge(0.02).ln();
        assert!((opt.score - expected).abs() < 1e-12);
        assert!((opt.score - 2.0 * 50f64.ln()).abs() < 1e-9);
    }

    #[test]
    fn all_ones_is_degenerate() {
        let p = PValueMatrix::from_levels(3, 2, 4, vec![5; 6]).unwrap();
        let opt = optimize_rows(&p, &all(2), ScoreFunction::BerkJones, &AlphaPolicy::default()).unwrap();
        assert_eq!(opt.score, 0.0);
        assert_eq!(opt.subset, vec![0]);
        assert_eq!(opt.alpha_at_max, 0.5);
    }

    #[test]
    fn single_cell() {
        let p = PValueMatrix::from_levels(1, 1, 19, vec![1]).unwrap();
        let opt = optimize_rows(&p, &[0], ScoreFunction::BerkJones, &AlphaPolicy::default()).unwrap();
        assert!((opt.score - 20f64.ln()).abs() < 1e-9);

        let half = PValueMatrix::from_levels(1, 1, 1, vec![1]).unwrap();
        let opt = optimize_cols(&half, &[0], ScoreFunction::BerkJones, &AlphaPolicy::default()).unwrap();
        assert_eq!(opt.score, 0.0);
        assert_eq!(opt.subset, vec![0]);
    }

    #[test]
    fn column_example() {
        let p = PValueMatrix::from_levels(2, 2, 99, vec![1, 90, 1, 90]).unwrap();
        let opt = optimize_cols(&p, &all(2), ScoreFunction::BerkJones, &AlphaPolicy::default()).unwrap();
        assert_eq!(opt.subset, vec![0]);
    }

    #[test]
    fn empty_restriction_is_rejected() {
        let p = PValueMatrix::from_levels(1, 1, 1, vec![1]).unwrap();
        assert!(optimize_rows(&p, &[], ScoreFunction::BerkJones, &AlphaPolicy::default()).is_err());
        assert!(optimize_cols(&p, &[3], ScoreFunction::BerkJones, &AlphaPolicy::default()).is_err());
    }

    #[test]
    fn level_below_matches_float_comparison() {
        for z in [1usize, 2, 9, 99, 500, 4999] {
            for alpha in [1e-6, 0.001, 0.01, 0.05, 0.1, 0.3333, 0.5, 0.9, 1.0] {
                let expected = (1..=(z + 1) as u32)
                    .filter(|&k| level_to_pvalue(k, z) < alpha)
                    .count() as u32;
                assert_eq!(level_below(alpha, z), expected, "z={z} alpha={alpha}");
            }
        }
    }

    #[test]
    fn returned_score_matches_score_subset() {
        let p = PValueMatrix::from_levels(3, 3, 9, vec![1, 2, 10, 3, 1, 7, 10, 9, 8]).unwrap();
        for f in [ScoreFunction::BerkJones, ScoreFunction::HigherCriticism] {
            let opt = optimize_rows(&p, &all(3), f, &AlphaPolicy::default()).unwrap();
            let direct = score_subset(&p.values_in(&opt.subset, &all(3)), f, &AlphaPolicy::default()).unwrap();
            assert!((opt.score - direct.score).abs() < 1e-12);
        }
    }
}
