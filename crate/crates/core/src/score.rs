//! Non-parametric scan statistics.
//!
//! A subset's score is `max over α of φ(α, N_α, N)` where `N` is the number
//! of p-values in the subset and `N_α` the number strictly below `α`. Both
//! statistics here are one-sided: they reward only `N_α > α·N`.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Relative amount added to an observed p-value to form a threshold that
/// counts that p-value under the strict `<` rule.
pub const ALPHA_NUDGE: f64 = 1e-12;

pub const DEFAULT_ALPHA_MAX: f64 = 0.5;

#[inline]
pub fn nudge(p: f64) -> f64 {
    p * (1.0 + ALPHA_NUDGE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScoreFunction {
    BerkJones,
    HigherCriticism,
}

impl ScoreFunction {
    pub fn short_name(self) -> &'static str {
        match self {
            ScoreFunction::BerkJones => "bj",
            ScoreFunction::HigherCriticism => "hc",
        }
    }

    /// Checked evaluation of φ.
    pub fn phi(self, alpha: f64, n_alpha: u64, n: u64) -> Result<f64> {
        check_phi_args(alpha, n_alpha, n)?;
        Ok(self.evaluate(alpha, n_alpha, n))
    }

    /// Unchecked φ for hot loops; callers guarantee `0 < alpha < 1`, `n >= 1`
    /// and `n_alpha <= n`.
    #[inline]
    pub(crate) fn evaluate(self, alpha: f64, n_alpha: u64, n: u64) -> f64 {
        match self {
            ScoreFunction::BerkJones => berk_jones(alpha, n_alpha, n),
            ScoreFunction::HigherCriticism => higher_criticism(alpha, n_alpha, n),
        }
    }
}

impl fmt::Display for ScoreFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.short_name())
    }
}

impl FromStr for ScoreFunction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "bj" | "berk_jones" | "berk-jones" => Ok(ScoreFunction::BerkJones),
            "hc" | "higher_criticism" | "higher-criticism" => Ok(ScoreFunction::HigherCriticism),
            other => Err(Error::Domain(format!(
                "unknown score function '{other}', expected 'bj' or 'hc'"
            ))),
        }
    }
}

fn check_phi_args(alpha: f64, n_alpha: u64, n: u64) -> Result<()> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(Error::Domain(format!("alpha = {alpha} is outside (0, 1)")));
    }
    if n == 0 {
        return Err(Error::Precondition("N must be at least 1".into()));
    }
    if n_alpha > n {
        return Err(Error::Precondition(format!("N_alpha = {n_alpha} exceeds N = {n}")));
    }
    Ok(())
}

/// Bernoulli Kullback-Leibler divergence `KL(x ‖ y)` with the limits
/// `0·ln(0/y) = 0` and `1·ln(1/y) = -ln y` taken analytically.
pub fn kl_divergence(x: f64, y: f64) -> f64 {
    let head = if x > 0.0 { x * (x / y).ln() } else { 0.0 };
    let tail = if x < 1.0 {
        (1.0 - x) * ((1.0 - x) / (1.0 - y)).ln()
    } else {
        0.0
    };
    head + tail
}

#[inline]
fn berk_jones(alpha: f64, n_alpha: u64, n: u64) -> f64 {
    let n = n as f64;
    let observed = n_alpha as f64 / n;
    if observed > alpha {
        n * kl_divergence(observed, alpha)
    } else {
        0.0
    }
}

#[inline]
fn higher_criticism(alpha: f64, n_alpha: u64, n: u64) -> f64 {
    let n = n as f64;
    let excess = n_alpha as f64 - alpha * n;
    if excess > 0.0 {
        excess / (n * alpha * (1.0 - alpha)).sqrt()
    } else {
        0.0
    }
}

/// Berk-Jones statistic `N·KL(N_α/N, α)`, zero unless `N_α/N > α`.
pub fn phi_bj(alpha: f64, n_alpha: u64, n: u64) -> Result<f64> {
    ScoreFunction::BerkJones.phi(alpha, n_alpha, n)
}

/// Higher-Criticism statistic `(N_α − αN) / sqrt(Nα(1−α))`, clipped at zero.
pub fn phi_hc(alpha: f64, n_alpha: u64, n: u64) -> Result<f64> {
    ScoreFunction::HigherCriticism.phi(alpha, n_alpha, n)
}

/// Which significance thresholds are tried when maximizing over α.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlphaGrid {
    /// Every distinct observed p-value, nudged up by [`ALPHA_NUDGE`].
    DataDriven,
    /// `size` equally spaced values `alpha_max·i/size`, `i = 1..=size`.
    Linear { size: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AlphaPolicy {
    grid: AlphaGrid,
    alpha_max: f64,
}

impl Default for AlphaPolicy {
    fn default() -> Self {
        Self {
            grid: AlphaGrid::DataDriven,
            alpha_max: DEFAULT_ALPHA_MAX,
        }
    }
}

impl AlphaPolicy {
    pub fn new(grid: AlphaGrid, alpha_max: f64) -> Result<Self> {
        if !(alpha_max > 0.0 && alpha_max <= 1.0) {
            return Err(Error::Domain(format!("alpha_max = {alpha_max} is outside (0, 1]")));
        }
        if let AlphaGrid::Linear { size } = grid {
            if size < 2 {
                return Err(Error::Domain(format!("linear alpha grid needs >= 2 points, got {size}")));
            }
        }
        Ok(Self { grid, alpha_max })
    }

    pub fn data_driven(alpha_max: f64) -> Result<Self> {
        Self::new(AlphaGrid::DataDriven, alpha_max)
    }

    pub fn linear(size: usize, alpha_max: f64) -> Result<Self> {
        Self::new(AlphaGrid::Linear { size }, alpha_max)
    }

    pub fn grid(&self) -> AlphaGrid {
        self.grid
    }

    pub fn alpha_max(&self) -> f64 {
        self.alpha_max
    }

    /// Whether a candidate threshold may be evaluated. α = 1 is skipped
    /// because no proportion can exceed it.
    #[inline]
    pub(crate) fn admits(&self, alpha: f64) -> bool {
        alpha > 0.0 && alpha <= self.alpha_max && alpha < 1.0
    }

    /// Candidate thresholds for the linear grid (empty for data-driven).
    pub(crate) fn linear_alphas(&self) -> Vec<f64> {
        match self.grid {
            AlphaGrid::DataDriven => Vec::new(),
            AlphaGrid::Linear { size } => (1..=size)
                .map(|i| self.alpha_max * i as f64 / size as f64)
                .filter(|&a| self.admits(a))
                .collect(),
        }
    }
}

/// Score of one subset of p-values together with its maximizing threshold.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubsetScore {
    pub score: f64,
    pub alpha_at_max: f64,
    pub n: u64,
    pub n_alpha: u64,
}

/// Maximizes φ over the policy's thresholds for a flat list of p-values.
///
/// When no threshold beats zero the result reports `alpha_max` as its
/// threshold.
pub fn score_subset(pvals: &[f64], f: ScoreFunction, policy: &AlphaPolicy) -> Result<SubsetScore> {
    if pvals.is_empty() {
        return Err(Error::Precondition("cannot score an empty set of p-values".into()));
    }
    if let Some(p) = pvals.iter().find(|p| !(**p > 0.0 && **p <= 1.0)) {
        return Err(Error::Domain(format!("p-value {p} is outside (0, 1]")));
    }
    let mut sorted = pvals.to_vec();
    sorted.sort_unstable_by(f64::total_cmp);
    let n = sorted.len() as u64;

    let candidates: Vec<f64> = match policy.grid() {
        AlphaGrid::DataDriven => {
            let mut c: Vec<f64> = sorted.iter().map(|&p| nudge(p)).collect();
            c.dedup();
            c.retain(|&a| policy.admits(a));
            c
        }
        AlphaGrid::Linear { .. } => policy.linear_alphas(),
    };

    let below = |alpha: f64| sorted.partition_point(|&p| p < alpha) as u64;
    let mut best = SubsetScore {
        score: 0.0,
        alpha_at_max: policy.alpha_max(),
        n,
        n_alpha: below(policy.alpha_max()),
    };
    for alpha in candidates {
        let n_alpha = below(alpha);
        let s = f.evaluate(alpha, n_alpha, n);
        if s > best.score {
            best = SubsetScore {
                score: s,
                alpha_at_max: alpha,
                n,
                n_alpha,
            };
        }
    }
    Ok(best)
}
