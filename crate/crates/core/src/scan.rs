//! Iterative-ascent search for the most anomalous submatrix of p-values.
//!
//! Each restart draws a random column subset, then alternates exact row
//! and column optimization until a full round changes nothing. Restarts are
//! independent and run in parallel; the best one wins, ties going to the
//! lowest restart index.

use std::fmt;
use std::str::FromStr;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ltss::{optimize_cols, optimize_rows};
use crate::pvalues::PValueMatrix;
use crate::score::{AlphaPolicy, ScoreFunction};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScanMode {
    /// Joint search over subsets of samples and nodes.
    Group,
    /// Each sample scored on its own over node subsets.
    Individual,
}

impl fmt::Display for ScanMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ScanMode::Group => "group",
            ScanMode::Individual => "individual",
        })
    }
}

impl FromStr for ScanMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "group" => Ok(ScanMode::Group),
            "individual" => Ok(ScanMode::Individual),
            other => Err(Error::Domain(format!(
                "unknown scan mode '{other}', expected 'group' or 'individual'"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub score_function: ScoreFunction,
    pub alpha_policy: AlphaPolicy,
    pub restarts: usize,
    pub max_iterations: usize,
    pub convergence_epsilon: f64,
    pub seed: u64,
    pub mode: ScanMode,
}

impl Default for ScanConfig {
    fn default() -> Self {
        Self {
            score_function: ScoreFunction::BerkJones,
            alpha_policy: AlphaPolicy::default(),
            restarts: 10,
            max_iterations: 100,
            convergence_epsilon: 1e-9,
            seed: 0,
            mode: ScanMode::Group,
        }
    }
}

impl ScanConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::Precondition("restarts must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::Precondition("max_iterations must be >= 1".into()));
        }
        if self.convergence_epsilon.is_nan() || self.convergence_epsilon <= 0.0 {
            return Err(Error::Precondition(
                "convergence_epsilon must be > 0".into(),
            ));
        }
        Ok(())
    }

    pub fn with_mode(&self, mode: ScanMode) -> Self {
        Self {
            mode,
            ..self.clone()
        }
    }

    pub fn with_seed(&self, seed: u64) -> Self {
        Self {
            seed,
            ..self.clone()
        }
    }
}

/// Generator for one restart: stream `restart` of the scan seed.
pub fn restart_rng(seed: u64, restart: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(restart as u64);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RestartTrace {
    pub score: f64,
    pub iterations: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestartOutcome {
    pub score: f64,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    pub alpha_at_max: f64,
    pub iterations: usize,
    /// Score after every half-step (rows, cols, rows, ...).
    pub half_step_scores: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanResult {
    pub mode: ScanMode,
    pub score_function: ScoreFunction,
    pub score: f64,
    pub row_subset: Vec<usize>,
    pub col_subset: Vec<usize>,
    pub alpha_at_max: f64,
    pub restart_traces: Vec<RestartTrace>,
    pub wall_time_seconds: f64,
    pub seed: u64,
}

fn random_columns<R: Rng>(cols: usize, rng: &mut R) -> Vec<usize> {
    loop {
        let picked: Vec<usize> = (0..cols).filter(|_| rng.random_bool(0.5)).collect();
        if !picked.is_empty() {
            return picked;
        }
    }
}

/// One ascent from a random column subset to a joint local maximum.
pub fn single_restart<R: Rng>(
    pvals: &PValueMatrix,
    config: &ScanConfig,
    rng: &mut R,
) -> Result<RestartOutcome> {
    config.validate()?;
    ascend(pvals, &pvals.transpose(), config, rng)
}

/// `transposed` must be `pvals.transpose()`; column steps run as row steps
/// on it so the cells they read are contiguous.
fn ascend<R: Rng>(
    pvals: &PValueMatrix,
    transposed: &PValueMatrix,
    config: &ScanConfig,
    rng: &mut R,
) -> Result<RestartOutcome> {
    let f = config.score_function;
    let policy = &config.alpha_policy;
    let eps = config.convergence_epsilon;

    let mut cols = random_columns(pvals.cols(), rng);
    let mut rows: Vec<usize> = Vec::new();
    let mut score = -1.0;
    let mut alpha = policy.alpha_max();
    let mut half_step_scores = Vec::new();
    let mut iterations = 0;
    // a half-step whose input is unchanged since it last ran returns the same optimum
    let mut cols_fresh = true;
    let mut rows_fresh = false;

    while iterations < config.max_iterations {
        iterations += 1;
        let mut changed = false;

        if cols_fresh {
            cols_fresh = false;
            let by_rows = optimize_rows(pvals, &cols, f, policy)?;
            debug_assert!(by_rows.score >= score - 1e-12, "row step decreased the score");
            if by_rows.score > score + eps {
                score = by_rows.score;
                rows = by_rows.subset;
                alpha = by_rows.alpha_at_max;
                rows_fresh = true;
                changed = true;
            }
        }
        half_step_scores.push(score);

        if rows_fresh {
            rows_fresh = false;
            let by_cols = optimize_rows(transposed, &rows, f, policy)?;
            debug_assert!(by_cols.score >= score - 1e-12, "column step decreased the score");
            if by_cols.score > score + eps {
                score = by_cols.score;
                cols = by_cols.subset;
                alpha = by_cols.alpha_at_max;
                cols_fresh = true;
                changed = true;
            }
        }
        half_step_scores.push(score);

        if !changed {
            break;
        }
    }

    Ok(RestartOutcome {
        score,
        rows,
        cols,
        alpha_at_max: alpha,
        iterations,
        half_step_scores,
    })
}

/// Group scan with `config.restarts` independent restarts.
pub fn scan(pvals: &PValueMatrix, config: &ScanConfig) -> Result<ScanResult> {
    if config.mode != ScanMode::Group {
        return Err(Error::Precondition("scan requires group mode".into()));
    }
    config.validate()?;
    let start = Instant::now();
    let transposed = pvals.transpose();
    let outcomes: Vec<RestartOutcome> = (0..config.restarts)
        .into_par_iter()
        .map(|r| ascend(pvals, &transposed, config, &mut restart_rng(config.seed, r)))
        .collect::<Result<_>>()?;

    let mut best = 0;
    for (i, o) in outcomes.iter().enumerate() {
        if o.score > outcomes[best].score {
            best = i;
        }
    }
    let wall_time_seconds = start.elapsed().as_secs_f64();
    let restart_traces = outcomes
        .iter()
        .map(|o| RestartTrace {
            score: o.score,
            iterations: o.iterations,
        })
        .collect();
    let winner = outcomes.into_iter().nth(best).expect("at least one restart");
    Ok(ScanResult {
        mode: ScanMode::Group,
        score_function: config.score_function,
        score: winner.score,
        row_subset: winner.rows,
        col_subset: winner.cols,
        alpha_at_max: winner.alpha_at_max,
        restart_traces,
        wall_time_seconds,
        seed: config.seed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndividualScore {
    pub row: usize,
    pub score: f64,
    pub alpha_at_max: f64,
    pub col_subset: Vec<usize>,
}

/// Scores every row on its own: the best node subset for a single row is
/// exact after one column optimization.
pub fn individual_scan(pvals: &PValueMatrix, config: &ScanConfig) -> Result<Vec<IndividualScore>> {
    if config.mode != ScanMode::Individual {
        return Err(Error::Precondition(
            "individual_scan requires individual mode".into(),
        ));
    }
    (0..pvals.rows())
        .into_par_iter()
        .map(|row| {
            let opt = optimize_cols(pvals, &[row], config.score_function, &config.alpha_policy)?;
            Ok(IndividualScore {
                row,
                score: opt.score,
                alpha_at_max: opt.alpha_at_max,
                col_subset: opt.subset,
            })
        })
        .collect()
}
