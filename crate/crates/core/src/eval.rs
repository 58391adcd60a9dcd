//! Evaluation protocol: contaminated vs. clean test sets, detection power
//! (AUC), precision/recall of the returned sample subsets, and timing.

use std::path::Path;
use std::time::Instant;

use rand::seq::{index, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{load_matrix, save_matrix, save_result, write_atomic, MatrixFormat};
use crate::matrix::{ActivationMatrix, LabelVector};
use crate::pvalues::BackgroundModel;
use crate::scan::{individual_scan, scan, ScanConfig, ScanMode};

/// Draws `round(proportion·size)` fake rows and the rest real rows without
/// replacement, shuffled together.
pub fn sample_test_set<R: Rng>(
    real_pool: &ActivationMatrix,
    fake_pool: &ActivationMatrix,
    proportion: f64,
    size: usize,
    rng: &mut R,
) -> Result<(ActivationMatrix, LabelVector)> {
    if real_pool.cols() != fake_pool.cols() {
        return Err(Error::Shape(format!(
            "real pool has {} columns, fake pool has {}",
            real_pool.cols(),
            fake_pool.cols()
        )));
    }
    if !(0.0..=1.0).contains(&proportion) {
        return Err(Error::Precondition(format!("proportion {proportion} outside [0, 1]")));
    }
    if size == 0 {
        return Err(Error::Precondition("test set size must be >= 1".into()));
    }
    let n_fake = (proportion * size as f64).round() as usize;
    let n_real = size - n_fake;
    if n_fake > fake_pool.rows() || n_real > real_pool.rows() {
        return Err(Error::Precondition(format!(
            "need {n_fake} fake and {n_real} real rows, pools have {} and {}",
            fake_pool.rows(),
            real_pool.rows()
        )));
    }

    let fakes = index::sample(rng, fake_pool.rows(), n_fake).into_vec();
    let reals = index::sample(rng, real_pool.rows(), n_real).into_vec();
    let mut picks: Vec<(bool, usize)> = fakes
        .into_iter()
        .map(|i| (true, i))
        .chain(reals.into_iter().map(|i| (false, i)))
        .collect();
    picks.shuffle(rng);

    let mut values = Vec::with_capacity(size * real_pool.cols());
    for &(fake, i) in &picks {
        let src = if fake { fake_pool } else { real_pool };
        values.extend_from_slice(src.row(i));
    }
    let m = ActivationMatrix::new(size, real_pool.cols(), values)?;
    let labels = LabelVector::new(picks.iter().map(|p| p.0).collect());
    Ok((m, labels))
}

/// Precision and recall of `returned` against the positive labels. An empty
/// `returned` set has precision 0.
pub fn precision_recall(returned: &[usize], labels: &LabelVector) -> Result<(f64, f64)> {
    if let Some(&bad) = returned.iter().find(|&&i| i >= labels.len()) {
        return Err(Error::Precondition(format!(
            "returned index {bad} out of bounds ({})",
            labels.len()
        )));
    }
    let positives = labels.count_positive();
    if positives == 0 {
        return Err(Error::UndefinedRecall);
    }
    let flags = labels.as_slice();
    let hits = returned.iter().filter(|&&i| flags[i]).count() as f64;
    let precision = if returned.is_empty() {
        0.0
    } else {
        hits / returned.len() as f64
    };
    Ok((precision, hits / positives as f64))
}

/// Mann-Whitney AUC: the share of (positive, negative) pairs where the
/// positive scores higher, ties counting one half.
pub fn compute_auc(positive: &[f64], negative: &[f64]) -> Result<f64> {
    if positive.is_empty() || negative.is_empty() {
        return Err(Error::Precondition("AUC needs non-empty positive and negative scores".into()));
    }
    if positive.iter().chain(negative).any(|v| v.is_nan()) {
        return Err(Error::Domain("AUC scores contain NaN".into()));
    }
    let mut all: Vec<(f64, bool)> = positive
        .iter()
        .map(|&s| (s, true))
        .chain(negative.iter().map(|&s| (s, false)))
        .collect();
    all.sort_by(|a, b| a.0.total_cmp(&b.0));

    // sum of (1-based, tie-averaged) ranks of the positives
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < all.len() {
        let mut j = i;
        while j + 1 < all.len() && all[j + 1].0 == all[i].0 {
            j += 1;
        }
        let avg_rank = (i + j) as f64 / 2.0 + 1.0;
        let pos_in_tie = all[i..=j].iter().filter(|x| x.1).count();
        rank_sum += avg_rank * pos_in_tie as f64;
        i = j + 1;
    }
    let np = positive.len() as f64;
    let nn = negative.len() as f64;
    Ok((rank_sum - np * (np + 1.0) / 2.0) / (np * nn))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub std: f64,
}

impl Summary {
    /// Mean and sample standard deviation; std is 0 with fewer than two values.
    pub fn of(values: &[f64]) -> Self {
        if values.is_empty() {
            return Self { mean: 0.0, std: 0.0 };
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() < 2 {
            0.0
        } else {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        };
        Self { mean, std }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub proportions: Vec<f64>,
    pub test_set_size: usize,
    pub trials_per_condition: usize,
    pub clean_trials: usize,
    pub scan: ScanConfig,
    /// Also score each image on its own and report per-image AUC.
    pub individual: bool,
    pub seed: u64,
}

impl Default for ExperimentSpec {
    fn default() -> Self {
        Self {
            proportions: vec![0.1, 0.2, 0.3, 0.5],
            test_set_size: 100,
            trials_per_condition: 100,
            clean_trials: 100,
            scan: ScanConfig::default(),
            individual: false,
            seed: 0,
        }
    }
}

impl ExperimentSpec {
    pub fn validate(&self) -> Result<()> {
        if self.proportions.is_empty() {
            return Err(Error::Precondition("no proportions given".into()));
        }
        for &p in &self.proportions {
            if !(p > 0.0 && p <= 1.0) {
                return Err(Error::Precondition(format!("proportion {p} outside (0, 1]")));
            }
            if p * (self.test_set_size as f64) < 1.0 {
                return Err(Error::Precondition(format!(
                    "proportion {p} of {} rows is less than one sample",
                    self.test_set_size
                )));
            }
        }
        if self.trials_per_condition == 0 || self.clean_trials == 0 {
            return Err(Error::Precondition("trial counts must be >= 1".into()));
        }
        self.scan.validate()
    }
}

/// One scanned test set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    pub score: f64,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
    /// `None` for clean (all-real) test sets.
    pub precision: Option<f64>,
    pub recall: Option<f64>,
    /// P-value computation plus scan.
    pub scan_seconds: f64,
    /// Per-image scores split by label, when individual scanning ran.
    #[serde(skip)]
    individual: Option<(Vec<f64>, Vec<f64>)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProportionReport {
    pub proportion: f64,
    pub auc: f64,
    pub precision: Summary,
    pub recall: Summary,
    pub mean_scan_seconds: f64,
    pub individual_auc: Option<f64>,
    pub trials: Vec<TrialOutcome>,
}

impl ProportionReport {
    pub fn positive_scores(&self) -> Vec<f64> {
        self.trials.iter().map(|t| t.score).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub conditions: Vec<ProportionReport>,
    pub clean: Vec<TrialOutcome>,
}

impl EvalReport {
    pub fn clean_scores(&self) -> Vec<f64> {
        self.clean.iter().map(|t| t.score).collect()
    }

    pub fn condition(&self, proportion: f64) -> Option<&ProportionReport> {
        self.conditions.iter().find(|c| c.proportion == proportion)
    }
}

/// Generator for one trial; stream 0 is reserved for clean test sets and
/// stream `k + 1` for the k-th proportion.
fn trial_rng(seed: u64, condition: usize, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(((condition as u64) << 32) | trial as u64);
    rng
}

fn run_trial(
    model: &BackgroundModel,
    real_pool: &ActivationMatrix,
    fake_pool: &ActivationMatrix,
    proportion: f64,
    spec: &ExperimentSpec,
    rng: &mut ChaCha8Rng,
) -> Result<TrialOutcome> {
    let (test, labels) = sample_test_set(real_pool, fake_pool, proportion, spec.test_set_size, rng)?;
    let config = spec.scan.with_mode(ScanMode::Group).with_seed(rng.random());

    let start = Instant::now();
    let pvals = model.pvalues(&test)?;
    let result = scan(&pvals, &config)?;
    let scan_seconds = start.elapsed().as_secs_f64();

    let (precision, recall) = if labels.count_positive() > 0 {
        let (p, r) = precision_recall(&result.row_subset, &labels)?;
        (Some(p), Some(r))
    } else {
        (None, None)
    };

    let individual = if spec.individual && labels.count_positive() > 0 {
        let scores = individual_scan(&pvals, &config.with_mode(ScanMode::Individual))?;
        let mut pos = Vec::new();
        let mut neg = Vec::new();
        for s in scores {
            if labels.as_slice()[s.row] {
                pos.push(s.score);
            } else {
                neg.push(s.score);
            }
        }
        Some((pos, neg))
    } else {
        None
    };

    Ok(TrialOutcome {
        score: result.score,
        rows: result.row_subset,
        cols: result.col_subset,
        precision,
        recall,
        scan_seconds,
        individual,
    })
}

/// Runs the full protocol. The clean (negative) distribution is scanned once
/// and shared by every proportion.
pub fn run_experiment(
    spec: &ExperimentSpec,
    real_pool: &ActivationMatrix,
    fake_pool: &ActivationMatrix,
    background: &ActivationMatrix,
) -> Result<EvalReport> {
    spec.validate()?;
    if background.cols() != real_pool.cols() || background.cols() != fake_pool.cols() {
        return Err(Error::Shape("background and pools must have the same columns".into()));
    }
    let model = BackgroundModel::new(background)?;

    let clean: Vec<TrialOutcome> = (0..spec.clean_trials)
        .into_par_iter()
        .map(|t| run_trial(&model, real_pool, fake_pool, 0.0, spec, &mut trial_rng(spec.seed, 0, t)))
        .collect::<Result<_>>()?;
    let clean_scores: Vec<f64> = clean.iter().map(|t| t.score).collect();

    let mut conditions = Vec::with_capacity(spec.proportions.len());
    for (ci, &proportion) in spec.proportions.iter().enumerate() {
        let trials: Vec<TrialOutcome> = (0..spec.trials_per_condition)
            .into_par_iter()
            .map(|t| {
                run_trial(&model, real_pool, fake_pool, proportion, spec, &mut trial_rng(spec.seed, ci + 1, t))
            })
            .collect::<Result<_>>()?;

        let scores: Vec<f64> = trials.iter().map(|t| t.score).collect();
        let precisions: Vec<f64> = trials.iter().filter_map(|t| t.precision).collect();
        let recalls: Vec<f64> = trials.iter().filter_map(|t| t.recall).collect();
        let seconds: Vec<f64> = trials.iter().map(|t| t.scan_seconds).collect();

        let individual_auc = if spec.individual {
            let mut pos = Vec::new();
            let mut neg = Vec::new();
            for t in &trials {
                if let Some((p, n)) = &t.individual {
                    pos.extend_from_slice(p);
                    neg.extend_from_slice(n);
                }
            }
            // a proportion of 1.0 leaves no real images to compare against
            if pos.is_empty() || neg.is_empty() {
                None
            } else {
                Some(compute_auc(&pos, &neg)?)
            }
        } else {
            None
        };

        conditions.push(ProportionReport {
            proportion,
            auc: compute_auc(&scores, &clean_scores)?,
            precision: Summary::of(&precisions),
            recall: Summary::of(&recalls),
            mean_scan_seconds: Summary::of(&seconds).mean,
            individual_auc,
            trials,
        });
    }
    Ok(EvalReport { conditions, clean })
}

/// CSV with one line per proportion; an `individual_auc` column is added
/// when individual scanning ran.
pub fn encode_eval_csv(report: &EvalReport) -> String {
    let individual = report.conditions.iter().any(|c| c.individual_auc.is_some());
    let mut out = String::from(
        "proportion,auc,precision_mean,precision_std,recall_mean,recall_std,mean_scan_seconds",
    );
    if individual {
        out.push_str(",individual_auc");
    }
    out.push('\n');
    for c in &report.conditions {
        out.push_str(&format!(
            "{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
            c.proportion,
            c.auc,
            c.precision.mean,
            c.precision.std,
            c.recall.mean,
            c.recall.std,
            c.mean_scan_seconds
        ));
        if individual {
            match c.individual_auc {
                Some(a) => out.push_str(&format!(",{a:?}")),
                None => out.push(','),
            }
        }
        out.push('\n');
    }
    out
}

pub fn save_eval_csv(report: &EvalReport, path: &Path) -> Result<()> {
    write_atomic(path, encode_eval_csv(report).as_bytes())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingRow {
    pub images: usize,
    pub scan_seconds: Summary,
    pub total_seconds: Summary,
    /// Scan score of every repetition, for determinism checks.
    pub scores: Vec<f64>,
}

/// Times the scan and the full file-to-report pipeline for each test-set
/// size, drawing test rows from `fake_pool`.
///
/// Scan time covers building the per-node null from the background, the
/// p-values, and the scan. Total time adds loading both matrices from CSV
/// and writing the report.
pub fn benchmark_runtime(
    sizes: &[usize],
    background: &ActivationMatrix,
    fake_pool: &ActivationMatrix,
    config: &ScanConfig,
    repetitions: usize,
) -> Result<Vec<TimingRow>> {
    if repetitions < 3 {
        return Err(Error::Precondition("benchmark needs at least 3 repetitions".into()));
    }
    if sizes.is_empty() || sizes.windows(2).any(|w| w[0] > w[1]) || sizes[0] == 0 {
        return Err(Error::Precondition("sizes must be non-empty, positive and ascending".into()));
    }
    if background.cols() != fake_pool.cols() {
        return Err(Error::Shape("background and fake pool must have the same columns".into()));
    }
    config.validate()?;
    let dir = tempfile::tempdir().map_err(|e| Error::io(std::env::temp_dir(), e))?;
    let bg_path = dir.path().join("background.csv");
    save_matrix(background, &bg_path, MatrixFormat::Csv)?;

    let mut table = Vec::with_capacity(sizes.len());
    for (si, &size) in sizes.iter().enumerate() {
        let mut scan_times = Vec::with_capacity(repetitions);
        let mut total_times = Vec::with_capacity(repetitions);
        let mut scores = Vec::with_capacity(repetitions);
        for rep in 0..repetitions {
            let mut rng = trial_rng(config.seed, si + 1, rep);
            let (test, _) = sample_test_set(fake_pool, fake_pool, 1.0, size, &mut rng)?;
            let test_path = dir.path().join(format!("test_{size}_{rep}.csv"));
            let out_path = dir.path().join(format!("result_{size}_{rep}.json"));
            save_matrix(&test, &test_path, MatrixFormat::Csv)?;

            let total_start = Instant::now();
            let bg = load_matrix(&bg_path, MatrixFormat::Csv)?;
            let test = load_matrix(&test_path, MatrixFormat::Csv)?;
            let scan_start = Instant::now();
            let pvals = BackgroundModel::new(&bg)?.pvalues(&test)?;
            let result = scan(&pvals, &config.with_mode(ScanMode::Group))?;
            scan_times.push(scan_start.elapsed().as_secs_f64());
            save_result(&result, &out_path)?;
            total_times.push(total_start.elapsed().as_secs_f64());
            scores.push(result.score);
        }
        table.push(TimingRow {
            images: size,
            scan_seconds: Summary::of(&scan_times),
            total_seconds: Summary::of(&total_times),
            scores,
        });
    }
    Ok(table)
}

pub fn encode_timing_csv(rows: &[TimingRow]) -> String {
    let mut out = String::from(
        "images,scan_seconds_mean,scan_seconds_std,total_seconds_mean,total_seconds_std\n",
    );
    for r in rows {
        out.push_str(&format!(
            "{},{:?},{:?},{:?},{:?}\n",
            r.images, r.scan_seconds.mean, r.scan_seconds.std, r.total_seconds.mean, r.total_seconds.std
        ));
    }
    out
}

pub fn save_timing_csv(rows: &[TimingRow], path: &Path) -> Result<()> {
    write_atomic(path, encode_timing_csv(rows).as_bytes())
}
