//! Subset scanning of neural-network activations with non-parametric scan
//! statistics.
//!
//! The pipeline turns a test activation matrix into empirical p-values
//! against background activations ([`pvalues`]), scores subsets of those
//! p-values with Berk-Jones or Higher-Criticism ([`score`]), and searches
//! for the highest-scoring block of samples × nodes by iterative ascent
//! ([`scan`]) over exact per-axis optimizations ([`ltss`]).

pub mod error;
pub mod eval;
pub mod io;
pub mod ltss;
pub mod matrix;
pub mod pvalues;
pub mod scan;
pub mod score;
pub mod synth;

pub use error::{Error, Result};
pub use matrix::{ActivationMatrix, LabelVector};
pub use pvalues::{compute_pvalues, negate_for_lower_tail, BackgroundModel, PValueMatrix};
pub use scan::{individual_scan, scan, single_restart, ScanConfig, ScanMode, ScanResult};
pub use score::{phi_bj, phi_hc, score_subset, AlphaGrid, AlphaPolicy, ScoreFunction, SubsetScore};
