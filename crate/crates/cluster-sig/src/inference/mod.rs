//! Split-sample significance tests for k-means cluster structure.
//!
//! Every test here follows the same discipline: cluster assignments are
//! estimated on one subsample of periods (R), and group differences are
//! measured and tested on a disjoint subsample (P). Estimating and testing
//! on the same observations makes k-means toy separation look like real
//! heterogeneity; the split is what restores valid size, and the no-split
//! variant is kept only as a negative control.
//!
//! Tests:
//! - [`f_test`]: chi-square test on mean differences, any dimension.
//! - [`t_test_two_groups`]: the two-group scalar special case.
//! - [`small_cluster_test`]: contrasts only groups with shares above a
//!   threshold, fixing the degenerate-variance problem of tiny clusters.
//! - [`finite_t_test`] / [`finite_t_f_test`]: valid with as little as one
//!   testing period, using group-mean residuals.
//! - [`hac_test`]: serial-dependence-robust variant with a gap between the
//!   samples and a truncated autocovariance kernel.
//! - [`param_test`]: clusters per-unit regression coefficients instead of
//!   outcome means (with an AR(1) front end in [`ar1_param_panel`]).
//! - [`no_split_test`]: the overfitting demonstration.
//! - [`bonferroni`]: combines p-values across candidate group counts.

mod contrast;
mod mean;
mod param;
mod variance;

pub use contrast::{full_contrast, leading_contrast};
pub use mean::{
    f_test, finite_t_f_test, finite_t_test, hac_test, no_split_test, small_cluster_test,
    t_test_two_groups,
};
pub use param::{
    ar1_estimate, ar1_estimate_with, ar1_param_panel, param_test, Ar1Fit, Ar1Variance, ParamPanel,
};
pub use variance::{spd_quadform, VarianceEstimate};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Which test produced a result.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    FTest,
    TTest,
    ParamTest,
    SmallCluster,
    FiniteT,
    Hac,
    NoSplit,
}

impl Method {
    pub fn as_str(&self) -> &'static str {
        match self {
            Method::FTest => "f",
            Method::TTest => "t",
            Method::ParamTest => "param",
            Method::SmallCluster => "small-cluster",
            Method::FiniteT => "finite-t",
            Method::Hac => "hac",
            Method::NoSplit => "no-split",
        }
    }
}

impl std::fmt::Display for Method {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Reference distribution of a statistic.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Df {
    /// Chi-square with the given degrees of freedom.
    ChiSquared(usize),
    /// Standard normal (two-sided t statistics).
    Normal,
}

impl std::fmt::Display for Df {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Df::ChiSquared(k) => write!(f, "chi2({k})"),
            Df::Normal => f.write_str("normal"),
        }
    }
}

/// Everything worth reporting alongside a statistic.
#[derive(Debug, Clone)]
pub struct Diagnostics {
    /// Fitted group centers on the estimation sample (one row per group).
    pub means_r: DMatrix<f64>,
    /// Group means recomputed on the testing sample.
    pub means_p: DMatrix<f64>,
    /// Estimation-sample group shares.
    pub proportions: Vec<f64>,
    /// Group of each unit, 0-based, canonical order.
    pub assignments: Vec<usize>,
    /// The variance blocks behind the statistic.
    pub variance: VarianceEstimate,
}

/// Outcome of one significance test.
#[derive(Debug, Clone)]
pub struct TestResult {
    pub method: Method,
    pub statistic: f64,
    pub df: Df,
    pub p_value: f64,
    /// The alternative's group count the caller asked for.
    pub g_alt: usize,
    /// Groups actually contrasted (differs from `g_alt` only when the
    /// small-cluster test drops negligible groups).
    pub g_effective: usize,
    pub diagnostics: Diagnostics,
}

/// Combines p-values gathered over candidate group counts 2..=G into one
/// union-bound p-value: min(1, len * min(p)).
pub fn bonferroni(p_values: &[f64]) -> Result<f64> {
    if p_values.is_empty() {
        return Err(Error::DomainError("no p-values to combine".into()));
    }
    let mut min_p = f64::INFINITY;
    for &p in p_values {
        if !(0.0..=1.0).contains(&p) {
            return Err(Error::InvalidPValue(p));
        }
        min_p = min_p.min(p);
    }
    Ok((p_values.len() as f64 * min_p).min(1.0))
}
