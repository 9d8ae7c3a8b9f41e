//! Split-sample significance tests for k-means clusters in panel data,
//! plus a Monte Carlo lab for studying their size and power.
//!
//! K-means applied to homogeneous data still produces separated-looking
//! clusters, so testing the fitted group differences on the same sample
//! rejects essentially always. The tests in this crate estimate the
//! assignments on one block of periods and test mean (or coefficient)
//! differences on a disjoint block, which restores standard chi-square
//! and normal asymptotics.
//!
//! Typical usage:
//!
//! ```
//! use cluster_sig::{f_test, KMeansOptions, Panel, SplitMode};
//!
//! let csv = "unit,period,y1\n\
//!            a,1,0.0\na,2,1.0\na,3,3.0\na,4,1.0\n\
//!            b,1,0.2\nb,2,0.8\nb,3,2.0\nb,4,2.0\n\
//!            c,1,9.8\nc,2,9.0\nc,3,5.0\nc,4,7.0\n\
//!            d,1,10.0\nd,2,9.4\nd,3,6.0\nd,4,6.0\n";
//! let panel = Panel::from_csv(csv.as_bytes()).unwrap();
//! let result = f_test(&panel, &SplitMode::Halves, 2, &KMeansOptions::default()).unwrap();
//! assert!(result.p_value < 0.05);
//! ```

pub mod cli;
pub mod error;
pub mod inference;
pub mod kmeans;
pub mod panel;
pub mod rng;
pub mod simlab;
pub mod statfun;

pub use error::{Error, Result};
pub use inference::{
    ar1_estimate, ar1_estimate_with, ar1_param_panel, bonferroni, f_test, finite_t_f_test,
    finite_t_test, full_contrast, hac_test, leading_contrast, no_split_test, param_test,
    small_cluster_test, t_test_two_groups, Ar1Fit, Ar1Variance, Df, Diagnostics, Method,
    ParamPanel, TestResult, VarianceEstimate,
};
pub use kmeans::{
    fit_clusters, fit_point_clusters, group_means_on, ClusterFit, KMeansOptions, PointSet,
};
pub use panel::{split_panel, Panel, PanelView, SplitMode, SplitSpec};
