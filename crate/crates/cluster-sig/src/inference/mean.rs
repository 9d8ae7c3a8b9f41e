//! Tests on group mean differences: the chi-square and t statistics, the
//! small-cluster and short-panel variants, and the serial-dependence-robust
//! version.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kmeans::{fit_clusters, group_means_on, ClusterFit, KMeansOptions};
use crate::panel::{split_panel, Panel, PanelView, SplitMode};
use crate::statfun::{chi2_sf, normal_sf};

use super::contrast::{full_contrast, leading_contrast};
use super::variance::{group_sum_residual_variance, iid_variance, spd_quadform, VarianceEstimate};
use super::{Df, Diagnostics, Method, TestResult};

/// Stacks a G x d mean matrix into the dG vector (mu_1', ..., mu_G')'.
fn stack_rows(m: &DMatrix<f64>) -> DVector<f64> {
    let d = m.ncols();
    DVector::from_fn(m.nrows() * d, |idx, _| m[(idx / d, idx % d)])
}

fn require_dim(panel: &Panel, method: &str) -> Result<()> {
    if panel.dim() != 1 {
        return Err(Error::InvalidConfig(format!(
            "the {method} test needs a one-dimensional panel, got d = {}",
            panel.dim()
        )));
    }
    Ok(())
}

fn fitted_split<'a>(
    panel: &'a Panel,
    mode: &SplitMode,
    g_alt: usize,
    opts: &KMeansOptions,
) -> Result<(PanelView<'a>, PanelView<'a>, ClusterFit)> {
    if g_alt < 2 {
        return Err(Error::NeedTwoGroups { g: g_alt });
    }
    let (view_r, view_p) = split_panel(panel, mode)?;
    let fit = fit_clusters(&view_r, g_alt, opts)?;
    Ok((view_r, view_p, fit))
}

/// Shared chi-square core: contrasts the testing-sample group means and
/// inverts the contrast-projected variance.
fn chi_square_core(
    method: Method,
    view_p: &PanelView<'_>,
    fit: ClusterFit,
    g_alt: usize,
) -> Result<TestResult> {
    let means_p = group_means_on(view_p, &fit.assignments, g_alt)?;
    let omega = iid_variance(view_p, &fit.assignments, &fit.proportions, g_alt)?;
    let d = view_p.dim();
    let a = full_contrast(d, g_alt)?;
    let np = (view_p.n_units() * view_p.n_periods()) as f64;
    let diff = &a * stack_rows(&means_p);
    let projected = &a * omega.assembled() * a.transpose();
    let statistic = np * spd_quadform(&diff, &projected)?;
    let df = d * (g_alt - 1);
    Ok(TestResult {
        method,
        statistic,
        df: Df::ChiSquared(df),
        p_value: chi2_sf(statistic, df)?,
        g_alt,
        g_effective: g_alt,
        diagnostics: Diagnostics {
            means_r: fit.means,
            means_p,
            proportions: fit.proportions,
            assignments: fit.assignments,
            variance: omega,
        },
    })
}

/// Chi-square test of equal group means across `g_alt` clusters estimated
/// on the R sample, evaluated on the P sample. Works for any outcome
/// dimension; the statistic is referred to chi-square with d(G - 1)
/// degrees of freedom.
pub fn f_test(
    panel: &Panel,
    mode: &SplitMode,
    g_alt: usize,
    opts: &KMeansOptions,
) -> Result<TestResult> {
    let (_view_r, view_p, fit) = fitted_split(panel, mode, g_alt, opts)?;
    chi_square_core(Method::FTest, &view_p, fit, g_alt)
}

/// The same statistic with clustering AND testing on the full sample.
/// Without the split the test rejects homogeneous data almost always;
/// this exists as a negative control, not as a usable test.
pub fn no_split_test(panel: &Panel, g_alt: usize, opts: &KMeansOptions) -> Result<TestResult> {
    if g_alt < 2 {
        return Err(Error::NeedTwoGroups { g: g_alt });
    }
    let view = panel.full_view();
    let fit = fit_clusters(&view, g_alt, opts)?;
    chi_square_core(Method::NoSplit, &view, fit, g_alt)
}

/// Two-group scalar t statistic; equals the square root of [`f_test`] with
/// the sign of the mean difference, and refers to the standard normal.
pub fn t_test_two_groups(panel: &Panel, mode: &SplitMode, opts: &KMeansOptions) -> Result<TestResult> {
    require_dim(panel, "t")?;
    let (_view_r, view_p, fit) = fitted_split(panel, mode, 2, opts)?;
    let means_p = group_means_on(&view_p, &fit.assignments, 2)?;
    let omega = iid_variance(&view_p, &fit.assignments, &fit.proportions, 2)?;
    let np = (view_p.n_units() * view_p.n_periods()) as f64;
    let statistic = np.sqrt() * (means_p[(0, 0)] - means_p[(1, 0)]) / omega.scalar_sum().sqrt();
    Ok(TestResult {
        method: Method::TTest,
        statistic,
        df: Df::Normal,
        p_value: 2.0 * normal_sf(statistic.abs()),
        g_alt: 2,
        g_effective: 2,
        diagnostics: Diagnostics {
            means_r: fit.means,
            means_p,
            proportions: fit.proportions,
            assignments: fit.assignments,
            variance: omega,
        },
    })
}

/// Mean test that contrasts only the clusters whose estimation-sample
/// share reaches `pi_bar` (inclusive). Tiny clusters inflate the inverse
/// squared shares in the variance and break the chi-square approximation;
/// dropping them from the contrast restores size. Groups arrive in
/// canonical descending-share order, so the kept ones are the leading
/// `g_effective` and the degrees of freedom shrink to g_effective - 1.
pub fn small_cluster_test(
    panel: &Panel,
    mode: &SplitMode,
    g_alt: usize,
    pi_bar: f64,
    opts: &KMeansOptions,
) -> Result<TestResult> {
    require_dim(panel, "small-cluster")?;
    if !(0.0..1.0).contains(&pi_bar) {
        return Err(Error::InvalidConfig(format!("pi_bar must lie in [0, 1), got {pi_bar}")));
    }
    let (_view_r, view_p, fit) = fitted_split(panel, mode, g_alt, opts)?;
    let g_eff = fit.proportions.iter().take_while(|&&p| p >= pi_bar).count();
    if g_eff < 2 {
        return Err(Error::TooFewLargeClusters { found: g_eff });
    }
    let means_p = group_means_on(&view_p, &fit.assignments, g_alt)?;
    let omega = iid_variance(&view_p, &fit.assignments, &fit.proportions, g_alt)?;
    let b = leading_contrast(g_eff, g_alt)?;
    let np = (view_p.n_units() * view_p.n_periods()) as f64;
    let diff = &b * stack_rows(&means_p);
    let projected = &b * omega.assembled() * b.transpose();
    let statistic = np * spd_quadform(&diff, &projected)?;
    let df = g_eff - 1;
    Ok(TestResult {
        method: Method::SmallCluster,
        statistic,
        df: Df::ChiSquared(df),
        p_value: chi2_sf(statistic, df)?,
        g_alt,
        g_effective: g_eff,
        diagnostics: Diagnostics {
            means_r: fit.means,
            means_p,
            proportions: fit.proportions,
            assignments: fit.assignments,
            variance: omega,
        },
    })
}

/// Two-group t test built for very short panels: residuals are taken
/// against the group mean rather than the unit mean and summed within
/// unit before squaring, which stays well-defined with a single testing
/// period and tolerates arbitrary within-unit dependence.
pub fn finite_t_test(panel: &Panel, mode: &SplitMode, opts: &KMeansOptions) -> Result<TestResult> {
    require_dim(panel, "finite-t")?;
    let (_view_r, view_p, fit) = fitted_split(panel, mode, 2, opts)?;
    let means_p = group_means_on(&view_p, &fit.assignments, 2)?;
    let omega =
        group_sum_residual_variance(&view_p, &fit.assignments, &means_p, &fit.proportions, 2)?;
    let omega2 = omega.scalar_sum();
    if !(omega2 > 0.0) {
        return Err(Error::NonPositiveVariance);
    }
    let np = (view_p.n_units() * view_p.n_periods()) as f64;
    let statistic = np.sqrt() * (means_p[(0, 0)] - means_p[(1, 0)]) / omega2.sqrt();
    Ok(TestResult {
        method: Method::FiniteT,
        statistic,
        df: Df::Normal,
        p_value: 2.0 * normal_sf(statistic.abs()),
        g_alt: 2,
        g_effective: 2,
        diagnostics: Diagnostics {
            means_r: fit.means,
            means_p,
            proportions: fit.proportions,
            assignments: fit.assignments,
            variance: omega,
        },
    })
}

/// Multi-group, multi-dimensional version of [`finite_t_test`]: the same
/// group-mean-residual variance blocks inside the chi-square contrast
/// form. This is the statistic used for short panels with d > 1 or more
/// than two groups (for example two-period empirical panels).
pub fn finite_t_f_test(
    panel: &Panel,
    mode: &SplitMode,
    g_alt: usize,
    opts: &KMeansOptions,
) -> Result<TestResult> {
    let (_view_r, view_p, fit) = fitted_split(panel, mode, g_alt, opts)?;
    let means_p = group_means_on(&view_p, &fit.assignments, g_alt)?;
    let omega =
        group_sum_residual_variance(&view_p, &fit.assignments, &means_p, &fit.proportions, g_alt)?;
    let d = view_p.dim();
    let a = full_contrast(d, g_alt)?;
    let np = (view_p.n_units() * view_p.n_periods()) as f64;
    let diff = &a * stack_rows(&means_p);
    let projected = &a * omega.assembled() * a.transpose();
    let statistic = np * spd_quadform(&diff, &projected)?;
    let df = d * (g_alt - 1);
    Ok(TestResult {
        method: Method::FiniteT,
        statistic,
        df: Df::ChiSquared(df),
        p_value: chi2_sf(statistic, df)?,
        g_alt,
        g_effective: g_alt,
        diagnostics: Diagnostics {
            means_r: fit.means,
            means_p,
            proportions: fit.proportions,
            assignments: fit.assignments,
            variance: omega,
        },
    })
}

/// Two-group t test robust to serial dependence up to `m_lags` periods.
///
/// The split is contiguous halves with the last `m_lags` periods of the
/// estimation half dropped, so the samples are at least m + 1 periods
/// apart; the variance uses per-unit autocovariances with triangular
/// weights (1 - k/P) truncated at lag m.
pub fn hac_test(panel: &Panel, m_lags: usize, opts: &KMeansOptions) -> Result<TestResult> {
    require_dim(panel, "hac")?;
    let t = panel.n_periods();
    let p_size = t - t / 2;
    if p_size <= m_lags {
        return Err(Error::InsufficientPSample { p: p_size, m: m_lags });
    }
    let (view_r, view_p) = split_panel(panel, &SplitMode::HalvesGap(m_lags))?;
    let fit = fit_clusters(&view_r, 2, opts)?;
    let means_p = group_means_on(&view_p, &fit.assignments, 2)?;

    let n = view_p.n_units();
    let p = view_p.n_periods();
    let unit_means = view_p.unit_means();
    let mut blocks = vec![DMatrix::<f64>::zeros(1, 1); 2];
    for (i, &g) in fit.assignments.iter().enumerate() {
        let resid: Vec<f64> = (0..p).map(|k| view_p.value(i, k, 0) - unit_means[(i, 0)]).collect();
        // Truncated-kernel long-run variance of unit i on the testing sample.
        let mut lrv = resid.iter().map(|e| e * e).sum::<f64>() / p as f64;
        for lag in 1..=m_lags {
            let mut acf = 0.0;
            for k in 0..p - lag {
                acf += resid[k] * resid[k + lag];
            }
            lrv += 2.0 * (1.0 - lag as f64 / p as f64) * acf / p as f64;
        }
        blocks[g][(0, 0)] += lrv / (n as f64 * fit.proportions[g] * fit.proportions[g]);
    }
    let omega = VarianceEstimate::new(blocks);
    let omega2 = omega.scalar_sum();
    if !(omega2 > 0.0) {
        return Err(Error::NonPositiveVariance);
    }
    let np = (n * p) as f64;
    let statistic = np.sqrt() * (means_p[(0, 0)] - means_p[(1, 0)]) / omega2.sqrt();
    Ok(TestResult {
        method: Method::Hac,
        statistic,
        df: Df::Normal,
        p_value: 2.0 * normal_sf(statistic.abs()),
        g_alt: 2,
        g_effective: 2,
        diagnostics: Diagnostics {
            means_r: fit.means,
            means_p,
            proportions: fit.proportions,
            assignments: fit.assignments,
            variance: omega,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;

    /// N=4, T=4 panel whose first half separates units {1,2} from {3,4}
    /// and whose second half holds the worked values (1,3),(2,2),(5,7),(6,6).
    fn worked_panel() -> Panel {
        Panel::from_values(
            4,
            4,
            1,
            vec![
                0.0, 0.0, 1.0, 3.0, //
                0.0, 0.0, 2.0, 2.0, //
                10.0, 10.0, 5.0, 7.0, //
                10.0, 10.0, 6.0, 6.0,
            ],
        )
        .unwrap()
    }

    #[test]
    fn worked_f_statistic() {
        let r = f_test(&worked_panel(), &SplitMode::Halves, 2, &KMeansOptions::default()).unwrap();
        assert!((r.statistic - 64.0).abs() < 1e-10, "F = {}", r.statistic);
        assert_eq!(r.df, Df::ChiSquared(1));
        assert!(r.p_value < 1e-14);
        assert_eq!(r.diagnostics.assignments, vec![0, 0, 1, 1]);
        assert!((r.diagnostics.means_p[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((r.diagnostics.means_p[(1, 0)] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn worked_t_statistic_and_f_identity() {
        let panel = worked_panel();
        let t = t_test_two_groups(&panel, &SplitMode::Halves, &KMeansOptions::default()).unwrap();
        assert!((t.statistic + 8.0).abs() < 1e-10, "t = {}", t.statistic);
        assert!(t.p_value < 1e-14);
        let f = f_test(&panel, &SplitMode::Halves, 2, &KMeansOptions::default()).unwrap();
        assert!((t.statistic * t.statistic - f.statistic).abs() < 1e-8);
    }

    #[test]
    fn equal_testing_means_give_zero_statistic() {
        let panel = Panel::from_values(
            4,
            4,
            1,
            vec![
                0.0, 0.0, 1.0, 3.0, //
                0.0, 0.0, 2.0, 2.0, //
                10.0, 10.0, 1.0, 3.0, //
                10.0, 10.0, 2.0, 2.0,
            ],
        )
        .unwrap();
        let r = f_test(&panel, &SplitMode::Halves, 2, &KMeansOptions::default()).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        let t = t_test_two_groups(&panel, &SplitMode::Halves, &KMeansOptions::default()).unwrap();
        assert_eq!(t.statistic, 0.0);
        assert_eq!(t.p_value, 1.0);
    }

    #[test]
    fn f_and_t_agree_on_random_panels() {
        let mut rng = crate::rng::stream(&[2024]);
        for trial in 0..20 {
            let n = 6 + (trial % 4);
            let t = 6;
            let values: Vec<f64> = (0..n * t).map(|_| rng.gen::<f64>() * 3.0).collect();
            let panel = Panel::from_values(n, t, 1, values).unwrap();
            let opts = KMeansOptions { restarts: 10, seed: trial as u64, ..Default::default() };
            let f = f_test(&panel, &SplitMode::Halves, 2, &opts).unwrap();
            let tt = t_test_two_groups(&panel, &SplitMode::Halves, &opts).unwrap();
            assert!(
                (tt.statistic * tt.statistic - f.statistic).abs() < 1e-8,
                "trial {trial}: t^2 = {} vs F = {}",
                tt.statistic * tt.statistic,
                f.statistic
            );
            // Two-sided normal and chi-square(1) p-values agree.
            assert!((tt.p_value - f.p_value).abs() < 1e-9);
        }
    }

    #[test]
    fn small_cluster_keeps_leading_groups() {
        // 10 units: R-sample means put 5 near 0, 4 near 10, 1 near 30.
        let mut values = Vec::new();
        let r_centers = [0.0, 0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0, 30.0];
        let p_values: [[f64; 2]; 10] = [
            [1.0, 3.0],
            [2.0, 2.0],
            [1.5, 2.5],
            [2.5, 1.5],
            [2.0, 4.0],
            [5.0, 7.0],
            [6.0, 6.0],
            [5.5, 6.5],
            [6.5, 5.5],
            [20.0, 22.0],
        ];
        for i in 0..10 {
            values.extend_from_slice(&[
                r_centers[i] + (i as f64) * 0.01,
                r_centers[i] - (i as f64) * 0.01,
                p_values[i][0],
                p_values[i][1],
            ]);
        }
        let panel = Panel::from_values(10, 4, 1, values).unwrap();
        let opts = KMeansOptions { restarts: 20, ..Default::default() };

        // All shares >= 0.1: identical to the full contrast with 3 groups.
        let small = small_cluster_test(&panel, &SplitMode::Halves, 3, 0.1, &opts).unwrap();
        assert_eq!(small.g_effective, 3);
        assert_eq!(small.df, Df::ChiSquared(2));
        let f = f_test(&panel, &SplitMode::Halves, 3, &opts).unwrap();
        assert!((small.p_value - f.p_value).abs() < 1e-10);
        assert!((small.statistic - f.statistic).abs() < 1e-8);

        // Threshold above the singleton's share: it drops from the contrast.
        let trimmed = small_cluster_test(&panel, &SplitMode::Halves, 3, 0.2, &opts).unwrap();
        assert_eq!(trimmed.g_effective, 2);
        assert_eq!(trimmed.df, Df::ChiSquared(1));
        assert_eq!(trimmed.g_alt, 3);

        // Threshold above all but one share: nothing left to contrast.
        assert!(matches!(
            small_cluster_test(&panel, &SplitMode::Halves, 3, 0.45, &opts),
            Err(Error::TooFewLargeClusters { found: 1 })
        ));
    }

    #[test]
    fn finite_t_worked_example() {
        let panel =
            Panel::from_values(4, 2, 1, vec![0.0, -1.0, 0.0, 1.0, 10.0, 9.0, 10.0, 11.0]).unwrap();
        let r = finite_t_test(&panel, &SplitMode::Halves, &KMeansOptions::default()).unwrap();
        assert!((r.statistic + 10.0).abs() < 1e-10, "t = {}", r.statistic);
        assert_eq!(r.df, Df::Normal);

        // A perfect two-group fit leaves no residual variance.
        let exact =
            Panel::from_values(4, 2, 1, vec![0.0, 0.0, 0.0, 0.0, 10.0, 10.0, 10.0, 10.0]).unwrap();
        assert!(matches!(
            finite_t_test(&exact, &SplitMode::Halves, &KMeansOptions::default()),
            Err(Error::NonPositiveVariance)
        ));
    }

    #[test]
    fn finite_t_f_reduces_to_t_squared() {
        let mut rng = crate::rng::stream(&[31]);
        for trial in 0..10 {
            let n = 8;
            let t = 4;
            let values: Vec<f64> = (0..n * t).map(|_| rng.gen::<f64>() * 2.0).collect();
            let panel = Panel::from_values(n, t, 1, values).unwrap();
            let opts = KMeansOptions { restarts: 8, seed: trial, ..Default::default() };
            let tt = finite_t_test(&panel, &SplitMode::Halves, &opts).unwrap();
            let ff = finite_t_f_test(&panel, &SplitMode::Halves, 2, &opts).unwrap();
            assert!((tt.statistic * tt.statistic - ff.statistic).abs() < 1e-8);
            assert!((tt.p_value - ff.p_value).abs() < 1e-9);
        }
    }

    #[test]
    fn hac_with_zero_lags_equals_plain_t() {
        let mut rng = crate::rng::stream(&[77]);
        for trial in 0..10 {
            let n = 10;
            let t = 8;
            let values: Vec<f64> = (0..n * t).map(|_| rng.gen::<f64>()).collect();
            let panel = Panel::from_values(n, t, 1, values).unwrap();
            let opts = KMeansOptions { restarts: 8, seed: trial, ..Default::default() };
            let h = hac_test(&panel, 0, &opts).unwrap();
            let tt = t_test_two_groups(&panel, &SplitMode::Halves, &opts).unwrap();
            assert!(
                (h.statistic - tt.statistic).abs() < 1e-10,
                "trial {trial}: {} vs {}",
                h.statistic,
                tt.statistic
            );
        }
    }

    #[test]
    fn hac_needs_enough_testing_periods() {
        let panel = Panel::from_values(4, 4, 1, (0..16).map(f64::from).collect()).unwrap();
        assert!(matches!(
            hac_test(&panel, 2, &KMeansOptions::default()),
            Err(Error::InsufficientPSample { p: 2, m: 2 })
        ));
    }

    #[test]
    fn no_split_flags_method() {
        let r = no_split_test(&worked_panel(), 2, &KMeansOptions::default()).unwrap();
        assert_eq!(r.method, Method::NoSplit);
        // True separation: rejects decisively.
        assert!(r.p_value < 0.01);
    }

    #[test]
    fn dimension_guards() {
        let panel = Panel::from_values(3, 4, 2, (0..24).map(f64::from).collect()).unwrap();
        assert!(matches!(
            t_test_two_groups(&panel, &SplitMode::Halves, &KMeansOptions::default()),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            small_cluster_test(&panel, &SplitMode::Halves, 2, 0.1, &KMeansOptions::default()),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            hac_test(&panel, 0, &KMeansOptions::default()),
            Err(Error::InvalidConfig(_))
        ));
        assert!(matches!(
            f_test(&panel, &SplitMode::Halves, 1, &KMeansOptions::default()),
            Err(Error::NeedTwoGroups { g: 1 })
        ));
    }
}
