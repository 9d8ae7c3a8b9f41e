//! Clustering and testing on per-unit regression coefficients.
//!
//! Instead of clustering outcome means, each unit contributes a coefficient
//! vector estimated separately on the two subsamples, plus a variance
//! estimate for the testing-sample coefficients. The chi-square statistic
//! then contrasts group mean coefficients exactly as the mean test does.
//!
//! Scaling convention: `variances_p` holds the variance of the
//! sqrt(p_scale)-normalized estimator, where `p_scale` is the effective
//! per-unit sample size of the testing-sample regression. The statistic
//! multiplies the quadratic form by N * p_scale, which cancels the
//! normalization; the two-group scalar case collapses to an exact
//! two-sample z test, and tests assert that identity.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::kmeans::{fit_point_clusters, KMeansOptions, PointSet};
use crate::panel::{split_panel, Panel, SplitMode};
use crate::statfun::chi2_sf;

use super::contrast::full_contrast;
use super::variance::{param_variance, spd_quadform};
use super::{Df, Diagnostics, Method, TestResult};

/// Per-unit coefficient estimates on both subsamples.
#[derive(Debug, Clone)]
pub struct ParamPanel {
    estimates_r: DMatrix<f64>,
    estimates_p: DMatrix<f64>,
    variances_p: Vec<DMatrix<f64>>,
    p_scale: f64,
}

impl ParamPanel {
    /// `estimates_r` / `estimates_p`: N x b coefficient matrices from the
    /// two subsamples. `variances_p[i]`: b x b variance of the
    /// sqrt(`p_scale`)-scaled testing-sample estimator for unit i.
    pub fn new(
        estimates_r: DMatrix<f64>,
        estimates_p: DMatrix<f64>,
        variances_p: Vec<DMatrix<f64>>,
        p_scale: f64,
    ) -> Result<Self> {
        let n = estimates_r.nrows();
        let b = estimates_r.ncols();
        if n < 2 {
            return Err(Error::InsufficientUnits { n, need: 2 });
        }
        if b == 0 {
            return Err(Error::DomainError("coefficient dimension must be >= 1".into()));
        }
        if estimates_p.nrows() != n || estimates_p.ncols() != b {
            return Err(Error::DomainError("estimate matrices must have matching shape".into()));
        }
        if variances_p.len() != n {
            return Err(Error::DomainError("one variance matrix per unit is required".into()));
        }
        if !(p_scale > 0.0) || !p_scale.is_finite() {
            return Err(Error::DomainError(format!("p_scale must be positive, got {p_scale}")));
        }
        if estimates_r.iter().chain(estimates_p.iter()).any(|v| !v.is_finite()) {
            return Err(Error::DomainError("coefficient estimates must be finite".into()));
        }
        for (i, v) in variances_p.iter().enumerate() {
            if v.nrows() != b || v.ncols() != b {
                return Err(Error::DomainError(format!("variance matrix {i} has wrong shape")));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::DomainError(format!("variance matrix {i} is not finite")));
            }
            if (v - v.transpose()).amax() > 1e-8 * (1.0 + v.amax()) {
                return Err(Error::DomainError(format!("variance matrix {i} is not symmetric")));
            }
        }
        Ok(ParamPanel { estimates_r, estimates_p, variances_p, p_scale })
    }

    pub fn n_units(&self) -> usize {
        self.estimates_r.nrows()
    }

    pub fn n_coefficients(&self) -> usize {
        self.estimates_r.ncols()
    }

    pub fn estimates_r(&self) -> &DMatrix<f64> {
        &self.estimates_r
    }

    pub fn estimates_p(&self) -> &DMatrix<f64> {
        &self.estimates_p
    }

    pub fn variances_p(&self) -> &[DMatrix<f64>] {
        &self.variances_p
    }

    pub fn p_scale(&self) -> f64 {
        self.p_scale
    }
}

/// Chi-square test of equal group coefficients: clusters the R-sample
/// estimates, averages the P-sample estimates within groups, and contrasts.
pub fn param_test(params: &ParamPanel, g_alt: usize, opts: &KMeansOptions) -> Result<TestResult> {
    if g_alt < 2 {
        return Err(Error::NeedTwoGroups { g: g_alt });
    }
    let n = params.n_units();
    let b = params.n_coefficients();
    let points = PointSet::from_matrix(params.estimates_r.clone())?;
    let fit = fit_point_clusters(&points, g_alt, opts)?;

    let mut alpha = DMatrix::<f64>::zeros(g_alt, b);
    let mut counts = vec![0usize; g_alt];
    for (i, &g) in fit.assignments.iter().enumerate() {
        counts[g] += 1;
        for j in 0..b {
            alpha[(g, j)] += params.estimates_p[(i, j)];
        }
    }
    for g in 0..g_alt {
        if counts[g] == 0 {
            return Err(Error::EmptyGroupInP { group: g + 1 });
        }
        for j in 0..b {
            alpha[(g, j)] /= counts[g] as f64;
        }
    }

    let omega = param_variance(&params.variances_p, &fit.assignments, &fit.proportions, g_alt)?;
    let a = full_contrast(b, g_alt)?;
    let diff = &a * DVector::from_fn(g_alt * b, |idx, _| alpha[(idx / b, idx % b)]);
    let projected = &a * omega.assembled() * a.transpose();
    let statistic = n as f64 * params.p_scale * spd_quadform(&diff, &projected)?;
    let df = b * (g_alt - 1);
    Ok(TestResult {
        method: Method::ParamTest,
        statistic,
        df: Df::ChiSquared(df),
        p_value: chi2_sf(statistic, df)?,
        g_alt,
        g_effective: g_alt,
        diagnostics: Diagnostics {
            means_r: fit.means,
            means_p: alpha,
            proportions: fit.proportions,
            assignments: fit.assignments,
            variance: omega,
        },
    })
}

/// Which slope variance estimate the AR(1) regression reports.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Ar1Variance {
    /// Homoskedastic OLS variance (the default).
    Classical,
    /// Heteroskedasticity-robust (HC1) variance.
    Robust,
}

/// OLS fit of a first-order autoregression on one series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Ar1Fit {
    pub intercept: f64,
    pub slope: f64,
    /// Variance of the sqrt(T - 1)-scaled slope estimator, where T - 1 is
    /// the number of lagged pairs the regression uses.
    pub v_hat: f64,
}

/// Regresses Y_t on (1, Y_{t-1}) over t = 2..T with the classical slope
/// variance. An exactly fitting regression (possible with T = 3) reports
/// v_hat = 0, which downstream tests reject as degenerate.
pub fn ar1_estimate(series: &[f64]) -> Result<Ar1Fit> {
    ar1_estimate_with(series, Ar1Variance::Classical)
}

pub fn ar1_estimate_with(series: &[f64], variance: Ar1Variance) -> Result<Ar1Fit> {
    let t = series.len();
    if t < 3 {
        return Err(Error::PanelTooShort { t, need: 3 });
    }
    if series.iter().any(|v| !v.is_finite()) {
        return Err(Error::DomainError("series contains a non-finite value".into()));
    }
    let n = t - 1;
    let x = &series[..t - 1];
    let y = &series[1..];
    let x_bar = x.iter().sum::<f64>() / n as f64;
    let y_bar = y.iter().sum::<f64>() / n as f64;
    let mut ssx = 0.0;
    let mut sxy = 0.0;
    for k in 0..n {
        let dx = x[k] - x_bar;
        ssx += dx * dx;
        sxy += dx * (y[k] - y_bar);
    }
    if !(ssx > 0.0) {
        return Err(Error::DegenerateRegressor);
    }
    let slope = sxy / ssx;
    let intercept = y_bar - slope * x_bar;
    let mut sse = 0.0;
    let mut weighted_sse = 0.0;
    for k in 0..n {
        let e = y[k] - intercept - slope * x[k];
        sse += e * e;
        let dx = x[k] - x_bar;
        weighted_sse += dx * dx * e * e;
    }
    // With n = 2 pairs the regression fits exactly and the residual
    // degrees of freedom are zero; report a zero variance.
    let v_hat = if n == 2 || sse == 0.0 {
        0.0
    } else {
        match variance {
            Ar1Variance::Classical => n as f64 * (sse / (n - 2) as f64) / ssx,
            Ar1Variance::Robust => {
                n as f64 * (n as f64 / (n - 2) as f64) * weighted_sse / (ssx * ssx)
            }
        }
    };
    Ok(Ar1Fit { intercept, slope, v_hat })
}

/// Builds a [`ParamPanel`] of per-unit AR(1) slopes from a panel: the
/// autoregression runs separately on each unit's R-sample and P-sample
/// series, so no lag crosses the boundary between the samples. Both
/// samples therefore need at least three contiguous periods.
pub fn ar1_param_panel(
    panel: &Panel,
    mode: &SplitMode,
    variance: Ar1Variance,
) -> Result<ParamPanel> {
    if panel.dim() != 1 {
        return Err(Error::InvalidConfig(format!(
            "AR(1) clustering needs a one-dimensional panel, got d = {}",
            panel.dim()
        )));
    }
    let (view_r, view_p) = split_panel(panel, mode)?;
    for view in [&view_r, &view_p] {
        if view.positions().windows(2).any(|w| w[1] != w[0] + 1) {
            return Err(Error::InvalidSplit(
                "autoregression needs contiguous periods in each sample".into(),
            ));
        }
        if view.n_periods() < 3 {
            return Err(Error::PanelTooShort { t: view.n_periods(), need: 3 });
        }
    }
    let n = panel.n_units();
    let mut estimates_r = DMatrix::<f64>::zeros(n, 1);
    let mut estimates_p = DMatrix::<f64>::zeros(n, 1);
    let mut variances_p = Vec::with_capacity(n);
    for i in 0..n {
        let series_r: Vec<f64> = (0..view_r.n_periods()).map(|k| view_r.value(i, k, 0)).collect();
        let series_p: Vec<f64> = (0..view_p.n_periods()).map(|k| view_p.value(i, k, 0)).collect();
        let fit_r = ar1_estimate_with(&series_r, variance)?;
        let fit_p = ar1_estimate_with(&series_p, variance)?;
        estimates_r[(i, 0)] = fit_r.slope;
        estimates_p[(i, 0)] = fit_p.slope;
        variances_p.push(DMatrix::from_element(1, 1, fit_p.v_hat));
    }
    let p_scale = (view_p.n_periods() - 1) as f64;
    ParamPanel::new(estimates_r, estimates_p, variances_p, p_scale)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn ar1_on_a_line_is_exact() {
        let fit = ar1_estimate(&[1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        assert!((fit.intercept - 1.0).abs() < 1e-12);
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert_eq!(fit.v_hat, 0.0);
    }

    #[test]
    fn ar1_rejects_constant_series() {
        assert!(matches!(
            ar1_estimate(&[2.0, 2.0, 2.0, 2.0]),
            Err(Error::DegenerateRegressor)
        ));
        assert!(matches!(ar1_estimate(&[1.0, 2.0]), Err(Error::PanelTooShort { t: 2, need: 3 })));
    }

    #[test]
    fn ar1_slope_near_zero_on_white_noise() {
        let mut rng = crate::rng::stream(&[404]);
        let series: Vec<f64> = (0..1000).map(|_| StandardNormal.sample(&mut rng)).collect();
        let fit = ar1_estimate(&series).unwrap();
        assert!(fit.slope.abs() < 0.1, "slope = {}", fit.slope);
        assert!(fit.v_hat > 0.0);
        // Robust variance is finite and the same order of magnitude.
        let robust = ar1_estimate_with(&series, Ar1Variance::Robust).unwrap();
        assert!(robust.v_hat > 0.2 * fit.v_hat && robust.v_hat < 5.0 * fit.v_hat);
    }

    #[test]
    fn param_test_matches_two_sample_z_oracle() {
        // Two well-separated slope groups with heterogeneous variances;
        // the statistic must equal the squared two-sample z exactly.
        let mut rng = crate::rng::stream(&[808]);
        let n = 12;
        let mut est_r = DMatrix::<f64>::zeros(n, 1);
        let mut est_p = DMatrix::<f64>::zeros(n, 1);
        let mut vars = Vec::new();
        for i in 0..n {
            let center = if i < 5 { 0.2 } else { 0.8 };
            est_r[(i, 0)] = center + 0.02 * rng.gen::<f64>();
            est_p[(i, 0)] = center + 0.05 * rng.gen::<f64>();
            vars.push(DMatrix::from_element(1, 1, 0.5 + rng.gen::<f64>()));
        }
        let p_scale = 249.0;
        let params = ParamPanel::new(est_r.clone(), est_p.clone(), vars.clone(), p_scale).unwrap();
        let opts = KMeansOptions { restarts: 10, ..Default::default() };
        let result = param_test(&params, 2, &opts).unwrap();

        // Groups are canonical: larger group (7 units, indices 5..12) first.
        let groups: Vec<Vec<usize>> =
            vec![(5..12).collect::<Vec<_>>(), (0..5).collect::<Vec<_>>()];
        assert_eq!(result.diagnostics.assignments[0], 1);
        assert_eq!(result.diagnostics.assignments[5], 0);
        let mut means = [0.0; 2];
        let mut var_means = [0.0; 2];
        for (g, members) in groups.iter().enumerate() {
            let m = members.len() as f64;
            means[g] = members.iter().map(|&i| est_p[(i, 0)]).sum::<f64>() / m;
            // Var of the group average of estimators with Var = vhat/p_scale.
            var_means[g] =
                members.iter().map(|&i| vars[i][(0, 0)]).sum::<f64>() / (m * m * p_scale);
        }
        let z = (means[0] - means[1]) / (var_means[0] + var_means[1]).sqrt();
        assert!(
            (result.statistic - z * z).abs() < 1e-10 * z * z,
            "F = {} vs z^2 = {}",
            result.statistic,
            z * z
        );
    }

    #[test]
    fn identical_estimates_give_zero_statistic() {
        let est_r = DMatrix::from_column_slice(4, 1, &[0.0, 0.0, 1.0, 1.0]);
        let est_p = DMatrix::from_element(4, 1, 0.5);
        let vars = vec![DMatrix::from_element(1, 1, 1.0); 4];
        let params = ParamPanel::new(est_r, est_p, vars, 100.0).unwrap();
        let r = param_test(&params, 2, &KMeansOptions::default()).unwrap();
        assert_eq!(r.statistic, 0.0);
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.df, Df::ChiSquared(1));
    }

    #[test]
    fn ar1_panel_pipeline_separates_slope_groups() {
        // 8 units, half with slope 0.2 and half with 0.9, long series.
        let mut rng = crate::rng::stream(&[909]);
        let n = 8;
        let t = 400;
        let mut values = Vec::with_capacity(n * t);
        for i in 0..n {
            let phi: f64 = if i < 4 { 0.2 } else { 0.9 };
            let sd0 = (1.0 / (1.0 - phi * phi)).sqrt();
            let e0: f64 = StandardNormal.sample(&mut rng);
            let mut y = sd0 * e0;
            for _ in 0..t {
                values.push(y);
                let e: f64 = StandardNormal.sample(&mut rng);
                y = phi * y + e;
            }
        }
        let panel = Panel::from_values(n, t, 1, values).unwrap();
        let params = ar1_param_panel(&panel, &SplitMode::Halves, Ar1Variance::Classical).unwrap();
        assert_eq!(params.p_scale(), 199.0);
        for i in 0..n {
            let target = if i < 4 { 0.2 } else { 0.9 };
            assert!(
                (params.estimates_r()[(i, 0)] - target).abs() < 0.25,
                "unit {i}: {}",
                params.estimates_r()[(i, 0)]
            );
        }
        let r = param_test(&params, 2, &KMeansOptions { restarts: 10, ..Default::default() })
            .unwrap();
        assert!(r.p_value < 1e-6, "p = {}", r.p_value);

        // Interleaved periods cannot feed an autoregression.
        assert!(matches!(
            ar1_param_panel(&panel, &SplitMode::Interleaved, Ar1Variance::Classical),
            Err(Error::InvalidSplit(_))
        ));
    }
}
