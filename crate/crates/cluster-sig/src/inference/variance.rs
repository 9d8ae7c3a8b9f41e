//! Group-wise asymptotic variance estimators and the positive-definite
//! quadratic form shared by all chi-square statistics.
//!
//! All estimators here produce one d x d block per group, weighted by the
//! inverse squared group share from the estimation sample. The block for
//! group g only involves units assigned to g, so the assembled matrix is
//! exactly block-diagonal.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::panel::PanelView;

/// A block-diagonal variance estimate: one block per group.
#[derive(Debug, Clone, PartialEq)]
pub struct VarianceEstimate {
    blocks: Vec<DMatrix<f64>>,
    dim: usize,
}

impl VarianceEstimate {
    pub fn new(blocks: Vec<DMatrix<f64>>) -> Self {
        let dim = blocks.first().map_or(0, |b| b.nrows());
        debug_assert!(blocks.iter().all(|b| b.nrows() == dim && b.ncols() == dim));
        VarianceEstimate { blocks, dim }
    }

    pub fn n_groups(&self) -> usize {
        self.blocks.len()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn blocks(&self) -> &[DMatrix<f64>] {
        &self.blocks
    }

    pub fn block(&self, g: usize) -> &DMatrix<f64> {
        &self.blocks[g]
    }

    /// The full dG x dG block-diagonal matrix, zeros off the blocks.
    pub fn assembled(&self) -> DMatrix<f64> {
        let d = self.dim;
        let g = self.blocks.len();
        let mut m = DMatrix::zeros(d * g, d * g);
        for (k, b) in self.blocks.iter().enumerate() {
            m.view_mut((k * d, k * d), (d, d)).copy_from(b);
        }
        m
    }

    /// For d = 1, the sum of the per-group scalars.
    pub fn scalar_sum(&self) -> f64 {
        debug_assert_eq!(self.dim, 1);
        self.blocks.iter().map(|b| b[(0, 0)]).sum()
    }
}

fn check_groups(
    assignments: &[usize],
    proportions: &[f64],
    n_groups: usize,
    n_units: usize,
) -> Result<Vec<usize>> {
    if assignments.len() != n_units {
        return Err(Error::DomainError(format!(
            "{} assignments for {} units",
            assignments.len(),
            n_units
        )));
    }
    if proportions.len() != n_groups {
        return Err(Error::DomainError(format!(
            "{} proportions for {} groups",
            proportions.len(),
            n_groups
        )));
    }
    let mut counts = vec![0usize; n_groups];
    for &g in assignments {
        if g >= n_groups {
            return Err(Error::DomainError(format!("assignment {g} outside 0..{n_groups}")));
        }
        counts[g] += 1;
    }
    for g in 0..n_groups {
        if counts[g] == 0 || !(proportions[g] > 0.0) {
            return Err(Error::EmptyGroupInP { group: g + 1 });
        }
    }
    Ok(counts)
}

/// Variance blocks under within-unit independence:
///
/// ```text
/// block_g = (1/NP) sum_{t in P} sum_i (Y_it - Ybar_iP)(Y_it - Ybar_iP)'
///           / pihat_g^2, over units with gamma_i = g
/// ```
///
/// Residuals are per-unit demeaned over the view, so the view needs at
/// least two periods.
pub fn iid_variance(
    view_p: &PanelView<'_>,
    assignments: &[usize],
    proportions: &[f64],
    n_groups: usize,
) -> Result<VarianceEstimate> {
    let n = view_p.n_units();
    let p = view_p.n_periods();
    let d = view_p.dim();
    if p < 2 {
        return Err(Error::PanelTooShort { t: p, need: 2 });
    }
    check_groups(assignments, proportions, n_groups, n)?;
    let unit_means = view_p.unit_means();
    let mut blocks = vec![DMatrix::<f64>::zeros(d, d); n_groups];
    let mut resid = DVector::<f64>::zeros(d);
    for (i, &g) in assignments.iter().enumerate() {
        for k in 0..p {
            for j in 0..d {
                resid[j] = view_p.value(i, k, j) - unit_means[(i, j)];
            }
            // resid * resid' accumulated into the group's block.
            for a in 0..d {
                for b in 0..d {
                    blocks[g][(a, b)] += resid[a] * resid[b];
                }
            }
        }
    }
    let scale = 1.0 / (n * p) as f64;
    for g in 0..n_groups {
        let w = scale / (proportions[g] * proportions[g]);
        blocks[g] *= w;
        if blocks[g].trace() <= 0.0 {
            return Err(Error::SingularVariance { group: g + 1 });
        }
    }
    Ok(VarianceEstimate::new(blocks))
}

/// Variance blocks from group-mean residuals summed within unit:
///
/// ```text
/// s_i = sum_{t in P} (Y_it - mu_tilde_{gamma_i}),
/// block_g = (1/NP) sum_i s_i s_i' / pihat_g^2, over gamma_i = g
/// ```
///
/// Demeaning by the group mean instead of the unit mean keeps the estimate
/// meaningful with a single testing period, and summing within unit before
/// the outer product absorbs arbitrary within-unit serial dependence.
pub fn group_sum_residual_variance(
    view_p: &PanelView<'_>,
    assignments: &[usize],
    group_means: &DMatrix<f64>,
    proportions: &[f64],
    n_groups: usize,
) -> Result<VarianceEstimate> {
    let n = view_p.n_units();
    let p = view_p.n_periods();
    let d = view_p.dim();
    check_groups(assignments, proportions, n_groups, n)?;
    if group_means.nrows() != n_groups || group_means.ncols() != d {
        return Err(Error::DomainError("group mean matrix has wrong shape".into()));
    }
    let mut blocks = vec![DMatrix::<f64>::zeros(d, d); n_groups];
    let mut s = DVector::<f64>::zeros(d);
    for (i, &g) in assignments.iter().enumerate() {
        for j in 0..d {
            let mut acc = 0.0;
            for k in 0..p {
                acc += view_p.value(i, k, j) - group_means[(g, j)];
            }
            s[j] = acc;
        }
        for a in 0..d {
            for b in 0..d {
                blocks[g][(a, b)] += s[a] * s[b];
            }
        }
    }
    let scale = 1.0 / (n * p) as f64;
    for g in 0..n_groups {
        let w = scale / (proportions[g] * proportions[g]);
        blocks[g] *= w;
    }
    Ok(VarianceEstimate::new(blocks))
}

/// Variance blocks for clustered parameter estimates: the average of the
/// per-unit variance matrices within each group, share-weighted:
///
/// ```text
/// block_g = (1/N) sum_i Vhat_i / pihat_g^2, over gamma_i = g
/// ```
pub fn param_variance(
    variances: &[DMatrix<f64>],
    assignments: &[usize],
    proportions: &[f64],
    n_groups: usize,
) -> Result<VarianceEstimate> {
    let n = variances.len();
    check_groups(assignments, proportions, n_groups, n)?;
    let b = variances[0].nrows();
    let mut blocks = vec![DMatrix::<f64>::zeros(b, b); n_groups];
    for (i, &g) in assignments.iter().enumerate() {
        blocks[g] += &variances[i];
    }
    for g in 0..n_groups {
        blocks[g] *= 1.0 / (n as f64 * proportions[g] * proportions[g]);
    }
    Ok(VarianceEstimate::new(blocks))
}

/// Evaluates v' M^{-1} v for symmetric M through an eigendecomposition.
///
/// M is symmetrized first; if its smallest eigenvalue is not positive
/// relative to the largest (tolerance 1e-12), the matrix is treated as
/// singular rather than silently pseudo-inverted.
pub fn spd_quadform(v: &DVector<f64>, m: &DMatrix<f64>) -> Result<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let max = eig.eigenvalues.amax();
    if !(max > 0.0) || !max.is_finite() {
        return Err(Error::SingularContrastVariance);
    }
    let mut total = 0.0;
    for (j, &lambda) in eig.eigenvalues.iter().enumerate() {
        if lambda <= 1e-12 * max {
            return Err(Error::SingularContrastVariance);
        }
        let proj = eig.eigenvectors.column(j).dot(v);
        total += proj * proj / lambda;
    }
    Ok(total)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Panel;

    fn fixture_panel() -> Panel {
        // R periods separate units {1,2} from {3,4}; P periods hold the
        // worked values (1,3), (2,2), (5,7), (6,6).
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
    fn worked_iid_blocks() {
        let panel = fixture_panel();
        let view = panel.view(&[3, 4]).unwrap();
        let v = iid_variance(&view, &[0, 0, 1, 1], &[0.5, 0.5], 2).unwrap();
        assert!((v.block(0)[(0, 0)] - 1.0).abs() < 1e-12);
        assert!((v.block(1)[(0, 0)] - 1.0).abs() < 1e-12);
        let full = v.assembled();
        assert_eq!(full.nrows(), 2);
        assert_eq!(full[(0, 1)], 0.0);
        assert_eq!(full[(1, 0)], 0.0);
    }

    #[test]
    fn constant_group_is_singular() {
        let panel = Panel::from_values(2, 2, 1, vec![1.0, 1.0, 2.0, 4.0]).unwrap();
        let view = panel.full_view();
        assert!(matches!(
            iid_variance(&view, &[0, 1], &[0.5, 0.5], 2),
            Err(Error::SingularVariance { group: 1 })
        ));
    }

    #[test]
    fn empty_group_caught_before_division() {
        let panel = fixture_panel();
        let view = panel.view(&[3, 4]).unwrap();
        assert!(matches!(
            iid_variance(&view, &[0, 0, 0, 0], &[1.0, 0.0], 2),
            Err(Error::EmptyGroupInP { group: 2 })
        ));
    }

    #[test]
    fn single_period_view_is_rejected() {
        let panel = fixture_panel();
        let view = panel.view(&[4]).unwrap();
        assert!(matches!(
            iid_variance(&view, &[0, 0, 1, 1], &[0.5, 0.5], 2),
            Err(Error::PanelTooShort { t: 1, need: 2 })
        ));
    }

    #[test]
    fn group_sum_residuals_handle_one_period() {
        // P-values (-1, 1, 9, 11) around group means (0, 10).
        let panel = Panel::from_values(4, 2, 1, vec![0.0, -1.0, 0.0, 1.0, 10.0, 9.0, 10.0, 11.0]).unwrap();
        let view = panel.view(&[2]).unwrap();
        let means = DMatrix::from_column_slice(2, 1, &[0.0, 10.0]);
        let v = group_sum_residual_variance(&view, &[0, 0, 1, 1], &means, &[0.5, 0.5], 2).unwrap();
        // Each unit contributes s_i^2 = 1; (1/4) * 2 * 4 per group.
        assert!((v.block(0)[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((v.block(1)[(0, 0)] - 2.0).abs() < 1e-12);
        assert!((v.scalar_sum() - 4.0).abs() < 1e-12);
    }

    #[test]
    fn quadform_matches_direct_inverse() {
        let m = DMatrix::from_row_slice(2, 2, &[4.0, 1.0, 1.0, 3.0]);
        let v = DVector::from_column_slice(&[1.0, 2.0]);
        let direct = (v.transpose() * m.clone().try_inverse().unwrap() * &v)[(0, 0)];
        assert!((spd_quadform(&v, &m).unwrap() - direct).abs() < 1e-12);
        let singular = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 1.0, 1.0]);
        assert!(matches!(spd_quadform(&v, &singular), Err(Error::SingularContrastVariance)));
    }
}
