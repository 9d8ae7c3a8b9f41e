//! Contrast matrices that map stacked group means to between-group
//! differences.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

/// Contrast comparing group 1 against each of the remaining g - 1 groups
/// on all d dimensions: a d(g-1) x dg matrix of the block form
/// [(ones_{g-1} (x) I_d), -I_{d(g-1)}]. Applied to the stacked mean vector
/// (mu_1', ..., mu_g')' it yields (mu_1 - mu_2, ..., mu_1 - mu_g).
pub fn full_contrast(d: usize, g: usize) -> Result<DMatrix<f64>> {
    if d == 0 {
        return Err(Error::DomainError("contrast dimension must be >= 1".into()));
    }
    if g < 2 {
        return Err(Error::NeedTwoGroups { g });
    }
    let mut a = DMatrix::zeros(d * (g - 1), d * g);
    for block in 0..g - 1 {
        for j in 0..d {
            a[(block * d + j, j)] = 1.0;
            a[(block * d + j, (block + 1) * d + j)] = -1.0;
        }
    }
    Ok(a)
}

/// Contrast among only the leading `g_large` of `g` groups (d = 1): the
/// first g_large - 1 rows of `full_contrast(1, g)`. Trailing groups get
/// zero columns and drop out of the comparison.
pub fn leading_contrast(g_large: usize, g: usize) -> Result<DMatrix<f64>> {
    if g_large < 2 {
        return Err(Error::NeedTwoGroups { g: g_large });
    }
    if g_large > g {
        return Err(Error::InvalidSubset { g_large, g });
    }
    let full = full_contrast(1, g)?;
    Ok(full.rows(0, g_large - 1).into_owned())
}
