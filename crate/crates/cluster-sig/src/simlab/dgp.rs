//! Synthetic panel generators for the Monte Carlo experiments.
//!
//! Units are assigned to their true groups in deterministic blocks (first
//! n_1 units to group 1, and so on, sizes by largest-remainder rounding),
//! so the group shares are exact and the only randomness is in the
//! residuals. Draw order is fixed as unit -> period -> dimension, and each
//! replication draws from its own counter-derived stream, keyed by the
//! content of the [`DgpSpec`] rather than by any execution order.

use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::Panel;
use crate::rng::{hash_label, mix, stream, PURPOSE_PANEL};
use crate::statfun::{heterogeneous_menu, sample};

/// The mean/dependence structure of the generated panel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum DgpKind {
    /// All units share mean zero: the null of full homogeneity.
    NullMeans,
    /// Group g's units have mean vector `means[g]`; shares `proportions`.
    ClusterMeans { means: Vec<Vec<f64>>, proportions: Vec<f64> },
    /// First-order autoregressions with group-specific persistence, zero
    /// intercept, and a stationary normal start (d = 1 only).
    Ar1Clusters { phis: Vec<f64>, proportions: Vec<f64> },
}

/// Residual family menu.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Residuals {
    #[default]
    Normal,
    /// Each unit draws its family per replication, uniformly from the
    /// standardized five-family menu.
    Heterogeneous,
}

/// A complete data-generating process.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DgpSpec {
    pub n: usize,
    pub t: usize,
    #[serde(default = "default_dim")]
    pub d: usize,
    pub kind: DgpKind,
    #[serde(default)]
    pub residuals: Residuals,
}

fn default_dim() -> usize {
    1
}

impl DgpSpec {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("dgp needs n >= 2, got {}", self.n)));
        }
        if self.t < 2 {
            return Err(Error::InvalidConfig(format!("dgp needs t >= 2, got {}", self.t)));
        }
        if self.d == 0 {
            return Err(Error::InvalidConfig("dgp needs d >= 1".into()));
        }
        match &self.kind {
            DgpKind::NullMeans => Ok(()),
            DgpKind::ClusterMeans { means, proportions } => {
                check_proportions(proportions)?;
                if means.len() != proportions.len() || means.is_empty() {
                    return Err(Error::InvalidConfig(
                        "cluster_means needs one mean vector per proportion".into(),
                    ));
                }
                for (g, row) in means.iter().enumerate() {
                    if row.len() != self.d {
                        return Err(Error::InvalidConfig(format!(
                            "mean vector {} has length {}, expected d = {}",
                            g,
                            row.len(),
                            self.d
                        )));
                    }
                    if row.iter().any(|v| !v.is_finite()) {
                        return Err(Error::InvalidConfig(format!("mean vector {g} is not finite")));
                    }
                }
                Ok(())
            }
            DgpKind::Ar1Clusters { phis, proportions } => {
                check_proportions(proportions)?;
                if phis.len() != proportions.len() || phis.is_empty() {
                    return Err(Error::InvalidConfig(
                        "ar1_clusters needs one phi per proportion".into(),
                    ));
                }
                if self.d != 1 {
                    return Err(Error::InvalidConfig("ar1_clusters needs d = 1".into()));
                }
                if phis.iter().any(|p| !(p.abs() < 1.0)) {
                    return Err(Error::InvalidConfig("each phi must lie in (-1, 1)".into()));
                }
                Ok(())
            }
        }
    }

    /// Content digest keying the replication substreams: two specs produce
    /// the same panels exactly when their digests (and seeds) agree, so
    /// different tests run against common draws of the same process.
    pub fn digest(&self) -> u64 {
        let mut parts: Vec<u64> = vec![
            hash_label("dgp"),
            self.n as u64,
            self.t as u64,
            self.d as u64,
            match self.residuals {
                Residuals::Normal => 0,
                Residuals::Heterogeneous => 1,
            },
        ];
        match &self.kind {
            DgpKind::NullMeans => parts.push(hash_label("null_means")),
            DgpKind::ClusterMeans { means, proportions } => {
                parts.push(hash_label("cluster_means"));
                for row in means {
                    for v in row {
                        parts.push(v.to_bits());
                    }
                }
                for p in proportions {
                    parts.push(p.to_bits());
                }
            }
            DgpKind::Ar1Clusters { phis, proportions } => {
                parts.push(hash_label("ar1_clusters"));
                for v in phis {
                    parts.push(v.to_bits());
                }
                for p in proportions {
                    parts.push(p.to_bits());
                }
            }
        }
        mix(&parts)
    }

    /// True group of each unit under block assignment (empty for the null).
    pub fn true_assignments(&self) -> Vec<usize> {
        let proportions = match &self.kind {
            DgpKind::NullMeans => return vec![0; self.n],
            DgpKind::ClusterMeans { proportions, .. } => proportions,
            DgpKind::Ar1Clusters { proportions, .. } => proportions,
        };
        let sizes = group_sizes(self.n, proportions);
        let mut out = Vec::with_capacity(self.n);
        for (g, &size) in sizes.iter().enumerate() {
            out.extend(std::iter::repeat(g).take(size));
        }
        out
    }
}

fn check_proportions(proportions: &[f64]) -> Result<()> {
    if proportions.iter().any(|&p| !(p > 0.0) || !p.is_finite()) {
        return Err(Error::InvalidConfig("each proportion must be positive".into()));
    }
    let total: f64 = proportions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidConfig(format!("proportions sum to {total}, expected 1")));
    }
    Ok(())
}

/// Integer group sizes by largest-remainder rounding: floor every n*pi_g,
/// then hand the leftover seats to the largest fractional parts (ties to
/// the lower group index).
pub fn group_sizes(n: usize, proportions: &[f64]) -> Vec<usize> {
    let mut sizes: Vec<usize> = proportions.iter().map(|p| (n as f64 * p).floor() as usize).collect();
    let assigned: usize = sizes.iter().sum();
    let mut remainders: Vec<(f64, usize)> = proportions
        .iter()
        .enumerate()
        .map(|(g, p)| (n as f64 * p - sizes[g] as f64, g))
        .collect();
    remainders.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    for k in 0..n.saturating_sub(assigned) {
        sizes[remainders[k].1] += 1;
    }
    sizes
}

/// The residual stream for one (seed, spec, rep, attempt) replication.
pub(crate) fn panel_stream(spec: &DgpSpec, master_seed: u64, rep: u64, attempt: u64) -> ChaCha8Rng {
    stream(&[master_seed, spec.digest(), rep, attempt, PURPOSE_PANEL])
}

/// Generates the panel for replication `rep` (attempt 0).
pub fn gen_panel(spec: &DgpSpec, master_seed: u64, rep: u64) -> Result<Panel> {
    gen_panel_attempt(spec, master_seed, rep, 0)
}

/// Generates a panel for a specific redraw attempt. Attempts index fresh
/// substreams so a degenerate draw can be replaced deterministically.
pub fn gen_panel_attempt(spec: &DgpSpec, master_seed: u64, rep: u64, attempt: u64) -> Result<Panel> {
    spec.validate()?;
    let mut rng = panel_stream(spec, master_seed, rep, attempt);
    let menu = heterogeneous_menu();
    let normal = crate::statfun::DistSpec { family: crate::statfun::Family::StdNormal, standardized: false };
    let (n, t, d) = (spec.n, spec.t, spec.d);
    let assignments = spec.true_assignments();
    let mut values = Vec::with_capacity(n * t * d);
    for i in 0..n {
        let dist = match spec.residuals {
            Residuals::Normal => normal,
            Residuals::Heterogeneous => menu[rng.gen_range(0..menu.len())],
        };
        match &spec.kind {
            DgpKind::NullMeans => {
                for _ in 0..t {
                    for _ in 0..d {
                        values.push(sample(&dist, &mut rng));
                    }
                }
            }
            DgpKind::ClusterMeans { means, .. } => {
                let m = &means[assignments[i]];
                for _ in 0..t {
                    for j in 0..d {
                        values.push(m[j] + sample(&dist, &mut rng));
                    }
                }
            }
            DgpKind::Ar1Clusters { phis, .. } => {
                let phi = phis[assignments[i]];
                let start_sd = (1.0 / (1.0 - phi * phi)).sqrt();
                let e0: f64 = StandardNormal.sample(&mut rng);
                let mut y = start_sd * e0;
                for _ in 0..t {
                    y = phi * y + sample(&dist, &mut rng);
                    values.push(y);
                }
            }
        }
    }
    Panel::from_values(n, t, d, values)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn null_spec(n: usize, t: usize) -> DgpSpec {
        DgpSpec { n, t, d: 1, kind: DgpKind::NullMeans, residuals: Residuals::Normal }
    }

    #[test]
    fn largest_remainder_sizes() {
        assert_eq!(group_sizes(30, &[0.5, 0.5]), vec![15, 15]);
        assert_eq!(group_sizes(150, &[0.495, 0.495, 0.01]), vec![74, 74, 2]);
        let thirds = group_sizes(10, &[1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0]);
        assert_eq!(thirds.iter().sum::<usize>(), 10);
        assert_eq!(thirds, vec![4, 3, 3]);
    }

    #[test]
    fn null_panel_has_small_grand_mean() {
        let spec = null_spec(50, 40);
        let panel = gen_panel(&spec, 1, 0).unwrap();
        let total: f64 = (0..50).map(|i| (0..40).map(|k| panel.value(i, k, 0)).sum::<f64>()).sum();
        let grand = total / 2000.0;
        assert!(grand.abs() < 4.0 / 2000.0_f64.sqrt(), "grand mean {grand}");
    }

    #[test]
    fn cluster_means_shift_blocks_of_units() {
        let spec = DgpSpec {
            n: 30,
            t: 200,
            d: 1,
            kind: DgpKind::ClusterMeans {
                means: vec![vec![0.0], vec![5.0]],
                proportions: vec![0.5, 0.5],
            },
            residuals: Residuals::Normal,
        };
        assert_eq!(spec.true_assignments().iter().filter(|&&g| g == 0).count(), 15);
        let panel = gen_panel(&spec, 7, 3).unwrap();
        for i in 0..30 {
            let mean: f64 = (0..200).map(|k| panel.value(i, k, 0)).sum::<f64>() / 200.0;
            let target = if i < 15 { 0.0 } else { 5.0 };
            assert!((mean - target).abs() < 0.5, "unit {i} mean {mean}");
        }
    }

    #[test]
    fn replications_are_reproducible_and_distinct() {
        let spec = null_spec(5, 8);
        let a = gen_panel(&spec, 42, 0).unwrap();
        let b = gen_panel(&spec, 42, 0).unwrap();
        assert_eq!(a, b);
        let c = gen_panel(&spec, 42, 1).unwrap();
        assert_ne!(a, c);
        let d = gen_panel_attempt(&spec, 42, 0, 1).unwrap();
        assert_ne!(a, d);
    }

    #[test]
    fn digest_tracks_content_not_identity() {
        let a = null_spec(5, 8);
        let b = null_spec(5, 8);
        assert_eq!(a.digest(), b.digest());
        let c = null_spec(5, 9);
        assert_ne!(a.digest(), c.digest());
        let het = DgpSpec { residuals: Residuals::Heterogeneous, ..null_spec(5, 8) };
        assert_ne!(a.digest(), het.digest());
    }

    #[test]
    fn heterogeneous_residuals_stay_standardized() {
        let spec = DgpSpec { residuals: Residuals::Heterogeneous, ..null_spec(40, 500) };
        let panel = gen_panel(&spec, 11, 0).unwrap();
        for i in 0..40 {
            let xs: Vec<f64> = (0..500).map(|k| panel.value(i, k, 0)).collect();
            let mean = xs.iter().sum::<f64>() / 500.0;
            let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 499.0;
            assert!(mean.abs() < 0.3, "unit {i} mean {mean}");
            assert!(var > 0.4 && var < 2.5, "unit {i} var {var}");
        }
    }

    #[test]
    fn ar1_panels_are_persistent_and_stationary() {
        let spec = DgpSpec {
            n: 10,
            t: 300,
            d: 1,
            kind: DgpKind::Ar1Clusters { phis: vec![0.9, 0.0], proportions: vec![0.5, 0.5] },
            residuals: Residuals::Normal,
        };
        let panel = gen_panel(&spec, 3, 0).unwrap();
        for i in 0..10 {
            let xs: Vec<f64> = (0..300).map(|k| panel.value(i, k, 0)).collect();
            let mean = xs.iter().sum::<f64>() / 300.0;
            let mut num = 0.0;
            let mut den = 0.0;
            for k in 1..300 {
                num += (xs[k] - mean) * (xs[k - 1] - mean);
            }
            for x in &xs {
                den += (x - mean) * (x - mean);
            }
            let rho = num / den;
            let target = if i < 5 { 0.9 } else { 0.0 };
            assert!((rho - target).abs() < 0.25, "unit {i} rho {rho}");
        }
    }

    #[test]
    fn invalid_specs_are_rejected() {
        let bad = DgpSpec {
            n: 10,
            t: 10,
            d: 2,
            kind: DgpKind::ClusterMeans { means: vec![vec![0.0]], proportions: vec![1.0] },
            residuals: Residuals::Normal,
        };
        assert!(matches!(bad.validate(), Err(Error::InvalidConfig(_))));
        let bad_props = DgpSpec {
            kind: DgpKind::ClusterMeans {
                means: vec![vec![0.0], vec![1.0]],
                proportions: vec![0.6, 0.6],
            },
            ..null_spec(10, 10)
        };
        assert!(bad_props.validate().is_err());
        let bad_phi = DgpSpec {
            kind: DgpKind::Ar1Clusters { phis: vec![1.0], proportions: vec![1.0] },
            ..null_spec(10, 10)
        };
        assert!(bad_phi.validate().is_err());
    }
}
