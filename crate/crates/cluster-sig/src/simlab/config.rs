//! Experiment configuration: which test runs against which process.
//!
//! A configuration round-trips through JSON so studies can be stored,
//! shared, and rerun bit-for-bit. A config file holds either a single
//! experiment, a named suite of cells, or a parameter sweep.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::panel::SplitMode;

use super::dgp::{DgpKind, DgpSpec};

/// Which test statistic a cell evaluates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "kebab-case")]
pub enum TestSpec {
    F { g_alt: usize },
    T,
    SmallCluster {
        g_alt: usize,
        #[serde(default = "default_pi_bar")]
        pi_bar: f64,
    },
    FiniteT,
    Hac { m_lags: usize },
    ParamAr1 { g_alt: usize },
    NoSplit { g_alt: usize },
    /// Smallest Bonferroni-adjusted p over alternatives 2..=g_max.
    Bonferroni { g_max: usize },
}

fn default_pi_bar() -> f64 {
    0.1
}

impl TestSpec {
    /// The alternative group count reported in summaries, when one exists.
    pub fn g_alt(&self) -> Option<usize> {
        match self {
            TestSpec::F { g_alt }
            | TestSpec::SmallCluster { g_alt, .. }
            | TestSpec::ParamAr1 { g_alt }
            | TestSpec::NoSplit { g_alt } => Some(*g_alt),
            TestSpec::Bonferroni { g_max } => Some(*g_max),
            TestSpec::T => Some(2),
            TestSpec::FiniteT => Some(2),
            TestSpec::Hac { .. } => Some(2),
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            TestSpec::F { .. } => "f",
            TestSpec::T => "t",
            TestSpec::SmallCluster { .. } => "small-cluster",
            TestSpec::FiniteT => "finite-t",
            TestSpec::Hac { .. } => "hac",
            TestSpec::ParamAr1 { .. } => "param-ar1",
            TestSpec::NoSplit { .. } => "no-split",
            TestSpec::Bonferroni { .. } => "bonferroni",
        }
    }

    fn needs_scalar_outcome(&self) -> bool {
        matches!(
            self,
            TestSpec::T
                | TestSpec::SmallCluster { .. }
                | TestSpec::FiniteT
                | TestSpec::Hac { .. }
                | TestSpec::ParamAr1 { .. }
        )
    }
}

/// Sample partition used by the split-sample tests. The serial-dependence
/// test ignores this and inserts its own gap.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SplitChoice {
    #[default]
    Halves,
    Interleaved,
}

impl SplitChoice {
    pub fn mode(self) -> SplitMode {
        match self {
            SplitChoice::Halves => SplitMode::Halves,
            SplitChoice::Interleaved => SplitMode::Interleaved,
        }
    }
}

/// One Monte Carlo cell: a process, a test, and replication settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub name: String,
    pub dgp: DgpSpec,
    pub test: TestSpec,
    #[serde(default)]
    pub split: SplitChoice,
    pub replications: usize,
    #[serde(default = "default_level")]
    pub level: f64,
    #[serde(default = "default_restarts")]
    pub restarts: usize,
    #[serde(default)]
    pub master_seed: Option<u64>,
    #[serde(default)]
    pub retain_p_values: bool,
}

fn default_level() -> f64 {
    0.05
}

fn default_restarts() -> usize {
    100
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        self.dgp.validate()?;
        if self.replications == 0 {
            return Err(Error::InvalidConfig("replications must be at least 1".into()));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be at least 1".into()));
        }
        if self.test.needs_scalar_outcome() && self.dgp.d != 1 {
            return Err(Error::InvalidConfig(format!(
                "the {} test needs a scalar outcome, but the process has d = {}",
                self.test.label(),
                self.dgp.d
            )));
        }
        match self.test {
            TestSpec::F { g_alt } | TestSpec::NoSplit { g_alt } | TestSpec::ParamAr1 { g_alt } => {
                if g_alt < 2 {
                    return Err(Error::InvalidConfig("g_alt must be at least 2".into()));
                }
            }
            TestSpec::SmallCluster { g_alt, pi_bar } => {
                if g_alt < 2 {
                    return Err(Error::InvalidConfig("g_alt must be at least 2".into()));
                }
                if !(0.0..1.0).contains(&pi_bar) {
                    return Err(Error::InvalidConfig(format!(
                        "pi_bar must lie in [0, 1), got {pi_bar}"
                    )));
                }
            }
            TestSpec::Bonferroni { g_max } => {
                if g_max < 2 {
                    return Err(Error::InvalidConfig("g_max must be at least 2".into()));
                }
            }
            TestSpec::Hac { m_lags } => {
                let p_size = self.dgp.t - self.dgp.t / 2;
                if p_size <= m_lags {
                    return Err(Error::InvalidConfig(format!(
                        "hac with {} lags needs more than {} post-split periods",
                        m_lags, m_lags
                    )));
                }
            }
            TestSpec::T | TestSpec::FiniteT => {}
        }
        Ok(())
    }
}

/// A named batch of cells run together and written to one table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suite {
    pub name: String,
    pub cells: Vec<ExperimentConfig>,
}

impl Suite {
    pub fn validate(&self) -> Result<()> {
        if self.cells.is_empty() {
            return Err(Error::InvalidConfig("suite has no cells".into()));
        }
        for cell in &self.cells {
            cell.validate()?;
        }
        Ok(())
    }
}

/// The cell parameter varied along a power curve.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Spread of evenly spaced group means from 0 to the swept value.
    Mu2,
    /// Candidate group count handed to the test.
    GAlt,
    /// Share of the third (smallest) group; the first two split the rest.
    Pi3,
    /// Persistence of the last autoregressive group.
    Phi2,
    /// Number of panel periods.
    TPeriods,
}

/// A base cell plus the values one parameter sweeps over.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub base: ExperimentConfig,
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<()> {
        if self.values.is_empty() {
            return Err(Error::InvalidConfig("sweep has no values".into()));
        }
        for &v in &self.values {
            self.cell_at(v)?.validate()?;
        }
        Ok(())
    }

    /// The concrete cell obtained by setting the swept parameter to `v`.
    pub fn cell_at(&self, v: f64) -> Result<ExperimentConfig> {
        let mut cell = self.base.clone();
        cell.name = format!("{}@{}", self.base.name, v);
        match self.parameter {
            SweepParameter::Mu2 => {
                let DgpKind::ClusterMeans { means, .. } = &mut cell.dgp.kind else {
                    return Err(Error::InvalidConfig(
                        "mu2 sweeps need a cluster_means process".into(),
                    ));
                };
                if !v.is_finite() {
                    return Err(Error::InvalidConfig(format!("mu2 value {v} is not finite")));
                }
                let g = means.len();
                if g < 2 {
                    return Err(Error::InvalidConfig("mu2 sweeps need at least 2 groups".into()));
                }
                for (idx, row) in means.iter_mut().enumerate() {
                    let level = v * idx as f64 / (g - 1) as f64;
                    row.iter_mut().for_each(|x| *x = level);
                }
            }
            SweepParameter::GAlt => {
                let g = integer_value(v, "g_alt")?;
                match &mut cell.test {
                    TestSpec::F { g_alt }
                    | TestSpec::SmallCluster { g_alt, .. }
                    | TestSpec::NoSplit { g_alt }
                    | TestSpec::ParamAr1 { g_alt } => *g_alt = g,
                    TestSpec::Bonferroni { g_max } => *g_max = g,
                    _ => {
                        return Err(Error::InvalidConfig(
                            "g_alt sweeps need a test with a group-count parameter".into(),
                        ))
                    }
                }
            }
            SweepParameter::Pi3 => {
                let props = match &mut cell.dgp.kind {
                    DgpKind::ClusterMeans { proportions, .. }
                    | DgpKind::Ar1Clusters { proportions, .. } => proportions,
                    DgpKind::NullMeans => {
                        return Err(Error::InvalidConfig(
                            "pi3 sweeps need a grouped process".into(),
                        ))
                    }
                };
                if props.len() != 3 {
                    return Err(Error::InvalidConfig(format!(
                        "pi3 sweeps need exactly 3 groups, got {}",
                        props.len()
                    )));
                }
                if !(v > 0.0 && v < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "pi3 must lie in (0, 1), got {v}"
                    )));
                }
                let rest = (1.0 - v) / 2.0;
                *props = vec![rest, rest, v];
            }
            SweepParameter::Phi2 => {
                let DgpKind::Ar1Clusters { phis, .. } = &mut cell.dgp.kind else {
                    return Err(Error::InvalidConfig(
                        "phi2 sweeps need an ar1_clusters process".into(),
                    ));
                };
                if !(v.abs() < 1.0) {
                    return Err(Error::InvalidConfig(format!(
                        "phi2 must lie in (-1, 1), got {v}"
                    )));
                }
                *phis.last_mut().expect("validated non-empty") = v;
            }
            SweepParameter::TPeriods => {
                cell.dgp.t = integer_value(v, "t_periods")?;
            }
        }
        Ok(cell)
    }
}

fn integer_value(v: f64, what: &str) -> Result<usize> {
    if v.is_finite() && v >= 2.0 && v.fract() == 0.0 {
        Ok(v as usize)
    } else {
        Err(Error::InvalidConfig(format!("{what} sweep values must be integers >= 2, got {v}")))
    }
}

/// Any of the three accepted config file layouts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ConfigFile {
    Sweep(SweepConfig),
    Suite(Suite),
    Single(ExperimentConfig),
}

impl ConfigFile {
    pub fn from_json(text: &str) -> Result<Self> {
        let parsed: ConfigFile = serde_json::from_str(text).map_err(|e| {
            Error::InvalidConfig(format!(
                "config must be a single experiment, a suite {{name, cells}}, or a sweep \
                 {{base, parameter, values}}: {e}"
            ))
        })?;
        match &parsed {
            ConfigFile::Sweep(s) => s.validate()?,
            ConfigFile::Suite(s) => s.validate()?,
            ConfigFile::Single(c) => c.validate()?,
        }
        Ok(parsed)
    }
}
