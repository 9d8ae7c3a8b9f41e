//! Monte Carlo execution: replication loops, aggregation, output tables.
//!
//! Replications are embarrassingly parallel. Each one derives its panel and
//! its k-means seed from (master seed, process digest, replication, attempt),
//! so the aggregate is identical no matter how the work is scheduled, and two
//! tests configured against the same process see the same draws.
//!
//! A replication whose statistic cannot be formed (a degenerate draw, e.g. a
//! singular within-group variance) is redrawn from the next substream, up to
//! three attempts. Replications that fail all attempts are excluded from the
//! rejection rate but counted and reported; a cell with more than 1% such
//! failures is flagged rather than silently accepted.

use std::collections::BTreeMap;
use std::io::Write;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::inference::{
    bonferroni, f_test, finite_t_test, hac_test, no_split_test, param_test, small_cluster_test,
    t_test_two_groups, Ar1Variance,
};
use crate::inference::ar1_param_panel;
use crate::kmeans::KMeansOptions;
use crate::panel::{Panel, SplitMode};
use crate::rng::{mix, PURPOSE_TEST};

use super::config::{ExperimentConfig, Suite, SweepConfig, TestSpec};
use super::dgp::gen_panel_attempt;

/// Seed used when a config does not pin one.
pub const DEFAULT_MASTER_SEED: u64 = 20190715;

const MAX_ATTEMPTS: u64 = 3;

/// Aggregated outcome of one experiment cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellResult {
    pub name: String,
    /// Share of successful replications with p below the nominal level.
    pub rejection_rate: f64,
    /// Replications that produced a p-value.
    pub n_reps: usize,
    /// Replications that stayed degenerate after every redraw attempt.
    pub n_failures: usize,
    /// True when failures exceed 1% of the requested replications.
    pub flagged: bool,
    pub seconds: f64,
    /// Error codes of failed attempts, with counts.
    pub failure_reasons: Vec<(String, usize)>,
    /// Per-replication p-values (replication index, p), when retained.
    pub p_values: Option<Vec<(usize, f64)>>,
}

struct RepOutcome {
    p: Option<f64>,
    failed_attempts: Vec<&'static str>,
}

/// Runs one cell, parallelizing over replications.
pub fn run_cell(config: &ExperimentConfig) -> Result<CellResult> {
    config.validate()?;
    let start = Instant::now();
    let master = config.master_seed.unwrap_or(DEFAULT_MASTER_SEED);
    let digest = config.dgp.digest();
    let outcomes: Vec<RepOutcome> = (0..config.replications as u64)
        .into_par_iter()
        .map(|rep| run_rep(config, master, digest, rep))
        .collect::<Result<_>>()?;

    let mut reasons: BTreeMap<&'static str, usize> = BTreeMap::new();
    let mut p_values = config.retain_p_values.then(Vec::new);
    let mut rejections = 0usize;
    let mut successes = 0usize;
    let mut n_failures = 0usize;
    for (rep, out) in outcomes.iter().enumerate() {
        for code in &out.failed_attempts {
            *reasons.entry(code).or_insert(0) += 1;
        }
        match out.p {
            Some(p) => {
                successes += 1;
                if p < config.level {
                    rejections += 1;
                }
                if let Some(ps) = p_values.as_mut() {
                    ps.push((rep, p));
                }
            }
            None => n_failures += 1,
        }
    }
    let rejection_rate =
        if successes > 0 { rejections as f64 / successes as f64 } else { f64::NAN };
    Ok(CellResult {
        name: config.name.clone(),
        rejection_rate,
        n_reps: successes,
        n_failures,
        flagged: n_failures as f64 > 0.01 * config.replications as f64,
        seconds: start.elapsed().as_secs_f64(),
        failure_reasons: reasons.into_iter().map(|(k, v)| (k.to_string(), v)).collect(),
        p_values,
    })
}

fn run_rep(config: &ExperimentConfig, master: u64, digest: u64, rep: u64) -> Result<RepOutcome> {
    let mut failed_attempts = Vec::new();
    for attempt in 0..MAX_ATTEMPTS {
        let panel = gen_panel_attempt(&config.dgp, master, rep, attempt)?;
        let opts = KMeansOptions {
            restarts: config.restarts,
            seed: mix(&[master, digest, rep, attempt, PURPOSE_TEST]),
            ..KMeansOptions::default()
        };
        match apply_test(&config.test, &panel, &config.split.mode(), &opts) {
            Ok(p) => return Ok(RepOutcome { p: Some(p), failed_attempts }),
            Err(e) if e.is_degenerate_draw() => failed_attempts.push(e.code()),
            Err(e) => return Err(e),
        }
    }
    Ok(RepOutcome { p: None, failed_attempts })
}

fn apply_test(
    test: &TestSpec,
    panel: &Panel,
    mode: &SplitMode,
    opts: &KMeansOptions,
) -> Result<f64> {
    let p = match *test {
        TestSpec::F { g_alt } => f_test(panel, mode, g_alt, opts)?.p_value,
        TestSpec::T => t_test_two_groups(panel, mode, opts)?.p_value,
        TestSpec::SmallCluster { g_alt, pi_bar } => {
            small_cluster_test(panel, mode, g_alt, pi_bar, opts)?.p_value
        }
        TestSpec::FiniteT => finite_t_test(panel, mode, opts)?.p_value,
        TestSpec::Hac { m_lags } => hac_test(panel, m_lags, opts)?.p_value,
        TestSpec::ParamAr1 { g_alt } => {
            let params = ar1_param_panel(panel, mode, Ar1Variance::Classical)?;
            param_test(&params, g_alt, opts)?.p_value
        }
        TestSpec::NoSplit { g_alt } => no_split_test(panel, g_alt, opts)?.p_value,
        TestSpec::Bonferroni { g_max } => {
            let mut ps = Vec::with_capacity(g_max - 1);
            for g in 2..=g_max {
                ps.push(f_test(panel, mode, g, opts)?.p_value);
            }
            bonferroni(&ps)?
        }
    };
    Ok(p)
}

/// Runs every cell of a suite in order.
pub fn run_suite(suite: &Suite) -> Result<Vec<CellResult>> {
    suite.validate()?;
    suite.cells.iter().map(run_cell).collect()
}

/// Runs one cell per sweep value, pairing each result with its x.
pub fn run_power_curve(sweep: &SweepConfig) -> Result<Vec<(f64, CellResult)>> {
    sweep.validate()?;
    sweep
        .values
        .iter()
        .map(|&v| Ok((v, run_cell(&sweep.cell_at(v)?)?)))
        .collect()
}

/// Writes one row per cell: identifying parameters, then outcomes.
pub fn write_cells_csv<W: Write>(
    mut out: W,
    rows: &[(&ExperimentConfig, &CellResult)],
) -> Result<()> {
    writeln!(
        out,
        "name,method,d,g,n,t,residuals,rejection_rate,n_reps,n_failures,flagged,seconds"
    )?;
    for (config, result) in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{:.3}",
            config.name,
            config.test.label(),
            config.dgp.d,
            config.test.g_alt().map_or_else(String::new, |g| g.to_string()),
            config.dgp.n,
            config.dgp.t,
            match config.dgp.residuals {
                super::dgp::Residuals::Normal => "normal",
                super::dgp::Residuals::Heterogeneous => "heterogeneous",
            },
            result.rejection_rate,
            result.n_reps,
            result.n_failures,
            result.flagged,
            result.seconds,
        )?;
    }
    Ok(())
}

/// Writes sweep results as plot data with a 95% binomial band.
pub fn write_curve_csv<W: Write>(mut out: W, points: &[(f64, CellResult)]) -> Result<()> {
    writeln!(out, "x,rejection_rate,ci_lo,ci_hi,n_reps")?;
    for (x, result) in points {
        let (lo, hi) = binomial_band(result.rejection_rate, result.n_reps);
        writeln!(out, "{},{},{},{},{}", x, result.rejection_rate, lo, hi, result.n_reps)?;
    }
    Ok(())
}

/// Writes retained per-replication p-values, one row each.
pub fn write_p_values_csv<W: Write>(mut out: W, result: &CellResult) -> Result<()> {
    let Some(ps) = &result.p_values else {
        return Err(Error::InvalidConfig(format!(
            "cell {} did not retain p-values",
            result.name
        )));
    };
    writeln!(out, "rep,p_value")?;
    for (rep, p) in ps {
        writeln!(out, "{},{}", rep, p)?;
    }
    Ok(())
}

/// 95% normal-approximation band for a proportion, clamped to [0, 1].
pub fn binomial_band(rate: f64, n: usize) -> (f64, f64) {
    if n == 0 || !rate.is_finite() {
        return (f64::NAN, f64::NAN);
    }
    let se = (rate * (1.0 - rate) / n as f64).sqrt();
    ((rate - 1.96 * se).max(0.0), (rate + 1.96 * se).min(1.0))
}

/// Bundled experiment files, compiled in so the binary is self-contained.
pub fn preset(name: &str) -> Option<&'static str> {
    match name {
        "table1_smoke" => Some(include_str!("../../presets/table1_smoke.json")),
        "figure1" => Some(include_str!("../../presets/figure1.json")),
        "tableSA1_smoke" => Some(include_str!("../../presets/tableSA1_smoke.json")),
        _ => None,
    }
}

pub fn preset_names() -> &'static [&'static str] {
    &["figure1", "table1_smoke", "tableSA1_smoke"]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simlab::config::{ConfigFile, SplitChoice, SweepParameter};
    use crate::simlab::dgp::{DgpKind, DgpSpec, Residuals};

    fn quick_cell(test: TestSpec, n: usize, t: usize, reps: usize) -> ExperimentConfig {
        ExperimentConfig {
            name: "quick".into(),
            dgp: DgpSpec { n, t, d: 1, kind: DgpKind::NullMeans, residuals: Residuals::Normal },
            test,
            split: SplitChoice::Halves,
            replications: reps,
            level: 0.05,
            restarts: 8,
            master_seed: Some(99),
            retain_p_values: true,
        }
    }

    #[test]
    fn run_cell_is_reproducible() {
        let config = quick_cell(TestSpec::F { g_alt: 2 }, 12, 16, 24);
        let a = run_cell(&config).unwrap();
        let b = run_cell(&config).unwrap();
        assert_eq!(a.rejection_rate, b.rejection_rate);
        assert_eq!(a.p_values, b.p_values);
        assert_eq!(a.n_reps, 24);
        assert_eq!(a.n_failures, 0);
        assert!(!a.flagged);
    }

    #[test]
    fn null_cell_rejects_rarely() {
        let config = quick_cell(TestSpec::F { g_alt: 2 }, 20, 40, 60);
        let result = run_cell(&config).unwrap();
        assert!(result.rejection_rate <= 0.2, "rate {}", result.rejection_rate);
    }

    #[test]
    fn separated_cell_rejects_always() {
        let mut config = quick_cell(TestSpec::F { g_alt: 2 }, 20, 40, 20);
        config.dgp.kind = DgpKind::ClusterMeans {
            means: vec![vec![0.0], vec![4.0]],
            proportions: vec![0.5, 0.5],
        };
        let result = run_cell(&config).unwrap();
        assert_eq!(result.rejection_rate, 1.0);
    }

    #[test]
    fn bonferroni_cell_combines_component_cells() {
        // Cells share substreams keyed by the process digest, so the combined
        // cell must reproduce min(1, 2 * min(p2, p3)) replication by
        // replication against separately run component cells.
        let bonf = run_cell(&quick_cell(TestSpec::Bonferroni { g_max: 3 }, 14, 20, 10)).unwrap();
        let f2 = run_cell(&quick_cell(TestSpec::F { g_alt: 2 }, 14, 20, 10)).unwrap();
        let f3 = run_cell(&quick_cell(TestSpec::F { g_alt: 3 }, 14, 20, 10)).unwrap();
        let ps_bonf = bonf.p_values.unwrap();
        let ps_f2 = f2.p_values.unwrap();
        let ps_f3 = f3.p_values.unwrap();
        for rep in 0..10 {
            let expected = (2.0 * ps_f2[rep].1.min(ps_f3[rep].1)).min(1.0);
            assert_eq!(ps_bonf[rep].1, expected, "replication {rep}");
        }
    }

    #[test]
    fn degenerate_draws_are_redrawn_then_counted() {
        // Two units and two clusters leave every group a singleton, so the
        // group-mean residuals vanish and every attempt is degenerate. The
        // cell must record all 3 attempts per replication and flag itself.
        let config = quick_cell(TestSpec::FiniteT, 2, 2, 40);
        let result = run_cell(&config).unwrap();
        assert_eq!(result.n_reps, 0);
        assert_eq!(result.n_failures, 40);
        assert!(result.flagged);
        assert!(result.rejection_rate.is_nan());
        assert_eq!(result.failure_reasons, vec![("NonPositiveVariance".to_string(), 120)]);
    }

    #[test]
    fn hard_errors_abort_the_cell() {
        let mut config = quick_cell(TestSpec::F { g_alt: 2 }, 12, 16, 5);
        config.level = 1.5;
        assert!(matches!(run_cell(&config), Err(Error::InvalidConfig(_))));
    }

    #[test]
    fn power_curve_tracks_separation() {
        let mut base = quick_cell(TestSpec::F { g_alt: 2 }, 16, 30, 30);
        base.dgp.kind = DgpKind::ClusterMeans {
            means: vec![vec![0.0], vec![0.0]],
            proportions: vec![0.5, 0.5],
        };
        let sweep = SweepConfig {
            base,
            parameter: SweepParameter::Mu2,
            values: vec![0.0, 3.0],
        };
        let points = run_power_curve(&sweep).unwrap();
        assert_eq!(points.len(), 2);
        assert!(points[0].1.rejection_rate < 0.3);
        assert_eq!(points[1].1.rejection_rate, 1.0);
    }

    #[test]
    fn csv_outputs_have_stable_headers() {
        let config = quick_cell(TestSpec::T, 12, 16, 8);
        let result = run_cell(&config).unwrap();
        let mut cells = Vec::new();
        write_cells_csv(&mut cells, &[(&config, &result)]).unwrap();
        let text = String::from_utf8(cells).unwrap();
        assert!(text.starts_with(
            "name,method,d,g,n,t,residuals,rejection_rate,n_reps,n_failures,flagged,seconds"
        ));
        assert!(text.contains("quick,t,1,2,12,16,normal,"));

        let mut curve = Vec::new();
        write_curve_csv(&mut curve, &[(0.5, result.clone())]).unwrap();
        assert!(String::from_utf8(curve).unwrap().starts_with("x,rejection_rate,ci_lo,ci_hi,n_reps"));

        let mut ps = Vec::new();
        write_p_values_csv(&mut ps, &result).unwrap();
        let ps = String::from_utf8(ps).unwrap();
        assert!(ps.starts_with("rep,p_value"));
        assert_eq!(ps.lines().count(), 1 + result.n_reps);
    }

    #[test]
    fn binomial_band_is_clamped() {
        let (lo, hi) = binomial_band(0.0, 100);
        assert_eq!((lo, hi), (0.0, 0.0));
        let (lo, hi) = binomial_band(0.5, 100);
        assert!(lo > 0.3 && hi < 0.7 && lo < hi);
        assert!(binomial_band(f64::NAN, 0).0.is_nan());
    }

    #[test]
    fn presets_parse_and_validate() {
        for name in preset_names() {
            let text = preset(name).unwrap();
            let parsed = ConfigFile::from_json(text)
                .unwrap_or_else(|e| panic!("preset {name} invalid: {e}"));
            match (*name, parsed) {
                ("figure1", ConfigFile::Sweep(_)) => {}
                ("table1_smoke" | "tableSA1_smoke", ConfigFile::Suite(s)) => {
                    assert!(s.cells.iter().all(|c| c.replications == 200));
                }
                (other, _) => panic!("preset {other} has unexpected layout"),
            }
        }
        assert!(preset("nonexistent").is_none());
    }
}
