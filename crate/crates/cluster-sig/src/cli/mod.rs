//! Command-line surface.
//!
//! Four subcommands: `test` runs one significance test on a panel CSV,
//! `simulate` executes Monte Carlo experiments from a JSON config or a
//! bundled preset, `kmeans` fits and prints clusters without testing, and
//! `replicate` reruns the vehicle-manufacturer study from raw model data.
//!
//! Exit codes: 0 on success, 1 when the data defeat the statistic (singular
//! variance, degenerate draws, unreadable rows), 2 for usage and
//! configuration errors. Every failure prints one line to stderr of the form
//! `error[Code]: message`. Seeds resolve as `--seed`, then the
//! `CLUSTER_SIG_SEED` environment variable, then a fixed default, so runs
//! are reproducible unless the caller asks otherwise.

pub mod vehicles;

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};

use crate::error::{Error, Result};
use crate::inference::{
    ar1_param_panel, bonferroni, f_test, finite_t_test, hac_test, no_split_test, param_test,
    small_cluster_test, t_test_two_groups, Ar1Variance, Df, TestResult,
};
use crate::kmeans::{fit_clusters, KMeansOptions};
use crate::panel::{resolve_split, Panel, SplitMode};
use crate::simlab::{
    preset, preset_names, run_cell, run_power_curve, write_cells_csv, write_curve_csv,
    write_p_values_csv, CellResult, ConfigFile, ExperimentConfig, DEFAULT_MASTER_SEED,
};

pub const SEED_ENV_VAR: &str = "CLUSTER_SIG_SEED";

/// Runs the CLI on the given argument list and returns the process exit code.
pub fn run_from<I>(args: I) -> i32
where
    I: IntoIterator<Item = String>,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return code;
        }
    };
    let outcome = match cli.command {
        Command::Test(args) => cmd_test(args),
        Command::Simulate(args) => cmd_simulate(args),
        Command::Kmeans(args) => cmd_kmeans(args),
        Command::Replicate(args) => cmd_replicate(args),
    };
    match outcome {
        Ok(()) => 0,
        Err(e) => {
            let message = e.to_string().replace('\n', "; ");
            eprintln!("error[{}]: {}", e.code(), message);
            if e.is_config() {
                2
            } else {
                1
            }
        }
    }
}

#[derive(Parser)]
#[command(
    name = "cluster-sig",
    version,
    about = "Split-sample significance tests for k-means clusters in panel data"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Test a panel CSV for cluster structure
    Test(TestArgs),
    /// Run Monte Carlo experiments from a config file or bundled preset
    Simulate(SimulateArgs),
    /// Fit k-means clusters on a panel CSV without testing
    Kmeans(KmeansArgs),
    /// Rerun the vehicle-manufacturer study from raw model data
    Replicate(ReplicateArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum MethodArg {
    F,
    T,
    SmallCluster,
    FiniteT,
    Hac,
    ParamAr1,
    NoSplit,
}

impl MethodArg {
    fn name(self) -> &'static str {
        match self {
            MethodArg::F => "f",
            MethodArg::T => "t",
            MethodArg::SmallCluster => "small-cluster",
            MethodArg::FiniteT => "finite-t",
            MethodArg::Hac => "hac",
            MethodArg::ParamAr1 => "param-ar1",
            MethodArg::NoSplit => "no-split",
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum SplitArg {
    Halves,
    Interleaved,
}

#[derive(Args)]
struct TestArgs {
    /// Panel CSV with header unit,period,y1,...,yd
    panel: PathBuf,
    /// Test to run
    #[arg(long, value_enum, default_value_t = MethodArg::F)]
    method: MethodArg,
    /// Group count under the alternative (methods with a free G)
    #[arg(long)]
    g: Option<usize>,
    /// How periods divide into estimation and testing samples
    #[arg(long, value_enum)]
    split: Option<SplitArg>,
    /// Minimum group share kept by the small-cluster test
    #[arg(long)]
    pi_bar: Option<f64>,
    /// Autocovariance lags for the serial-dependence test
    #[arg(long)]
    m_lags: Option<usize>,
    /// k-means restarts
    #[arg(long, default_value_t = 1000)]
    restarts: usize,
    /// RNG seed (overrides CLUSTER_SIG_SEED)
    #[arg(long)]
    seed: Option<u64>,
    /// Combine f tests over alternatives 2..=G_MAX
    #[arg(long, value_name = "G_MAX")]
    bonferroni: Option<usize>,
    /// Write results as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SimulateArgs {
    /// Config JSON path, or a bundled preset name
    config: String,
    /// Directory for output CSVs
    #[arg(long, default_value = "sim-out")]
    out: PathBuf,
    /// Worker threads (default: all cores)
    #[arg(long)]
    jobs: Option<usize>,
    /// Master seed for cells that do not pin one
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct KmeansArgs {
    /// Panel CSV with header unit,period,y1,...,yd
    panel: PathBuf,
    /// Number of clusters
    #[arg(long)]
    g: usize,
    /// Fit on the whole panel or on one side of a split
    #[arg(long, value_enum, default_value_t = FitSample::Full)]
    sample: FitSample,
    /// Split used when --sample is r or p
    #[arg(long, value_enum, default_value_t = SplitArg::Halves)]
    split: SplitArg,
    #[arg(long, default_value_t = 1000)]
    restarts: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Write per-unit assignments as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum FitSample {
    Full,
    R,
    P,
}

#[derive(Args)]
struct ReplicateArgs {
    /// Raw model CSV (manufacturer, model_year, attributes, weight)
    raw_csv: PathBuf,
    #[arg(long, default_value_t = 1000)]
    restarts: usize,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the group-means table as CSV
    #[arg(long)]
    out: Option<PathBuf>,
}

fn usage(message: impl Into<String>) -> Error {
    Error::InvalidConfig(message.into())
}

fn env_seed() -> Result<Option<u64>> {
    match std::env::var(SEED_ENV_VAR) {
        Ok(text) => text
            .trim()
            .parse::<u64>()
            .map(Some)
            .map_err(|_| usage(format!("{SEED_ENV_VAR} must be an unsigned integer, got {text:?}"))),
        Err(_) => Ok(None),
    }
}

fn resolve_seed(flag: Option<u64>) -> Result<u64> {
    Ok(flag.or(env_seed()?).unwrap_or(DEFAULT_MASTER_SEED))
}

fn read_to_string(path: &PathBuf) -> Result<String> {
    fs::read_to_string(path)
        .map_err(|e| Error::InvalidConfig(format!("cannot read {}: {e}", path.display())))
}

fn fmt_p(p: f64) -> String {
    if p < 1e-4 {
        format!("{p:.3e}")
    } else {
        format!("{p:.4}")
    }
}

fn fmt_row(m: &nalgebra::DMatrix<f64>, row: usize) -> String {
    let mut out = String::new();
    for j in 0..m.ncols() {
        let _ = write!(out, "{:>10.4}", m[(row, j)]);
    }
    out
}

fn df_csv(df: Df) -> String {
    match df {
        Df::ChiSquared(k) => k.to_string(),
        Df::Normal => "normal".to_string(),
    }
}

const NO_SPLIT_BANNER: &str = "warning: the no-split method estimates clusters and tests them on \
the same observations.\nwarning: its p-values are not valid evidence of structure; under a true \
single cluster it\nwarning: rejects nearly always. It is included to demonstrate that failure \
mode.";

fn cmd_test(args: TestArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    if let Some(g) = args.g {
        if g < 2 {
            return Err(usage("--g must be at least 2"));
        }
    }
    if let Some(pi_bar) = args.pi_bar {
        if args.method != MethodArg::SmallCluster {
            return Err(usage("--pi-bar only applies to --method small-cluster"));
        }
        if !(0.0..1.0).contains(&pi_bar) {
            return Err(usage(format!("--pi-bar must lie in [0, 1), got {pi_bar}")));
        }
    }
    if args.m_lags.is_some() && args.method != MethodArg::Hac {
        return Err(usage("--m-lags only applies to --method hac"));
    }
    if args.method == MethodArg::Hac {
        if args.m_lags.is_none() {
            return Err(usage("--method hac needs --m-lags (0 disables the lag correction)"));
        }
        if args.split.is_some() {
            return Err(usage("--method hac chooses its own gapped split; drop --split"));
        }
    }
    if let Some(g_max) = args.bonferroni {
        if args.method != MethodArg::F {
            return Err(usage("--bonferroni only applies to --method f"));
        }
        if args.g.is_some() {
            return Err(usage("--bonferroni replaces --g; pass one or the other"));
        }
        if g_max < 2 {
            return Err(usage("--bonferroni needs G_MAX >= 2"));
        }
    }
    if matches!(args.method, MethodArg::T | MethodArg::FiniteT | MethodArg::Hac) {
        if let Some(g) = args.g {
            if g != 2 {
                return Err(usage(format!(
                    "the {} test contrasts exactly 2 groups; --g {g} conflicts",
                    args.method.name()
                )));
            }
        }
    }
    if args.method == MethodArg::ParamAr1 && args.split == Some(SplitArg::Interleaved) {
        return Err(usage(
            "param-ar1 fits lagged regressions and needs contiguous periods; \
             interleaved splits are not supported",
        ));
    }

    let panel = Panel::from_csv_path(&args.panel)?;
    let mode = match args.split.unwrap_or(SplitArg::Halves) {
        SplitArg::Halves => SplitMode::Halves,
        SplitArg::Interleaved => SplitMode::Interleaved,
    };
    let g = args.g.unwrap_or(2);
    let pi_bar = args.pi_bar.unwrap_or(0.1);
    let opts = KMeansOptions { restarts: args.restarts, seed, ..KMeansOptions::default() };

    if args.method == MethodArg::NoSplit {
        eprintln!("{NO_SPLIT_BANNER}");
    }

    let mut results = Vec::new();
    let mut combined: Option<(usize, f64)> = None;
    if let Some(g_max) = args.bonferroni {
        for g_alt in 2..=g_max {
            results.push(f_test(&panel, &mode, g_alt, &opts)?);
        }
        let ps: Vec<f64> = results.iter().map(|r| r.p_value).collect();
        combined = Some((g_max, bonferroni(&ps)?));
    } else {
        results.push(match args.method {
            MethodArg::F => f_test(&panel, &mode, g, &opts)?,
            MethodArg::T => t_test_two_groups(&panel, &mode, &opts)?,
            MethodArg::SmallCluster => small_cluster_test(&panel, &mode, g, pi_bar, &opts)?,
            MethodArg::FiniteT => finite_t_test(&panel, &mode, &opts)?,
            MethodArg::Hac => hac_test(&panel, args.m_lags.unwrap_or(0), &opts)?,
            MethodArg::ParamAr1 => {
                let params = ar1_param_panel(&panel, &mode, Ar1Variance::Classical)?;
                param_test(&params, g, &opts)?
            }
            MethodArg::NoSplit => no_split_test(&panel, g, &opts)?,
        });
    }

    println!(
        "panel: {} units, {} periods, d = {} ({})",
        panel.n_units(),
        panel.n_periods(),
        panel.dim(),
        args.panel.display()
    );
    print_split_line(&panel, args.method, args.m_lags, &mode)?;
    for result in &results {
        print_result(result);
    }
    if let Some((g_max, p)) = combined {
        println!("combined over G = 2..={g_max} (Bonferroni): p-value = {}", fmt_p(p));
    }

    if let Some(out) = &args.out {
        let mut text = String::from("method,g_alt,g_effective,statistic,df,p_value\n");
        for r in &results {
            let _ = writeln!(
                text,
                "{},{},{},{},{},{}",
                r.method, r.g_alt, r.g_effective, r.statistic, df_csv(r.df), r.p_value
            );
        }
        if let Some((g_max, p)) = combined {
            let _ = writeln!(text, "bonferroni,{g_max},,,,{p}");
        }
        fs::write(out, text)?;
    }
    Ok(())
}

fn print_split_line(
    panel: &Panel,
    method: MethodArg,
    m_lags: Option<usize>,
    mode: &SplitMode,
) -> Result<()> {
    if method == MethodArg::NoSplit {
        println!("split: none (clusters estimated and tested on all periods)");
        return Ok(());
    }
    let effective = if method == MethodArg::Hac {
        SplitMode::HalvesGap(m_lags.unwrap_or(0))
    } else {
        mode.clone()
    };
    let spec = resolve_split(panel.n_periods(), &effective)?;
    println!(
        "split: R = {} periods, P = {} periods{}",
        spec.r_indices().len(),
        spec.p_indices().len(),
        if spec.gap() > 0 { format!(" (gap {})", spec.gap()) } else { String::new() }
    );
    Ok(())
}

fn print_result(result: &TestResult) {
    println!();
    println!("method: {}", result.method);
    if result.g_effective != result.g_alt {
        println!(
            "groups: G = {} considered, {} large enough to contrast",
            result.g_alt, result.g_effective
        );
    } else {
        println!("groups: G = {}", result.g_alt);
    }
    println!(
        "statistic: {:.6}   reference: {}   p-value: {}",
        result.statistic,
        result.df,
        fmt_p(result.p_value)
    );
    println!("group  share  mean over R | mean over P");
    for g in 0..result.g_alt {
        println!(
            "{:<5}  {:>5.3}  {} | {}",
            g + 1,
            result.diagnostics.proportions[g],
            fmt_row(&result.diagnostics.means_r, g),
            fmt_row(&result.diagnostics.means_p, g),
        );
    }
}

fn cmd_simulate(args: SimulateArgs) -> Result<()> {
    let path = PathBuf::from(&args.config);
    let text = if path.exists() {
        read_to_string(&path)?
    } else if let Some(bundled) = preset(&args.config) {
        bundled.to_string()
    } else {
        return Err(usage(format!(
            "{} is neither a config file nor a bundled preset (presets: {})",
            args.config,
            preset_names().join(", ")
        )));
    };
    let mut config = ConfigFile::from_json(&text)?;
    if let Some(seed) = args.seed.or(env_seed()?) {
        let fill = |cell: &mut ExperimentConfig| {
            cell.master_seed = cell.master_seed.or(Some(seed));
        };
        match &mut config {
            ConfigFile::Single(cell) => fill(cell),
            ConfigFile::Suite(suite) => suite.cells.iter_mut().for_each(fill),
            ConfigFile::Sweep(sweep) => fill(&mut sweep.base),
        }
    }

    let run = || -> Result<()> {
        fs::create_dir_all(&args.out)?;
        match &config {
            ConfigFile::Single(cell) => {
                let result = run_cell(cell)?;
                report_cell(&result);
                write_outputs(&args.out, &cell.name, &[(cell.clone(), result)], None)?;
            }
            ConfigFile::Suite(suite) => {
                let mut rows = Vec::new();
                for cell in &suite.cells {
                    let result = run_cell(cell)?;
                    report_cell(&result);
                    rows.push((cell.clone(), result));
                }
                write_outputs(&args.out, &suite.name, &rows, None)?;
            }
            ConfigFile::Sweep(sweep) => {
                let points = run_power_curve(sweep)?;
                let mut rows = Vec::new();
                for (x, result) in &points {
                    report_cell(result);
                    rows.push((sweep.cell_at(*x)?, result.clone()));
                }
                write_outputs(&args.out, &sweep.base.name, &rows, Some(&points))?;
            }
        }
        Ok(())
    };

    match args.jobs {
        Some(jobs) => {
            if jobs == 0 {
                return Err(usage("--jobs must be at least 1"));
            }
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(jobs)
                .build()
                .map_err(|e| Error::InvalidConfig(format!("cannot build a {jobs}-thread pool: {e}")))?;
            pool.install(run)
        }
        None => run(),
    }
}

fn report_cell(result: &CellResult) {
    let flag = if result.flagged { "  [flagged: over 1% failed replications]" } else { "" };
    println!(
        "cell {}: rejection rate {:.4} over {} reps ({} failures, {:.1}s){}",
        result.name, result.rejection_rate, result.n_reps, result.n_failures, result.seconds, flag
    );
    for (code, count) in &result.failure_reasons {
        println!("  failed attempts: {count} x {code}");
    }
}

fn write_outputs(
    dir: &PathBuf,
    name: &str,
    rows: &[(ExperimentConfig, CellResult)],
    curve: Option<&[(f64, CellResult)]>,
) -> Result<()> {
    let pairs: Vec<(&ExperimentConfig, &CellResult)> =
        rows.iter().map(|(c, r)| (c, r)).collect();
    let mut cells_csv = Vec::new();
    write_cells_csv(&mut cells_csv, &pairs)?;
    fs::write(dir.join(format!("{name}_cells.csv")), cells_csv)?;
    if let Some(points) = curve {
        let mut curve_csv = Vec::new();
        write_curve_csv(&mut curve_csv, points)?;
        fs::write(dir.join(format!("{name}_curve.csv")), curve_csv)?;
    }
    for (cell, result) in rows {
        if result.p_values.is_some() {
            let mut p_csv = Vec::new();
            write_p_values_csv(&mut p_csv, result)?;
            fs::write(dir.join(format!("{}_pvalues.csv", cell.name)), p_csv)?;
        }
    }
    Ok(())
}

fn cmd_kmeans(args: KmeansArgs) -> Result<()> {
    if args.g < 2 {
        return Err(usage("--g must be at least 2"));
    }
    let seed = resolve_seed(args.seed)?;
    let panel = Panel::from_csv_path(&args.panel)?;
    let mode = match args.split {
        SplitArg::Halves => SplitMode::Halves,
        SplitArg::Interleaved => SplitMode::Interleaved,
    };
    let view = match args.sample {
        FitSample::Full => panel.full_view(),
        FitSample::R => {
            let spec = resolve_split(panel.n_periods(), &mode)?;
            panel.view(spec.r_indices())?
        }
        FitSample::P => {
            let spec = resolve_split(panel.n_periods(), &mode)?;
            panel.view(spec.p_indices())?
        }
    };
    let opts = KMeansOptions { restarts: args.restarts, seed, ..KMeansOptions::default() };
    let fit = fit_clusters(&view, args.g, &opts)?;

    println!(
        "fit: {} clusters on {} units x {} periods (d = {}), {} restarts",
        args.g,
        view.n_units(),
        view.n_periods(),
        view.dim(),
        args.restarts
    );
    println!("objective: {:.6}", fit.objective);
    println!("group  count  share   center");
    let counts = fit.counts();
    for g in 0..fit.n_groups {
        println!(
            "{:<5}  {:<5}  {:>5.3}  {}",
            g + 1,
            counts[g],
            fit.proportions[g],
            fmt_row(&fit.means, g)
        );
    }
    println!("assignments:");
    for (i, label) in panel.unit_labels().iter().enumerate() {
        println!("  {label}: {}", fit.assignments[i] + 1);
    }

    if let Some(out) = &args.out {
        let mut text = String::from("unit,group\n");
        for (i, label) in panel.unit_labels().iter().enumerate() {
            let _ = writeln!(text, "{label},{}", fit.assignments[i] + 1);
        }
        fs::write(out, text)?;
    }
    Ok(())
}

fn cmd_replicate(args: ReplicateArgs) -> Result<()> {
    let seed = resolve_seed(args.seed)?;
    let text = read_to_string(&args.raw_csv)?;
    let study = vehicles::run_vehicle_study(&text, args.restarts, seed)?;
    let result = &study.result;

    println!(
        "manufacturers: {} (from {} estimation-era and {} testing-era model rows)",
        study.manufacturers.len(),
        study.rows_r,
        study.rows_p
    );
    println!("clusters (G = 2, fitted on era averages through {}):", vehicles::SPLIT_YEAR);
    for (g, members) in study.groups.iter().enumerate() {
        let american = members.iter().filter(|m| vehicles::is_american(m)).count();
        let origin = if american == members.len() {
            "all American"
        } else if american == 0 {
            "all non-American"
        } else {
            "mixed origin"
        };
        println!("  group {} ({} makers, {}): {}", g + 1, members.len(), origin, members.join(", "));
    }
    if study.splits_by_origin() {
        println!("the clusters separate American from non-American manufacturers exactly");
    }
    println!();
    println!("attribute columns: {}", vehicles::ATTRIBUTES.join(", "));
    for (title, matrix) in [
        ("normalized means, estimation era", &result.diagnostics.means_r),
        ("normalized means, testing era", &result.diagnostics.means_p),
        ("raw means, testing era", &study.raw_p_means),
    ] {
        println!("{title}:");
        for g in 0..2 {
            println!("  group {}  {}", g + 1, fmt_row(matrix, g));
        }
    }
    println!();
    println!(
        "test: statistic {:.4}, reference {}, p-value {}",
        result.statistic,
        result.df,
        fmt_p(result.p_value)
    );

    if let Some(out) = &args.out {
        let mut text = String::from("table,group,n_members,");
        let _ = writeln!(text, "{}", vehicles::ATTRIBUTES.join(","));
        for (table, matrix) in [
            ("normalized_r", &result.diagnostics.means_r),
            ("normalized_p", &result.diagnostics.means_p),
            ("raw_p", &study.raw_p_means),
        ] {
            for g in 0..2 {
                let _ = write!(text, "{table},{},{}", g + 1, study.groups[g].len());
                for j in 0..6 {
                    let _ = write!(text, ",{}", matrix[(g, j)]);
                }
                text.push('\n');
            }
        }
        fs::write(out, text)?;
    }
    Ok(())
}
