//! A small Monte Carlo size study, from config to CSV.
//!
//! Builds a suite of null cells in code (the same structure the `simulate`
//! subcommand reads from JSON), runs it, and prints the cells CSV. Every
//! number is a function of the configs alone: reordering cells or threads
//! cannot change it.

use cluster_sig::simlab::{
    run_suite, write_cells_csv, DgpKind, DgpSpec, ExperimentConfig, Residuals, SplitChoice, Suite,
    TestSpec,
};

fn null_cell(name: &str, d: usize, n: usize, t: usize, test: TestSpec) -> ExperimentConfig {
    ExperimentConfig {
        name: name.to_string(),
        dgp: DgpSpec { n, t, d, kind: DgpKind::NullMeans, residuals: Residuals::Normal },
        test,
        split: SplitChoice::Halves,
        replications: 200,
        level: 0.05,
        restarts: 30,
        master_seed: Some(20190715),
        retain_p_values: false,
    }
}

fn main() -> cluster_sig::Result<()> {
    let suite = Suite {
        name: "size-smoke".into(),
        cells: vec![
            null_cell("f-g2-n30-t50", 1, 30, 50, TestSpec::F { g_alt: 2 }),
            null_cell("f-g3-n30-t50", 1, 30, 50, TestSpec::F { g_alt: 3 }),
            null_cell("t-n30-t50", 1, 30, 50, TestSpec::T),
            null_cell("f-d2-g2-n30-t50", 2, 30, 50, TestSpec::F { g_alt: 2 }),
            null_cell("bonf4-n30-t50", 1, 30, 50, TestSpec::Bonferroni { g_max: 4 }),
        ],
    };

    let results = run_suite(&suite)?;
    for result in &results {
        println!(
            "{:<18} rate {:.3} over {} reps{}",
            result.name,
            result.rejection_rate,
            result.n_reps,
            if result.flagged { "  [flagged]" } else { "" }
        );
    }

    let pairs: Vec<_> = suite.cells.iter().zip(&results).collect();
    let mut csv = Vec::new();
    write_cells_csv(&mut csv, &pairs)?;
    println!("\n{}", String::from_utf8(csv).expect("CSV is UTF-8"));
    Ok(())
}
