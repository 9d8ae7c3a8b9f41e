//! Testing without committing to a group count.
//!
//! The split-sample test takes the alternative's group count G as given.
//! When G is unknown, run the test at each candidate and combine with a
//! Bonferroni bound: p = min(1, K * min p). Here the data hold three groups,
//! and every candidate G from 2 to 5 detects separation, so the combined
//! p-value stays tiny; on a reshuffled null panel it does not.

use cluster_sig::simlab::{gen_panel, DgpKind, DgpSpec, Residuals};
use cluster_sig::{bonferroni, f_test, KMeansOptions, SplitMode};

fn main() -> cluster_sig::Result<()> {
    let spec = DgpSpec {
        n: 60,
        t: 80,
        d: 1,
        kind: DgpKind::ClusterMeans {
            means: vec![vec![0.0], vec![0.8], vec![1.6]],
            proportions: vec![0.4, 0.4, 0.2],
        },
        residuals: Residuals::Normal,
    };
    let panel = gen_panel(&spec, 7, 0)?;
    let opts = KMeansOptions { restarts: 100, seed: 7, ..KMeansOptions::default() };

    let mut p_values = Vec::new();
    for g in 2..=5 {
        let result = f_test(&panel, &SplitMode::Halves, g, &opts)?;
        println!(
            "G = {g}: statistic {:>8.2}, {}, p = {:.3e}",
            result.statistic, result.df, result.p_value
        );
        p_values.push(result.p_value);
    }
    let combined = bonferroni(&p_values)?;
    println!("combined (Bonferroni over G = 2..=5): p = {combined:.3e}");

    let null = DgpSpec { kind: DgpKind::NullMeans, ..spec };
    let null_panel = gen_panel(&null, 7, 0)?;
    let mut null_ps = Vec::new();
    for g in 2..=5 {
        null_ps.push(f_test(&null_panel, &SplitMode::Halves, g, &opts)?.p_value);
    }
    println!("same procedure on a single-group panel: p = {:.3}", bonferroni(&null_ps)?);
    Ok(())
}
