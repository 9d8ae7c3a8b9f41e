//! What to do when one fitted cluster is nearly empty.
//!
//! A cluster holding a vanishing share of units has a noisy mean and an
//! unstable variance estimate, which distorts the full contrast. The
//! small-cluster variant keeps the k-means fit but contrasts only groups
//! whose estimated share clears a threshold, adjusting the degrees of
//! freedom to the groups actually compared.

use cluster_sig::simlab::{gen_panel, DgpKind, DgpSpec, Residuals};
use cluster_sig::{small_cluster_test, KMeansOptions, SplitMode};

fn main() -> cluster_sig::Result<()> {
    // Two real groups plus a 2%-share sliver with an extreme mean.
    let spec = DgpSpec {
        n: 100,
        t: 120,
        d: 1,
        kind: DgpKind::ClusterMeans {
            means: vec![vec![0.0], vec![0.6], vec![8.0]],
            proportions: vec![0.49, 0.49, 0.02],
        },
        residuals: Residuals::Normal,
    };
    let panel = gen_panel(&spec, 3, 0)?;
    let opts = KMeansOptions { restarts: 100, seed: 3, ..KMeansOptions::default() };

    for pi_bar in [0.0, 0.1] {
        let result = small_cluster_test(&panel, &SplitMode::Halves, 3, pi_bar, &opts)?;
        println!(
            "threshold {:.1}: contrasting {} of {} groups, statistic {:.2}, {}, p = {:.3e}",
            pi_bar, result.g_effective, result.g_alt, result.statistic, result.df, result.p_value
        );
        for g in 0..result.g_alt {
            let kept = if g < result.g_effective { "kept" } else { "dropped" };
            println!(
                "  group {}: share {:.3} ({kept})",
                g + 1,
                result.diagnostics.proportions[g]
            );
        }
    }
    Ok(())
}
