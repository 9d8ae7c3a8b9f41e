//! K-means clustering on unit time-means: k-means++ seeding, Lloyd
//! iteration, multi-restart, and the panel-level objective.
//!
//! The panel criterion
//!
//! ```text
//! (1/NT) sum_i sum_t ||Y_it - mu_{gamma_i}||^2
//! ```
//!
//! splits into a point-set part over the unit means plus a within-unit
//! term that does not depend on the assignment, so the optimizer runs on
//! the N x d matrix of unit means and the constant is added back when the
//! fit is reported. The decomposition is asserted numerically in tests.
//!
//! Determinism: every restart draws from its own counter-derived stream,
//! nearest-center ties go to the lowest group index, restart ties on the
//! objective go to the earliest restart, and fitted groups are relabeled
//! into a canonical order (descending share, then earliest first member).

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::panel::PanelView;
use crate::rng::stream;

/// Stream tag separating restart RNGs from other consumers of the same seed.
const RESTART_TAG: u64 = 0x6b6d_6561_6e73; // "kmeans"

/// A finite N x d point cloud.
#[derive(Debug, Clone)]
pub struct PointSet {
    coords: DMatrix<f64>,
}

impl PointSet {
    pub fn from_matrix(coords: DMatrix<f64>) -> Result<Self> {
        if coords.nrows() == 0 || coords.ncols() == 0 {
            return Err(Error::DomainError("point set must be non-empty".into()));
        }
        if coords.iter().any(|v| !v.is_finite()) {
            return Err(Error::DomainError("point set contains a non-finite coordinate".into()));
        }
        Ok(PointSet { coords })
    }

    pub fn n_points(&self) -> usize {
        self.coords.nrows()
    }

    pub fn dim(&self) -> usize {
        self.coords.ncols()
    }

    pub fn coords(&self) -> &DMatrix<f64> {
        &self.coords
    }
}

/// Tuning knobs for the fit.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    pub max_iterations: usize,
    /// Absolute objective improvement below which a restart stops.
    pub tolerance: f64,
    pub seed: u64,
    /// Share threshold under which a group counts as negligible. Not
    /// enforced during fitting; the small-cluster test consumes it.
    pub min_proportion: f64,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 100,
            max_iterations: 300,
            tolerance: 1e-10,
            seed: 0,
            min_proportion: 0.1,
        }
    }
}

impl KMeansOptions {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidConfig("restarts must be >= 1".into()));
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidConfig("max_iterations must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidConfig("tolerance must be >= 0".into()));
        }
        if !(0.0..0.5).contains(&self.min_proportion) {
            return Err(Error::InvalidConfig("min_proportion must lie in [0, 0.5)".into()));
        }
        Ok(())
    }
}

/// A fitted clustering. Groups are 0-based and stored in canonical order:
/// descending share, ties broken by the earliest member unit.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterFit {
    pub n_groups: usize,
    /// Group of each unit, entries in 0..n_groups.
    pub assignments: Vec<usize>,
    /// Member share of each group; sums to 1.
    pub proportions: Vec<f64>,
    /// Group centers, one row per group.
    pub means: DMatrix<f64>,
    /// The panel (or point-set) criterion at the fitted solution.
    pub objective: f64,
    /// Restarts that produced a candidate fit.
    pub restarts_used: usize,
    /// Lloyd iterations of the winning restart.
    pub iterations: usize,
}

impl ClusterFit {
    /// Member counts per group.
    pub fn counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_groups];
        for &g in &self.assignments {
            counts[g] += 1;
        }
        counts
    }

    /// Relabels groups into canonical order: descending count, then
    /// ascending first-member index. Means, proportions, and assignments
    /// are permuted consistently; the objective is unchanged.
    pub fn canonicalize(&mut self) {
        let counts = self.counts();
        let mut first = vec![usize::MAX; self.n_groups];
        for (i, &g) in self.assignments.iter().enumerate() {
            if first[g] == usize::MAX {
                first[g] = i;
            }
        }
        let mut order: Vec<usize> = (0..self.n_groups).collect();
        order.sort_by_key(|&g| (std::cmp::Reverse(counts[g]), first[g]));
        let mut relabel = vec![0usize; self.n_groups];
        for (new, &old) in order.iter().enumerate() {
            relabel[old] = new;
        }
        for g in &mut self.assignments {
            *g = relabel[*g];
        }
        let old_means = self.means.clone();
        let old_props = self.proportions.clone();
        for (new, &old) in order.iter().enumerate() {
            self.means.set_row(new, &old_means.row(old));
            self.proportions[new] = old_props[old];
        }
    }
}

/// Squared Euclidean distance between row `i` of `a` and row `j` of `b`.
fn sq_dist(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut s = 0.0;
    for c in 0..a.ncols() {
        let d = a[(i, c)] - b[(j, c)];
        s += d * d;
    }
    s
}

/// Index of the nearest center to point `i`; ties go to the lowest group index.
fn nearest(centers: &DMatrix<f64>, points: &DMatrix<f64>, i: usize) -> (usize, f64) {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for g in 0..centers.nrows() {
        let d = sq_dist(points, i, centers, g);
        if d < best_d {
            best_d = d;
            best = g;
        }
    }
    (best, best_d)
}

/// K-means++ initialization: the first center is uniform over the points,
/// each later center is drawn with probability proportional to the squared
/// distance to the nearest center chosen so far.
pub fn kmeanspp_seed<R: rand::Rng + ?Sized>(
    points: &PointSet,
    g: usize,
    rng: &mut R,
) -> Result<DMatrix<f64>> {
    if g == 0 {
        return Err(Error::DomainError("group count must be >= 1".into()));
    }
    let n = points.n_points();
    let d = points.dim();
    let mut centers = DMatrix::zeros(g, d);
    let first = rng.gen_range(0..n);
    centers.set_row(0, &points.coords.row(first));
    let mut dist2: Vec<f64> = (0..n).map(|i| sq_dist(&points.coords, i, &centers, 0)).collect();
    for k in 1..g {
        let total: f64 = dist2.iter().sum();
        if !(total > 0.0) {
            // Every remaining point coincides with a chosen center, and the
            // chosen centers are pairwise distinct, so the point set holds
            // exactly k distinct values.
            return Err(Error::TooFewDistinctPoints { distinct: k, g });
        }
        let mut target = rng.gen::<f64>() * total;
        let mut chosen = n - 1;
        for (i, &w) in dist2.iter().enumerate() {
            target -= w;
            if target <= 0.0 && w > 0.0 {
                chosen = i;
                break;
            }
        }
        centers.set_row(k, &points.coords.row(chosen));
        for i in 0..n {
            let d_new = sq_dist(&points.coords, i, &centers, k);
            if d_new < dist2[i] {
                dist2[i] = d_new;
            }
        }
    }
    Ok(centers)
}

/// Lloyd iteration from given centers. Always returns a fit; the objective
/// here is in point-set units, (1/N) sum_i ||x_i - c_{gamma_i}||^2.
pub fn lloyd(points: &PointSet, mut centers: DMatrix<f64>, opts: &KMeansOptions) -> ClusterFit {
    let n = points.n_points();
    let d = points.dim();
    let g = centers.nrows();
    let mut assignments = vec![0usize; n];
    let mut prev_obj = f64::INFINITY;
    let mut obj = f64::INFINITY;
    let mut iterations = 0;

    for _ in 0..opts.max_iterations {
        iterations += 1;
        for i in 0..n {
            assignments[i] = nearest(&centers, &points.coords, i).0;
        }
        let mut counts = vec![0usize; g];
        let mut sums = DMatrix::<f64>::zeros(g, d);
        for i in 0..n {
            counts[assignments[i]] += 1;
            for j in 0..d {
                sums[(assignments[i], j)] += points.coords[(i, j)];
            }
        }
        let mut reseeded = false;
        for gr in 0..g {
            if counts[gr] > 0 {
                for j in 0..d {
                    centers[(gr, j)] = sums[(gr, j)] / counts[gr] as f64;
                }
            } else {
                // Restart an empty cluster at the point that fits its own
                // group worst; the next assignment pass claims it.
                let mut far = 0;
                let mut far_d = -1.0;
                for i in 0..n {
                    let di = sq_dist(&points.coords, i, &centers, assignments[i]);
                    if di > far_d {
                        far_d = di;
                        far = i;
                    }
                }
                centers.set_row(gr, &points.coords.row(far));
                reseeded = true;
            }
        }
        obj = (0..n)
            .map(|i| sq_dist(&points.coords, i, &centers, assignments[i]))
            .sum::<f64>()
            / n as f64;
        debug_assert!(obj <= prev_obj * (1.0 + 1e-12) + 1e-12, "objective increased: {prev_obj} -> {obj}");
        if !reseeded && prev_obj - obj < opts.tolerance {
            break;
        }
        prev_obj = obj;
    }

    let counts: Vec<usize> = {
        let mut c = vec![0usize; g];
        for &a in &assignments {
            c[a] += 1;
        }
        c
    };
    let proportions = counts.iter().map(|&c| c as f64 / n as f64).collect();
    let mut fit = ClusterFit {
        n_groups: g,
        assignments,
        proportions,
        means: centers,
        objective: obj,
        restarts_used: 1,
        iterations,
    };
    fit.canonicalize();
    fit
}

fn best_of_restarts(points: &PointSet, g: usize, opts: &KMeansOptions) -> Result<ClusterFit> {
    opts.validate()?;
    let mut best: Option<ClusterFit> = None;
    let mut used = 0;
    let mut last_err = None;
    for r in 0..opts.restarts {
        let mut rng = restart_stream(opts.seed, r as u64);
        match kmeanspp_seed(points, g, &mut rng) {
            Ok(centers) => {
                let fit = lloyd(points, centers, opts);
                used += 1;
                // Strict comparison keeps the earliest restart on ties.
                if best.as_ref().map_or(true, |b| fit.objective < b.objective) {
                    best = Some(fit);
                }
            }
            Err(e) => last_err = Some(e),
        }
    }
    match best {
        Some(mut fit) => {
            fit.restarts_used = used;
            Ok(fit)
        }
        None => Err(last_err.expect("restarts >= 1")),
    }
}

/// The RNG for restart `r` under `seed`. Exposed within the crate so tests
/// can replay individual restarts.
pub(crate) fn restart_stream(seed: u64, r: u64) -> rand_chacha::ChaCha8Rng {
    stream(&[seed, RESTART_TAG, r])
}

/// Fits `g` clusters to the unit time-means of a panel view. The reported
/// objective is in panel units: the point-set objective plus the
/// assignment-independent within-unit term.
pub fn fit_clusters(view: &PanelView<'_>, g: usize, opts: &KMeansOptions) -> Result<ClusterFit> {
    let points = PointSet::from_matrix(view.unit_means())?;
    let mut fit = best_of_restarts(&points, g, opts)?;
    let n = view.n_units();
    let t = view.n_periods();
    let d = view.dim();
    let means = points.coords();
    let mut within = 0.0;
    for i in 0..n {
        for k in 0..t {
            for j in 0..d {
                let dev = view.value(i, k, j) - means[(i, j)];
                within += dev * dev;
            }
        }
    }
    fit.objective += within / (n * t) as f64;
    Ok(fit)
}

/// Fits `g` clusters to raw points (for clustering per-unit parameter
/// estimates rather than outcome means).
pub fn fit_point_clusters(points: &PointSet, g: usize, opts: &KMeansOptions) -> Result<ClusterFit> {
    best_of_restarts(points, g, opts)
}

/// Group means recomputed on a view: row g is the pooled mean over all
/// (unit, period) observations of units assigned to g.
pub fn group_means_on(
    view: &PanelView<'_>,
    assignments: &[usize],
    n_groups: usize,
) -> Result<DMatrix<f64>> {
    if assignments.len() != view.n_units() {
        return Err(Error::DomainError(format!(
            "{} assignments for {} units",
            assignments.len(),
            view.n_units()
        )));
    }
    if let Some(&bad) = assignments.iter().find(|&&g| g >= n_groups) {
        return Err(Error::DomainError(format!("assignment {bad} outside 0..{n_groups}")));
    }
    let d = view.dim();
    let t = view.n_periods();
    let mut sums = DMatrix::<f64>::zeros(n_groups, d);
    let mut counts = vec![0usize; n_groups];
    for (i, &g) in assignments.iter().enumerate() {
        counts[g] += 1;
        for k in 0..t {
            for j in 0..d {
                sums[(g, j)] += view.value(i, k, j);
            }
        }
    }
    for g in 0..n_groups {
        if counts[g] == 0 {
            return Err(Error::EmptyGroupInP { group: g + 1 });
        }
        for j in 0..d {
            sums[(g, j)] /= (counts[g] * t) as f64;
        }
    }
    Ok(sums)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::panel::Panel;
    use rand::Rng;

    fn points_1d(values: &[f64]) -> PointSet {
        PointSet::from_matrix(DMatrix::from_column_slice(values.len(), 1, values)).unwrap()
    }

    #[test]
    fn two_points_two_groups_is_forced() {
        let pts = points_1d(&[0.0, 10.0]);
        let fit = fit_point_clusters(&pts, 2, &KMeansOptions { restarts: 3, ..Default::default() }).unwrap();
        assert_eq!(fit.assignments, vec![0, 1]);
        assert_eq!(fit.means[(0, 0)], 0.0);
        assert_eq!(fit.means[(1, 0)], 10.0);
        assert_eq!(fit.objective, 0.0);
    }

    #[test]
    fn one_group_is_the_grand_mean() {
        let pts = points_1d(&[1.0, 2.0, 6.0]);
        let fit = fit_point_clusters(&pts, 1, &KMeansOptions { restarts: 1, ..Default::default() }).unwrap();
        assert!((fit.means[(0, 0)] - 3.0).abs() < 1e-12);
        let msd = ((1.0_f64 - 3.0).powi(2) + (2.0_f64 - 3.0).powi(2) + (6.0_f64 - 3.0).powi(2)) / 3.0;
        assert!((fit.objective - msd).abs() < 1e-12);
    }

    #[test]
    fn well_separated_pairs() {
        let pts = points_1d(&[0.0, 0.1, 10.0, 10.1]);
        let fit = fit_point_clusters(&pts, 2, &KMeansOptions { restarts: 5, ..Default::default() }).unwrap();
        assert_eq!(fit.assignments, vec![0, 0, 1, 1]);
        assert!((fit.means[(0, 0)] - 0.05).abs() < 1e-12);
        assert!((fit.means[(1, 0)] - 10.05).abs() < 1e-12);
        assert!((fit.objective - 0.0025).abs() < 1e-12);
        assert_eq!(fit.proportions, vec![0.5, 0.5]);
    }

    #[test]
    fn identical_points_cannot_seed_two_groups() {
        let pts = points_1d(&[3.0, 3.0, 3.0]);
        let err = fit_point_clusters(&pts, 2, &KMeansOptions { restarts: 4, ..Default::default() })
            .unwrap_err();
        assert!(matches!(err, Error::TooFewDistinctPoints { distinct: 1, g: 2 }));
    }

    #[test]
    fn empty_cluster_is_reseeded_and_tie_goes_low() {
        // Both points start nearest center 0; the empty cluster restarts at
        // a worst-fitting point and the final fit separates them.
        let pts = points_1d(&[0.0, 2.0]);
        let centers = DMatrix::from_column_slice(2, 1, &[1.0, 5.0]);
        let fit = lloyd(&pts, centers, &KMeansOptions::default());
        assert_eq!(fit.assignments, vec![0, 1]);
        assert_eq!(fit.objective, 0.0);

        // Exact equidistance: the middle point joins the lower group index.
        let pts = points_1d(&[1.0, 0.0, 2.0]);
        let centers = DMatrix::from_column_slice(2, 1, &[0.0, 2.0]);
        let fit = lloyd(&pts, centers, &KMeansOptions::default());
        assert_eq!(fit.assignments, vec![0, 0, 1]);
        assert!((fit.means[(0, 0)] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn reported_objective_is_best_of_restarts() {
        let mut rng = crate::rng::stream(&[99]);
        let coords = DMatrix::from_fn(40, 2, |_, _| rng.gen::<f64>() * 10.0);
        let pts = PointSet::from_matrix(coords).unwrap();
        let opts = KMeansOptions { restarts: 20, seed: 7, ..Default::default() };
        let fit = fit_point_clusters(&pts, 4, &opts).unwrap();
        for r in 0..20u64 {
            let mut seed_rng = restart_stream(7, r);
            let centers = kmeanspp_seed(&pts, 4, &mut seed_rng).unwrap();
            let single = lloyd(&pts, centers, &opts);
            assert!(fit.objective <= single.objective + 1e-12);
        }
        assert_eq!(fit.restarts_used, 20);
    }

    #[test]
    fn deterministic_under_fixed_seed() {
        let mut rng = crate::rng::stream(&[5]);
        let coords = DMatrix::from_fn(30, 3, |_, _| rng.gen::<f64>());
        let pts = PointSet::from_matrix(coords).unwrap();
        let opts = KMeansOptions { restarts: 8, seed: 42, ..Default::default() };
        let a = fit_point_clusters(&pts, 3, &opts).unwrap();
        let b = fit_point_clusters(&pts, 3, &opts).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn panel_objective_matches_direct_criterion() {
        // Brute-force evaluation of the panel criterion at the fitted
        // (means, assignments) must equal the decomposed objective.
        let mut rng = crate::rng::stream(&[17]);
        let n = 10;
        let t = 6;
        let d = 2;
        let values: Vec<f64> = (0..n * t * d).map(|_| rng.gen::<f64>() * 4.0).collect();
        let panel = Panel::from_values(n, t, d, values).unwrap();
        let view = panel.full_view();
        let fit = fit_clusters(&view, 3, &KMeansOptions { restarts: 10, seed: 3, ..Default::default() }).unwrap();
        let mut direct = 0.0;
        for i in 0..n {
            for k in 0..t {
                for j in 0..d {
                    let dev = view.value(i, k, j) - fit.means[(fit.assignments[i], j)];
                    direct += dev * dev;
                }
            }
        }
        direct /= (n * t) as f64;
        assert!((direct - fit.objective).abs() < 1e-10, "direct {direct} vs {}", fit.objective);
    }

    #[test]
    fn canonical_order_is_share_then_first_member() {
        let mut fit = ClusterFit {
            n_groups: 3,
            assignments: vec![2, 1, 1, 0],
            proportions: vec![0.25, 0.5, 0.25],
            means: DMatrix::from_column_slice(3, 1, &[10.0, 20.0, 30.0]),
            objective: 1.0,
            restarts_used: 1,
            iterations: 1,
        };
        fit.canonicalize();
        // Old group 1 (two members) leads; old 2 (first member 0) precedes old 0.
        assert_eq!(fit.assignments, vec![1, 0, 0, 2]);
        assert_eq!(fit.proportions, vec![0.5, 0.25, 0.25]);
        assert_eq!(fit.means.column(0).as_slice(), &[20.0, 30.0, 10.0]);
    }

    #[test]
    fn group_means_pool_over_periods() {
        let p = Panel::from_values(4, 2, 1, vec![1.0, 3.0, 2.0, 2.0, 5.0, 7.0, 6.0, 6.0]).unwrap();
        let view = p.full_view();
        let m = group_means_on(&view, &[0, 0, 1, 1], 2).unwrap();
        assert_eq!(m[(0, 0)], 2.0);
        assert_eq!(m[(1, 0)], 6.0);
        assert!(matches!(
            group_means_on(&view, &[0, 0, 0, 0], 2),
            Err(Error::EmptyGroupInP { group: 2 })
        ));
    }
}
