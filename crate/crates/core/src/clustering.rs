//! Delay-domain clustering of multipath components.
//!
//! One-dimensional K-means over component delays, scored with the mean
//! silhouette coefficient to pick the number of clusters.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Cluster, Mpc, MpcSet};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClusteringConfig {
    pub k_min: usize,
    pub k_max: usize,
    pub max_iterations: usize,
    /// Below this best silhouette the drop is treated as a single cluster.
    pub sc_single_cluster_threshold: f64,
}

impl Default for ClusteringConfig {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: 4,
            max_iterations: 100,
            sc_single_cluster_threshold: 0.6,
        }
    }
}

impl ClusteringConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k_min < 1 || self.k_min > self.k_max {
            return Err(Error::InvalidConfig(format!(
                "need 1 ≤ k_min ≤ k_max, got {}..{}",
                self.k_min, self.k_max
            )));
        }
        if self.max_iterations < 1 {
            return Err(Error::InvalidConfig("max_iterations must be ≥ 1".into()));
        }
        Ok(())
    }
}

/// Cluster label per point; label 0 is the earliest cluster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Assignment {
    pub labels: Vec<usize>,
    pub k: usize,
}

impl Assignment {
    pub fn single(n: usize) -> Self {
        Self {
            labels: vec![0; n],
            k: 1,
        }
    }

    pub fn members(&self, label: usize) -> impl Iterator<Item = usize> + '_ {
        self.labels
            .iter()
            .enumerate()
            .filter(move |&(_, &l)| l == label)
            .map(|(i, _)| i)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub assignment: Assignment,
    pub centroids: Vec<f64>,
    pub sse: f64,
    /// Within-cluster SSE after each Lloyd update.
    pub lloyd_sse: Vec<f64>,
    /// Set when the exact contiguous partition beat the Lloyd fixpoint.
    pub refined: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub clusters: Vec<Cluster>,
    pub chosen_k: usize,
    /// `None` where the score is undefined (k = 1).
    pub silhouette_by_k: BTreeMap<usize, Option<f64>>,
}

/// Sum of squared deviations from each cluster's mean delay.
pub fn within_cluster_sse(delays: &[f64], assignment: &Assignment) -> f64 {
    (0..assignment.k)
        .map(|j| {
            let pts: Vec<f64> = assignment.members(j).map(|i| delays[i]).collect();
            if pts.is_empty() {
                return 0.0;
            }
            let mean = pts.iter().sum::<f64>() / pts.len() as f64;
            pts.iter().map(|x| (x - mean).powi(2)).sum::<f64>()
        })
        .sum()
}

fn nearest(x: f64, centroids: &[f64]) -> usize {
    let mut best = 0;
    for (j, c) in centroids.iter().enumerate().skip(1) {
        let d = (x - c).abs();
        let bd = (x - centroids[best]).abs();
        if d < bd || (d == bd && *c < centroids[best]) {
            best = j;
        }
    }
    best
}

fn farthest_point_seeds(x: &[f64], k: usize) -> Vec<f64> {
    let mut seeds = vec![x[0]];
    while seeds.len() < k {
        let mut best = 0;
        let mut best_d = f64::NEG_INFINITY;
        for (i, &xi) in x.iter().enumerate() {
            let d = seeds
                .iter()
                .map(|s| (xi - s).abs())
                .fold(f64::INFINITY, f64::min);
            if d > best_d {
                best_d = d;
                best = i;
            }
        }
        seeds.push(x[best]);
    }
    seeds.sort_by(f64::total_cmp);
    seeds
}

fn canonical(labels: &[usize], centroids: &[f64]) -> (Assignment, Vec<f64>) {
    let k = centroids.len();
    let mut order: Vec<usize> = (0..k).collect();
    order.sort_by(|&a, &b| centroids[a].total_cmp(&centroids[b]).then(a.cmp(&b)));
    let mut rank = vec![0; k];
    for (r, &j) in order.iter().enumerate() {
        rank[j] = r;
    }
    (
        Assignment {
            labels: labels.iter().map(|&l| rank[l]).collect(),
            k,
        },
        order.iter().map(|&j| centroids[j]).collect(),
    )
}

fn means(x: &[f64], labels: &[usize], k: usize, previous: &[f64]) -> Vec<f64> {
    let mut sum = vec![0.0; k];
    let mut count = vec![0usize; k];
    for (&xi, &l) in x.iter().zip(labels) {
        sum[l] += xi;
        count[l] += 1;
    }
    (0..k)
        .map(|j| {
            if count[j] > 0 {
                sum[j] / count[j] as f64
            } else {
                previous[j]
            }
        })
        .collect()
}

/// Minimum-SSE partition of sorted points into `k` contiguous groups.
///
/// Optimal one-dimensional K-means partitions are contiguous, so dynamic
/// programming over split points finds the global optimum.
pub fn optimal_partition_1d(sorted: &[f64], k: usize) -> Vec<usize> {
    let n = sorted.len();
    debug_assert!(k >= 1 && k <= n);
    let mut s1 = vec![0.0; n + 1];
    let mut s2 = vec![0.0; n + 1];
    // Shift by the first point to limit cancellation in the prefix sums.
    let origin = sorted[0];
    for i in 0..n {
        let v = sorted[i] - origin;
        s1[i + 1] = s1[i] + v;
        s2[i + 1] = s2[i] + v * v;
    }
    let cost = |i: usize, j: usize| {
        let m = (j - i) as f64;
        let a = s1[j] - s1[i];
        (s2[j] - s2[i] - a * a / m).max(0.0)
    };

    let mut best = vec![vec![f64::INFINITY; n + 1]; k + 1];
    let mut split = vec![vec![0usize; n + 1]; k + 1];
    best[0][0] = 0.0;
    for c in 1..=k {
        for j in c..=n {
            for i in (c - 1)..j {
                let v = best[c - 1][i] + cost(i, j);
                if v < best[c][j] {
                    best[c][j] = v;
                    split[c][j] = i;
                }
            }
        }
    }

    let mut labels = vec![0; n];
    let mut j = n;
    for c in (1..=k).rev() {
        let i = split[c][j];
        labels[i..j].fill(c - 1);
        j = i;
    }
    labels
}

/// One-dimensional K-means on component delays.
///
/// Seeds deterministically by farthest-point traversal starting at the
/// earliest component, iterates Lloyd updates to a fixpoint, and reseeds an
/// emptied cluster at the point farthest from its centroid. The fixpoint is
/// then compared with the exact contiguous optimum and replaced when worse.
pub fn kmeans_delay(mpcs: &MpcSet, k: usize, cfg: &ClusteringConfig) -> Result<KMeansFit> {
    let x = mpcs.delays_ns();
    let n = x.len();
    if k == 0 || n < k {
        return Err(Error::TooFewPoints { n, k });
    }

    let mut centroids = farthest_point_seeds(&x, k);
    let mut labels: Vec<usize> = Vec::new();
    let mut lloyd_sse = Vec::new();
    for _ in 0..cfg.max_iterations.max(1) {
        let mut next: Vec<usize> = x.iter().map(|&xi| nearest(xi, &centroids)).collect();

        for j in 0..k {
            if next.contains(&j) {
                continue;
            }
            let mut counts = vec![0usize; k];
            for &l in &next {
                counts[l] += 1;
            }
            let donor = (0..n)
                .filter(|&i| counts[next[i]] > 1)
                .max_by(|&a, &b| {
                    let da = (x[a] - centroids[next[a]]).abs();
                    let db = (x[b] - centroids[next[b]]).abs();
                    da.total_cmp(&db).then(a.cmp(&b))
                });
            if let Some(i) = donor {
                next[i] = j;
                centroids[j] = x[i];
            }
        }

        if next == labels {
            break;
        }
        labels = next;
        centroids = means(&x, &labels, k, &centroids);
        let (a, _) = canonical(&labels, &centroids);
        lloyd_sse.push(within_cluster_sse(&x, &a));
    }

    let (mut assignment, mut centroids) = canonical(&labels, &centroids);
    let mut sse = within_cluster_sse(&x, &assignment);
    let mut refined = false;

    let exact = Assignment {
        labels: optimal_partition_1d(&x, k),
        k,
    };
    let exact_sse = within_cluster_sse(&x, &exact);
    if exact_sse < sse - 1e-9 * sse.max(1.0) {
        centroids = means(&x, &exact.labels, k, &centroids);
        assignment = exact;
        sse = exact_sse;
        refined = true;
    }

    Ok(KMeansFit {
        assignment,
        centroids,
        sse,
        lloyd_sse,
        refined,
    })
}

/// Mean silhouette coefficient using absolute delay distance.
///
/// Undefined (`None`) with fewer than two non-empty clusters. A point alone
/// in its cluster scores 0.
pub fn silhouette(mpcs: &MpcSet, assignment: &Assignment) -> Option<f64> {
    let x = mpcs.delays_ns();
    let n = x.len();
    if n == 0 || assignment.labels.len() != n {
        return None;
    }
    let mut counts = vec![0usize; assignment.k];
    for &l in &assignment.labels {
        counts[l] += 1;
    }
    if counts.iter().filter(|&&c| c > 0).count() < 2 {
        return None;
    }

    let mut total = 0.0;
    for i in 0..n {
        let own = assignment.labels[i];
        if counts[own] == 1 {
            continue;
        }
        let mut dist = vec![0.0; assignment.k];
        for j in 0..n {
            dist[assignment.labels[j]] += (x[i] - x[j]).abs();
        }
        let a = dist[own] / (counts[own] - 1) as f64;
        let b = (0..assignment.k)
            .filter(|&c| c != own && counts[c] > 0)
            .map(|c| dist[c] / counts[c] as f64)
            .fold(f64::INFINITY, f64::min);
        let denom = a.max(b);
        if denom > 0.0 {
            total += (b - a) / denom;
        }
    }
    Some(total / n as f64)
}

/// Picks the cluster count from silhouette scores: the best defined score
/// (smaller k on ties), or 1 when nothing reaches `threshold`.
pub fn choose_k(scores: &BTreeMap<usize, Option<f64>>, threshold: f64) -> usize {
    let mut best: Option<(usize, f64)> = None;
    for (&k, score) in scores {
        if let Some(s) = *score {
            if best.is_none_or(|(_, b)| s > b) {
                best = Some((k, s));
            }
        }
    }
    match best {
        Some((k, s)) if s >= threshold => k,
        _ => 1,
    }
}

fn build_clusters(mpcs: &MpcSet, assignment: &Assignment) -> Vec<Cluster> {
    let rays = mpcs.as_slice();
    let mut clusters: Vec<Cluster> = (0..assignment.k)
        .filter_map(|j| Cluster::new(assignment.members(j).map(|i| rays[i]).collect::<Vec<Mpc>>()))
        .collect();
    clusters.sort_by(|a, b| a.center().delay_ns.total_cmp(&b.center().delay_ns));
    clusters
}

/// Clusters `mpcs` with the silhouette-selected number of clusters.
pub fn select_clusters(mpcs: &MpcSet, cfg: &ClusteringConfig) -> Result<ClusteringResult> {
    cfg.validate()?;
    let n = mpcs.len();
    let mut scores = BTreeMap::new();
    scores.insert(1, None);
    let mut fits = BTreeMap::new();
    if n >= 2 {
        for k in cfg.k_min.max(2)..=cfg.k_max.min(n) {
            let fit = kmeans_delay(mpcs, k, cfg)?;
            scores.insert(k, silhouette(mpcs, &fit.assignment));
            fits.insert(k, fit);
        }
    }

    let chosen = if n < 2 {
        1
    } else {
        choose_k(&scores, cfg.sc_single_cluster_threshold)
    };
    let assignment = match fits.remove(&chosen) {
        Some(fit) => fit.assignment,
        None => Assignment::single(n),
    };
    let clusters = build_clusters(mpcs, &assignment);
    Ok(ClusteringResult {
        chosen_k: clusters.len(),
        clusters,
        silhouette_by_k: scores,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ClusteringConfig {
        ClusteringConfig::default()
    }

    fn groups(fit: &KMeansFit, delays: &[f64]) -> Vec<Vec<f64>> {
        (0..fit.assignment.k)
            .map(|j| fit.assignment.members(j).map(|i| delays[i]).collect())
            .collect()
    }

    #[test]
    fn separates_two_groups() {
        let d = [0.0, 1.0, 2.0, 100.0, 101.0, 102.0];
        let fit = kmeans_delay(&MpcSet::from_delays(&d), 2, &cfg()).unwrap();
        assert_eq!(
            groups(&fit, &d),
            vec![vec![0.0, 1.0, 2.0], vec![100.0, 101.0, 102.0]]
        );
    }

    #[test]
    fn single_cluster_centroid_is_mean() {
        let d = [3.0, 5.0, 10.0];
        let fit = kmeans_delay(&MpcSet::from_delays(&d), 1, &cfg()).unwrap();
        assert_eq!(fit.assignment.labels, vec![0, 0, 0]);
        assert!((fit.centroids[0] - 6.0).abs() < 1e-12);
    }

    #[test]
    fn three_points_two_clusters() {
        // Candidate SSEs: {0}{10,100} = 4050, {0,10}{100} = 50.
        let d = [0.0, 10.0, 100.0];
        let fit = kmeans_delay(&MpcSet::from_delays(&d), 2, &cfg()).unwrap();
        assert_eq!(groups(&fit, &d), vec![vec![0.0, 10.0], vec![100.0]]);
        assert!((fit.sse - 50.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_points() {
        let set = MpcSet::from_delays(&[1.0, 2.0]);
        assert_eq!(
            kmeans_delay(&set, 3, &cfg()),
            Err(Error::TooFewPoints { n: 2, k: 3 })
        );
    }

    #[test]
    fn lloyd_local_optimum_is_refined() {
        // Farthest-point seeding {0, 8, 3} settles at SSE 14/3, the optimum is 4.
        let d = [0.0, 2.0, 3.0, 5.0, 8.0];
        let fit = kmeans_delay(&MpcSet::from_delays(&d), 3, &cfg()).unwrap();
        assert!(fit.refined);
        assert!((fit.sse - 4.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_points_do_not_leave_empty_clusters() {
        let d = [5.0, 5.0, 5.0, 9.0];
        let fit = kmeans_delay(&MpcSet::from_delays(&d), 3, &cfg()).unwrap();
        for j in 0..3 {
            assert!(fit.assignment.members(j).count() > 0);
        }
    }

    #[test]
    fn silhouette_conventions() {
        let set = MpcSet::from_delays(&[0.0, 1.0, 2.0]);
        assert_eq!(silhouette(&set, &Assignment::single(3)), None);

        let pair = MpcSet::from_delays(&[0.0, 1000.0]);
        let a = Assignment {
            labels: vec![0, 1],
            k: 2,
        };
        assert_eq!(silhouette(&pair, &a), Some(0.0));
    }

    #[test]
    fn silhouette_of_tight_pairs() {
        // a = 1 for every point, b = 100 ± 1 and 99.5/100.5 averages.
        let set = MpcSet::from_delays(&[0.0, 1.0, 100.0, 101.0]);
        let a = Assignment {
            labels: vec![0, 0, 1, 1],
            k: 2,
        };
        let s = silhouette(&set, &a).unwrap();
        let by_hand = [
            (100.5 - 1.0) / 100.5,
            (99.5 - 1.0) / 99.5,
            (99.5 - 1.0) / 99.5,
            (100.5 - 1.0) / 100.5,
        ];
        let expected = by_hand.iter().sum::<f64>() / 4.0;
        assert!((s - expected).abs() < 1e-12);
        assert!(s > 0.9);
    }

    #[test]
    fn choose_k_follows_scores() {
        let scores: BTreeMap<usize, Option<f64>> =
            [(1, None), (2, Some(0.78)), (3, Some(0.73)), (4, Some(0.74))].into();
        assert_eq!(choose_k(&scores, 0.6), 2);
        let ties: BTreeMap<usize, Option<f64>> =
            [(1, None), (2, Some(0.7)), (3, Some(0.7))].into();
        assert_eq!(choose_k(&ties, 0.6), 2);
        let weak: BTreeMap<usize, Option<f64>> = [(1, None), (2, Some(0.4))].into();
        assert_eq!(choose_k(&weak, 0.6), 1);
    }

    #[test]
    fn single_mpc_is_one_cluster() {
        let r = select_clusters(&MpcSet::from_delays(&[42.0]), &cfg()).unwrap();
        assert_eq!(r.chosen_k, 1);
        assert_eq!(r.clusters.len(), 1);
        assert_eq!(r.silhouette_by_k.get(&1), Some(&None));
    }

    #[test]
    fn three_groups_with_known_centers() {
        let mut mpcs = Vec::new();
        for (g, base) in [0.0, 200.0, 400.0].iter().enumerate() {
            for (j, off) in [-2.0, -1.0, 0.0, 1.0, 2.0].iter().enumerate() {
                // Strongest ray sits at +1 ns in group 0, at -1 ns otherwise.
                let strongest = if g == 0 { 3 } else { 1 };
                let amp = if j == strongest { 5.0 } else { 1.0 };
                mpcs.push(Mpc::new(base + off, amp));
            }
        }
        let r = select_clusters(&MpcSet::new(mpcs), &cfg()).unwrap();
        assert_eq!(r.chosen_k, 3);
        let centers: Vec<f64> = r.clusters.iter().map(|c| c.center().delay_ns).collect();
        assert_eq!(centers, vec![1.0, 199.0, 399.0]);
    }

    proptest::proptest! {
        #[test]
        fn kmeans_invariants(
            mut delays in proptest::collection::vec(0.0f64..500.0, 1..40),
            k in 1usize..5,
        ) {
            delays.sort_by(f64::total_cmp);
            proptest::prop_assume!(delays.len() >= k);
            let set = MpcSet::from_delays(&delays);
            let a = kmeans_delay(&set, k, &cfg()).unwrap();
            let b = kmeans_delay(&set, k, &cfg()).unwrap();
            proptest::prop_assert_eq!(&a, &b);

            for w in a.lloyd_sse.windows(2) {
                proptest::prop_assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-9);
            }

            // Contiguity: label sequence over sorted delays never decreases.
            for w in a.assignment.labels.windows(2) {
                proptest::prop_assert!(w[0] <= w[1]);
            }

            if let Some(s) = silhouette(&set, &a.assignment) {
                proptest::prop_assert!((-1.0..=1.0).contains(&s));
            }
        }

        #[test]
        fn selection_covers_every_point(
            delays in proptest::collection::vec(0.0f64..500.0, 1..40),
        ) {
            let set = MpcSet::from_delays(&delays);
            let r = select_clusters(&set, &cfg()).unwrap();
            proptest::prop_assert_eq!(r.chosen_k, r.clusters.len());
            let total: usize = r.clusters.iter().map(|c| c.len()).sum();
            proptest::prop_assert_eq!(total, delays.len());
            for w in r.clusters.windows(2) {
                proptest::prop_assert!(w[0].center().delay_ns <= w[1].center().delay_ns);
            }
        }
    }
}
