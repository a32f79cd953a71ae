//! Distributional checks of the drop generator against closed-form values.

use std::f64::consts::LN_10;

use statrs::distribution::{ChiSquared, ContinuousCDF, Discrete, DiscreteCDF, Poisson};

use ris_smallscale::clustering::ClusteringResult;
use ris_smallscale::estimation::inter_cluster_stats;
use ris_smallscale::presets::load_preset;
use ris_smallscale::synthesis::{draw_structure, drop_rng, GroundTruth, RayFading, RaySide, SynthesisConfig};
use ris_smallscale::{Cluster, Mode, Mpc, Scenario, ScenarioParams};

const N: usize = 20_000;

fn outdoor() -> ScenarioParams {
    load_preset(Scenario::Outdoor, Mode::Irwr).unwrap()
}

fn draws(params: &ScenarioParams, cfg: &SynthesisConfig) -> Vec<GroundTruth> {
    (0..N)
        .map(|i| draw_structure(params, cfg, &mut drop_rng(cfg.seed, i)).unwrap())
        .collect()
}

fn mean_sd(x: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let m = x.iter().sum::<f64>() / n;
    let v = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, v.sqrt())
}

#[test]
fn cluster_count_matches_truncated_poisson() {
    let params = outdoor();
    let cfg = SynthesisConfig::default();
    let counts: Vec<f64> = draws(&params, &cfg).iter().map(|t| t.clusters.len() as f64).collect();
    let pois = Poisson::new(params.inter.unwrap().avg_num_clusters - 1.0).unwrap();
    let cap = cfg.cluster_truncation as u64;
    let expected: f64 = (0..cap - 1).map(|j| (1 + j) as f64 * pois.pmf(j)).sum::<f64>()
        + cap as f64 * (1.0 - (0..cap - 1).map(|j| pois.pmf(j)).sum::<f64>());
    let (m, sd) = mean_sd(&counts);
    assert!((m - expected).abs() < 3.0 * sd / (N as f64).sqrt(), "{m} vs {expected}");
}

#[test]
fn cluster_gaps_are_exponential_with_table_mean() {
    let params = outdoor();
    let gaps: Vec<f64> = draws(&params, &SynthesisConfig::default())
        .iter()
        .flat_map(|t| t.clusters.windows(2).map(|w| w[1].delay_ns - w[0].delay_ns).collect::<Vec<_>>())
        .collect();
    let mean = params.inter.unwrap().mean_cluster_arrival_time_ns;
    let (m, _) = mean_sd(&gaps);
    // Exponential: standard deviation equals the mean.
    assert!((m - mean).abs() < 3.0 * mean / (gaps.len() as f64).sqrt(), "{m} vs {mean}");
}

#[test]
fn pre_cursor_counts_are_poisson_over_the_window() {
    let params = outdoor();
    let cfg = SynthesisConfig::default();
    let pre = params.intra.unwrap().pre;
    let window = pre.power_decay_time_ns * cfg.ray_truncation_db / 20.0 * LN_10;
    let pois = Poisson::new(pre.arrival_rate_per_ns * window).unwrap();

    let counts: Vec<u64> = draws(&params, &cfg)
        .iter()
        .map(|t| t.clusters[0].rays.iter().filter(|r| r.side == RaySide::Pre).count() as u64)
        .collect();
    // Singleton bins, then one tail bin holding at least 20 expected draws.
    let n = counts.len() as f64;
    let tail = |j: u64| if j == 0 { 1.0 } else { 1.0 - pois.cdf(j - 1) };
    let mut last = 0;
    while n * tail(last + 1) >= 20.0 {
        last += 1;
    }
    let mut stat = 0.0;
    for j in 0..=last {
        let (observed, p) = if j < last {
            (counts.iter().filter(|&&c| c == j).count(), pois.pmf(j))
        } else {
            (counts.iter().filter(|&&c| c >= j).count(), tail(j))
        };
        stat += (observed as f64 - n * p).powi(2) / (n * p);
    }
    let bins = last + 1;
    let p_value = 1.0 - ChiSquared::new((bins - 1) as f64).unwrap().cdf(stat);
    assert!(p_value > 1e-3, "chi2 {stat} over {bins} bins, p = {p_value}");
}

#[test]
fn first_post_gap_follows_truncated_exponential() {
    let params = outdoor();
    let cfg = SynthesisConfig::default();
    let post = params.intra.unwrap().post;
    let window = post.power_decay_time_ns * cfg.ray_truncation_db / 20.0 * LN_10;
    let lambda = post.arrival_rate_per_ns;

    let mut first: Vec<f64> = draws(&params, &cfg)
        .iter()
        .filter_map(|t| {
            t.clusters[0]
                .rays
                .iter()
                .find(|r| r.side == RaySide::Post)
                .map(|r| r.rel_delay_ns)
        })
        .collect();
    first.sort_by(f64::total_cmp);
    let norm = 1.0 - (-lambda * window).exp();
    let cdf = |x: f64| (1.0 - (-lambda * x).exp()) / norm;
    let n = first.len() as f64;
    let d = first
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let f = cdf(x);
            (f - i as f64 / n).abs().max(((i + 1) as f64 / n - f).abs())
        })
        .fold(0.0, f64::max);
    assert!(d < 1.36 / n.sqrt(), "KS D = {d}, n = {n}");
}

#[test]
fn drawn_k_factor_has_table_mean() {
    let params = outdoor();
    let k: Vec<f64> = draws(&params, &SynthesisConfig::default()).iter().map(|t| t.k_db).collect();
    let (m, _) = mean_sd(&k);
    assert!((m - params.kf.mu_db).abs() < 3.0 * params.kf.sigma_db / (N as f64).sqrt(), "{m}");
}

#[test]
fn cluster_decay_recovered_from_true_centers() {
    let params = outdoor();
    let cfg = SynthesisConfig {
        fading: RayFading::Disabled,
        ..Default::default()
    };
    let results: Vec<ClusteringResult> = draws(&params, &cfg)
        .iter()
        .take(2000)
        .map(|t| {
            let clusters: Vec<Cluster> = t
                .clusters
                .iter()
                .map(|c| Cluster::new(vec![Mpc::new(c.delay_ns, c.envelope)]).unwrap())
                .collect();
            ClusteringResult {
                chosen_k: clusters.len(),
                clusters,
                silhouette_by_k: Default::default(),
            }
        })
        .collect();
    let stats = inter_cluster_stats(&results).unwrap();
    let want = params.inter.unwrap().cluster_power_decay_per_ns;
    assert!(
        ((stats.cluster_power_decay_per_ns - want) / want).abs() < 0.05,
        "{} vs {want}",
        stats.cluster_power_decay_per_ns
    );
}
