use num_complex::Complex64;
use proptest::prelude::*;

use ris_smallscale::clustering::{
    kmeans_delay, optimal_partition_1d, select_clusters, silhouette, within_cluster_sse, Assignment,
    ClusteringConfig,
};
use ris_smallscale::dsp::{ctf_to_cir, hann_window};
use ris_smallscale::estimation::{k_factor_from_moment_ratio, rms_delay_spread_of};
use ris_smallscale::synthesis::cir_to_ctf;
use ris_smallscale::{FrequencyGrid, FrequencySweep, Mpc, MpcSet};

fn delays() -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.0f64..800.0, 3..30)
}

proptest! {
    #[test]
    fn silhouette_is_bounded(d in delays(), k in 2usize..5) {
        let mpcs = MpcSet::from_delays(&d);
        prop_assume!(mpcs.len() >= k);
        let fit = kmeans_delay(&mpcs, k, &ClusteringConfig::default()).unwrap();
        if let Some(s) = silhouette(&mpcs, &fit.assignment) {
            prop_assert!((-1.0..=1.0).contains(&s));
        }
    }

    #[test]
    fn kmeans_matches_exact_partition(d in delays(), k in 1usize..5) {
        let mpcs = MpcSet::from_delays(&d);
        prop_assume!(mpcs.len() >= k);
        let fit = kmeans_delay(&mpcs, k, &ClusteringConfig::default()).unwrap();
        let sorted = mpcs.delays_ns();
        let labels = optimal_partition_1d(&sorted, k);
        let exact = within_cluster_sse(&sorted, &Assignment { labels, k });
        prop_assert!(fit.sse <= exact * (1.0 + 1e-12) + 1e-9);
        for pair in fit.lloyd_sse.windows(2) {
            prop_assert!(pair[1] <= pair[0] * (1.0 + 1e-12) + 1e-9);
        }
        if let Some(last) = fit.lloyd_sse.last() {
            prop_assert!(fit.sse <= last * (1.0 + 1e-12) + 1e-9);
        }
    }

    #[test]
    fn selection_partitions_every_ray(d in delays()) {
        let mpcs = MpcSet::from_delays(&d);
        let result = select_clusters(&mpcs, &ClusteringConfig::default()).unwrap();
        prop_assert_eq!(result.clusters.len(), result.chosen_k);
        let total: usize = result.clusters.iter().map(|c| c.len()).sum();
        prop_assert_eq!(total, mpcs.len());
        for pair in result.clusters.windows(2) {
            let end = pair[0].rays().last().unwrap().delay_ns;
            prop_assert!(end <= pair[1].rays()[0].delay_ns);
        }
    }

    #[test]
    fn delay_spread_is_shift_invariant(
        rays in prop::collection::vec((0.0f64..100.0, 0.01f64..1.0), 1..20),
        shift in -100.0f64..100.0,
    ) {
        let a: Vec<Mpc> = rays.iter().map(|&(d, g)| Mpc::new(d, g)).collect();
        let b: Vec<Mpc> = rays.iter().map(|&(d, g)| Mpc::new(d + shift, g)).collect();
        let (ra, rb) = (rms_delay_spread_of(&a), rms_delay_spread_of(&b));
        prop_assert!(ra >= 0.0);
        prop_assert!((ra - rb).abs() <= 1e-9 * ra.max(1.0));
    }

    #[test]
    fn k_factor_decreases_with_ratio(a in 0.001f64..0.999, b in 0.001f64..0.999) {
        prop_assume!(a < b);
        prop_assert!(k_factor_from_moment_ratio(a) > k_factor_from_moment_ratio(b));
    }

    #[test]
    fn transform_pair_inverts(
        parts in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 191),
        pad in 1usize..5,
    ) {
        let grid = FrequencyGrid::measurement_default();
        let gains: Vec<Complex64> = parts.iter().map(|&(r, i)| Complex64::new(r, i)).collect();
        let sweep = FrequencySweep::new(grid, gains, Default::default()).unwrap();
        let cir = ctf_to_cir(&sweep, pad).unwrap();
        let back = cir_to_ctf(&cir, &grid).unwrap();
        let w = hann_window(191);
        for ((x, g), wk) in back.gains().iter().zip(sweep.gains()).zip(&w) {
            prop_assert!((x - g * wk).norm() <= 1e-9);
        }
    }
}
