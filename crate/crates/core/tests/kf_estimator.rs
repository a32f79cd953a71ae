use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use ris_smallscale::estimation::{
    estimate_kf, estimate_kf_from_realizations, fit_gaussian_db, SubbandConfig, KF_SENTINEL_DB,
};
use ris_smallscale::{FrequencyGrid, FrequencySweep};

fn rician<R: Rng>(rng: &mut R, k: f64, n: usize) -> Vec<Complex64> {
    let los = (k / (k + 1.0)).sqrt();
    let s = (0.5 / (k + 1.0)).sqrt();
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(los + s * re, s * im)
        })
        .collect()
}

#[test]
fn rayleigh_realizations_give_vanishing_k() {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let est = estimate_kf_from_realizations(&rician(&mut rng, 0.0, 100_000)).unwrap();
    assert!(est.k_linear < 0.05, "K = {}", est.k_linear);
}

#[test]
fn rician_10db_recovered_from_many_realizations() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let est = estimate_kf_from_realizations(&rician(&mut rng, 10.0, 100_000)).unwrap();
    assert!((est.k_db - 10.0).abs() < 0.3, "K = {} dB", est.k_db);
}

#[test]
fn gaussian_fit_of_known_generator() {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let normal = Normal::new(15.7, 4.6).unwrap();
    let samples: Vec<f64> = (0..10_000).map(|_| normal.sample(&mut rng)).collect();
    let fit = fit_gaussian_db(&samples).unwrap();
    assert!((fit.params.mu_db - 15.7).abs() < 0.15, "{:?}", fit.params);
    assert!((fit.params.sigma_db - 4.6).abs() < 0.15, "{:?}", fit.params);
    assert_eq!(fit.n_used, 10_000);
}

#[test]
fn pure_los_sweep_hits_the_sentinel() {
    let grid = FrequencyGrid::measurement_default();
    let tau = 40e-9;
    let gains = grid
        .frequencies_hz()
        .map(|f| Complex64::from_polar(0.3, -2.0 * std::f64::consts::PI * f * tau))
        .collect();
    let sweep = FrequencySweep::new(grid, gains, Default::default()).unwrap();
    let est = estimate_kf(&sweep, &SubbandConfig::default()).unwrap();
    assert!(est.k_db > KF_SENTINEL_DB, "K = {} dB", est.k_db);
}
