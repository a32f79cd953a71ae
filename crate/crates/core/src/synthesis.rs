//! Stochastic drop generation from a parameter set.
//!
//! Each drop is a Rician split between an unfaded virtual LOS tap and a
//! cluster-structured diffuse part. Cluster 1 is centred on the LOS delay
//! and the LOS ray is its center; later clusters arrive as a Poisson process
//! and carry their own center ray. Every cluster has pre- and post-cursor
//! rays with exponential envelopes anchored at the center amplitude.

use std::f64::consts::{LN_10, PI};

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Exp, Normal, Poisson, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ensemble::{Drop, DropEnsemble};
use crate::error::{Error, Result};
use crate::model::{
    CursorParams, FrequencyGrid, FrequencySweep, ImpulseResponse, ScenarioParams, SweepLabel,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RayFading {
    /// Unit-mean Rayleigh magnitude with uniform phase around the envelope.
    Rayleigh,
    /// Magnitude equal to the envelope; phase still uniform.
    Disabled,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SynthesisConfig {
    pub seed: u64,
    pub n_drops: usize,
    /// Cursor rays stop where the envelope falls this far below the center.
    pub ray_truncation_db: f64,
    pub cluster_truncation: usize,
    pub output_grid: FrequencyGrid,
    /// Fine delay grid used for tap placement, as a divisor of the native bin.
    pub delay_oversample: usize,
    pub fading: RayFading,
    pub parallel: bool,
}

impl Default for SynthesisConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            n_drops: 1,
            ray_truncation_db: 30.0,
            cluster_truncation: 4,
            output_grid: FrequencyGrid::measurement_default(),
            delay_oversample: 64,
            fading: RayFading::Rayleigh,
            parallel: true,
        }
    }
}

impl SynthesisConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n_drops < 1 {
            return Err(Error::InvalidConfig("n_drops must be ≥ 1".into()));
        }
        if !(self.ray_truncation_db > 0.0) || self.cluster_truncation < 1 {
            return Err(Error::InvalidConfig("truncation must be positive".into()));
        }
        if self.delay_oversample < 1 {
            return Err(Error::InvalidConfig("delay_oversample must be ≥ 1".into()));
        }
        Ok(())
    }

    pub fn delay_step_ns(&self) -> f64 {
        self.output_grid.native_delay_step_ns() / self.delay_oversample as f64
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RaySide {
    Pre,
    Center,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RayDraw {
    pub side: RaySide,
    /// Offset from the cluster center.
    pub rel_delay_ns: f64,
    pub envelope: f64,
    /// Envelope times the small-scale fading draw, before power normalization.
    pub gain: Complex64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterDraw {
    pub delay_ns: f64,
    /// Center amplitude relative to cluster 1.
    pub envelope: f64,
    pub rays: Vec<RayDraw>,
}

/// Everything drawn for one drop; re-assembling it reproduces the drop's
/// impulse response exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    #[serde(with = "crate::serde_f64")]
    pub k_db: f64,
    pub los_delay_ns: f64,
    pub clusters: Vec<ClusterDraw>,
    /// Components independent of the surface. Never drawn; added to the
    /// impulse response unscaled when present.
    #[serde(default)]
    pub inherent_nlos: Vec<(f64, Complex64)>,
}

impl GroundTruth {
    pub fn k_linear(&self) -> f64 {
        10f64.powf(self.k_db / 10.0)
    }

    pub fn n_rays(&self) -> usize {
        self.clusters.iter().map(|c| c.rays.len()).sum()
    }
}

/// Independent, reproducible stream for drop `index`.
pub fn drop_rng(seed: u64, index: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}

fn fading_gain<R: Rng + ?Sized>(envelope: f64, fading: RayFading, rng: &mut R) -> Complex64 {
    match fading {
        RayFading::Rayleigh => {
            // Complex Gaussian whose magnitude has unit mean.
            let s = (2.0 / PI).sqrt();
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            envelope * s * Complex64::new(re, im)
        }
        RayFading::Disabled => {
            Complex64::from_polar(envelope, rng.random_range(0.0..2.0 * PI))
        }
    }
}

fn exp_dist(rate: f64, what: &str) -> Result<Exp<f64>> {
    Exp::new(rate).map_err(|_| Error::InvalidConfig(format!("{what} rate {rate} is not positive")))
}

fn draw_cursor<R: Rng + ?Sized>(
    cursor: &CursorParams,
    side: RaySide,
    anchor: f64,
    cfg: &SynthesisConfig,
    rng: &mut R,
    out: &mut Vec<RayDraw>,
) -> Result<()> {
    let gamma = cursor.power_decay_time_ns;
    let window = gamma * cfg.ray_truncation_db / 20.0 * LN_10;
    let gaps = exp_dist(cursor.arrival_rate_per_ns, "cursor arrival")?;
    let mut x = 0.0;
    loop {
        x += gaps.sample(rng);
        if x > window {
            return Ok(());
        }
        let envelope = anchor * (-x / gamma).exp();
        out.push(RayDraw {
            side,
            rel_delay_ns: if side == RaySide::Pre { -x } else { x },
            envelope,
            gain: fading_gain(envelope, cfg.fading, rng),
        });
    }
}

/// Draws K, the cluster layout and every ray for one drop.
pub fn draw_structure<R: Rng + ?Sized>(
    params: &ScenarioParams,
    cfg: &SynthesisConfig,
    rng: &mut R,
) -> Result<GroundTruth> {
    let (Some(inter), Some(intra)) = (&params.inter, &params.intra) else {
        return Err(Error::MissingClusterModel(params.key()));
    };
    let k_db = Normal::new(params.kf.mu_db, params.kf.sigma_db)
        .map_err(|e| Error::InvalidConfig(format!("K-factor distribution: {e}")))?
        .sample(rng);

    let extra = inter.avg_num_clusters - 1.0;
    let drawn = if extra > 0.0 {
        Poisson::new(extra)
            .map_err(|e| Error::InvalidConfig(format!("cluster count: {e}")))?
            .sample(rng) as usize
    } else {
        0
    };
    let n_clusters = (1 + drawn).min(cfg.cluster_truncation);

    let arrivals = exp_dist(1.0 / inter.mean_cluster_arrival_time_ns, "cluster arrival")?;
    let mut delays = vec![params.los_delay_ns];
    for _ in 1..n_clusters {
        let last = delays[delays.len() - 1];
        delays.push(last + arrivals.sample(rng));
    }

    let mut clusters = Vec::with_capacity(n_clusters);
    for (m, &delay_ns) in delays.iter().enumerate() {
        let envelope = (-inter.cluster_power_decay_per_ns * (delay_ns - delays[0]) / 2.0).exp();
        let mut rays = Vec::new();
        if m > 0 {
            rays.push(RayDraw {
                side: RaySide::Center,
                rel_delay_ns: 0.0,
                envelope,
                gain: fading_gain(envelope, cfg.fading, rng),
            });
        }
        draw_cursor(&intra.pre, RaySide::Pre, envelope, cfg, rng, &mut rays)?;
        draw_cursor(&intra.post, RaySide::Post, envelope, cfg, rng, &mut rays)?;
        clusters.push(ClusterDraw {
            delay_ns,
            envelope,
            rays,
        });
    }

    Ok(GroundTruth {
        k_db,
        los_delay_ns: params.los_delay_ns,
        clusters,
        inherent_nlos: Vec::new(),
    })
}

/// Places the drawn rays on the fine delay grid and applies the power split.
///
/// Diffuse rays are snapped to the nearest bin; one landing on the LOS bin
/// moves to its neighbour on the side it came from. Rays outside the
/// unambiguous span are dropped. The diffuse taps are then scaled to total
/// power `1 / (K + 1)` and the LOS tap set to `sqrt(K / (K + 1))`.
pub fn assemble_cir(truth: &GroundTruth, cfg: &SynthesisConfig) -> Result<ImpulseResponse> {
    let step = cfg.delay_step_ns();
    let n_taps = cfg.output_grid.n_points() * cfg.delay_oversample;
    let span = cfg.output_grid.unambiguous_span_ns();
    let los_bin = (truth.los_delay_ns / step).round();
    if !(los_bin >= 0.0 && (los_bin as usize) < n_taps) {
        return Err(Error::DelayOutOfRange {
            delay_ns: truth.los_delay_ns,
            span_ns: span,
        });
    }
    let los_bin = los_bin as usize;

    let mut diffuse = vec![Complex64::new(0.0, 0.0); n_taps];
    for cluster in &truth.clusters {
        for ray in &cluster.rays {
            let bin = ((cluster.delay_ns + ray.rel_delay_ns) / step).round();
            if !(bin >= 0.0 && bin < n_taps as f64) {
                continue;
            }
            let mut bin = bin as usize;
            if bin == los_bin {
                if ray.side == RaySide::Pre {
                    if bin == 0 {
                        continue;
                    }
                    bin -= 1;
                } else {
                    bin += 1;
                    if bin == n_taps {
                        continue;
                    }
                }
            }
            diffuse[bin] += ray.gain;
        }
    }

    let diffuse_power: f64 = diffuse.iter().map(|h| h.norm_sqr()).sum();
    let k = truth.k_linear();
    let mut taps = if k.is_infinite() || diffuse_power == 0.0 {
        let mut taps = vec![Complex64::new(0.0, 0.0); n_taps];
        taps[los_bin] = Complex64::new(1.0, 0.0);
        taps
    } else {
        let scale = (1.0 / ((k + 1.0) * diffuse_power)).sqrt();
        for h in &mut diffuse {
            *h *= scale;
        }
        diffuse[los_bin] = Complex64::new((k / (k + 1.0)).sqrt(), 0.0);
        diffuse
    };

    for &(delay_ns, gain) in &truth.inherent_nlos {
        let bin = (delay_ns / step).round();
        if !(bin >= 0.0 && bin < n_taps as f64) {
            return Err(Error::DelayOutOfRange {
                delay_ns,
                span_ns: span,
            });
        }
        taps[bin as usize] += gain;
    }
    ImpulseResponse::new(step, 0.0, taps)
}

/// Exact forward model `H[k] = sum h exp(-j 2 pi f_k tau)`, no window.
pub fn cir_to_ctf(cir: &ImpulseResponse, grid: &FrequencyGrid) -> Result<FrequencySweep> {
    let span = grid.unambiguous_span_ns();
    let freqs: Vec<f64> = grid.frequencies_hz().collect();
    let mut gains = vec![Complex64::new(0.0, 0.0); grid.n_points()];
    for (i, h) in cir.taps().iter().enumerate() {
        if h.norm_sqr() == 0.0 {
            continue;
        }
        let delay_ns = cir.delay_ns(i);
        if !(delay_ns >= 0.0 && delay_ns < span) {
            return Err(Error::DelayOutOfRange {
                delay_ns,
                span_ns: span,
            });
        }
        let tau = delay_ns * 1e-9;
        for (g, f) in gains.iter_mut().zip(&freqs) {
            *g += h * Complex64::from_polar(1.0, -2.0 * PI * f * tau);
        }
    }
    FrequencySweep::new(*grid, gains, SweepLabel::default())
}

pub fn synthesize_drop(params: &ScenarioParams, cfg: &SynthesisConfig, index: usize) -> Result<Drop> {
    let mut rng = drop_rng(cfg.seed, index);
    let truth = draw_structure(params, cfg, &mut rng)?;
    let cir = assemble_cir(&truth, cfg)?;
    let label = SweepLabel {
        scenario: Some(params.scenario),
        mode: Some(params.mode),
        position: Some(format!("drop{index:05}")),
    };
    let mut ctf = cir_to_ctf(&cir, &cfg.output_grid)?;
    ctf.label = label.clone();
    Ok(Drop {
        label,
        ctf,
        cir,
        ground_truth: Some(truth),
    })
}

/// `cfg.n_drops` drops; drop `i` depends only on `(seed, i)`, so serial and
/// parallel generation agree bit for bit.
pub fn synthesize_ensemble(params: &ScenarioParams, cfg: &SynthesisConfig) -> Result<DropEnsemble> {
    cfg.validate()?;
    if !params.has_cluster_model() {
        return Err(Error::MissingClusterModel(params.key()));
    }
    let drops = if cfg.parallel {
        (0..cfg.n_drops)
            .into_par_iter()
            .map(|i| synthesize_drop(params, cfg, i))
            .collect::<Result<Vec<_>>>()?
    } else {
        (0..cfg.n_drops)
            .map(|i| synthesize_drop(params, cfg, i))
            .collect::<Result<Vec<_>>>()?
    };
    Ok(DropEnsemble {
        scenario: Some(params.scenario),
        mode: Some(params.mode),
        drops,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dsp::ctf_to_cir;
    use crate::model::{Mode, Scenario};
    use crate::presets::load_preset;

    fn outdoor() -> ScenarioParams {
        load_preset(Scenario::Outdoor, Mode::Irwr).unwrap()
    }

    fn los_only(k_db: f64) -> GroundTruth {
        GroundTruth {
            k_db,
            los_delay_ns: 76.0,
            clusters: Vec::new(),
            inherent_nlos: Vec::new(),
        }
    }

    #[test]
    fn infinite_k_gives_single_los_tap() {
        let mut truth = los_only(f64::INFINITY);
        truth.clusters.push(ClusterDraw {
            delay_ns: 76.0,
            envelope: 1.0,
            rays: vec![RayDraw {
                side: RaySide::Post,
                rel_delay_ns: 3.0,
                envelope: 0.5,
                gain: Complex64::new(0.5, 0.0),
            }],
        });
        let cir = assemble_cir(&truth, &SynthesisConfig::default()).unwrap();
        let nonzero: Vec<_> = cir.taps().iter().filter(|h| h.norm_sqr() > 0.0).collect();
        assert_eq!(nonzero, vec![&Complex64::new(1.0, 0.0)]);
    }

    #[test]
    fn zero_db_splits_power_evenly() {
        let mut rng = drop_rng(3, 0);
        let mut p = outdoor();
        p.kf.mu_db = 0.0;
        p.kf.sigma_db = 0.0;
        let cfg = SynthesisConfig::default();
        let truth = draw_structure(&p, &cfg, &mut rng).unwrap();
        assert_eq!(truth.k_db, 0.0);
        let cir = assemble_cir(&truth, &cfg).unwrap();
        let los_bin = (truth.los_delay_ns / cir.delay_step_ns()).round() as usize;
        let los = cir.taps()[los_bin].norm_sqr();
        assert!((los - 0.5).abs() < 1e-12);
        assert!((cir.total_power() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn drops_have_unit_power_and_exact_split() {
        let cfg = SynthesisConfig {
            seed: 11,
            n_drops: 50,
            ..Default::default()
        };
        let ens = synthesize_ensemble(&outdoor(), &cfg).unwrap();
        for d in &ens.drops {
            let truth = d.ground_truth.as_ref().unwrap();
            assert!((d.cir.total_power() - 1.0).abs() < 1e-12);
            let los_bin = (truth.los_delay_ns / d.cir.delay_step_ns()).round() as usize;
            let los = d.cir.taps()[los_bin].norm_sqr();
            let ratio = los / (d.cir.total_power() - los);
            let k = truth.k_linear();
            assert!(((ratio - k) / k).abs() < 1e-10);
        }
    }

    #[test]
    fn reassembly_reproduces_the_drop() {
        let cfg = SynthesisConfig::default();
        let d = synthesize_drop(&outdoor(), &cfg, 7).unwrap();
        let again = assemble_cir(d.ground_truth.as_ref().unwrap(), &cfg).unwrap();
        assert_eq!(again, d.cir);
    }

    #[test]
    fn degenerate_sigma_fixes_k() {
        let mut p = outdoor();
        p.kf.sigma_db = 0.0;
        let cfg = SynthesisConfig {
            n_drops: 20,
            ..Default::default()
        };
        let ens = synthesize_ensemble(&p, &cfg).unwrap();
        assert!(ens
            .drops
            .iter()
            .all(|d| d.ground_truth.as_ref().unwrap().k_db == 15.7));
    }

    #[test]
    fn kf_only_preset_is_rejected() {
        let p = load_preset(Scenario::Outdoor, Mode::Wr).unwrap();
        assert!(matches!(
            synthesize_ensemble(&p, &SynthesisConfig::default()),
            Err(Error::MissingClusterModel(_))
        ));
    }

    #[test]
    fn same_seed_same_ensemble_and_new_seed_differs() {
        let cfg = SynthesisConfig {
            seed: 5,
            n_drops: 8,
            ..Default::default()
        };
        let a = synthesize_ensemble(&outdoor(), &cfg).unwrap();
        let b = synthesize_ensemble(
            &outdoor(),
            &SynthesisConfig {
                parallel: false,
                ..cfg
            },
        )
        .unwrap();
        assert_eq!(a, b);
        let c = synthesize_ensemble(&outdoor(), &SynthesisConfig { seed: 6, ..cfg }).unwrap();
        assert_ne!(a.drops[0], c.drops[0]);
    }

    #[test]
    fn unit_tap_at_zero_is_flat() {
        let grid = FrequencyGrid::measurement_default();
        let mut taps = vec![Complex64::new(0.0, 0.0); 10];
        taps[0] = Complex64::new(1.0, 0.0);
        let ctf = cir_to_ctf(&ImpulseResponse::new(1.0, 0.0, taps).unwrap(), &grid).unwrap();
        assert!(ctf
            .gains()
            .iter()
            .all(|g| (g - Complex64::new(1.0, 0.0)).norm() < 1e-15));
    }

    #[test]
    fn tap_at_100ns_has_linear_phase() {
        let grid = FrequencyGrid::measurement_default();
        let mut taps = vec![Complex64::new(0.0, 0.0); 101];
        taps[100] = Complex64::new(1.0, 0.0);
        let ctf = cir_to_ctf(&ImpulseResponse::new(1.0, 0.0, taps).unwrap(), &grid).unwrap();
        for (k, g) in ctf.gains().iter().enumerate() {
            let want = Complex64::from_polar(1.0, -2.0 * PI * grid.frequency_hz(k) * 100e-9);
            assert!((g - want).norm() < 1e-9);
        }
    }

    #[test]
    fn taps_beyond_the_span_are_rejected() {
        let grid = FrequencyGrid::measurement_default();
        let cir = ImpulseResponse::new(1000.0, 0.0, vec![Complex64::new(0.0, 0.0), Complex64::new(1.0, 0.0)])
            .unwrap();
        assert!(matches!(
            cir_to_ctf(&cir, &grid),
            Err(Error::DelayOutOfRange { .. })
        ));
    }

    #[test]
    fn forward_transform_inverts_the_windowed_inverse() {
        let grid = FrequencyGrid::measurement_default();
        let d = synthesize_drop(&outdoor(), &SynthesisConfig::default(), 2).unwrap();
        let w = crate::dsp::hann_window(grid.n_points());
        for pad in [1, 4] {
            let back = cir_to_ctf(&ctf_to_cir(&d.ctf, pad).unwrap(), &grid).unwrap();
            let scale = d.ctf.gains().iter().map(|g| g.norm()).fold(0.0, f64::max);
            for ((b, h), wk) in back.gains().iter().zip(d.ctf.gains()).zip(&w) {
                assert!((b - h * wk).norm() <= 1e-9 * scale);
            }
        }
    }

    #[test]
    fn rays_never_share_the_los_bin() {
        let cfg = SynthesisConfig {
            seed: 1,
            n_drops: 30,
            fading: RayFading::Disabled,
            ..Default::default()
        };
        let ens = synthesize_ensemble(&outdoor(), &cfg).unwrap();
        for d in &ens.drops {
            let truth = d.ground_truth.as_ref().unwrap();
            let k = truth.k_linear();
            let los_bin = (truth.los_delay_ns / d.cir.delay_step_ns()).round() as usize;
            let want = (k / (k + 1.0)).sqrt();
            assert!((d.cir.taps()[los_bin].re - want).abs() < 1e-12);
        }
    }
}
