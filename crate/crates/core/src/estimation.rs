//! Small-scale parameter estimation: the moment-based Rician K-factor over
//! narrowband subbands, inter-cluster arrival and decay statistics, and the
//! intra-cluster cursor envelopes and delay spread.

use std::collections::BTreeMap;
use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::{select_clusters, ClusteringConfig, ClusteringResult};
use crate::dsp::{ctf_to_cir, detect_cir_mpcs, DetectionConfig};
use crate::ensemble::{Drop, DropEnsemble};
use crate::error::{Error, Result};
use crate::model::{
    Cluster, CursorParams, FrequencySweep, GlobalKfParams, InterClusterParams,
    IntraClusterParams, Mpc, ScenarioParams,
};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SubbandConfig {
    pub n_subbands: usize,
    pub subband_width_hz: f64,
}

impl Default for SubbandConfig {
    fn default() -> Self {
        Self {
            n_subbands: 19,
            subband_width_hz: 10e6,
        }
    }
}

impl SubbandConfig {
    /// Grid points per subband; errors when the grid cannot hold the
    /// requested partition.
    pub fn points_per_subband(&self, ctf: &FrequencySweep) -> Result<usize> {
        let grid = ctf.grid();
        let per = (self.subband_width_hz / grid.spacing_hz()).round();
        if !(per >= 1.0) || self.n_subbands < 2 {
            return Err(Error::InvalidConfig(format!(
                "{} subbands of {} Hz on a {} Hz grid",
                self.n_subbands,
                self.subband_width_hz,
                grid.spacing_hz()
            )));
        }
        let per = per as usize;
        if self.n_subbands * per > grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} subbands of {} points exceed the {}-point grid",
                self.n_subbands,
                per,
                grid.n_points()
            )));
        }
        Ok(per)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KfEstimate {
    pub moment_ratio: f64,
    #[serde(with = "crate::serde_f64")]
    pub k_linear: f64,
    #[serde(with = "crate::serde_f64")]
    pub k_db: f64,
    pub n_realizations: usize,
}

/// `Var[|g|^2] / E[|g|^2]^2` over the realizations, using the unbiased
/// sample variance and the squared sample mean.
pub fn moment_ratio(realizations: &[Complex64]) -> Result<f64> {
    let n = realizations.len();
    if n < 2 {
        return Err(Error::TooFewSamples { needed: 2, got: n });
    }
    let p: Vec<f64> = realizations.iter().map(|g| g.norm_sqr()).collect();
    let nf = n as f64;
    let mean = p.iter().sum::<f64>() / nf;
    if !(mean > 0.0) {
        return Err(Error::EmptyResult);
    }
    let var = p.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (nf - 1.0);
    Ok(var / (mean * mean))
}

/// Rician K from the moment ratio, `sqrt(1-g) / (1 - sqrt(1-g))`.
pub fn k_factor_from_moment_ratio(ratio: f64) -> f64 {
    if ratio >= 1.0 {
        return 0.0;
    }
    if ratio <= 0.0 {
        return f64::INFINITY;
    }
    let r = (1.0 - ratio).sqrt();
    r / (1.0 - r)
}

pub fn estimate_kf_from_realizations(realizations: &[Complex64]) -> Result<KfEstimate> {
    let ratio = moment_ratio(realizations)?;
    let k = k_factor_from_moment_ratio(ratio);
    Ok(KfEstimate {
        moment_ratio: ratio,
        k_linear: k,
        k_db: 10.0 * k.log10(),
        n_realizations: realizations.len(),
    })
}

/// One narrowband realization per subband: the mean complex gain over its
/// points, trailing points beyond the partition dropped.
///
/// The sweep is first delay-aligned to its strongest impulse-response tap.
/// Without that, the linear phase of a path tens of nanoseconds out rotates
/// through a large part of a turn inside one subband and the complex mean
/// cancels it.
pub fn subband_realizations(ctf: &FrequencySweep, cfg: &SubbandConfig) -> Result<Vec<Complex64>> {
    let per = cfg.points_per_subband(ctf)?;
    let cir = ctf_to_cir(ctf, 4)?;
    let peak = cir
        .taps()
        .iter()
        .enumerate()
        .fold((0, -1.0), |best, (i, h)| {
            let p = h.norm_sqr();
            if p > best.1 {
                (i, p)
            } else {
                best
            }
        })
        .0;
    let tau_s = cir.delay_ns(peak) * 1e-9;
    let grid = ctf.grid();
    let aligned: Vec<Complex64> = ctf
        .gains()
        .iter()
        .enumerate()
        .map(|(k, h)| h * Complex64::from_polar(1.0, 2.0 * PI * grid.frequency_hz(k) * tau_s))
        .collect();
    Ok(aligned
        .chunks_exact(per)
        .take(cfg.n_subbands)
        .map(|c| c.iter().sum::<Complex64>() / per as f64)
        .collect())
}

pub fn estimate_kf(ctf: &FrequencySweep, cfg: &SubbandConfig) -> Result<KfEstimate> {
    estimate_kf_from_realizations(&subband_realizations(ctf, cfg)?)
}

/// K-factors above this are treated as deterministic channels and kept out
/// of the Gaussian fit.
pub const KF_SENTINEL_DB: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub params: GlobalKfParams,
    pub n_used: usize,
    pub n_excluded: usize,
}

/// Sample mean and unbiased standard deviation of the finite K-factors at
/// or below [`KF_SENTINEL_DB`].
pub fn fit_gaussian_db(samples_db: &[f64]) -> Result<GaussianFit> {
    let used: Vec<f64> = samples_db
        .iter()
        .copied()
        .filter(|k| k.is_finite() && *k <= KF_SENTINEL_DB)
        .collect();
    if used.len() < 2 {
        return Err(Error::TooFewSamples {
            needed: 2,
            got: used.len(),
        });
    }
    let n = used.len() as f64;
    let mu = used.iter().sum::<f64>() / n;
    let var = used.iter().map(|k| (k - mu).powi(2)).sum::<f64>() / (n - 1.0);
    Ok(GaussianFit {
        params: GlobalKfParams {
            mu_db: mu,
            sigma_db: var.sqrt(),
        },
        n_used: used.len(),
        n_excluded: samples_db.len() - used.len(),
    })
}

/// Ordinary least squares `y = a + b x`; `None` when x has no spread.
fn line_fit(x: &[f64], y: &[f64]) -> Option<(f64, f64)> {
    let n = x.len() as f64;
    if x.len() < 2 {
        return None;
    }
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxx: f64 = x.iter().map(|xi| (xi - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let sxy: f64 = x.iter().zip(y).map(|(xi, yi)| (xi - mx) * (yi - my)).sum();
    let b = sxy / sxx;
    Some((my - b * mx, b))
}

/// Cluster count, arrival and decay statistics pooled over drops.
///
/// Inter-arrival samples are the gaps between adjacent cluster centers.
/// The decay rate is the negated slope of `ln(P_m / P_1)` against
/// `tau_m - tau_1` over every cluster of the multi-cluster drops.
pub fn inter_cluster_stats(results: &[ClusteringResult]) -> Result<InterClusterParams> {
    if results.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let avg_num_clusters =
        results.iter().map(|r| r.clusters.len()).sum::<usize>() as f64 / results.len() as f64;

    let mut gaps = Vec::new();
    let (mut dx, mut dy) = (Vec::new(), Vec::new());
    for r in results.iter().filter(|r| r.clusters.len() >= 2) {
        let first = r.clusters[0].center();
        for pair in r.clusters.windows(2) {
            gaps.push(pair[1].center().delay_ns - pair[0].center().delay_ns);
        }
        for c in &r.clusters {
            dx.push(c.center().delay_ns - first.delay_ns);
            dy.push((c.center().power() / first.power()).ln());
        }
    }
    if gaps.is_empty() {
        return Err(Error::InsufficientClusters { avg_num_clusters });
    }
    let mean = gaps.iter().sum::<f64>() / gaps.len() as f64;
    let decay = line_fit(&dx, &dy).map_or(f64::NAN, |(_, b)| -b);
    let params = InterClusterParams {
        avg_num_clusters,
        cluster_arrival_rate_per_ns: 1.0 / mean,
        mean_cluster_arrival_time_ns: mean,
        cluster_power_decay_per_ns: decay,
    };
    debug_assert_eq!(
        params.cluster_arrival_rate_per_ns,
        1.0 / params.mean_cluster_arrival_time_ns
    );
    Ok(params)
}

/// A ray's delay relative to its cluster center (negative before it).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RelativeRay {
    pub rel_delay_ns: f64,
    pub amplitude: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CursorSplit {
    pub pre: Vec<RelativeRay>,
    pub center: Mpc,
    pub post: Vec<RelativeRay>,
}

pub fn split_cursors(cluster: &Cluster) -> CursorSplit {
    let center = *cluster.center();
    let rel = |r: &Mpc| RelativeRay {
        rel_delay_ns: r.delay_ns - center.delay_ns,
        amplitude: r.amplitude,
    };
    let (pre, post) = cluster.rays().split_at(cluster.center_index());
    CursorSplit {
        pre: pre.iter().map(rel).collect(),
        center,
        post: post[1..].iter().map(rel).collect(),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Pre,
    Post,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CursorFit {
    pub side: Side,
    /// `+inf` when the amplitudes do not fall off away from the center.
    #[serde(with = "crate::serde_f64")]
    pub decay_time_ns: f64,
    /// Amplitude log-slope per ns away from the center, `1 / decay_time_ns`.
    pub decay_slope_per_ns: f64,
    pub arrival_rate_per_ns: f64,
    pub anchor_amplitude: f64,
    pub n_rays: usize,
    pub window_ns: f64,
    /// RMS residual of the log-amplitude fit.
    pub residual: f64,
    /// Set when the fit has no decaying slope.
    pub degenerate: bool,
}

/// Estimated extent of the arrival window from its `n` arrivals: the
/// farthest offset scaled by `(n + 1) / n`, which removes the downward bias
/// of the sample maximum.
pub fn observation_window_ns(rays: &[RelativeRay]) -> f64 {
    let n = rays.len() as f64;
    let max = rays
        .iter()
        .map(|r| r.rel_delay_ns.abs())
        .fold(0.0, f64::max);
    max * (n + 1.0) / n
}

/// Log-linear amplitude fit `ln A = ln A(0) - |tau| / gamma` plus the
/// arrival rate `n / window`.
pub fn fit_cursor(rays: &[RelativeRay], side: Side) -> Result<CursorFit> {
    if rays.len() < 2 {
        return Err(Error::TooFewRays(rays.len()));
    }
    if let Some(i) = rays
        .iter()
        .position(|r| !(r.amplitude > 0.0 && r.amplitude.is_finite() && r.rel_delay_ns.is_finite()))
    {
        return Err(Error::NonFinite(i));
    }
    let x: Vec<f64> = rays.iter().map(|r| r.rel_delay_ns.abs()).collect();
    let y: Vec<f64> = rays.iter().map(|r| r.amplitude.ln()).collect();
    let (a, b) = line_fit(&x, &y).unwrap_or_else(|| (y.iter().sum::<f64>() / y.len() as f64, 0.0));
    let residual = (x
        .iter()
        .zip(&y)
        .map(|(xi, yi)| (yi - a - b * xi).powi(2))
        .sum::<f64>()
        / x.len() as f64)
        .sqrt();
    let degenerate = !(b < 0.0);
    let window_ns = observation_window_ns(rays);
    Ok(CursorFit {
        side,
        decay_time_ns: if degenerate { f64::INFINITY } else { -1.0 / b },
        decay_slope_per_ns: -b,
        arrival_rate_per_ns: rays.len() as f64 / window_ns,
        anchor_amplitude: a.exp(),
        n_rays: rays.len(),
        window_ns,
        residual,
        degenerate,
    })
}

/// Power-weighted RMS spread of ray delays; 0 for a single ray.
pub fn rms_delay_spread(cluster: &Cluster) -> f64 {
    rms_delay_spread_of(cluster.rays())
}

pub fn rms_delay_spread_of(rays: &[Mpc]) -> f64 {
    let total: f64 = rays.iter().map(Mpc::power).sum();
    if !(total > 0.0) {
        return 0.0;
    }
    let mean = rays.iter().map(|r| r.power() * r.delay_ns).sum::<f64>() / total;
    let second = rays
        .iter()
        .map(|r| r.power() * (r.delay_ns - mean).powi(2))
        .sum::<f64>()
        / total;
    second.max(0.0).sqrt()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EstimationConfig {
    pub detection: DetectionConfig,
    pub clustering: ClusteringConfig,
    pub subbands: SubbandConfig,
    /// Delay interpolation of the inverse transform applied to measured sweeps.
    pub zero_pad_factor: usize,
    /// Leave the cluster-1 center (the virtual LOS) out of the delay spread,
    /// which then covers the diffuse rays only.
    pub exclude_center_from_rms: bool,
}

impl Default for EstimationConfig {
    fn default() -> Self {
        Self {
            detection: DetectionConfig::default(),
            clustering: ClusteringConfig::default(),
            subbands: SubbandConfig::default(),
            zero_pad_factor: 4,
            exclude_center_from_rms: true,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct SampleCounts {
    pub n_drops: usize,
    pub n_used: usize,
    pub n_skipped_detection: usize,
    pub n_kf_used: usize,
    pub n_kf_excluded: usize,
    pub n_multi_cluster: usize,
    pub n_interarrival_samples: usize,
    pub n_pre_fits: usize,
    pub n_post_fits: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DropDiagnostics {
    pub index: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
    #[serde(with = "crate::serde_f64")]
    pub kf_db: f64,
    pub moment_ratio: f64,
    pub n_mpcs: usize,
    pub chosen_k: usize,
    pub silhouette_by_k: BTreeMap<usize, Option<f64>>,
    pub cluster_center_delays_ns: Vec<f64>,
    pub cluster1_rays: usize,
    pub cluster1_rms_ds_ns: f64,
    pub n_pre: usize,
    pub n_post: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub skipped: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEstimate {
    pub params: ScenarioParams,
    pub counts: SampleCounts,
    pub drops: Vec<DropDiagnostics>,
}

struct DropOutcome {
    kf: KfEstimate,
    clustering: ClusteringResult,
    split: CursorSplit,
    rms_ds_ns: f64,
}

fn process_drop(drop: &Drop, cfg: &EstimationConfig) -> Result<DropOutcome> {
    let kf = estimate_kf(&drop.ctf, &cfg.subbands)?;
    let mpcs = detect_cir_mpcs(&drop.cir, &cfg.detection)?;
    let clustering = select_clusters(&mpcs, &cfg.clustering)?;
    let first = &clustering.clusters[0];
    let rms_ds_ns = if cfg.exclude_center_from_rms {
        first.without_center().map_or(0.0, |c| rms_delay_spread(&c))
    } else {
        rms_delay_spread(first)
    };
    let split = split_cursors(first);
    Ok(DropOutcome {
        kf,
        clustering,
        split,
        rms_ds_ns,
    })
}

fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    Some(if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    })
}

/// Ensemble cursor parameters: the mean ray count, the pooled arrival rate
/// `sum n / sum window` and the decay time from the median per-drop slope.
fn aggregate_cursor(sides: &[&[RelativeRay]], side: Side, n_fits: &mut usize) -> CursorParams {
    let avg_num_rays = sides.iter().map(|s| s.len()).sum::<usize>() as f64 / sides.len() as f64;
    let (mut count, mut window) = (0usize, 0.0);
    let mut slopes = Vec::new();
    for rays in sides.iter().filter(|s| !s.is_empty()) {
        count += rays.len();
        window += observation_window_ns(rays);
        if let Ok(fit) = fit_cursor(rays, side) {
            slopes.push(fit.decay_slope_per_ns);
        }
    }
    *n_fits = slopes.len();
    let slope = median(&mut slopes).unwrap_or(0.0);
    CursorParams {
        power_decay_time_ns: if slope > 0.0 { 1.0 / slope } else { f64::INFINITY },
        avg_num_rays,
        arrival_rate_per_ns: if window > 0.0 {
            count as f64 / window
        } else {
            f64::NAN
        },
    }
}

/// Runs detection, clustering and every estimator over the ensemble.
///
/// Drops without any detectable component are skipped and counted; other
/// per-drop errors abort. Cluster statistics are omitted when no drop has
/// two clusters.
pub fn estimate_scenario(ensemble: &DropEnsemble, cfg: &EstimationConfig) -> Result<ScenarioEstimate> {
    if ensemble.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }
    let first_label = &ensemble.drops[0].label;
    let scenario = ensemble
        .scenario
        .or(first_label.scenario)
        .ok_or_else(|| Error::InvalidConfig("ensemble carries no scenario label".into()))?;
    let mode = ensemble
        .mode
        .or(first_label.mode)
        .ok_or_else(|| Error::InvalidConfig("ensemble carries no mode label".into()))?;

    let outcomes: Vec<Result<DropOutcome>> = ensemble
        .drops
        .par_iter()
        .map(|d| process_drop(d, cfg))
        .collect();

    let mut counts = SampleCounts {
        n_drops: ensemble.len(),
        ..Default::default()
    };
    let mut used = Vec::new();
    let mut diagnostics = Vec::with_capacity(ensemble.len());
    for (index, (drop, outcome)) in ensemble.drops.iter().zip(outcomes).enumerate() {
        match outcome {
            Ok(o) => {
                diagnostics.push(DropDiagnostics {
                    index,
                    position: drop.label.position.clone(),
                    kf_db: o.kf.k_db,
                    moment_ratio: o.kf.moment_ratio,
                    n_mpcs: o.clustering.clusters.iter().map(Cluster::len).sum(),
                    chosen_k: o.clustering.chosen_k,
                    silhouette_by_k: o.clustering.silhouette_by_k.clone(),
                    cluster_center_delays_ns: o
                        .clustering
                        .clusters
                        .iter()
                        .map(|c| c.center().delay_ns)
                        .collect(),
                    cluster1_rays: o.clustering.clusters[0].len(),
                    cluster1_rms_ds_ns: o.rms_ds_ns,
                    n_pre: o.split.pre.len(),
                    n_post: o.split.post.len(),
                    skipped: None,
                });
                used.push(o);
            }
            Err(Error::EmptyResult) => {
                counts.n_skipped_detection += 1;
                diagnostics.push(DropDiagnostics {
                    index,
                    position: drop.label.position.clone(),
                    kf_db: f64::NAN,
                    moment_ratio: f64::NAN,
                    n_mpcs: 0,
                    chosen_k: 0,
                    silhouette_by_k: BTreeMap::new(),
                    cluster_center_delays_ns: Vec::new(),
                    cluster1_rays: 0,
                    cluster1_rms_ds_ns: f64::NAN,
                    n_pre: 0,
                    n_post: 0,
                    skipped: Some(Error::EmptyResult.to_string()),
                });
            }
            Err(e) => return Err(e),
        }
    }
    counts.n_used = used.len();
    if used.is_empty() {
        return Err(Error::TooFewSamples { needed: 1, got: 0 });
    }

    let kf_samples: Vec<f64> = used.iter().map(|o| o.kf.k_db).collect();
    let kf = match fit_gaussian_db(&kf_samples) {
        Ok(fit) => {
            counts.n_kf_used = fit.n_used;
            counts.n_kf_excluded = fit.n_excluded;
            fit.params
        }
        // A single drop has no spread to fit.
        Err(Error::TooFewSamples { got: 1, .. }) if used.len() == 1 => {
            counts.n_kf_used = 1;
            GlobalKfParams {
                mu_db: kf_samples[0],
                sigma_db: 0.0,
            }
        }
        Err(e) => return Err(e),
    };

    let results: Vec<ClusteringResult> = used.iter().map(|o| o.clustering.clone()).collect();
    counts.n_multi_cluster = results.iter().filter(|r| r.clusters.len() >= 2).count();
    counts.n_interarrival_samples = results
        .iter()
        .map(|r| r.clusters.len().saturating_sub(1))
        .sum();
    let inter = match inter_cluster_stats(&results) {
        Ok(p) => Some(p),
        Err(Error::InsufficientClusters { .. }) => None,
        Err(e) => return Err(e),
    };

    let n = used.len() as f64;
    let pre: Vec<&[RelativeRay]> = used.iter().map(|o| o.split.pre.as_slice()).collect();
    let post: Vec<&[RelativeRay]> = used.iter().map(|o| o.split.post.as_slice()).collect();
    let intra = IntraClusterParams {
        avg_num_rays: used.iter().map(|o| o.clustering.clusters[0].len()).sum::<usize>() as f64 / n,
        rms_ds_ns: used.iter().map(|o| o.rms_ds_ns).sum::<f64>() / n,
        pre: aggregate_cursor(&pre, Side::Pre, &mut counts.n_pre_fits),
        post: aggregate_cursor(&post, Side::Post, &mut counts.n_post_fits),
    };
    let los_delay_ns = used.iter().map(|o| o.split.center.delay_ns).sum::<f64>() / n;

    Ok(ScenarioEstimate {
        params: ScenarioParams {
            scenario,
            mode,
            kf,
            inter,
            intra: Some(intra),
            los_delay_ns,
        },
        counts,
        drops: diagnostics,
    })
}
