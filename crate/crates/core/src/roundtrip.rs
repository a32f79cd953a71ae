//! Synthesize-then-estimate consistency checks against the generator inputs.

use serde::{Deserialize, Serialize};

use crate::dsp::DetectionConfig;
use crate::error::Result;
use crate::estimation::{estimate_scenario, EstimationConfig, ScenarioEstimate};
use crate::model::{GlobalKfParams, ScenarioParams};
use crate::synthesis::{synthesize_ensemble, SynthesisConfig};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Tolerances {
    pub kf_mu_db: f64,
    pub kf_sigma_db: f64,
    pub avg_num_clusters: f64,
    pub cluster_arrival_time_rel: f64,
    pub decay_time_rel: f64,
    pub ray_arrival_rate_rel: f64,
    pub rms_ds_rel: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            kf_mu_db: 0.5,
            kf_sigma_db: 0.5,
            avg_num_clusters: 0.2,
            cluster_arrival_time_rel: 0.10,
            decay_time_rel: 0.10,
            ray_arrival_rate_rel: 0.10,
            rms_ds_rel: 0.15,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ToleranceKind {
    Absolute,
    Relative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub field: String,
    pub target: f64,
    #[serde(with = "crate::serde_f64")]
    pub estimate: f64,
    pub tolerance: f64,
    pub kind: ToleranceKind,
    pub pass: bool,
}

impl Check {
    fn new(field: &str, target: f64, estimate: f64, tolerance: f64, kind: ToleranceKind) -> Self {
        let err = match kind {
            ToleranceKind::Absolute => (estimate - target).abs(),
            ToleranceKind::Relative => ((estimate - target) / target).abs(),
        };
        Self {
            field: field.to_string(),
            target,
            estimate,
            tolerance,
            kind,
            pass: err <= tolerance,
        }
    }

    /// Deviation in the tolerance's own terms.
    pub fn error(&self) -> f64 {
        match self.kind {
            ToleranceKind::Absolute => self.estimate - self.target,
            ToleranceKind::Relative => (self.estimate - self.target) / self.target,
        }
    }
}

impl std::fmt::Display for Check {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let verdict = if self.pass { "ok" } else { "BREACH" };
        match self.kind {
            ToleranceKind::Absolute => write!(
                f,
                "{:<32} target {:>9.4} estimate {:>9.4} err {:+.3} (tol ±{}) {verdict}",
                self.field,
                self.target,
                self.estimate,
                self.error(),
                self.tolerance
            ),
            ToleranceKind::Relative => write!(
                f,
                "{:<32} target {:>9.4} estimate {:>9.4} err {:+.1}% (tol ±{}%) {verdict}",
                self.field,
                self.target,
                self.estimate,
                100.0 * self.error(),
                100.0 * self.tolerance
            ),
        }
    }
}

/// Estimation settings for synthesized drops: their impulse responses are
/// noiseless, so detection keeps every local maximum.
pub fn roundtrip_estimation_config() -> EstimationConfig {
    EstimationConfig {
        detection: DetectionConfig::noiseless(),
        ..EstimationConfig::default()
    }
}

pub fn kf_checks(target: &ScenarioParams, est: &ScenarioParams, tol: &Tolerances) -> Vec<Check> {
    use ToleranceKind::Absolute;
    vec![
        Check::new("kf.mu_db", target.kf.mu_db, est.kf.mu_db, tol.kf_mu_db, Absolute),
        Check::new(
            "kf.sigma_db",
            target.kf.sigma_db,
            est.kf.sigma_db,
            tol.kf_sigma_db,
            Absolute,
        ),
    ]
}

/// Cluster-structure checks; empty when the target has no cluster model.
pub fn cluster_checks(target: &ScenarioParams, est: &ScenarioParams, tol: &Tolerances) -> Vec<Check> {
    use ToleranceKind::{Absolute, Relative};
    let (Some(ti), Some(tc)) = (&target.inter, &target.intra) else {
        return Vec::new();
    };
    let nan = f64::NAN;
    let ei = est.inter;
    let ec = est.intra;
    vec![
        Check::new(
            "inter.avg_num_clusters",
            ti.avg_num_clusters,
            ei.map_or(nan, |p| p.avg_num_clusters),
            tol.avg_num_clusters,
            Absolute,
        ),
        Check::new(
            "inter.mean_cluster_arrival_time_ns",
            ti.mean_cluster_arrival_time_ns,
            ei.map_or(nan, |p| p.mean_cluster_arrival_time_ns),
            tol.cluster_arrival_time_rel,
            Relative,
        ),
        Check::new(
            "intra.pre.power_decay_time_ns",
            tc.pre.power_decay_time_ns,
            ec.map_or(nan, |p| p.pre.power_decay_time_ns),
            tol.decay_time_rel,
            Relative,
        ),
        Check::new(
            "intra.post.power_decay_time_ns",
            tc.post.power_decay_time_ns,
            ec.map_or(nan, |p| p.post.power_decay_time_ns),
            tol.decay_time_rel,
            Relative,
        ),
        Check::new(
            "intra.pre.arrival_rate_per_ns",
            tc.pre.arrival_rate_per_ns,
            ec.map_or(nan, |p| p.pre.arrival_rate_per_ns),
            tol.ray_arrival_rate_rel,
            Relative,
        ),
        Check::new(
            "intra.post.arrival_rate_per_ns",
            tc.post.arrival_rate_per_ns,
            ec.map_or(nan, |p| p.post.arrival_rate_per_ns),
            tol.ray_arrival_rate_rel,
            Relative,
        ),
        Check::new(
            "intra.rms_ds_ns",
            tc.rms_ds_ns,
            ec.map_or(nan, |p| p.rms_ds_ns),
            tol.rms_ds_rel,
            Relative,
        ),
    ]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundtripReport {
    pub target: ScenarioParams,
    /// Sample statistics of the K-factors actually drawn.
    pub drawn_kf: Option<GlobalKfParams>,
    pub estimate: ScenarioEstimate,
    pub checks: Vec<Check>,
    pub passed: bool,
}

pub fn run_roundtrip(
    target: &ScenarioParams,
    synth: &SynthesisConfig,
    est_cfg: &EstimationConfig,
    tol: &Tolerances,
) -> Result<RoundtripReport> {
    let ensemble = synthesize_ensemble(target, synth)?;
    let drawn_kf = ensemble.drawn_kf_stats();
    let estimate = estimate_scenario(&ensemble, est_cfg)?;
    let mut checks = kf_checks(target, &estimate.params, tol);
    checks.extend(cluster_checks(target, &estimate.params, tol));
    let passed = checks.iter().all(|c| c.pass);
    Ok(RoundtripReport {
        target: target.clone(),
        drawn_kf,
        estimate,
        checks,
        passed,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn relative_and_absolute_checks() {
        let c = Check::new("x", 100.0, 109.0, 0.1, ToleranceKind::Relative);
        assert!(c.pass);
        assert!((c.error() - 0.09).abs() < 1e-12);
        let c = Check::new("x", 100.0, 111.0, 0.1, ToleranceKind::Relative);
        assert!(!c.pass);
        assert!(!Check::new("x", 1.0, f64::NAN, 0.5, ToleranceKind::Absolute).pass);
        assert!(Check::new("x", 1.0, 1.4, 0.5, ToleranceKind::Absolute).pass);
    }

    #[test]
    fn tolerances_parse_with_defaults() {
        let t: Tolerances = serde_json::from_str(r#"{"kf_mu_db": 1.0}"#).unwrap();
        assert_eq!(t.kf_mu_db, 1.0);
        assert_eq!(t.rms_ds_rel, 0.15);
    }
}
