//! Domain types shared by the processing, estimation and synthesis stages.
//!
//! Delays are nanoseconds, frequencies are hertz and powers are linear
//! throughout; decibels only appear at file boundaries and in the K-factor
//! statistics, which are conventionally quoted in dB.

use std::fmt;
use std::str::FromStr;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Uniform frequency grid of a swept-sine measurement.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrequencyGrid {
    start_hz: f64,
    stop_hz: f64,
    n_points: usize,
}

impl FrequencyGrid {
    pub fn new(start_hz: f64, stop_hz: f64, n_points: usize) -> Result<Self> {
        if !start_hz.is_finite() || !stop_hz.is_finite() {
            return Err(Error::InvalidGrid("grid edges must be finite".into()));
        }
        if n_points < 2 {
            return Err(Error::InvalidGrid(format!(
                "need at least 2 points, got {n_points}"
            )));
        }
        if stop_hz <= start_hz {
            return Err(Error::InvalidGrid(format!(
                "stop {stop_hz} Hz must exceed start {start_hz} Hz"
            )));
        }
        Ok(Self {
            start_hz,
            stop_hz,
            n_points,
        })
    }

    /// 2.5 GHz to 2.69 GHz in 191 points (1 MHz spacing).
    pub fn measurement_default() -> Self {
        Self {
            start_hz: 2.5e9,
            stop_hz: 2.69e9,
            n_points: 191,
        }
    }

    pub fn start_hz(&self) -> f64 {
        self.start_hz
    }

    pub fn stop_hz(&self) -> f64 {
        self.stop_hz
    }

    pub fn n_points(&self) -> usize {
        self.n_points
    }

    pub fn spacing_hz(&self) -> f64 {
        (self.stop_hz - self.start_hz) / (self.n_points - 1) as f64
    }

    pub fn bandwidth_hz(&self) -> f64 {
        self.stop_hz - self.start_hz
    }

    pub fn frequency_hz(&self, k: usize) -> f64 {
        self.start_hz + k as f64 * self.spacing_hz()
    }

    pub fn frequencies_hz(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.n_points).map(move |k| self.frequency_hz(k))
    }

    /// Delay span covered without aliasing, `1 / spacing`.
    pub fn unambiguous_span_ns(&self) -> f64 {
        1e9 / self.spacing_hz()
    }

    /// Delay bin of an unpadded inverse DFT over this grid, `1 / (n * spacing)`.
    pub fn native_delay_step_ns(&self) -> f64 {
        1e9 / (self.n_points as f64 * self.spacing_hz())
    }

    /// True when both grids describe the same frequencies to within a
    /// part-per-billion of the spacing.
    pub fn matches(&self, other: &FrequencyGrid) -> bool {
        let tol = 1e-9 * self.spacing_hz();
        self.n_points == other.n_points
            && (self.start_hz - other.start_hz).abs() <= tol
            && (self.stop_hz - other.stop_hz).abs() <= tol
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    Outdoor,
    Indoor,
    O2iLeft,
    O2iRight,
}

impl Scenario {
    pub const ALL: [Scenario; 4] = [
        Scenario::Outdoor,
        Scenario::Indoor,
        Scenario::O2iLeft,
        Scenario::O2iRight,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            Scenario::Outdoor => "outdoor",
            Scenario::Indoor => "indoor",
            Scenario::O2iLeft => "o2i_left",
            Scenario::O2iRight => "o2i_right",
        }
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scenario {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "outdoor" => Ok(Scenario::Outdoor),
            "indoor" => Ok(Scenario::Indoor),
            "o2i_left" | "o2i-left" => Ok(Scenario::O2iLeft),
            "o2i_right" | "o2i-right" => Ok(Scenario::O2iRight),
            _ => Err(Error::UnknownPreset(format!("scenario {s:?}"))),
        }
    }
}

/// Propagation mode: optimized RIS, RIS as a specular plate, or no RIS.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Mode {
    #[serde(rename = "IRWR")]
    Irwr,
    #[serde(rename = "SRWR")]
    Srwr,
    #[serde(rename = "WR")]
    Wr,
}

impl Mode {
    pub const ALL: [Mode; 3] = [Mode::Irwr, Mode::Srwr, Mode::Wr];

    pub fn as_str(&self) -> &'static str {
        match self {
            Mode::Irwr => "IRWR",
            Mode::Srwr => "SRWR",
            Mode::Wr => "WR",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "IRWR" => Ok(Mode::Irwr),
            "SRWR" => Ok(Mode::Srwr),
            "WR" => Ok(Mode::Wr),
            _ => Err(Error::UnknownPreset(format!("mode {s:?}"))),
        }
    }
}

/// Measurement metadata carried alongside a sweep.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepLabel {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mode: Option<Mode>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub position: Option<String>,
}

/// Complex transfer-function samples on a uniform grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FrequencySweep {
    grid: FrequencyGrid,
    gains: Vec<Complex64>,
    pub label: SweepLabel,
}

impl FrequencySweep {
    pub fn new(grid: FrequencyGrid, gains: Vec<Complex64>, label: SweepLabel) -> Result<Self> {
        if gains.len() != grid.n_points() {
            return Err(Error::GridMismatch(format!(
                "{} gains for a {}-point grid",
                gains.len(),
                grid.n_points()
            )));
        }
        if let Some(i) = gains.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self { grid, gains, label })
    }

    pub fn grid(&self) -> &FrequencyGrid {
        &self.grid
    }

    pub fn gains(&self) -> &[Complex64] {
        &self.gains
    }

    pub fn into_gains(self) -> Vec<Complex64> {
        self.gains
    }
}

/// Complex delay-domain taps on a uniform delay grid starting at `t0_ns`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpulseResponse {
    delay_step_ns: f64,
    t0_ns: f64,
    taps: Vec<Complex64>,
}

impl ImpulseResponse {
    pub fn new(delay_step_ns: f64, t0_ns: f64, taps: Vec<Complex64>) -> Result<Self> {
        if !(delay_step_ns > 0.0 && delay_step_ns.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "delay step must be positive, got {delay_step_ns}"
            )));
        }
        if !t0_ns.is_finite() {
            return Err(Error::InvalidConfig("t0 must be finite".into()));
        }
        if let Some(i) = taps.iter().position(|g| !g.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            delay_step_ns,
            t0_ns,
            taps,
        })
    }

    pub fn delay_step_ns(&self) -> f64 {
        self.delay_step_ns
    }

    pub fn t0_ns(&self) -> f64 {
        self.t0_ns
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn delay_ns(&self, k: usize) -> f64 {
        self.t0_ns + k as f64 * self.delay_step_ns
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().map(|h| h.norm_sqr()).sum()
    }
}

/// Power delay profile.
#[derive(Debug, Clone, PartialEq)]
pub struct Pdp {
    pub delays_ns: Vec<f64>,
    pub powers: Vec<f64>,
    pub noise_floor: f64,
}

impl Pdp {
    pub fn new(delays_ns: Vec<f64>, powers: Vec<f64>, noise_floor: f64) -> Result<Self> {
        if delays_ns.len() != powers.len() {
            return Err(Error::InvalidConfig(format!(
                "{} delays for {} powers",
                delays_ns.len(),
                powers.len()
            )));
        }
        if let Some(i) = powers.iter().position(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(Error::NonFinite(i));
        }
        Ok(Self {
            delays_ns,
            powers,
            noise_floor,
        })
    }

    pub fn len(&self) -> usize {
        self.powers.len()
    }

    pub fn is_empty(&self) -> bool {
        self.powers.is_empty()
    }
}

/// A resolved multipath component.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Mpc {
    pub delay_ns: f64,
    pub amplitude: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub complex_gain: Option<Complex64>,
}

impl Mpc {
    pub fn new(delay_ns: f64, amplitude: f64) -> Self {
        Self {
            delay_ns,
            amplitude,
            complex_gain: None,
        }
    }

    pub fn from_gain(delay_ns: f64, gain: Complex64) -> Self {
        Self {
            delay_ns,
            amplitude: gain.norm(),
            complex_gain: Some(gain),
        }
    }

    pub fn power(&self) -> f64 {
        self.amplitude * self.amplitude
    }
}

/// Detected components of one drop, sorted by delay.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct MpcSet {
    mpcs: Vec<Mpc>,
    pub noise_floor: f64,
}

impl MpcSet {
    pub fn new(mut mpcs: Vec<Mpc>) -> Self {
        mpcs.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
        Self {
            mpcs,
            noise_floor: 0.0,
        }
    }

    pub fn from_delays(delays_ns: &[f64]) -> Self {
        Self::new(delays_ns.iter().map(|&d| Mpc::new(d, 1.0)).collect())
    }

    pub fn as_slice(&self) -> &[Mpc] {
        &self.mpcs
    }

    pub fn len(&self) -> usize {
        self.mpcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.mpcs.is_empty()
    }

    pub fn delays_ns(&self) -> Vec<f64> {
        self.mpcs.iter().map(|m| m.delay_ns).collect()
    }
}

/// Delay-ordered rays with a designated center, the strongest ray.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Cluster {
    rays: Vec<Mpc>,
    center_index: usize,
}

impl Cluster {
    /// Sorts the rays by delay and designates the maximum-amplitude ray as
    /// the center (earliest delay wins ties). Returns `None` for no rays.
    pub fn new(mut rays: Vec<Mpc>) -> Option<Self> {
        if rays.is_empty() {
            return None;
        }
        rays.sort_by(|a, b| a.delay_ns.total_cmp(&b.delay_ns));
        let mut center_index = 0;
        for (i, ray) in rays.iter().enumerate() {
            if ray.amplitude > rays[center_index].amplitude {
                center_index = i;
            }
        }
        Some(Self { rays, center_index })
    }

    pub fn rays(&self) -> &[Mpc] {
        &self.rays
    }

    pub fn center_index(&self) -> usize {
        self.center_index
    }

    pub fn center(&self) -> &Mpc {
        &self.rays[self.center_index]
    }

    pub fn len(&self) -> usize {
        self.rays.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rays.is_empty()
    }

    /// The cluster with its center ray removed; `None` when only the
    /// center remains.
    pub fn without_center(&self) -> Option<Cluster> {
        let rest: Vec<Mpc> = self
            .rays
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != self.center_index)
            .map(|(_, r)| *r)
            .collect();
        Cluster::new(rest)
    }
}

/// Gaussian model of the per-drop K-factor in dB.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalKfParams {
    pub mu_db: f64,
    pub sigma_db: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterClusterParams {
    pub avg_num_clusters: f64,
    pub cluster_arrival_rate_per_ns: f64,
    pub mean_cluster_arrival_time_ns: f64,
    /// Exponential decay rate of cluster-center power over excess delay.
    pub cluster_power_decay_per_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CursorParams {
    /// Amplitude decay time of the envelope away from the cluster center.
    #[serde(with = "crate::serde_f64")]
    pub power_decay_time_ns: f64,
    pub avg_num_rays: f64,
    #[serde(with = "crate::serde_f64")]
    pub arrival_rate_per_ns: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntraClusterParams {
    pub avg_num_rays: f64,
    pub rms_ds_ns: f64,
    pub pre: CursorParams,
    pub post: CursorParams,
}

/// Complete small-scale parameter set for one scenario and mode.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub scenario: Scenario,
    pub mode: Mode,
    pub kf: GlobalKfParams,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub inter: Option<InterClusterParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub intra: Option<IntraClusterParams>,
    pub los_delay_ns: f64,
}

impl ScenarioParams {
    pub fn has_cluster_model(&self) -> bool {
        self.inter.is_some() && self.intra.is_some()
    }

    pub fn key(&self) -> String {
        format!("{}:{}", self.scenario, self.mode)
    }
}

/// Maximum relative disagreement between the cluster arrival rate and the
/// inverse mean arrival time.
pub const ARRIVAL_RATE_CONSISTENCY: f64 = 0.10;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    pub field: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.field, self.message)
    }
}

/// Collects every invariant violation in `params`; an empty list means valid.
pub fn validate(params: &ScenarioParams) -> Vec<Violation> {
    let mut out = Vec::new();
    let mut push = |field: &str, message: String| {
        out.push(Violation {
            field: field.to_string(),
            message,
        })
    };

    if !params.kf.mu_db.is_finite() {
        push("kf.mu_db", "must be finite".into());
    }
    if !(params.kf.sigma_db >= 0.0) {
        push(
            "kf.sigma_db",
            format!("sigma_db ≥ 0 violated ({})", params.kf.sigma_db),
        );
    }
    if !(params.los_delay_ns >= 0.0 && params.los_delay_ns.is_finite()) {
        push(
            "los_delay_ns",
            format!("must be finite and non-negative ({})", params.los_delay_ns),
        );
    }
    if let Some(inter) = &params.inter {
        if !(inter.avg_num_clusters >= 1.0) {
            push(
                "inter.avg_num_clusters",
                format!("must be ≥ 1 ({})", inter.avg_num_clusters),
            );
        }
        let rate = inter.cluster_arrival_rate_per_ns;
        let mean = inter.mean_cluster_arrival_time_ns;
        if !(rate > 0.0) {
            push(
                "inter.cluster_arrival_rate_per_ns",
                format!("must be positive ({rate})"),
            );
        }
        if !(mean > 0.0) {
            push(
                "inter.mean_cluster_arrival_time_ns",
                format!("must be positive ({mean})"),
            );
        }
        if rate > 0.0 && mean > 0.0 {
            let inverse = 1.0 / mean;
            if ((rate - inverse) / rate).abs() > ARRIVAL_RATE_CONSISTENCY {
                push(
                    "inter.cluster_arrival_rate_per_ns",
                    format!("rate ≉ 1/mean ({rate} vs {inverse:.4})"),
                );
            }
        }
        if !(inter.cluster_power_decay_per_ns > 0.0) {
            push(
                "inter.cluster_power_decay_per_ns",
                format!("must be positive ({})", inter.cluster_power_decay_per_ns),
            );
        }
    }

    if let Some(intra) = &params.intra {
        if !(intra.avg_num_rays > 0.0) {
            push(
                "intra.avg_num_rays",
                format!("must be positive ({})", intra.avg_num_rays),
            );
        }
        if !(intra.rms_ds_ns > 0.0) {
            push(
                "intra.rms_ds_ns",
                format!("must be positive ({})", intra.rms_ds_ns),
            );
        }
        for (side, c) in [("pre", &intra.pre), ("post", &intra.post)] {
            if !(c.power_decay_time_ns > 0.0) {
                push(
                    &format!("intra.{side}.power_decay_time_ns"),
                    format!("must be positive ({})", c.power_decay_time_ns),
                );
            }
            if !(c.arrival_rate_per_ns > 0.0) {
                push(
                    &format!("intra.{side}.arrival_rate_per_ns"),
                    format!("must be positive ({})", c.arrival_rate_per_ns),
                );
            }
            if !(c.avg_num_rays >= 0.0) {
                push(
                    &format!("intra.{side}.avg_num_rays"),
                    format!("must be non-negative ({})", c.avg_num_rays),
                );
            }
        }
    }

    out
}
