//! Sweep post-processing: back-to-back calibration, Hann-windowed inverse
//! transform to the delay domain, power delay profiles and discrete
//! multipath detection.
//!
//! Transform convention: for a sweep of `n` points zero-padded to
//! `m = n * pad`, tap `i` sits at delay `i / (m * spacing)` and equals
//! `(1/m) * sum_k H[k] w[k] exp(+j 2 pi f_k tau_i)`. Referencing the phase to
//! the absolute frequencies `f_k` makes [`crate::synthesis::cir_to_ctf`] the
//! exact inverse, and Parseval reads `sum |h|^2 = (1/m) sum |H w|^2`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{FrequencySweep, ImpulseResponse, Mpc, MpcSet, Pdp};

/// Back-to-back calibration responses: system, Tx antenna and Rx antenna.
#[derive(Debug, Clone, PartialEq)]
pub struct CalibrationSet {
    pub system_resp: FrequencySweep,
    pub tx_antenna_resp: FrequencySweep,
    pub rx_antenna_resp: FrequencySweep,
}

impl CalibrationSet {
    /// Unit responses on `grid`: calibration becomes the identity.
    pub fn identity(grid: crate::model::FrequencyGrid) -> Self {
        let ones = || {
            FrequencySweep::new(
                grid,
                vec![Complex64::new(1.0, 0.0); grid.n_points()],
                Default::default(),
            )
            .expect("unit sweep is valid")
        };
        Self {
            system_resp: ones(),
            tx_antenna_resp: ones(),
            rx_antenna_resp: ones(),
        }
    }

    fn parts(&self) -> [(&'static str, &FrequencySweep); 3] {
        [
            ("system", &self.system_resp),
            ("tx_antenna", &self.tx_antenna_resp),
            ("rx_antenna", &self.rx_antenna_resp),
        ]
    }

    /// Pointwise product `G * Gt * Gr`.
    pub fn product(&self) -> Vec<Complex64> {
        self.system_resp
            .gains()
            .iter()
            .zip(self.tx_antenna_resp.gains())
            .zip(self.rx_antenna_resp.gains())
            .map(|((g, gt), gr)| g * gt * gr)
            .collect()
    }
}

/// Divides out the system and antenna responses.
pub fn calibrate(raw: &FrequencySweep, cal: &CalibrationSet) -> Result<FrequencySweep> {
    for (name, part) in cal.parts() {
        if !part.grid().matches(raw.grid()) {
            return Err(Error::GridMismatch(format!(
                "{name} calibration grid differs from the sweep grid"
            )));
        }
        if let Some(index) = part.gains().iter().position(|g| g.norm_sqr() == 0.0) {
            return Err(Error::ZeroCalibrationSample { which: name, index });
        }
    }
    let gains = raw
        .gains()
        .iter()
        .zip(cal.product())
        .map(|(h, c)| h / c)
        .collect();
    FrequencySweep::new(*raw.grid(), gains, raw.label.clone())
}

/// Symmetric Hann window with zero endpoints.
pub fn hann_window(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![1.0],
        _ => {
            let denom = (n - 1) as f64;
            (0..n)
                .map(|k| 0.5 * (1.0 - (2.0 * PI * k as f64 / denom).cos()))
                .collect()
        }
    }
}

/// Hann-windowed inverse transform of a transfer function.
///
/// `zero_pad_factor` interpolates the delay axis; 1 keeps the native
/// resolution `1 / (n * spacing)`.
pub fn ctf_to_cir(ctf: &FrequencySweep, zero_pad_factor: usize) -> Result<ImpulseResponse> {
    if zero_pad_factor == 0 {
        return Err(Error::InvalidConfig("zero_pad_factor must be ≥ 1".into()));
    }
    let grid = ctf.grid();
    let n = grid.n_points();
    let m = n * zero_pad_factor;
    let window = hann_window(n);

    let mut buf = vec![Complex64::new(0.0, 0.0); m];
    for (slot, (h, w)) in buf.iter_mut().zip(ctf.gains().iter().zip(&window)) {
        *slot = h * w;
    }
    FftPlanner::<f64>::new().plan_fft_inverse(m).process(&mut buf);

    let step_ns = 1e9 / (m as f64 * grid.spacing_hz());
    let scale = 1.0 / m as f64;
    let f0 = grid.start_hz();
    for (i, tap) in buf.iter_mut().enumerate() {
        let tau_s = i as f64 * step_ns * 1e-9;
        *tap *= Complex64::from_polar(scale, 2.0 * PI * f0 * tau_s);
    }
    ImpulseResponse::new(step_ns, 0.0, buf)
}

/// Squared tap magnitudes on the tap delay grid.
pub fn compute_pdp(cir: &ImpulseResponse) -> Pdp {
    Pdp {
        delays_ns: (0..cir.taps().len()).map(|k| cir.delay_ns(k)).collect(),
        powers: cir.taps().iter().map(|h| h.norm_sqr()).collect(),
        noise_floor: 0.0,
    }
}

/// Peak-picking parameters for multipath detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionConfig {
    /// Fraction of trailing delay bins used to estimate the noise floor.
    pub noise_tail_fraction: f64,
    pub threshold_above_noise_db: f64,
    /// Components weaker than the strongest bin by more than this are dropped.
    pub max_dynamic_range_db: f64,
}

impl Default for DetectionConfig {
    fn default() -> Self {
        Self {
            noise_tail_fraction: 0.2,
            threshold_above_noise_db: 6.0,
            max_dynamic_range_db: 25.0,
        }
    }
}

impl DetectionConfig {
    /// Settings for noiseless synthesized impulse responses: every nonzero
    /// local maximum down to 200 dB below the peak is kept.
    pub fn noiseless() -> Self {
        Self {
            max_dynamic_range_db: 200.0,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise_tail_fraction > 0.0 && self.noise_tail_fraction < 0.5) {
            return Err(Error::InvalidConfig(format!(
                "noise_tail_fraction must lie in (0, 0.5), got {}",
                self.noise_tail_fraction
            )));
        }
        if !(self.threshold_above_noise_db > 0.0) || !(self.max_dynamic_range_db > 0.0) {
            return Err(Error::InvalidConfig(
                "detection margins must be positive".into(),
            ));
        }
        Ok(())
    }
}

/// Median power of the trailing `fraction` of bins (at least one bin).
pub fn noise_floor(powers: &[f64], fraction: f64) -> f64 {
    if powers.is_empty() {
        return 0.0;
    }
    let n_tail = ((powers.len() as f64 * fraction).ceil() as usize).clamp(1, powers.len());
    let mut tail = powers[powers.len() - n_tail..].to_vec();
    tail.sort_by(f64::total_cmp);
    let mid = tail.len() / 2;
    if tail.len() % 2 == 1 {
        tail[mid]
    } else {
        0.5 * (tail[mid - 1] + tail[mid])
    }
}

fn local_maxima(pdp: &Pdp, cfg: &DetectionConfig) -> Result<(Vec<usize>, f64)> {
    cfg.validate()?;
    let p = &pdp.powers;
    let floor = noise_floor(p, cfg.noise_tail_fraction);
    let threshold = floor * 10f64.powf(cfg.threshold_above_noise_db / 10.0);
    let peak = p.iter().copied().fold(0.0, f64::max);
    let range_floor = peak * 10f64.powf(-cfg.max_dynamic_range_db / 10.0);

    // A plateau yields a single component at its first bin.
    let picks: Vec<usize> = (0..p.len())
        .filter(|&k| {
            p[k] > threshold
                && p[k] >= range_floor
                && (k == 0 || p[k] > p[k - 1])
                && (k + 1 == p.len() || p[k] >= p[k + 1])
        })
        .collect();
    if picks.is_empty() {
        return Err(Error::EmptyResult);
    }
    Ok((picks, floor))
}

/// Local maxima above `noise * 10^(threshold/10)` and within the dynamic
/// range of the global peak.
pub fn detect_mpcs(pdp: &Pdp, cfg: &DetectionConfig) -> Result<MpcSet> {
    let (picks, floor) = local_maxima(pdp, cfg)?;
    let mut set = MpcSet::new(
        picks
            .into_iter()
            .map(|k| Mpc::new(pdp.delays_ns[k], pdp.powers[k].sqrt()))
            .collect(),
    );
    set.noise_floor = floor;
    Ok(set)
}

/// [`detect_mpcs`] on the PDP of `cir`, keeping each component's complex gain.
pub fn detect_cir_mpcs(cir: &ImpulseResponse, cfg: &DetectionConfig) -> Result<MpcSet> {
    let pdp = compute_pdp(cir);
    let (picks, floor) = local_maxima(&pdp, cfg)?;
    let mut set = MpcSet::new(
        picks
            .into_iter()
            .map(|k| Mpc::from_gain(cir.delay_ns(k), cir.taps()[k]))
            .collect(),
    );
    set.noise_floor = floor;
    Ok(set)
}
