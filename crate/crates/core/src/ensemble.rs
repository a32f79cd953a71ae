use crate::dsp::ctf_to_cir;
use crate::error::Result;
use crate::model::{FrequencySweep, GlobalKfParams, ImpulseResponse, Mode, Scenario, SweepLabel};
use crate::synthesis::GroundTruth;

/// One channel realization: its transfer function, its impulse response
/// and, for synthesized drops, the drawn structure behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Drop {
    pub label: SweepLabel,
    pub ctf: FrequencySweep,
    pub cir: ImpulseResponse,
    pub ground_truth: Option<GroundTruth>,
}

impl Drop {
    /// A measured drop; the impulse response comes from the windowed
    /// inverse transform.
    pub fn from_sweep(ctf: FrequencySweep, zero_pad_factor: usize) -> Result<Self> {
        let cir = ctf_to_cir(&ctf, zero_pad_factor)?;
        Ok(Self {
            label: ctf.label.clone(),
            ctf,
            cir,
            ground_truth: None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct DropEnsemble {
    pub scenario: Option<Scenario>,
    pub mode: Option<Mode>,
    pub drops: Vec<Drop>,
}

impl DropEnsemble {
    pub fn len(&self) -> usize {
        self.drops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.drops.is_empty()
    }

    /// Sample mean and standard deviation of the drawn K-factors, over
    /// drops that carry ground truth with a finite K.
    pub fn drawn_kf_stats(&self) -> Option<GlobalKfParams> {
        let ks: Vec<f64> = self
            .drops
            .iter()
            .filter_map(|d| d.ground_truth.as_ref())
            .map(|g| g.k_db)
            .filter(|k| k.is_finite())
            .collect();
        if ks.len() < 2 {
            return None;
        }
        let n = ks.len() as f64;
        let mu = ks.iter().sum::<f64>() / n;
        let var = ks.iter().map(|k| (k - mu).powi(2)).sum::<f64>() / (n - 1.0);
        Some(GlobalKfParams {
            mu_db: mu,
            sigma_db: var.sqrt(),
        })
    }
}
