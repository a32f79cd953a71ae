//! Registry of the published small-scale parameter sets.
//!
//! Every scenario and mode has a K-factor distribution; only the IRWR mode
//! has a cluster model, and the two O2I aisles share one cluster block.

use crate::error::{Error, Result};
use crate::model::{
    CursorParams, GlobalKfParams, InterClusterParams, IntraClusterParams, Mode, Scenario,
    ScenarioParams,
};

const SPEED_OF_LIGHT_M_PER_NS: f64 = 0.299_792_458;

/// Transmitter-surface-receiver path length behind the default LOS delay.
fn los_path_m(scenario: Scenario) -> f64 {
    match scenario {
        Scenario::Outdoor | Scenario::Indoor => 11.5 + 11.5,
        Scenario::O2iLeft | Scenario::O2iRight => 9.0 + 6.26,
    }
}

pub fn default_los_delay_ns(scenario: Scenario) -> f64 {
    los_path_m(scenario) / SPEED_OF_LIGHT_M_PER_NS
}

fn kf(scenario: Scenario, mode: Mode) -> GlobalKfParams {
    use Mode::*;
    use Scenario::*;
    let (mu_db, sigma_db) = match (mode, scenario) {
        (Irwr, Outdoor) => (15.7, 4.6),
        (Irwr, Indoor) => (12.0, 4.2),
        (Irwr, O2iLeft) => (20.0, 2.9),
        (Irwr, O2iRight) => (16.8, 2.4),
        (Srwr, Outdoor) => (14.4, 3.9),
        (Srwr, Indoor) => (10.0, 4.0),
        (Srwr, O2iLeft) => (13.8, 4.4),
        (Srwr, O2iRight) => (3.3, 2.1),
        (Wr, Outdoor) => (2.4, 3.7),
        (Wr, Indoor) => (2.0, 3.5),
        (Wr, O2iLeft) => (1.6, 2.2),
        (Wr, O2iRight) => (4.0, 2.4),
    };
    GlobalKfParams { mu_db, sigma_db }
}

fn cursor(power_decay_time_ns: f64, avg_num_rays: f64, arrival_rate_per_ns: f64) -> CursorParams {
    CursorParams {
        power_decay_time_ns,
        avg_num_rays,
        arrival_rate_per_ns,
    }
}

const OUTDOOR_INTER: InterClusterParams = InterClusterParams {
    avg_num_clusters: 2.3,
    cluster_arrival_rate_per_ns: 0.008,
    mean_cluster_arrival_time_ns: 126.5,
    cluster_power_decay_per_ns: 0.03,
};

const INDOOR_INTER: InterClusterParams = InterClusterParams {
    avg_num_clusters: 2.2,
    cluster_arrival_rate_per_ns: 0.006,
    mean_cluster_arrival_time_ns: 179.68,
    cluster_power_decay_per_ns: 0.03,
};

const O2I_INTER: InterClusterParams = InterClusterParams {
    avg_num_clusters: 2.4,
    cluster_arrival_rate_per_ns: 0.012,
    mean_cluster_arrival_time_ns: 85.2,
    cluster_power_decay_per_ns: 0.05,
};

fn cluster_block(scenario: Scenario) -> (InterClusterParams, IntraClusterParams) {
    match scenario {
        Scenario::Outdoor => (
            OUTDOOR_INTER,
            IntraClusterParams {
                avg_num_rays: 47.0,
                rms_ds_ns: 4.63,
                pre: cursor(5.62, 16.0, 0.27),
                post: cursor(6.31, 30.0, 0.34),
            },
        ),
        Scenario::Indoor => (
            INDOOR_INTER,
            IntraClusterParams {
                avg_num_rays: 52.0,
                rms_ds_ns: 4.41,
                pre: cursor(5.56, 16.0, 0.29),
                post: cursor(7.09, 35.0, 0.31),
            },
        ),
        Scenario::O2iLeft | Scenario::O2iRight => (
            O2I_INTER,
            IntraClusterParams {
                avg_num_rays: 34.0,
                rms_ds_ns: 3.64,
                pre: cursor(6.58, 12.0, 0.36),
                post: cursor(6.39, 21.0, 0.36),
            },
        ),
    }
}

pub fn load_preset(scenario: Scenario, mode: Mode) -> Result<ScenarioParams> {
    let (inter, intra) = match mode {
        Mode::Irwr => {
            let (inter, intra) = cluster_block(scenario);
            (Some(inter), Some(intra))
        }
        Mode::Srwr | Mode::Wr => (None, None),
    };
    Ok(ScenarioParams {
        scenario,
        mode,
        kf: kf(scenario, mode),
        inter,
        intra,
        los_delay_ns: default_los_delay_ns(scenario),
    })
}

/// Parses `scenario:mode`, e.g. `outdoor:IRWR`.
pub fn parse_preset_key(key: &str) -> Result<(Scenario, Mode)> {
    let (s, m) = key
        .split_once(':')
        .ok_or_else(|| Error::UnknownPreset(format!("{key:?} (expected scenario:mode)")))?;
    Ok((s.parse()?, m.parse()?))
}

pub fn all_presets() -> Vec<ScenarioParams> {
    Mode::ALL
        .iter()
        .flat_map(|&m| Scenario::ALL.iter().map(move |&s| (s, m)))
        .map(|(s, m)| load_preset(s, m).expect("every pair is registered"))
        .collect()
}
