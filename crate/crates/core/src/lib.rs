//! Small-scale channel modeling for links assisted by a reconfigurable
//! intelligent surface: sweep processing, multipath clustering, parameter
//! estimation and stochastic drop synthesis.

pub mod clustering;
pub mod dsp;
pub mod ensemble;
pub mod error;
pub mod estimation;
pub mod io;
pub mod model;
pub mod presets;
pub mod report;
pub mod roundtrip;
pub mod synthesis;

mod serde_f64;

pub use error::{Error, Result};
pub use model::{
    Cluster, CursorParams, FrequencyGrid, FrequencySweep, GlobalKfParams, ImpulseResponse,
    InterClusterParams, IntraClusterParams, Mode, Mpc, MpcSet, Pdp, Scenario, ScenarioParams,
    SweepLabel,
};
