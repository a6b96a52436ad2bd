//! States, measurements and channels.

mod channel;
mod povm;
mod state;

pub use channel::{
    adjoint_channel, apply_channel, channel_compose, channel_tensor_identity, measurement_channel, superop_trace,
    Channel, LinearMap, CP_TOL, REPRESENTATION_TOL, TP_TOL,
};
pub(crate) use channel::measure_and_prepare_map;
pub use povm::{check_deterministic_postprocessing, Povm, StochasticMap, COMPLETENESS_TOL};
pub use state::{ClassicalState, DensityMatrix, OUTPUT_CLAMP};
