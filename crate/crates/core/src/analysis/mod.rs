//! Moments and power-law fits, with Gaussianity and trace-distance diagnostics.

mod fit;
mod gaussian;
mod moments;
mod trace;

pub(crate) use fit::linear_fit;
pub use fit::{fit_power_law, fit_power_law_weighted, log_spaced_times, PowerLawFit};
pub use gaussian::{gaussianity_check, GaussianityReport};
pub use moments::{moments, Moments};
pub use trace::{
    trace_distance, trace_distance_channel, trace_distance_experiment, TraceDistanceSeries,
    TraceExperiment, GROWTH_TOLERANCE,
};
