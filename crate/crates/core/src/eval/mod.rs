//! Monte-Carlo error-rate measurement and cross-channel experiments.

pub mod codecs;
pub mod experiments;
pub mod stats;
pub mod sweep;

pub use codecs::{Codec, MlProductCodec, Uncoded};
pub use experiments::{
    adaptivity_experiment, robustness_experiment, widened_snrs, AdaptivityReport, ExperimentKind, ExperimentPlan,
    FineTunedReport, RobustnessReport,
};
pub use stats::ErrorStats;
pub use sweep::{
    monte_carlo_sweep, parse_sweep_csv, validate_grid, CsvRow, StopRule, SweepPoint, SweepResult, CSV_HEADER,
};
