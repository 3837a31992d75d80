//! Matrix types and the scalar diagnostics the scaling algorithms rely on.

mod matrix;
mod metric;
mod prescale;
mod support;

pub use matrix::{NonNegMatrix, RowEntries, Storage};
pub use metric::{
    contraction_stats, hilbert_distance, kappa_from_log_theta, stochastic_residual, ContractionStats,
    CONTRACTION_MAX_DIM,
};
pub(crate) use metric::residual_of_sums;
pub use prescale::{hadamard_power, prescale, PrescaleMode, PrescaleResult};
pub use support::{maximum_matching, support_status, Matching, SupportStatus};
