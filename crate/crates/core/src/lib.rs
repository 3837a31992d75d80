//! Entropy-regularized diagonal scaling as a preprocessing step for the
//! optimal assignment problem.
//!
//! For a nonnegative matrix `A` and a deformation parameter `p`, the
//! bistochastic scaling `X(p)` of the Hadamard power `A^(p)` concentrates on
//! the optimal permutations as `p` grows. Deleting entries of `X(p)` below
//! `1/n` leaves a much smaller assignment problem with the same optimum.
//!
//! The algorithms are generic over [`Scalar`]; the aliases below fix `f64`.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod deformed;
pub mod error;
pub mod instances;
pub mod logdomain;
pub mod matcore;
pub mod newton;
pub mod pipeline;
pub mod reduce;
pub mod scalar;
pub mod sinkhorn;

pub use error::{Error, Result};
pub use matcore::{NonNegMatrix, SupportStatus};
pub use scalar::Scalar;

pub type Matrix = matcore::NonNegMatrix<f64>;
pub type Matrix32 = matcore::NonNegMatrix<f32>;
pub type ScalingResult = sinkhorn::ScalingResult<f64>;
pub type ScaleOptions = sinkhorn::ScaleOptions<f64>;
pub type LogScaling = logdomain::LogScaling<f64>;
pub type NewtonOptions = newton::NewtonOptions<f64>;
pub type Schedule = deformed::Schedule<f64>;
pub type DeformedTrace = deformed::DeformedTrace<f64>;
pub type AssignmentSolution = reduce::AssignmentSolution<f64>;
pub type ReducedProblem = reduce::ReducedProblem<f64>;
pub type PipelineOptions = pipeline::PipelineOptions<f64>;
pub type PipelineOutcome = pipeline::PipelineOutcome<f64>;

pub use pipeline::{run_pipeline, Method};
