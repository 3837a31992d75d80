//! End-to-end preprocessing: scale, threshold, solve the reduced assignment problem.

use std::fmt;
use std::str::FromStr;

use crate::deformed::{deformed_sinkhorn, Schedule, VALIDITY_MAX_DIM};
use crate::error::{Error, Result};
use crate::logdomain::{certificate_bound, log_sinkhorn_scale};
use crate::matcore::{contraction_stats, NonNegMatrix};
use crate::newton::{is_slow_regime, newton_scale, NewtonOptions};
use crate::reduce::{certificate_gap, solve_assignment, solve_reduced, threshold_reduce, AssignmentSolution, ReducedProblem};
use crate::scalar::Scalar;
use crate::sinkhorn::{p_sinkhorn_preprocess, ScaleOptions};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Method {
    Sinkhorn,
    LogSinkhorn,
    Newton,
    Deformed,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Sinkhorn => "sinkhorn",
            Method::LogSinkhorn => "log-sinkhorn",
            Method::Newton => "newton",
            Method::Deformed => "deformed",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('_', "-").as_str() {
            "sinkhorn" => Ok(Method::Sinkhorn),
            "log-sinkhorn" | "log" | "logdomain" => Ok(Method::LogSinkhorn),
            "newton" => Ok(Method::Newton),
            "deformed" => Ok(Method::Deformed),
            _ => Err(Error::InvalidParameter(format!("unknown method `{s}`"))),
        }
    }
}

/// Default factor in `a = factor / ln θ` for the deformed schedule.
pub const SCHEDULE_FACTOR: f64 = 1.9;

#[derive(Clone, Copy, Debug)]
pub struct PipelineOptions<T> {
    pub method: Method,
    pub scale: ScaleOptions<T>,
    /// Defaults to `1/n`.
    pub threshold: Option<T>,
    /// Deformed schedule coefficient; defaults to `1.9 / ln θ(A)`.
    pub schedule_a: Option<T>,
}

impl<T: Scalar> PipelineOptions<T> {
    pub fn new(method: Method, n: usize) -> Self {
        Self { method, scale: ScaleOptions::for_dim(n), threshold: None, schedule_a: None }
    }
}

#[derive(Clone, Debug)]
pub struct PipelineOutcome<T> {
    /// Method that produced `x`; differs from the request after a range fallback.
    pub method_used: Method,
    /// The requested method would overflow at this `p`; the log-domain iteration ran instead.
    pub range_fallback: bool,
    pub x: NonNegMatrix<T>,
    /// Sinkhorn-type double steps, Newton outer steps, or deformed steps.
    pub iterations: usize,
    pub work_units: Option<usize>,
    pub converged: bool,
    pub residual: T,
    pub threshold: T,
    pub reduced: ReducedProblem<T>,
    pub solution: AssignmentSolution<T>,
    /// The reduced problem had no perfect matching and the full problem was solved.
    pub full_solve_fallback: bool,
    pub certificate_bound: Option<T>,
    pub certificate_gap: Option<T>,
    /// Schedule coefficient and its validity flag for the deformed method.
    pub schedule: Option<(T, Option<bool>)>,
    /// Flags raised along the way.
    pub notes: Vec<String>,
}

struct Scaled<T> {
    x: NonNegMatrix<T>,
    iterations: usize,
    work_units: Option<usize>,
    converged: bool,
    residual: T,
    bound: Option<T>,
}

fn log_domain<T: Scalar>(a: &NonNegMatrix<T>, opts: &ScaleOptions<T>) -> Result<Scaled<T>> {
    let (s, r) = log_sinkhorn_scale(a, opts.p, opts)?;
    Ok(Scaled { x: r.x, iterations: r.iterations, work_units: None, converged: r.converged, residual: r.residual, bound: Some(certificate_bound(&s)) })
}

/// Runs the full preprocessing on `a`.
pub fn run_pipeline<T: Scalar>(a: &NonNegMatrix<T>, opts: &PipelineOptions<T>) -> Result<PipelineOutcome<T>> {
    let n = a.dim();
    let t = opts.threshold.unwrap_or_else(|| T::one() / T::from_usize_lossy(n));
    let mut notes = Vec::new();
    let mut method_used = opts.method;
    let mut range_fallback = false;
    let mut schedule = None;
    let mut with_fallback = |res: Result<Scaled<T>>, notes: &mut Vec<String>| -> Result<Scaled<T>> {
        match res {
            Err(Error::ExponentRange { .. }) => {
                notes.push(format!("p = {} exceeds the floating-point range; used log-sinkhorn", opts.scale.p));
                range_fallback = true;
                method_used = Method::LogSinkhorn;
                log_domain(a, &opts.scale)
            }
            other => other,
        }
    };
    let scaled = match opts.method {
        Method::Sinkhorn => {
            let r = p_sinkhorn_preprocess(a, &opts.scale).map(|r| Scaled {
                x: r.x,
                iterations: r.iterations,
                work_units: None,
                converged: r.converged,
                residual: r.residual,
                bound: None,
            });
            with_fallback(r, &mut notes)?
        }
        Method::LogSinkhorn => log_domain(a, &opts.scale)?,
        Method::Newton => {
            let nopts = NewtonOptions::for_dim(n).with_outer_tol(opts.scale.epsilon);
            if is_slow_regime(a) {
                notes.push("sparse nonsymmetric input: Newton runs on the bipartite form, which is known to be slow here".into());
            }
            let r = newton_scale(a, opts.scale.p, &nopts).map(|r| Scaled {
                x: r.x,
                iterations: r.iterations,
                work_units: r.work_units,
                converged: r.converged,
                residual: r.residual,
                bound: None,
            });
            with_fallback(r, &mut notes)?
        }
        Method::Deformed => {
            let coeff = match opts.schedule_a {
                Some(a) => a,
                None => {
                    let lt = if n <= VALIDITY_MAX_DIM { contraction_stats(a)?.log_theta } else { T::infinity() };
                    if lt.is_finite() && lt > T::zero() {
                        T::lit(SCHEDULE_FACTOR) / lt
                    } else {
                        notes.push("θ(A) is infinite or unavailable; schedule coefficient set to 1".into());
                        T::one()
                    }
                }
            };
            let s = Schedule::Logarithmic { a: coeff };
            let tr = deformed_sinkhorn(a, &s, &opts.scale)?;
            if tr.outside_hypotheses {
                notes.push("matrix has zeros: logarithmic schedule is outside the convergence theorem's hypotheses".into());
            }
            if tr.schedule_valid == Some(false) {
                notes.push("a·ln θ ≥ 2: schedule grows faster than the convergence theorem allows".into());
            }
            schedule = Some((coeff, tr.schedule_valid));
            let residual = tr.records.last().map_or(T::infinity(), |r| r.d_col);
            Scaled { x: tr.z, iterations: tr.iterations, work_units: None, converged: tr.converged, residual, bound: None }
        }
    };

    let reduced = threshold_reduce(&scaled.x, a, t)?;
    let (solution, full_solve_fallback) = match solve_reduced(&reduced) {
        Ok(sol) => (sol, false),
        Err(Error::Infeasible) => {
            notes.push("reduced problem has no perfect matching; solved the full problem".into());
            (solve_assignment(a)?, true)
        }
        Err(e) => return Err(e),
    };
    let gap = scaled.bound.map(|b| certificate_gap(&solution, b));
    Ok(PipelineOutcome {
        method_used,
        range_fallback,
        x: scaled.x,
        iterations: scaled.iterations,
        work_units: scaled.work_units,
        converged: scaled.converged,
        residual: scaled.residual,
        threshold: t,
        reduced,
        solution,
        full_solve_fallback,
        certificate_bound: scaled.bound,
        certificate_gap: gap,
        schedule,
        notes,
    })
}
