use std::fmt::Write as _;
use std::time::Instant;

use anyhow::Result;
use oap_scaling::instances::{InstanceSpec, GENERATOR_VERSION};
use oap_scaling::pipeline::{run_pipeline, PipelineOptions};
use oap_scaling::{Matrix, Method};
use serde::Serialize;

use crate::PreprocessArgs;

/// One preprocessing run.
#[derive(Serialize, Debug)]
pub struct RunReport {
    pub instance: String,
    pub generator: Option<&'static str>,
    pub n: usize,
    pub method: String,
    /// Differs from `method` when the requested one could not represent `A^(p)`.
    pub method_used: String,
    pub p: Option<f64>,
    pub schedule_a: Option<f64>,
    pub schedule_valid: Option<bool>,
    pub epsilon: f64,
    pub threshold: f64,
    /// Sinkhorn double steps, deformed steps, or Newton work units.
    pub iterations: usize,
    pub outer_steps: usize,
    pub work_units: Option<usize>,
    pub converged: bool,
    pub residual: f64,
    pub nnz_before: usize,
    pub nnz_after: usize,
    pub remaining_percent: f64,
    pub val_oap: f64,
    pub sigma: Vec<usize>,
    pub certificate_bound: Option<f64>,
    pub certificate_gap: Option<f64>,
    pub range_fallback: bool,
    pub full_solve_fallback: bool,
    pub wall_time_ms: f64,
    pub notes: Vec<String>,
}

impl RunReport {
    /// 0 when converged and the reduced problem was enough, 2 otherwise.
    pub fn exit_code(&self) -> u8 {
        if self.converged && !self.full_solve_fallback {
            0
        } else {
            2
        }
    }

    pub fn table(&self) -> String {
        let opt = |v: Option<f64>| v.map_or("-".to_string(), |x| format!("{x:.6e}"));
        let rows = [
            ("instance", self.instance.clone()),
            ("method", self.method_used.clone()),
            ("p", self.p.map_or("-".into(), |p| p.to_string())),
            ("iterations", self.iterations.to_string()),
            ("converged", self.converged.to_string()),
            ("nnz", format!("{} -> {}", self.nnz_before, self.nnz_after)),
            ("remaining %", format!("{:.4}", self.remaining_percent)),
            ("val_oap", format!("{:.6e}", self.val_oap)),
            ("bound", opt(self.certificate_bound)),
            ("gap", opt(self.certificate_gap)),
            ("time ms", format!("{:.1}", self.wall_time_ms)),
        ];
        let mut s = String::new();
        for (k, v) in rows {
            let _ = writeln!(s, "{k:<12} {v}");
        }
        for n in &self.notes {
            let _ = writeln!(s, "{:<12} {n}", "note");
        }
        s
    }
}

pub fn preprocess(spec: &InstanceSpec, a: &Matrix, args: &PreprocessArgs) -> Result<RunReport> {
    let n = a.dim();
    let mut opts = PipelineOptions::new(args.method, n);
    opts.scale = opts.scale.with_p(args.p);
    if let Some(e) = args.epsilon {
        opts.scale = opts.scale.with_epsilon(e);
    }
    if let Some(m) = args.max_iters {
        opts.scale = opts.scale.with_max_iters(m);
    }
    opts.threshold = args.threshold;
    opts.schedule_a = args.schedule_a;
    opts.scale.validate()?;

    let start = Instant::now();
    let out = run_pipeline(a, &opts)?;
    let wall_time_ms = start.elapsed().as_secs_f64() * 1e3;

    let deformed = args.method == Method::Deformed;
    let iterations = match (out.method_used, out.work_units) {
        (Method::Newton, Some(w)) => w,
        _ => out.iterations,
    };
    let (nnz_before, nnz_after) = (a.nnz(), out.reduced.kept_count);
    Ok(RunReport {
        instance: spec.describe(),
        generator: spec.family.is_random().then_some(GENERATOR_VERSION),
        n,
        method: args.method.to_string(),
        method_used: out.method_used.to_string(),
        p: (!deformed).then_some(args.p),
        schedule_a: out.schedule.map(|s| s.0),
        schedule_valid: out.schedule.and_then(|s| s.1),
        epsilon: opts.scale.epsilon,
        threshold: out.threshold,
        iterations,
        outer_steps: out.iterations,
        work_units: out.work_units,
        converged: out.converged,
        residual: out.residual,
        nnz_before,
        nnz_after,
        remaining_percent: 100.0 * nnz_after as f64 / nnz_before as f64,
        val_oap: out.solution.log_value,
        sigma: out.solution.sigma,
        certificate_bound: out.certificate_bound,
        certificate_gap: out.certificate_gap,
        range_fallback: out.range_fallback,
        full_solve_fallback: out.full_solve_fallback,
        wall_time_ms,
        notes: out.notes,
    })
}
