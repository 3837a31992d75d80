//! Knight–Ruiz Newton balancing with conjugate-gradient inner solves.
//!
//! For symmetric `S` the iteration finds `x > 0` with `D(x)·S·x = 1`. Each
//! outer step solves `(D(x) S D(x) + D(S x ∘ x)) y = 1 − x ∘ S x` by CG and moves
//! `x ← x ∘ exp(α·y)`, which agrees with `x + α·(x ∘ y)` to first order and
//! stays positive. `α` starts at 1, capped so no `ln x_i` moves by more than 2,
//! and is halved until the residual does not grow. A nonsymmetric `B` is handled through `S = [[0, B], [Bᵀ, 0]]`,
//! applied implicitly; the two halves of the solution are `u` and `v`.

use crate::error::{Error, Result};
use crate::matcore::{support_status, NonNegMatrix};
use crate::scalar::Scalar;
use crate::sinkhorn::{powered_input, ScalingResult};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct NewtonOptions<T> {
    /// Target for `‖D(x)·S·x − 1‖_∞`.
    pub outer_tol: T,
    /// Relative residual at which CG stops.
    pub inner_tol: T,
    pub max_outer: usize,
    pub max_inner: usize,
}

impl<T: Scalar> NewtonOptions<T> {
    /// `outer_tol = 1/n`, `inner_tol = 1e-6`, 100 outer and `10·n` inner steps.
    pub fn for_dim(n: usize) -> Self {
        Self {
            outer_tol: T::one() / T::from_usize_lossy(n.max(1)),
            inner_tol: T::lit(1e-6),
            max_outer: 100,
            max_inner: 10 * n.max(1),
        }
    }

    pub fn with_outer_tol(mut self, tol: T) -> Self {
        self.outer_tol = tol;
        self
    }

    pub fn with_inner_tol(mut self, tol: T) -> Self {
        self.inner_tol = tol;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.outer_tol > T::zero()) || !(self.inner_tol > T::zero()) {
            return Err(Error::InvalidParameter("Newton tolerances must be positive".into()));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidParameter("Newton iteration limits must be at least 1".into()));
        }
        Ok(())
    }
}

/// The `2n × 2n` matrix `[[0, A], [Aᵀ, 0]]`, stored sparse.
pub fn symmetrize<T: Scalar>(a: &NonNegMatrix<T>) -> NonNegMatrix<T> {
    let n = a.dim();
    let upper = a.entries().map(|(i, j, v)| (i, n + j, v));
    let lower = a.entries().map(|(i, j, v)| (n + j, i, v));
    NonNegMatrix::from_triplets(2 * n, upper.chain(lower).collect::<Vec<_>>()).expect("indices lie inside 2n")
}

/// True for the inputs the bipartite formulation is known to handle slowly.
pub fn is_slow_regime<T: Scalar>(b: &NonNegMatrix<T>) -> bool {
    b.is_sparse() && !b.is_symmetric()
}

enum Operator<'a, T> {
    Symmetric(&'a NonNegMatrix<T>),
    Bipartite(&'a NonNegMatrix<T>),
}

impl<T: Scalar> Operator<'_, T> {
    fn len(&self) -> usize {
        match self {
            Operator::Symmetric(b) => b.dim(),
            Operator::Bipartite(b) => 2 * b.dim(),
        }
    }

    fn apply(&self, z: &[T]) -> Vec<T> {
        match self {
            Operator::Symmetric(b) => b.mul_vec(z),
            Operator::Bipartite(b) => {
                let n = b.dim();
                let mut out = b.mul_vec(&z[n..]);
                out.extend(b.mul_vec_transpose(&z[..n]));
                out
            }
        }
    }
}

struct Counter(usize);

fn residual<T: Scalar>(op: &Operator<'_, T>, z: &[T], work: &mut Counter) -> (Vec<T>, T) {
    work.0 += 1;
    let sz = op.apply(z);
    let v: Vec<T> = z.iter().zip(&sz).map(|(&a, &b)| a * b).collect();
    let r = v.iter().fold(T::zero(), |acc, &t| acc.max((t - T::one()).abs()));
    (v, r)
}

fn dot<T: Scalar>(a: &[T], b: &[T]) -> T {
    a.iter().zip(b).map(|(&x, &y)| x * y).sum()
}

/// Plain CG for `(D(x) S D(x) + D(v)) y = rhs` from `y = 0`.
///
/// Returns the iterate reached and its relative residual.
fn cg_solve<T: Scalar>(
    op: &Operator<'_, T>,
    x: &[T],
    v: &[T],
    rhs: &[T],
    tol: T,
    max_iter: usize,
    work: &mut Counter,
) -> (Vec<T>, T) {
    let m = rhs.len();
    let mut y = vec![T::zero(); m];
    let mut r = rhs.to_vec();
    let bnorm = dot(rhs, rhs).sqrt();
    if bnorm == T::zero() {
        return (y, T::zero());
    }
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    for _ in 0..max_iter {
        if rr.sqrt() <= tol * bnorm {
            break;
        }
        let xp: Vec<T> = x.iter().zip(&p).map(|(&a, &b)| a * b).collect();
        work.0 += 1;
        let sxp = op.apply(&xp);
        let mp: Vec<T> = (0..m).map(|k| x[k] * sxp[k] + v[k] * p[k]).collect();
        let curv = dot(&p, &mp);
        if !(curv > T::epsilon() * rr) {
            break;
        }
        let alpha = rr / curv;
        for k in 0..m {
            y[k] = y[k] + alpha * p[k];
            r[k] = r[k] - alpha * mp[k];
        }
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        rr = rr_new;
        for k in 0..m {
            p[k] = r[k] + beta * p[k];
        }
    }
    (y, rr.sqrt() / bnorm)
}

/// Largest change of any `ln x_i` in one outer step.
const STEP_CAP: f64 = 2.0;
const WARM_STEPS: usize = 3;

struct Solve<T> {
    z: Vec<T>,
    outer: usize,
    residual: T,
    converged: bool,
    history: Vec<T>,
}

fn newton_core<T: Scalar>(op: &Operator<'_, T>, total: T, opts: &NewtonOptions<T>, work: &mut Counter) -> Solve<T> {
    let m = op.len();
    let half = T::lit(0.5);
    let guard = T::lit(1e-12);
    let cap = T::lit(STEP_CAP);
    let mut z = vec![(T::from_usize_lossy(m) / total).sqrt(); m];
    // a few symmetric fixed-point steps give a start the damped iteration can leave
    for _ in 0..WARM_STEPS {
        work.0 += 1;
        let sz = op.apply(&z);
        for (a, &b) in z.iter_mut().zip(&sz) {
            *a = (*a / b).sqrt();
        }
    }
    let (mut v, mut res) = residual(op, &z, work);
    let mut history = vec![res];
    let mut outer = 0;
    let mut converged = res <= opts.outer_tol;
    while !converged && outer < opts.max_outer {
        let rhs: Vec<T> = v.iter().map(|&t| T::one() - t).collect();
        let (y, _) = cg_solve(op, &z, &v, &rhs, opts.inner_tol, opts.max_inner, work);
        let ymax = y.iter().fold(T::zero(), |acc, &t| acc.max(t.abs()));
        if !ymax.is_finite() {
            break;
        }
        let mut alpha = if ymax > cap { cap / ymax } else { T::one() };
        let mut accepted = None;
        while alpha >= guard {
            let trial: Vec<T> = z.iter().zip(&y).map(|(&a, &d)| a * (alpha * d).exp()).collect();
            if trial.iter().all(|&t| t > T::zero() && t.is_finite()) {
                let (tv, tr) = residual(op, &trial, work);
                if tr <= res + guard {
                    accepted = Some((trial, tv, tr));
                    break;
                }
            }
            alpha = alpha * half;
        }
        let Some((nz, nv, nr)) = accepted else { break };
        z = nz;
        v = nv;
        res = nr;
        outer += 1;
        history.push(res);
        converged = res <= opts.outer_tol;
    }
    Solve { z, outer, residual: res, converged, history }
}

/// Newton balancing of the prescaled `A^(p)`.
///
/// `iterations` counts accepted outer steps and `work_units` every product
/// with the (possibly symmetrized) matrix.
pub fn newton_scale<T: Scalar>(a: &NonNegMatrix<T>, p: T, opts: &NewtonOptions<T>) -> Result<ScalingResult<T>> {
    newton_scale_traced(a, p, opts).map(|(r, _)| r)
}

/// As [`newton_scale`], also returning `‖f‖_∞` after the start and each accepted step.
pub fn newton_scale_traced<T: Scalar>(a: &NonNegMatrix<T>, p: T, opts: &NewtonOptions<T>) -> Result<(ScalingResult<T>, Vec<T>)> {
    opts.validate()?;
    if !support_status(a).has_support() {
        return Err(Error::NoSupport);
    }
    let (b, map, _) = powered_input(a, p)?;
    let n = b.dim();
    let total: T = b.entries().map(|(_, _, v)| v).sum();
    let mut work = Counter(0);
    let (x, log_u, log_v, solve) = if b.is_symmetric() {
        let s = newton_core(&Operator::Symmetric(&b), total, opts, &mut work);
        let logs: Vec<T> = s.z.iter().map(|t| t.ln()).collect();
        let x = b.map_positive(|i, j, val| s.z[i] * val * s.z[j])?;
        (x, logs.clone(), logs, s)
    } else {
        let s = newton_core(&Operator::Bipartite(&b), total + total, opts, &mut work);
        let x = b.map_positive(|i, j, val| s.z[i] * val * s.z[n + j])?;
        let lu = s.z[..n].iter().map(|t| t.ln()).collect();
        let lv = s.z[n..].iter().map(|t| t.ln()).collect();
        (x, lu, lv, s)
    };
    let result = ScalingResult {
        x,
        log_u,
        log_v,
        iterations: solve.outer,
        residual: solve.residual,
        converged: solve.converged,
        input_map: map,
        work_units: Some(work.0),
    };
    Ok((result, solve.history))
}
