//! Classical Sinkhorn balancing and the fixed-`p` preprocessing scaling.
//!
//! One iteration is a *double step*: divide every row by its sum, then every
//! column by its sum. After the column step the iterate is column-stochastic
//! and the residual is `max_i |r_i − 1|` over its row sums.

use crate::error::{Error, Result};
use crate::matcore::{hadamard_power, prescale, residual_of_sums, support_status, NonNegMatrix, PrescaleResult};
use crate::scalar::Scalar;

/// Tolerance, iteration cap and deformation parameter shared by the scaling routines.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ScaleOptions<T> {
    pub epsilon: T,
    pub max_iters: usize,
    /// Exponent applied to the original input, `X(p)` scales `A^(p)`.
    pub p: T,
}

impl<T: Scalar> ScaleOptions<T> {
    /// `ε = 1/n`, `10·n + 10⁴` iterations, `p = 100`.
    pub fn for_dim(n: usize) -> Self {
        Self {
            epsilon: T::one() / T::from_usize_lossy(n.max(1)),
            max_iters: 10 * n + 10_000,
            p: T::lit(100.0),
        }
    }

    pub fn with_p(mut self, p: T) -> Self {
        self.p = p;
        self
    }

    pub fn with_epsilon(mut self, epsilon: T) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iters(mut self, max_iters: usize) -> Self {
        self.max_iters = max_iters;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > T::zero()) {
            return Err(Error::InvalidParameter(format!("epsilon must be positive, got {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if !(self.p > T::zero()) || !self.p.is_finite() {
            return Err(Error::InvalidParameter(format!("p must be positive and finite, got {}", self.p)));
        }
        Ok(())
    }
}

/// Relation between the matrix actually balanced (`B`) and the caller's input `A`:
/// `ln b_ij = exponent · ln a_ij − log_offset` on the pattern.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InputMap<T> {
    pub exponent: T,
    pub log_offset: T,
}

impl<T: Scalar> InputMap<T> {
    pub fn identity() -> Self {
        Self { exponent: T::one(), log_offset: T::zero() }
    }

    pub fn log_entry(&self, a: T) -> T {
        self.exponent * a.ln() - self.log_offset
    }
}

/// Outcome of a diagonal scaling `X = diag(u) · B · diag(v)`.
#[derive(Clone, Debug)]
pub struct ScalingResult<T> {
    pub x: NonNegMatrix<T>,
    /// `ln u`; multipliers are kept in log space so large `p` cannot underflow them.
    pub log_u: Vec<T>,
    pub log_v: Vec<T>,
    pub iterations: usize,
    pub residual: T,
    pub converged: bool,
    pub input_map: InputMap<T>,
    /// Matrix-vector products spent, for Newton-type solvers.
    pub work_units: Option<usize>,
}

impl<T: Scalar> ScalingResult<T> {
    pub fn u(&self) -> Vec<T> {
        self.log_u.iter().map(|l| l.exp()).collect()
    }

    pub fn v(&self) -> Vec<T> {
        self.log_v.iter().map(|l| l.exp()).collect()
    }

    /// Rebuilds the balanced matrix `B` from the original input.
    pub fn scaled_input(&self, a: &NonNegMatrix<T>) -> Result<NonNegMatrix<T>> {
        let map = self.input_map;
        a.map_positive(|_, _, v| map.log_entry(v).exp())
    }

    /// Multipliers against `A^(exponent)` itself: `X = diag(u') · A^(exponent) · diag(v)`.
    pub fn log_multipliers_for_input(&self) -> (Vec<T>, Vec<T>) {
        let off = self.input_map.log_offset;
        (self.log_u.iter().map(|&l| l - off).collect(), self.log_v.clone())
    }

    /// Largest relative deviation of `x_ij` from `u_i b_ij v_j`, evaluated in log space.
    pub fn factorization_error(&self, b: &NonNegMatrix<T>) -> T {
        factorization_error(&self.x, b, &self.log_u, &self.log_v)
    }
}

pub(crate) fn factorization_error<T: Scalar>(x: &NonNegMatrix<T>, b: &NonNegMatrix<T>, log_u: &[T], log_v: &[T]) -> T {
    let mut worst = T::zero();
    for (i, j, bij) in b.entries() {
        let xij = x.get(i, j);
        let model = (log_u[i] + bij.ln() + log_v[j]).exp();
        if xij == T::zero() && model == T::zero() {
            continue;
        }
        worst = worst.max((xij - model).abs() / xij.max(model));
    }
    worst
}

/// State exposed to observers after each double step.
pub struct SinkhornStep<'a, T> {
    pub iteration: usize,
    /// Row sums that the row step divided by.
    pub row_sums: &'a [T],
    /// Column sums of the row-normalized iterate, divided out by the column step.
    pub col_sums: &'a [T],
    pub residual: T,
    pub x: &'a NonNegMatrix<T>,
    pub log_u: &'a [T],
    pub log_v: &'a [T],
}

fn checked_sums<T: Scalar>(sums: &[T]) -> Result<()> {
    for &s in sums {
        if !(s > T::zero()) {
            return Err(Error::NoSupport);
        }
        if !s.is_finite() {
            return Err(Error::ExponentRange { exponent: f64::INFINITY, limit: T::max_exponent().to_f64().unwrap_or(0.0) });
        }
    }
    Ok(())
}

/// Balances `b` toward a bistochastic matrix; see [`sinkhorn_scale_with`].
pub fn sinkhorn_scale<T: Scalar>(b: &NonNegMatrix<T>, opts: &ScaleOptions<T>) -> Result<ScalingResult<T>> {
    sinkhorn_scale_with(b, opts, |_| {})
}

/// Sinkhorn balancing with a per-step observer.
///
/// Stops once the column-stochastic iterate has residual `≤ ε`, or after
/// `max_iters` double steps with `converged = false`.
pub fn sinkhorn_scale_with<T: Scalar>(
    b: &NonNegMatrix<T>,
    opts: &ScaleOptions<T>,
    mut observer: impl FnMut(&SinkhornStep<'_, T>),
) -> Result<ScalingResult<T>> {
    opts.validate()?;
    if !support_status(b).has_support() {
        return Err(Error::NoSupport);
    }
    let n = b.dim();
    let mut x = b.clone();
    let mut log_u = vec![T::zero(); n];
    let mut log_v = vec![T::zero(); n];
    let mut row_sums = x.row_sums();
    let mut residual = T::infinity();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        checked_sums(&row_sums)?;
        let inv: Vec<T> = row_sums.iter().map(|s| s.recip()).collect();
        x.scale_rows(&inv);
        for (l, s) in log_u.iter_mut().zip(&row_sums) {
            *l = *l - s.ln();
        }
        let col_sums = x.col_sums();
        checked_sums(&col_sums)?;
        let inv: Vec<T> = col_sums.iter().map(|s| s.recip()).collect();
        x.scale_cols(&inv);
        for (l, s) in log_v.iter_mut().zip(&col_sums) {
            *l = *l - s.ln();
        }
        iterations += 1;
        let next_rows = x.row_sums();
        residual = residual_of_sums(&next_rows);
        observer(&SinkhornStep {
            iteration: iterations,
            row_sums: &row_sums,
            col_sums: &col_sums,
            residual,
            x: &x,
            log_u: &log_u,
            log_v: &log_v,
        });
        row_sums = next_rows;
        if residual <= opts.epsilon {
            converged = true;
            break;
        }
    }
    Ok(ScalingResult {
        x,
        log_u,
        log_v,
        iterations,
        residual,
        converged,
        input_map: InputMap::identity(),
        work_units: None,
    })
}

/// Prescaled Hadamard power of `a` suitable for balancing at parameter `p`.
///
/// The prescaled matrix (entries in `[1, e]`, exponent `m`) is raised to `p/m`,
/// which equals `A^(p) / min(A)^p`. Its scaling is therefore `X(p)` of the
/// input. Fails with [`Error::ExponentRange`] when the entries would overflow.
pub fn powered_input<T: Scalar>(a: &NonNegMatrix<T>, p: T) -> Result<(NonNegMatrix<T>, InputMap<T>, PrescaleResult<T>)> {
    if !(p > T::zero()) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be positive and finite, got {p}")));
    }
    let pre = prescale(a)?;
    let eff = p / pre.exponent_m;
    let needed = eff * pre.log_range() + T::from_usize_lossy(a.dim()).ln();
    let limit = T::max_exponent();
    if needed > limit {
        return Err(Error::ExponentRange { exponent: needed.to_f64().unwrap_or(f64::INFINITY), limit: limit.to_f64().unwrap_or(0.0) });
    }
    let b = hadamard_power(&pre.matrix, eff)?;
    let map = InputMap { exponent: p, log_offset: eff * pre.log_divisor };
    Ok((b, map, pre))
}

/// Fixed-`p` preprocessing scaling: prescale, Hadamard power, Sinkhorn.
///
/// The returned multipliers are against the balanced matrix; its relation to
/// `a` is recorded in [`ScalingResult::input_map`].
pub fn p_sinkhorn_preprocess<T: Scalar>(a: &NonNegMatrix<T>, opts: &ScaleOptions<T>) -> Result<ScalingResult<T>> {
    opts.validate()?;
    let (b, map, _) = powered_input(a, opts.p)?;
    let mut res = sinkhorn_scale(&b, opts)?;
    res.input_map = map;
    Ok(res)
}

/// `J_p(X) = Σ x_ij ln a_ij − p⁻¹ Σ x_ij ln x_ij` over the positive entries of `X`.
///
/// Returns `−∞` when `X` is positive somewhere `A` vanishes.
pub fn entropy_objective<T: Scalar>(x: &NonNegMatrix<T>, a: &NonNegMatrix<T>, p: T) -> T {
    let mut linear = T::zero();
    let mut negentropy = T::zero();
    for (i, j, xij) in x.entries() {
        let aij = a.get(i, j);
        if aij == T::zero() {
            return T::neg_infinity();
        }
        linear = linear + xij * aij.ln();
        negentropy = negentropy + xij * xij.ln();
    }
    linear - negentropy / p
}
