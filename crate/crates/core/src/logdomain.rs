//! Sinkhorn iteration in log coordinates and the optimality certificate it yields.
//!
//! With `b_ij = ln a'_ij` on the prescaled matrix and `p' = p/m`, one double step is
//!
//! ```text
//! ū_i = −max_j (b_ij + v̄_j) − ζ_i,   ζ_i = p'⁻¹ ln Σ_j exp(p' x̂_ij)
//! v̄_j = −max_i (b_ij + ū_i) − η_j,   η_j = p'⁻¹ ln Σ_i exp(p' ŷ_ij)
//! ```
//!
//! where `x̂`, `ŷ` are the max-shifted exponents (all `≤ 0`). Every quantity
//! stays finite for any finite `p`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::matcore::{prescale, residual_of_sums, support_status, NonNegMatrix};
use crate::scalar::Scalar;
use crate::sinkhorn::{InputMap, ScaleOptions, ScalingResult};

const PAR_MIN_NNZ: usize = 1 << 16;

/// Log-domain multipliers of the prescaled problem.
#[derive(Clone, Debug)]
pub struct LogScaling<T> {
    /// `p'⁻¹ ln U`.
    pub u_bar: Vec<T>,
    /// `p'⁻¹ ln V`.
    pub v_bar: Vec<T>,
    /// Row stabilizers from the last row step.
    pub zeta: Vec<T>,
    /// Exponent requested for the original input.
    pub p: T,
    /// `p' = p/m`, the exponent applied to the prescaled matrix.
    pub p_effective: T,
    pub iterations: usize,
    pub residual: T,
    pub converged: bool,
    /// Prescale exponent `m` and `ln c`.
    pub prescale_m: T,
    pub prescale_log_c: T,
    /// Column multipliers the last row step was computed from; the bound pairs them with `u_bar`.
    pub v_bar_for_bound: Vec<T>,
}

/// Per-step view handed to observers of [`log_sinkhorn_scale_with`].
pub struct LogStep<'a, T> {
    pub iteration: usize,
    pub u_bar: &'a [T],
    pub v_bar: &'a [T],
    pub zeta: &'a [T],
    pub residual: T,
    /// Certificate for the original input after this step.
    pub bound: T,
    /// Largest shifted exponent seen in either half step; never positive.
    pub max_shifted: T,
}

/// Pattern of logs in both row-major and column-major order.
struct LogPattern<T> {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<T>,
    col_ptr: Vec<usize>,
    rows: Vec<usize>,
    tvals: Vec<T>,
}

impl<T: Scalar> LogPattern<T> {
    fn new(a: &NonNegMatrix<T>) -> Self {
        let n = a.dim();
        let mut row_ptr = Vec::with_capacity(n + 1);
        let mut cols = Vec::new();
        let mut vals = Vec::new();
        row_ptr.push(0);
        let mut col_count = vec![0usize; n];
        for i in 0..n {
            for (j, v) in a.row(i) {
                cols.push(j);
                vals.push(v.ln());
                col_count[j] += 1;
            }
            row_ptr.push(cols.len());
        }
        let mut col_ptr = vec![0usize; n + 1];
        for j in 0..n {
            col_ptr[j + 1] = col_ptr[j] + col_count[j];
        }
        let mut fill = col_ptr.clone();
        let mut rows = vec![0usize; cols.len()];
        let mut tvals = vec![T::zero(); cols.len()];
        for i in 0..n {
            for k in row_ptr[i]..row_ptr[i + 1] {
                let j = cols[k];
                rows[fill[j]] = i;
                tvals[fill[j]] = vals[k];
                fill[j] += 1;
            }
        }
        Self { n, row_ptr, cols, vals, col_ptr, rows, tvals }
    }

    fn parallel(&self) -> bool {
        self.vals.len() >= PAR_MIN_NNZ
    }
}

/// One half step: for each line `k`, returns `(max, stabilizer)` with
/// `max = max_l (b_kl + other_l)` and `stabilizer = p⁻¹ ln Σ exp(p (b_kl + other_l − max))`.
fn half_step<T: Scalar>(ptr: &[usize], idx: &[usize], vals: &[T], other: &[T], p: T, parallel: bool) -> (Vec<T>, Vec<T>, T) {
    let line = |k: usize| {
        let range = ptr[k]..ptr[k + 1];
        let mut mx = T::neg_infinity();
        for t in range.clone() {
            mx = mx.max(vals[t] + other[idx[t]]);
        }
        let mut s = T::zero();
        let mut top = T::neg_infinity();
        for t in range {
            let shifted = vals[t] + other[idx[t]] - mx;
            top = top.max(shifted);
            s = s + (p * shifted).exp();
        }
        (mx, s.ln() / p, top)
    };
    let n = ptr.len() - 1;
    let out: Vec<(T, T, T)> = if parallel { (0..n).into_par_iter().map(line).collect() } else { (0..n).map(line).collect() };
    let top = out.iter().fold(T::neg_infinity(), |acc, o| acc.max(o.2));
    let (maxes, stabs) = out.into_iter().map(|o| (o.0, o.1)).unzip();
    (maxes, stabs, top)
}

fn recovered_row_sums<T: Scalar>(pat: &LogPattern<T>, u: &[T], v: &[T], p: T) -> Vec<T> {
    let row = |i: usize| {
        let mut s = T::zero();
        for t in pat.row_ptr[i]..pat.row_ptr[i + 1] {
            s = s + (p * (pat.vals[t] + u[i] + v[pat.cols[t]])).exp();
        }
        s
    };
    if pat.parallel() {
        (0..pat.n).into_par_iter().map(row).collect()
    } else {
        (0..pat.n).map(row).collect()
    }
}

fn validate_p<T: Scalar>(p: T) -> Result<()> {
    if !(p > T::zero()) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("p must be positive and finite, got {p}")));
    }
    Ok(())
}

/// Log-domain Sinkhorn on `A^(p)`; see [`log_sinkhorn_scale_with`].
pub fn log_sinkhorn_scale<T: Scalar>(a: &NonNegMatrix<T>, p: T, opts: &ScaleOptions<T>) -> Result<(LogScaling<T>, ScalingResult<T>)> {
    log_sinkhorn_scale_with(a, p, opts, |_| {})
}

/// Runs the log-coordinate iteration on the prescaled `a` with exponent `p/m`.
///
/// `opts.p` is ignored in favour of `p`. The returned [`ScalingResult`] holds
/// the recovered `X` and `ln u = p'·ū`, `ln v = p'·v̄` against the prescaled power.
pub fn log_sinkhorn_scale_with<T: Scalar>(
    a: &NonNegMatrix<T>,
    p: T,
    opts: &ScaleOptions<T>,
    mut observer: impl FnMut(&LogStep<'_, T>),
) -> Result<(LogScaling<T>, ScalingResult<T>)> {
    validate_p(p)?;
    opts.with_p(p).validate()?;
    if !support_status(a).has_support() {
        return Err(Error::NoSupport);
    }
    let pre = prescale(a)?;
    let pe = p / pre.exponent_m;
    let pat = LogPattern::new(&pre.matrix);
    let n = pat.n;
    let par = pat.parallel();
    let n_t = T::from_usize_lossy(n);

    let mut u = vec![T::zero(); n];
    let mut v = vec![T::zero(); n];
    let mut zeta = vec![T::zero(); n];
    let mut v_prev = v.clone();
    let mut residual = T::infinity();
    let mut iterations = 0;
    let mut converged = false;
    while iterations < opts.max_iters {
        v_prev.copy_from_slice(&v);
        let (rmax, rstab, rtop) = half_step(&pat.row_ptr, &pat.cols, &pat.vals, &v, pe, par);
        for i in 0..n {
            u[i] = -rmax[i] - rstab[i];
        }
        zeta = rstab;
        let row_bound: T = rmax.iter().copied().sum();
        let (cmax, cstab, ctop) = half_step(&pat.col_ptr, &pat.rows, &pat.tvals, &u, pe, par);
        for j in 0..n {
            v[j] = -cmax[j] - cstab[j];
        }
        iterations += 1;
        residual = residual_of_sums(&recovered_row_sums(&pat, &u, &v, pe));
        let bound_pre = row_bound - v_prev.iter().copied().sum::<T>();
        observer(&LogStep {
            iteration: iterations,
            u_bar: &u,
            v_bar: &v,
            zeta: &zeta,
            residual,
            bound: (bound_pre + n_t * pre.log_divisor) / pre.exponent_m,
            max_shifted: rtop.max(ctop),
        });
        if residual <= opts.epsilon {
            converged = true;
            break;
        }
    }

    let x = pre.matrix.map_positive(|i, j, val| (pe * (val.ln() + u[i] + v[j])).exp())?;
    let result = ScalingResult {
        x,
        log_u: u.iter().map(|&l| l * pe).collect(),
        log_v: v.iter().map(|&l| l * pe).collect(),
        iterations,
        residual,
        converged,
        input_map: InputMap { exponent: p, log_offset: pe * pre.log_divisor },
        work_units: None,
    };
    let scaling = LogScaling {
        u_bar: u,
        v_bar: v,
        zeta,
        p,
        p_effective: pe,
        iterations,
        residual,
        converged,
        prescale_m: pre.exponent_m,
        prescale_log_c: pre.log_divisor,
        v_bar_for_bound: v_prev,
    };
    Ok((scaling, result))
}

/// `−Σ ū − Σ v̄ − Σ ζ` on the prescaled matrix, using the `v̄` paired with the last row step.
pub fn certificate_bound_prescaled<T: Scalar>(s: &LogScaling<T>) -> T {
    let su: T = s.u_bar.iter().copied().sum();
    let sv: T = s.v_bar_for_bound.iter().copied().sum();
    let sz: T = s.zeta.iter().copied().sum();
    -su - sv - sz
}

/// Upper bound on `max_σ Σ_i ln a_{iσ(i)}` for the matrix given to [`log_sinkhorn_scale`].
pub fn certificate_bound<T: Scalar>(s: &LogScaling<T>) -> T {
    let n = T::from_usize_lossy(s.u_bar.len());
    (certificate_bound_prescaled(s) + n * s.prescale_log_c) / s.prescale_m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, Family, InstanceSpec};
    use crate::reduce::brute_force_solve;
    use crate::sinkhorn::{powered_input, sinkhorn_scale};

    fn uniform(n: usize, seed: u64) -> NonNegMatrix<f64> {
        generate::<f64>(&InstanceSpec::new(Family::RandomUniform, n).with_seed(seed)).unwrap()
    }

    #[test]
    fn identity_fixed_point() {
        let (s, r) = log_sinkhorn_scale(&NonNegMatrix::<f64>::identity(3), 7.0, &ScaleOptions::for_dim(3)).unwrap();
        assert!(s.u_bar.iter().chain(&s.v_bar).chain(&s.zeta).all(|&x| x == 0.0));
        assert_eq!(r.x, NonNegMatrix::identity(3));
        assert_eq!(certificate_bound(&s), 0.0);
    }

    #[test]
    fn near_optimal_3x3_matches_reference_and_standard() {
        let a = crate::sinkhorn::tests::near_optimal_3x3();
        let opts = ScaleOptions::for_dim(3).with_epsilon(1e-10);
        let (_, r) = log_sinkhorn_scale(&a, 10.0, &opts).unwrap();
        assert!((r.x.get(0, 0) - 0.5195148).abs() < 1e-4);
        assert!((r.x.get(2, 2) - 0.9789800).abs() < 1e-4);
        let (b, _, _) = powered_input(&a, 10.0).unwrap();
        let std = sinkhorn_scale(&b, &opts).unwrap();
        assert_eq!(std.iterations, r.iterations);
        for (x, y) in r.x.entries().zip(std.x.entries()) {
            assert!((x.2 - y.2).abs() < 1e-8);
        }
    }

    #[test]
    fn huge_p_stays_finite_with_valid_bound() {
        for seed in 0..5 {
            let a = uniform(6, 500 + seed);
            let opts = ScaleOptions::for_dim(6).with_max_iters(2000);
            let (s, r) = log_sinkhorn_scale(&a, 1e4, &opts).unwrap();
            assert!(s.u_bar.iter().chain(&s.v_bar).chain(&s.zeta).all(|x| x.is_finite()));
            assert!(r.x.entries().all(|(_, _, x)| x.is_finite()));
            let best = brute_force_solve(&a).unwrap();
            assert!(certificate_bound(&s) >= best.log_value - 1e-9, "seed {seed}");
            for sum in r.x.col_sums() {
                assert!((sum - 1.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn bound_valid_at_every_step_and_stabilizers_bounded() {
        for seed in 0..30 {
            let n = 2 + (seed as usize % 7);
            let a = uniform(n, 600 + seed);
            let val = brute_force_solve(&a).unwrap().log_value;
            let opts = ScaleOptions::for_dim(n).with_epsilon(1e-9).with_max_iters(300);
            let (s, _) = log_sinkhorn_scale_with(&a, 20.0, &opts, |st| {
                assert!(st.bound >= val - 1e-9, "seed {seed} step {}", st.iteration);
                assert!(st.max_shifted <= 0.0);
            })
            .unwrap();
            let cap = (n as f64).ln() / s.p_effective + 1e-12;
            assert!(s.zeta.iter().all(|&z| (-1e-15..=cap).contains(&z)));
            assert!(certificate_bound(&s) >= val - 1e-9);
        }
    }

    #[test]
    fn five_by_five_bound() {
        let a = crate::reduce::tests::five_by_five();
        let (s, _) = log_sinkhorn_scale(&a, 50.0, &ScaleOptions::for_dim(5)).unwrap();
        let target = (0.918f64 * 0.437 * 0.778 * 0.842 * 0.594).ln();
        assert!(certificate_bound(&s) >= target - 1e-12);
    }

    #[test]
    fn gap_shrinks_with_p() {
        let mut g10 = 0.0;
        let mut g100 = 0.0;
        for seed in 0..20 {
            let a = uniform(7, 700 + seed);
            let val = brute_force_solve(&a).unwrap().log_value;
            let opts = ScaleOptions::for_dim(7);
            g10 += certificate_bound(&log_sinkhorn_scale(&a, 10.0, &opts).unwrap().0) - val;
            g100 += certificate_bound(&log_sinkhorn_scale(&a, 100.0, &opts).unwrap().0) - val;
        }
        assert!(g100 < g10);
    }

    #[test]
    fn wide_range_at_million() {
        let a = NonNegMatrix::from_fn(5, |i, j| 10f64.powf(-8.0 + 16.0 * ((i * 7 + j * 3) % 11) as f64 / 10.0)).unwrap();
        let opts = ScaleOptions::for_dim(5).with_max_iters(500);
        let (s, r) = log_sinkhorn_scale(&a, 1e6, &opts).unwrap();
        assert!(s.u_bar.iter().chain(&s.v_bar).chain(&s.zeta).all(|x| x.is_finite()));
        assert!(r.x.entries().all(|(_, _, x)| x.is_finite()));
        assert!(certificate_bound(&s).is_finite());
    }

    #[test]
    fn rejects_bad_input() {
        let a = NonNegMatrix::from_rows(&[[0.0, 1.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(log_sinkhorn_scale(&a, 2.0, &ScaleOptions::for_dim(2)), Err(Error::NoSupport)));
        let i = NonNegMatrix::<f64>::identity(2);
        assert!(log_sinkhorn_scale(&i, 0.0, &ScaleOptions::for_dim(2)).is_err());
        assert!(log_sinkhorn_scale(&i, -1.0, &ScaleOptions::for_dim(2)).is_err());
    }
}
