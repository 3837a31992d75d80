//! Deformed Sinkhorn iteration: balancing interleaved with growing Hadamard powers.
//!
//! Starting from `W_0 = C(A^(p_0))`, step `m` computes
//!
//! ```text
//! c_m = column sums of Z_{m−1},  W_m = C(Z_{m−1}),
//! r_m = row sums of W_m ∘ A^(p_{m+1} − p_m),  Z_m = R(W_m ∘ A^(p_{m+1} − p_m))
//! ```
//!
//! so `Z_m` is a diagonal scaling of `A^(p_{m+1})`. The run stops once
//! `d(c_m, 1) ≤ ε` in the Hilbert metric.

use crate::error::{Error, Result};
use crate::matcore::{hilbert_distance, support_status, NonNegMatrix};
use crate::scalar::Scalar;
use crate::sinkhorn::ScaleOptions;

/// Above this size the cubic `θ(A)` computation behind [`DeformedTrace::schedule_valid`] is skipped.
pub const VALIDITY_MAX_DIM: usize = 512;

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Schedule<T> {
    /// `p_m = p` for all `m`.
    Fixed(T),
    /// `p_m = a·ln(m + 1)`.
    Logarithmic { a: T },
}

impl<T: Scalar> Schedule<T> {
    /// `a = factor / ln θ(A)`; the logarithmic schedule is covered by the theory when `factor < 2`.
    pub fn calibrated(log_theta: T, factor: T) -> Result<Self> {
        if !(log_theta > T::zero()) || !log_theta.is_finite() {
            return Err(Error::InvalidParameter(format!("cannot calibrate a schedule from ln θ = {log_theta}")));
        }
        Ok(Schedule::Logarithmic { a: factor / log_theta })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Schedule::Fixed(p) if !(p > T::zero()) || !p.is_finite() => {
                Err(Error::InvalidParameter(format!("fixed schedule needs p > 0, got {p}")))
            }
            Schedule::Logarithmic { a } if !(a > T::zero()) || !a.is_finite() => {
                Err(Error::InvalidParameter(format!("logarithmic schedule needs a > 0, got {a}")))
            }
            _ => Ok(()),
        }
    }

    pub fn p(&self, m: usize) -> T {
        match *self {
            Schedule::Fixed(p) => p,
            Schedule::Logarithmic { a } => a * T::from_usize_lossy(m + 1).ln(),
        }
    }

    /// `p_{m+1} − p_m`, without cancellation.
    pub fn increment(&self, m: usize) -> T {
        match *self {
            Schedule::Fixed(_) => T::zero(),
            Schedule::Logarithmic { a } => a * (T::one() / T::from_usize_lossy(m + 1)).ln_1p(),
        }
    }

    /// `Some(a·ln θ < 2)` for the logarithmic schedule with finite `θ`.
    pub fn validity(&self, log_theta: T) -> Option<bool> {
        match *self {
            Schedule::Logarithmic { a } if log_theta.is_finite() => Some(a * log_theta < T::lit(2.0)),
            _ => None,
        }
    }
}

pub fn schedule_p<T: Scalar>(s: &Schedule<T>, m: usize) -> T {
    s.p(m)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DeformedRecord<T> {
    pub m: usize,
    pub p_m: T,
    /// `d(c_m, 1)`.
    pub d_col: T,
    /// `d(r_m, 1)`.
    pub d_row: T,
    /// `max_j |c_m,j − 1|`.
    pub col_dev: T,
}

#[derive(Clone, Debug)]
pub struct DeformedTrace<T> {
    pub records: Vec<DeformedRecord<T>>,
    /// Last `Z_m`.
    pub z: NonNegMatrix<T>,
    pub iterations: usize,
    pub converged: bool,
    /// `Some(a·ln θ < 2)` when it applies.
    pub schedule_valid: Option<bool>,
    /// Logarithmic schedule on a matrix with zeros.
    pub outside_hypotheses: bool,
}

/// State after step `m`, passed to observers.
pub struct DeformedStep<'a, T> {
    pub m: usize,
    pub p_m: T,
    pub p_next: T,
    /// `c_m`; for `m = 0`, column sums of `A^(p_0)` up to a common factor.
    pub c: &'a [T],
    pub r: &'a [T],
    pub d_col: T,
    pub d_row: T,
    pub z: &'a NonNegMatrix<T>,
}

/// Sums that the next normalization divides by must be positive.
fn checked<T: Scalar>(sums: &[T]) -> Result<()> {
    if sums.iter().all(|&s| s > T::zero() && s.is_finite()) {
        Ok(())
    } else {
        Err(Error::NoSupport)
    }
}

fn inverse<T: Scalar>(s: &[T]) -> Vec<T> {
    s.iter().map(|v| v.recip()).collect()
}

/// `(W_m, Z_m, c_m, r_m)`.
pub type StepOutput<T> = (NonNegMatrix<T>, NonNegMatrix<T>, Vec<T>, Vec<T>);

/// One step from `Z_{m−1}`: returns `(W_m, Z_m, c_m, r_m)`.
pub fn deformed_step<T: Scalar>(a: &NonNegMatrix<T>, z_prev: &NonNegMatrix<T>, p_m: T, p_next: T) -> Result<StepOutput<T>> {
    if p_next < p_m {
        return Err(Error::InvalidParameter(format!("schedule must be nondecreasing, got {p_m} then {p_next}")));
    }
    if z_prev.dim() != a.dim() {
        return Err(Error::DimensionMismatch { expected: a.dim(), got: z_prev.dim() });
    }
    let c = z_prev.col_sums();
    checked(&c)?;
    let mut w = z_prev.clone();
    w.scale_cols(&inverse(&c));
    let delta = p_next - p_m;
    let mut h = if delta == T::zero() { w.clone() } else { w.map_positive(|i, j, v| v * a.get(i, j).powf(delta))? };
    let r = h.row_sums();
    checked(&r)?;
    h.scale_rows(&inverse(&r));
    Ok((w, h, c, r))
}

pub fn deformed_sinkhorn<T: Scalar>(a: &NonNegMatrix<T>, s: &Schedule<T>, opts: &ScaleOptions<T>) -> Result<DeformedTrace<T>> {
    deformed_sinkhorn_with(a, s, opts, |_| {})
}

/// Runs the deformed iteration, calling `observer` after every step.
///
/// `opts.p` is unused; the schedule supplies the exponents. Entries are divided
/// by `max(A)` first, which changes nothing but keeps powers bounded by one.
pub fn deformed_sinkhorn_with<T: Scalar>(
    a: &NonNegMatrix<T>,
    s: &Schedule<T>,
    opts: &ScaleOptions<T>,
    mut observer: impl FnMut(&DeformedStep<'_, T>),
) -> Result<DeformedTrace<T>> {
    s.validate()?;
    opts.validate()?;
    if !support_status(a).has_support() {
        return Err(Error::NoSupport);
    }
    let n = a.dim();
    let ones = vec![T::one(); n];
    let top = a.max_positive().ok_or(Error::EmptyPattern)?;
    let ln_top = top.ln();
    let logs: Vec<T> = a.stored_values().iter().map(|&v| if v > T::zero() { v.ln() - ln_top } else { T::neg_infinity() }).collect();
    let theta_log = if n <= VALIDITY_MAX_DIM {
        crate::matcore::contraction_stats(a).map(|c| c.log_theta).unwrap_or(T::infinity())
    } else {
        T::infinity()
    };
    let outside = matches!(s, Schedule::Logarithmic { .. }) && a.nnz() < n * n;

    // W_0 = C(A^(p_0)) via column log-sum-exp
    let p0 = s.p(0);
    let mut col_max = vec![T::neg_infinity(); n];
    let mut w = a.clone();
    let slot_col: Vec<usize> = slot_columns(&w);
    for (k, &l) in logs.iter().enumerate() {
        if l > T::neg_infinity() {
            col_max[slot_col[k]] = col_max[slot_col[k]].max(p0 * l);
        }
    }
    let mut col_acc = vec![T::zero(); n];
    for (k, &l) in logs.iter().enumerate() {
        if l > T::neg_infinity() {
            let j = slot_col[k];
            col_acc[j] = col_acc[j] + (p0 * l - col_max[j]).exp();
        }
    }
    let log_c0: Vec<T> = col_acc.iter().zip(&col_max).map(|(s, m)| s.ln() + *m).collect();
    w.update_stored(|k, _| (p0 * logs[k] - log_c0[slot_col[k]]).exp());
    let mut c: Vec<T> = log_c0.iter().map(|l| l.exp()).collect();
    let mut d_col = {
        let hi = log_c0.iter().copied().fold(T::neg_infinity(), T::max);
        let lo = log_c0.iter().copied().fold(T::infinity(), T::min);
        hi - lo
    };

    let mut records = Vec::new();
    let mut m = 0usize;
    let (z, converged) = loop {
        let p_m = s.p(m);
        let delta = s.increment(m);
        let mut h = w;
        if delta > T::zero() {
            h.update_stored(|k, v| v * (delta * logs[k]).exp());
        }
        let r = h.row_sums();
        checked(&r)?;
        h.scale_rows(&inverse(&r));
        let d_row = hilbert_distance(&r, &ones)?;
        let col_dev = c.iter().fold(T::zero(), |acc, &x| acc.max((x - T::one()).abs()));
        records.push(DeformedRecord { m, p_m, d_col, d_row, col_dev });
        observer(&DeformedStep { m, p_m, p_next: p_m + delta, c: &c, r: &r, d_col, d_row, z: &h });
        m += 1;
        let done = m > 1 && d_col <= opts.epsilon;
        if done || m >= opts.max_iters {
            break (h, done);
        }
        c = h.col_sums();
        checked(&c)?;
        d_col = hilbert_distance(&c, &ones)?;
        h.scale_cols(&inverse(&c));
        w = h;
    };
    Ok(DeformedTrace { records, z, iterations: m, converged, schedule_valid: s.validity(theta_log), outside_hypotheses: outside })
}

fn slot_columns<T: Scalar>(a: &NonNegMatrix<T>) -> Vec<usize> {
    let n = a.dim();
    match a.storage() {
        crate::matcore::Storage::Dense(v) => (0..v.len()).map(|k| k % n).collect(),
        crate::matcore::Storage::Csr { col_idx, .. } => col_idx.clone(),
    }
}

/// `ω_σ(A) = Π_i a_{iσ(i)}`.
pub fn permutation_weight<T: Scalar>(a: &NonNegMatrix<T>, sigma: &[usize]) -> T {
    sigma.iter().enumerate().fold(T::one(), |acc, (i, &j)| acc * a.get(i, j))
}

/// `ln ω_σ(A)`, `−∞` when a selected entry is zero.
pub fn log_permutation_weight<T: Scalar>(a: &NonNegMatrix<T>, sigma: &[usize]) -> T {
    sigma.iter().enumerate().fold(T::zero(), |acc, (i, &j)| acc + a.get(i, j).ln())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::instances::{generate, Family, InstanceSpec};
    use crate::matcore::{contraction_stats, kappa_from_log_theta};
    use crate::reduce::brute::permutations;
    use crate::reduce::{brute_force_solve, solve_assignment};
    use crate::sinkhorn::sinkhorn_scale_with;

    fn uniform(n: usize, seed: u64) -> NonNegMatrix<f64> {
        generate::<f64>(&InstanceSpec::new(Family::RandomUniform, n).with_seed(seed)).unwrap()
    }

    #[test]
    fn schedule_values() {
        let s = Schedule::Logarithmic { a: 2.0 };
        assert_eq!(s.p(0), 0.0);
        assert!((s.p(1) - 2.0 * 2f64.ln()).abs() < 1e-15);
        assert_eq!(Schedule::Fixed(100.0).p(12345), 100.0);
        for m in 0..1000 {
            assert!(s.p(m + 1) >= s.p(m));
            assert!((s.increment(m) - (s.p(m + 1) - s.p(m))).abs() < 1e-12);
        }
        assert_eq!(s.validity(0.5), Some(true));
        assert_eq!(s.validity(1.5), Some(false));
        assert!(Schedule::Logarithmic { a: -1.0 }.validate().is_err());
    }

    #[test]
    fn weights() {
        let i = NonNegMatrix::<f64>::identity(3);
        assert_eq!(permutation_weight(&i, &[0, 1, 2]), 1.0);
        let a = NonNegMatrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        assert_eq!(permutation_weight(&a, &[0, 1]), 4.0);
        assert_eq!(permutation_weight(&a, &[1, 0]), 6.0);
        assert_eq!(log_permutation_weight(&i, &[1, 0, 2]), f64::NEG_INFINITY);
    }

    #[test]
    fn argmax_weight_is_hungarian_value() {
        let perms = permutations(6);
        for seed in 0..5 {
            let a = uniform(6, 1000 + seed);
            let best = perms.iter().map(|s| log_permutation_weight(&a, s)).fold(f64::NEG_INFINITY, f64::max);
            let h = solve_assignment(&a).unwrap();
            assert!((best - h.log_value).abs() < 1e-12);
        }
    }

    #[test]
    fn first_step_by_hand() {
        let a = NonNegMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let z0 = a.map_positive(|_, _, _| 0.5).unwrap();
        let (w, _, c, _) = deformed_step(&a, &z0, 0.0, 2f64.ln()).unwrap();
        assert_eq!(w.to_rows(), vec![vec![0.5, 0.5], vec![0.5, 0.5]]);
        assert_eq!(c, vec![1.0, 1.0]);
    }

    #[test]
    fn constant_p_is_a_sinkhorn_step() {
        let a = uniform(5, 3);
        let (_, z1, _, _) = deformed_step(&a, &a, 1.0, 1.0).unwrap();
        let mut seen = None;
        // column step then row step on A equals one Sinkhorn double step on Aᵀ, transposed
        sinkhorn_scale_with(&a.transpose(), &ScaleOptions::for_dim(5).with_max_iters(1), |s| seen = Some(s.x.transpose())).unwrap();
        for ((_, _, x), (_, _, y)) in z1.entries().zip(seen.unwrap().entries()) {
            assert!((x - y).abs() < 1e-14);
        }
    }

    #[test]
    fn bistochastic_fixed_point() {
        let a = NonNegMatrix::from_rows(&[[0.2, 0.3, 0.5], [0.5, 0.2, 0.3], [0.3, 0.5, 0.2]]).unwrap();
        let t = deformed_sinkhorn(&a, &Schedule::Fixed(1.0), &ScaleOptions::for_dim(3).with_max_iters(5)).unwrap();
        for r in &t.records[1..] {
            assert!(r.d_col < 1e-14);
        }
        let t = deformed_sinkhorn(&a, &Schedule::Logarithmic { a: 1.0 }, &ScaleOptions::for_dim(3).with_epsilon(1e-4).with_max_iters(100_000)).unwrap();
        assert!(t.converged);
    }

    #[test]
    fn two_by_two_tends_to_identity() {
        let a = NonNegMatrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let lt = contraction_stats(&a).unwrap().log_theta;
        let s = Schedule::calibrated(lt, 1.9).unwrap();
        // symmetric input is balanced at every p, so the stopping rule fires at once
        let t = deformed_sinkhorn(&a, &s, &ScaleOptions::for_dim(2)).unwrap();
        assert!(t.converged && t.iterations <= 2);
        assert_eq!(t.schedule_valid, Some(true));
        assert!(!t.outside_hypotheses);
        let mut z = NonNegMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let mut prev = 0.5;
        for m in 1..=20_000 {
            z = deformed_step(&a, &z, s.p(m), s.p(m + 1)).unwrap().1;
            assert!(z.get(0, 0) >= prev - 1e-15);
            prev = z.get(0, 0);
        }
        // the closed form for the balanced 2×2 scaling of A^(p) is 2^p / (1 + 2^p)
        let q = 2f64.powf(s.p(20_001));
        assert!((z.get(0, 0) - q / (1.0 + q)).abs() < 1e-3);
        assert!(z.get(0, 0) > 0.99 && z.get(1, 1) > 0.99);
    }

    #[test]
    fn weight_ratio_identity_every_step() {
        let perms = permutations(4);
        for seed in 0..3 {
            let a = uniform(4, 1100 + seed);
            let lt = contraction_stats(&a).unwrap().log_theta;
            let s = Schedule::calibrated(lt, 1.9).unwrap();
            let la: Vec<f64> = perms.iter().map(|p| log_permutation_weight(&a, p)).collect();
            deformed_sinkhorn_with(&a, &s, &ScaleOptions::for_dim(4).with_epsilon(1e-6).with_max_iters(3000), |st| {
                let lz: Vec<f64> = perms.iter().map(|p| log_permutation_weight(st.z, p)).collect();
                for k in 0..perms.len() {
                    for l in 0..perms.len() {
                        let lhs = lz[k] - lz[l];
                        let rhs = st.p_next * (la[k] - la[l]);
                        assert!((lhs - rhs).abs() <= 1e-9 * rhs.abs().max(1.0), "m {} {lhs} vs {rhs}", st.m);
                    }
                }
            })
            .unwrap();
        }
    }

    #[test]
    fn column_distance_bound_every_step() {
        for seed in 0..5 {
            let a = uniform(5, 1200 + seed);
            let st = contraction_stats(&a).unwrap();
            let ln_m = (a.max_positive().unwrap() / a.min_positive().unwrap()).ln();
            let s = Schedule::calibrated(st.log_theta, 1.9).unwrap();
            let mut prev: Option<(f64, f64)> = None;
            deformed_sinkhorn_with(&a, &s, &ScaleOptions::for_dim(5).with_epsilon(1e-9).with_max_iters(20_000), |step| {
                if let Some((p_prev, d_prev)) = prev {
                    let dp = step.p_m - p_prev;
                    let k = kappa_from_log_theta(p_prev * st.log_theta);
                    let bound = dp * ln_m + dp * k * ln_m + k * k * d_prev + 1e-9;
                    assert!(step.d_col <= bound, "m {}: {} > {bound}", step.m, step.d_col);
                }
                prev = Some((step.p_m, step.d_col));
            })
            .unwrap();
        }
    }

    #[test]
    fn limit_support_on_optimum() {
        // planted optimum well above the background
        for seed in 0..3u64 {
            let noise = uniform(5, 1300 + seed);
            let a = noise.map_positive(|i, j, v| if j == (i + 2) % 5 { 0.9 + 0.1 * v } else { 0.05 + 0.45 * v }).unwrap();
            let lt = contraction_stats(&a).unwrap().log_theta;
            let s = Schedule::calibrated(lt, 1.9).unwrap();
            let t = deformed_sinkhorn(&a, &s, &ScaleOptions::for_dim(5).with_epsilon(1e-12).with_max_iters(200_000)).unwrap();
            let best = brute_force_solve(&a).unwrap();
            for (i, j, z) in t.z.entries() {
                if z > 0.2 {
                    assert_eq!(best.sigma[i], j, "seed {seed} ({i},{j}) = {z}");
                }
            }
        }
    }

    #[test]
    fn zeros_flag_outside_hypotheses() {
        let a = NonNegMatrix::from_rows(&[[1.0, 0.5], [0.0, 1.0]]).unwrap();
        let t = deformed_sinkhorn(&a, &Schedule::Logarithmic { a: 1.0 }, &ScaleOptions::for_dim(2).with_max_iters(50)).unwrap();
        assert!(t.outside_hypotheses);
        assert_eq!(t.schedule_valid, None);
    }
}
