//! Thresholding a scaled matrix into a smaller assignment problem, and exact solvers for it.

pub(crate) mod brute;
mod hungarian;

pub use brute::brute_force_solve;
pub use hungarian::solve_assignment;

use crate::error::{Error, Result};
use crate::matcore::NonNegMatrix;
use crate::scalar::Scalar;

/// One entry surviving the threshold.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KeptEntry<T> {
    pub i: usize,
    pub j: usize,
    /// Original input value.
    pub a: T,
    /// Scaled value that passed the threshold.
    pub x: T,
}

/// Entries of the scaled matrix strictly above a threshold, with their original values.
#[derive(Clone, Debug)]
pub struct ReducedProblem<T> {
    pub n: usize,
    /// Row-major, unique positions.
    pub kept: Vec<KeptEntry<T>>,
    pub kept_count: usize,
    pub threshold: T,
    /// Some row or column kept no entry; the reduced problem cannot have a perfect matching.
    pub infeasible: bool,
}

impl<T: Scalar> ReducedProblem<T> {
    /// Sparse matrix of the original values on the kept positions.
    pub fn to_matrix(&self) -> Result<NonNegMatrix<T>> {
        NonNegMatrix::from_triplets(self.n, self.kept.iter().map(|e| (e.i, e.j, e.a)))
    }

    pub fn contains(&self, i: usize, j: usize) -> bool {
        self.kept.binary_search_by(|e| (e.i, e.j).cmp(&(i, j))).is_ok()
    }
}

/// Keeps exactly the entries with `x_ij > t`.
pub fn threshold_reduce<T: Scalar>(x: &NonNegMatrix<T>, a: &NonNegMatrix<T>, t: T) -> Result<ReducedProblem<T>> {
    let n = a.dim();
    if x.dim() != n {
        return Err(Error::DimensionMismatch { expected: n, got: x.dim() });
    }
    if !(t >= T::zero()) {
        return Err(Error::InvalidParameter(format!("threshold must be nonnegative, got {t}")));
    }
    let mut kept = Vec::new();
    let mut row_hit = vec![false; n];
    let mut col_hit = vec![false; n];
    for (i, j, xij) in x.entries() {
        let aij = a.get(i, j);
        if aij == T::zero() {
            return Err(Error::InvalidEntry { row: i, col: j, reason: "scaled matrix is positive outside the input pattern".into() });
        }
        if xij > t {
            kept.push(KeptEntry { i, j, a: aij, x: xij });
            row_hit[i] = true;
            col_hit[j] = true;
        }
    }
    let infeasible = row_hit.contains(&false) || col_hit.contains(&false);
    Ok(ReducedProblem { n, kept_count: kept.len(), kept, threshold: t, infeasible })
}

/// A permutation `σ` (row `i` takes column `sigma[i]`) with its log value.
#[derive(Clone, Debug, PartialEq)]
pub struct AssignmentSolution<T> {
    pub sigma: Vec<usize>,
    /// `Σ_i ln a_{iσ(i)}`, summed in row order.
    pub log_value: T,
    /// Produced by an exact solver.
    pub optimal: bool,
}

pub(crate) fn log_value_of<T: Scalar>(a: &NonNegMatrix<T>, sigma: &[usize]) -> T {
    sigma.iter().enumerate().fold(T::zero(), |acc, (i, &j)| acc + a.get(i, j).ln())
}

/// Exact solve on the kept entries.
pub fn solve_reduced<T: Scalar>(p: &ReducedProblem<T>) -> Result<AssignmentSolution<T>> {
    if p.infeasible {
        return Err(Error::Infeasible);
    }
    solve_assignment(&p.to_matrix()?)
}

/// `bound − log_value`; nonnegative up to rounding when `sol` is optimal.
pub fn certificate_gap<T: Scalar>(sol: &AssignmentSolution<T>, bound: T) -> T {
    bound - sol.log_value
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::instances::{generate, Family, InstanceSpec};
    use proptest::prelude::*;

    pub(crate) fn five_by_five() -> NonNegMatrix<f64> {
        NonNegMatrix::from_rows(&[
            [0.292, 0.502, 0.918, 0.281, 0.686],
            [0.566, 0.437, 0.044, 0.128, 0.153],
            [0.483, 0.269, 0.482, 0.778, 0.697],
            [0.332, 0.633, 0.264, 0.212, 0.842],
            [0.594, 0.405, 0.415, 0.112, 0.406],
        ])
        .unwrap()
    }

    #[test]
    fn identity_threshold() {
        let i = NonNegMatrix::<f64>::identity(3);
        let r = threshold_reduce(&i, &i, 1.0 / 3.0).unwrap();
        assert_eq!(r.kept_count, 3);
        assert!((0..3).all(|k| r.contains(k, k)));
        assert!(!r.infeasible);
    }

    #[test]
    fn five_by_five_reduction() {
        let a = five_by_five();
        let opts = crate::sinkhorn::ScaleOptions::for_dim(5).with_p(50.0).with_epsilon(1e-9);
        let x = crate::sinkhorn::p_sinkhorn_preprocess(&a, &opts).unwrap().x;
        let r = threshold_reduce(&x, &a, 0.2).unwrap();
        let pos: Vec<(usize, usize)> = r.kept.iter().map(|e| (e.i, e.j)).collect();
        assert_eq!(pos, vec![(0, 2), (1, 1), (2, 3), (3, 4), (4, 0)]);
        let sol = solve_reduced(&r).unwrap();
        assert_eq!(sol.sigma, vec![2, 1, 3, 4, 0]);
        let expect = (0.918f64 * 0.437 * 0.778 * 0.842 * 0.594).ln();
        assert!((sol.log_value - expect).abs() < 1e-12);
        assert_eq!(sol.log_value, brute_force_solve(&a).unwrap().log_value);
        assert!(sol.optimal);
    }

    #[test]
    fn starved_row_flags_infeasible() {
        let x = NonNegMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        let r = threshold_reduce(&x, &x, 0.5).unwrap();
        assert!(r.infeasible);
        assert!(matches!(solve_reduced(&r), Err(Error::Infeasible)));
    }

    #[test]
    fn pattern_mismatch_is_rejected() {
        let x = NonNegMatrix::from_rows(&[[0.5, 0.5], [0.5, 0.5]]).unwrap();
        assert!(threshold_reduce(&x, &NonNegMatrix::identity(2), 0.1).is_err());
    }

    #[test]
    fn gap_at_identity() {
        let i = NonNegMatrix::<f64>::identity(3);
        let sol = solve_assignment(&i).unwrap();
        assert_eq!(certificate_gap(&sol, 0.0), 0.0);
    }

    proptest! {
        #[test]
        fn threshold_monotone(vals in prop::collection::vec(0.0f64..1.0, 25), t1 in 0.0f64..1.0, t2 in 0.0f64..1.0) {
            let a = NonNegMatrix::from_dense(5, vals.iter().map(|v| v + 0.01).collect()).unwrap();
            let x = NonNegMatrix::from_dense(5, vals).unwrap();
            let (lo, hi) = if t1 < t2 { (t1, t2) } else { (t2, t1) };
            let rlo = threshold_reduce(&x, &a, lo).unwrap();
            let rhi = threshold_reduce(&x, &a, hi).unwrap();
            prop_assert!(rhi.kept.iter().all(|e| rlo.contains(e.i, e.j)));
            prop_assert_eq!(threshold_reduce(&x, &a, 0.0).unwrap().kept_count, x.nnz());
        }

        #[test]
        fn assignment_invariant_under_diagonal_scaling(
            seed in 0u64..1000,
            dr in prop::collection::vec(0.1f64..10.0, 6),
            dc in prop::collection::vec(0.1f64..10.0, 6),
        ) {
            let a = generate::<f64>(&InstanceSpec::new(Family::RandomUniform, 6).with_seed(seed)).unwrap();
            let mut b = a.clone();
            b.scale_rows(&dr);
            b.scale_cols(&dc);
            let sa = solve_assignment(&a).unwrap();
            let sb = solve_assignment(&b).unwrap();
            prop_assert_eq!(&sa.sigma, &sb.sigma);
            let shift: f64 = dr.iter().chain(&dc).map(|d| d.ln()).sum();
            prop_assert!((sb.log_value - sa.log_value - shift).abs() < 1e-10);
        }
    }
}
