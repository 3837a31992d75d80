use crate::error::{Error, Result};
use crate::matcore::NonNegMatrix;
use crate::reduce::AssignmentSolution;
use crate::scalar::Scalar;

const ORACLE_MAX_DIM: usize = 10;

/// Exhaustive maximization over all `n!` permutations, for `n ≤ 10`.
///
/// Permutations are visited in lexicographic order and only a strictly larger
/// value replaces the incumbent, so ties resolve to the lexicographically smallest `σ`.
pub fn brute_force_solve<T: Scalar>(a: &NonNegMatrix<T>) -> Result<AssignmentSolution<T>> {
    let n = a.dim();
    if n > ORACLE_MAX_DIM {
        return Err(Error::OracleSizeLimit(n));
    }
    let logs: Vec<Vec<T>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j).ln()).collect()).collect();
    let mut best: Option<(Vec<usize>, T)> = None;
    let mut perm = Vec::with_capacity(n);
    let mut taken = vec![false; n];
    search(&logs, &mut perm, &mut taken, T::zero(), &mut |sigma, val| {
        if best.as_ref().is_none_or(|b| val > b.1) {
            best = Some((sigma.to_vec(), val));
        }
    });
    match best {
        Some((sigma, log_value)) if log_value > T::neg_infinity() => Ok(AssignmentSolution { sigma, log_value, optimal: true }),
        _ => Err(Error::Infeasible),
    }
}

fn search<T: Scalar>(logs: &[Vec<T>], perm: &mut Vec<usize>, taken: &mut [bool], acc: T, visit: &mut impl FnMut(&[usize], T)) {
    let i = perm.len();
    if i == logs.len() {
        visit(perm, acc);
        return;
    }
    for j in 0..logs.len() {
        let l = logs[i][j];
        if taken[j] || l == T::neg_infinity() {
            continue;
        }
        taken[j] = true;
        perm.push(j);
        search(logs, perm, taken, acc + l, visit);
        perm.pop();
        taken[j] = false;
    }
}

/// All permutations of `0..n` in lexicographic order.
#[cfg(test)]
pub(crate) fn permutations(n: usize) -> Vec<Vec<usize>> {
    let zeros = vec![vec![0.0f64; n]; n];
    let mut out = Vec::new();
    search(&zeros, &mut Vec::new(), &mut vec![false; n], 0.0, &mut |s, _| out.push(s.to_vec()));
    out
}

/// Best permutation with its value, and the second-best value.
#[cfg(test)]
pub(crate) fn best_two(a: &NonNegMatrix<f64>) -> ((Vec<usize>, f64), f64) {
    let n = a.dim();
    let logs: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| a.get(i, j).ln()).collect()).collect();
    let mut best = (Vec::new(), f64::NEG_INFINITY);
    let mut second = f64::NEG_INFINITY;
    search(&logs, &mut Vec::new(), &mut vec![false; n], 0.0, &mut |s, v| {
        if v > best.1 {
            second = best.1;
            best = (s.to_vec(), v);
        } else if v > second {
            second = v;
        }
    });
    (best, second)
}
