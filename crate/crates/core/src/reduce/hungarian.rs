use crate::error::{Error, Result};
use crate::matcore::NonNegMatrix;
use crate::reduce::{log_value_of, AssignmentSolution};
use crate::scalar::Scalar;

/// Maximizes `Σ_i ln a_{iσ(i)}` with the shortest-augmenting-path Hungarian method.
///
/// Costs are `−ln a_ij`; zeros are absent edges. Rows are inserted in index
/// order and ties go to the smallest column, so the result is deterministic.
pub fn solve_assignment<T: Scalar>(a: &NonNegMatrix<T>) -> Result<AssignmentSolution<T>> {
    let n = a.dim();
    let inf = T::infinity();
    let costs: Vec<Vec<(usize, T)>> = (0..n).map(|i| a.row(i).map(|(j, v)| (j + 1, -v.ln())).collect()).collect();

    // 1-based with column 0 as the virtual start, `owner[j]` is the row holding column j.
    let mut u = vec![T::zero(); n + 1];
    let mut v = vec![T::zero(); n + 1];
    let mut owner = vec![0usize; n + 1];
    let mut way = vec![0usize; n + 1];
    let mut minv = vec![inf; n + 1];
    let mut used = vec![false; n + 1];
    for i in 1..=n {
        owner[0] = i;
        let mut j0 = 0;
        minv.fill(inf);
        used.fill(false);
        loop {
            used[j0] = true;
            let i0 = owner[j0];
            for &(j, c) in &costs[i0 - 1] {
                if !used[j] {
                    let cur = c - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                }
            }
            let mut delta = inf;
            let mut j1 = 0;
            for j in 1..=n {
                if !used[j] && minv[j] < delta {
                    delta = minv[j];
                    j1 = j;
                }
            }
            if j1 == 0 {
                return Err(Error::Infeasible);
            }
            for j in 0..=n {
                if used[j] {
                    u[owner[j]] = u[owner[j]] + delta;
                    v[j] = v[j] - delta;
                } else {
                    minv[j] = minv[j] - delta;
                }
            }
            j0 = j1;
            if owner[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            owner[j0] = owner[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }
    let mut sigma = vec![0usize; n];
    for j in 1..=n {
        sigma[owner[j] - 1] = j - 1;
    }
    Ok(AssignmentSolution { log_value: log_value_of(a, &sigma), sigma, optimal: true })
}
