use crate::error::{Error, Result};
use crate::matcore::NonNegMatrix;
use crate::scalar::Scalar;

/// Largest dimension accepted by [`contraction_stats`]; the computation is cubic.
pub const CONTRACTION_MAX_DIM: usize = 4096;

/// Hilbert projective distance `ln max_i (x_i/y_i) + ln max_j (y_j/x_j)`.
///
/// Positions where both vectors vanish are ignored; a zero in exactly one of
/// them makes the distance infinite.
pub fn hilbert_distance<T: Scalar>(x: &[T], y: &[T]) -> Result<T> {
    if x.len() != y.len() {
        return Err(Error::DimensionMismatch { expected: x.len(), got: y.len() });
    }
    let mut up = T::zero();
    let mut down = T::zero();
    let mut any = false;
    for (&xi, &yi) in x.iter().zip(y) {
        match (xi > T::zero(), yi > T::zero()) {
            (false, false) => continue,
            (true, true) => {
                any = true;
                up = up.max(xi / yi);
                down = down.max(yi / xi);
            }
            _ => return Ok(T::infinity()),
        }
    }
    if !any {
        return Ok(T::zero());
    }
    Ok((up.ln() + down.ln()).max(T::zero()))
}

/// Birkhoff contraction data of a nonnegative matrix.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ContractionStats<T> {
    /// Largest cross-ratio `a_ir a_jl / (a_jr a_il)`; infinite with any zero entry.
    pub theta: T,
    /// `ln(theta)`, finite even when `theta` overflows.
    pub log_theta: T,
    /// `(√θ − 1)/(√θ + 1)`.
    pub kappa: T,
}

impl<T: Scalar> ContractionStats<T> {
    fn from_log_theta(log_theta: T) -> Self {
        Self { theta: log_theta.exp(), log_theta, kappa: kappa_from_log_theta(log_theta) }
    }

    /// Stats of the Hadamard power `A^(p)`, using `θ(A^(p)) = θ(A)^p`.
    pub fn powered(&self, p: T) -> Self {
        if self.log_theta.is_infinite() {
            return *self;
        }
        Self::from_log_theta(self.log_theta * p)
    }
}

/// `(√θ − 1)/(√θ + 1) = tanh(ln θ / 4)`.
pub fn kappa_from_log_theta<T: Scalar>(log_theta: T) -> T {
    if log_theta.is_infinite() {
        T::one()
    } else {
        (log_theta / T::lit(4.0)).tanh()
    }
}

/// Computes θ(A) through the row-pair factorization
/// `θ = max_{i,j} (max_r a_ir/a_jr) · (max_l a_jl/a_il)`.
pub fn contraction_stats<T: Scalar>(a: &NonNegMatrix<T>) -> Result<ContractionStats<T>> {
    let n = a.dim();
    if n > CONTRACTION_MAX_DIM {
        return Err(Error::TooLarge { what: "contraction statistics", n, limit: CONTRACTION_MAX_DIM });
    }
    if a.nnz() < n * n {
        return Ok(ContractionStats { theta: T::infinity(), log_theta: T::infinity(), kappa: T::one() });
    }
    let logs: Vec<Vec<T>> = (0..n).map(|i| a.row(i).map(|(_, v)| v.ln()).collect()).collect();
    let mut best = T::zero();
    for i in 0..n {
        for j in (i + 1)..n {
            let mut up = T::neg_infinity();
            let mut down = T::neg_infinity();
            for (&li, &lj) in logs[i].iter().zip(&logs[j]) {
                up = up.max(li - lj);
                down = down.max(lj - li);
            }
            best = best.max(up + down);
        }
    }
    Ok(ContractionStats::from_log_theta(best))
}

/// `max_i |r_i − 1|` over the row sums; zero for a row-stochastic matrix.
pub fn stochastic_residual<T: Scalar>(a: &NonNegMatrix<T>) -> T {
    residual_of_sums(&a.row_sums())
}

pub(crate) fn residual_of_sums<T: Scalar>(sums: &[T]) -> T {
    sums.iter().fold(T::zero(), |acc, &s| acc.max((s - T::one()).abs()))
}
