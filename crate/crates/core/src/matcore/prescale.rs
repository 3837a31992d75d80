use crate::error::{Error, Result};
use crate::matcore::NonNegMatrix;
use crate::scalar::Scalar;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrescaleMode {
    /// `a ↦ a^m / c`, positive entries land in `[1, e]`.
    PowerScaled,
    /// `a ↦ a / min(A)`, used when `max/min ≤ e`.
    MinDivided,
}

/// Output of [`prescale`]: the normalized matrix and the constants that produced it.
///
/// On the pattern, `matrix_ij = a_ij^exponent_m / divisor_c`.
#[derive(Clone, Debug)]
pub struct PrescaleResult<T> {
    pub matrix: NonNegMatrix<T>,
    pub exponent_m: T,
    pub divisor_c: T,
    /// `ln(divisor_c)`, kept separately since `divisor_c` may be subnormal.
    pub log_divisor: T,
    pub mode: PrescaleMode,
}

impl<T: Scalar> PrescaleResult<T> {
    /// `ln` of the largest prescaled entry (1 in power-scaled mode).
    pub fn log_range(&self) -> T {
        match self.mode {
            PrescaleMode::PowerScaled => T::one(),
            PrescaleMode::MinDivided => self.matrix.max_positive().map_or(T::zero(), |v| v.ln()),
        }
    }
}

/// Maps the positive entries into `[1, e]` (or `[1, max/min]` when the spread is already below `e`).
///
/// The minimum and maximum are taken over positive entries only; zeros stay zero
/// and the storage kind is kept.
pub fn prescale<T: Scalar>(a: &NonNegMatrix<T>) -> Result<PrescaleResult<T>> {
    let (min, max) = match (a.min_positive(), a.max_positive()) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => return Err(Error::EmptyPattern),
    };
    let (ln_min, ln_max) = (min.ln(), max.ln());
    let spread = ln_max - ln_min;
    if spread > T::one() {
        let m = spread.recip();
        let log_c = ln_min / spread;
        let matrix = a.map_positive(|_, _, v| ((v.ln() - ln_min) * m).exp())?;
        Ok(PrescaleResult { matrix, exponent_m: m, divisor_c: log_c.exp(), log_divisor: log_c, mode: PrescaleMode::PowerScaled })
    } else {
        let matrix = a.map_positive(|_, _, v| v / min)?;
        Ok(PrescaleResult { matrix, exponent_m: T::one(), divisor_c: min, log_divisor: ln_min, mode: PrescaleMode::MinDivided })
    }
}

/// Entrywise `p`-th power `A^(p)`; the pattern is preserved.
pub fn hadamard_power<T: Scalar>(a: &NonNegMatrix<T>, p: T) -> Result<NonNegMatrix<T>> {
    if !(p > T::zero()) || !p.is_finite() {
        return Err(Error::InvalidParameter(format!("Hadamard exponent must be positive and finite, got {p}")));
    }
    if p == T::one() {
        return Ok(a.clone());
    }
    a.map_positive(|_, _, v| v.powf(p))
}
