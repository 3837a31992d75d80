use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Below this many stored entries row kernels stay on the calling thread.
const PAR_MIN_STORED: usize = 1 << 16;

/// Backing storage of a [`NonNegMatrix`].
#[derive(Clone, Debug, PartialEq)]
pub enum Storage<T> {
    /// Row-major `n * n` values; zeros are allowed and are outside the pattern.
    Dense(Vec<T>),
    /// Compressed sparse rows with sorted, unique column indices and no explicit zeros.
    Csr {
        row_ptr: Vec<usize>,
        col_idx: Vec<usize>,
        values: Vec<T>,
    },
}

/// Square matrix with finite nonnegative entries.
///
/// The *pattern* is the set of positions holding a positive value. All
/// reductions run sequentially within a row and row-major across rows, so
/// results do not depend on the thread count.
#[derive(Clone, Debug, PartialEq)]
pub struct NonNegMatrix<T> {
    n: usize,
    storage: Storage<T>,
}

fn check_entry<T: Scalar>(i: usize, j: usize, v: T) -> Result<()> {
    if !v.is_finite() {
        return Err(Error::InvalidEntry { row: i, col: j, reason: "non-finite value".into() });
    }
    if v < T::zero() {
        return Err(Error::InvalidEntry { row: i, col: j, reason: format!("negative value {v}") });
    }
    Ok(())
}

impl<T: Scalar> NonNegMatrix<T> {
    /// Dense matrix from row-major values.
    pub fn from_dense(n: usize, values: Vec<T>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        if values.len() != n * n {
            return Err(Error::DimensionMismatch { expected: n * n, got: values.len() });
        }
        for (k, &v) in values.iter().enumerate() {
            check_entry(k / n, k % n, v)?;
        }
        Ok(Self { n, storage: Storage::Dense(values) })
    }

    pub fn from_rows<R: AsRef<[T]>>(rows: &[R]) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for r in rows {
            let r = r.as_ref();
            if r.len() != n {
                return Err(Error::NonSquare { rows: n, cols: r.len() });
            }
            values.extend_from_slice(r);
        }
        Self::from_dense(n, values)
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> T) -> Result<Self> {
        let mut values = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                values.push(f(i, j));
            }
        }
        Self::from_dense(n, values)
    }

    /// Sparse matrix from `(row, col, value)` triplets.
    ///
    /// Duplicates are summed; zeros are dropped.
    pub fn from_triplets(n: usize, triplets: impl IntoIterator<Item = (usize, usize, T)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidParameter("dimension must be at least 1".into()));
        }
        let mut trips: Vec<(usize, usize, T)> = triplets.into_iter().collect();
        for &(i, j, v) in &trips {
            if i >= n || j >= n {
                return Err(Error::InvalidEntry { row: i, col: j, reason: format!("index outside {n} x {n}") });
            }
            check_entry(i, j, v)?;
        }
        trips.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(trips.len());
        let mut values: Vec<T> = Vec::with_capacity(trips.len());
        let mut last: Option<(usize, usize)> = None;
        let mut rows_of = Vec::with_capacity(trips.len());
        for (i, j, v) in trips {
            if last == Some((i, j)) {
                let slot = values.last_mut().expect("duplicate follows an entry");
                *slot = *slot + v;
            } else {
                col_idx.push(j);
                values.push(v);
                rows_of.push(i);
                last = Some((i, j));
            }
        }
        // drop zeros after summation
        let mut k = 0;
        for idx in 0..values.len() {
            if values[idx] > T::zero() {
                values[k] = values[idx];
                col_idx[k] = col_idx[idx];
                rows_of[k] = rows_of[idx];
                k += 1;
            }
        }
        values.truncate(k);
        col_idx.truncate(k);
        rows_of.truncate(k);
        for &i in &rows_of {
            row_ptr[i + 1] += 1;
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self { n, storage: Storage::Csr { row_ptr, col_idx, values } })
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, |i, j| if i == j { T::one() } else { T::zero() }).expect("identity is valid")
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn storage(&self) -> &Storage<T> {
        &self.storage
    }

    pub fn is_sparse(&self) -> bool {
        matches!(self.storage, Storage::Csr { .. })
    }

    /// Number of stored slots (n² for dense storage).
    pub fn stored_len(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.len(),
            Storage::Csr { values, .. } => values.len(),
        }
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        assert!(i < self.n && j < self.n, "index ({i}, {j}) out of range");
        match &self.storage {
            Storage::Dense(v) => v[i * self.n + j],
            Storage::Csr { row_ptr, col_idx, values } => {
                let cols = &col_idx[row_ptr[i]..row_ptr[i + 1]];
                match cols.binary_search(&j) {
                    Ok(k) => values[row_ptr[i] + k],
                    Err(_) => T::zero(),
                }
            }
        }
    }

    /// Positive entries of row `i` as `(col, value)`, in column order.
    pub fn row(&self, i: usize) -> RowEntries<'_, T> {
        match &self.storage {
            Storage::Dense(v) => RowEntries::Dense { vals: &v[i * self.n..(i + 1) * self.n], j: 0 },
            Storage::Csr { row_ptr, col_idx, values } => {
                let (s, e) = (row_ptr[i], row_ptr[i + 1]);
                RowEntries::Csr { cols: &col_idx[s..e], vals: &values[s..e], k: 0 }
            }
        }
    }

    /// All positive entries as `(row, col, value)`, row-major.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize, T)> + '_ {
        (0..self.n).flat_map(move |i| self.row(i).map(move |(j, v)| (i, j, v)))
    }

    /// Number of positive entries.
    pub fn nnz(&self) -> usize {
        match &self.storage {
            Storage::Dense(v) => v.iter().filter(|&&x| x > T::zero()).count(),
            Storage::Csr { values, .. } => values.len(),
        }
    }

    pub fn pattern(&self) -> Vec<(usize, usize)> {
        self.entries().map(|(i, j, _)| (i, j)).collect()
    }

    pub fn same_pattern(&self, other: &Self) -> bool {
        self.n == other.n && (0..self.n).all(|i| self.row(i).map(|e| e.0).eq(other.row(i).map(|e| e.0)))
    }

    /// True when every positive entry of `self` is also positive in `other`.
    pub fn pattern_within(&self, other: &Self) -> bool {
        self.n == other.n && self.entries().all(|(i, j, _)| other.get(i, j) > T::zero())
    }

    pub fn max_positive(&self) -> Option<T> {
        self.entries().map(|e| e.2).reduce(T::max)
    }

    pub fn min_positive(&self) -> Option<T> {
        self.entries().map(|e| e.2).reduce(T::min)
    }

    pub fn row_sums(&self) -> Vec<T> {
        if self.stored_len() >= PAR_MIN_STORED {
            (0..self.n).into_par_iter().map(|i| self.row_sum(i)).collect()
        } else {
            (0..self.n).map(|i| self.row_sum(i)).collect()
        }
    }

    fn row_sum(&self, i: usize) -> T {
        self.row(i).fold(T::zero(), |acc, (_, v)| acc + v)
    }

    pub fn col_sums(&self) -> Vec<T> {
        let mut s = vec![T::zero(); self.n];
        for (_, j, v) in self.entries() {
            s[j] = s[j] + v;
        }
        s
    }

    /// `A x`.
    pub fn mul_vec(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let dot = |i: usize| self.row(i).fold(T::zero(), |acc, (j, v)| acc + v * x[j]);
        if self.stored_len() >= PAR_MIN_STORED {
            (0..self.n).into_par_iter().map(dot).collect()
        } else {
            (0..self.n).map(dot).collect()
        }
    }

    /// `Aᵀ x`.
    pub fn mul_vec_transpose(&self, x: &[T]) -> Vec<T> {
        assert_eq!(x.len(), self.n);
        let mut y = vec![T::zero(); self.n];
        for (i, j, v) in self.entries() {
            y[j] = y[j] + v * x[i];
        }
        y
    }

    fn for_each_row_mut(&mut self, f: impl Fn(usize, Option<&[usize]>, &mut [T]) + Sync) {
        let n = self.n;
        let parallel = self.stored_len() >= PAR_MIN_STORED;
        match &mut self.storage {
            Storage::Dense(v) => {
                if parallel {
                    v.par_chunks_mut(n).enumerate().for_each(|(i, row)| f(i, None, row));
                } else {
                    v.chunks_mut(n).enumerate().for_each(|(i, row)| f(i, None, row));
                }
            }
            Storage::Csr { row_ptr, col_idx, values } => {
                let mut rows: Vec<&mut [T]> = Vec::with_capacity(n);
                let mut rest: &mut [T] = values;
                for i in 0..n {
                    let (head, tail) = rest.split_at_mut(row_ptr[i + 1] - row_ptr[i]);
                    rows.push(head);
                    rest = tail;
                }
                let col_idx = &*col_idx;
                let row_ptr = &*row_ptr;
                let run = |(i, row): (usize, &mut &mut [T])| f(i, Some(&col_idx[row_ptr[i]..row_ptr[i + 1]]), row);
                if parallel {
                    rows.par_iter_mut().enumerate().for_each(run);
                } else {
                    rows.iter_mut().enumerate().for_each(run);
                }
            }
        }
    }

    /// Raw stored slots in storage order; dense zeros included.
    pub(crate) fn stored_values(&self) -> &[T] {
        match &self.storage {
            Storage::Dense(v) => v,
            Storage::Csr { values, .. } => values,
        }
    }

    /// Replaces each positive stored slot `v` at storage index `k` by `f(k, v)`.
    ///
    /// Callers keep results finite and positive so the pattern is unchanged.
    pub(crate) fn update_stored(&mut self, f: impl Fn(usize, T) -> T) {
        let values = match &mut self.storage {
            Storage::Dense(v) => v,
            Storage::Csr { values, .. } => values,
        };
        for (k, v) in values.iter_mut().enumerate() {
            if *v > T::zero() {
                *v = f(k, *v);
            }
        }
    }

    /// `a_ij ← s_i a_ij`.
    pub fn scale_rows(&mut self, s: &[T]) {
        assert_eq!(s.len(), self.n);
        self.for_each_row_mut(|i, _, row| {
            for v in row.iter_mut() {
                *v = *v * s[i];
            }
        });
    }

    /// `a_ij ← a_ij s_j`.
    pub fn scale_cols(&mut self, s: &[T]) {
        assert_eq!(s.len(), self.n);
        self.for_each_row_mut(|_, cols, row| match cols {
            None => row.iter_mut().zip(s).for_each(|(v, &sj)| *v = *v * sj),
            Some(cols) => row.iter_mut().zip(cols).for_each(|(v, &j)| *v = *v * s[j]),
        });
    }

    /// Applies `f(i, j, a_ij)` to every positive entry, keeping the storage kind.
    ///
    /// Zero results leave the pattern; sparse storage drops them.
    pub fn map_positive(&self, f: impl Fn(usize, usize, T) -> T + Sync) -> Result<Self> {
        match &self.storage {
            Storage::Dense(v) => {
                let n = self.n;
                let mut out = v.clone();
                for (k, x) in out.iter_mut().enumerate() {
                    if *x > T::zero() {
                        *x = f(k / n, k % n, *x);
                    }
                }
                Self::from_dense(n, out)
            }
            Storage::Csr { .. } => Self::from_triplets(self.n, self.entries().map(|(i, j, v)| (i, j, f(i, j, v)))),
        }
    }

    pub fn transpose(&self) -> Self {
        match &self.storage {
            Storage::Dense(v) => {
                let n = self.n;
                let t = (0..n * n).map(|k| v[(k % n) * n + k / n]).collect();
                Self { n, storage: Storage::Dense(t) }
            }
            Storage::Csr { .. } => {
                Self::from_triplets(self.n, self.entries().map(|(i, j, v)| (j, i, v))).expect("transpose of valid matrix")
            }
        }
    }

    pub fn to_dense(&self) -> Self {
        match &self.storage {
            Storage::Dense(_) => self.clone(),
            Storage::Csr { .. } => {
                let n = self.n;
                let mut v = vec![T::zero(); n * n];
                for (i, j, x) in self.entries() {
                    v[i * n + j] = x;
                }
                Self { n, storage: Storage::Dense(v) }
            }
        }
    }

    pub fn to_sparse(&self) -> Self {
        match &self.storage {
            Storage::Csr { .. } => self.clone(),
            Storage::Dense(_) => Self::from_triplets(self.n, self.entries()).expect("valid matrix"),
        }
    }

    pub fn to_rows(&self) -> Vec<Vec<T>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }

    pub fn is_symmetric(&self) -> bool {
        self.entries().all(|(i, j, v)| self.get(j, i) == v)
    }

    pub fn cast<U: Scalar>(&self) -> NonNegMatrix<U> {
        let conv = |x: T| U::from_f64(x.to_f64().expect("finite")).expect("representable");
        let storage = match &self.storage {
            Storage::Dense(v) => Storage::Dense(v.iter().map(|&x| conv(x)).collect()),
            Storage::Csr { row_ptr, col_idx, values } => Storage::Csr {
                row_ptr: row_ptr.clone(),
                col_idx: col_idx.clone(),
                values: values.iter().map(|&x| conv(x)).collect(),
            },
        };
        NonNegMatrix { n: self.n, storage }
    }
}

/// Iterator over the positive entries of one row.
pub enum RowEntries<'a, T> {
    Dense { vals: &'a [T], j: usize },
    Csr { cols: &'a [usize], vals: &'a [T], k: usize },
}

impl<T: Scalar> Iterator for RowEntries<'_, T> {
    type Item = (usize, T);

    fn next(&mut self) -> Option<(usize, T)> {
        match self {
            RowEntries::Dense { vals, j } => {
                while *j < vals.len() {
                    let idx = *j;
                    *j += 1;
                    if vals[idx] > T::zero() {
                        return Some((idx, vals[idx]));
                    }
                }
                None
            }
            RowEntries::Csr { cols, vals, k } => {
                let idx = *k;
                if idx < vals.len() {
                    *k += 1;
                    Some((cols[idx], vals[idx]))
                } else {
                    None
                }
            }
        }
    }
}
