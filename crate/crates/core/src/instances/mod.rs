//! Deterministic test-matrix families and Matrix Market I/O.

mod mm;

pub use mm::{parse_matrix_market, read_matrix_market, write_matrix_market};

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use rand::distributions::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::matcore::NonNegMatrix;
use crate::scalar::Scalar;

/// Name of the random generator and its stream layout, reported alongside results.
///
/// ChaCha8 seeded with `seed_from_u64(seed)`; stream 0 draws matrix entries in
/// row-major order, stream 1 draws the Euclidean points `x_1..x_n, y_1..y_n`.
pub const GENERATOR_VERSION: &str = "chacha8-v1";

const ENTRY_STREAM: u64 = 0;
const POINT_STREAM: u64 = 1;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Family {
    /// `1/(i+j)`.
    Cauchy,
    /// First row ones, then `1/(i+j−1)`.
    Lotkin,
    /// `min(i, j)`.
    Minij,
    /// `α·I + ones`.
    Pei,
    /// `1/(i+j−1)`.
    Hilbert,
    /// iid uniform on `(0, 1)`.
    RandomUniform,
    /// `exp(−‖x_i − y_j‖)` for uniform points in the unit cube.
    Euclidean3d,
    /// Matrix Market file.
    File,
}

impl Family {
    pub const ALL: [Family; 8] = [
        Family::Cauchy,
        Family::Lotkin,
        Family::Minij,
        Family::Pei,
        Family::Hilbert,
        Family::RandomUniform,
        Family::Euclidean3d,
        Family::File,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::Cauchy => "cauchy",
            Family::Lotkin => "lotkin",
            Family::Minij => "minij",
            Family::Pei => "pei",
            Family::Hilbert => "hilbert",
            Family::RandomUniform => "random_uniform",
            Family::Euclidean3d => "euclidean3d",
            Family::File => "file",
        }
    }

    pub fn is_random(self) -> bool {
        matches!(self, Family::RandomUniform | Family::Euclidean3d)
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.to_ascii_lowercase().replace('-', "_");
        match key.as_str() {
            "rand" | "random" | "uniform" => Ok(Family::RandomUniform),
            "euclidean" => Ok(Family::Euclidean3d),
            _ => Family::ALL.into_iter().find(|f| f.name() == key).ok_or_else(|| Error::UnknownFamily(s.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct InstanceSpec {
    pub family: Family,
    pub n: usize,
    pub seed: u64,
    /// Diagonal shift for `pei`.
    pub alpha: f64,
    pub path: Option<PathBuf>,
    /// Replace negative file entries by their absolute value.
    pub abs: bool,
}

impl InstanceSpec {
    pub fn new(family: Family, n: usize) -> Self {
        Self { family, n, seed: 0, alpha: 1.0, path: None, abs: false }
    }

    pub fn file(path: impl Into<PathBuf>) -> Self {
        Self { path: Some(path.into()), ..Self::new(Family::File, 0) }
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    pub fn with_abs(mut self, abs: bool) -> Self {
        self.abs = abs;
        self
    }

    /// Short human-readable label, e.g. `pei(n=500, alpha=1)`.
    pub fn describe(&self) -> String {
        match self.family {
            Family::File => format!("file({})", self.path.as_ref().map_or(String::new(), |p| p.display().to_string())),
            Family::Pei => format!("pei(n={}, alpha={})", self.n, self.alpha),
            f if f.is_random() => format!("{f}(n={}, seed={}, rng={GENERATOR_VERSION})", self.n, self.seed),
            f => format!("{f}(n={})", self.n),
        }
    }
}

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Builds the matrix described by `spec`; identical specs give bit-identical matrices.
pub fn generate<T: Scalar>(spec: &InstanceSpec) -> Result<NonNegMatrix<T>> {
    if spec.family == Family::File {
        let path = spec.path.as_ref().ok_or_else(|| Error::InvalidParameter("file family needs a path".into()))?;
        return read_matrix_market(path, spec.abs);
    }
    let n = spec.n;
    if n == 0 {
        return Err(Error::InvalidParameter("dimension must be at least 1".into()));
    }
    let f = |x: f64| T::lit(x);
    match spec.family {
        // indices below are 1-based
        Family::Cauchy => NonNegMatrix::from_fn(n, |i, j| f(1.0 / (i + j + 2) as f64)),
        Family::Lotkin => NonNegMatrix::from_fn(n, |i, j| if i == 0 { T::one() } else { f(1.0 / (i + j + 1) as f64) }),
        Family::Minij => NonNegMatrix::from_fn(n, |i, j| T::from_usize_lossy(i.min(j) + 1)),
        Family::Pei => {
            if !(spec.alpha >= 0.0) || !spec.alpha.is_finite() {
                return Err(Error::InvalidParameter(format!("pei alpha must be nonnegative, got {}", spec.alpha)));
            }
            NonNegMatrix::from_fn(n, |i, j| if i == j { f(spec.alpha + 1.0) } else { T::one() })
        }
        Family::Hilbert => NonNegMatrix::from_fn(n, |i, j| f(1.0 / (i + j + 1) as f64)),
        Family::RandomUniform => {
            let mut r = rng(spec.seed, ENTRY_STREAM);
            NonNegMatrix::from_fn(n, |_, _| f(r.sample::<f64, _>(Open01)))
        }
        Family::Euclidean3d => {
            let mut r = rng(spec.seed, POINT_STREAM);
            let pts: Vec<[f64; 3]> = (0..2 * n).map(|_| [r.sample(Open01), r.sample(Open01), r.sample(Open01)]).collect();
            let (xs, ys) = pts.split_at(n);
            NonNegMatrix::from_fn(n, |i, j| {
                let d2: f64 = (0..3).map(|k| (xs[i][k] - ys[j][k]).powi(2)).sum();
                f((-d2.sqrt()).exp())
            })
        }
        Family::File => unreachable!(),
    }
}
