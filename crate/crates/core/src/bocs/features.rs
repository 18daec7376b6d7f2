//! Second-order features of a bit vector and the quadratic surrogate built on them.

use crate::error::{Error, Result};
use crate::evaluator::StationConfig;
use crate::qubo::QuboModel;
use crate::scalar::Scalar;

/// `1 + M + M(M-1)/2`.
pub fn n_features(m: usize) -> usize {
    1 + m + m * m.saturating_sub(1) / 2
}

/// Position of the pair feature `s_i s_j` (`i < j`) in the feature vector.
pub fn pair_index(i: usize, j: usize, m: usize) -> usize {
    debug_assert!(i < j && j < m);
    1 + m + i * m - i * (i + 1) / 2 + (j - i - 1)
}

/// `[1, s_1..s_M, s_i s_j for i < j]`, pairs ordered by `i` then `j`.
pub fn featurize<T: Scalar>(s: &[bool]) -> Vec<T> {
    let m = s.len();
    let mut f = Vec::with_capacity(n_features(m));
    f.push(T::one());
    f.extend(s.iter().map(|&b| if b { T::one() } else { T::zero() }));
    for i in 0..m {
        for j in i + 1..m {
            f.push(if s[i] && s[j] { T::one() } else { T::zero() });
        }
    }
    f
}

/// `y ~ alpha . featurize(s)`.
#[derive(Debug, Clone, PartialEq)]
pub struct SurrogateModel<T> {
    m: usize,
    alpha: Vec<T>,
}

impl<T: Scalar> SurrogateModel<T> {
    pub fn new(m: usize, alpha: Vec<T>) -> Result<Self> {
        if alpha.len() != n_features(m) {
            return Err(Error::LengthMismatch {
                expected: n_features(m),
                found: alpha.len(),
            });
        }
        Ok(Self { m, alpha })
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn alpha(&self) -> &[T] {
        &self.alpha
    }

    pub fn intercept(&self) -> T {
        self.alpha[0]
    }

    pub fn linear(&self, i: usize) -> T {
        self.alpha[1 + i]
    }

    pub fn pair(&self, i: usize, j: usize) -> T {
        let (i, j) = if i < j { (i, j) } else { (j, i) };
        self.alpha[pair_index(i, j, self.m)]
    }

    pub fn predict(&self, s: &[bool]) -> T {
        assert_eq!(s.len(), self.m, "configuration length mismatch");
        featurize::<T>(s).iter().zip(&self.alpha).map(|(&f, &a)| f * a).sum()
    }

    /// Symmetric `M x M` matrix `A` with `s^T A s + intercept = predict(s)`:
    /// linear terms on the diagonal, each pair coefficient split evenly.
    pub fn to_matrix(&self) -> Vec<Vec<T>> {
        let half = T::one() / (T::one() + T::one());
        let mut a = vec![vec![T::zero(); self.m]; self.m];
        for i in 0..self.m {
            a[i][i] = self.linear(i);
            for j in i + 1..self.m {
                let c = self.pair(i, j) * half;
                a[i][j] = c;
                a[j][i] = c;
            }
        }
        a
    }

    /// The surrogate as an `M`-variable QUBO, plus `station_cost` per set bit.
    pub fn to_qubo(&self, station_cost: T) -> QuboModel<T> {
        let mut q = QuboModel::new(self.m);
        q.add_constant(self.intercept());
        for i in 0..self.m {
            q.add_linear(i, self.linear(i) + station_cost);
            for j in i + 1..self.m {
                q.add_quadratic(i, j, self.pair(i, j));
            }
        }
        q
    }

    pub fn predict_config(&self, s: &StationConfig) -> T {
        self.predict(s.bits())
    }
}
