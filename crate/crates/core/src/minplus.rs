//! Dense matrices over the (min, +) semiring.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Square matrix of pairwise costs, row-major, `+inf` for "unreachable".
#[derive(Clone, Debug, PartialEq)]
pub struct PairMatrix {
    n: usize,
    pub values: Vec<f64>,
}

impl PairMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Result<Self> {
        if values.len() != n * n {
            return Err(Error::DimensionMismatch {
                expected: n * n,
                got: values.len(),
            });
        }
        Ok(Self { n, values })
    }

    /// The min-plus identity: zero diagonal, `+inf` elsewhere.
    pub fn identity(n: usize) -> Self {
        let mut values = vec![f64::INFINITY; n * n];
        for i in 0..n {
            values[i * n + i] = 0.0;
        }
        Self { n, values }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        let mut values = Vec::with_capacity(n * n);
        for r in rows {
            if r.len() != n {
                return Err(Error::DimensionMismatch { expected: n, got: r.len() });
            }
            values.extend(r);
        }
        Ok(Self { n, values })
    }

    #[inline]
    pub fn size(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    /// `C(i, k) = min_j A(i, j) + B(j, k)`; rows are computed in parallel.
    pub fn product(&self, other: &PairMatrix) -> Result<PairMatrix> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                expected: self.n,
                got: other.n,
            });
        }
        let n = self.n;
        let out = min_plus_product(&self.values, &other.values, n, n, n);
        Ok(PairMatrix { n, values: out })
    }

    /// Min-plus square: the action over twice the horizon.
    pub fn square(&self) -> PairMatrix {
        self.product(self).expect("square matrix")
    }
}

/// `C(i, k) = min_j A(i, j) + B(j, k)` for row-major `A` (`rows x inner`)
/// and `B` (`inner x cols`). Rows of `C` are computed in parallel.
pub fn min_plus_product(a: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    assert_eq!(a.len(), rows * inner);
    assert_eq!(b.len(), inner * cols);
    let mut out = vec![f64::INFINITY; rows * cols];
    if cols == 0 {
        return out;
    }
    out.par_chunks_mut(cols).enumerate().for_each(|(i, row)| {
        for j in 0..inner {
            let aij = a[i * inner + j];
            if aij == f64::INFINITY {
                continue;
            }
            let bj = &b[j * cols..(j + 1) * cols];
            for (r, &bk) in row.iter_mut().zip(bj) {
                let v = aij + bk;
                // Plain comparison rather than f64::min so the loop vectorizes.
                if v < *r {
                    *r = v;
                }
            }
        }
    });
    out
}
