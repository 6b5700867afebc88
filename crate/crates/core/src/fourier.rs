//! Real Fourier test functions on the torus.
//!
//! For each wave vector `k` of a half lattice (`0 < |k|_inf <= K`, first
//! nonzero entry positive) the basis holds
//!
//! ```text
//! cos(2 pi k.x) / (2 pi |k|)    and    sin(2 pi k.x) / (2 pi |k|)
//! ```
//!
//! scaled so that the sup of the Euclidean gradient norm is 1.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::grid::MAX_DIM;

#[derive(Clone, Debug, PartialEq)]
pub struct FourierBasis {
    d: usize,
    k_max: usize,
    modes: Vec<[i64; MAX_DIM]>,
}

impl FourierBasis {
    pub fn new(d: usize, k_max: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidArgument(format!("dimension {d} outside 1..={MAX_DIM}")));
        }
        let k = k_max as i64;
        let side = (2 * k + 1) as usize;
        let mut modes = Vec::new();
        for flat in 0..side.pow(d as u32) {
            let mut rest = flat;
            let mut mode = [0i64; MAX_DIM];
            for slot in mode.iter_mut().take(d) {
                *slot = (rest % side) as i64 - k;
                rest /= side;
            }
            mode[..d].reverse();
            let first = mode[..d].iter().find(|&&v| v != 0);
            if matches!(first, Some(&v) if v > 0) {
                modes.push(mode);
            }
        }
        Ok(Self { d, k_max, modes })
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    /// Number of functions (two per wave vector).
    pub fn len(&self) -> usize {
        2 * self.modes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.modes.is_empty()
    }

    pub fn mode(&self, j: usize) -> &[i64] {
        &self.modes[j / 2][..self.d]
    }

    /// Position of function `j` of `coarser` inside `self`.
    pub fn embed_index(&self, coarser: &FourierBasis, j: usize) -> usize {
        let wanted = coarser.modes[j / 2];
        let pos = self.modes.iter().position(|m| *m == wanted).expect("coarser basis is a subset");
        2 * pos + j % 2
    }

    fn phase_and_scale(&self, j: usize, x: &[f64]) -> (f64, f64) {
        let k = &self.modes[j / 2];
        let dot: f64 = (0..self.d).map(|i| k[i] as f64 * x[i]).sum();
        let norm = (0..self.d).map(|i| (k[i] * k[i]) as f64).sum::<f64>().sqrt();
        (2.0 * PI * dot, 2.0 * PI * norm)
    }

    pub fn value(&self, j: usize, x: &[f64]) -> f64 {
        let (theta, scale) = self.phase_and_scale(j, x);
        if j.is_multiple_of(2) {
            theta.cos() / scale
        } else {
            theta.sin() / scale
        }
    }

    pub fn gradient_into(&self, j: usize, x: &[f64], out: &mut [f64]) {
        let (theta, scale) = self.phase_and_scale(j, x);
        let k = &self.modes[j / 2];
        let w = if j.is_multiple_of(2) { -theta.sin() } else { theta.cos() };
        for i in 0..self.d {
            out[i] = w * 2.0 * PI * k[i] as f64 / scale;
        }
    }

    pub fn gradient(&self, j: usize, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.d];
        self.gradient_into(j, x, &mut out);
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        assert_eq!(FourierBasis::new(2, 0).unwrap().len(), 0);
        assert_eq!(FourierBasis::new(2, 1).unwrap().len(), 8);
        assert_eq!(FourierBasis::new(2, 3).unwrap().len(), 48);
        assert_eq!(FourierBasis::new(1, 2).unwrap().len(), 4);
    }

    #[test]
    fn gradients_have_unit_sup() {
        let b = FourierBasis::new(2, 2).unwrap();
        for j in 0..b.len() {
            let mut best: f64 = 0.0;
            for s in 0..400 {
                let x = [s as f64 / 400.0, (s * 7 % 400) as f64 / 400.0];
                let g = b.gradient(j, &x);
                best = best.max(g[0].hypot(g[1]));
            }
            assert!(best <= 1.0 + 1e-12 && best > 0.95, "{j} {best}");
        }
    }

    #[test]
    fn gradient_matches_differences() {
        let b = FourierBasis::new(2, 2).unwrap();
        let x = [0.31, 0.77];
        let e = 1e-6;
        for j in 0..b.len() {
            let g = b.gradient(j, &x);
            let dx = (b.value(j, &[x[0] + e, x[1]]) - b.value(j, &[x[0] - e, x[1]])) / (2.0 * e);
            let dy = (b.value(j, &[x[0], x[1] + e]) - b.value(j, &[x[0], x[1] - e])) / (2.0 * e);
            assert!((g[0] - dx).abs() < 1e-8 && (g[1] - dy).abs() < 1e-8);
        }
    }

    #[test]
    fn embedding() {
        let small = FourierBasis::new(2, 1).unwrap();
        let big = FourierBasis::new(2, 3).unwrap();
        for j in 0..small.len() {
            let jj = big.embed_index(&small, j);
            assert_eq!(small.value(j, &[0.2, 0.4]), big.value(jj, &[0.2, 0.4]));
        }
    }
}
