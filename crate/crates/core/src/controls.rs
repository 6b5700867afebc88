use crate::error::{Error, Result};

/// Lattice controls inside the closed Euclidean ball of radius `radius`.
///
/// The lattice has spacing `2 radius / (n_u - 1)` and is centered at the
/// origin, so it contains the zero control and is symmetric under negation.
/// Points are stored in lexicographic order of their lattice index.
#[derive(Clone, Debug, PartialEq)]
pub struct ControlGrid {
    m: usize,
    radius: f64,
    n_u: usize,
    points: Vec<f64>,
    zero: usize,
}

impl ControlGrid {
    pub fn new(m: usize, radius: f64, n_u: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("control dimension must be >= 1".into()));
        }
        if !(radius.is_finite() && radius > 0.0) {
            return Err(Error::InvalidArgument(format!("control radius {radius} must be > 0")));
        }
        if n_u < 3 || n_u.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "n_u = {n_u}: need an odd count >= 3 so that 0 is a lattice point"
            )));
        }
        let half = (n_u as i64 - 1) / 2;
        let step = 2.0 * radius / (n_u as f64 - 1.0);
        let total = n_u.pow(m as u32);
        let mut points = Vec::new();
        let mut zero = usize::MAX;
        let mut u = vec![0.0; m];
        for flat in 0..total {
            let mut rem = flat;
            let mut all_zero = true;
            for k in (0..m).rev() {
                let j = (rem % n_u) as i64 - half;
                rem /= n_u;
                u[k] = j as f64 * step;
                all_zero &= j == 0;
            }
            let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm <= radius * (1.0 + 1e-12) {
                if all_zero {
                    zero = points.len() / m;
                }
                points.extend_from_slice(&u);
            }
        }
        Ok(Self {
            m,
            radius,
            n_u,
            points,
            zero,
        })
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn radius(&self) -> f64 {
        self.radius
    }

    pub fn nodes_per_axis(&self) -> usize {
        self.n_u
    }

    pub fn spacing(&self) -> f64 {
        2.0 * self.radius / (self.n_u as f64 - 1.0)
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.points.len() / self.m
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    #[inline]
    pub fn point(&self, j: usize) -> &[f64] {
        &self.points[j * self.m..(j + 1) * self.m]
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.points.chunks_exact(self.m)
    }

    /// Index of the zero control.
    pub fn zero_index(&self) -> usize {
        self.zero
    }

    /// Index of the lattice point closest to `u` (lowest index on ties).
    pub fn nearest(&self, u: &[f64]) -> usize {
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for (j, p) in self.iter().enumerate() {
            let d: f64 = p.iter().zip(u).map(|(a, b)| (a - b).powi(2)).sum();
            if d < best_d {
                best_d = d;
                best = j;
            }
        }
        best
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_is_member_and_set_is_symmetric() {
        let g = ControlGrid::new(2, 1.5, 9).unwrap();
        assert!(g.point(g.zero_index()).iter().all(|&v| v == 0.0));
        for p in g.iter() {
            let neg: Vec<f64> = p.iter().map(|v| -v).collect();
            assert!(g.iter().any(|q| q == neg.as_slice()));
            assert!(p.iter().map(|v| v * v).sum::<f64>().sqrt() <= 1.5 * (1.0 + 1e-12));
        }
    }

    #[test]
    fn five_per_axis_disk_has_thirteen_points() {
        let g = ControlGrid::new(2, 2.0, 5).unwrap();
        assert_eq!(g.len(), 13);
    }

    #[test]
    fn rejects_even_counts() {
        assert!(ControlGrid::new(2, 1.0, 4).is_err());
        assert!(ControlGrid::new(1, 0.0, 5).is_err());
    }
}
