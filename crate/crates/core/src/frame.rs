//! Control-affine frames `F(x) = [f_1 | ... | f_m]` on the d-torus.

use std::f64::consts::PI;

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::grid::{interpolate_values, parse_token, wrap_centered, wrap_unit, TorusGrid, MAX_DIM};

#[derive(Clone, Debug, PartialEq)]
enum FrameKind {
    Identity,
    GrushinChart,
    GrushinPeriodic,
    /// One `d*m` row-major block per node; entries interpolated multilinearly.
    Tabulated { grid: TorusGrid, entries: Vec<Vec<f64>> },
}

#[derive(Clone, Debug, PartialEq)]
pub struct FieldSystem {
    pub name: String,
    d: usize,
    m: usize,
    kind: FrameKind,
    pub smoothness_note: String,
    pub full_rank_everywhere: bool,
}

/// Dense `d x m` matrix, row-major.
#[derive(Clone, Debug, PartialEq)]
pub struct FrameMatrix {
    pub d: usize,
    pub m: usize,
    pub data: Vec<f64>,
}

impl FrameMatrix {
    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i * self.m + j]
    }

    /// `F u`, a tangent vector.
    pub fn apply(&self, u: &[f64]) -> Vec<f64> {
        (0..self.d)
            .map(|i| (0..self.m).map(|j| self.get(i, j) * u[j]).sum())
            .collect()
    }

    /// `F^T p`, the horizontal part of a covector.
    pub fn transpose_apply(&self, p: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|j| (0..self.d).map(|i| self.get(i, j) * p[i]).sum())
            .collect()
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        (0..self.d).map(|i| self.get(i, j)).collect()
    }

    fn to_nalgebra(&self) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.d, self.m, &self.data)
    }

    pub fn rank(&self, eps: f64) -> usize {
        self.to_nalgebra().rank(eps)
    }

    /// Largest singular value.
    pub fn operator_norm(&self) -> f64 {
        self.to_nalgebra()
            .singular_values()
            .iter()
            .copied()
            .fold(0.0, f64::max)
    }
}

impl FieldSystem {
    pub fn riemannian_identity(d: usize) -> Self {
        Self {
            name: "riemannian-identity".into(),
            d,
            m: d,
            kind: FrameKind::Identity,
            smoothness_note: "constant frame".into(),
            full_rank_everywhere: true,
        }
    }

    /// `[[1, 0], [0, r(x1)]]` with `r(x1)` the representative of `x1` in `[-1/2, 1/2)`.
    pub fn grushin_chart() -> Self {
        Self {
            name: "grushin-chart".into(),
            d: 2,
            m: 2,
            kind: FrameKind::GrushinChart,
            smoothness_note: "Lipschitz except for a jump of F22 across x1 = 1/2".into(),
            full_rank_everywhere: false,
        }
    }

    /// `[[1, 0], [0, sin(2 pi x1) / (2 pi)]]`.
    pub fn grushin_periodic() -> Self {
        Self {
            name: "grushin-periodic".into(),
            d: 2,
            m: 2,
            kind: FrameKind::GrushinPeriodic,
            smoothness_note: "analytic; rank 1 on x1 in {0, 1/2}".into(),
            full_rank_everywhere: false,
        }
    }

    pub fn by_name(name: &str, d: usize) -> Result<Self> {
        let sys = match name {
            "riemannian-identity" => Self::riemannian_identity(d),
            "grushin-chart" => Self::grushin_chart(),
            "grushin-periodic" | "grushin" => Self::grushin_periodic(),
            other => return Err(Error::Config(format!("unknown frame `{other}`"))),
        };
        if sys.d != d {
            return Err(Error::Config(format!(
                "frame `{name}` lives on the {}-torus, grid has d = {d}",
                sys.d
            )));
        }
        Ok(sys)
    }

    /// Frame tabulated at the nodes of `grid`.
    pub fn tabulated(name: &str, grid: TorusGrid, m: usize, entries: Vec<Vec<f64>>) -> Result<Self> {
        let d = grid.dim();
        if entries.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: entries.len(),
            });
        }
        if let Some(bad) = entries.iter().find(|row| row.len() != d * m) {
            return Err(Error::DimensionMismatch {
                expected: d * m,
                got: bad.len(),
            });
        }
        // entry-major layout for interpolation
        let by_entry: Vec<Vec<f64>> = (0..d * m)
            .map(|e| entries.iter().map(|row| row[e]).collect())
            .collect();
        let full_rank = entries.iter().all(|row| {
            FrameMatrix {
                d,
                m,
                data: row.clone(),
            }
            .rank(1e-12)
                == d.min(m)
        });
        Ok(Self {
            name: name.into(),
            d,
            m,
            kind: FrameKind::Tabulated {
                grid,
                entries: by_entry,
            },
            smoothness_note: "multilinear interpolation of tabulated nodes".into(),
            full_rank_everywhere: full_rank,
        })
    }

    /// Plain-text table: one line per node in row-major node order, each
    /// holding the `d*m` entries of `F` row-major. The node count must be `n^d`.
    pub fn from_table_text(name: &str, d: usize, m: usize, text: &str) -> Result<Self> {
        let rows: Vec<Vec<f64>> = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'))
            .map(|l| l.split_whitespace().map(parse_token::<f64>).collect())
            .collect::<Result<_>>()?;
        let n = (rows.len() as f64).powf(1.0 / d as f64).round() as usize;
        if n.pow(d as u32) != rows.len() {
            return Err(Error::Parse(format!(
                "{} frame rows is not a perfect {d}-th power",
                rows.len()
            )));
        }
        Self::tabulated(name, TorusGrid::new(d, n)?, m, rows)
    }

    #[inline]
    pub fn state_dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn control_dim(&self) -> usize {
        self.m
    }

    /// Writes `F(x)` row-major into `out` (length `d*m`). No dimension checks.
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match &self.kind {
            FrameKind::Identity => {
                out.fill(0.0);
                for i in 0..self.d {
                    out[i * self.m + i] = 1.0;
                }
            }
            FrameKind::GrushinChart => {
                out[0] = 1.0;
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = wrap_centered(x[0]);
            }
            FrameKind::GrushinPeriodic => {
                out[0] = 1.0;
                out[1] = 0.0;
                out[2] = 0.0;
                out[3] = (2.0 * PI * wrap_unit(x[0])).sin() / (2.0 * PI);
            }
            FrameKind::Tabulated { grid, entries } => {
                for (o, e) in out.iter_mut().zip(entries) {
                    *o = interpolate_values(grid, e, x);
                }
            }
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<FrameMatrix> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        let wrapped: Vec<f64> = x.iter().map(|&v| wrap_unit(v)).collect();
        let mut data = vec![0.0; self.d * self.m];
        self.eval_into(&wrapped, &mut data);
        Ok(FrameMatrix {
            d: self.d,
            m: self.m,
            data,
        })
    }

    /// `F(x) u` into `out` (length d).
    #[inline]
    pub fn apply_into(&self, x: &[f64], u: &[f64], out: &mut [f64]) {
        let mut buf = [0.0; MAX_DIM * MAX_DIM];
        let f = &mut buf[..self.d * self.m];
        self.eval_into(x, f);
        for i in 0..self.d {
            out[i] = (0..self.m).map(|j| f[i * self.m + j] * u[j]).sum();
        }
    }

    /// Bound on `|F(x) u| / |u|` over the torus.
    pub fn max_operator_norm(&self) -> f64 {
        match &self.kind {
            FrameKind::Identity | FrameKind::GrushinChart | FrameKind::GrushinPeriodic => 1.0,
            FrameKind::Tabulated { grid, .. } => (0..grid.len())
                .map(|i| {
                    self.eval(&grid.node_coords(i))
                        .map(|f| f.operator_norm())
                        .unwrap_or(0.0)
                })
                .fold(0.0, f64::max),
        }
    }

    /// Largest `|F(x) - F(x + e_k)|` entry over the sample points and axes.
    pub fn periodicity_defect(&self, samples: &[Vec<f64>]) -> f64 {
        let mut worst: f64 = 0.0;
        let mut a = vec![0.0; self.d * self.m];
        let mut b = vec![0.0; self.d * self.m];
        for x in samples {
            for k in 0..self.d {
                let mut shifted = x.clone();
                shifted[k] += 1.0;
                // evaluate without pre-wrapping to exercise the frame's own reduction
                self.eval_into(x, &mut a);
                self.eval_into(&shifted, &mut b);
                for (p, q) in a.iter().zip(&b) {
                    worst = worst.max((p - q).abs());
                }
            }
        }
        worst
    }
}
