//! Uniform periodic grids on the unit torus and grid functions on them.
//!
//! Node `i` along an axis sits at coordinate `i / n`. Values are stored
//! row-major: the last axis varies fastest.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest torus dimension handled by the fixed-size scratch buffers.
pub const MAX_DIM: usize = 4;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TorusGrid {
    d: usize,
    n: usize,
}

impl TorusGrid {
    pub fn new(d: usize, n: usize) -> Result<Self> {
        if d == 0 || d > MAX_DIM {
            return Err(Error::InvalidGrid(format!(
                "dimension {d} not in 1..={MAX_DIM}"
            )));
        }
        if n < 4 {
            return Err(Error::InvalidGrid(format!("need n >= 4 nodes per axis, got {n}")));
        }
        n.checked_pow(d as u32)
            .ok_or_else(|| Error::InvalidGrid(format!("{n}^{d} nodes overflows")))?;
        Ok(Self { d, n })
    }

    /// Bypasses the `n >= 4` floor; only for tiny hand-checked cases.
    #[cfg(test)]
    pub(crate) fn tiny(d: usize, n: usize) -> Self {
        Self { d, n }
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn nodes_per_axis(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        1.0 / self.n as f64
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.n.pow(self.d as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Row-major flat index of a multi-index; components are wrapped.
    pub fn index_of(&self, multi: &[i64]) -> usize {
        let n = self.n as i64;
        multi[..self.d]
            .iter()
            .fold(0usize, |acc, &i| acc * self.n + i.rem_euclid(n) as usize)
    }

    pub fn multi_index(&self, mut idx: usize) -> [usize; MAX_DIM] {
        let mut out = [0usize; MAX_DIM];
        for k in (0..self.d).rev() {
            out[k] = idx % self.n;
            idx /= self.n;
        }
        out
    }

    pub fn node_coords(&self, idx: usize) -> Vec<f64> {
        let multi = self.multi_index(idx);
        (0..self.d)
            .map(|k| multi[k] as f64 / self.n as f64)
            .collect()
    }

    pub fn node_coords_into(&self, idx: usize, out: &mut [f64]) {
        let multi = self.multi_index(idx);
        for k in 0..self.d {
            out[k] = multi[k] as f64 / self.n as f64;
        }
    }

    /// Node closest to `x` (ties round up).
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let n = self.n as f64;
        x[..self.d].iter().fold(0usize, |acc, &xk| {
            let i = (wrap_unit(xk) * n).round() as usize % self.n;
            acc * self.n + i
        })
    }

    /// True when `x` coincides with a node up to `1e-12` cells.
    pub fn is_node(&self, x: &[f64]) -> bool {
        let n = self.n as f64;
        x[..self.d].iter().all(|&xk| {
            let s = wrap_unit(xk) * n;
            (s - s.round()).abs() < 1e-12
        })
    }

    /// Chebyshev distance between nodes, in cells, measured on the torus.
    pub fn cell_distance(&self, a: usize, b: usize) -> usize {
        let ma = self.multi_index(a);
        let mb = self.multi_index(b);
        (0..self.d)
            .map(|k| {
                let diff = ma[k].abs_diff(mb[k]);
                diff.min(self.n - diff)
            })
            .max()
            .unwrap_or(0)
    }

    /// Node shifted by `offset` cells along each axis.
    pub fn translate(&self, idx: usize, offset: &[i64]) -> usize {
        let multi = self.multi_index(idx);
        let shifted: Vec<i64> = (0..self.d).map(|k| multi[k] as i64 + offset[k]).collect();
        self.index_of(&shifted)
    }

    pub fn check_point(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        Ok(())
    }
}

/// Representative of `x` in `[0, 1)`.
#[inline]
pub fn wrap_unit(x: f64) -> f64 {
    let r = x - x.floor();
    if r >= 1.0 {
        0.0
    } else {
        r
    }
}

/// Representative of `x` in `[-1/2, 1/2)`.
#[inline]
pub fn wrap_centered(x: f64) -> f64 {
    let r = wrap_unit(x + 0.5) - 0.5;
    if r >= 0.5 {
        r - 1.0
    } else {
        r
    }
}

/// Euclidean length of the shortest torus displacement from `a` to `b`.
pub fn torus_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| wrap_centered(y - x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// How interpolation treats masked (`+inf`) corners with nonzero weight.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum MaskRule {
    /// Use the value of the nearest corner (ties round up).
    #[default]
    Nearest,
    /// Drop masked corners and renormalize the remaining weights.
    Renormalize,
}

/// Periodic multilinear interpolation of node values, masked corners
/// handled by [`MaskRule::Nearest`].
pub fn interpolate_values(grid: &TorusGrid, values: &[f64], x: &[f64]) -> f64 {
    interpolate_values_with(grid, values, x, MaskRule::Nearest)
}

/// Corners carrying zero weight are skipped. Either rule returns `+inf`
/// when every weighted corner is masked.
pub fn interpolate_values_with(grid: &TorusGrid, values: &[f64], x: &[f64], rule: MaskRule) -> f64 {
    if grid.d == 2 {
        return interpolate_2d(grid.n, values, x[0], x[1], rule);
    }
    let d = grid.d;
    let n = grid.n;
    let nf = n as f64;
    let mut base = [0usize; MAX_DIM];
    let mut frac = [0f64; MAX_DIM];
    for k in 0..d {
        let s = x[k] * nf;
        let f = s.floor();
        frac[k] = s - f;
        base[k] = wrap_index(f as i64, n);
    }
    let mut acc = 0.0;
    let mut finite_weight = 0.0;
    let mut masked = false;
    let mut nearest = (0.0, 0usize);
    for corner in 0..(1usize << d) {
        let mut w = 1.0;
        let mut idx = 0usize;
        for k in 0..d {
            let up = (corner >> (d - 1 - k)) & 1 == 1;
            let (wk, ik) = if up {
                (frac[k], if base[k] + 1 == n { 0 } else { base[k] + 1 })
            } else {
                (1.0 - frac[k], base[k])
            };
            w *= wk;
            idx = idx * n + ik;
        }
        if w == 0.0 {
            continue;
        }
        if w >= nearest.0 {
            nearest = (w, idx);
        }
        let v = values[idx];
        if v.is_finite() {
            acc += w * v;
            finite_weight += w;
        } else {
            masked = true;
        }
    }
    resolve(acc, finite_weight, masked, values[nearest.1], rule)
}

#[inline(always)]
fn resolve(acc: f64, finite_weight: f64, masked: bool, nearest: f64, rule: MaskRule) -> f64 {
    if !masked {
        return acc;
    }
    match rule {
        MaskRule::Nearest => nearest,
        MaskRule::Renormalize if finite_weight > 0.0 => acc / finite_weight,
        MaskRule::Renormalize => f64::INFINITY,
    }
}

/// `floor` via truncation; avoids a libm call on baseline x86-64.
#[inline(always)]
fn fast_floor(s: f64) -> i64 {
    let t = s as i64;
    if (t as f64) > s {
        t - 1
    } else {
        t
    }
}

#[inline(always)]
fn wrap_index(i: i64, n: usize) -> usize {
    let n = n as i64;
    if (0..n).contains(&i) {
        i as usize
    } else if (-n..0).contains(&i) {
        (i + n) as usize
    } else if (n..2 * n).contains(&i) {
        (i - n) as usize
    } else {
        i.rem_euclid(n) as usize
    }
}

#[inline]
pub(crate) fn interpolate_2d(n: usize, values: &[f64], x0: f64, x1: f64, rule: MaskRule) -> f64 {
    let nf = n as f64;
    let s0 = x0 * nf;
    let s1 = x1 * nf;
    let f0 = fast_floor(s0);
    let f1 = fast_floor(s1);
    let a = s0 - f0 as f64;
    let b = s1 - f1 as f64;
    let i0 = wrap_index(f0, n);
    let j0 = wrap_index(f1, n);
    let i1 = if i0 + 1 == n { 0 } else { i0 + 1 };
    let j1 = if j0 + 1 == n { 0 } else { j0 + 1 };
    let corners = [
        ((1.0 - a) * (1.0 - b), i0 * n + j0),
        ((1.0 - a) * b, i0 * n + j1),
        (a * (1.0 - b), i1 * n + j0),
        (a * b, i1 * n + j1),
    ];
    let mut acc = 0.0;
    let mut finite_weight = 0.0;
    let mut masked = false;
    for (w, idx) in corners {
        if w == 0.0 {
            continue;
        }
        let v = values[idx];
        if v.is_finite() {
            acc += w * v;
            finite_weight += w;
        } else {
            masked = true;
        }
    }
    if !masked {
        return acc;
    }
    let nearest = (if a >= 0.5 { i1 } else { i0 }) * n + if b >= 0.5 { j1 } else { j0 };
    resolve(acc, finite_weight, masked, values[nearest], rule)
}


#[derive(Clone, Debug, PartialEq, Default)]
pub struct FieldMeta {
    pub time_horizon: f64,
    pub shift: f64,
    pub provenance: String,
}

/// A real-valued grid function on the torus. `+inf` marks masked nodes.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: TorusGrid,
    pub values: Vec<f64>,
    pub meta: FieldMeta,
}

impl ScalarField {
    pub fn new(grid: TorusGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::DimensionMismatch {
                expected: grid.len(),
                got: values.len(),
            });
        }
        Ok(Self {
            grid,
            values,
            meta: FieldMeta::default(),
        })
    }

    pub fn constant(grid: TorusGrid, value: f64) -> Self {
        Self {
            grid,
            values: vec![value; grid.len()],
            meta: FieldMeta::default(),
        }
    }

    pub fn from_fn(grid: TorusGrid, mut f: impl FnMut(&[f64]) -> f64) -> Self {
        let mut x = vec![0.0; grid.dim()];
        let values = (0..grid.len())
            .map(|i| {
                grid.node_coords_into(i, &mut x);
                f(&x)
            })
            .collect();
        Self {
            grid,
            values,
            meta: FieldMeta::default(),
        }
    }

    pub fn with_meta(mut self, time_horizon: f64, shift: f64, provenance: &str) -> Self {
        self.meta = FieldMeta {
            time_horizon,
            shift,
            provenance: provenance.to_owned(),
        };
        self
    }

    #[inline]
    pub fn interpolate(&self, x: &[f64]) -> f64 {
        interpolate_values(&self.grid, &self.values, x)
    }

    pub fn min(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn argmin(&self) -> usize {
        let mut best = 0;
        for (i, &v) in self.values.iter().enumerate() {
            if v < self.values[best] {
                best = i;
            }
        }
        best
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn masked_count(&self) -> usize {
        self.values.iter().filter(|v| !v.is_finite()).count()
    }

    /// `max |self - other|` over nodes; `inf` if masks differ.
    pub fn sup_distance(&self, other: &ScalarField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(&a, &b)| {
                if a == b {
                    0.0
                } else {
                    (a - b).abs()
                }
            })
            .fold(0.0, f64::max)
    }

    pub fn map(&self, mut f: impl FnMut(f64) -> f64) -> ScalarField {
        ScalarField {
            grid: self.grid,
            values: self.values.iter().map(|&v| f(v)).collect(),
            meta: self.meta.clone(),
        }
    }

    /// Plain-text form: a `d n time shift` header line followed by one value
    /// per line in row-major order. Round-trips bit-exactly.
    pub fn to_text(&self) -> String {
        let mut s = String::with_capacity(self.values.len() * 24 + 64);
        let _ = writeln!(
            s,
            "{} {} {:e} {:e}",
            self.grid.dim(),
            self.grid.nodes_per_axis(),
            self.meta.time_horizon,
            self.meta.shift
        );
        for v in &self.values {
            let _ = writeln!(s, "{v:e}");
        }
        s
    }

    /// Parses [`ScalarField::to_text`] output; `#` lines are skipped.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Parse("empty field file".into()))?;
        let parts: Vec<&str> = header.split_whitespace().collect();
        if parts.len() != 4 {
            return Err(Error::Parse(format!("bad field header `{header}`")));
        }
        let d: usize = parse_token(parts[0])?;
        let n: usize = parse_token(parts[1])?;
        let time_horizon: f64 = parse_token(parts[2])?;
        let shift: f64 = parse_token(parts[3])?;
        let grid = TorusGrid::new(d, n)?;
        let values = lines
            .flat_map(str::split_whitespace)
            .map(parse_token::<f64>)
            .collect::<Result<Vec<_>>>()?;
        let mut field = ScalarField::new(grid, values)?;
        field.meta.time_horizon = time_horizon;
        field.meta.shift = shift;
        Ok(field)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        let mut f = Self::from_text(&text)?;
        f.meta.provenance = path.display().to_string();
        Ok(f)
    }
}

pub(crate) fn parse_token<T: std::str::FromStr>(tok: &str) -> Result<T> {
    tok.parse::<T>()
        .map_err(|_| Error::Parse(format!("cannot parse `{tok}`")))
}
