//! Lagrangians, their Legendre transforms and the induced Hamiltonian
//! `H(x, p) = L*(x, F(x)^T p)`.
//!
//! Two families are supported. Mañé-type Lagrangians
//! `L(x, u) = |u - V(x)|^2 / 2 + G(x)` carry a closed-form transform and a
//! computed coercivity certificate. Custom Lagrangians are tabulated on a
//! state grid times a control box and use a numerical sup.

use std::f64::consts::PI;

use rand::Rng;

use crate::controls::ControlGrid;
use crate::error::{Error, Result};
use crate::frame::FieldSystem;
use crate::grid::{parse_token, ScalarField, TorusGrid, MAX_DIM};

/// Drift `V: T^d -> R^m` of a Mañé Lagrangian.
#[derive(Clone, Debug, PartialEq)]
pub enum Drift {
    Zero,
    Constant(Vec<f64>),
    /// One grid field per control component.
    Tabulated(Vec<ScalarField>),
}

impl Drift {
    #[inline]
    pub fn eval_into(&self, x: &[f64], out: &mut [f64]) {
        match self {
            Drift::Zero => out.fill(0.0),
            Drift::Constant(v) => out.copy_from_slice(v),
            Drift::Tabulated(fields) => {
                for (o, f) in out.iter_mut().zip(fields) {
                    *o = f.interpolate(x);
                }
            }
        }
    }

    fn dim(&self) -> Option<usize> {
        match self {
            Drift::Zero => None,
            Drift::Constant(v) => Some(v.len()),
            Drift::Tabulated(f) => Some(f.len()),
        }
    }
}

/// Potential `G: T^d -> R` of a Mañé Lagrangian.
///
/// * `Sin2`: `G(x) = sum_i sin^2(pi x_i)`, unique zero minimum at the origin.
/// * `TwoBump`: `G(x) = s(x) (0.3 + s(x - 1/2)) / d` with
///   `s(z) = sum_i sin^2(pi z_i)`: global minimum 0 at the origin and a
///   strict local minimum `0.3` at `(1/2, ..., 1/2)` when `d = 2`.
#[derive(Clone, Debug, PartialEq)]
pub enum Potential {
    Zero,
    Constant(f64),
    Sin2,
    TwoBump,
    Tabulated(ScalarField),
}

fn sin2_sum(x: &[f64]) -> f64 {
    x.iter().map(|&v| (PI * v).sin().powi(2)).sum()
}

impl Potential {
    #[inline]
    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            Potential::Zero => 0.0,
            Potential::Constant(g) => *g,
            Potential::Sin2 => sin2_sum(x),
            Potential::TwoBump => {
                let near: f64 = sin2_sum(x);
                let far: f64 = x.iter().map(|&v| (PI * v).cos().powi(2)).sum();
                near * (0.3 + far) / x.len() as f64
            }
            Potential::Tabulated(f) => f.interpolate(x),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct Coercivity {
    pub sigma: f64,
    pub k1: f64,
    pub k2: f64,
}

impl Coercivity {
    /// `kappa_0 = (sup |L(., 0)| + K2) / K1`, the moment cap of minimizing measures.
    pub fn kappa0(&self, l0_sup: f64) -> Result<f64> {
        if self.k1 <= 0.0 {
            return Err(Error::Coercivity(format!("K1 = {} must be positive", self.k1)));
        }
        Ok((l0_sup + self.k2) / self.k1)
    }

    /// Default control radius `2 kappa_0^(1/sigma)`, clamped below by `min_radius`.
    pub fn control_radius_bound(&self, l0_sup: f64, min_radius: f64) -> Result<f64> {
        let r = 2.0 * self.kappa0(l0_sup)?.powf(1.0 / self.sigma);
        Ok(if r < min_radius { min_radius } else { r })
    }
}

/// `L` tabulated on `state_grid` x the control box `[-radius, radius]^m`
/// with `n_c` nodes per control axis.
#[derive(Clone, Debug, PartialEq)]
pub struct TabulatedLagrangian {
    pub state_grid: TorusGrid,
    pub m: usize,
    pub radius: f64,
    pub n_c: usize,
    /// `values[state * n_c^m + control]`, controls row-major.
    pub values: Vec<f64>,
}

impl TabulatedLagrangian {
    pub fn new(state_grid: TorusGrid, m: usize, radius: f64, n_c: usize, values: Vec<f64>) -> Result<Self> {
        if n_c < 2 || radius <= 0.0 {
            return Err(Error::InvalidArgument("control table needs n_c >= 2 and radius > 0".into()));
        }
        let expected = state_grid.len() * n_c.pow(m as u32);
        if values.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: values.len(),
            });
        }
        Ok(Self {
            state_grid,
            m,
            radius,
            n_c,
            values,
        })
    }

    /// Header `d m n n_c radius`, then one line per state node holding the
    /// `n_c^m` control samples.
    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .map(str::trim)
            .filter(|l| !l.is_empty() && !l.starts_with('#'));
        let header: Vec<&str> = lines
            .next()
            .ok_or_else(|| Error::Parse("empty Lagrangian table".into()))?
            .split_whitespace()
            .collect();
        if header.len() != 5 {
            return Err(Error::Parse("Lagrangian table header must be `d m n n_c radius`".into()));
        }
        let d: usize = parse_token(header[0])?;
        let m: usize = parse_token(header[1])?;
        let n: usize = parse_token(header[2])?;
        let n_c: usize = parse_token(header[3])?;
        let radius: f64 = parse_token(header[4])?;
        let values = lines
            .flat_map(str::split_whitespace)
            .map(parse_token::<f64>)
            .collect::<Result<Vec<_>>>()?;
        Self::new(TorusGrid::new(d, n)?, m, radius, n_c, values)
    }

    fn eval(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        for &uj in u {
            if uj.abs() > self.radius * (1.0 + 1e-12) {
                return Err(Error::ControlOutOfRange {
                    value: uj,
                    radius: self.radius,
                });
            }
        }
        let block = self.n_c.pow(self.m as u32);
        // interpolate in control at every state node of the surrounding cell,
        // then in state
        let grid = &self.state_grid;
        let d = grid.dim();
        let n = grid.nodes_per_axis();
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0f64; MAX_DIM];
        for k in 0..d {
            let s = x[k] * n as f64;
            let f = s.floor();
            frac[k] = s - f;
            base[k] = (f as i64).rem_euclid(n as i64) as usize;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for k in 0..d {
                let up = (corner >> (d - 1 - k)) & 1 == 1;
                let (wk, ik) = if up {
                    (frac[k], (base[k] + 1) % n)
                } else {
                    (1.0 - frac[k], base[k])
                };
                w *= wk;
                idx = idx * n + ik;
            }
            if w == 0.0 {
                continue;
            }
            acc += w * self.control_interp(&self.values[idx * block..(idx + 1) * block], u);
        }
        Ok(acc)
    }

    fn control_interp(&self, table: &[f64], u: &[f64]) -> f64 {
        let m = self.m;
        let step = 2.0 * self.radius / (self.n_c as f64 - 1.0);
        let mut base = [0usize; MAX_DIM];
        let mut frac = [0f64; MAX_DIM];
        for j in 0..m {
            let s = ((u[j] + self.radius) / step).clamp(0.0, (self.n_c - 1) as f64);
            let mut b = s.floor() as usize;
            if b == self.n_c - 1 {
                b -= 1;
            }
            base[j] = b;
            frac[j] = s - b as f64;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << m) {
            let mut w = 1.0;
            let mut idx = 0usize;
            for j in 0..m {
                let up = (corner >> (m - 1 - j)) & 1 == 1;
                w *= if up { frac[j] } else { 1.0 - frac[j] };
                idx = idx * self.n_c + base[j] + usize::from(up);
            }
            if w != 0.0 {
                acc += w * table[idx];
            }
        }
        acc
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum LagrangianKind {
    Mane { drift: Drift, potential: Potential },
    Custom(TabulatedLagrangian),
}

/// A Lagrangian together with its coercivity certificate
/// `L(x, u) >= K1 |u|^sigma - K2` and the sampled `sup_x |L(x, 0)|`.
#[derive(Clone, Debug, PartialEq)]
pub struct LagrangianSpec {
    pub kind: LagrangianKind,
    /// Constant added to `L`.
    pub shift: f64,
    pub coercivity: Coercivity,
    pub l0_sup: f64,
    d: usize,
    m: usize,
    sample_grid: TorusGrid,
    /// Controls searched by the numerical Legendre transform (custom only).
    legendre_ctrl: Option<ControlGrid>,
}

impl LagrangianSpec {
    /// Mañé Lagrangian with `sigma = 2`, `K1 = 1/4` and
    /// `K2 = max_x (|V|^2 / 2 + G^-)` computed over `grid`.
    pub fn mane(grid: TorusGrid, m: usize, drift: Drift, potential: Potential) -> Result<Self> {
        if let Some(k) = drift.dim() {
            if k != m {
                return Err(Error::DimensionMismatch { expected: m, got: k });
            }
        }
        let mut spec = Self {
            kind: LagrangianKind::Mane { drift, potential },
            shift: 0.0,
            coercivity: Coercivity {
                sigma: 2.0,
                k1: 0.25,
                k2: 0.0,
            },
            l0_sup: 0.0,
            d: grid.dim(),
            m,
            sample_grid: grid,
            legendre_ctrl: None,
        };
        spec.recompute_mane_certificate();
        Ok(spec)
    }

    /// Tabulated Lagrangian with a user-supplied certificate, verified on
    /// the table's own state nodes and a control lattice.
    pub fn custom(table: TabulatedLagrangian, coercivity: Coercivity) -> Result<Self> {
        let grid = table.state_grid;
        let m = table.m;
        let n_c = if table.n_c % 2 == 1 { table.n_c } else { table.n_c + 1 };
        let ctrl = ControlGrid::new(m, table.radius, n_c.max(5))?;
        let mut spec = Self {
            kind: LagrangianKind::Custom(table),
            shift: 0.0,
            coercivity,
            l0_sup: 0.0,
            d: grid.dim(),
            m,
            sample_grid: grid,
            legendre_ctrl: Some(ctrl),
        };
        spec.l0_sup = spec.sample_l0_sup()?;
        let violation = spec.coercivity_violation(spec.legendre_ctrl.as_ref().unwrap())?;
        if violation > 1e-12 {
            return Err(Error::Coercivity(format!(
                "L >= K1|u|^sigma - K2 fails by {violation:e} at a sampled point"
            )));
        }
        Ok(spec)
    }

    /// The same Lagrangian plus the constant `a`.
    pub fn shifted(&self, a: f64) -> Result<Self> {
        let mut out = self.clone();
        out.shift += a;
        match &out.kind {
            LagrangianKind::Mane { .. } => out.recompute_mane_certificate(),
            LagrangianKind::Custom(_) => {
                out.coercivity.k2 = (out.coercivity.k2 - a).max(0.0);
                out.l0_sup = out.sample_l0_sup()?;
            }
        }
        Ok(out)
    }

    fn recompute_mane_certificate(&mut self) {
        let LagrangianKind::Mane { drift, potential } = &self.kind else {
            return;
        };
        let grid = self.sample_grid;
        let mut x = vec![0.0; grid.dim()];
        let mut v = vec![0.0; self.m];
        let (mut k2, mut l0): (f64, f64) = (0.0, 0.0);
        for i in 0..grid.len() {
            grid.node_coords_into(i, &mut x);
            drift.eval_into(&x, &mut v);
            let g = potential.eval(&x) + self.shift;
            let half_v2 = 0.5 * v.iter().map(|a| a * a).sum::<f64>();
            k2 = k2.max(half_v2 + (-g).max(0.0));
            l0 = l0.max((half_v2 + g).abs());
        }
        self.coercivity.k2 = k2;
        self.l0_sup = l0;
    }

    fn sample_l0_sup(&self) -> Result<f64> {
        let zero = vec![0.0; self.m];
        let grid = self.sample_grid;
        let mut best: f64 = 0.0;
        for i in 0..grid.len() {
            best = best.max(self.eval(&grid.node_coords(i), &zero)?.abs());
        }
        Ok(best)
    }

    #[inline]
    pub fn state_dim(&self) -> usize {
        self.d
    }

    #[inline]
    pub fn control_dim(&self) -> usize {
        self.m
    }

    pub fn kappa0(&self) -> Result<f64> {
        self.coercivity.kappa0(self.l0_sup)
    }

    pub fn control_radius_bound(&self, min_radius: f64) -> Result<f64> {
        self.coercivity.control_radius_bound(self.l0_sup, min_radius)
    }

    pub fn is_mane(&self) -> bool {
        matches!(self.kind, LagrangianKind::Mane { .. })
    }

    /// `(V(x), G(x) + shift)` for Mañé Lagrangians.
    pub fn mane_parts(&self, x: &[f64], v: &mut [f64]) -> Option<f64> {
        match &self.kind {
            LagrangianKind::Mane { drift, potential } => {
                drift.eval_into(x, v);
                Some(potential.eval(x) + self.shift)
            }
            LagrangianKind::Custom(_) => None,
        }
    }

    fn check_dims(&self, x: &[f64], u: &[f64]) -> Result<()> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                got: x.len(),
            });
        }
        if u.len() != self.m {
            return Err(Error::DimensionMismatch {
                expected: self.m,
                got: u.len(),
            });
        }
        Ok(())
    }

    /// `L(x, u)`.
    pub fn eval(&self, x: &[f64], u: &[f64]) -> Result<f64> {
        self.check_dims(x, u)?;
        match &self.kind {
            LagrangianKind::Mane { drift, potential } => {
                let mut v = [0.0; MAX_DIM];
                drift.eval_into(x, &mut v[..self.m]);
                let kin: f64 = u.iter().zip(&v).map(|(a, b)| (a - b).powi(2)).sum();
                Ok(0.5 * kin + potential.eval(x) + self.shift)
            }
            LagrangianKind::Custom(t) => Ok(t.eval(x, u)? + self.shift),
        }
    }

    /// `L*(x, q) = sup_u <q, u> - L(x, u)` and a maximizer.
    pub fn legendre_with_argmax(&self, x: &[f64], q: &[f64]) -> Result<(f64, Vec<f64>)> {
        self.check_dims(x, q)?;
        match &self.kind {
            LagrangianKind::Mane { drift, potential } => {
                let mut v = vec![0.0; self.m];
                drift.eval_into(x, &mut v);
                let q2: f64 = q.iter().map(|a| a * a).sum();
                let qv: f64 = q.iter().zip(&v).map(|(a, b)| a * b).sum();
                let value = 0.5 * q2 + qv - potential.eval(x) - self.shift;
                let argmax = q.iter().zip(&v).map(|(a, b)| a + b).collect();
                Ok((value, argmax))
            }
            LagrangianKind::Custom(t) => self.numerical_legendre(t, x, q),
        }
    }

    fn numerical_legendre(&self, t: &TabulatedLagrangian, x: &[f64], q: &[f64]) -> Result<(f64, Vec<f64>)> {
        let ctrl = self
            .legendre_ctrl
            .as_ref()
            .expect("custom Lagrangian carries a Legendre control grid");
        let objective = |u: &[f64]| -> Result<f64> {
            let qu: f64 = q.iter().zip(u).map(|(a, b)| a * b).sum();
            Ok(qu - t.eval(x, u)? - self.shift)
        };
        let mut best = f64::NEG_INFINITY;
        let mut best_u = vec![0.0; self.m];
        for u in ctrl.iter() {
            let val = objective(u)?;
            if val > best {
                best = val;
                best_u.copy_from_slice(u);
            }
        }
        // one local refinement pass on a 5^m stencil at quarter spacing
        let fine = ctrl.spacing() / 4.0;
        let center = best_u.clone();
        let mut trial = vec![0.0; self.m];
        for flat in 0..5usize.pow(self.m as u32) {
            let mut rem = flat;
            for j in (0..self.m).rev() {
                trial[j] = center[j] + ((rem % 5) as f64 - 2.0) * fine;
                rem /= 5;
            }
            if trial.iter().any(|v| v.abs() > t.radius) {
                continue;
            }
            let val = objective(&trial)?;
            if val > best {
                best = val;
                best_u.copy_from_slice(&trial);
            }
        }
        Ok((best, best_u))
    }

    pub fn legendre(&self, x: &[f64], q: &[f64]) -> Result<f64> {
        Ok(self.legendre_with_argmax(x, q)?.0)
    }

    /// `D_q L*(x, q)`, the control realizing the Legendre sup.
    pub fn legendre_gradient(&self, x: &[f64], q: &[f64]) -> Result<Vec<f64>> {
        Ok(self.legendre_with_argmax(x, q)?.1)
    }

    /// `D_u L(x, u)`: exact for Mañé, central differences otherwise.
    pub fn control_gradient(&self, x: &[f64], u: &[f64]) -> Result<Vec<f64>> {
        self.check_dims(x, u)?;
        match &self.kind {
            LagrangianKind::Mane { drift, .. } => {
                let mut v = vec![0.0; self.m];
                drift.eval_into(x, &mut v);
                Ok(u.iter().zip(&v).map(|(a, b)| a - b).collect())
            }
            LagrangianKind::Custom(t) => {
                let h = 1e-5 * t.radius;
                let mut out = Vec::with_capacity(self.m);
                let mut probe = u.to_vec();
                for j in 0..self.m {
                    probe[j] = u[j] + h;
                    let up = self.eval(x, &probe)?;
                    probe[j] = u[j] - h;
                    let down = self.eval(x, &probe)?;
                    probe[j] = u[j];
                    out.push((up - down) / (2.0 * h));
                }
                Ok(out)
            }
        }
    }

    /// `H(x, p) = L*(x, F(x)^T p)`.
    pub fn hamiltonian(&self, sys: &FieldSystem, x: &[f64], p: &[f64]) -> Result<f64> {
        let f = sys.eval(x)?;
        if p.len() != f.d {
            return Err(Error::DimensionMismatch {
                expected: f.d,
                got: p.len(),
            });
        }
        self.legendre(x, &f.transpose_apply(p))
    }

    /// `D_p H(x, p) = F(x) D_q L*(x, F(x)^T p)`.
    pub fn hamiltonian_gradient(&self, sys: &FieldSystem, x: &[f64], p: &[f64]) -> Result<(f64, Vec<f64>)> {
        let f = sys.eval(x)?;
        let (value, u) = self.legendre_with_argmax(x, &f.transpose_apply(p))?;
        Ok((value, f.apply(&u)))
    }

    /// Largest amount by which `L >= K1|u|^sigma - K2` fails over the sample
    /// grid nodes times `ctrl`. Nonpositive means the certificate holds.
    pub fn coercivity_violation(&self, ctrl: &ControlGrid) -> Result<f64> {
        let grid = self.sample_grid;
        let mut worst = f64::NEG_INFINITY;
        for i in 0..grid.len() {
            let x = grid.node_coords(i);
            for u in ctrl.iter() {
                let norm = u.iter().map(|a| a * a).sum::<f64>().sqrt();
                let bound = self.coercivity.k1 * norm.powf(self.coercivity.sigma) - self.coercivity.k2;
                worst = worst.max(bound - self.eval(&x, u)?);
            }
        }
        Ok(worst)
    }

    /// Largest sampled midpoint-convexity defect
    /// `L(x, (u+v)/2) - (L(x,u) + L(x,v)) / 2` over nodes and control pairs.
    pub fn convexity_defect(&self, ctrl: &ControlGrid, pairs_per_node: usize, rng: &mut impl Rng) -> Result<f64> {
        let grid = self.sample_grid;
        let mut worst = f64::NEG_INFINITY;
        let mut mid = vec![0.0; self.m];
        for i in 0..grid.len() {
            let x = grid.node_coords(i);
            for _ in 0..pairs_per_node {
                let a = ctrl.point(rng.gen_range(0..ctrl.len()));
                let b = ctrl.point(rng.gen_range(0..ctrl.len()));
                for j in 0..self.m {
                    mid[j] = 0.5 * (a[j] + b[j]);
                }
                let defect = self.eval(&x, &mid)? - 0.5 * (self.eval(&x, a)? + self.eval(&x, b)?);
                worst = worst.max(defect);
            }
        }
        Ok(worst)
    }
}

/// Empirical constant `C` in `|H(x,p) - H(y,p)| <= C (1 + |p|^2) |x - y|`
/// from random triples with `|p| <= p_max`.
pub fn hamiltonian_continuity_constant(
    spec: &LagrangianSpec,
    sys: &FieldSystem,
    p_max: f64,
    samples: usize,
    rng: &mut impl Rng,
) -> Result<f64> {
    let d = sys.state_dim();
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let y: Vec<f64> = x.iter().map(|v| v + rng.gen_range(-0.05..0.05)).collect();
        let p: Vec<f64> = (0..d).map(|_| rng.gen_range(-p_max..p_max)).collect();
        let dist = crate::grid::torus_distance(&x, &y);
        if dist < 1e-9 {
            continue;
        }
        let p2: f64 = p.iter().map(|a| a * a).sum();
        let diff = (spec.hamiltonian(sys, &x, &p)? - spec.hamiltonian(sys, &y, &p)?).abs();
        worst = worst.max(diff / ((1.0 + p2) * dist));
    }
    Ok(worst)
}
