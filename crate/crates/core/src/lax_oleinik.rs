//! Monotone semi-Lagrangian discretization of the Lax-Oleinik semigroup.
//!
//! One step of size `dt` replaces the inf over admissible arcs by a min over
//! the control lattice, with an explicit-Euler foot point and the frame
//! frozen at the node:
//!
//! ```text
//! backward (arrival):   (T φ)(x) = min_u φ(x - dt F(x) u) + dt L(x, u)
//! forward (departure):  (S v)(x) = min_u v(x + dt F(x) u) + dt L(x, u)
//! ```
//!
//! Both are monotone, commute with constants and are sup-norm
//! non-expansive. Ties in the argmin go to the lowest control index.

use log::warn;
use rayon::prelude::*;

use crate::controls::ControlGrid;
use crate::error::{Error, Result};
use crate::frame::FieldSystem;
use crate::grid::{interpolate_2d, interpolate_values_with, wrap_centered, wrap_unit, MaskRule, ScalarField, TorusGrid, MAX_DIM};
use crate::lagrangian::LagrangianSpec;

/// Default bound on the step displacement, in grid cells.
pub const DEFAULT_COURANT: f64 = 10.0;

/// Precomputed displacements `dt F(x_i) u_j` and costs `dt L(x_i, u_j)`.
pub struct SemiLagrangian<'a> {
    pub grid: TorusGrid,
    pub dt: f64,
    pub spec: &'a LagrangianSpec,
    pub sys: &'a FieldSystem,
    pub ctrl: &'a ControlGrid,
    n_ctrl: usize,
    disp: Vec<f64>,
    cost: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Direction {
    Arrival,
    Departure,
}

impl<'a> SemiLagrangian<'a> {
    pub fn new(
        grid: TorusGrid,
        dt: f64,
        spec: &'a LagrangianSpec,
        sys: &'a FieldSystem,
        ctrl: &'a ControlGrid,
        courant_max: f64,
    ) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("time step {dt} must be > 0")));
        }
        let d = grid.dim();
        let m = ctrl.dim();
        if sys.state_dim() != d || spec.state_dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                got: sys.state_dim(),
            });
        }
        if sys.control_dim() != m || spec.control_dim() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                got: sys.control_dim(),
            });
        }
        check_cfl(grid, dt, ctrl.radius(), sys.max_operator_norm(), courant_max)?;

        let n_ctrl = ctrl.len();
        let per_node: Vec<(Vec<f64>, Vec<f64>)> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                let x = grid.node_coords(i);
                let mut disp = vec![0.0; n_ctrl * d];
                let mut cost = vec![0.0; n_ctrl];
                let mut fx = vec![0.0; d * m];
                sys.eval_into(&x, &mut fx);
                for (j, u) in ctrl.iter().enumerate() {
                    for k in 0..d {
                        disp[j * d + k] = dt * (0..m).map(|l| fx[k * m + l] * u[l]).sum::<f64>();
                    }
                    cost[j] = match spec.eval(&x, u) {
                        Ok(l) => dt * l,
                        Err(_) => f64::NAN,
                    };
                }
                (disp, cost)
            })
            .collect();
        let mut disp = Vec::with_capacity(grid.len() * n_ctrl * d);
        let mut cost = Vec::with_capacity(grid.len() * n_ctrl);
        for (dv, cv) in per_node {
            disp.extend(dv);
            cost.extend(cv);
        }
        if cost.iter().any(|c| c.is_nan()) {
            // surface the underlying evaluation error
            let x = grid.node_coords(0);
            for u in ctrl.iter() {
                spec.eval(&x, u)?;
            }
            return Err(Error::InvalidArgument("Lagrangian undefined on the control grid".into()));
        }
        Ok(Self {
            grid,
            dt,
            spec,
            sys,
            ctrl,
            n_ctrl,
            disp,
            cost,
        })
    }

    #[inline]
    fn node_min(&self, values: &[f64], i: usize, dir: Direction, rule: MaskRule) -> (f64, u32) {
        let d = self.grid.dim();
        let mut x = [0.0; MAX_DIM];
        self.grid.node_coords_into(i, &mut x);
        let sign = match dir {
            Direction::Arrival => -1.0,
            Direction::Departure => 1.0,
        };
        let mut foot = [0.0; MAX_DIM];
        let mut best = f64::INFINITY;
        let mut arg = 0u32;
        let base = i * self.n_ctrl;
        if d == 2 {
            let n = self.grid.nodes_per_axis();
            let disp = &self.disp[base * 2..(base + self.n_ctrl) * 2];
            let cost = &self.cost[base..base + self.n_ctrl];
            for (j, (dj, &cj)) in disp.chunks_exact(2).zip(cost).enumerate() {
                let v = interpolate_2d(n, values, x[0] + sign * dj[0], x[1] + sign * dj[1], rule) + cj;
                if v < best {
                    best = v;
                    arg = j as u32;
                }
            }
            return (best, arg);
        }
        for j in 0..self.n_ctrl {
            let disp = &self.disp[(base + j) * d..(base + j + 1) * d];
            for k in 0..d {
                foot[k] = x[k] + sign * disp[k];
            }
            let v = interpolate_values_with(&self.grid, values, &foot[..d], rule) + self.cost[base + j];
            if v < best {
                best = v;
                arg = j as u32;
            }
        }
        (best, arg)
    }

    fn sweep(&self, phi: &ScalarField, dir: Direction, rule: MaskRule) -> (Vec<f64>, Vec<u32>) {
        assert_eq!(phi.grid, self.grid, "field and operator grids differ");
        (0..self.grid.len())
            .into_par_iter()
            .map(|i| self.node_min(&phi.values, i, dir, rule))
            .unzip()
    }

    /// Arrival step with an explicit rule for masked corners.
    pub fn backward_step_masked(&self, phi: &ScalarField, rule: MaskRule) -> ScalarField {
        let (values, _) = self.sweep(phi, Direction::Arrival, rule);
        let mut out = ScalarField::new(self.grid, values).expect("grid sizes agree");
        out.meta = phi.meta.clone();
        out.meta.time_horizon += self.dt;
        out
    }

    /// One step of the backward Lax-Oleinik operator `T_dt`.
    pub fn backward_step(&self, phi: &ScalarField) -> ScalarField {
        self.backward_step_with_argmin(phi).0
    }

    pub fn backward_step_with_argmin(&self, phi: &ScalarField) -> (ScalarField, Vec<u32>) {
        let (values, arg) = self.sweep(phi, Direction::Arrival, MaskRule::Nearest);
        let mut out = ScalarField::new(self.grid, values).expect("grid sizes agree");
        out.meta = phi.meta.clone();
        out.meta.time_horizon += self.dt;
        (out, arg)
    }

    /// One step of the departure recursion used for the value function.
    pub fn forward_step(&self, v: &ScalarField) -> ScalarField {
        let (values, _) = self.sweep(v, Direction::Departure, MaskRule::Nearest);
        let mut out = ScalarField::new(self.grid, values).expect("grid sizes agree");
        out.meta = v.meta.clone();
        out.meta.time_horizon += self.dt;
        out
    }

    /// Best lattice control for the departure recursion at an arbitrary
    /// point, with the frame and Lagrangian evaluated at that point.
    pub fn departure_control_at(&self, v: &ScalarField, x: &[f64]) -> Result<(usize, f64)> {
        let d = self.grid.dim();
        let mut fu = [0.0; MAX_DIM];
        let mut foot = [0.0; MAX_DIM];
        let mut best = f64::INFINITY;
        let mut arg = 0;
        for (j, u) in self.ctrl.iter().enumerate() {
            self.sys.apply_into(x, u, &mut fu);
            for k in 0..d {
                foot[k] = x[k] + self.dt * fu[k];
            }
            let val = v.interpolate(&foot[..d]) + self.dt * self.spec.eval(x, u)?;
            if val < best {
                best = val;
                arg = j;
            }
        }
        Ok((arg, best))
    }

    fn steps_for(&self, t: f64) -> Result<usize> {
        let k = t / self.dt;
        let r = k.round();
        if (k - r).abs() > 1e-9 * r.max(1.0) || r < 0.0 {
            return Err(Error::InvalidArgument(format!(
                "time {t} is not a multiple of the step {}",
                self.dt
            )));
        }
        Ok(r as usize)
    }
}

pub fn check_cfl(grid: TorusGrid, dt: f64, radius: f64, max_frame_norm: f64, courant_max: f64) -> Result<()> {
    let displacement = dt * radius * max_frame_norm;
    let limit = courant_max * grid.spacing();
    if displacement > limit {
        return Err(Error::Cfl {
            displacement,
            limit,
            courant: courant_max,
            spacing: grid.spacing(),
        });
    }
    Ok(())
}

/// Value function `V^T` with `V^0 = 0`, by the departure recursion.
pub fn forward_value(sl: &SemiLagrangian, horizon: f64) -> Result<ScalarField> {
    let steps = sl.steps_for(horizon)?;
    let mut v = ScalarField::constant(sl.grid, 0.0).with_meta(0.0, 0.0, "value");
    for _ in 0..steps {
        v = sl.forward_step(&v);
    }
    Ok(v)
}

/// `[V^0, V^dt, ..., V^T]`.
pub fn forward_value_history(sl: &SemiLagrangian, horizon: f64) -> Result<Vec<ScalarField>> {
    let steps = sl.steps_for(horizon)?;
    let mut out = Vec::with_capacity(steps + 1);
    out.push(ScalarField::constant(sl.grid, 0.0).with_meta(0.0, 0.0, "value"));
    for k in 0..steps {
        let next = sl.forward_step(&out[k]);
        out.push(next);
    }
    Ok(out)
}

/// Fundamental solution `y -> A_t(x_src, y)` at each requested time.
///
/// Starts from 0 at the source node and `+inf` elsewhere and applies the
/// arrival step. Off-grid sources are snapped to the nearest node.
pub fn action_field(sl: &SemiLagrangian, x_src: &[f64], times: &[f64]) -> Result<Vec<ScalarField>> {
    sl.grid.check_point(x_src)?;
    if !sl.grid.is_node(x_src) {
        warn!("action source {x_src:?} is off-grid; snapping to the nearest node");
    }
    let src = sl.grid.nearest_node(x_src);
    let mut steps = Vec::with_capacity(times.len());
    for w in times.windows(2) {
        if w[1] < w[0] {
            return Err(Error::InvalidArgument("action times must be increasing".into()));
        }
    }
    for &t in times {
        steps.push(sl.steps_for(t)?);
    }
    Ok(action_from_node(sl, src, &steps))
}

/// Action fields from node `src` after each step count in `steps` (increasing).
pub fn action_from_node(sl: &SemiLagrangian, src: usize, steps: &[usize]) -> Vec<ScalarField> {
    let mut phi = ScalarField::constant(sl.grid, f64::INFINITY).with_meta(0.0, 0.0, "action");
    phi.values[src] = 0.0;
    let mut out = Vec::with_capacity(steps.len());
    let mut done = 0;
    for &k in steps {
        while done < k {
            phi = sl.backward_step(&phi);
            done += 1;
        }
        out.push(phi.clone());
    }
    out
}

#[derive(Clone, Debug)]
pub struct ErgodicSolution {
    /// Estimated critical constant.
    pub c: f64,
    /// Fixed point normalized by `chi(x_ref) = 0`, `x_ref` the origin node.
    pub chi: ScalarField,
    pub iterations: usize,
    pub last_update: f64,
    /// `(iteration, c estimate, sup-norm update)`.
    pub trace: Vec<(usize, f64, f64)>,
}

/// Relative value iteration for `chi = T_dt chi - c dt`.
pub fn ergodic_iteration(sl: &SemiLagrangian, tol: f64, max_iters: usize) -> Result<ErgodicSolution> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {tol} must be > 0")));
    }
    let x_ref = 0usize;
    let mut chi = ScalarField::constant(sl.grid, 0.0);
    let mut trace = Vec::new();
    let mut update = f64::INFINITY;
    for k in 1..=max_iters {
        let t = sl.backward_step(&chi);
        let anchor = t.values[x_ref];
        let next: Vec<f64> = t.values.iter().map(|v| v - anchor).collect();
        update = next
            .iter()
            .zip(&chi.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        let c = anchor / sl.dt;
        chi.values = next;
        if k % 10 == 0 || update < tol * sl.dt {
            trace.push((k, c, update));
        }
        if update < tol * sl.dt {
            chi.meta.provenance = "ergodic fixed point".into();
            return Ok(ErgodicSolution {
                c,
                chi,
                iterations: k,
                last_update: update,
                trace,
            });
        }
    }
    Err(Error::NonConvergence {
        what: "relative value iteration".into(),
        iterations: max_iters,
        amplitude: update,
    })
}

/// Central-difference gradient of the interpolant, step `delta`.
pub fn field_gradient(field: &ScalarField, x: &[f64], delta: f64) -> Vec<f64> {
    let d = field.grid.dim();
    let mut probe = x.to_vec();
    (0..d)
        .map(|k| {
            probe[k] = x[k] + delta;
            let up = field.interpolate(&probe);
            probe[k] = x[k] - delta;
            let down = field.interpolate(&probe);
            probe[k] = x[k];
            (up - down) / (2.0 * delta)
        })
        .collect()
}

/// Feedback control `D_q L*(x, F(x)^T grad chi(x))`.
pub fn feedback_control(chi: &ScalarField, spec: &LagrangianSpec, sys: &FieldSystem, x: &[f64]) -> Result<Vec<f64>> {
    let grad = field_gradient(chi, x, chi.grid.spacing());
    let q = sys.eval(x)?.transpose_apply(&grad);
    spec.legendre_gradient(x, &q)
}

#[derive(Clone, Debug)]
pub struct TrajectorySample {
    pub times: Vec<f64>,
    /// States wrapped to `[0, 1)^d`.
    pub states: Vec<Vec<f64>>,
    /// `controls[k]` acts on `[t_k, t_{k+1})`.
    pub controls: Vec<Vec<f64>>,
    /// Cumulative `sum dt L` up to each time.
    pub running_cost: Vec<f64>,
    /// `|chi(end) - chi(start) - int L + c T|` for feedback curves.
    pub calibration_defect: f64,
    /// `max |x_{k+1} - x_k - dt F(x_k) u_k| / dt^2`.
    pub step_constant: f64,
}

/// Integrates the feedback of `chi` by explicit Euler from `x0`.
pub fn calibrated_curve(
    chi: &ScalarField,
    c: f64,
    x0: &[f64],
    horizon: f64,
    dt: f64,
    spec: &LagrangianSpec,
    sys: &FieldSystem,
) -> Result<TrajectorySample> {
    chi.grid.check_point(x0)?;
    let steps = (horizon / dt).round() as usize;
    let mut traj = TrajectorySample {
        times: vec![0.0],
        states: vec![x0.iter().map(|&v| wrap_unit(v)).collect()],
        controls: Vec::with_capacity(steps),
        running_cost: vec![0.0],
        calibration_defect: 0.0,
        step_constant: 0.0,
    };
    for k in 0..steps {
        let x = traj.states[k].clone();
        let u = feedback_control(chi, spec, sys, &x)?;
        let fu = sys.eval(&x)?.apply(&u);
        let next: Vec<f64> = x.iter().zip(&fu).map(|(a, b)| wrap_unit(a + dt * b)).collect();
        let cost = traj.running_cost[k] + dt * spec.eval(&x, &u)?;
        traj.step_constant = traj.step_constant.max(euler_defect(&x, &next, &fu, dt) / (dt * dt));
        traj.controls.push(u);
        traj.states.push(next);
        traj.times.push((k + 1) as f64 * dt);
        traj.running_cost.push(cost);
    }
    let end = traj.states.last().unwrap();
    let total_time = steps as f64 * dt;
    traj.calibration_defect = (chi.interpolate(end) - chi.interpolate(&traj.states[0])
        - traj.running_cost.last().unwrap()
        + c * total_time)
        .abs();
    Ok(traj)
}

pub(crate) fn euler_defect(x: &[f64], next: &[f64], fu: &[f64], dt: f64) -> f64 {
    x.iter()
        .zip(next)
        .zip(fu)
        .map(|((a, b), v)| wrap_centered(b - a - dt * v).powi(2))
        .sum::<f64>()
        .sqrt()
}
