//! Peierls barrier, projected Aubry set and the checks built on them.

use log::warn;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::controls::ControlGrid;
use crate::error::{Error, Result};
use crate::frame::FieldSystem;
use crate::grid::{wrap_unit, MaskRule, ScalarField, TorusGrid, MAX_DIM};
use crate::lagrangian::LagrangianSpec;
use crate::lax_oleinik::SemiLagrangian;
use crate::minplus::{min_plus_product, PairMatrix};

/// Largest node set on which the all-pairs barrier is assembled.
pub const MAX_BARRIER_NODES: usize = 1024;

#[derive(Clone, Debug)]
pub struct BarrierOptions {
    /// Semi-Lagrangian steps for the base horizon `t0 = base_steps * dt`.
    pub base_steps: usize,
    pub t_min: f64,
    pub t_max: f64,
    /// Last-octave change above which a pair is flagged as not stabilized.
    pub stabilization_tol: f64,
    /// Sup-norm drift per unit time at which an anchor row or column is
    /// considered relaxed.
    pub relax_tol: f64,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        Self {
            base_steps: 4,
            t_min: 2.56,
            t_max: 20.48,
            stabilization_tol: 1e-3,
            relax_tol: 1e-5,
        }
    }
}

/// Every node when the grid is small enough, otherwise every `s`-th node per
/// axis with the smallest stride `s` keeping at most `max_nodes`
/// (default [`MAX_BARRIER_NODES`]).
pub fn barrier_nodes(grid: TorusGrid, max_nodes: Option<usize>) -> Vec<usize> {
    let cap = max_nodes.unwrap_or(MAX_BARRIER_NODES).max(1);
    let n = grid.nodes_per_axis();
    let d = grid.dim();
    let mut stride = 1;
    while n.div_ceil(stride).pow(d as u32) > cap {
        stride += 1;
    }
    (0..grid.len())
        .filter(|&i| grid.multi_index(i)[..d].iter().all(|k| k % stride == 0))
        .collect()
}

#[derive(Clone, Debug)]
pub struct BarrierMatrix {
    pub grid: TorusGrid,
    /// Grid indices of the node set; sources and targets coincide.
    pub nodes: Vec<usize>,
    /// `values[i * len + j] = h(nodes[i], nodes[j])`.
    pub values: Vec<f64>,
    pub c_used: f64,
    pub t_window: (f64, f64),
    /// Dyadic horizons entering the min, with `A_t` on the node set.
    pub actions: Vec<(f64, PairMatrix)>,
    /// Largest drop of a pair's running min over the last octave.
    pub stabilization_slack: f64,
    pub unstable_pairs: usize,
    /// Nodes whose rows and columns were relaxed under the semigroup.
    pub anchors: Vec<usize>,
    /// Min-plus estimate before the anchor factorization.
    pub doubling_values: Vec<f64>,
    /// Largest drift per unit time left in an anchor row or column.
    pub relax_residual: f64,
    /// `|min_x h(x, x)| + stabilization_slack + relax_residual`.
    pub eps_num: f64,
}

impl BarrierMatrix {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.nodes.len() + j]
    }

    pub fn diagonal(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.get(i, i)).collect()
    }

    pub fn covers_grid(&self) -> bool {
        self.nodes.len() == self.grid.len()
    }

    /// Position of grid node `node` in the node set.
    pub fn position(&self, node: usize) -> Option<usize> {
        self.nodes.binary_search(&node).ok()
    }

    /// `y -> h(nodes[i], y)` as a grid field; needs the full node set.
    pub fn row_field(&self, i: usize) -> Result<ScalarField> {
        if !self.covers_grid() {
            return Err(Error::InvalidArgument(
                "barrier rows are grid fields only when every node is a source".into(),
            ));
        }
        let n = self.len();
        let mut f = ScalarField::new(self.grid, self.values[i * n..(i + 1) * n].to_vec())?;
        f.meta.provenance = format!("barrier row of node {}", self.nodes[i]);
        Ok(f)
    }

    /// `(source, target, value)` lines.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        out.push_str("source_index,target_index,value\n");
        let n = self.len();
        for i in 0..n {
            for j in 0..n {
                out.push_str(&format!("{},{},{}\n", self.nodes[i], self.nodes[j], self.values[i * n + j]));
            }
        }
        out
    }
}

/// Peierls barrier on `nodes`, in two passes.
///
/// 1. Min-plus doubling: `A_{t0}` from the semi-Lagrangian action started at
///    each node (masked corners renormalized so the front spreads), squared
///    up to `T_max`, and `h0 = min over dyadic t in [T_min, T_max] of
///    A_t - c t`.
/// 2. Anchors are the near-zeros of the diagonal of `h0`. For each anchor
///    `a` the row `h0(a, .)` is relaxed by arrival steps and the column
///    `h0(., a)` by departure steps until `T_t u - c t` stops moving. Then
///    `h(x, y) = min_a h(x, a) + h(a, y)`.
///
/// Node-to-node composition of short semi-Lagrangian actions misprices
/// moves shorter than a cell, and the error compounds over squarings. The
/// second pass keeps the result consistent with the semigroup itself.
pub fn peierls_barrier(sl: &SemiLagrangian, c: f64, nodes: &[usize], opts: &BarrierOptions) -> Result<BarrierMatrix> {
    if opts.base_steps == 0 {
        return Err(Error::InvalidArgument("barrier base needs at least one step".into()));
    }
    let t0 = opts.base_steps as f64 * sl.dt;
    if !(opts.t_min > 0.0 && opts.t_max >= 2.0 * opts.t_min) {
        return Err(Error::InvalidArgument(format!(
            "barrier window [{}, {}] must have T_max >= 2 T_min > 0",
            opts.t_min, opts.t_max
        )));
    }
    if !(opts.relax_tol > 0.0) {
        return Err(Error::InvalidArgument(format!("relaxation tolerance {} must be > 0", opts.relax_tol)));
    }
    let mut nodes = nodes.to_vec();
    nodes.sort_unstable();
    nodes.dedup();
    let n = nodes.len();
    let base: Vec<ScalarField> = nodes
        .par_iter()
        .map(|&src| {
            let mut phi = ScalarField::constant(sl.grid, f64::INFINITY).with_meta(0.0, 0.0, "action");
            phi.values[src] = 0.0;
            for _ in 0..opts.base_steps {
                phi = sl.backward_step_masked(&phi, MaskRule::Renormalize);
            }
            phi
        })
        .collect();
    let rows: Vec<Vec<f64>> = base.iter().map(|f| nodes.iter().map(|&j| f.values[j]).collect()).collect();
    let mut a = PairMatrix::from_rows(rows)?;
    let mut t = t0;
    let mut actions = Vec::new();
    let mut best = vec![f64::INFINITY; n * n];
    let mut previous = best.clone();
    let tol = 1e-9 * opts.t_max;
    loop {
        if t >= opts.t_min - tol && t <= opts.t_max + tol {
            previous.copy_from_slice(&best);
            for (b, v) in best.iter_mut().zip(&a.values) {
                *b = b.min(v - c * t);
            }
            actions.push((t, a.clone()));
        }
        if 2.0 * t > opts.t_max + tol {
            break;
        }
        a = a.square();
        t *= 2.0;
    }
    if actions.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "no two dyadic multiples of {t0} fall in [{}, {}]",
            opts.t_min, opts.t_max
        )));
    }
    let mut slack: f64 = 0.0;
    let mut unstable = 0;
    for (p, b) in previous.iter().zip(&best) {
        let drop = if p.is_finite() { p - b } else { f64::INFINITY };
        if drop > opts.stabilization_tol {
            unstable += 1;
        }
        if drop.is_finite() {
            slack = slack.max(drop);
        }
    }
    if unstable > 0 {
        warn!("{unstable} barrier pairs changed by more than {} over the last octave", opts.stabilization_tol);
    }
    let min_diag = (0..n).map(|i| best[i * n + i]).fold(f64::INFINITY, f64::min);
    let floor = rounding_floor(&best);
    let mut h = BarrierMatrix {
        grid: sl.grid,
        nodes,
        values: best,
        c_used: c,
        t_window: (actions[0].0, actions.last().unwrap().0),
        actions,
        stabilization_slack: slack,
        unstable_pairs: unstable,
        anchors: Vec::new(),
        doubling_values: Vec::new(),
        relax_residual: 0.0,
        eps_num: min_diag.abs() + slack + floor,
    };
    let anchors = aubry_set(&h, None).nodes;
    let max_steps = (opts.t_max / sl.dt).ceil() as usize;
    let covers = h.covers_grid();
    let relaxed: Vec<(Vec<f64>, Vec<f64>, f64)> = anchors
        .par_iter()
        .map(|&a| {
            let pa = h.position(a).expect("anchor is a barrier node");
            // Start from the doubling estimate where it is a grid field,
            // otherwise from the base action of the anchor.
            let (row0, col0) = if covers {
                (
                    ScalarField::new(sl.grid, h.values[pa * n..(pa + 1) * n].to_vec()).expect("grid sizes agree"),
                    ScalarField::new(sl.grid, (0..n).map(|i| h.values[i * n + pa]).collect()).expect("grid sizes agree"),
                )
            } else {
                (base[pa].clone(), base[pa].clone())
            };
            let (row, r_row) = relax(sl, row0, c, opts.relax_tol, max_steps, true);
            let (col, r_col) = relax(sl, col0, c, opts.relax_tol, max_steps, false);
            let pick = |f: &ScalarField| h.nodes.iter().map(|&j| f.values[j]).collect::<Vec<f64>>();
            (pick(&row), pick(&col), r_row.max(r_col))
        })
        .collect();
    let k = relaxed.len();
    let residual = relaxed.iter().map(|r| r.2).fold(0.0, f64::max);
    // h(x, y) = min_a h(x, a) + h(a, y): a min-plus product of the relaxed
    // columns (n x k) with the relaxed rows (k x n).
    let mut cols = vec![0.0; n * k];
    for (a, r) in relaxed.iter().enumerate() {
        for x in 0..n {
            cols[x * k + a] = r.1[x];
        }
    }
    let rows: Vec<f64> = relaxed.iter().flat_map(|r| r.0.iter().copied()).collect();
    let values = min_plus_product(&cols, &rows, n, k, n);
    h.doubling_values = std::mem::replace(&mut h.values, values);
    h.anchors = anchors;
    h.relax_residual = residual;
    let min_diag = h.diagonal().into_iter().fold(f64::INFINITY, f64::min);
    h.eps_num = min_diag.abs() + h.stabilization_slack + residual + rounding_floor(&h.values);
    Ok(h)
}

/// Room for rounding in sums of barrier values: `64 eps (1 + max |h|)`
/// over the finite entries.
fn rounding_floor(values: &[f64]) -> f64 {
    let scale = values.iter().filter(|v| v.is_finite()).fold(0.0f64, |m, v| m.max(v.abs()));
    64.0 * f64::EPSILON * (1.0 + scale)
}

/// Iterates `u <- T_dt u - c dt` (arrival) or its departure counterpart
/// until the sup-norm change per unit time drops below `tol`. Returns the
/// last iterate and that drift.
fn relax(sl: &SemiLagrangian, mut u: ScalarField, c: f64, tol: f64, max_steps: usize, arrival: bool) -> (ScalarField, f64) {
    let shift = c * sl.dt;
    let mut drift = f64::INFINITY;
    for _ in 0..max_steps {
        let mut next = if arrival { sl.backward_step(&u) } else { sl.forward_step(&u) };
        for v in next.values.iter_mut() {
            *v -= shift;
        }
        drift = next.sup_distance(&u) / sl.dt;
        u = next;
        if drift <= tol {
            break;
        }
    }
    (u, drift)
}

#[derive(Clone, Debug, PartialEq)]
pub struct AubrySet {
    /// Grid node indices.
    pub nodes: Vec<usize>,
    pub eps: f64,
    /// True when the requested threshold gave an empty set.
    pub auto_lowered: bool,
}

/// `{x : |h(x, x)| <= eps}`, with `eps = 3 eps_num` by default.
pub fn aubry_set(h: &BarrierMatrix, eps: Option<f64>) -> AubrySet {
    let eps = eps.unwrap_or(3.0 * h.eps_num);
    let diag = h.diagonal();
    let pick = |e: f64| -> Vec<usize> {
        diag.iter()
            .enumerate()
            .filter(|(_, v)| v.abs() <= e)
            .map(|(i, _)| h.nodes[i])
            .collect()
    };
    let nodes = pick(eps);
    if !nodes.is_empty() {
        return AubrySet {
            nodes,
            eps,
            auto_lowered: false,
        };
    }
    let needed = diag.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    warn!("Aubry set empty at eps = {eps:e}; using the smallest nonempty threshold {needed:e}");
    AubrySet {
        nodes: pick(needed),
        eps: needed,
        auto_lowered: true,
    }
}

#[derive(Clone, Debug)]
pub struct HorizontalGradient {
    /// Central differences along the columns of `F(x)`.
    pub q: Vec<f64>,
    pub forward: Vec<f64>,
    pub backward: Vec<f64>,
    /// `max_i |forward_i - backward_i|`.
    pub disagreement: f64,
}

pub fn horizontal_gradient(chi: &ScalarField, sys: &FieldSystem, x: &[f64], delta: f64) -> Result<HorizontalGradient> {
    let h = chi.grid.spacing();
    if !(delta > h / 4.0 && delta < 4.0 * h) {
        return Err(Error::InvalidArgument(format!("step {delta} outside (h/4, 4h) for h = {h}")));
    }
    let f = sys.eval(x)?;
    let d = f.d;
    let center = chi.interpolate(x);
    let mut probe = [0.0; MAX_DIM];
    let mut out = HorizontalGradient {
        q: Vec::with_capacity(f.m),
        forward: Vec::with_capacity(f.m),
        backward: Vec::with_capacity(f.m),
        disagreement: 0.0,
    };
    for i in 0..f.m {
        let col = f.column(i);
        for k in 0..d {
            probe[k] = x[k] + delta * col[k];
        }
        let up = chi.interpolate(&probe[..d]);
        for k in 0..d {
            probe[k] = x[k] - delta * col[k];
        }
        let down = chi.interpolate(&probe[..d]);
        let fw = (up - center) / delta;
        let bw = (center - down) / delta;
        out.q.push((up - down) / (2.0 * delta));
        out.forward.push(fw);
        out.backward.push(bw);
        out.disagreement = out.disagreement.max((fw - bw).abs());
    }
    Ok(out)
}

#[derive(Clone, Debug)]
pub struct DominationReport {
    /// `max phi(gamma(b)) - phi(gamma(a)) - sum dt L + c (b - a)`.
    pub max_defect: f64,
    /// Duration of the worst sample.
    pub worst_duration: f64,
    pub samples: usize,
}

/// Random piecewise-constant lattice controls, durations in `[1, 5]`,
/// explicit Euler with step `dt`.
#[allow(clippy::too_many_arguments)]
pub fn check_domination(
    phi: &ScalarField,
    c: f64,
    spec: &LagrangianSpec,
    sys: &FieldSystem,
    ctrl: &ControlGrid,
    dt: f64,
    n_samples: usize,
    seed: u64,
) -> Result<DominationReport> {
    let d = phi.grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = DominationReport {
        max_defect: f64::NEG_INFINITY,
        worst_duration: 0.0,
        samples: n_samples,
    };
    let mut fu = [0.0; MAX_DIM];
    for _ in 0..n_samples {
        let mut x: Vec<f64> = (0..d).map(|_| rng.gen::<f64>()).collect();
        let steps = (rng.gen_range(1.0..=5.0) / dt).round().max(1.0) as usize;
        let start = phi.interpolate(&x);
        let mut cost = 0.0;
        let mut k = 0;
        while k < steps {
            let piece = ((rng.gen_range(0.1..=1.0) / dt).round().max(1.0) as usize).min(steps - k);
            let u = ctrl.point(rng.gen_range(0..ctrl.len()));
            for _ in 0..piece {
                cost += dt * spec.eval(&x, u)?;
                sys.apply_into(&x, u, &mut fu);
                for i in 0..d {
                    x[i] = wrap_unit(x[i] + dt * fu[i]);
                }
            }
            k += piece;
        }
        let duration = steps as f64 * dt;
        let defect = phi.interpolate(&x) - start - cost + c * duration;
        if defect > report.max_defect {
            report.max_defect = defect;
            report.worst_duration = duration;
        }
    }
    Ok(report)
}

/// `|| T_t h - c t - h ||_inf` with `T_t` applied by backward steps.
pub fn barrier_fixed_point_check(sl: &SemiLagrangian, h_row: &ScalarField, c: f64, t_check: f64) -> Result<f64> {
    let steps = (t_check / sl.dt).round() as usize;
    if steps == 0 || ((steps as f64) * sl.dt - t_check).abs() > 1e-9 * t_check {
        return Err(Error::InvalidArgument(format!(
            "check time {t_check} is not a positive multiple of {}",
            sl.dt
        )));
    }
    let mut phi = h_row.clone();
    for _ in 0..steps {
        phi = sl.backward_step(&phi);
    }
    let ct = c * steps as f64 * sl.dt;
    Ok(phi
        .values
        .iter()
        .zip(&h_row.values)
        .map(|(a, b)| (a - ct - b).abs())
        .fold(0.0, f64::max))
}

/// `max |phi(x) - phi(y)| / max(d_SR(x, y), h)` over the sampled sources
/// `x` (paired with their distance fields) and every node `y`.
pub fn lipschitz_check(phi: &ScalarField, distances: &[(usize, ScalarField)]) -> f64 {
    let h = phi.grid.spacing();
    let mut best: f64 = 0.0;
    for (src, dist) in distances {
        let a = phi.values[*src];
        for (j, &b) in phi.values.iter().enumerate() {
            if j == *src {
                continue;
            }
            best = best.max((a - b).abs() / dist.values[j].max(h));
        }
    }
    best
}
