//! Occupation measures, closedness residuals and the closed-measure LP.

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::aubry::horizontal_gradient;
use crate::controls::ControlGrid;
use crate::error::{Error, Result};
use crate::fourier::FourierBasis;
use crate::frame::FieldSystem;
use crate::grid::{wrap_unit, ScalarField, TorusGrid, MAX_DIM};
use crate::lagrangian::LagrangianSpec;
use crate::lax_oleinik::{forward_value_history, SemiLagrangian};
use crate::simplex::{solve, LpProblem, SimplexOptions};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Atom {
    pub x: Vec<f64>,
    pub u: Vec<f64>,
    pub w: f64,
}

/// Finitely supported probability measure on state x control.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiscreteMeasure {
    pub atoms: Vec<Atom>,
    /// Exponent of the moment `sum w |u|^sigma`.
    pub sigma: f64,
}

impl DiscreteMeasure {
    /// Checks `w >= 0`, `sum w = 1` within 1e-12 and consistent dimensions.
    pub fn new(atoms: Vec<Atom>, sigma: f64) -> Result<Self> {
        let first = atoms.first().ok_or_else(|| Error::InvalidArgument("measure without atoms".into()))?;
        let (d, m) = (first.x.len(), first.u.len());
        for a in &atoms {
            if a.x.len() != d {
                return Err(Error::DimensionMismatch { expected: d, got: a.x.len() });
            }
            if a.u.len() != m {
                return Err(Error::DimensionMismatch { expected: m, got: a.u.len() });
            }
            if !(a.w >= 0.0) {
                return Err(Error::InvalidArgument(format!("negative weight {}", a.w)));
            }
        }
        let total: f64 = atoms.iter().map(|a| a.w).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("weights sum to {total}, not 1")));
        }
        Ok(Self { atoms, sigma })
    }

    /// Single atom `delta_x (x) delta_u`.
    pub fn dirac(x: &[f64], u: &[f64]) -> Self {
        Self {
            atoms: vec![Atom {
                x: x.to_vec(),
                u: u.to_vec(),
                w: 1.0,
            }],
            sigma: 2.0,
        }
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn sigma_moment(&self) -> f64 {
        self.atoms
            .iter()
            .map(|a| a.w * a.u.iter().map(|v| v * v).sum::<f64>().sqrt().powf(self.sigma))
            .sum()
    }

    /// `sum w L(x, u)`.
    pub fn integrate_lagrangian(&self, spec: &LagrangianSpec) -> Result<f64> {
        let mut total = 0.0;
        for a in &self.atoms {
            total += a.w * spec.eval(&a.x, &a.u)?;
        }
        Ok(total)
    }

    /// Mass within `cells` grid cells (sup norm) of `x` with `|u| <= u_tol`.
    pub fn mass_near(&self, grid: TorusGrid, x: &[f64], cells: usize, u_tol: f64) -> f64 {
        let center = grid.nearest_node(x);
        self.atoms
            .iter()
            .filter(|a| {
                grid.cell_distance(grid.nearest_node(&a.x), center) <= cells
                    && a.u.iter().map(|v| v * v).sum::<f64>().sqrt() <= u_tol
            })
            .map(|a| a.w)
            .sum()
    }

    /// `x1..xd,u1..um,w` lines after `header`.
    pub fn to_csv(&self, header: &str) -> String {
        let mut out = String::from(header);
        if let Some(a) = self.atoms.first() {
            let mut cols: Vec<String> = (1..=a.x.len()).map(|i| format!("x{i}")).collect();
            cols.extend((1..=a.u.len()).map(|i| format!("u{i}")));
            cols.push("w".into());
            out.push_str(&cols.join(","));
            out.push('\n');
        }
        for a in &self.atoms {
            let fields: Vec<String> = a.x.iter().chain(&a.u).chain(std::iter::once(&a.w)).map(|v| v.to_string()).collect();
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }
}

/// Uniform-in-time occupation measure of the discrete optimal trajectory
/// for `V^T` started at `x0`.
///
/// Without `chi` the controls are the departure argmins against the stored
/// value history (`V^{T - (k+1) dt}` at step `k`); with `chi` they are the
/// departure argmins against `chi` at every step.
pub fn occupation_measure(sl: &SemiLagrangian, x0: &[f64], horizon: f64, chi: Option<&ScalarField>) -> Result<DiscreteMeasure> {
    sl.grid.check_point(x0)?;
    let steps = (horizon / sl.dt).round() as usize;
    if steps == 0 || ((steps as f64) * sl.dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} is not a positive multiple of {}",
            sl.dt
        )));
    }
    let history = if chi.is_none() {
        forward_value_history(sl, horizon)?
    } else {
        Vec::new()
    };
    let d = sl.grid.dim();
    let w = 1.0 / steps as f64;
    let mut x: Vec<f64> = x0.iter().map(|&v| wrap_unit(v)).collect();
    let mut fu = [0.0; MAX_DIM];
    let mut atoms = Vec::with_capacity(steps);
    for k in 0..steps {
        let target = match chi {
            Some(c) => c,
            None => &history[steps - k - 1],
        };
        let (j, _) = sl.departure_control_at(target, &x)?;
        let u = sl.ctrl.point(j).to_vec();
        sl.sys.apply_into(&x, &u, &mut fu);
        let next: Vec<f64> = (0..d).map(|i| wrap_unit(x[i] + sl.dt * fu[i])).collect();
        atoms.push(Atom { x, u, w });
        x = next;
    }
    // Uniform weights; fix the rounding of the last one so the sum is 1.
    let partial: f64 = atoms[..steps - 1].iter().map(|a| a.w).sum();
    atoms[steps - 1].w = 1.0 - partial;
    DiscreteMeasure::new(atoms, 2.0)
}

/// `sum w <F(x)^T D phi_j(x), u>` for every basis function.
pub fn closedness_vector(mu: &DiscreteMeasure, sys: &FieldSystem, basis: &FourierBasis) -> Vec<f64> {
    (0..basis.len())
        .into_par_iter()
        .map(|j| {
            let d = basis.dim();
            let mut grad = [0.0; MAX_DIM];
            let mut fu = [0.0; MAX_DIM];
            mu.atoms
                .iter()
                .map(|a| {
                    basis.gradient_into(j, &a.x, &mut grad);
                    sys.apply_into(&a.x, &a.u, &mut fu);
                    a.w * (0..d).map(|k| grad[k] * fu[k]).sum::<f64>()
                })
                .sum()
        })
        .collect()
}

/// Max over the Fourier basis of `|sum w <F(x)^T D phi(x), u>|`.
pub fn closedness_residual(mu: &DiscreteMeasure, sys: &FieldSystem, basis: &FourierBasis) -> f64 {
    closedness_vector(mu, sys, basis).iter().fold(0.0, |a, v| a.max(v.abs()))
}

/// `q(z) = sum_i (1 - cos 2 pi z_i) / (2 pi)`, so `|D q|_inf <= 1`.
fn quadratic_cosine(x: &[f64], c: &[f64]) -> f64 {
    let tau = 2.0 * std::f64::consts::PI;
    x.iter().zip(c).map(|(a, b)| (1.0 - (tau * (a - b)).cos()) / tau).sum()
}

/// Minimum of quadratic cosines centered at a few points: semiconcave,
/// smooth away from the ties between centers.
#[derive(Clone, Debug, PartialEq)]
pub struct SemiconcaveField {
    pub name: String,
    pub centers: Vec<Vec<f64>>,
}

impl SemiconcaveField {
    pub fn value(&self, x: &[f64]) -> f64 {
        self.centers.iter().map(|c| quadratic_cosine(x, c)).fold(f64::INFINITY, f64::min)
    }

    /// Gradient of the active center (lowest index on ties).
    pub fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let tau = 2.0 * std::f64::consts::PI;
        let mut best = (f64::INFINITY, 0);
        for (i, c) in self.centers.iter().enumerate() {
            let v = quadratic_cosine(x, c);
            if v < best.0 {
                best = (v, i);
            }
        }
        let c = &self.centers[best.1];
        x.iter().zip(c).map(|(a, b)| (tau * (a - b)).sin()).collect()
    }
}

/// The eight built-in test fields in dimension `d`.
pub fn semiconcave_family(d: usize) -> Vec<SemiconcaveField> {
    let all = |v: f64| vec![v; d];
    let first = |v: f64| {
        let mut p = vec![0.0; d];
        p[0] = v;
        p
    };
    let alternating = |a: f64, b: f64| (0..d).map(|i| if i % 2 == 0 { a } else { b }).collect::<Vec<f64>>();
    let second = |v: f64| {
        let mut p = vec![0.0; d];
        p[d.min(2) - 1] = v;
        p
    };
    let sets: Vec<Vec<Vec<f64>>> = vec![
        vec![all(0.0)],
        vec![all(0.5)],
        vec![all(0.0), all(0.5)],
        vec![alternating(0.25, 0.75)],
        vec![all(0.0), first(0.5)],
        vec![second(0.5), alternating(0.5, 0.25)],
        vec![all(0.25), all(0.75)],
        vec![all(0.0), all(1.0 / 3.0), all(2.0 / 3.0)],
    ];
    sets.into_iter()
        .enumerate()
        .map(|(i, centers)| SemiconcaveField {
            name: format!("f{i}"),
            centers,
        })
        .collect()
}

#[derive(Clone, Debug)]
pub struct StrongResidual {
    pub value: f64,
    pub per_field: Vec<f64>,
    /// `(field index, atom index)` whose one-sided quotient never settled.
    pub flagged: Vec<(usize, usize)>,
}

/// One-sided derivative of `f` at `x` along `v` by extrapolated forward
/// quotients `2 D(delta/2) - D(delta)`, halving `delta` from 1e-2 until two
/// consecutive extrapolations agree within `tol`.
pub fn one_sided_derivative(f: impl Fn(&[f64]) -> f64, x: &[f64], v: &[f64], tol: f64) -> (f64, bool) {
    let f0 = f(x);
    let mut probe = x.to_vec();
    let mut quotient = |delta: f64| {
        for k in 0..x.len() {
            probe[k] = x[k] + delta * v[k];
        }
        (f(&probe) - f0) / delta
    };
    let mut delta = 1e-2;
    let mut d_prev = quotient(delta);
    let mut r_prev = f64::NAN;
    for _ in 0..30 {
        let d_half = quotient(delta / 2.0);
        let r = 2.0 * d_half - d_prev;
        if (r - r_prev).abs() <= tol {
            return (r, true);
        }
        r_prev = r;
        d_prev = d_half;
        delta /= 2.0;
    }
    (r_prev, false)
}

/// Max over `family` of `|sum w d_F phi(x, u)|` with one-sided horizontal
/// derivatives.
pub fn strong_closedness_residual(mu: &DiscreteMeasure, sys: &FieldSystem, family: &[SemiconcaveField]) -> StrongResidual {
    let d = sys.state_dim();
    let results: Vec<(f64, Vec<usize>)> = family
        .par_iter()
        .map(|field| {
            let mut flagged = Vec::new();
            let mut fu = [0.0; MAX_DIM];
            let mut total = 0.0;
            for (i, a) in mu.atoms.iter().enumerate() {
                sys.apply_into(&a.x, &a.u, &mut fu);
                if fu[..d].iter().all(|&v| v == 0.0) {
                    continue;
                }
                let (g, stable) = one_sided_derivative(|y| field.value(y), &a.x, &fu[..d], 1e-7);
                if !stable {
                    flagged.push(i);
                }
                total += a.w * g;
            }
            (total, flagged)
        })
        .collect();
    let per_field: Vec<f64> = results.iter().map(|r| r.0).collect();
    let flagged: Vec<(usize, usize)> = results
        .iter()
        .enumerate()
        .flat_map(|(f, r)| r.1.iter().map(move |&i| (f, i)))
        .collect();
    if !flagged.is_empty() {
        warn!("{} atom/field pairs with an unstable one-sided derivative", flagged.len());
    }
    StrongResidual {
        value: per_field.iter().fold(0.0, |a, v| a.max(v.abs())),
        per_field,
        flagged,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct MatherLp {
    pub measure: DiscreteMeasure,
    pub value: f64,
    /// Multiplier of the normalization row: a lower bound for the LP value.
    pub lambda: f64,
    /// Multipliers of the closedness rows, one per basis function.
    pub coeffs: Vec<f64>,
    pub dual_value: f64,
    /// `max_r |(A w - b)_r|` recomputed from the assembled columns.
    pub primal_residual: f64,
    pub dual_infeasibility: f64,
    pub complementarity: f64,
    pub duality_gap: f64,
    pub iterations: usize,
    pub bland_pivots: usize,
    pub k_modes: usize,
    pub n_lp: usize,
    pub n_u_lp: usize,
}

/// `min sum w L(x, u)` over weights on (coarse node, control) pairs that
/// are closed against the Fourier basis and sum to one.
///
/// Variables are ordered node-major. Phase one is skipped by seeding the
/// basis with the (first node, zero control) column on the normalization
/// row, which is feasible because `u = 0` zeroes every closedness row.
pub fn solve_mather_lp(
    spec: &LagrangianSpec,
    sys: &FieldSystem,
    lp_grid: TorusGrid,
    ctrl: &ControlGrid,
    basis: &FourierBasis,
    opts: &SimplexOptions,
) -> Result<MatherLp> {
    let d = lp_grid.dim();
    if basis.dim() != d || sys.state_dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            got: basis.dim(),
        });
    }
    let b_len = basis.len();
    let rows = b_len + 1;
    let n_ctrl = ctrl.len();
    let per_node: Vec<Vec<(Vec<f64>, f64)>> = (0..lp_grid.len())
        .into_par_iter()
        .map(|i| {
            let x = lp_grid.node_coords(i);
            let grads: Vec<Vec<f64>> = (0..b_len).map(|j| basis.gradient(j, &x)).collect();
            let mut fu = [0.0; MAX_DIM];
            ctrl.iter()
                .map(|u| {
                    sys.apply_into(&x, u, &mut fu);
                    let mut col: Vec<f64> = grads.iter().map(|g| (0..d).map(|k| g[k] * fu[k]).sum()).collect();
                    col.push(1.0);
                    (col, spec.eval(&x, u).unwrap_or(f64::NAN))
                })
                .collect()
        })
        .collect();
    let mut columns = Vec::with_capacity(lp_grid.len() * n_ctrl);
    let mut cost = Vec::with_capacity(lp_grid.len() * n_ctrl);
    for node in per_node {
        for (col, c) in node {
            if !c.is_finite() {
                return Err(Error::InvalidArgument("Lagrangian undefined on the LP control grid".into()));
            }
            columns.push(col);
            cost.push(c);
        }
    }
    let mut rhs = vec![0.0; rows];
    rhs[b_len] = 1.0;
    let problem = LpProblem::new(rows, columns, cost, rhs)?;
    let seed = ctrl.zero_index();
    let sol = solve(&problem, Some((seed, b_len)), opts)?;
    let primal_residual = problem.residual(&sol.x);
    let mut atoms = Vec::new();
    for (k, &w) in sol.x.iter().enumerate() {
        if w > 0.0 {
            let (i, j) = (k / n_ctrl, k % n_ctrl);
            atoms.push(Atom {
                x: lp_grid.node_coords(i),
                u: ctrl.point(j).to_vec(),
                w,
            });
        }
    }
    let total: f64 = atoms.iter().map(|a| a.w).sum();
    for a in atoms.iter_mut() {
        a.w /= total;
    }
    let sigma = spec.coercivity.sigma;
    let measure = DiscreteMeasure::new(atoms, sigma).map_err(|e| Error::Lp(format!("optimal weights: {e}")))?;
    Ok(MatherLp {
        measure,
        value: sol.value,
        lambda: sol.duals[b_len],
        coeffs: sol.duals[..b_len].to_vec(),
        dual_value: sol.dual_value,
        primal_residual,
        dual_infeasibility: sol.dual_infeasibility,
        complementarity: sol.complementarity,
        duality_gap: (sol.value - sol.dual_value).abs(),
        iterations: sol.iterations,
        bland_pivots: sol.bland_pivots,
        k_modes: basis.k_max(),
        n_lp: lp_grid.nodes_per_axis(),
        n_u_lp: ctrl.nodes_per_axis(),
    })
}

/// Weak-duality bound for a measure on the LP product grid:
/// `int L dmu >= lambda + sum_j y_j r_j(mu) - dual_infeasibility`, where
/// `r_j` are the closedness integrals of `mu`. Returns the right side.
pub fn weak_duality_bound(lp: &MatherLp, mu: &DiscreteMeasure, sys: &FieldSystem, basis: &FourierBasis) -> f64 {
    let r = closedness_vector(mu, sys, basis);
    lp.lambda + lp.coeffs.iter().zip(&r).map(|(y, v)| y * v).sum::<f64>() - lp.dual_infeasibility
}

/// Moves every atom to the nearest node of `grid` and the nearest point
/// of `ctrl`, merging duplicates.
pub fn snap_measure(mu: &DiscreteMeasure, grid: TorusGrid, ctrl: &ControlGrid) -> DiscreteMeasure {
    let mut weights: std::collections::BTreeMap<(usize, usize), f64> = std::collections::BTreeMap::new();
    for a in &mu.atoms {
        *weights.entry((grid.nearest_node(&a.x), ctrl.nearest(&a.u))).or_insert(0.0) += a.w;
    }
    DiscreteMeasure {
        atoms: weights
            .into_iter()
            .map(|((i, j), w)| Atom {
                x: grid.node_coords(i),
                u: ctrl.point(j).to_vec(),
                w,
            })
            .collect(),
        sigma: mu.sigma,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatherSet {
    /// Grid nodes under the heavy atoms.
    pub projected: Vec<usize>,
    /// `(node, control)` of the heavy atoms.
    pub full: Vec<(usize, Vec<f64>)>,
    pub w_min: f64,
    pub auto_lowered: bool,
}

/// Atoms with weight at least `w_min`, their states snapped to `grid`.
pub fn mather_set(mu: &DiscreteMeasure, w_min: f64, grid: TorusGrid) -> MatherSet {
    let max_w = mu.atoms.iter().map(|a| a.w).fold(0.0, f64::max);
    let (w_min, auto_lowered) = if max_w >= w_min {
        (w_min, false)
    } else {
        warn!("no atom reaches weight {w_min:e}; lowering the threshold to {max_w:e}");
        (max_w, true)
    };
    let mut full: Vec<(usize, Vec<f64>)> = mu
        .atoms
        .iter()
        .filter(|a| a.w >= w_min)
        .map(|a| (grid.nearest_node(&a.x), a.u.clone()))
        .collect();
    full.sort_by(|a, b| a.partial_cmp(b).expect("finite controls"));
    full.dedup();
    let mut projected: Vec<usize> = full.iter().map(|f| f.0).collect();
    projected.dedup();
    MatherSet {
        projected,
        full,
        w_min,
        auto_lowered,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InclusionReport {
    pub ok: bool,
    /// Largest cell distance from a node of `M` to the set `A`.
    pub max_dist: usize,
}

/// `M` is within one cell of `A` (sup-norm cell distance on the torus).
pub fn inclusion_check(m: &[usize], a: &[usize], grid: TorusGrid) -> InclusionReport {
    let max_dist = m
        .iter()
        .map(|&x| a.iter().map(|&y| grid.cell_distance(x, y)).min().unwrap_or(usize::MAX))
        .max()
        .unwrap_or(0);
    InclusionReport {
        ok: max_dist <= 1,
        max_dist,
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GraphReport {
    pub max_residual: f64,
    /// Atom index attaining the max.
    pub worst_atom: Option<usize>,
    pub atoms_checked: usize,
}

/// Max over atoms with `w >= w_min` of `|u - D_q L*(x, D_F chi(x))|`, the
/// horizontal gradient taken by differences of step `h`.
pub fn graph_check(mu: &DiscreteMeasure, chi: &ScalarField, sys: &FieldSystem, spec: &LagrangianSpec, w_min: f64) -> Result<GraphReport> {
    let h = chi.grid.spacing();
    let mut report = GraphReport {
        max_residual: 0.0,
        worst_atom: None,
        atoms_checked: 0,
    };
    for (i, a) in mu.atoms.iter().enumerate() {
        if a.w < w_min {
            continue;
        }
        let q = horizontal_gradient(chi, sys, &a.x, h)?.q;
        let u_star = spec.legendre_gradient(&a.x, &q)?;
        let r = a.u.iter().zip(&u_star).map(|(p, s)| (p - s).powi(2)).sum::<f64>().sqrt();
        report.atoms_checked += 1;
        if report.worst_atom.is_none() || r > report.max_residual {
            report.max_residual = r;
            report.worst_atom = Some(i);
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::lagrangian::{Drift, Potential};

    #[test]
    fn measure_validation() {
        assert!(DiscreteMeasure::new(vec![], 2.0).is_err());
        let atom = |w: f64| Atom {
            x: vec![0.0, 0.0],
            u: vec![1.0, 0.0],
            w,
        };
        assert!(DiscreteMeasure::new(vec![atom(0.5), atom(0.5)], 2.0).is_ok());
        assert!(DiscreteMeasure::new(vec![atom(0.5), atom(0.4)], 2.0).is_err());
        assert!(DiscreteMeasure::new(vec![atom(1.5), atom(-0.5)], 2.0).is_err());
        let mu = DiscreteMeasure::new(vec![atom(0.5), atom(0.5)], 2.0).unwrap();
        assert_eq!(mu.sigma_moment(), 1.0);
        let csv = mu.to_csv("# t\n");
        assert!(csv.starts_with("# t\nx1,x2,u1,u2,w\n0,0,1,0,0.5\n"));
    }

    #[test]
    fn rest_atom_is_closed() {
        let basis = FourierBasis::new(2, 3).unwrap();
        let sys = FieldSystem::grushin_periodic();
        let mu = DiscreteMeasure::dirac(&[0.3, 0.7], &[0.0, 0.0]);
        assert_eq!(closedness_residual(&mu, &sys, &basis), 0.0);
        assert_eq!(strong_closedness_residual(&mu, &sys, &semiconcave_family(2)).value, 0.0);
        let moving = DiscreteMeasure::dirac(&[0.3, 0.7], &[1.0, 0.0]);
        assert!(closedness_residual(&moving, &sys, &basis) > 0.1);
    }

    #[test]
    fn closed_loop_has_small_residual() {
        // uniform measure on the horizontal circle through (x, 0.3) at unit speed
        let n = 200;
        let atoms: Vec<Atom> = (0..n)
            .map(|k| Atom {
                x: vec![k as f64 / n as f64, 0.3],
                u: vec![1.0, 0.0],
                w: 1.0 / n as f64,
            })
            .collect();
        let mut mu = DiscreteMeasure { atoms, sigma: 2.0 };
        let partial: f64 = mu.atoms[..n - 1].iter().map(|a| a.w).sum();
        mu.atoms[n - 1].w = 1.0 - partial;
        let basis = FourierBasis::new(2, 3).unwrap();
        let r = closedness_residual(&mu, &FieldSystem::grushin_periodic(), &basis);
        assert!(r < 1e-10, "{r}");
    }

    #[test]
    fn one_sided_matches_gradient_for_smooth_field() {
        let fam = semiconcave_family(2);
        assert_eq!(fam.len(), 8);
        let f = &fam[0];
        let x = [0.13, 0.41];
        let v = [0.7, -0.2];
        let (g, ok) = one_sided_derivative(|y| f.value(y), &x, &v, 1e-7);
        let grad = f.gradient(&x);
        assert!(ok);
        assert!((g - (grad[0] * v[0] + grad[1] * v[1])).abs() < 1e-6);
        // at the kink of f2 between 0 and 1/2 the two sides differ
        let kink = [0.25, 0.25];
        let (right, _) = one_sided_derivative(|y| fam[2].value(y), &kink, &[1.0, 1.0], 1e-7);
        let (left, _) = one_sided_derivative(|y| fam[2].value(y), &kink, &[-1.0, -1.0], 1e-7);
        assert!(right < 0.0 && left < 0.0, "{right} {left}");
    }

    #[test]
    fn lp_zero_lagrangian() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, Potential::Zero).unwrap();
        let sys = FieldSystem::grushin_periodic();
        let ctrl = ControlGrid::new(2, 1.0, 5).unwrap();
        let basis = FourierBasis::new(2, 2).unwrap();
        let lp = solve_mather_lp(&spec, &sys, grid, &ctrl, &basis, &SimplexOptions::default()).unwrap();
        assert_eq!(lp.value, 0.0);
        assert!(lp.measure.atoms.iter().all(|a| a.u == vec![0.0, 0.0]));
        assert!(lp.duality_gap <= 1e-9);
        let m = mather_set(&lp.measure, 1e-6, grid);
        assert!(!m.projected.is_empty());
    }

    #[test]
    fn lp_concentrates_at_potential_minimum() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, Potential::Sin2).unwrap();
        let sys = FieldSystem::grushin_periodic();
        let ctrl = ControlGrid::new(2, 2.0, 5).unwrap();
        let basis = FourierBasis::new(2, 2).unwrap();
        let lp = solve_mather_lp(&spec, &sys, grid, &ctrl, &basis, &SimplexOptions::default()).unwrap();
        assert!(lp.value.abs() < 1e-9);
        let m = mather_set(&lp.measure, 1e-6, grid);
        assert_eq!(m.projected, vec![0]);
        assert!(lp.primal_residual < 1e-9);
        assert!(lp.measure.sigma_moment() <= spec.kappa0().unwrap());
    }

    #[test]
    fn mather_threshold_lowers() {
        let grid = TorusGrid::new(2, 8).unwrap();
        let mu = DiscreteMeasure::dirac(&[0.5, 0.5], &[0.0, 0.0]);
        let m = mather_set(&mu, 2.0, grid);
        assert!(m.auto_lowered);
        assert_eq!(m.projected, vec![grid.index_of(&[4, 4])]);
    }

    #[test]
    fn inclusion_and_translation() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let a = vec![grid.index_of(&[3, 3]), grid.index_of(&[3, 4])];
        assert_eq!(inclusion_check(&a, &a, grid), InclusionReport { ok: true, max_dist: 0 });
        let moved: Vec<usize> = a.iter().map(|&i| grid.translate(i, &[5, 0])).collect();
        assert_eq!(inclusion_check(&moved, &a, grid), InclusionReport { ok: false, max_dist: 5 });
    }

    #[test]
    fn graph_check_zero_and_injected() {
        let grid = TorusGrid::new(2, 16).unwrap();
        let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, Potential::Zero).unwrap();
        let sys = FieldSystem::grushin_periodic();
        let chi = ScalarField::constant(grid, 0.0);
        let mu = DiscreteMeasure::dirac(&[0.25, 0.5], &[0.0, 0.0]);
        assert_eq!(graph_check(&mu, &chi, &sys, &spec, 1e-6).unwrap().max_residual, 0.0);
        let bad = DiscreteMeasure::dirac(&[0.25, 0.5], &[0.3, 0.4]);
        assert!(graph_check(&bad, &chi, &sys, &spec, 1e-6).unwrap().max_residual >= 0.5 - 1e-12);
    }
}
