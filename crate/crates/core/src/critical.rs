//! Estimators of the critical constant and the sandwich certificate.
//!
//! * long time: `V^T(0) / T`;
//! * ergodic: relative value iteration (see [`crate::lax_oleinik`]);
//! * lower: `-max_x H(x, D psi(x))` for a Fourier trigonometric `psi`;
//! * upper: the value of the closed-measure linear program.

use log::{debug, warn};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fourier::FourierBasis;
use crate::frame::FieldSystem;
use crate::grid::{ScalarField, TorusGrid};
use crate::lagrangian::LagrangianSpec;
use crate::lax_oleinik::{action_from_node, forward_value, SemiLagrangian};

/// `V^T(x_ref) / T` with `x_ref` the origin node.
pub fn c_longtime(sl: &SemiLagrangian, horizon: f64) -> Result<f64> {
    let v = forward_value(sl, horizon)?;
    Ok(v.values[0] / horizon)
}

#[derive(Clone, Debug)]
pub struct SubgradientOptions {
    /// Iterations per restart.
    pub iters: usize,
    pub restarts: usize,
    /// Initial step length in coefficient space; step k uses `step0 / sqrt(k)`.
    pub step0: f64,
    /// Softmax temperature of the first restart.
    pub temperature: f64,
    /// Geometric factor applied to the temperature at each restart.
    pub temperature_decay: f64,
    /// Coefficient norm beyond which the run is declared divergent.
    pub max_coeff_norm: f64,
    pub seed: u64,
}

impl Default for SubgradientOptions {
    fn default() -> Self {
        Self {
            iters: 200,
            restarts: 4,
            step0: 0.2,
            temperature: 0.05,
            temperature_decay: 0.3,
            max_coeff_norm: 1e6,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LowerBound {
    pub c_lower: f64,
    pub k_modes: usize,
    pub coeffs: Vec<f64>,
    /// Best bound after each continuation level `K = 0, 1, ...`.
    pub by_level: Vec<f64>,
    /// How much larger the max of `H(x, D psi)` is on the twice-refined
    /// node set; a proxy for the error of sampling the max on the grid.
    pub sampling_gap: f64,
}

struct NodeTable {
    coords: Vec<Vec<f64>>,
    /// `grads[i * len + j]` is `D phi_j(x_i)`.
    grads: Vec<Vec<f64>>,
    len: usize,
}

impl NodeTable {
    fn new(grid: TorusGrid, basis: &FourierBasis) -> Self {
        let coords: Vec<Vec<f64>> = (0..grid.len()).map(|i| grid.node_coords(i)).collect();
        let len = basis.len();
        let grads = coords
            .iter()
            .flat_map(|x| (0..len).map(move |j| basis.gradient(j, x)))
            .collect();
        Self { coords, grads, len }
    }

    fn momentum(&self, i: usize, theta: &[f64]) -> Vec<f64> {
        let d = self.coords[i].len();
        let mut p = vec![0.0; d];
        for j in 0..self.len {
            if theta[j] != 0.0 {
                for k in 0..d {
                    p[k] += theta[j] * self.grads[i * self.len + j][k];
                }
            }
        }
        p
    }
}

/// Hamiltonian and its `p`-gradient at every node for coefficients `theta`.
fn evaluate(
    spec: &LagrangianSpec,
    sys: &FieldSystem,
    table: &NodeTable,
    theta: &[f64],
) -> Result<Vec<(f64, Vec<f64>)>> {
    (0..table.coords.len())
        .into_par_iter()
        .map(|i| spec.hamiltonian_gradient(sys, &table.coords[i], &table.momentum(i, theta)))
        .collect()
}

fn max_h(values: &[(f64, Vec<f64>)]) -> f64 {
    values.iter().map(|v| v.0).fold(f64::NEG_INFINITY, f64::max)
}

/// Lower bound on the critical constant from a trigonometric subsolution.
///
/// Coefficients are found by normalized subgradient descent on the softmax
/// of `H(x_i, D psi(x_i))`, continuing from `K = 0` up to `k_modes` and
/// warm starting each level from the best coefficients of the previous one.
/// The returned bound is always evaluated without smoothing.
pub fn c_lower_subsolution(
    spec: &LagrangianSpec,
    sys: &FieldSystem,
    grid: TorusGrid,
    k_modes: usize,
    opts: &SubgradientOptions,
) -> Result<LowerBound> {
    let d = grid.dim();
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut prev_basis = FourierBasis::new(d, 0)?;
    let mut prev_theta: Vec<f64> = Vec::new();
    let mut best_f = max_h(&evaluate(spec, sys, &NodeTable::new(grid, &prev_basis), &[])?);
    let mut by_level = vec![-best_f];

    for level in 1..=k_modes {
        let basis = FourierBasis::new(d, level)?;
        let table = NodeTable::new(grid, &basis);
        let mut best_theta = vec![0.0; basis.len()];
        for j in 0..prev_basis.len() {
            best_theta[basis.embed_index(&prev_basis, j)] = prev_theta[j];
        }
        let mut temperature = opts.temperature;
        for restart in 0..opts.restarts {
            let mut theta = best_theta.clone();
            if restart > 0 {
                for t in theta.iter_mut() {
                    *t += 0.1 * opts.step0 * (rng.gen::<f64>() - 0.5);
                }
            }
            for k in 1..=opts.iters {
                let vals = evaluate(spec, sys, &table, &theta)?;
                let f = max_h(&vals);
                if f < best_f {
                    best_f = f;
                    best_theta.copy_from_slice(&theta);
                }
                let weights: Vec<f64> = vals.iter().map(|v| ((v.0 - f) / temperature).exp()).collect();
                let total: f64 = weights.iter().sum();
                let mut g = vec![0.0; basis.len()];
                for (i, (w, v)) in weights.iter().zip(&vals).enumerate() {
                    if *w < 1e-300 {
                        continue;
                    }
                    for (j, gj) in g.iter_mut().enumerate() {
                        let dphi = &table.grads[i * table.len + j];
                        *gj += w / total * v.1.iter().zip(dphi).map(|(a, b)| a * b).sum::<f64>();
                    }
                }
                let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 {
                    break;
                }
                let step = opts.step0 / (k as f64).sqrt();
                for (t, gj) in theta.iter_mut().zip(&g) {
                    *t -= step * gj / norm;
                }
                let tn = theta.iter().map(|v| v * v).sum::<f64>().sqrt();
                if !tn.is_finite() || tn > opts.max_coeff_norm {
                    return Err(Error::Diverged { norm: tn });
                }
            }
            temperature *= opts.temperature_decay;
        }
        debug!("subsolution level {level}: bound {}", -best_f);
        by_level.push(-best_f);
        prev_basis = basis;
        prev_theta = best_theta;
    }

    let fine = TorusGrid::new(d, 2 * grid.nodes_per_axis())?;
    let fine_max = max_h(&evaluate(spec, sys, &NodeTable::new(fine, &prev_basis), &prev_theta)?);
    Ok(LowerBound {
        c_lower: -best_f,
        k_modes,
        coeffs: prev_theta,
        by_level,
        sampling_gap: (fine_max - best_f).max(0.0),
    })
}

/// `y -> min_{t in {dt, 2dt, ..., T}} A_t(x, y) - c t` from node `src`.
pub fn mane_potential(sl: &SemiLagrangian, src: usize, c: f64, horizon: f64) -> Result<ScalarField> {
    let steps = (horizon / sl.dt).round() as usize;
    if steps == 0 || ((steps as f64) * sl.dt - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidArgument(format!(
            "horizon {horizon} is not a positive multiple of {}",
            sl.dt
        )));
    }
    let all: Vec<usize> = (1..=steps).collect();
    let fields = action_from_node(sl, src, &all);
    let mut out = ScalarField::constant(sl.grid, f64::INFINITY);
    for (k, a) in all.iter().zip(&fields) {
        let ct = c * *k as f64 * sl.dt;
        for (o, v) in out.values.iter_mut().zip(&a.values) {
            *o = o.min(v - ct);
        }
    }
    out.meta.time_horizon = horizon;
    out.meta.provenance = "mane potential".into();
    Ok(out)
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct Resolutions {
    pub n: usize,
    pub n_u: usize,
    pub dt: f64,
    pub k_modes: usize,
    pub n_lp: usize,
    pub n_u_lp: usize,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CriticalCertificate {
    pub c_longtime: f64,
    pub c_ergodic: f64,
    pub c_lower: f64,
    pub c_upper: f64,
    pub gap: f64,
    pub slack: f64,
    pub resolutions: Resolutions,
    pub longtime_horizon: f64,
    pub ergodic_iterations: usize,
    pub ergodic_tol: f64,
    pub lower_by_level: Vec<f64>,
    pub lower_sampling_gap: f64,
    pub lp_primal_residual: f64,
    pub lp_duality_gap: f64,
    pub lp_tol: f64,
}

impl CriticalCertificate {
    /// `c_lower - slack <= c_ergodic <= c_upper + slack` and `gap >= -slack`.
    pub fn check(&self) -> Result<()> {
        let ok = self.c_lower - self.slack <= self.c_ergodic
            && self.c_ergodic <= self.c_upper + self.slack
            && self.gap >= -self.slack;
        if ok {
            Ok(())
        } else {
            warn!(
                "sandwich violated: {} <= {} <= {}",
                self.c_lower, self.c_ergodic, self.c_upper
            );
            Err(Error::Sandwich {
                lower: self.c_lower,
                ergodic: self.c_ergodic,
                upper: self.c_upper,
                slack: self.slack,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::controls::ControlGrid;
    use crate::lagrangian::{Drift, Potential};

    fn setup(potential: Potential) -> (TorusGrid, LagrangianSpec, FieldSystem) {
        let grid = TorusGrid::new(2, 16).unwrap();
        let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, potential).unwrap();
        (grid, spec, FieldSystem::grushin_periodic())
    }

    #[test]
    fn lower_bound_without_modes() {
        let opts = SubgradientOptions::default();
        let (grid, spec, sys) = setup(Potential::Zero);
        assert_eq!(c_lower_subsolution(&spec, &sys, grid, 0, &opts).unwrap().c_lower, 0.0);
        let (grid, spec, sys) = setup(Potential::Constant(0.3));
        let lb = c_lower_subsolution(&spec, &sys, grid, 2, &opts).unwrap();
        assert!((lb.c_lower - 0.3).abs() < 1e-12);
    }

    #[test]
    fn lower_bound_is_monotone_in_modes_and_shift_equivariant() {
        let (grid, spec, sys) = setup(Potential::TwoBump);
        let opts = SubgradientOptions {
            iters: 60,
            restarts: 2,
            ..Default::default()
        };
        let lb = c_lower_subsolution(&spec, &sys, grid, 3, &opts).unwrap();
        for w in lb.by_level.windows(2) {
            assert!(w[1] >= w[0]);
        }
        let shifted = spec.shifted(0.4).unwrap();
        let lb2 = c_lower_subsolution(&shifted, &sys, grid, 3, &opts).unwrap();
        assert!((lb2.c_lower - lb.c_lower - 0.4).abs() < 1e-9);
    }

    #[test]
    fn potential_of_zero_lagrangian() {
        let (grid, spec, sys) = setup(Potential::Zero);
        let ctrl = ControlGrid::new(2, 1.0, 5).unwrap();
        let sl = SemiLagrangian::new(grid, 0.05, &spec, &sys, &ctrl, 10.0).unwrap();
        let phi = mane_potential(&sl, 0, 0.0, 1.0).unwrap();
        assert_eq!(phi.values[0], 0.0);
        assert!(phi.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn flat_quadratic_potential_vanishes() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, Potential::Zero).unwrap();
        let sys = FieldSystem::riemannian_identity(2);
        let ctrl = ControlGrid::new(2, 0.5, 21).unwrap();
        let sl = SemiLagrangian::new(grid, 0.125, &spec, &sys, &ctrl, 10.0).unwrap();
        let phi = mane_potential(&sl, 0, 0.0, 40.0).unwrap();
        // The slowest nonzero lattice speed s costs s/2 per unit of l1
        // length, so the discrete infimum is s/2 |y|_1 rather than 0.
        let floor = 0.5 * ctrl.spacing();
        for i in 0..grid.len() {
            let y = grid.node_coords(i);
            let l1: f64 = y.iter().map(|v| crate::grid::wrap_centered(*v).abs()).sum();
            assert!(phi.values[i] <= floor * l1 + 1e-3, "{i} {}", phi.values[i]);
        }
        assert!(phi.values[0] <= 1e-12);
    }
}
