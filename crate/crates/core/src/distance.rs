//! Sub-Riemannian distance by value iteration for the minimal-time problem.
//!
//! Admissible controls are the Euclidean unit ball of the control space.
//! For a driftless system the minimal time is attained at full speed, so
//! the sweep only uses unit directions (radially projected lattice points).

use rayon::prelude::*;

use crate::controls::ControlGrid;
use crate::error::{Error, Result};
use crate::frame::FieldSystem;
use crate::grid::{interpolate_values, ScalarField, TorusGrid, MAX_DIM};

#[derive(Clone, Debug)]
pub struct DistanceOptions {
    /// Stop when the sup-norm update drops below this.
    pub tol: f64,
    pub max_sweeps: usize,
    /// Lattice resolution per control axis before projection to the sphere.
    pub n_u: usize,
}

impl Default for DistanceOptions {
    fn default() -> Self {
        Self {
            tol: 1e-9,
            max_sweeps: 20_000,
            n_u: 9,
        }
    }
}

/// Unit directions obtained by normalizing every nonzero lattice point.
pub fn unit_directions(m: usize, n_u: usize) -> Result<Vec<Vec<f64>>> {
    let lattice = ControlGrid::new(m, 1.0, n_u)?;
    let mut dirs: Vec<Vec<f64>> = Vec::new();
    for u in lattice.iter() {
        let norm = u.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm == 0.0 {
            continue;
        }
        let dir: Vec<f64> = u.iter().map(|v| v / norm).collect();
        if !dirs.iter().any(|e| e.iter().zip(&dir).all(|(a, b)| (a - b).abs() < 1e-12)) {
            dirs.push(dir);
        }
    }
    Ok(dirs)
}

/// `y -> d_SR(x, y)` on `grid`, with the source snapped to its nearest node.
///
/// Synchronous Jacobi sweeps of `T(y) = min_u T(y - tau F(y) u) + tau`,
/// where `tau` depends on the node and direction so that every foot point
/// lands one cell away. Nodes still at `+inf` once the iteration has
/// settled are reported as unreachable.
pub fn sr_distance(sys: &FieldSystem, grid: TorusGrid, x: &[f64], opts: &DistanceOptions) -> Result<ScalarField> {
    if !(opts.tol > 0.0) {
        return Err(Error::InvalidArgument(format!("tolerance {} must be > 0", opts.tol)));
    }
    if sys.state_dim() != grid.dim() {
        return Err(Error::DimensionMismatch {
            expected: grid.dim(),
            got: sys.state_dim(),
        });
    }
    grid.check_point(x)?;
    let d = grid.dim();
    let m = sys.control_dim();
    let dirs = unit_directions(m, opts.n_u)?;
    let h = grid.spacing();
    // Each direction gets its own step, long enough to cross one cell in
    // the sup norm; directions the frame (nearly) annihilates are dropped.
    let n_dir = dirs.len();
    let floor = 1e-3 * sys.max_operator_norm().max(1e-12);
    let table: Vec<(f64, f64)> = (0..grid.len())
        .into_par_iter()
        .flat_map_iter(|i| {
            let xi = grid.node_coords(i);
            let mut out = vec![(0.0, f64::INFINITY); n_dir * d];
            let mut fu = [0.0; MAX_DIM];
            for (j, u) in dirs.iter().enumerate() {
                sys.apply_into(&xi, u, &mut fu);
                let speed = fu[..d].iter().fold(0.0f64, |a, v| a.max(v.abs()));
                if speed < floor {
                    continue;
                }
                let tau = h / speed;
                for k in 0..d {
                    out[j * d + k] = (tau * fu[k], tau);
                }
            }
            out
        })
        .collect();

    let src = grid.nearest_node(x);
    let mut values = vec![f64::INFINITY; grid.len()];
    values[src] = 0.0;
    for sweep in 1..=opts.max_sweeps {
        let next: Vec<f64> = (0..grid.len())
            .into_par_iter()
            .map(|i| {
                if i == src {
                    return 0.0;
                }
                let mut xi = [0.0; MAX_DIM];
                grid.node_coords_into(i, &mut xi);
                let mut foot = [0.0; MAX_DIM];
                let mut best = values[i];
                for j in 0..n_dir {
                    let tau = table[(i * n_dir + j) * d].1;
                    if !tau.is_finite() {
                        continue;
                    }
                    for k in 0..d {
                        foot[k] = xi[k] - table[(i * n_dir + j) * d + k].0;
                    }
                    let v = interpolate_values(&grid, &values, &foot[..d]) + tau;
                    if v < best {
                        best = v;
                    }
                }
                best
            })
            .collect();
        let mut update: f64 = 0.0;
        for (a, b) in next.iter().zip(&values) {
            if a.is_finite() != b.is_finite() {
                update = f64::INFINITY;
                break;
            }
            if a.is_finite() {
                update = update.max((a - b).abs());
            }
        }
        values = next;
        if update < opts.tol {
            let unreachable: Vec<usize> = (0..values.len()).filter(|&i| !values[i].is_finite()).collect();
            if let Some(&first) = unreachable.first() {
                return Err(Error::Unreachable {
                    count: unreachable.len(),
                    sweeps: sweep,
                    first: grid.multi_index(first)[..d].to_vec(),
                });
            }
            let mut field = ScalarField::new(grid, values)?;
            field.meta.provenance = "sub-Riemannian distance, euclidean unit control ball".into();
            return Ok(field);
        }
    }
    let unreachable = values.iter().filter(|v| !v.is_finite()).count();
    if unreachable > 0 {
        let first = values.iter().position(|v| !v.is_finite()).unwrap();
        return Err(Error::Unreachable {
            count: unreachable,
            sweeps: opts.max_sweeps,
            first: grid.multi_index(first)[..d].to_vec(),
        });
    }
    Err(Error::NonConvergence {
        what: "minimal-time iteration".into(),
        iterations: opts.max_sweeps,
        amplitude: f64::NAN,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn directions_are_unit_and_symmetric() {
        let dirs = unit_directions(2, 9).unwrap();
        for u in &dirs {
            assert!((u[0].hypot(u[1]) - 1.0).abs() < 1e-12);
            assert!(dirs.iter().any(|v| (v[0] + u[0]).abs() < 1e-12 && (v[1] + u[1]).abs() < 1e-12));
        }
    }

    #[test]
    fn euclidean_quarter() {
        let grid = TorusGrid::new(2, 32).unwrap();
        let sys = FieldSystem::riemannian_identity(2);
        let dist = sr_distance(&sys, grid, &[0.0, 0.0], &DistanceOptions::default()).unwrap();
        assert_eq!(dist.values[0], 0.0);
        let v = dist.interpolate(&[0.25, 0.0]);
        assert!((v - 0.25).abs() < 2.0 * grid.spacing(), "{v}");
        assert!(dist.values.iter().all(|&v| v >= 0.0));
    }

    #[test]
    fn grushin_chart_against_fine_grid() {
        let sys = FieldSystem::grushin_chart();
        let opts = DistanceOptions::default();
        let coarse = TorusGrid::new(2, 32).unwrap();
        let fine = TorusGrid::new(2, 128).unwrap();
        let dc = sr_distance(&sys, coarse, &[0.0, 0.0], &opts).unwrap();
        let df = sr_distance(&sys, fine, &[0.0, 0.0], &opts).unwrap();
        let y = [0.0, 0.1];
        let (a, b) = (dc.interpolate(&y), df.interpolate(&y));
        assert!((a - b).abs() <= 2.0 * coarse.spacing(), "{a} {b}");
        // vertical motion is expensive near the singular line
        assert!(b > 0.1);
    }

    #[test]
    fn symmetry_and_triangle() {
        let grid = TorusGrid::new(2, 24).unwrap();
        let h = grid.spacing();
        for sys in [FieldSystem::grushin_periodic(), FieldSystem::riemannian_identity(2)] {
            let nodes = [0usize, 5 * 24 + 3, 11 * 24 + 17, 20 * 24 + 9];
            let fields: Vec<ScalarField> = nodes
                .iter()
                .map(|&i| sr_distance(&sys, grid, &grid.node_coords(i), &DistanceOptions::default()).unwrap())
                .collect();
            for (a, fa) in nodes.iter().zip(&fields) {
                for (b, fb) in nodes.iter().zip(&fields) {
                    let (ab, ba) = (fa.values[*b], fb.values[*a]);
                    assert!((ab - ba).abs() <= 2.0 * h * 4.0, "{} {ab} {ba}", sys.name);
                    for (c, fc) in nodes.iter().zip(&fields) {
                        let _ = fc;
                        assert!(fa.values[*c] <= ab + fb.values[*c] + 3.0 * h);
                    }
                }
            }
        }
    }
}
