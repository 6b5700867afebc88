//! Helpers shared by the integration tests: shipped configs and the
//! independent brute-force oracles.

#![allow(dead_code)]

use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use weakkam::config::RunConfig;
use weakkam::grid::wrap_centered;
use weakkam::lax_oleinik::SemiLagrangian;
use weakkam::{ControlGrid, Drift, FieldSystem, LagrangianSpec, PairMatrix, Potential, ScalarField, TorusGrid};

pub fn configs_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

/// A shipped config with its output redirected under `out`.
pub fn shipped(name: &str, out: &Path) -> RunConfig {
    let mut cfg = RunConfig::load(&configs_dir().join(format!("{name}.json"))).expect("shipped config loads");
    cfg.output_dir = out.join(name);
    cfg
}

/// `sup_u <q, u> - L(x, u)` over a `per_axis`-point lattice on `[-r, r]^m`,
/// evaluating `L` directly.
pub fn brute_legendre(spec: &LagrangianSpec, x: &[f64], q: &[f64], r: f64, per_axis: usize) -> f64 {
    assert_eq!(q.len(), 2);
    let step = 2.0 * r / (per_axis - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..per_axis {
        for j in 0..per_axis {
            let u = [-r + i as f64 * step, -r + j as f64 * step];
            let v = q[0] * u[0] + q[1] * u[1] - spec.eval(x, &u).unwrap();
            best = best.max(v);
        }
    }
    best
}

/// `sup_u <p, F(x) u> - L(x, u)` on the same lattice.
pub fn brute_hamiltonian(spec: &LagrangianSpec, sys: &FieldSystem, x: &[f64], p: &[f64], r: f64, per_axis: usize) -> f64 {
    let f = sys.eval(x).unwrap();
    let step = 2.0 * r / (per_axis - 1) as f64;
    let mut best = f64::NEG_INFINITY;
    for i in 0..per_axis {
        for j in 0..per_axis {
            let u = [-r + i as f64 * step, -r + j as f64 * step];
            let fu = f.apply(&u);
            let v = p[0] * fu[0] + p[1] * fu[1] - spec.eval(x, &u).unwrap();
            best = best.max(v);
        }
    }
    best
}

/// Worst `|closed form - brute force|` over `samples` random points for
/// both the Legendre transform and the Hamiltonian of a Mañé Lagrangian on
/// the periodic Grushin frame.
pub fn legendre_oracle_error(samples: usize, seed: u64) -> f64 {
    let grid = TorusGrid::new(2, 16).unwrap();
    let spec = LagrangianSpec::mane(grid, 2, Drift::Constant(vec![0.3, -0.2]), Potential::TwoBump).unwrap();
    let sys = FieldSystem::grushin_periodic();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut worst: f64 = 0.0;
    for _ in 0..samples {
        let x = [rng.gen::<f64>(), rng.gen::<f64>()];
        let q = [rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)];
        let closed = spec.legendre(&x, &q).unwrap();
        worst = worst.max((closed - brute_legendre(&spec, &x, &q, 3.0, 201)).abs());
        let h = spec.hamiltonian(&sys, &x, &q).unwrap();
        worst = worst.max((h - brute_hamiltonian(&spec, &sys, &x, &q, 3.0, 201)).abs());
    }
    worst
}

/// The hand-worked min-plus square of a 3 x 3 chain.
pub fn minplus_hand_case() -> bool {
    let a = PairMatrix::from_rows(vec![vec![0.0, 1.0, 5.0], vec![1.0, 0.0, 1.0], vec![5.0, 1.0, 0.0]]).unwrap();
    let expected = PairMatrix::from_rows(vec![vec![0.0, 1.0, 2.0], vec![1.0, 0.0, 1.0], vec![2.0, 1.0, 0.0]]).unwrap();
    a.square() == expected
}

/// `(scheme value, enumerated value)` of one backward step of a cone at one
/// node on the periodic Grushin frame with step 0.05.
pub fn backward_node_oracle() -> (f64, f64) {
    let grid = TorusGrid::new(2, 32).unwrap();
    let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, Potential::Sin2).unwrap();
    let sys = FieldSystem::grushin_periodic();
    let ctrl = ControlGrid::new(2, 2.0, 9).unwrap();
    let dt = 0.05;
    let sl = SemiLagrangian::new(grid, dt, &spec, &sys, &ctrl, 10.0).unwrap();
    let cone = ScalarField::from_fn(grid, |x| (wrap_centered(x[0] - 0.7).powi(2) + wrap_centered(x[1] - 0.2).powi(2)).sqrt());
    let node = grid.index_of(&[11, 26]);
    let x = grid.node_coords(node);
    let f = sys.eval(&x).unwrap();
    let mut best = f64::INFINITY;
    for u in ctrl.iter() {
        let fu = f.apply(u);
        let foot = [x[0] - dt * fu[0], x[1] - dt * fu[1]];
        best = best.min(cone.interpolate(&foot) + dt * spec.eval(&x, u).unwrap());
    }
    (sl.backward_step(&cone).values[node], best)
}

/// Files under `dir` whose contents differ from the same name under `other`
/// (or are missing there).
pub fn differing_files(dir: &Path, other: &Path) -> Vec<String> {
    let mut names: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    names
        .into_iter()
        .filter(|n| std::fs::read(dir.join(n)).ok() != std::fs::read(other.join(n)).ok())
        .collect()
}
