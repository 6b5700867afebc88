use weakkam::fourier::FourierBasis;
use weakkam::lax_oleinik::{ergodic_iteration, SemiLagrangian, DEFAULT_COURANT};
use weakkam::measures::{
    closedness_residual, closedness_vector, mather_set, occupation_measure, semiconcave_family, snap_measure,
    solve_mather_lp, strong_closedness_residual, weak_duality_bound,
};
use weakkam::simplex::SimplexOptions;
use weakkam::{ControlGrid, Drift, FieldSystem, LagrangianSpec, Potential, TorusGrid};

fn setup(potential: Potential) -> (TorusGrid, LagrangianSpec, FieldSystem, ControlGrid) {
    let grid = TorusGrid::new(2, 32).unwrap();
    let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, potential).unwrap();
    let radius = spec.control_radius_bound(1.0).unwrap();
    (grid, spec, FieldSystem::grushin_periodic(), ControlGrid::new(2, radius, 13).unwrap())
}

#[test]
fn feedback_occupation_settles_at_the_minimizer() {
    let (grid, spec, sys, ctrl) = setup(Potential::Sin2);
    let sl = SemiLagrangian::new(grid, 0.02, &spec, &sys, &ctrl, DEFAULT_COURANT).unwrap();
    let chi = ergodic_iteration(&sl, 1e-4, 50_000).unwrap().chi;
    let mu = occupation_measure(&sl, &[0.25, 0.3], 40.0, Some(&chi)).unwrap();
    let total: f64 = mu.atoms.iter().map(|a| a.w).sum();
    assert!((total - 1.0).abs() <= 1e-12, "{total}");
    let du = 2.0 * ctrl.radius() / (ctrl.nodes_per_axis() - 1) as f64;
    let mass = mu.mass_near(grid, &[0.0, 0.0], 2, 0.5 * du);
    assert!(mass >= 0.8, "{mass}");
}

#[test]
fn occupation_residual_obeys_the_telescoping_bound() {
    let (grid, spec, sys, ctrl) = setup(Potential::TwoBump);
    let dt = 0.02;
    let sl = SemiLagrangian::new(grid, dt, &spec, &sys, &ctrl, DEFAULT_COURANT).unwrap();
    let basis = FourierBasis::new(2, 2).unwrap();
    let probe = TorusGrid::new(2, 64).unwrap();
    let sup: Vec<f64> = (0..basis.len())
        .map(|j| (0..probe.len()).map(|i| basis.value(j, &probe.node_coords(i)).abs()).fold(0.0, f64::max))
        .collect();
    let slack = dt + grid.spacing();
    for horizon in [5.0, 10.0, 20.0] {
        let mu = occupation_measure(&sl, &[0.25, 0.3], horizon, None).unwrap();
        let r = closedness_vector(&mu, &sys, &basis);
        for (j, (v, s)) in r.iter().zip(&sup).enumerate() {
            let bound = 2.0 * s / horizon + slack;
            assert!(v.abs() <= bound, "T = {horizon}, mode {:?}: {v} > {bound}", basis.mode(j));
        }
    }
}

#[test]
fn mather_lp_solution_checked_independently() {
    let lp_grid = TorusGrid::new(2, 8).unwrap();
    let (_, spec, sys, _) = setup(Potential::TwoBump);
    let ctrl = ControlGrid::new(2, spec.control_radius_bound(1.0).unwrap(), 5).unwrap();
    let basis = FourierBasis::new(2, 2).unwrap();
    let lp = solve_mather_lp(&spec, &sys, lp_grid, &ctrl, &basis, &SimplexOptions::default()).unwrap();

    // feasibility and value recomputed from the atoms
    let weights: Vec<f64> = lp.measure.atoms.iter().map(|a| a.w).collect();
    assert!(weights.iter().all(|&w| w >= -1e-12));
    assert!((weights.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
    let c1 = closedness_residual(&lp.measure, &sys, &basis);
    assert!(c1 <= 1e-8, "{c1}");
    let value: f64 = lp.measure.atoms.iter().map(|a| a.w * spec.eval(&a.x, &a.u).unwrap()).sum();
    assert!((value - lp.value).abs() <= 1e-9, "{value} vs {}", lp.value);
    assert!((lp.value - lp.dual_value).abs() <= 1e-7);

    let strong = strong_closedness_residual(&lp.measure, &sys, &semiconcave_family(2));
    assert!(strong.value <= 3.0 * 1e-8, "{}", strong.value);

    let m = mather_set(&lp.measure, 1e-6, lp_grid);
    assert_eq!(m.projected, vec![0]);

    // an occupation measure snapped to the LP grid is bounded below by the dual
    let grid = TorusGrid::new(2, 32).unwrap();
    let big_ctrl = ControlGrid::new(2, ctrl.radius(), 13).unwrap();
    let sl = SemiLagrangian::new(grid, 0.02, &spec, &sys, &big_ctrl, DEFAULT_COURANT).unwrap();
    let occ = occupation_measure(&sl, &[0.25, 0.3], 10.0, None).unwrap();
    let snapped = snap_measure(&occ, lp_grid, &ctrl);
    let cost = snapped.integrate_lagrangian(&spec).unwrap();
    assert!(weak_duality_bound(&lp, &snapped, &sys, &basis) <= cost + 1e-9);
    assert!(lp.value <= occ.integrate_lagrangian(&spec).unwrap() + 1e-9);
}
