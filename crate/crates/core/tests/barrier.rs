use weakkam::aubry::{
    aubry_set, barrier_fixed_point_check, barrier_nodes, check_domination, horizontal_gradient, lipschitz_check,
    peierls_barrier, BarrierMatrix, BarrierOptions,
};
use weakkam::distance::{sr_distance, DistanceOptions};
use weakkam::lax_oleinik::{action_from_node, ergodic_iteration, SemiLagrangian, DEFAULT_COURANT};
use weakkam::{ControlGrid, Drift, FieldSystem, LagrangianSpec, Potential, ScalarField, TorusGrid};

struct Case {
    grid: TorusGrid,
    spec: LagrangianSpec,
    sys: FieldSystem,
    ctrl: ControlGrid,
    dt: f64,
}

impl Case {
    fn new(n: usize, potential: Potential, dt: f64) -> Self {
        Self::with_controls(n, potential, dt, 9)
    }

    fn with_controls(n: usize, potential: Potential, dt: f64, n_u: usize) -> Self {
        let grid = TorusGrid::new(2, n).unwrap();
        let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, potential).unwrap();
        let radius = spec.control_radius_bound(1.0).unwrap();
        Self {
            grid,
            ctrl: ControlGrid::new(2, radius, n_u).unwrap(),
            spec,
            sys: FieldSystem::grushin_periodic(),
            dt,
        }
    }

    fn sl_for<'a>(&'a self, spec: &'a LagrangianSpec) -> SemiLagrangian<'a> {
        SemiLagrangian::new(self.grid, self.dt, spec, &self.sys, &self.ctrl, DEFAULT_COURANT).unwrap()
    }

    fn critical(&self, spec: &LagrangianSpec) -> (f64, ScalarField) {
        let e = ergodic_iteration(&self.sl_for(spec), 1e-5, 50_000).unwrap();
        (e.c, e.chi)
    }

    fn barrier(&self, spec: &LagrangianSpec, c: f64) -> BarrierMatrix {
        peierls_barrier(&self.sl_for(spec), c, &barrier_nodes(self.grid, None), &BarrierOptions::default()).unwrap()
    }
}

/// `sqrt(2 G)`-weighted length of the best path that runs along `x2 = 0`
/// to `x1 = a`, vertically to `x2 = 1/2`, then back to `x1 = 0`: an upper
/// bound on the c = 0 action from the origin to `(0, 1/2)`.
fn rectangular_path_bound() -> f64 {
    let g = |x: f64, y: f64| Potential::TwoBump.eval(&[x, y]);
    let quad = |f: &dyn Fn(f64) -> f64| {
        let k = 2000;
        (0..k).map(|i| f((i as f64 + 0.5) / k as f64)).sum::<f64>() / k as f64
    };
    (1..40)
        .map(|i| {
            let a = i as f64 / 80.0;
            let speed = (2.0 * std::f64::consts::PI * a).sin() / (2.0 * std::f64::consts::PI);
            quad(&|s| (2.0 * g(a * s, 0.0)).sqrt() * a)
                + quad(&|s| (2.0 * g(a, 0.5 * s)).sqrt() * 0.5 / speed)
                + quad(&|s| (2.0 * g(a * s, 0.5)).sqrt() * a)
        })
        .fold(f64::INFINITY, f64::min)
}

#[test]
fn two_bump_barrier_properties() {
    let case = Case::new(16, Potential::TwoBump, 0.02);
    let (c, _) = case.critical(&case.spec);
    let h = case.barrier(&case.spec, c);
    let eps = h.eps_num;
    assert!(h.covers_grid());

    // the second well has positive potential and is not in the Aubry set
    let far = h.position(case.grid.index_of(&[8, 8])).unwrap();
    assert!(h.get(far, far) > 0.05, "{}", h.get(far, far));
    assert!(h.diagonal().iter().all(|&v| v >= -eps));

    // a loop through (0, 1/2) must visit the origin and come back
    let bound = 2.0 * rectangular_path_bound();
    let p = h.position(case.grid.index_of(&[0, 8])).unwrap();
    let hp = h.get(p, p);
    assert!(hp <= 1.05 * bound && hp >= 0.8 * bound, "h(p, p) = {hp}, path bound {bound}");

    let aubry = aubry_set(&h, None);
    assert!(aubry.nodes.contains(&0));
    for &i in &aubry.nodes {
        let g = Potential::TwoBump.eval(&case.grid.node_coords(i));
        assert!(g <= 0.1, "node {i} with G = {g}");
    }

    let n = h.len();
    let mut worst = f64::NEG_INFINITY;
    for x in 0..n {
        for y in 0..n {
            let hxy = h.get(x, y);
            for z in 0..n {
                worst = worst.max(h.get(x, z) - hxy - h.get(y, z));
            }
        }
    }
    assert!(worst <= eps, "triangle excess {worst} over eps {eps}");
}

/// Worst `h(x, z) - h(x, y) - A_1(y, z) + c` over every `x, z` and a
/// stride of `y`, with `A_1` from the semigroup started at a node.
fn mixed_excess(case: &Case) -> f64 {
    let (c, _) = case.critical(&case.spec);
    let h = case.barrier(&case.spec, c);
    let sl = case.sl_for(&case.spec);
    let steps = (1.0 / case.dt).round() as usize;
    let n = h.len();
    let mut worst = f64::NEG_INFINITY;
    for y in (0..n).step_by(case.grid.nodes_per_axis() / 2 + 1) {
        let a = &action_from_node(&sl, h.nodes[y], &[steps])[0];
        for x in 0..n {
            for z in 0..n {
                worst = worst.max(h.get(x, z) - h.get(x, y) - a.values[h.nodes[z]] + c);
            }
        }
    }
    worst - h.eps_num
}

// The node-started action is a one-cell blob under interpolation, so the
// mixed inequality carries an O(dt + h) bias that shrinks with the grid.
#[test]
fn mixed_inequality_up_to_discretization() {
    let coarse = Case::new(16, Potential::TwoBump, 0.02);
    let fine = Case::new(32, Potential::TwoBump, 0.01);
    let (ec, ef) = (mixed_excess(&coarse), mixed_excess(&fine));
    assert!(ec <= 2.0 * (coarse.dt + coarse.grid.spacing()), "{ec}");
    assert!(ef <= ec, "coarse {ec} fine {ef}");
}

#[test]
fn peierls_row_is_dominated_and_a_fixed_point() {
    let case = Case::new(16, Potential::TwoBump, 0.02);
    let (c, _) = case.critical(&case.spec);
    let h = case.barrier(&case.spec, c);
    let row = h.row_field(h.position(0).unwrap()).unwrap();
    let r = check_domination(&row, c, &case.spec, &case.sys, &case.ctrl, case.dt, 200, 11).unwrap();
    assert!(r.max_defect / r.worst_duration <= case.dt + case.grid.spacing(), "{r:?}");

    let sl = case.sl_for(&case.spec);
    let right = barrier_fixed_point_check(&sl, &row, c, 1.0).unwrap();
    let wrong = barrier_fixed_point_check(&sl, &row, c + 0.2, 1.0).unwrap();
    assert!(right <= 0.05, "{right}");
    assert!(wrong >= 0.1, "{wrong}");
}

#[test]
fn aubry_set_ignores_an_additive_shift() {
    let case = Case::new(16, Potential::Sin2, 0.02);
    let shifted = case.spec.shifted(0.4).unwrap();
    let (c, _) = case.critical(&case.spec);
    let (cs, _) = case.critical(&shifted);
    assert!((cs - c - 0.4).abs() <= 1e-9);
    let a = aubry_set(&case.barrier(&case.spec, c), None);
    let b = aubry_set(&case.barrier(&shifted, cs), None);
    assert_eq!(a.nodes, b.nodes);
}

fn distances(grid: TorusGrid, sys: &FieldSystem) -> Vec<(usize, ScalarField)> {
    let n = grid.nodes_per_axis() as i64;
    [[0, 0], [n / 4, n / 8], [n / 2, n / 2], [3 * n / 4, n / 3]]
        .iter()
        .map(|m| {
            let src = grid.index_of(m);
            (src, sr_distance(sys, grid, &grid.node_coords(src), &DistanceOptions::default()).unwrap())
        })
        .collect()
}

#[test]
fn lipschitz_estimates() {
    let coarse = Case::new(32, Potential::TwoBump, 0.02);
    let fine = Case::new(64, Potential::TwoBump, 0.01);
    let dc = distances(coarse.grid, &coarse.sys);
    let df = distances(fine.grid, &fine.sys);

    assert_eq!(lipschitz_check(&ScalarField::constant(coarse.grid, 2.5), &dc), 0.0);

    let lc = lipschitz_check(&coarse.critical(&coarse.spec).1, &dc);
    let lf = lipschitz_check(&fine.critical(&fine.spec).1, &df);
    assert!(lc > 0.0 && lf / lc <= 1.5 && lc / lf <= 1.5, "n=32 {lc} n=64 {lf}");

    // raw potential: |grad G| times the largest column norm bounds the ratio
    let g = ScalarField::from_fn(fine.grid, |x| Potential::TwoBump.eval(x));
    let lg = lipschitz_check(&g, &df);
    let step = 1e-6;
    let mut bound: f64 = 0.0;
    for i in 0..fine.grid.len() {
        let x = fine.grid.node_coords(i);
        let grad: Vec<f64> = (0..2)
            .map(|k| {
                let (mut a, mut b) = (x.clone(), x.clone());
                a[k] += step;
                b[k] -= step;
                (Potential::TwoBump.eval(&a) - Potential::TwoBump.eval(&b)) / (2.0 * step)
            })
            .collect();
        bound = bound.max(grad.iter().map(|v| v * v).sum::<f64>().sqrt());
    }
    let growth = fine.sys.max_operator_norm();
    assert!(lg > 0.0 && lg <= 1.1 * bound * growth, "C_est {lg} bound {}", bound * growth);
}

// The scheme moves no slower than the smallest nonzero control, so the
// kink it leaves at the minimizer scales with the control spacing too.
#[test]
fn gradient_disagreement_on_the_aubry_set_shrinks() {
    let at = |n: usize, dt: f64, n_u: usize| {
        let case = Case::with_controls(n, Potential::TwoBump, dt, n_u);
        let (_, chi) = case.critical(&case.spec);
        let h = case.grid.spacing();
        let g = horizontal_gradient(&chi, &case.sys, &[0.0, 0.0], h).unwrap();
        let du = 2.0 * case.ctrl.radius() / (n_u - 1) as f64;
        (g.disagreement, 2.0 * h + du)
    };
    let (coarse, sc) = at(16, 0.02, 9);
    let (fine, sf) = at(32, 0.01, 17);
    assert!(fine <= 0.6 * coarse, "n=16 {coarse} n=32 {fine}");
    assert!(coarse <= 1.5 * sc && fine <= 1.5 * sf, "{coarse} {fine}");
}
