use proptest::prelude::*;
use weakkam::lax_oleinik::{SemiLagrangian, DEFAULT_COURANT};
use weakkam::minplus::min_plus_product;
use weakkam::{ControlGrid, Drift, FieldSystem, LagrangianSpec, Potential, ScalarField, TorusGrid};

fn naive_product(a: &[f64], b: &[f64], rows: usize, inner: usize, cols: usize) -> Vec<f64> {
    let mut out = vec![f64::INFINITY; rows * cols];
    for i in 0..rows {
        for k in 0..inner {
            for j in 0..cols {
                out[i * cols + j] = out[i * cols + j].min(a[i * inner + k] + b[k * cols + j]);
            }
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn min_plus_product_matches_triple_loop(
        (rows, inner, cols, a, b) in (1usize..7, 1usize..7, 1usize..7).prop_flat_map(|(r, k, c)| (
            Just(r), Just(k), Just(c),
            prop::collection::vec(-5.0f64..5.0, r * k),
            prop::collection::vec(-5.0f64..5.0, k * c),
        ))
    ) {
        prop_assert_eq!(min_plus_product(&a, &b, rows, inner, cols), naive_product(&a, &b, rows, inner, cols));
    }

    #[test]
    fn fenchel_young_for_the_mane_lagrangian(
        x in prop::array::uniform2(0.0f64..1.0),
        q in prop::array::uniform2(-3.0f64..3.0),
        u in prop::array::uniform2(-3.0f64..3.0),
        v in prop::array::uniform2(-1.0f64..1.0),
    ) {
        let grid = TorusGrid::new(2, 8).unwrap();
        let spec = LagrangianSpec::mane(grid, 2, Drift::Constant(v.to_vec()), Potential::TwoBump).unwrap();
        let star = spec.legendre(&x, &q).unwrap();
        let pairing = q[0] * u[0] + q[1] * u[1];
        prop_assert!(star + spec.eval(&x, &u).unwrap() >= pairing - 1e-12);
        let w = spec.legendre_gradient(&x, &q).unwrap();
        let at = q[0] * w[0] + q[1] * w[1] - spec.eval(&x, &w).unwrap();
        prop_assert!((at - star).abs() <= 1e-10);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn backward_step_is_monotone_and_commutes_with_constants(
        base in prop::collection::vec(-1.0f64..1.0, 64),
        bump in prop::collection::vec(0.0f64..0.5, 64),
        a in -2.0f64..2.0,
    ) {
        let grid = TorusGrid::new(2, 8).unwrap();
        let spec = LagrangianSpec::mane(grid, 2, Drift::Zero, Potential::Sin2).unwrap();
        let sys = FieldSystem::grushin_periodic();
        let ctrl = ControlGrid::new(2, 1.0, 5).unwrap();
        let sl = SemiLagrangian::new(grid, 0.05, &spec, &sys, &ctrl, DEFAULT_COURANT).unwrap();
        let phi = ScalarField::new(grid, base.clone()).unwrap();
        let psi = ScalarField::new(grid, base.iter().zip(&bump).map(|(p, b)| p + b).collect()).unwrap();
        let (tp, tq) = (sl.backward_step(&phi), sl.backward_step(&psi));
        prop_assert!(tp.values.iter().zip(&tq.values).all(|(x, y)| x <= y));
        let shifted = sl.backward_step(&phi.map(|v| v + a));
        prop_assert!(shifted.values.iter().zip(&tp.values).all(|(s, t)| (s - t - a).abs() <= 1e-12));
    }
}
