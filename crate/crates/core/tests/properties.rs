//! Property tests for the structural invariants of the particle flow and its
//! derivative: particle relabeling, mass conservation, exact translation,
//! linearity of the derivative recursion, and fixed points of the iterative
//! solver.

use interact_clark::{
    euler_solve, picard_solve, variational_solve_from, BrownianPath, CoefficientSet,
    DiffusionFamily, DriftFamily, EnsembleState, StreamRole, TestFunction, TimeGrid,
};
use proptest::prelude::*;

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn permutation(n: usize, seed: u64) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.sort_by_key(|&i| mix(seed.wrapping_add(i as u64)));
    idx
}

fn tanh_set(alpha: f64, gamma: f64) -> CoefficientSet {
    CoefficientSet::new(
        DriftFamily::TanhKernel { alpha, gamma },
        DiffusionFamily::SinBounded { base: 1.5, amp: 0.5 },
    )
    .unwrap()
}

prop_compose! {
    fn small_ensemble()(
        atoms in prop::collection::vec(-2.0f64..2.0, 2..6),
    )(
        weights in prop::collection::vec(0.05f64..1.0, atoms.len()),
        atoms in Just(atoms),
    ) -> EnsembleState {
        EnsembleState::new(atoms, weights).unwrap()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn pairing_is_permutation_invariant(
        e0 in small_ensemble(),
        seed in 0u64..1_000_000,
        perm_seed in 0u64..1_000_000,
        alpha in 0.05f64..0.5,
        gamma in 0.5f64..2.0,
    ) {
        let cs = tanh_set(alpha, gamma);
        let grid = TimeGrid::unit(16).unwrap();
        let path = BrownianPath::sample(grid, seed, StreamRole::Path, 0, 0, 0);
        let perm = permutation(e0.n_particles(), perm_seed);
        let relabeled = e0.permuted(&perm).unwrap();
        let a = euler_solve(&cs, &e0, &path).unwrap();
        let b = euler_solve(&cs, &relabeled, &path).unwrap();
        for f in [TestFunction::Identity, TestFunction::Sin, TestFunction::Square] {
            let pa = a.terminal().pair_with(f).unwrap();
            let pb = b.terminal().pair_with(f).unwrap();
            prop_assert!((pa - pb).abs() <= 1e-12, "{f:?}: {pa} vs {pb}");
        }
    }

    #[test]
    fn weights_are_conserved_exactly(
        e0 in small_ensemble(),
        seed in 0u64..1_000_000,
    ) {
        let cs = tanh_set(0.3, 1.0);
        let grid = TimeGrid::unit(8).unwrap();
        let path = BrownianPath::sample(grid, seed, StreamRole::Path, 0, 0, 0);
        let traj = euler_solve(&cs, &e0, &path).unwrap();
        for k in 0..=8 {
            prop_assert_eq!(traj.state(k).weights(), e0.weights());
        }
        let mass: f64 = e0.weights().iter().sum();
        prop_assert!((mass - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn zero_drift_unit_noise_translates_atoms(
        e0 in small_ensemble(),
        seed in 0u64..1_000_000,
    ) {
        let cs = CoefficientSet::new(DriftFamily::Zero, DiffusionFamily::Unit).unwrap();
        let grid = TimeGrid::unit(32).unwrap();
        let path = BrownianPath::sample(grid, seed, StreamRole::Path, 0, 0, 0);
        let traj = euler_solve(&cs, &e0, &path).unwrap();
        for k in 0..=32 {
            let w = path.value(k);
            for (x, u) in traj.state(k).positions().iter().zip(e0.atoms()) {
                prop_assert!((x - u - w).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn derivative_recursion_is_linear_in_initial_data(
        e0 in small_ensemble(),
        seed in 0u64..1_000_000,
        scale in prop::sample::select(vec![-2.0f64, -0.5, 0.25, 3.0]),
    ) {
        let cs = CoefficientSet::new(
            DriftFamily::TanhKernel { alpha: 0.2, gamma: 1.0 },
            DiffusionFamily::Unit,
        ).unwrap();
        let grid = TimeGrid::unit(16).unwrap();
        let path = BrownianPath::sample(grid, seed, StreamRole::Path, 0, 0, 0);
        let traj = euler_solve(&cs, &e0, &path).unwrap();
        let n = e0.n_particles();
        let eta0: Vec<f64> = (0..n).map(|i| 0.5 + 0.25 * i as f64).collect();
        let scaled: Vec<f64> = eta0.iter().map(|e| scale * e).collect();
        let base = variational_solve_from(&cs, &traj, &path, 4, &eta0).unwrap();
        let big = variational_solve_from(&cs, &traj, &path, 4, &scaled).unwrap();
        for k in 4..=16 {
            for (a, b) in base.at(k).unwrap().iter().zip(big.at(k).unwrap()) {
                prop_assert!((scale * a - b).abs() <= 1e-12 * (1.0 + b.abs()));
            }
        }
    }

    #[test]
    fn state_free_drift_makes_iteration_converge_immediately(
        e0 in small_ensemble(),
        seed in 0u64..1_000_000,
        c in -1.0f64..1.0,
    ) {
        // drift independent of positions: the first sweep already sits at the
        // explicit-scheme fixed point, so every contraction gap is zero
        let cs = CoefficientSet::new(DriftFamily::Constant(c), DiffusionFamily::Unit).unwrap();
        let grid = TimeGrid::unit(8).unwrap();
        let path = BrownianPath::sample(grid, seed, StreamRole::Path, 0, 0, 0);
        let (traj, deltas) = picard_solve(&cs, &e0, &path, 3).unwrap();
        prop_assert!(deltas.iter().all(|&d| d == 0.0), "{deltas:?}");
        let euler = euler_solve(&cs, &e0, &path).unwrap();
        for k in 0..=8 {
            prop_assert_eq!(traj.state(k).positions(), euler.state(k).positions());
        }
    }

    #[test]
    fn pairing_is_linear_in_the_test_function(
        e0 in small_ensemble(),
    ) {
        let two_phi_plus_psi = 2.0 * e0.pair_with(TestFunction::Square).unwrap()
            + e0.pair_with(TestFunction::Sin).unwrap();
        let direct: f64 = e0
            .weights()
            .iter()
            .zip(e0.positions())
            .map(|(w, &x)| w * (2.0 * TestFunction::Square.eval(x) + TestFunction::Sin.eval(x)))
            .sum();
        prop_assert!((two_phi_plus_psi - direct).abs() <= 1e-12);
    }
}
