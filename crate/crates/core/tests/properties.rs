use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trussprox::verify::prox_fixed_point_residual;
use trussprox::*;

fn instance(
    seed: u64,
    free_nodes: usize,
    members: usize,
    planar: bool,
) -> (TrussModel, Vec<f64>, Vec<f64>) {
    let model = random_truss(&RandomTrussOptions {
        free_nodes,
        members,
        planar,
        stiffness_range: Some((0.5, 2.0)),
        seed,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabcdef);
    let r0 = (0..model.num_members())
        .map(|_| rng.gen_range(0.5..2.0))
        .collect();
    let scale = rng.gen_range(0.2..5.0);
    let f = (0..model.num_dofs())
        .map(|_| scale * rng.gen_range(-1.0..1.0))
        .collect();
    (model, r0, f)
}

fn law_for(kind: u8, model: &TrussModel, r0: &[f64]) -> HardeningLaw {
    match kind % 3 {
        0 => HardeningLaw::isotropic_ratio(model, 0.1),
        1 => HardeningLaw::mixed_ratio(model, 0.5, 0.1),
        _ => HardeningLaw::piecewise_ratio(model, 0.1, 0.5, r0, 1.3),
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn solver_output_is_a_prox_fixed_point(seed in 0u64..10_000, kind in 0u8..3) {
        let (model, r0, f) = instance(seed, 3, 11, false);
        let law = law_for(kind, &model, &r0);
        let state = initial_state(&model, &r0).unwrap();
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        let cfg = SolverConfig::apgm();
        let sol = solve_from(&prob, &cfg, None).unwrap();
        prop_assert!(sol.converged());
        let res = prox_fixed_point_residual(&prob, &sol.point, sol.step_size);
        prop_assert!(res <= 10.0 * cfg.epsilon, "residual {res}");
        prop_assert!(sol.objective <= sol.initial_objective);
    }

    #[test]
    fn small_instances_match_brute_force(seed in 0u64..10_000, kind in 0u8..3) {
        let piecewise = kind % 3 == 2;
        let (model, r0, f) = if piecewise {
            instance(seed, 2, 4, true)
        } else {
            instance(seed, 2, 6, true)
        };
        let law = law_for(kind, &model, &r0);
        let state = initial_state(&model, &r0).unwrap();
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        let oracle = brute_force_solve(&prob).unwrap();
        prop_assert!(oracle.residuals.max_scaled <= 1e-9, "{:?}", oracle.residuals);
        let sol = solve_from(&prob, &SolverConfig::apgm(), None).unwrap();
        prop_assert!(rel_diff(sol.objective, oracle.objective).abs() <= 1e-6);
        prop_assert!(sol.residuals.max_scaled <= 1e-6, "{:?}", sol.residuals);
    }

    #[test]
    fn gershgorin_bounds_exact_constant(seed in 0u64..10_000, kind in 0u8..3) {
        let (model, r0, f) = instance(seed, 4, 16, seed % 2 == 0);
        let law = law_for(kind, &model, &r0);
        let state = initial_state(&model, &r0).unwrap();
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        prop_assert!(prob.lipschitz_gershgorin() >= prob.lipschitz_exact().unwrap());
    }

    #[test]
    fn state_update_is_monotone(seed in 0u64..10_000, kind in 0u8..3) {
        let (model, r0, f) = instance(seed, 3, 10, false);
        let law = law_for(kind, &model, &r0);
        let state = initial_state(&model, &r0).unwrap();
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        let sol = solve_from(&prob, &SolverConfig::apgm(), None).unwrap();
        let next = update_state(&model, &state, &sol, &law).unwrap();
        for i in 0..model.num_members() {
            prop_assert!(next.r[i] >= state.r[i]);
            prop_assert!(next.gamma_acc[i] >= state.gamma_acc[i]);
        }
        prop_assert_eq!(next.step_index, 1);
    }
}

#[test]
fn solves_are_deterministic() {
    let (model, r0, f) = instance(42, 4, 15, false);
    let law = HardeningLaw::isotropic_ratio(&model, 0.1);
    let state = initial_state(&model, &r0).unwrap();
    let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
    let cfg = SolverConfig::apgm().with_history();
    let a = apgm_solve(&prob, &cfg).unwrap();
    let b = apgm_solve(&prob, &cfg).unwrap();
    assert_eq!(a.point, b.point);
    assert_eq!(a.history, b.history);
    assert_eq!(a.iterations, b.iterations);
}

#[test]
fn acceleration_usually_beats_plain_gradient() {
    let mut wins = 0;
    for seed in 0..50 {
        let (model, r0, f) = instance(seed, 6, 24, false);
        let law = HardeningLaw::isotropic_ratio(&model, 0.1);
        let state = initial_state(&model, &r0).unwrap();
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        let fast = apgm_solve(&prob, &SolverConfig::apgm()).unwrap();
        let slow = pgm_solve(&prob, &SolverConfig::pgm()).unwrap();
        if fast.iterations < slow.iterations {
            wins += 1;
        }
    }
    assert!(wins >= 45, "APGM faster on {wins} of 50");
}

#[test]
fn pgm_is_monotone_on_random_instances() {
    for seed in 0..10 {
        let (model, r0, f) = instance(seed, 3, 12, false);
        let law = HardeningLaw::mixed_ratio(&model, 0.5, 0.1);
        let state = initial_state(&model, &r0).unwrap();
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        let sol = pgm_solve(&prob, &SolverConfig::pgm().with_history()).unwrap();
        let h = sol.history.unwrap();
        let tol = 1e-12 * sol.initial_objective.abs().max(1.0);
        assert!(h[0] <= sol.initial_objective + tol);
        assert!(h.windows(2).all(|w| w[1] <= w[0] + tol), "seed {seed}");
    }
}

#[test]
fn gershgorin_steps_reach_the_same_solution() {
    let (model, r0, f) = instance(9, 4, 16, false);
    let law = HardeningLaw::isotropic_ratio(&model, 0.1);
    let state = initial_state(&model, &r0).unwrap();
    let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
    let exact = apgm_solve(&prob, &SolverConfig::apgm().with_epsilon(1e-11)).unwrap();
    let bound = apgm_solve(
        &prob,
        &SolverConfig::apgm()
            .with_epsilon(1e-11)
            .with_step(StepMode::Gershgorin),
    )
    .unwrap();
    assert!(bound.step_size <= exact.step_size);
    assert!(rel_diff(bound.objective, exact.objective).abs() < 1e-9);
}
