use std::process::ExitCode;
use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use trussprox::verify::{
    finite_difference_gradient, sign_pattern, solve_active_pattern, RESIDUAL_TOL,
};
use trussprox::*;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        pass,
        detail: detail.into(),
    }
}

fn unit_bar() -> TrussModel {
    TrussModel::build(
        vec![[0.0; 3], [1.0, 0.0, 0.0]],
        vec![Member::new(0, 1, 1e6, 1.0)],
        vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)],
    )
    .unwrap()
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0_f64, |a, x| a.max(x.abs()))
}

const TABLE: [(usize, usize, usize); 13] = [
    (10, 800, 597),
    (20, 3200, 2397),
    (30, 7200, 5397),
    (40, 12800, 9597),
    (50, 20000, 14997),
    (60, 28800, 21597),
    (70, 39200, 29397),
    (80, 51200, 38397),
    (90, 64800, 48597),
    (100, 80000, 59997),
    (110, 96800, 72597),
    (120, 115200, 86397),
    (130, 135200, 101397),
];

fn benchmark_geometry() -> Outcome {
    let start = Instant::now();
    let mut bad = Vec::new();
    for (n, m, d) in TABLE {
        let model = barrel_vault(n, n).unwrap();
        if (model.num_members(), model.num_dofs()) != (m, d) {
            bad.push(format!(
                "({n},{n}) -> ({}, {})",
                model.num_members(),
                model.num_dofs()
            ));
        }
    }
    let secs = start.elapsed().as_secs_f64();
    outcome(
        bad.is_empty() && secs < 5.0,
        format!(
            "13 rows, {} mismatches {bad:?}, {secs:.2} s (limit 5 s)",
            bad.len()
        ),
    )
}

fn single_bar_suite() -> Outcome {
    let tol = 1e-6;
    let model = unit_bar();
    let cfg = SolverConfig::apgm().with_epsilon(1e-11);
    let mut errs = Vec::new();
    let mut check = |name: &str, got: f64, want: f64| {
        if (got - want).abs() > tol {
            errs.push(format!("{name}: {got} vs {want}"));
        }
    };

    let state = initial_state(&model, &[1.0]).unwrap();
    let iso = HardeningLaw::LinearIsotropic { h: vec![0.1] };
    let prob = IncrementProblem::new(&model, &state, &iso, vec![1.5]).unwrap();
    let sol = apgm_solve(&prob, &cfg).unwrap();
    check("linear v", sol.point.v[0], 6.5);
    check("linear p", sol.point.p[0], 5.0);

    let mixed = HardeningLaw::Mixed {
        theta: 0.5,
        h: vec![0.1],
    };
    let prob = IncrementProblem::new(&model, &state, &mixed, vec![1.5]).unwrap();
    let sol = apgm_solve(&prob, &cfg).unwrap();
    let next = update_state(&model, &state, &sol, &mixed).unwrap();
    check("mixed R", next.r[0], 1.25);
    check("mixed beta", next.beta[0], 0.25);

    let pw = HardeningLaw::PiecewiseLinear {
        h1: vec![0.1],
        h2: vec![0.05],
        r_s: vec![1.3],
    };
    let prob = IncrementProblem::new(&model, &state, &pw, vec![1.5]).unwrap();
    let sol = apgm_piecewise_solve(&prob, &cfg).unwrap();
    check("piecewise v", sol.point.v[0], 8.5);
    check("piecewise p", sol.point.p[0], 5.0);
    check("piecewise s", sol.point.s[0], 2.0);

    let prog = LoadingProgram::proportional("f", &[1.0], &[1.5, 0.5]);
    let hist = run_program(
        &model,
        &iso,
        &[1.0],
        &prog,
        &cfg,
        &HistoryOptions::default(),
    )
    .unwrap();
    check("unloading dv", hist.last_solution.unwrap().point.v[0], -1.0);

    outcome(
        errs.is_empty(),
        format!("8 values within {tol:e}; failures {errs:?}"),
    )
}

fn random_small(seed: u64) -> (TrussModel, StateSnapshot, HardeningLaw, Vec<f64>) {
    let model = random_truss(&RandomTrussOptions {
        free_nodes: 2,
        members: 6,
        planar: true,
        stiffness_range: Some((0.5, 2.0)),
        seed,
    })
    .unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(31) + 7);
    let r0: Vec<f64> = (0..model.num_members())
        .map(|_| rng.gen_range(0.5..2.0))
        .collect();
    let state = initial_state(&model, &r0).unwrap();
    let law = HardeningLaw::isotropic_ratio(&model, 0.1);
    let magnitude = rng.gen_range(0.1..6.0);
    let f = (0..model.num_dofs())
        .map(|_| magnitude * rng.gen_range(-1.0..1.0))
        .collect();
    (model, state, law, f)
}

fn oracle_equivalence() -> Outcome {
    let start = Instant::now();
    let cfg = SolverConfig::apgm();
    let mut worst_rel = 0.0_f64;
    let mut worst_kkt = 0.0_f64;
    let mut plastic = 0;
    let mut max_size = (0, 0);
    for seed in 0..50 {
        let (model, state, law, f) = random_small(seed);
        max_size = (
            max_size.0.max(model.num_members()),
            max_size.1.max(model.num_dofs()),
        );
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        let oracle = brute_force_solve(&prob).unwrap();
        let sol = apgm_solve(&prob, &cfg).unwrap();
        if oracle.point.p.iter().any(|p| *p != 0.0) {
            plastic += 1;
        }
        worst_rel = worst_rel.max(rel_diff(sol.objective, oracle.objective).abs());
        worst_kkt = worst_kkt.max(sol.residuals.max_scaled);
    }
    let secs = start.elapsed().as_secs_f64();
    let sizes_ok = max_size.0 <= 6 && max_size.1 <= 4;
    outcome(
        worst_rel <= 1e-6 && worst_kkt <= RESIDUAL_TOL && secs < 60.0 && sizes_ok && plastic > 0 && plastic < 50,
        format!(
            "50 instances (max m={}, d={}), {plastic} plastic; max |rel_diff| {worst_rel:.2e} (limit 1e-6), \
             max scaled KKT {worst_kkt:.2e} (limit 1e-6), {secs:.2} s (limit 60 s)",
            max_size.0, max_size.1
        ),
    )
}

fn gradient_correctness() -> Outcome {
    let mut worst = 0.0_f64;
    for seed in 0..10u64 {
        let model = random_truss(&RandomTrussOptions {
            free_nodes: 2 + (seed as usize % 3),
            members: 12,
            planar: seed % 2 == 0,
            stiffness_range: Some((0.5, 2.0)),
            seed: 100 + seed,
        })
        .unwrap();
        let m = model.num_members();
        let law = match seed % 3 {
            0 => HardeningLaw::isotropic_ratio(&model, 0.1),
            1 => HardeningLaw::mixed_ratio(&model, 0.5, 0.1),
            _ => HardeningLaw::piecewise_ratio(&model, 0.1, 0.5, &vec![1.0; m], 1.3),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut state = initial_state(&model, &vec![1.0; m]).unwrap();
        state
            .q
            .iter_mut()
            .for_each(|q| *q = rng.gen_range(-0.5..0.5));
        if !law.is_piecewise() {
            state
                .beta
                .iter_mut()
                .for_each(|b| *b = rng.gen_range(-0.2..0.2));
        }
        let f: Vec<f64> = (0..model.num_dofs())
            .map(|_| rng.gen_range(-2.0..2.0))
            .collect();
        let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
        for _ in 0..20 {
            let mut x = prob.zero_point();
            x.iter_mut().for_each(|z| *z = rng.gen_range(-1.0..1.0));
            let g = prob.gradient(&x);
            let fd = finite_difference_gradient(&prob, &x, 1e-5);
            let rel = g.max_abs_diff(&fd) / inf_norm(&g.to_vec()).max(1.0);
            worst = worst.max(rel);
        }
    }
    outcome(
        worst < 1e-5,
        format!("200 points on 10 models, max relative error {worst:.2e} (limit 1e-5)"),
    )
}

fn example_i(nx: usize, ny: usize) -> (TrussModel, StateSnapshot, HardeningLaw, Vec<f64>) {
    let model = barrel_vault(nx, ny).unwrap();
    let law = HardeningLaw::isotropic_ratio(&model, 0.1);
    let state = initial_state(&model, &vec![100e3; model.num_members()]).unwrap();
    let f = model.nodal_load(
        barrel_vault_top_nodes(nx, ny),
        [0.0, 0.0, -250e3 / nx as f64],
    );
    (model, state, law, f)
}

fn step_size_oracles() -> Outcome {
    let mut violations = 0;
    let mut checked = 0;
    let model = unit_bar();
    let state = initial_state(&model, &[1.0]).unwrap();
    let mut problems_ok = |prob: &IncrementProblem<'_>| {
        checked += 1;
        if prob.lipschitz_gershgorin() < prob.lipschitz_exact().unwrap() {
            violations += 1;
        }
    };
    let iso = HardeningLaw::LinearIsotropic { h: vec![0.1] };
    problems_ok(&IncrementProblem::new(&model, &state, &iso, vec![1.0]).unwrap());
    for seed in 0..10 {
        let (model, state, law, f) = random_small(seed);
        problems_ok(&IncrementProblem::new(&model, &state, &law, f).unwrap());
        let pw = HardeningLaw::piecewise_ratio(&model, 0.1, 0.5, &state.r_initial, 1.3);
        problems_ok(
            &IncrementProblem::new(&model, &state, &pw, vec![0.0; model.num_dofs()]).unwrap(),
        );
    }
    let (model, state, law, f) = example_i(10, 10);
    let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
    let l = prob.lipschitz_exact().unwrap();
    let lg = prob.lipschitz_gershgorin();
    problems_ok(&prob);
    let ratio = lg / l;
    outcome(
        violations == 0 && (1.0..=3.0).contains(&ratio),
        format!("L' >= L on {checked} models ({violations} violations); barrel (10,10) L'/L = {ratio:.3} (band [1, 3])"),
    )
}

fn acceleration() -> Outcome {
    let start = Instant::now();
    let (model, state, law, f) = example_i(10, 10);
    let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();
    let apgm = apgm_solve(&prob, &SolverConfig::apgm()).unwrap();
    let pgm = pgm_solve(&prob, &SolverConfig::pgm()).unwrap();
    let secs = start.elapsed().as_secs_f64();
    let yielded = apgm.point.p.iter().filter(|p| **p != 0.0).count();
    outcome(
        apgm.converged() && apgm.iterations < pgm.iterations && (100..=5000).contains(&apgm.iterations) && secs < 60.0,
        format!(
            "APGM-E {} iterations ({:?}, {yielded} yielded members), PGM {} iterations ({:?}); band [100, 5000], {secs:.2} s (limit 60 s)",
            apgm.iterations, apgm.termination, pgm.iterations, pgm.termination
        ),
    )
}

fn warm_start() -> Outcome {
    let (model, _, law, f) = example_i(10, 10);
    let r0 = vec![100e3; model.num_members()];
    let multipliers: Vec<f64> = (1..=12).map(|t| 0.05 * t as f64).collect();
    let prog = LoadingProgram::proportional("example_i", &f, &multipliers);
    let cfg = SolverConfig::apgm();
    let hist = run_program(&model, &law, &r0, &prog, &cfg, &HistoryOptions::default()).unwrap();
    let iters: Vec<usize> = hist.rows.iter().map(|r| r.iterations).collect();
    let elastic = hist.final_state.gamma_acc.iter().all(|g| *g == 0.0);

    let state1 = {
        let state0 = initial_state(&model, &r0).unwrap();
        let f1 = prog.load_vector(0, model.num_dofs());
        let prob = IncrementProblem::new(&model, &state0, &law, f1).unwrap();
        let sol = apgm_solve(&prob, &cfg).unwrap();
        update_state(&model, &state0, &sol, &law).unwrap()
    };
    let f2 = prog.load_vector(1, model.num_dofs());
    let prob = IncrementProblem::new(&model, &state1, &law, f2).unwrap();
    let cold = apgm_solve(&prob, &cfg).unwrap();
    let slow = iters[1..].iter().filter(|&&n| n > 2).count();
    outcome(
        elastic && iters[1] <= 2 && cold.iterations > iters[1],
        format!(
            "elastic ramp of equal increments: first repeat {} iterations warm (limit 2), {} cold; \
             per-step {iters:?} ({slow} of {} repeats above 2)",
            iters[1],
            cold.iterations,
            iters.len() - 1
        ),
    )
}

fn first_within(history: &[f64], optimum: f64, tol: f64) -> Option<usize> {
    history
        .iter()
        .position(|&v| rel_diff(v, optimum).abs() <= tol)
        .map(|i| i + 1)
}

fn restart_effectiveness() -> Outcome {
    let model = random_truss(&RandomTrussOptions {
        free_nodes: 12,
        members: 50,
        planar: false,
        stiffness_range: Some((0.5, 2.0)),
        seed: 2024,
    })
    .unwrap();
    let m = model.num_members();
    let mut rng = ChaCha8Rng::seed_from_u64(77);
    let r0: Vec<f64> = (0..m).map(|_| rng.gen_range(0.5..2.0)).collect();
    let state = initial_state(&model, &r0).unwrap();
    let law = HardeningLaw::isotropic_ratio(&model, 0.1);
    let f: Vec<f64> = (0..model.num_dofs())
        .map(|_| rng.gen_range(-3.0..3.0))
        .collect();
    let prob = IncrementProblem::new(&model, &state, &law, f).unwrap();

    // optimum: polish the active set of a long run by an exact pattern solve
    let long = apgm_solve(&prob, &SolverConfig::apgm().with_epsilon(1e-13)).unwrap();
    let pattern = sign_pattern(&long.point, 0.0);
    let exact = solve_active_pattern(&prob, &pattern).unwrap().unwrap();
    let polished = IncrementSolution::evaluate(&prob, exact);
    let optimum = polished.objective.min(long.objective);
    let yielded = pattern.iter().filter(|s| **s != 0).count();

    let run = |cfg: SolverConfig| {
        let sol = solve_from(&prob, &cfg.with_epsilon(1e-12).with_history(), None).unwrap();
        first_within(sol.history.as_deref().unwrap(), optimum, 1e-6)
    };
    let restart = run(SolverConfig::apgm());
    let no_restart = run(SolverConfig {
        restart: false,
        ..SolverConfig::apgm()
    });
    let pgm = run(SolverConfig::pgm());
    let pass = match (restart, no_restart, pgm) {
        (Some(a), Some(b), Some(c)) => a < b && a < c,
        (Some(a), None, Some(c)) => a < c,
        (Some(a), Some(b), None) => a < b,
        (Some(_), None, None) => true,
        _ => false,
    };
    outcome(
        pass && polished.residuals.max_scaled <= 1e-9,
        format!(
            "m={m}, {yielded} yielded; iterations to 1e-6 of optimum: restart {restart:?}, no restart {no_restart:?}, PGM {pgm:?}; \
             optimum residual {:.1e}",
            polished.residuals.max_scaled
        ),
    )
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 8] = [
        ("1 benchmark geometry", benchmark_geometry),
        ("2 analytic single-bar suite", single_bar_suite),
        ("3 oracle equivalence", oracle_equivalence),
        ("4 gradient correctness", gradient_correctness),
        ("5 step-size oracles", step_size_oracles),
        ("6 acceleration", acceleration),
        ("7 warm start", warm_start),
        ("8 restart effectiveness", restart_effectiveness),
    ];
    let mut failed = 0;
    for (name, run) in criteria {
        let out = run();
        if !out.pass {
            failed += 1;
        }
        println!(
            "criterion {name}: {} - {}",
            if out.pass { "PASS" } else { "FAIL" },
            out.detail
        );
    }
    println!("criterion 9 timing tables: NOT REPRODUCIBLE - hardware and external-solver specific, covered by criteria 3-8");
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criteria failed");
        ExitCode::FAILURE
    }
}
