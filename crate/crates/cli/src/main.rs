//! Command-line front end: model generation, single increments, loading
//! programs, residual checks and conic export.

mod files;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use trussprox::verify::RESIDUAL_TOL;
use trussprox::{
    barrel_vault, barrel_vault_top_nodes, export_socp, initial_state, random_truss, run_program,
    solve_from, update_state, Error, HistoryOptions, IncrementProblem, IncrementSolution,
    LoadingProgram, RandomTrussOptions, SolverConfig, StateSnapshot, StepMode, TrussModel,
};

use crate::files::{parse_law, read_load, read_solution, write_load, write_solution, CliResult};

#[derive(Parser)]
#[command(
    name = "trussprox",
    version,
    about = "Elastoplastic truss analysis by proximal gradient methods"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a barrel-vault model (or a random test truss with --seed).
    Generate(GenerateArgs),
    /// Solve one load increment.
    Solve(SolveArgs),
    /// Run a loading program from the virgin state.
    Run(RunArgs),
    /// Report optimality residuals of a solution file.
    Verify(VerifyArgs),
    /// Write the equivalent second-order cone program as JSON.
    ExportSocp(ExportArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum LoadCase {
    /// Vertical 250/NX kN at every top node.
    ExampleI,
    /// Vertical 200/NX kN and +Y 40/NX kN at every top node.
    ExampleIi,
}

#[derive(Args)]
struct GenerateArgs {
    #[arg(long, required_unless_present = "seed")]
    nx: Option<usize>,
    #[arg(long, required_unless_present = "seed")]
    ny: Option<usize>,
    #[arg(long)]
    out: PathBuf,
    /// Also write a load vector for the barrel vault.
    #[arg(long, value_enum, requires = "load_out", conflicts_with = "seed")]
    load_case: Option<LoadCase>,
    #[arg(long, requires = "load_case")]
    load_out: Option<PathBuf>,
    /// Generate a random truss with normalized stiffness instead.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value_t = 3)]
    free_nodes: usize,
    #[arg(long, default_value_t = 10)]
    members: usize,
    #[arg(long)]
    planar: bool,
}

#[derive(Clone, Copy, ValueEnum)]
enum StepArg {
    Exact,
    Gershgorin,
}

#[derive(Args)]
struct SolverArgs {
    #[arg(long, value_enum, default_value = "exact")]
    step_mode: StepArg,
    /// Tolerance on the iterate change (m).
    #[arg(long, default_value_t = 1e-8)]
    eps: f64,
    #[arg(long, default_value_t = 1_000_000)]
    max_iter: usize,
}

impl SolverArgs {
    fn config(&self) -> SolverConfig {
        let step = match self.step_mode {
            StepArg::Exact => StepMode::Exact,
            StepArg::Gershgorin => StepMode::Gershgorin,
        };
        SolverConfig::apgm()
            .with_step(step)
            .with_epsilon(self.eps)
            .with_max_iter(self.max_iter)
    }
}

#[derive(Args)]
struct StateArgs {
    /// State snapshot JSON at the start of the step.
    #[arg(long, conflicts_with = "r0")]
    state: Option<PathBuf>,
    /// Uniform initial yield force (N) for a virgin state.
    #[arg(long, required_unless_present = "state")]
    r0: Option<f64>,
}

impl StateArgs {
    fn load(&self, model: &TrussModel) -> CliResult<StateSnapshot> {
        match (&self.state, self.r0) {
            (Some(path), _) => Ok(StateSnapshot::from_json(&std::fs::read_to_string(path)?)?),
            (None, Some(r0)) => Ok(initial_state(model, &vec![r0; model.num_members()])?),
            (None, None) => Err("either --state or --r0 is required".into()),
        }
    }
}

#[derive(Args)]
struct SolveArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    state: StateArgs,
    /// JSON array of nodal forces (N), the total load at the end of the step.
    #[arg(long)]
    load: PathBuf,
    #[arg(long, default_value = "isotropic")]
    law: String,
    #[command(flatten)]
    solver: SolverArgs,
    /// Solution CSV (block,index,value).
    #[arg(long)]
    out: PathBuf,
    /// Write the updated state snapshot.
    #[arg(long)]
    state_out: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long, default_value = "mixed")]
    law: String,
    #[arg(long)]
    r0: f64,
    /// Loading program JSON.
    #[arg(long)]
    program: PathBuf,
    /// History CSV.
    #[arg(long)]
    history: PathBuf,
    /// Members whose stress and strain are recorded, e.g. 0,5,9.
    #[arg(long, value_delimiter = ',')]
    members: Vec<usize>,
    /// DOFs whose displacement is recorded.
    #[arg(long, value_delimiter = ',')]
    dofs: Vec<usize>,
    #[command(flatten)]
    solver: SolverArgs,
    #[arg(long)]
    state_out: Option<PathBuf>,
}

#[derive(Args)]
struct VerifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    solution: PathBuf,
    #[command(flatten)]
    state: StateArgs,
    #[arg(long)]
    load: PathBuf,
    #[arg(long, default_value = "isotropic")]
    law: String,
    /// Largest acceptable scaled residual.
    #[arg(long, default_value_t = RESIDUAL_TOL)]
    tol: f64,
}

#[derive(Args)]
struct ExportArgs {
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    state: StateArgs,
    #[arg(long)]
    load: PathBuf,
    #[arg(long, default_value = "isotropic")]
    law: String,
    #[arg(long)]
    out: PathBuf,
}

const EXIT_INVALID: u8 = 1;
const EXIT_NOT_CONVERGED: u8 = 2;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err) => {
            let code = if err.use_stderr() { EXIT_INVALID } else { 0 };
            let _ = err.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Generate(args) => generate(args),
        Command::Solve(args) => solve(args),
        Command::Run(args) => run(args),
        Command::Verify(args) => verify(args),
        Command::ExportSocp(args) => export(args),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err}");
            ExitCode::from(EXIT_INVALID)
        }
    }
}

fn generate(args: GenerateArgs) -> CliResult<ExitCode> {
    let model = match args.seed {
        Some(seed) => random_truss(&RandomTrussOptions {
            free_nodes: args.free_nodes,
            members: args.members,
            planar: args.planar,
            stiffness_range: Some((0.5, 2.0)),
            seed,
        })?,
        None => {
            let (nx, ny) = (args.nx.unwrap_or_default(), args.ny.unwrap_or_default());
            let model = barrel_vault(nx, ny)?;
            if let (Some(case), Some(path)) = (args.load_case, &args.load_out) {
                let per_node = match case {
                    LoadCase::ExampleI => [0.0, 0.0, -250e3 / nx as f64],
                    LoadCase::ExampleIi => [0.0, 40e3 / nx as f64, -200e3 / nx as f64],
                };
                write_load(
                    path,
                    &model.nodal_load(barrel_vault_top_nodes(nx, ny), per_node),
                )?;
            }
            model
        }
    };
    model.save(&args.out)?;
    println!(
        "members={} dofs={} nodes={}",
        model.num_members(),
        model.num_dofs(),
        model.num_nodes()
    );
    Ok(ExitCode::SUCCESS)
}

fn report(sol: &IncrementSolution) {
    println!(
        "iterations={} termination={:?} objective={} step_size={} max_scaled_residual={:.3e}",
        sol.iterations, sol.termination, sol.objective, sol.step_size, sol.residuals.max_scaled
    );
}

fn solve(args: SolveArgs) -> CliResult<ExitCode> {
    let model = TrussModel::load(&args.model)?;
    let state = args.state.load(&model)?;
    let law = parse_law(&args.law, &model, &state.r_initial)?;
    let f = read_load(&args.load, model.num_dofs())?;
    let problem = IncrementProblem::new(&model, &state, &law, f)?;
    let sol = solve_from(&problem, &args.solver.config(), None)?;
    write_solution(std::fs::File::create(&args.out)?, &sol.point)?;
    if let Some(path) = &args.state_out {
        std::fs::write(path, update_state(&model, &state, &sol, &law)?.to_json()?)?;
    }
    report(&sol);
    if sol.converged() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("error: no convergence within {} iterations", sol.iterations);
        Ok(ExitCode::from(EXIT_NOT_CONVERGED))
    }
}

fn run(args: RunArgs) -> CliResult<ExitCode> {
    let model = TrussModel::load(&args.model)?;
    let r0 = vec![args.r0; model.num_members()];
    let law = parse_law(&args.law, &model, &r0)?;
    let program = LoadingProgram::load(&args.program)?;
    let opts = HistoryOptions {
        members: args.members,
        dofs: args.dofs,
    };
    match run_program(&model, &law, &r0, &program, &args.solver.config(), &opts) {
        Ok(history) => {
            history.save_csv(&args.history)?;
            if let Some(path) = &args.state_out {
                std::fs::write(path, history.final_state.to_json()?)?;
            }
            let total: usize = history.rows.iter().map(|r| r.iterations).sum();
            println!("steps={} total_iterations={total}", history.rows.len());
            Ok(ExitCode::SUCCESS)
        }
        Err(Error::StepFailed { step, history }) => {
            history.save_csv(&args.history)?;
            eprintln!(
                "error: step {} did not converge; history of {} completed steps written",
                step + 1,
                history.rows.len()
            );
            Ok(ExitCode::from(EXIT_NOT_CONVERGED))
        }
        Err(err) => Err(err.into()),
    }
}

fn verify(args: VerifyArgs) -> CliResult<ExitCode> {
    let model = TrussModel::load(&args.model)?;
    let state = args.state.load(&model)?;
    let law = parse_law(&args.law, &model, &state.r_initial)?;
    let f = read_load(&args.load, model.num_dofs())?;
    let problem = IncrementProblem::new(&model, &state, &law, f)?;
    let point = read_solution(
        &args.solution,
        model.num_dofs(),
        model.num_members(),
        law.is_piecewise(),
    )?;
    let sol = IncrementSolution::evaluate(&problem, point);
    let r = sol.residuals;
    println!(
        "equilibrium_inf={:.3e} yield_violation_inf={:.3e} complementarity_inf={:.3e} \
         flow_consistency_inf={:.3e} max_scaled={:.3e}",
        r.equilibrium_inf,
        r.yield_violation_inf,
        r.complementarity_inf,
        r.flow_consistency_inf,
        r.max_scaled
    );
    if r.passes(args.tol) {
        println!("ok");
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!(
            "error: scaled residual {:.3e} exceeds {:.1e}",
            r.max_scaled, args.tol
        );
        Ok(ExitCode::from(EXIT_INVALID))
    }
}

fn export(args: ExportArgs) -> CliResult<ExitCode> {
    let model = TrussModel::load(&args.model)?;
    let state = args.state.load(&model)?;
    let law = parse_law(&args.law, &model, &state.r_initial)?;
    let f = read_load(&args.load, model.num_dofs())?;
    let problem = IncrementProblem::new(&model, &state, &law, f)?;
    let socp = export_socp(&problem)?;
    std::fs::write(&args.out, socp.to_json()?)?;
    println!(
        "variables={} equalities={} cones={}",
        socp.num_variables,
        socp.equalities.len(),
        socp.cones.len()
    );
    Ok(ExitCode::SUCCESS)
}
