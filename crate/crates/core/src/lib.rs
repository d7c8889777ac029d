//! Elastoplastic incremental analysis of trusses by accelerated proximal
//! gradient methods.
//!
//! One load step is a convex problem in the displacement increment `v` and
//! plastic elongation increments `p` (and `s` for piecewise-linear
//! hardening): a smooth quadratic plus a weighted `ℓ1` term. The solvers in
//! [`solvers`] alternate a gradient step with soft thresholding, optionally
//! with momentum and adaptive restart. [`driver`] runs whole loading paths.
//!
//! ```
//! use trussprox::{initial_state, apgm_solve, HardeningLaw, IncrementProblem, Member, SolverConfig, TrussModel};
//!
//! let model = TrussModel::build(
//!     vec![[0.0; 3], [1.0, 0.0, 0.0]],
//!     vec![Member::new(0, 1, 1e6, 1.0)],
//!     vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)],
//! )?;
//! let state = initial_state(&model, &[1.0])?;
//! let law = HardeningLaw::LinearIsotropic { h: vec![0.1] };
//! let problem = IncrementProblem::new(&model, &state, &law, vec![1.5])?;
//! let sol = apgm_solve(&problem, &SolverConfig::default())?;
//! assert!((sol.point.p[0] - 5.0).abs() < 1e-6);
//! # Ok::<(), trussprox::Error>(())
//! ```

pub mod driver;
pub mod energy;
pub mod error;
pub mod hardening;
pub mod model;
pub mod socp;
pub mod solvers;
pub mod sparse;
pub mod verify;

pub use driver::{
    run_program, solve_increment, AnalysisHistory, HistoryOptions, HistoryRow, LoadingProgram,
};
pub use energy::{IncrementProblem, Point};
pub use error::{Error, Result};
pub use hardening::{initial_state, update_state, HardeningLaw, StateSnapshot};
pub use model::{
    barrel_vault, barrel_vault_top_nodes, barrel_vault_with, random_truss, BarrelVaultOptions,
    BuildOptions, Member, ModelFile, RandomTrussOptions, TrussModel,
};
pub use socp::{export_socp, SocpExport};
pub use solvers::{
    apgm_piecewise_solve, apgm_solve, pgm_solve, soft_threshold, solve_from, IncrementSolution,
    SolverConfig, StepMode, Termination, TerminationNorm,
};
pub use sparse::CsrMatrix;
pub use verify::{
    brute_force_solve, kkt_residual, prox_fixed_point_residual, rel_diff, ResidualReport,
};
