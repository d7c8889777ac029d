//! Path-dependent analysis: loading programs, warm-started increments,
//! state evolution and history output.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::energy::{IncrementProblem, Point};
use crate::error::{Error, Result};
use crate::hardening::{initial_state, update_state, HardeningLaw, StateSnapshot};
use crate::model::TrussModel;
use crate::solvers::{solve_from, IncrementSolution, SolverConfig, StepMode};

/// Solver settings replacing the run configuration for one step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct StepOverride {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub epsilon: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_iter: Option<usize>,
}

/// Sequence of load states built from named load patterns.
///
/// The load of step `t` is `Σ multiplier · pattern`, the total external load
/// at the end of that step.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LoadingProgram {
    /// Pattern name to `(dof, value in N)` entries.
    pub patterns: BTreeMap<String, Vec<(usize, f64)>>,
    /// Per-step multipliers by pattern name.
    pub steps: Vec<BTreeMap<String, f64>>,
    /// Overrides keyed by zero-based step index.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub solver_overrides: BTreeMap<usize, StepOverride>,
}

impl LoadingProgram {
    /// Single pattern scaled by each multiplier in turn.
    pub fn proportional(name: &str, pattern: &[f64], multipliers: &[f64]) -> Self {
        let entries = pattern
            .iter()
            .enumerate()
            .filter(|(_, v)| **v != 0.0)
            .map(|(i, v)| (i, *v))
            .collect();
        Self {
            patterns: BTreeMap::from([(name.to_string(), entries)]),
            steps: multipliers
                .iter()
                .map(|&c| BTreeMap::from([(name.to_string(), c)]))
                .collect(),
            solver_overrides: BTreeMap::new(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn pattern_names(&self) -> Vec<&str> {
        self.patterns.keys().map(String::as_str).collect()
    }

    pub fn validate(&self, num_dofs: usize) -> Result<()> {
        if self.steps.is_empty() {
            return Err(Error::Program("at least one step is required".into()));
        }
        for (name, entries) in &self.patterns {
            for &(dof, value) in entries {
                if dof >= num_dofs {
                    return Err(Error::Program(format!(
                        "pattern {name:?} references DOF {dof}, model has {num_dofs}"
                    )));
                }
                if !value.is_finite() {
                    return Err(Error::Program(format!(
                        "pattern {name:?} has a non-finite value"
                    )));
                }
            }
        }
        for (t, step) in self.steps.iter().enumerate() {
            for (name, c) in step {
                if !self.patterns.contains_key(name) {
                    return Err(Error::Program(format!(
                        "step {t} references unknown pattern {name:?}"
                    )));
                }
                if !c.is_finite() {
                    return Err(Error::Program(format!(
                        "step {t} has a non-finite multiplier"
                    )));
                }
            }
        }
        if let Some(&t) = self
            .solver_overrides
            .keys()
            .find(|&&t| t >= self.steps.len())
        {
            return Err(Error::Program(format!("override for missing step {t}")));
        }
        Ok(())
    }

    /// Load vector of step `t`.
    pub fn load_vector(&self, t: usize, num_dofs: usize) -> Vec<f64> {
        let mut f = vec![0.0; num_dofs];
        for (name, c) in &self.steps[t] {
            for &(dof, value) in &self.patterns[name] {
                f[dof] += c * value;
            }
        }
        f
    }

    /// Multipliers of step `t` in [`pattern_names`](Self::pattern_names) order.
    pub fn multipliers(&self, t: usize) -> Vec<f64> {
        self.patterns
            .keys()
            .map(|name| self.steps[t].get(name).copied().unwrap_or(0.0))
            .collect()
    }
}

/// Quantities recorded per step.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct HistoryOptions {
    pub members: Vec<usize>,
    pub dofs: Vec<usize>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HistoryRow {
    /// One-based step number.
    pub step: usize,
    pub multipliers: Vec<f64>,
    /// Accumulated displacement of each recorded DOF (m).
    pub displacements: Vec<f64>,
    /// `q / a` of each recorded member (Pa).
    pub stress: Vec<f64>,
    /// Accumulated elongation over length of each recorded member.
    pub strain: Vec<f64>,
    pub iterations: usize,
    pub wall_time_s: f64,
    pub objective: f64,
    pub max_scaled_residual: f64,
    pub converged: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalysisHistory {
    pub pattern_names: Vec<String>,
    pub options: HistoryOptions,
    pub rows: Vec<HistoryRow>,
    /// State after the last completed step.
    pub final_state: StateSnapshot,
    /// Increment solution of the last completed step.
    pub last_solution: Option<IncrementSolution>,
    /// Step size used for every step.
    pub step_size: f64,
}

impl AnalysisHistory {
    /// Column names, in output order.
    pub fn header(&self) -> Vec<String> {
        let mut cols = vec!["step".to_string()];
        cols.extend(self.pattern_names.iter().map(|n| format!("mult_{n}")));
        cols.extend(self.options.dofs.iter().map(|d| format!("u_{d}")));
        cols.extend(self.options.members.iter().map(|i| format!("stress_{i}")));
        cols.extend(self.options.members.iter().map(|i| format!("strain_{i}")));
        for c in [
            "iterations",
            "wall_time_s",
            "objective",
            "max_scaled_residual",
            "converged",
        ] {
            cols.push(c.to_string());
        }
        cols
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record(self.header())?;
        for row in &self.rows {
            let mut rec = vec![row.step.to_string()];
            let nums = row
                .multipliers
                .iter()
                .chain(&row.displacements)
                .chain(&row.stress)
                .chain(&row.strain);
            rec.extend(nums.map(|v| v.to_string()));
            rec.push(row.iterations.to_string());
            rec.push(row.wall_time_s.to_string());
            rec.push(row.objective.to_string());
            rec.push(row.max_scaled_residual.to_string());
            rec.push(row.converged.to_string());
            w.write_record(rec)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        self.write_csv(std::fs::File::create(path)?)
    }
}

/// Solves one increment, starting from `initial_point` (zero when `None`).
pub fn solve_increment(
    problem: &IncrementProblem<'_>,
    config: &SolverConfig,
    initial_point: Option<&Point>,
) -> Result<IncrementSolution> {
    solve_from(problem, config, initial_point)
}

/// Runs `program` from the virgin state with yield radii `r0`.
///
/// The step size is resolved once on the first step and reused, since the
/// Hessian does not depend on the state. Each step after the first starts
/// from the previous increment.
pub fn run_program(
    model: &TrussModel,
    law: &HardeningLaw,
    r0: &[f64],
    program: &LoadingProgram,
    config: &SolverConfig,
    options: &HistoryOptions,
) -> Result<AnalysisHistory> {
    program.validate(model.num_dofs())?;
    config.validate()?;
    if let Some(&i) = options.members.iter().find(|&&i| i >= model.num_members()) {
        return Err(Error::InvalidParameter(format!(
            "history member {i} does not exist"
        )));
    }
    if let Some(&j) = options.dofs.iter().find(|&&j| j >= model.num_dofs()) {
        return Err(Error::InvalidParameter(format!(
            "history DOF {j} does not exist"
        )));
    }
    let areas = model.areas_m2();
    let lengths = model.lengths();
    let mut history = AnalysisHistory {
        pattern_names: program.patterns.keys().cloned().collect(),
        options: options.clone(),
        rows: Vec::with_capacity(program.num_steps()),
        final_state: initial_state(model, r0)?,
        last_solution: None,
        step_size: 0.0,
    };
    let mut step_config = config.clone();
    let mut warm: Option<Point> = None;

    for t in 0..program.num_steps() {
        let f = program.load_vector(t, model.num_dofs());
        let state = &history.final_state;
        let problem = IncrementProblem::new(model, state, law, f)?;
        if t == 0 {
            history.step_size = config.step_size(&problem)?;
            step_config.step_mode = StepMode::Fixed(history.step_size);
        }
        let mut cfg = step_config.clone();
        if let Some(ov) = program.solver_overrides.get(&t) {
            cfg.epsilon = ov.epsilon.unwrap_or(cfg.epsilon);
            cfg.max_iter = ov.max_iter.unwrap_or(cfg.max_iter);
        }
        let start = Instant::now();
        let sol = solve_increment(&problem, &cfg, warm.as_ref())?;
        let wall = start.elapsed().as_secs_f64();
        if !sol.converged() {
            return Err(Error::StepFailed {
                step: t,
                history: Box::new(history),
            });
        }
        let next = update_state(model, state, &sol, law)?;
        history.rows.push(HistoryRow {
            step: t + 1,
            multipliers: program.multipliers(t),
            displacements: options.dofs.iter().map(|&j| next.u[j]).collect(),
            stress: options
                .members
                .iter()
                .map(|&i| next.q[i] / areas[i])
                .collect(),
            strain: options
                .members
                .iter()
                .map(|&i| next.c_total[i] / lengths[i])
                .collect(),
            iterations: sol.iterations,
            wall_time_s: wall,
            objective: sol.objective,
            max_scaled_residual: sol.residuals.max_scaled,
            converged: true,
        });
        history.final_state = next;
        warm = Some(sol.point.clone());
        history.last_solution = Some(sol);
    }
    Ok(history)
}
