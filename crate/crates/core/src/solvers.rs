//! Soft-threshold prox and the proximal gradient solvers.
//!
//! All three solvers share one loop. Each iteration performs a single `B·x`
//! product (for the objective at the new iterate) and a single `Bᵀ·y` product
//! (for the gradient at the momentum point); `B·μ` is obtained by combining
//! the stored products of the last two iterates.

use crate::energy::IncrementProblem;
pub use crate::energy::Point;
use crate::error::{Error, Result};
use crate::verify::{kkt_residual, ResidualReport};

/// How the step size `α` is chosen.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum StepMode {
    /// `α = 1/L` with `L` from power iteration.
    Exact,
    /// `α = 1/L'` with the Gershgorin bound.
    Gershgorin,
    /// A given `α > 0`.
    Fixed(f64),
}

/// Norm of the iterate change used by the termination test.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum TerminationNorm {
    #[default]
    Inf,
    Euclidean,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SolverConfig {
    pub step_mode: StepMode,
    /// Tolerance on the iterate change (m).
    pub epsilon: f64,
    pub max_iter: usize,
    /// FISTA momentum. Off gives the plain proximal gradient method.
    pub accelerate: bool,
    /// Reset the momentum whenever the objective fails to decrease.
    pub restart: bool,
    /// Keep the objective value of every iterate.
    pub record_history: bool,
    pub norm: TerminationNorm,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            step_mode: StepMode::Exact,
            epsilon: 1e-8,
            max_iter: 1_000_000,
            accelerate: true,
            restart: true,
            record_history: false,
            norm: TerminationNorm::Inf,
        }
    }
}

impl SolverConfig {
    /// Accelerated method with adaptive restart.
    pub fn apgm() -> Self {
        Self::default()
    }

    /// Plain proximal gradient method.
    pub fn pgm() -> Self {
        Self {
            accelerate: false,
            restart: false,
            ..Self::default()
        }
    }

    pub fn with_step(mut self, step_mode: StepMode) -> Self {
        self.step_mode = step_mode;
        self
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_history(mut self) -> Self {
        self.record_history = true;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter("epsilon must be positive".into()));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidParameter(
                "max_iter must be at least 1".into(),
            ));
        }
        if let StepMode::Fixed(a) = self.step_mode {
            if !(a > 0.0 && a.is_finite()) {
                return Err(Error::InvalidParameter(
                    "fixed step must be positive".into(),
                ));
            }
        }
        Ok(())
    }

    /// Resolves the step size for `problem`.
    pub fn step_size(&self, problem: &IncrementProblem<'_>) -> Result<f64> {
        match self.step_mode {
            StepMode::Exact => Ok(1.0 / problem.lipschitz_exact()?),
            StepMode::Gershgorin => Ok(1.0 / problem.lipschitz_gershgorin()),
            StepMode::Fixed(a) => Ok(a),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Termination {
    Converged,
    MaxIter,
}

/// Result of one increment.
#[derive(Clone, Debug, PartialEq)]
pub struct IncrementSolution {
    pub point: Point,
    /// Plastic multiplier increment `|p| + |s|` (m).
    pub gamma: Vec<f64>,
    /// `g1 + g2` at `point` (J).
    pub objective: f64,
    /// Objective at the starting point.
    pub initial_objective: f64,
    pub iterations: usize,
    pub termination: Termination,
    pub residuals: ResidualReport,
    pub step_size: f64,
    /// Objective per iteration when requested.
    pub history: Option<Vec<f64>>,
}

impl IncrementSolution {
    /// Wraps a point with no solver information attached. Objective and
    /// residual fields are zero.
    pub fn from_point(point: Point) -> Self {
        let gamma = multiplier(&point);
        Self {
            point,
            gamma,
            objective: 0.0,
            initial_objective: 0.0,
            iterations: 0,
            termination: Termination::Converged,
            residuals: ResidualReport::default(),
            step_size: 0.0,
            history: None,
        }
    }

    /// Evaluates objective and residuals of `point` for `problem`.
    pub fn evaluate(problem: &IncrementProblem<'_>, point: Point) -> Self {
        let mut sol = Self::from_point(point);
        sol.objective = problem.objective(&sol.point);
        sol.residuals = kkt_residual(problem, &sol);
        sol
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Converged
    }
}

fn multiplier(x: &Point) -> Vec<f64> {
    x.p.iter()
        .enumerate()
        .map(|(i, p)| p.abs() + x.s.get(i).map_or(0.0, |s| s.abs()))
        .collect()
}

/// `sgn(wᵢ) max(|wᵢ| − τᵢ, 0)`, the prox of `Σ τᵢ |zᵢ|`.
pub fn soft_threshold(w: &[f64], tau: &[f64]) -> Vec<f64> {
    w.iter().zip(tau).map(|(&w, &t)| shrink(w, t)).collect()
}

#[inline]
pub fn shrink(w: f64, tau: f64) -> f64 {
    if w > tau {
        w - tau
    } else if w < -tau {
        w + tau
    } else {
        0.0
    }
}

/// Plain proximal gradient method from the zero point.
pub fn pgm_solve(
    problem: &IncrementProblem<'_>,
    config: &SolverConfig,
) -> Result<IncrementSolution> {
    let config = SolverConfig {
        accelerate: false,
        ..config.clone()
    };
    solve_from(problem, &config, None)
}

/// Accelerated proximal gradient method (with restart when enabled) for the
/// linear isotropic and mixed laws, from the zero point.
pub fn apgm_solve(
    problem: &IncrementProblem<'_>,
    config: &SolverConfig,
) -> Result<IncrementSolution> {
    if problem.is_piecewise() {
        return Err(Error::UnsupportedLaw(
            "apgm_solve needs a linear or mixed law",
        ));
    }
    solve_from(problem, config, None)
}

/// Accelerated proximal gradient method for the piecewise-linear law, from
/// the zero point.
pub fn apgm_piecewise_solve(
    problem: &IncrementProblem<'_>,
    config: &SolverConfig,
) -> Result<IncrementSolution> {
    if !problem.is_piecewise() {
        return Err(Error::UnsupportedLaw(
            "apgm_piecewise_solve needs the piecewise law",
        ));
    }
    solve_from(problem, config, None)
}

/// Runs the proximal gradient loop configured by `config`, starting at
/// `initial` (zero when `None`). The momentum point starts at the iterate.
///
/// Reaching `max_iter` is not an error: the last iterate is returned with
/// [`Termination::MaxIter`].
pub fn solve_from(
    problem: &IncrementProblem<'_>,
    config: &SolverConfig,
    initial: Option<&Point>,
) -> Result<IncrementSolution> {
    config.validate()?;
    let alpha = config.step_size(problem)?;
    let x0 = match initial {
        Some(x) => {
            problem.check_point(x)?;
            x.clone()
        }
        None => problem.zero_point(),
    };
    let b = problem.model().compatibility();
    let m = problem.num_members();
    let thresh_p: Vec<f64> = problem.weight_p().iter().map(|r| alpha * r).collect();
    let thresh_s: Vec<f64> = problem.weight_s().iter().map(|r| alpha * r).collect();

    let mut e = vec![0.0; m];
    let mut work = vec![0.0; m];
    let mut grad = problem.zero_point();

    let mut x_prev = x0;
    let mut bv_prev = vec![0.0; m];
    b.mul_vec(&x_prev.v, &mut bv_prev);
    problem.elastic_from_bv(&x_prev, &bv_prev, &mut e);
    let (g1, g2) = problem.split_objective(&x_prev, &e);
    let initial_objective = g1 + g2;
    let mut f_prev = initial_objective;

    let mut mu = x_prev.clone();
    let mut bmu = bv_prev.clone();
    let mut x = problem.zero_point();
    let mut bv = vec![0.0; m];
    let mut tau = 1.0_f64;
    let mut history = config.record_history.then(Vec::new);
    let mut termination = Termination::MaxIter;
    let mut iterations = 0;

    for l in 1..=config.max_iter {
        iterations = l;
        // gradient step at the momentum point, then prox
        problem.elastic_from_bv(&mu, &bmu, &mut e);
        problem.gradient_from_elastic(&mu, &e, &mut work, &mut grad);
        for j in 0..x.v.len() {
            x.v[j] = mu.v[j] - alpha * grad.v[j];
        }
        for i in 0..m {
            x.p[i] = shrink(mu.p[i] - alpha * grad.p[i], thresh_p[i]);
        }
        for i in 0..x.s.len() {
            x.s[i] = shrink(mu.s[i] - alpha * grad.s[i], thresh_s[i]);
        }

        b.mul_vec(&x.v, &mut bv);
        problem.elastic_from_bv(&x, &bv, &mut e);
        let (g1, g2) = problem.split_objective(&x, &e);
        let f_x = g1 + g2;
        if let Some(h) = history.as_mut() {
            h.push(f_x);
        }

        let mut tau_next = if config.accelerate {
            0.5 * (1.0 + (1.0 + 4.0 * tau * tau).sqrt())
        } else {
            1.0
        };
        let decreased = l == 1 || f_x < f_prev;
        if decreased || !config.restart {
            let c = (tau - 1.0) / tau_next;
            for ((m_i, &xi), &pi) in mu.iter_mut().zip(x.iter()).zip(x_prev.iter()) {
                *m_i = xi + c * (xi - pi);
            }
            for i in 0..m {
                bmu[i] = bv[i] + c * (bv[i] - bv_prev[i]);
            }
        } else {
            tau_next = 1.0;
            for (m_i, &xi) in mu.iter_mut().zip(x.iter()) {
                *m_i = xi;
            }
            bmu.copy_from_slice(&bv);
        }

        let change = match config.norm {
            TerminationNorm::Inf => x.max_abs_diff(&x_prev),
            TerminationNorm::Euclidean => x
                .iter()
                .zip(x_prev.iter())
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
        };
        std::mem::swap(&mut x, &mut x_prev);
        std::mem::swap(&mut bv, &mut bv_prev);
        f_prev = f_x;
        tau = tau_next;
        if change <= config.epsilon {
            termination = Termination::Converged;
            break;
        }
    }

    let point = x_prev;
    let mut sol = IncrementSolution {
        gamma: multiplier(&point),
        point,
        objective: f_prev,
        initial_objective,
        iterations,
        termination,
        residuals: ResidualReport::default(),
        step_size: alpha,
        history,
    };
    sol.residuals = kkt_residual(problem, &sol);
    Ok(sol)
}

/// `τ_{l+1} = ½ (1 + √(1 + 4 τ_l²))`
pub fn next_momentum(tau: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * tau * tau).sqrt())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hardening::{initial_state, HardeningLaw};
    use crate::model::{Member, TrussModel};
    use proptest::prelude::*;

    fn unit_bar() -> TrussModel {
        TrussModel::build(
            vec![[0.0; 3], [1.0, 0.0, 0.0]],
            vec![Member::new(0, 1, 1e6, 1.0)],
            vec![(0, 0), (0, 1), (0, 2), (1, 1), (1, 2)],
        )
        .unwrap()
    }

    #[test]
    fn shrink_cases() {
        assert_eq!(shrink(0.5, 1.0), 0.0);
        assert_eq!(shrink(2.0, 0.5), 1.5);
        assert_eq!(shrink(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(&[2.0, -0.1], &[0.5, 0.5]), vec![1.5, 0.0]);
    }

    #[test]
    fn shrink_matches_grid_search() {
        let cases = [
            (0.73, 0.2),
            (-1.4, 0.9),
            (0.3, 0.45),
            (2.2, 0.0),
            (-0.05, 0.01),
        ];
        for (w, tau) in cases {
            let step = 1e-4;
            let mut best = (f64::INFINITY, 0.0);
            let mut z = -4.0;
            while z <= 4.0 {
                let val = tau * f64::abs(z) + 0.5 * (z - w) * (z - w);
                if val < best.0 {
                    best = (val, z);
                }
                z += step;
            }
            assert!((shrink(w, tau) - best.1).abs() <= step, "w={w} tau={tau}");
        }
    }

    proptest! {
        #[test]
        fn shrink_satisfies_subgradient_inclusion(w in -10.0..10.0_f64, tau in 0.0..5.0_f64) {
            let z = shrink(w, tau);
            // 0 ∈ τ ∂|z| + (z − w)
            if z == 0.0 {
                prop_assert!((w - z).abs() <= tau + 1e-12);
            } else {
                prop_assert!((z - w + tau * z.signum()).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn momentum_sequence() {
        assert!((next_momentum(1.0) - (1.0 + 5.0_f64.sqrt()) / 2.0).abs() < 1e-15);
        assert!((next_momentum(1.0) - 1.6180339887).abs() < 1e-9);
    }

    fn bar_problem<'a>(
        model: &'a TrussModel,
        state: &'a crate::hardening::StateSnapshot,
        law: &'a HardeningLaw,
        f: f64,
    ) -> IncrementProblem<'a> {
        IncrementProblem::new(model, state, law, vec![f]).unwrap()
    }

    #[test]
    fn single_bar_solutions() {
        let model = unit_bar();
        let state = initial_state(&model, &[1.0]).unwrap();
        let law = HardeningLaw::LinearIsotropic { h: vec![0.1] };
        for cfg in [SolverConfig::pgm(), SolverConfig::apgm()] {
            let sol = solve_from(&bar_problem(&model, &state, &law, 0.5), &cfg, None).unwrap();
            assert!(sol.converged());
            assert!((sol.point.v[0] - 0.5).abs() < 1e-6 && sol.point.p[0].abs() < 1e-6);
            let sol = solve_from(&bar_problem(&model, &state, &law, 1.5), &cfg, None).unwrap();
            assert!((sol.point.v[0] - 6.5).abs() < 1e-6, "{:?}", sol.point);
            assert!((sol.point.p[0] - 5.0).abs() < 1e-6);
            assert!(sol.gamma[0] >= sol.point.p[0].abs());
        }
        let sol = pgm_solve(
            &bar_problem(&model, &state, &law, 0.0),
            &SolverConfig::pgm(),
        )
        .unwrap();
        assert_eq!(sol.iterations, 1);
        assert_eq!(sol.point.v, vec![0.0]);
    }

    #[test]
    fn piecewise_single_bar() {
        let model = unit_bar();
        let state = initial_state(&model, &[1.0]).unwrap();
        let law = HardeningLaw::PiecewiseLinear {
            h1: vec![0.1],
            h2: vec![0.05],
            r_s: vec![1.3],
        };
        let cfg = SolverConfig::apgm().with_epsilon(1e-10);
        let sol = apgm_piecewise_solve(&bar_problem(&model, &state, &law, 1.5), &cfg).unwrap();
        let x = &sol.point;
        assert!(
            (x.v[0] - 8.5).abs() < 1e-6
                && (x.p[0] - 5.0).abs() < 1e-6
                && (x.s[0] - 2.0).abs() < 1e-6
        );
        let sol = apgm_piecewise_solve(&bar_problem(&model, &state, &law, 1.2), &cfg).unwrap();
        let x = &sol.point;
        assert!((x.v[0] - 3.2).abs() < 1e-6 && (x.p[0] - 2.0).abs() < 1e-6 && x.s[0].abs() < 1e-9);

        // unreachable second branch reduces to linear hardening with h1
        let far = HardeningLaw::PiecewiseLinear {
            h1: vec![0.1],
            h2: vec![0.05],
            r_s: vec![1e9],
        };
        let lin = HardeningLaw::LinearIsotropic { h: vec![0.1] };
        let a = apgm_piecewise_solve(&bar_problem(&model, &state, &far, 1.5), &cfg).unwrap();
        let b = apgm_solve(&bar_problem(&model, &state, &lin, 1.5), &cfg).unwrap();
        assert!((a.point.v[0] - b.point.v[0]).abs() < 1e-6);
        assert!((a.point.p[0] - b.point.p[0]).abs() < 1e-6);
    }

    #[test]
    fn law_dispatch_errors() {
        let model = unit_bar();
        let state = initial_state(&model, &[1.0]).unwrap();
        let pw = HardeningLaw::PiecewiseLinear {
            h1: vec![0.1],
            h2: vec![0.05],
            r_s: vec![1.3],
        };
        let lin = HardeningLaw::LinearIsotropic { h: vec![0.1] };
        let cfg = SolverConfig::apgm();
        assert!(matches!(
            apgm_solve(&bar_problem(&model, &state, &pw, 1.0), &cfg),
            Err(Error::UnsupportedLaw(_))
        ));
        assert!(matches!(
            apgm_piecewise_solve(&bar_problem(&model, &state, &lin, 1.0), &cfg),
            Err(Error::UnsupportedLaw(_))
        ));
        let bad = SolverConfig::apgm().with_epsilon(0.0);
        assert!(apgm_solve(&bar_problem(&model, &state, &lin, 1.0), &bad).is_err());
    }

    #[test]
    fn max_iter_is_flagged_not_fatal() {
        let model = unit_bar();
        let state = initial_state(&model, &[1.0]).unwrap();
        let law = HardeningLaw::LinearIsotropic { h: vec![0.1] };
        let cfg = SolverConfig::pgm().with_max_iter(3);
        let sol = pgm_solve(&bar_problem(&model, &state, &law, 1.5), &cfg).unwrap();
        assert_eq!(sol.termination, Termination::MaxIter);
        assert_eq!(sol.iterations, 3);
    }

    #[test]
    fn pgm_objective_is_monotone() {
        let model = unit_bar();
        let state = initial_state(&model, &[1.0]).unwrap();
        let law = HardeningLaw::LinearIsotropic { h: vec![0.1] };
        let cfg = SolverConfig::pgm().with_history();
        let sol = pgm_solve(&bar_problem(&model, &state, &law, 1.5), &cfg).unwrap();
        let h = sol.history.unwrap();
        assert!(h[0] <= sol.initial_objective);
        for w in h.windows(2) {
            assert!(w[1] <= w[0] + 1e-15);
        }
    }

    #[test]
    fn euclidean_norm_option() {
        let model = unit_bar();
        let state = initial_state(&model, &[1.0]).unwrap();
        let law = HardeningLaw::LinearIsotropic { h: vec![0.1] };
        let cfg = SolverConfig {
            norm: TerminationNorm::Euclidean,
            ..SolverConfig::apgm()
        };
        let sol = apgm_solve(&bar_problem(&model, &state, &law, 1.5), &cfg).unwrap();
        assert!(sol.converged());
        assert!((sol.point.p[0] - 5.0).abs() < 1e-6);
    }
}
