//! Correctness oracles: complementarity residuals, prox fixed-point
//! residuals, finite differences and an exhaustive small-instance solver.

use nalgebra::{DMatrix, DVector};

use crate::energy::{IncrementProblem, Point};
use crate::error::{Error, Result};
use crate::hardening::HardeningLaw;
use crate::solvers::{shrink, IncrementSolution};

/// Residuals of the incremental optimality system.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct ResidualReport {
    /// `‖Bᵀq − f‖∞` with the updated member forces (N).
    pub equilibrium_inf: f64,
    /// `max(|q − β| − R, 0)` with updated internal variables (N).
    pub yield_violation_inf: f64,
    /// `|R γ − (q − β) p|` (N·m).
    pub complementarity_inf: f64,
    /// `|p − γ (q − β) / R|` (m).
    pub flow_consistency_inf: f64,
    /// Largest residual after scaling by force and length magnitudes.
    pub max_scaled: f64,
}

/// Threshold on [`ResidualReport::max_scaled`] used for pass/fail decisions.
pub const RESIDUAL_TOL: f64 = 1e-6;

impl ResidualReport {
    pub fn passes(&self, tol: f64) -> bool {
        self.max_scaled <= tol
    }
}

/// One cone pair: plastic increment `z`, multiplier `gamma`, relative force
/// `t` and updated radius `radius`.
fn accumulate_pair(report: &mut ResidualReport, z: f64, gamma: f64, t: f64, radius: f64) {
    report.yield_violation_inf = report.yield_violation_inf.max((t.abs() - radius).max(0.0));
    report.complementarity_inf = report
        .complementarity_inf
        .max((radius * gamma - t * z).abs());
    let flow = if radius > 0.0 {
        (z - gamma * t / radius).abs()
    } else {
        z.abs()
    };
    report.flow_consistency_inf = report.flow_consistency_inf.max(flow);
}

/// Residual report of `solution` for `problem`.
pub fn kkt_residual(
    problem: &IncrementProblem<'_>,
    solution: &IncrementSolution,
) -> ResidualReport {
    let x = &solution.point;
    let model = problem.model();
    let state = problem.state();
    let k = model.stiffness();
    let m = problem.num_members();
    let e = problem.elastic(x);
    let q_new: Vec<f64> = (0..m).map(|i| state.q[i] + k[i] * e[i]).collect();

    let mut report = ResidualReport::default();
    let mut eq = vec![0.0; problem.num_dofs()];
    model.compatibility().mul_transpose_vec(&q_new, &mut eq);
    report.equilibrium_inf = eq
        .iter()
        .zip(problem.load())
        .map(|(a, f)| (a - f).abs())
        .fold(0.0, f64::max);

    let gamma_p = |i: usize| x.p[i].abs();
    match problem.law() {
        HardeningLaw::LinearIsotropic { h } => {
            for i in 0..m {
                let t = q_new[i] - state.beta[i];
                let radius = state.r[i] + h[i] * gamma_p(i);
                accumulate_pair(&mut report, x.p[i], gamma_p(i), t, radius);
            }
        }
        HardeningLaw::Mixed { theta, h } => {
            for i in 0..m {
                let t = q_new[i] - state.beta[i] - (1.0 - theta) * h[i] * x.p[i];
                let radius = state.r[i] + theta * h[i] * gamma_p(i);
                accumulate_pair(&mut report, x.p[i], gamma_p(i), t, radius);
            }
        }
        HardeningLaw::PiecewiseLinear { h1, .. } => {
            let eta = problem.modulus_s();
            let ws = problem.weight_s();
            for i in 0..m {
                let radius = state.r[i] + h1[i] * gamma_p(i);
                accumulate_pair(&mut report, x.p[i], gamma_p(i), q_new[i], radius);
                let gs = x.s[i].abs();
                accumulate_pair(&mut report, x.s[i], gs, q_new[i], ws[i] + eta[i] * gs);
            }
        }
    }
    // consistency of the reported multiplier with the point
    for i in 0..m.min(solution.gamma.len()) {
        let expected = gamma_p(i) + x.s.get(i).map_or(0.0, |s| s.abs());
        report.flow_consistency_inf = report
            .flow_consistency_inf
            .max((solution.gamma[i] - expected).abs());
    }

    let (force, length) = residual_scales(problem, x);
    report.max_scaled = (report.equilibrium_inf / force)
        .max(report.yield_violation_inf / force)
        .max(report.complementarity_inf / (force * length))
        .max(report.flow_consistency_inf / length);
    report
}

/// `(max(‖f‖∞, max R⁰), max(1, ‖v‖∞))`.
pub fn residual_scales(problem: &IncrementProblem<'_>, x: &Point) -> (f64, f64) {
    let f_inf = problem.load().iter().fold(0.0_f64, |a, f| a.max(f.abs()));
    let r_max = problem
        .state()
        .r_initial
        .iter()
        .fold(0.0_f64, |a, r| a.max(*r));
    let force = f_inf.max(r_max).max(f64::MIN_POSITIVE);
    let length = x.v.iter().fold(1.0_f64, |a, v| a.max(v.abs()));
    (force, length)
}

/// `‖z − prox_{αg2}(z − α∇_z g1)‖∞ + ‖α∇_v g1‖∞` over the plastic blocks `z = (p, s)`.
pub fn prox_fixed_point_residual(problem: &IncrementProblem<'_>, x: &Point, alpha: f64) -> f64 {
    let g = problem.gradient(x);
    let plastic = |z: &[f64], gz: &[f64], w: &[f64]| {
        z.iter()
            .zip(gz)
            .zip(w)
            .map(|((&z, &gz), &w)| (z - shrink(z - alpha * gz, alpha * w)).abs())
            .fold(0.0, f64::max)
    };
    let rp = plastic(&x.p, &g.p, problem.weight_p());
    let rs = plastic(&x.s, &g.s, problem.weight_s());
    let rv = g.v.iter().fold(0.0_f64, |a, v| a.max(alpha * v.abs()));
    rp.max(rs) + rv
}

/// Central-difference gradient of `g1` with step `step`.
pub fn finite_difference_gradient(problem: &IncrementProblem<'_>, x: &Point, step: f64) -> Point {
    let flat = x.to_vec();
    let d = problem.num_dofs();
    let m = problem.num_members();
    let g1 = |y: &[f64]| {
        let pt = Point::from_slice(y, d, m);
        let e = problem.elastic(&pt);
        problem.split_objective(&pt, &e).0
    };
    let mut out = Vec::with_capacity(flat.len());
    let mut y = flat.clone();
    for i in 0..flat.len() {
        y[i] = flat[i] + step;
        let up = g1(&y);
        y[i] = flat[i] - step;
        let down = g1(&y);
        y[i] = flat[i];
        out.push((up - down) / (2.0 * step));
    }
    Point::from_slice(&out, d, m)
}

/// `(f̌ − f*)/f*`; the plain difference when `|f*| < 1e-12`.
///
/// For a negative optimum a candidate with higher energy gives a negative
/// value, since the difference is divided by `f*` as is.
pub fn rel_diff(candidate: f64, reference: f64) -> f64 {
    if reference.abs() < 1e-12 {
        candidate - reference
    } else {
        (candidate - reference) / reference
    }
}

/// Dense quadratic model `g1(x) = ½ xᵀHx + cᵀx + const` of a problem.
struct DenseQuadratic {
    hess: DMatrix<f64>,
    lin: DVector<f64>,
    weights: Vec<f64>,
    d: usize,
}

impl DenseQuadratic {
    fn new(problem: &IncrementProblem<'_>) -> Self {
        let d = problem.num_dofs();
        let n = problem.num_unknowns();
        let sparse = problem.hessian();
        let mut hess = DMatrix::zeros(n, n);
        for i in 0..n {
            for (j, v) in sparse.row(i) {
                hess[(i, j)] = v;
            }
        }
        // gradient at zero
        let zero = problem.zero_point();
        let lin = DVector::from_vec(problem.gradient(&zero).to_vec());
        let mut weights = problem.weight_p().to_vec();
        weights.extend_from_slice(problem.weight_s());
        Self {
            hess,
            lin,
            weights,
            d,
        }
    }

    /// Minimiser of the smooth objective restricted to `v` and the plastic
    /// components with nonzero sign, `|z|` replaced by `σ z`.
    fn solve_pattern(&self, pattern: &[i8]) -> Option<DVector<f64>> {
        let d = self.d;
        let idx: Vec<usize> = (0..d)
            .chain(
                pattern
                    .iter()
                    .enumerate()
                    .filter(|(_, s)| **s != 0)
                    .map(|(i, _)| d + i),
            )
            .collect();
        let ns = idx.len();
        let mut a = DMatrix::zeros(ns, ns);
        let mut rhs = DVector::zeros(ns);
        for (r, &i) in idx.iter().enumerate() {
            for (c, &j) in idx.iter().enumerate() {
                a[(r, c)] = self.hess[(i, j)];
            }
            let sign_term = if i >= d {
                pattern[i - d] as f64 * self.weights[i - d]
            } else {
                0.0
            };
            rhs[r] = -(self.lin[i] + sign_term);
        }
        let sol = a.lu().solve(&rhs)?;
        let mut full = DVector::zeros(self.lin.len());
        for (r, &i) in idx.iter().enumerate() {
            full[i] = sol[r];
        }
        Some(full)
    }

    fn consistent(&self, pattern: &[i8], x: &DVector<f64>) -> bool {
        let grad = &self.hess * x + &self.lin;
        let scale = 1.0 + self.weights.iter().fold(0.0_f64, |a, w| a.max(*w));
        pattern.iter().enumerate().all(|(i, &s)| {
            let z = x[self.d + i];
            match s {
                0 => grad[self.d + i].abs() <= self.weights[i] + 1e-10 * scale,
                _ => (s as f64) * z > 0.0,
            }
        })
    }
}

/// Exact minimiser for a fixed sign pattern of the plastic unknowns
/// (`p` then `s`), `-1`, `0` or `+1` per component. Returns `None` when the
/// reduced system is singular. Sign consistency is not checked.
pub fn solve_active_pattern(
    problem: &IncrementProblem<'_>,
    pattern: &[i8],
) -> Result<Option<Point>> {
    let nz = problem.num_unknowns() - problem.num_dofs();
    if pattern.len() != nz {
        return Err(Error::Dimension {
            what: "sign pattern",
            expected: nz,
            got: pattern.len(),
        });
    }
    let dense = DenseQuadratic::new(problem);
    Ok(dense
        .solve_pattern(pattern)
        .map(|x| Point::from_slice(x.as_slice(), problem.num_dofs(), problem.num_members())))
}

/// Sign pattern of the plastic unknowns of `x`, with entries of magnitude at
/// most `tol` treated as zero.
pub fn sign_pattern(x: &Point, tol: f64) -> Vec<i8> {
    x.p.iter()
        .chain(x.s.iter())
        .map(|&z| {
            if z > tol {
                1
            } else if z < -tol {
                -1
            } else {
                0
            }
        })
        .collect()
}

/// Largest member count accepted by [`brute_force_solve`].
pub const BRUTE_FORCE_MAX_MEMBERS: usize = 6;
/// Largest member count accepted by [`brute_force_solve`] for the piecewise law.
pub const BRUTE_FORCE_MAX_MEMBERS_PIECEWISE: usize = 4;

/// Global minimiser by enumeration of all sign patterns of the plastic
/// unknowns. The least-objective sign-consistent stationary point wins.
pub fn brute_force_solve(problem: &IncrementProblem<'_>) -> Result<IncrementSolution> {
    let m = problem.num_members();
    let limit = if problem.is_piecewise() {
        BRUTE_FORCE_MAX_MEMBERS_PIECEWISE
    } else {
        BRUTE_FORCE_MAX_MEMBERS
    };
    if m > limit {
        return Err(Error::InvalidParameter(format!(
            "brute force is limited to {limit} members, got {m}"
        )));
    }
    let dense = DenseQuadratic::new(problem);
    let nz = dense.weights.len();
    let total = 3usize.pow(nz as u32);
    let mut pattern = vec![0i8; nz];
    let mut best: Option<(f64, Point)> = None;
    for code in 0..total {
        let mut c = code;
        for s in pattern.iter_mut() {
            *s = (c % 3) as i8 - 1;
            c /= 3;
        }
        let Some(x) = dense.solve_pattern(&pattern) else {
            continue;
        };
        if !dense.consistent(&pattern, &x) {
            continue;
        }
        let pt = Point::from_slice(x.as_slice(), problem.num_dofs(), m);
        let val = problem.objective(&pt);
        if best.as_ref().is_none_or(|(b, _)| val < *b) {
            best = Some((val, pt));
        }
    }
    let (_, point) = best.ok_or(Error::NoConsistentPattern)?;
    Ok(IncrementSolution::evaluate(problem, point))
}
