//! Incremental potential energy `g1 + g2`, its gradient and Hessian, and the
//! step-size oracles.
//!
//! With `e = B v − p − s` the smooth part is
//!
//! ```text
//! g1 = Σ qᵢ eᵢ + ½ kᵢ eᵢ² + ½ hᵢ pᵢ² + βᵢ pᵢ + ½ ηᵢ sᵢ² − fᵀ v
//! g2 = Σ Rᵢ |pᵢ| + R̃ᵢ |sᵢ|
//! ```
//!
//! where the `s` block only exists for the piecewise-linear law. `q`, `R`, `β`
//! are frozen at the start of the step.

use crate::error::{check_len, Error, Result};
use crate::hardening::{HardeningLaw, StateSnapshot};
use crate::model::TrussModel;
use crate::sparse::CsrMatrix;

/// Relative change of the Rayleigh quotient that stops power iteration.
pub const POWER_TOL: f64 = 1e-8;
/// Iteration cap for power iteration.
pub const POWER_MAX_ITER: usize = 10_000;
/// Inflation applied to the power-iteration estimate of `L`.
pub const LIPSCHITZ_SAFETY: f64 = 1.0 + 1e-8;

/// Unknowns of one increment: displacement increment `v`, plastic elongation
/// increment `p` and, for the piecewise law, the second-branch elongation `s`
/// (empty otherwise).
#[derive(Clone, Debug, Default, PartialEq)]
pub struct Point {
    pub v: Vec<f64>,
    pub p: Vec<f64>,
    pub s: Vec<f64>,
}

impl Point {
    pub fn zeros(d: usize, m: usize, piecewise: bool) -> Self {
        Self {
            v: vec![0.0; d],
            p: vec![0.0; m],
            s: if piecewise { vec![0.0; m] } else { Vec::new() },
        }
    }

    pub fn len(&self) -> usize {
        self.v.len() + self.p.len() + self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// All components, `v` then `p` then `s`.
    pub fn iter(&self) -> impl Iterator<Item = &f64> {
        self.v.iter().chain(&self.p).chain(&self.s)
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = &mut f64> {
        self.v
            .iter_mut()
            .chain(self.p.iter_mut())
            .chain(self.s.iter_mut())
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.iter().copied().collect()
    }

    pub fn from_slice(x: &[f64], d: usize, m: usize) -> Self {
        Self {
            v: x[..d].to_vec(),
            p: x[d..d + m].to_vec(),
            s: x[d + m..].to_vec(),
        }
    }

    pub fn max_abs_diff(&self, other: &Point) -> f64 {
        self.iter()
            .zip(other.iter())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// One load step: model, frozen path state, material law and the total
/// external load `f` at the end of the step.
#[derive(Clone, Debug)]
pub struct IncrementProblem<'a> {
    model: &'a TrussModel,
    state: &'a StateSnapshot,
    law: &'a HardeningLaw,
    f: Vec<f64>,
    eta: Vec<f64>,
    beta: Vec<f64>,
    weight_p: Vec<f64>,
    weight_s: Vec<f64>,
}

impl<'a> IncrementProblem<'a> {
    pub fn new(
        model: &'a TrussModel,
        state: &'a StateSnapshot,
        law: &'a HardeningLaw,
        f: Vec<f64>,
    ) -> Result<Self> {
        let m = model.num_members();
        check_len("load vector", model.num_dofs(), f.len())?;
        state.check_model(model)?;
        law.validate(m, &state.r_initial)?;
        if let Some(i) = state.r.iter().position(|&r| !(r > 0.0)) {
            return Err(Error::InvalidParameter(format!(
                "yield radius of member {i} must be positive"
            )));
        }
        let (eta, weight_s) = match law {
            HardeningLaw::PiecewiseLinear { r_s, .. } => {
                if state.beta.iter().any(|&b| b != 0.0) {
                    return Err(Error::InvalidParameter(
                        "back forces are not supported by the piecewise law".into(),
                    ));
                }
                let ws = r_s.iter().zip(&state.r).map(|(&a, &b)| a.max(b)).collect();
                (law.eta().expect("piecewise"), ws)
            }
            _ => (Vec::new(), Vec::new()),
        };
        Ok(Self {
            model,
            state,
            law,
            f,
            eta,
            beta: state.beta.clone(),
            weight_p: state.r.clone(),
            weight_s,
        })
    }

    pub fn model(&self) -> &'a TrussModel {
        self.model
    }

    pub fn state(&self) -> &'a StateSnapshot {
        self.state
    }

    pub fn law(&self) -> &'a HardeningLaw {
        self.law
    }

    pub fn load(&self) -> &[f64] {
        &self.f
    }

    pub fn num_dofs(&self) -> usize {
        self.model.num_dofs()
    }

    pub fn num_members(&self) -> usize {
        self.model.num_members()
    }

    pub fn is_piecewise(&self) -> bool {
        self.law.is_piecewise()
    }

    /// Size of the unknown vector, `d + m` or `d + 2m`.
    pub fn num_unknowns(&self) -> usize {
        self.num_dofs() + self.num_members() * if self.is_piecewise() { 2 } else { 1 }
    }

    pub fn zero_point(&self) -> Point {
        Point::zeros(self.num_dofs(), self.num_members(), self.is_piecewise())
    }

    /// Weights of `|p|` in `g2` (current yield radii).
    pub fn weight_p(&self) -> &[f64] {
        &self.weight_p
    }

    /// Weights of `|s|` in `g2`; empty unless piecewise.
    pub fn weight_s(&self) -> &[f64] {
        &self.weight_s
    }

    /// Hardening modulus on `p`.
    pub fn modulus_p(&self) -> &[f64] {
        self.law.plastic_modulus()
    }

    /// `η` for the `s` block; empty unless piecewise.
    pub fn modulus_s(&self) -> &[f64] {
        &self.eta
    }

    pub fn back_force(&self) -> &[f64] {
        &self.beta
    }

    pub fn check_point(&self, x: &Point) -> Result<()> {
        check_len("point v", self.num_dofs(), x.v.len())?;
        check_len("point p", self.num_members(), x.p.len())?;
        let ns = if self.is_piecewise() {
            self.num_members()
        } else {
            0
        };
        check_len("point s", ns, x.s.len())
    }

    /// `e = B v − p − s`, the elastic elongation increment, given `B v`.
    pub(crate) fn elastic_from_bv(&self, x: &Point, bv: &[f64], e: &mut [f64]) {
        for i in 0..e.len() {
            let s = if x.s.is_empty() { 0.0 } else { x.s[i] };
            e[i] = bv[i] - x.p[i] - s;
        }
    }

    pub fn elastic(&self, x: &Point) -> Vec<f64> {
        let mut bv = vec![0.0; self.num_members()];
        self.model.compatibility().mul_vec(&x.v, &mut bv);
        let mut e = vec![0.0; bv.len()];
        self.elastic_from_bv(x, &bv, &mut e);
        e
    }

    /// `(g1, g2)` given the elastic elongation `e` of `x`.
    pub(crate) fn split_objective(&self, x: &Point, e: &[f64]) -> (f64, f64) {
        let k = self.model.stiffness();
        let q = &self.state.q;
        let h = self.modulus_p();
        let mut g1 = 0.0;
        let mut g2 = 0.0;
        for i in 0..e.len() {
            let p = x.p[i];
            g1 += q[i] * e[i] + 0.5 * k[i] * e[i] * e[i] + 0.5 * h[i] * p * p + self.beta[i] * p;
            g2 += self.weight_p[i] * p.abs();
        }
        for (i, &s) in x.s.iter().enumerate() {
            g1 += 0.5 * self.eta[i] * s * s;
            g2 += self.weight_s[i] * s.abs();
        }
        g1 -= dot(&self.f, &x.v);
        (g1, g2)
    }

    /// `g1(x) + g2(x)` in J.
    pub fn objective(&self, x: &Point) -> f64 {
        let e = self.elastic(x);
        let (g1, g2) = self.split_objective(x, &e);
        g1 + g2
    }

    /// Writes `∇g1(x)` into `grad` given the elastic elongation `e` of `x`.
    pub(crate) fn gradient_from_elastic(
        &self,
        x: &Point,
        e: &[f64],
        work: &mut [f64],
        grad: &mut Point,
    ) {
        let k = self.model.stiffness();
        let q = &self.state.q;
        let h = self.modulus_p();
        // work = k∘e + q
        for i in 0..e.len() {
            work[i] = k[i] * e[i] + q[i];
        }
        self.model
            .compatibility()
            .mul_transpose_vec(work, &mut grad.v);
        for (g, f) in grad.v.iter_mut().zip(&self.f) {
            *g -= f;
        }
        for i in 0..e.len() {
            grad.p[i] = h[i] * x.p[i] + self.beta[i] - work[i];
        }
        for i in 0..x.s.len() {
            grad.s[i] = self.eta[i] * x.s[i] - work[i];
        }
    }

    /// Gradient of the smooth part `g1`.
    pub fn gradient(&self, x: &Point) -> Point {
        let e = self.elastic(x);
        let mut work = vec![0.0; e.len()];
        let mut grad = self.zero_point();
        self.gradient_from_elastic(x, &e, &mut work, &mut grad);
        grad
    }

    /// `y = ∇²g1 · x` without assembling, via the factorisation
    /// `∇²g1 = Aᵀ D A` with `A = [B −I −I; 0 I 0; 0 0 I]`, `D = diag(k, h, η)`.
    pub fn hessian_mul(&self, x: &Point, y: &mut Point) {
        let k = self.model.stiffness();
        let h = self.modulus_p();
        let e = self.elastic(x);
        let ke: Vec<f64> = e.iter().zip(k).map(|(e, k)| e * k).collect();
        self.model.compatibility().mul_transpose_vec(&ke, &mut y.v);
        for i in 0..ke.len() {
            y.p[i] = h[i] * x.p[i] - ke[i];
        }
        for i in 0..x.s.len() {
            y.s[i] = self.eta[i] * x.s[i] - ke[i];
        }
    }

    /// Assembled Hessian of `g1`, ordered `(v, p, s)`.
    pub fn hessian(&self) -> CsrMatrix {
        let d = self.num_dofs();
        let m = self.num_members();
        let b = self.model.compatibility();
        let k = self.model.stiffness();
        let h = self.modulus_p();
        let piecewise = self.is_piecewise();
        let n = self.num_unknowns();

        let mut columns: Vec<Vec<(usize, f64)>> = vec![Vec::new(); d];
        for i in 0..m {
            for (j, bij) in b.row(i) {
                columns[j].push((i, bij));
            }
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (j, col) in columns.iter().enumerate() {
            let row = &mut rows[j];
            for &(i, bij) in col {
                for (jj, bijj) in b.row(i) {
                    row.push((jj, k[i] * bij * bijj));
                }
                row.push((d + i, -k[i] * bij));
                if piecewise {
                    row.push((d + m + i, -k[i] * bij));
                }
            }
        }
        for i in 0..m {
            let couple: Vec<(usize, f64)> = b.row(i).map(|(j, bij)| (j, -k[i] * bij)).collect();
            let mut row = couple.clone();
            row.push((d + i, k[i] + h[i]));
            if piecewise {
                row.push((d + m + i, k[i]));
                let mut srow = couple;
                srow.push((d + i, k[i]));
                srow.push((d + m + i, k[i] + self.eta[i]));
                rows[d + m + i] = srow;
            }
            rows[d + i] = row;
        }
        CsrMatrix::from_rows(n, &rows)
    }

    /// Largest eigenvalue of `∇²g1` by matrix-free power iteration, inflated
    /// by [`LIPSCHITZ_SAFETY`].
    pub fn lipschitz_exact(&self) -> Result<f64> {
        let d = self.num_dofs();
        let m = self.num_members();
        let n = self.num_unknowns();
        let mut y = self.zero_point();
        let lambda = power_iteration(n, POWER_TOL, POWER_MAX_ITER, |x, out| {
            let xp = Point::from_slice(x, d, m);
            self.hessian_mul(&xp, &mut y);
            for (o, v) in out.iter_mut().zip(y.iter()) {
                *o = *v;
            }
        })?;
        Ok(lambda * LIPSCHITZ_SAFETY)
    }

    /// Gershgorin upper bound `max_i (H_ii + Σ_{j≠i} |H_ij|)` on the sparse Hessian.
    pub fn lipschitz_gershgorin(&self) -> f64 {
        let hess = self.hessian();
        (0..hess.nrows())
            .map(|i| {
                hess.row(i)
                    .map(|(j, v)| if i == j { v } else { v.abs() })
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }
}

/// Dominant eigenvalue of a symmetric positive semidefinite operator,
/// started from the normalised all-ones vector.
pub fn power_iteration(
    n: usize,
    tol: f64,
    max_iter: usize,
    mut apply: impl FnMut(&[f64], &mut [f64]),
) -> Result<f64> {
    let mut x = vec![1.0 / (n as f64).sqrt(); n];
    let mut y = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        apply(&x, &mut y);
        let next = dot(&x, &y);
        let norm = dot(&y, &y).sqrt();
        if norm == 0.0 {
            return Ok(0.0);
        }
        for (xi, yi) in x.iter_mut().zip(&y) {
            *xi = yi / norm;
        }
        if (next - lambda).abs() <= tol * next.abs() {
            return Ok(next);
        }
        lambda = next;
    }
    Err(Error::PowerIteration(max_iter))
}

pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `g1 + g2` at `x`.
pub fn objective(problem: &IncrementProblem<'_>, x: &Point) -> f64 {
    problem.objective(x)
}

/// `∇g1` at `x`.
pub fn grad_g1(problem: &IncrementProblem<'_>, x: &Point) -> Point {
    problem.gradient(x)
}

pub fn hessian(problem: &IncrementProblem<'_>) -> CsrMatrix {
    problem.hessian()
}

pub fn lipschitz_exact(problem: &IncrementProblem<'_>) -> Result<f64> {
    problem.lipschitz_exact()
}

pub fn lipschitz_gershgorin(problem: &IncrementProblem<'_>) -> f64 {
    problem.lipschitz_gershgorin()
}
