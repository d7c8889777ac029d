//! Hardening laws and path-state evolution between load steps.

use serde::{Deserialize, Serialize};

use crate::error::{check_len, Error, Result};
use crate::model::TrussModel;
use crate::solvers::IncrementSolution;

/// Material hardening law. Per-member moduli are in N/m, forces in N.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum HardeningLaw {
    LinearIsotropic {
        h: Vec<f64>,
    },
    /// `theta` is the isotropic share of the total modulus `h`; the rest
    /// moves the back force.
    Mixed {
        theta: f64,
        h: Vec<f64>,
    },
    /// Modulus `h1` until the yield radius reaches `r_s`, `h2` afterwards.
    PiecewiseLinear {
        h1: Vec<f64>,
        h2: Vec<f64>,
        r_s: Vec<f64>,
    },
}

impl HardeningLaw {
    /// `h = ratio · k` for every member.
    pub fn isotropic_ratio(model: &TrussModel, ratio: f64) -> Self {
        Self::LinearIsotropic {
            h: scaled(model.stiffness(), ratio),
        }
    }

    pub fn mixed_ratio(model: &TrussModel, theta: f64, ratio: f64) -> Self {
        Self::Mixed {
            theta,
            h: scaled(model.stiffness(), ratio),
        }
    }

    /// `h1 = h1_ratio · k`, `h2 = h2_ratio · h1`, `r_s = rs_ratio · r0`.
    pub fn piecewise_ratio(
        model: &TrussModel,
        h1_ratio: f64,
        h2_ratio: f64,
        r0: &[f64],
        rs_ratio: f64,
    ) -> Self {
        let h1 = scaled(model.stiffness(), h1_ratio);
        Self::PiecewiseLinear {
            h2: scaled(&h1, h2_ratio),
            h1,
            r_s: scaled(r0, rs_ratio),
        }
    }

    pub fn is_piecewise(&self) -> bool {
        matches!(self, Self::PiecewiseLinear { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            Self::LinearIsotropic { .. } => "linear isotropic",
            Self::Mixed { .. } => "mixed",
            Self::PiecewiseLinear { .. } => "piecewise linear",
        }
    }

    /// Total hardening modulus acting on `p` in the increment energy
    /// (`h`, or `h1` for the piecewise law).
    pub fn plastic_modulus(&self) -> &[f64] {
        match self {
            Self::LinearIsotropic { h } | Self::Mixed { h, .. } => h,
            Self::PiecewiseLinear { h1, .. } => h1,
        }
    }

    /// `η = h1 h2 / (h1 − h2)`, only for the piecewise law.
    pub fn eta(&self) -> Option<Vec<f64>> {
        match self {
            Self::PiecewiseLinear { h1, h2, .. } => {
                Some(h1.iter().zip(h2).map(|(&a, &b)| a * b / (a - b)).collect())
            }
            _ => None,
        }
    }

    /// Checks positivity invariants for `m` members with initial radii `r0`.
    pub fn validate(&self, m: usize, r0: &[f64]) -> Result<()> {
        check_len("initial yield radii", m, r0.len())?;
        let positive = |name: &str, v: &[f64]| -> Result<()> {
            check_len("hardening moduli", m, v.len())?;
            if v.iter().all(|&x| x > 0.0 && x.is_finite()) {
                Ok(())
            } else {
                Err(Error::InvalidParameter(format!("{name} must be positive")))
            }
        };
        match self {
            Self::LinearIsotropic { h } => positive("h", h),
            Self::Mixed { theta, h } => {
                if !(0.0..=1.0).contains(theta) {
                    return Err(Error::InvalidParameter(format!(
                        "theta must lie in [0, 1], got {theta}"
                    )));
                }
                positive("h", h)
            }
            Self::PiecewiseLinear { h1, h2, r_s } => {
                positive("h1", h1)?;
                positive("h2", h2)?;
                check_len("r_s", m, r_s.len())?;
                for i in 0..m {
                    if h2[i] >= h1[i] {
                        return Err(Error::InvalidParameter(format!(
                            "member {i}: h2 must be below h1"
                        )));
                    }
                    if r_s[i] <= r0[i] {
                        return Err(Error::InvalidParameter(format!(
                            "member {i}: r_s must exceed the initial yield radius"
                        )));
                    }
                }
                Ok(())
            }
        }
    }

    /// Yield radius of the piecewise law after accumulated multiplier
    /// `gamma`; `None` for the other laws.
    pub fn piecewise_radius(&self, member: usize, r0: f64, gamma: f64) -> Option<f64> {
        match self {
            Self::PiecewiseLinear { h1, h2, r_s } => {
                let gamma_s = (r_s[member] - r0) / h1[member];
                let first = r0 + h1[member] * gamma;
                let second = r_s[member] + h2[member] * (gamma - gamma_s);
                Some(first.min(second))
            }
            _ => None,
        }
    }
}

fn scaled(v: &[f64], factor: f64) -> Vec<f64> {
    v.iter().map(|x| x * factor).collect()
}

/// Path state at the start of a step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StateSnapshot {
    /// Axial forces (N).
    pub q: Vec<f64>,
    /// Yield radii (N).
    pub r: Vec<f64>,
    /// Back forces (N).
    pub beta: Vec<f64>,
    /// Initial yield radii (N); the piecewise curve and residual scaling use it.
    pub r_initial: Vec<f64>,
    /// Member elongations (m).
    pub c_total: Vec<f64>,
    /// Accumulated plastic elongations (m).
    pub c_plastic: Vec<f64>,
    /// Accumulated plastic multiplier (m).
    pub gamma_acc: Vec<f64>,
    /// Displacements of the free DOFs (m).
    pub u: Vec<f64>,
    pub step_index: usize,
}

impl StateSnapshot {
    pub fn num_members(&self) -> usize {
        self.q.len()
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub(crate) fn check_model(&self, model: &TrussModel) -> Result<()> {
        let m = model.num_members();
        for (what, len) in [
            ("state q", self.q.len()),
            ("state r", self.r.len()),
            ("state beta", self.beta.len()),
            ("state r_initial", self.r_initial.len()),
            ("state c_total", self.c_total.len()),
            ("state c_plastic", self.c_plastic.len()),
            ("state gamma_acc", self.gamma_acc.len()),
        ] {
            check_len(what, m, len)?;
        }
        check_len("state u", model.num_dofs(), self.u.len())
    }
}

/// Virgin state: zero forces, elongations and displacements, radii `r0`.
pub fn initial_state(model: &TrussModel, r0: &[f64]) -> Result<StateSnapshot> {
    check_len("initial yield radii", model.num_members(), r0.len())?;
    if let Some(i) = r0.iter().position(|&r| !(r > 0.0 && r.is_finite())) {
        return Err(Error::InvalidParameter(format!(
            "initial yield radius of member {i} must be positive"
        )));
    }
    let m = model.num_members();
    Ok(StateSnapshot {
        q: vec![0.0; m],
        r: r0.to_vec(),
        beta: vec![0.0; m],
        r_initial: r0.to_vec(),
        c_total: vec![0.0; m],
        c_plastic: vec![0.0; m],
        gamma_acc: vec![0.0; m],
        u: vec![0.0; model.num_dofs()],
        step_index: 0,
    })
}

/// Applies a converged increment and returns the state at the end of the step.
pub fn update_state(
    model: &TrussModel,
    state: &StateSnapshot,
    solution: &IncrementSolution,
    law: &HardeningLaw,
) -> Result<StateSnapshot> {
    state.check_model(model)?;
    let m = model.num_members();
    let pt = &solution.point;
    check_len("solution v", model.num_dofs(), pt.v.len())?;
    check_len("solution p", m, pt.p.len())?;
    let has_s = law.is_piecewise();
    if has_s {
        check_len("solution s", m, pt.s.len())?;
    }

    let mut bv = vec![0.0; m];
    model.compatibility().mul_vec(&pt.v, &mut bv);
    let k = model.stiffness();

    let mut next = state.clone();
    for i in 0..m {
        let s = if has_s { pt.s[i] } else { 0.0 };
        let plastic = pt.p[i] + s;
        let elastic = bv[i] - plastic;
        next.q[i] += k[i] * elastic;
        next.c_total[i] += bv[i];
        next.c_plastic[i] += plastic;
        next.gamma_acc[i] += pt.p[i].abs() + s.abs();
    }
    match law {
        HardeningLaw::LinearIsotropic { h } => {
            for i in 0..m {
                next.r[i] += h[i] * pt.p[i].abs();
            }
        }
        HardeningLaw::Mixed { theta, h } => {
            for i in 0..m {
                next.r[i] += theta * h[i] * pt.p[i].abs();
                next.beta[i] += (1.0 - theta) * h[i] * pt.p[i];
            }
        }
        HardeningLaw::PiecewiseLinear { .. } => {
            for i in 0..m {
                let curve = law
                    .piecewise_radius(i, state.r_initial[i], next.gamma_acc[i])
                    .expect("piecewise law");
                // radius never shrinks, even if rounding places gamma slightly low
                next.r[i] = curve.max(state.r[i]);
            }
        }
    }
    for (u, v) in next.u.iter_mut().zip(&pt.v) {
        *u += v;
    }
    next.step_index += 1;
    Ok(next)
}
