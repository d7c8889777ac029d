//! Second-order cone program equivalent to one increment under linear
//! isotropic hardening.
//!
//! Variable order is `Δc_e (m), ξ, Δγ (m), ζ, Δu (d), Δc_p (m)`. A cone
//! `(x0, x1, …)` requires `x0 ≥ ‖(x1, …)‖`; every entry is an affine
//! expression of the variables.

use serde::{Deserialize, Serialize};

use crate::energy::{IncrementProblem, Point};
use crate::error::{Error, Result};
use crate::hardening::HardeningLaw;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VariableBlock {
    pub name: String,
    pub offset: usize,
    pub len: usize,
}

/// `Σ coeff · x[index] + constant`
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AffineExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl AffineExpr {
    fn var(index: usize, coeff: f64) -> Self {
        Self {
            terms: vec![(index, coeff)],
            constant: 0.0,
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.constant + self.terms.iter().map(|&(j, c)| c * x[j]).sum::<f64>()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cone {
    pub entries: Vec<AffineExpr>,
}

impl Cone {
    pub fn dim(&self) -> usize {
        self.entries.len()
    }

    /// `max(‖tail‖ − head, 0)`
    pub fn violation(&self, x: &[f64]) -> f64 {
        let head = self.entries[0].eval(x);
        let tail = self.entries[1..]
            .iter()
            .map(|e| e.eval(x).powi(2))
            .sum::<f64>()
            .sqrt();
        (tail - head).max(0.0)
    }
}

/// Minimise `objectiveᵀx` subject to `equalities` (each `= 0`) and `cones`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SocpExport {
    pub num_variables: usize,
    pub blocks: Vec<VariableBlock>,
    pub objective: Vec<f64>,
    pub equalities: Vec<AffineExpr>,
    pub cones: Vec<Cone>,
}

impl SocpExport {
    pub fn block(&self, name: &str) -> Option<&VariableBlock> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn cone_dims(&self) -> Vec<usize> {
        self.cones.iter().map(Cone::dim).collect()
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, x)| c * x).sum()
    }

    /// Largest equality or cone violation at `x`.
    pub fn max_violation(&self, x: &[f64]) -> f64 {
        let eq = self.equalities.iter().map(|e| e.eval(x).abs());
        let cone = self.cones.iter().map(|c| c.violation(x));
        eq.chain(cone).fold(0.0, f64::max)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

struct Layout {
    m: usize,
    d: usize,
}

impl Layout {
    fn ce(&self, i: usize) -> usize {
        i
    }
    fn xi(&self) -> usize {
        self.m
    }
    fn gamma(&self, i: usize) -> usize {
        self.m + 1 + i
    }
    fn zeta(&self) -> usize {
        2 * self.m + 1
    }
    fn du(&self, j: usize) -> usize {
        2 * self.m + 2 + j
    }
    fn cp(&self, i: usize) -> usize {
        2 * self.m + 2 + self.d + i
    }
    fn len(&self) -> usize {
        3 * self.m + 2 + self.d
    }
}

/// Builds the conic program of `problem`, which must use the linear
/// isotropic law. A nonzero back force enters as a linear term on `Δc_p`.
pub fn export_socp(problem: &IncrementProblem<'_>) -> Result<SocpExport> {
    let HardeningLaw::LinearIsotropic { h } = problem.law() else {
        return Err(Error::UnsupportedLaw(
            "the conic export needs the linear isotropic law",
        ));
    };
    let model = problem.model();
    let state = problem.state();
    let k = model.stiffness();
    let lay = Layout {
        m: problem.num_members(),
        d: problem.num_dofs(),
    };
    let (m, d) = (lay.m, lay.d);
    let n = lay.len();

    let blocks = [
        ("dc_e", lay.ce(0), m),
        ("xi", lay.xi(), 1),
        ("dgamma", lay.gamma(0), m),
        ("zeta", lay.zeta(), 1),
        ("du", lay.du(0), d),
        ("dc_p", lay.cp(0), m),
    ]
    .into_iter()
    .map(|(name, offset, len)| VariableBlock {
        name: name.to_string(),
        offset,
        len,
    })
    .collect();

    let mut objective = vec![0.0; n];
    for i in 0..m {
        objective[lay.ce(i)] = state.q[i];
        objective[lay.gamma(i)] = state.r[i];
        objective[lay.cp(i)] = state.beta[i];
    }
    objective[lay.xi()] = 1.0;
    objective[lay.zeta()] = 1.0;
    for (j, f) in problem.load().iter().enumerate() {
        objective[lay.du(j)] = -f;
    }

    let b = model.compatibility();
    let equalities = (0..m)
        .map(|i| {
            let mut terms = vec![(lay.ce(i), 1.0), (lay.cp(i), 1.0)];
            terms.extend(b.row(i).map(|(j, bij)| (lay.du(j), -bij)));
            AffineExpr {
                terms,
                constant: 0.0,
            }
        })
        .collect();

    let mut cones: Vec<Cone> = (0..m)
        .map(|i| Cone {
            entries: vec![
                AffineExpr::var(lay.gamma(i), 1.0),
                AffineExpr::var(lay.cp(i), 1.0),
            ],
        })
        .collect();
    let rotated = |aux: usize, coeffs: &[f64], var: &dyn Fn(usize) -> usize| {
        let mut entries = vec![
            AffineExpr {
                terms: vec![(aux, 1.0)],
                constant: 1.0,
            },
            AffineExpr {
                terms: vec![(aux, 1.0)],
                constant: -1.0,
            },
        ];
        entries.extend(
            coeffs
                .iter()
                .enumerate()
                .map(|(i, c)| AffineExpr::var(var(i), (2.0 * c).sqrt())),
        );
        Cone { entries }
    };
    cones.push(rotated(lay.xi(), k, &|i| lay.ce(i)));
    cones.push(rotated(lay.zeta(), h, &|i| lay.gamma(i)));

    Ok(SocpExport {
        num_variables: n,
        blocks,
        objective,
        equalities,
        cones,
    })
}

/// Conic variables corresponding to an increment point, with `ξ`, `ζ` and
/// `Δγ` at their tightest values.
pub fn socp_point(problem: &IncrementProblem<'_>, x: &Point) -> Result<Vec<f64>> {
    let HardeningLaw::LinearIsotropic { h } = problem.law() else {
        return Err(Error::UnsupportedLaw(
            "the conic export needs the linear isotropic law",
        ));
    };
    problem.check_point(x)?;
    let lay = Layout {
        m: problem.num_members(),
        d: problem.num_dofs(),
    };
    let k = problem.model().stiffness();
    let e = problem.elastic(x);
    let mut out = vec![0.0; lay.len()];
    let mut xi = 0.0;
    let mut zeta = 0.0;
    for i in 0..lay.m {
        let g = x.p[i].abs();
        out[lay.ce(i)] = e[i];
        out[lay.gamma(i)] = g;
        out[lay.cp(i)] = x.p[i];
        xi += 0.5 * k[i] * e[i] * e[i];
        zeta += 0.5 * h[i] * g * g;
    }
    out[lay.xi()] = xi;
    out[lay.zeta()] = zeta;
    for j in 0..lay.d {
        out[lay.du(j)] = x.v[j];
    }
    Ok(out)
}
