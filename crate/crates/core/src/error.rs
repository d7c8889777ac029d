use thiserror::Error;

/// Errors raised while building models, assembling problems or running analyses.
#[derive(Debug, Error)]
pub enum Error {
    #[error("model has no members")]
    NoMembers,
    #[error("model has no free degrees of freedom")]
    NoFreeDofs,
    #[error("member {member} references node {node}, but the model has {count} nodes")]
    InvalidNode {
        member: usize,
        node: usize,
        count: usize,
    },
    #[error("member {0} joins a node to itself")]
    SelfLoop(usize),
    #[error("member {0} has zero length")]
    ZeroLength(usize),
    #[error("member {0} must have positive area and Young modulus")]
    InvalidSection(usize),
    #[error("member {0} connects two fully supported nodes (all-zero compatibility row)")]
    FixedMember(usize),
    #[error("support references node {node} axis {axis}, which does not exist")]
    InvalidSupport { node: usize, axis: usize },
    #[error("free DOF {dof} (node {node}, axis {axis}) is not stiffened by any member")]
    UnstiffenedDof {
        dof: usize,
        node: usize,
        axis: usize,
    },
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    Dimension {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("power iteration did not converge within {0} iterations")]
    PowerIteration(usize),
    #[error("unsupported hardening law for this operation: {0}")]
    UnsupportedLaw(&'static str),
    #[error("no sign pattern yields a consistent solution (singular model?)")]
    NoConsistentPattern,
    #[error("load step {step} did not converge; {} steps completed", history.rows.len())]
    StepFailed {
        step: usize,
        history: Box<crate::driver::AnalysisHistory>,
    },
    #[error("loading program: {0}")]
    Program(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::Dimension {
            what,
            expected,
            got,
        })
    }
}
