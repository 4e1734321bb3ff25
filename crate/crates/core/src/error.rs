use thiserror::Error;

use crate::lattice::NodeIndex;
use crate::model::JointControl;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// One failed invariant, addressed by a dotted field path.
#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub path: String,
    pub message: String,
}

impl Violation {
    pub fn new(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

impl std::fmt::Display for Violation {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

/// Location and size of the worst negative self-transition probability.
#[derive(Debug, Clone, PartialEq)]
pub struct CflViolation {
    pub node: NodeIndex,
    pub control: JointControl,
    pub player: usize,
    pub self_probability: f64,
    /// Largest time step for which every stencil on the grid stays nonnegative.
    pub max_admissible_time_step: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid specification:\n{}", format_violations(.0))]
    Invalid(Vec<Violation>),

    #[error(
        "CFL violation: self-transition probability {:.6e} for player {} at node {:?} under {:?}; \
         largest admissible time step for this grid is {:.6e}",
        .0.self_probability, .0.player + 1, .0.node, .0.control, .0.max_admissible_time_step
    )]
    Cfl(Box<CflViolation>),

    #[error("simulation produced a nonfinite state at step {step} of path {path}")]
    Simulation { path: u64, step: usize },

    #[error("state error: {0}")]
    State(String),
}

fn format_violations(v: &[Violation]) -> String {
    v.iter()
        .map(|v| format!("  - {v}"))
        .collect::<Vec<_>>()
        .join("\n")
}

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Domain(msg.into()))
}
