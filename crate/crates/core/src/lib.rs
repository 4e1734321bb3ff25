//! Markov chain approximation solver for a two-insurer investment and
//! reinsurance game under a regime-switching jump diffusion, with a Monte
//! Carlo validator for the solved values.

pub mod error;
pub mod kernel;
pub mod lattice;
pub mod model;
pub mod montecarlo;
pub mod solver;

pub use error::{CflViolation, Error, Result, Violation};
pub use kernel::{
    check_cfl, check_local_consistency, consistency_samples, diffusion_stencil, diffusion_stencil_signed, jump_targets, scan_cfl,
    CflScan, ConsistencyReport, ConsistencySample, Stencil,
};
pub use lattice::{ControlGrid, Interval, JointControlGrid, Lattice, LatticeSpec, NodeIndex};
pub use model::{
    GameSpec, InsurerSpec, JointControl, MarketCoefficients, Player, PlayerControl, Regime, RegimeGenerator,
    ReinsuranceMode, State,
};
pub use montecarlo::{estimate_value, ConstantPolicy, FeedbackPolicy, SimConfig, ValueEstimate};
pub use solver::{
    backward_solve, backward_solve_from, nash_at_node, node_backup, CflPolicy, NashDiagnostics, NashSearch,
    NodeDiagnostic, PolicyField, Problem, Solution, SolverOptions, ValueSlice,
};
