//! Subcommand orchestration.

use std::path::{Path, PathBuf};
use std::time::Instant;

use insgame_core::montecarlo::simulate_paths;
use insgame_core::{
    backward_solve, check_local_consistency, estimate_value, consistency_samples, CflPolicy, kernel, Player, Problem,
    SimConfig, Solution, State,
};
use serde_json::json;
use sha2::{Digest, Sha256};

use crate::config::{check_sweep, ConfigError, RunConfig};
use crate::output;

/// Process exit codes.
pub mod exit {
    pub const OK: i32 = 0;
    pub const RUNTIME: i32 = 1;
    pub const PARSE: i32 = 3;
    pub const VALIDATION: i32 = 4;
    pub const CFL: i32 = 5;
}

#[derive(Debug, Clone, Default)]
pub struct Flags {
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub full_history: bool,
    pub seed: Option<u64>,
}

#[derive(Debug)]
pub enum Failure {
    Config(ConfigError),
    Core(insgame_core::Error),
    Io(PathBuf, std::io::Error),
}

impl Failure {
    pub fn exit_code(&self) -> i32 {
        match self {
            Failure::Config(ConfigError::Parse { .. }) => exit::PARSE,
            Failure::Config(ConfigError::Invalid(_)) => exit::VALIDATION,
            Failure::Config(ConfigError::Io(..)) => exit::RUNTIME,
            Failure::Core(insgame_core::Error::Invalid(_)) => exit::VALIDATION,
            Failure::Core(insgame_core::Error::Cfl(_)) => exit::CFL,
            Failure::Core(_) | Failure::Io(..) => exit::RUNTIME,
        }
    }
}

impl std::fmt::Display for Failure {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Failure::Config(e) => write!(f, "{e}"),
            Failure::Core(e) => write!(f, "{e}"),
            Failure::Io(p, e) => write!(f, "cannot write {}: {e}", p.display()),
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e)
    }
}

impl From<insgame_core::Error> for Failure {
    fn from(e: insgame_core::Error) -> Self {
        Failure::Core(e)
    }
}

pub type Outcome = Result<(), Failure>;

struct Run {
    config_path: PathBuf,
    config: RunConfig,
    flags: Flags,
    dir: PathBuf,
    started: Instant,
    files: Vec<String>,
}

impl Run {
    fn new(config_path: &Path, flags: Flags) -> Result<Self, Failure> {
        let mut config = crate::config::load(config_path)?;
        if flags.full_history {
            config.full_history = true;
        }
        if let Some(seed) = flags.seed {
            if let Some(sim) = config.simulation.as_mut() {
                sim.seed = seed;
            }
            config.consistency.seed = seed;
        }
        let dir = flags.out.clone().unwrap_or_else(|| config.output_directory.clone());
        std::fs::create_dir_all(&dir).map_err(|e| Failure::Io(dir.clone(), e))?;
        Ok(Self {
            config_path: config_path.to_path_buf(),
            config,
            flags,
            dir,
            started: Instant::now(),
            files: Vec::new(),
        })
    }

    fn write(&mut self, name: &str, body: &str) -> Outcome {
        let path = self.dir.join(name);
        std::fs::write(&path, body).map_err(|e| Failure::Io(path, e))?;
        self.files.push(name.to_string());
        Ok(())
    }

    fn problem(&self) -> Result<Problem, Failure> {
        Ok(Problem::new(self.config.game.clone(), self.config.lattice.clone())?)
    }

    fn solve(&mut self, problem: &Problem) -> Result<Solution, Failure> {
        let opts = self.config.solver_options(self.flags.workers);
        let solution = backward_solve(problem, &opts)?;
        let d = &solution.diagnostics;
        let scan = problem.cfl_scan();
        let summary = json!({
            "search": format!("{:?}", self.config.search),
            "cfl_policy": format!("{:?}", self.config.cfl),
            "time_steps": problem.lattice().time_steps(),
            "nodes_per_slice": problem.lattice().node_count(),
            "joint_controls": problem.grid().len(),
            "best_response_iterations": d.best_response_iterations,
            "total_best_response_rounds": d.total_best_response_rounds,
            "max_regret": d.max_regret,
            "regret_checked_nodes": d.regret_checked_nodes,
            "nodes_without_pure_equilibrium": d.nodes_without_pure_equilibrium,
            "nodes_verified_exhaustive": d.nodes_verified_exhaustive,
            "worst_self_probability": d.worst_self_probability,
            "max_admissible_time_step": scan.max_admissible_time_step,
        });
        self.write("diagnostics.json", &(serde_json::to_string_pretty(&summary).expect("json") + "\n"))?;
        Ok(solution)
    }

    fn finish(mut self, command: &str) -> Outcome {
        let bytes = std::fs::read(&self.config_path).map_err(|e| Failure::Io(self.config_path.clone(), e))?;
        let hash: String = Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect();
        let manifest = json!({
            "command": command,
            "config": self.config_path.display().to_string(),
            "config_sha256": hash,
            "workers": self.flags.workers.unwrap_or_else(rayon_default_workers),
            "wall_time_seconds": self.started.elapsed().as_secs_f64(),
            "version": env!("CARGO_PKG_VERSION"),
            "files": self.files,
        });
        let body = serde_json::to_string_pretty(&manifest).expect("json") + "\n";
        let path = self.dir.join("manifest.json");
        std::fs::write(&path, body).map_err(|e| Failure::Io(path, e))?;
        self.files.clear();
        Ok(())
    }
}

fn rayon_default_workers() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}

/// Solve and write `slice_NNN.csv` (slice 0, or all plus `terminal.csv` with full history).
pub fn solve(config_path: &Path, flags: Flags) -> Outcome {
    let mut run = Run::new(config_path, flags)?;
    let problem = run.problem()?;
    let solution = run.solve(&problem)?;
    let lattice = problem.lattice();
    for (n, slice) in solution.values.iter().enumerate().take(lattice.time_steps()) {
        if let Some(values) = slice {
            let body = output::slice_csv(lattice, &solution.policy, values, n);
            run.write(&format!("slice_{n:03}.csv"), &body)?;
        }
    }
    if run.config.full_history {
        run.write("terminal.csv", &output::terminal_csv(&problem))?;
    }
    run.finish("solve")
}

/// Figure sweep: controls along `x1` (figure 1) or `x2` (figure 2) at slice 0.
pub fn sweep(config_path: &Path, figure: u8, flags: Flags) -> Outcome {
    let mut run = Run::new(config_path, flags)?;
    let varied = match figure {
        1 => 0,
        2 => 1,
        _ => {
            return Err(Failure::Config(ConfigError::Invalid(vec![insgame_core::Violation::new(
                "figure",
                format!("{figure} is not 1 or 2"),
            )])))
        }
    };
    check_sweep(&run.config, varied)?;
    let problem = run.problem()?;
    let solution = run.solve(&problem)?;
    let p = run.config.sweep;
    let body = output::sweep_csv(&solution, 0, varied, State::new(p.x1, p.x2, p.z));
    run.write(&format!("sweep_figure{figure}.csv"), &body)?;
    run.finish(&format!("sweep --figure {figure}"))
}

/// Solve, then estimate both players' expected utility by simulation from each configured state.
pub fn simulate(config_path: &Path, flags: Flags) -> Outcome {
    let mut run = Run::new(config_path, flags)?;
    let Some(sim) = run.config.simulation.clone() else {
        return Err(Failure::Config(ConfigError::Invalid(vec![insgame_core::Violation::new(
            "simulation",
            "section required by the simulate command",
        )])));
    };
    let problem = run.problem()?;
    let solution = run.solve(&problem)?;
    let cfg = SimConfig {
        path_count: sim.path_count,
        euler_step: sim.euler_step,
        seed: sim.seed,
        workers: run.flags.workers,
    };
    let lattice = problem.lattice();
    let mut rows = Vec::new();
    for (n, &(state, regime)) in sim.initial_states.iter().enumerate() {
        let node = lattice.state_to_nearest_node(state, regime);
        let flat = lattice.flat(&node);
        let grid_value = Player::BOTH.map(|k| solution.initial().get(k, flat));
        let estimate = if sim.emit_paths {
            let paths = simulate_paths(&problem.game().clone(), &solution.policy, state, regime, &cfg)?;
            run.write(&format!("paths_{n:03}.csv"), &output::paths_csv(&paths))?;
            Player::BOTH.map(|k| {
                let u: Vec<f64> = paths
                    .iter()
                    .map(|p| problem.game().insurer(k).utility(p.terminal.surplus(k)))
                    .collect();
                insgame_core::ValueEstimate::from_samples(&u)
            })
        } else {
            estimate_value(problem.game(), &solution.policy, state, regime, &cfg)?
        };
        rows.push(output::SimulationRow { state, regime, grid_value, estimate });
    }
    run.write("simulation.csv", &output::simulation_csv(&rows))?;
    run.finish("simulate")
}

/// Exact stencil moments on random interior samples (CFL-feasible ones only under the strict policy).
pub fn consistency(config_path: &Path, flags: Flags) -> Outcome {
    let mut run = Run::new(config_path, flags)?;
    let problem = run.problem()?;
    let (game, lattice, grid) = (problem.game(), problem.lattice(), problem.grid());
    let settings = run.config.consistency.clone();
    let feasible_only = run.config.cfl == CflPolicy::Strict;
    let (samples, rejected) = consistency_samples(game, lattice, grid, settings.samples, settings.seed, feasible_only);
    let report = check_local_consistency(game, lattice, grid, &samples)?;
    let scan = problem.cfl_scan();
    let mean_ok = report.mean_error.iter().all(|&e| e <= 1e-12);
    let var_ok = report.variance_error <= report.variance_bound;
    let summary = json!({
        "samples": report.rows.len(),
        "requested_samples": settings.samples,
        "rejected_cfl_draws": rejected,
        "max_mean_error": report.mean_error,
        "max_variance_error": report.variance_error,
        "variance_constant": kernel::variance_constant(game, lattice, grid),
        "variance_bound": report.variance_bound,
        "feasible_samples_only": feasible_only,
        "min_sample_self_probability": report.cfl_margin,
        "grid_worst_self_probability": scan.worst_self_probability,
        "max_admissible_time_step": scan.max_admissible_time_step,
        "mean_within_1e-12": mean_ok,
        "variance_within_bound": var_ok,
    });
    run.write("consistency.csv", &output::consistency_csv(lattice, &report))?;
    run.write(
        "consistency_summary.json",
        &(serde_json::to_string_pretty(&summary).expect("json") + "\n"),
    )?;
    run.finish("consistency")
}
