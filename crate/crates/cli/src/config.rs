//! JSON run configuration. Field names carry their units.

use std::path::{Path, PathBuf};

use insgame_core::model::DEFAULT_TAIL_PROBABILITY;
use insgame_core::solver::{DEFAULT_MAX_ROUNDS, DEFAULT_TOLERANCE};
use insgame_core::{
    CflPolicy, GameSpec, InsurerSpec, Interval, LatticeSpec, MarketCoefficients, NashSearch, Regime,
    RegimeGenerator, ReinsuranceMode, SolverOptions, State, Violation,
};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConfig {
    pub game: RawGame,
    pub lattice: RawLattice,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub solver: Option<RawSolver>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub simulation: Option<RawSimulation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub consistency: Option<RawConsistency>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sweep: Option<RawSweep>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<RawOutput>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawGame {
    pub horizon_years: f64,
    pub regime_generator_per_year: Vec<Vec<f64>>,
    pub reinsurance_mode: Mode,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tail_probability: Option<f64>,
    pub market: RawMarket,
    pub insurers: [RawInsurer; 2],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Proportional,
    ExcessOfLoss,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawMarket {
    pub risk_free_rate_per_year: Vec<f64>,
    pub risky_drift_scale_per_year: f64,
    pub risky_vol_scale_per_sqrt_year: f64,
    pub index_drift_scale_per_year: f64,
    pub index_vol_scale_per_sqrt_year: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInsurer {
    pub premium_rate_per_year: Vec<f64>,
    pub claim_rate_per_year: Vec<f64>,
    pub severity_rate_per_unit: f64,
    pub risk_aversion_per_unit: f64,
    pub sensitivity: f64,
    pub reinsurance_loading: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub claim_scale: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawLattice {
    pub state_step: f64,
    pub time_step_years: f64,
    pub x1_bounds: [f64; 2],
    pub x2_bounds: [f64; 2],
    pub z_bounds: [f64; 2],
    pub retention_levels: usize,
    pub investment_min: f64,
    pub investment_max: f64,
    pub investment_step: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Search {
    BestResponse,
    Exhaustive,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Cfl {
    Strict,
    Signed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSolver {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nash_search: Option<Search>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tolerance_utility: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_rounds: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cfl_policy: Option<Cfl>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawInitial {
    pub x1: f64,
    pub x2: f64,
    pub z: f64,
    /// One-based.
    pub regime: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSimulation {
    pub path_count: u64,
    pub euler_step_years: f64,
    pub seed: u64,
    pub initial_states: Vec<RawInitial>,
    #[serde(default)]
    pub emit_paths: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawConsistency {
    pub samples: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawSweep {
    pub x1: f64,
    pub x2: f64,
    pub z: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RawOutput {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub directory: Option<PathBuf>,
    #[serde(default)]
    pub full_history: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSettings {
    pub path_count: u64,
    pub euler_step: f64,
    pub seed: u64,
    pub initial_states: Vec<(State, Regime)>,
    pub emit_paths: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencySettings {
    pub samples: usize,
    pub seed: u64,
}

/// Fixed coordinates for the figure sweeps; the varied one is ignored.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepPoint {
    pub x1: f64,
    pub x2: f64,
    pub z: f64,
}

impl Default for SweepPoint {
    fn default() -> Self {
        Self {
            x1: 1.0,
            x2: 0.0,
            z: 1.01,
        }
    }
}

/// A fully validated run description.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub game: GameSpec,
    pub lattice: LatticeSpec,
    pub search: NashSearch,
    pub tolerance: f64,
    pub max_rounds: usize,
    pub cfl: CflPolicy,
    pub simulation: Option<SimSettings>,
    pub consistency: ConsistencySettings,
    pub sweep: SweepPoint,
    pub output_directory: PathBuf,
    pub full_history: bool,
}

impl RunConfig {
    pub fn solver_options(&self, workers: Option<usize>) -> SolverOptions {
        SolverOptions {
            search: self.search,
            tolerance: self.tolerance,
            max_rounds: self.max_rounds,
            cfl: self.cfl,
            full_history: self.full_history,
            workers,
            ..SolverOptions::default()
        }
    }

    /// The raw tree that loads back into this configuration.
    pub fn to_raw(&self) -> RawConfig {
        let g = &self.game;
        let insurer = |ins: &InsurerSpec| RawInsurer {
            premium_rate_per_year: ins.premium_rate.clone(),
            claim_rate_per_year: ins.claim_rate.clone(),
            severity_rate_per_unit: ins.severity_rate,
            risk_aversion_per_unit: ins.risk_aversion,
            sensitivity: ins.sensitivity,
            reinsurance_loading: ins.loading,
            claim_scale: Some(ins.claim_scale.clone()),
        };
        let l = &self.lattice;
        let pair = |iv: Interval| [iv.lower, iv.upper];
        RawConfig {
            game: RawGame {
                horizon_years: g.horizon,
                regime_generator_per_year: g.generator.rows().to_vec(),
                reinsurance_mode: match g.mode() {
                    ReinsuranceMode::Proportional => Mode::Proportional,
                    ReinsuranceMode::ExcessOfLoss => Mode::ExcessOfLoss,
                },
                tail_probability: Some(g.tail_probability),
                market: RawMarket {
                    risk_free_rate_per_year: g.market.risk_free_rate.clone(),
                    risky_drift_scale_per_year: g.market.risky_drift_scale,
                    risky_vol_scale_per_sqrt_year: g.market.risky_vol_scale,
                    index_drift_scale_per_year: g.market.index_drift_scale,
                    index_vol_scale_per_sqrt_year: g.market.index_vol_scale,
                },
                insurers: [insurer(&g.insurers[0]), insurer(&g.insurers[1])],
            },
            lattice: RawLattice {
                state_step: l.state_step,
                time_step_years: l.time_step,
                x1_bounds: pair(l.bounds[0]),
                x2_bounds: pair(l.bounds[1]),
                z_bounds: pair(l.bounds[2]),
                retention_levels: l.retention_levels,
                investment_min: l.investment_min,
                investment_max: l.investment_max,
                investment_step: l.investment_step,
            },
            solver: Some(RawSolver {
                nash_search: Some(match self.search {
                    NashSearch::BestResponse => Search::BestResponse,
                    NashSearch::Exhaustive => Search::Exhaustive,
                }),
                tolerance_utility: Some(self.tolerance),
                max_rounds: Some(self.max_rounds),
                cfl_policy: Some(match self.cfl {
                    CflPolicy::Strict => Cfl::Strict,
                    CflPolicy::Signed => Cfl::Signed,
                }),
            }),
            simulation: self.simulation.as_ref().map(|s| RawSimulation {
                path_count: s.path_count,
                euler_step_years: s.euler_step,
                seed: s.seed,
                initial_states: s
                    .initial_states
                    .iter()
                    .map(|(st, r)| RawInitial {
                        x1: st.x1,
                        x2: st.x2,
                        z: st.z,
                        regime: r.number(),
                    })
                    .collect(),
                emit_paths: s.emit_paths,
            }),
            consistency: Some(RawConsistency {
                samples: self.consistency.samples,
                seed: self.consistency.seed,
            }),
            sweep: Some(RawSweep {
                x1: self.sweep.x1,
                x2: self.sweep.x2,
                z: self.sweep.z,
            }),
            output: Some(RawOutput {
                directory: Some(self.output_directory.clone()),
                full_history: self.full_history,
            }),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&self.to_raw()).expect("config serializes")
    }
}

#[derive(Debug)]
pub enum ConfigError {
    Io(PathBuf, std::io::Error),
    Parse { line: usize, column: usize, message: String },
    Invalid(Vec<Violation>),
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            ConfigError::Io(p, e) => write!(f, "cannot read {}: {e}", p.display()),
            ConfigError::Parse { line, column, message } => {
                write!(f, "parse error at line {line}, column {column}: {message}")
            }
            ConfigError::Invalid(v) => {
                writeln!(f, "invalid configuration ({} problems):", v.len())?;
                for x in v {
                    writeln!(f, "  - {x}")?;
                }
                Ok(())
            }
        }
    }
}

impl std::error::Error for ConfigError {}

/// Model-side field names mapped to their configuration spelling.
const FIELD_NAMES: [(&str, &str); 14] = [
    ("game.generator", "game.regime_generator_per_year"),
    ("game.horizon", "game.horizon_years"),
    (".risk_free_rate", ".risk_free_rate_per_year"),
    (".risky_drift_scale", ".risky_drift_scale_per_year"),
    (".risky_vol_scale", ".risky_vol_scale_per_sqrt_year"),
    (".index_drift_scale", ".index_drift_scale_per_year"),
    (".index_vol_scale", ".index_vol_scale_per_sqrt_year"),
    (".premium_rate", ".premium_rate_per_year"),
    (".claim_rate", ".claim_rate_per_year"),
    (".severity_rate", ".severity_rate_per_unit"),
    (".risk_aversion", ".risk_aversion_per_unit"),
    (".loading", ".reinsurance_loading"),
    (".mode", ".reinsurance_mode"),
    ("lattice.time_step", "lattice.time_step_years"),
];

fn config_path(model_path: &str) -> String {
    let mut out = model_path.to_string();
    for (from, to) in FIELD_NAMES {
        if let Some(pos) = out.find(from) {
            let end = pos + from.len();
            let boundary = out[end..].chars().next().is_none_or(|c| c == '.' || c == '[');
            if boundary {
                out.replace_range(pos..end, to);
            }
        }
    }
    out
}

pub fn parse(text: &str) -> Result<RawConfig, ConfigError> {
    serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })
}

/// Read, parse and validate a configuration file.
pub fn load(path: &Path) -> Result<RunConfig, ConfigError> {
    let text = std::fs::read_to_string(path).map_err(|e| ConfigError::Io(path.to_path_buf(), e))?;
    build(parse(&text)?)
}

/// Validate a raw tree, reporting every problem at once.
pub fn build(raw: RawConfig) -> Result<RunConfig, ConfigError> {
    let mut problems: Vec<Violation> = Vec::new();
    let g = &raw.game;
    let m = g.regime_generator_per_year.len();
    let mode = match g.reinsurance_mode {
        Mode::Proportional => ReinsuranceMode::Proportional,
        Mode::ExcessOfLoss => ReinsuranceMode::ExcessOfLoss,
    };
    let insurer = |r: &RawInsurer| InsurerSpec {
        premium_rate: r.premium_rate_per_year.clone(),
        claim_rate: r.claim_rate_per_year.clone(),
        severity_rate: r.severity_rate_per_unit,
        risk_aversion: r.risk_aversion_per_unit,
        sensitivity: r.sensitivity,
        loading: r.reinsurance_loading,
        mode,
        claim_scale: r.claim_scale.clone().unwrap_or_else(|| vec![1.0; m]),
    };
    let generator = match RegimeGenerator::new(g.regime_generator_per_year.clone()) {
        Ok(q) => q,
        Err(insgame_core::Error::Invalid(v)) => {
            problems.extend(v.into_iter().map(|v| Violation::new(format!("game.{}", v.path), v.message)));
            RegimeGenerator::single()
        }
        Err(e) => return Err(ConfigError::Invalid(vec![Violation::new("game.generator", e.to_string())])),
    };
    let game = GameSpec {
        generator,
        market: MarketCoefficients {
            risk_free_rate: g.market.risk_free_rate_per_year.clone(),
            risky_drift_scale: g.market.risky_drift_scale_per_year,
            risky_vol_scale: g.market.risky_vol_scale_per_sqrt_year,
            index_drift_scale: g.market.index_drift_scale_per_year,
            index_vol_scale: g.market.index_vol_scale_per_sqrt_year,
        },
        insurers: [insurer(&g.insurers[0]), insurer(&g.insurers[1])],
        horizon: g.horizon_years,
        tail_probability: g.tail_probability.unwrap_or(DEFAULT_TAIL_PROBABILITY),
    };
    if problems.is_empty() {
        problems.extend(game.validate());
    } else {
        // regime count unknown; still check everything that does not depend on it
        problems.extend(game.validate().into_iter().filter(|v| !v.message.contains("per regime")));
    }
    let l = &raw.lattice;
    let lattice = LatticeSpec {
        state_step: l.state_step,
        time_step: l.time_step_years,
        bounds: [
            Interval::new(l.x1_bounds[0], l.x1_bounds[1]),
            Interval::new(l.x2_bounds[0], l.x2_bounds[1]),
            Interval::new(l.z_bounds[0], l.z_bounds[1]),
        ],
        retention_levels: l.retention_levels,
        investment_min: l.investment_min,
        investment_max: l.investment_max,
        investment_step: l.investment_step,
    };
    problems.extend(lattice.validate(game.horizon));
    if problems.is_empty() {
        for i in game.generator.regimes() {
            let lam = game.total_claim_rate(i) * lattice.time_step;
            if lam >= 1.0 {
                problems.push(Violation::new(
                    "lattice.time_step",
                    format!("total claim rate times time step is {lam} in regime {}; must be below 1", i.number()),
                ));
            }
        }
    }

    let solver = raw.solver.clone().unwrap_or(RawSolver {
        nash_search: None,
        tolerance_utility: None,
        max_rounds: None,
        cfl_policy: None,
    });
    let tolerance = solver.tolerance_utility.unwrap_or(DEFAULT_TOLERANCE);
    if !(tolerance >= 0.0 && tolerance.is_finite()) {
        problems.push(Violation::new("solver.tolerance_utility", format!("{tolerance} must be nonnegative")));
    }
    let max_rounds = solver.max_rounds.unwrap_or(DEFAULT_MAX_ROUNDS);
    if max_rounds == 0 {
        problems.push(Violation::new("solver.max_rounds", "must be at least 1"));
    }

    let in_bounds = |x: f64, d: usize| lattice.bounds[d].lower <= x && x <= lattice.bounds[d].upper;
    let simulation = raw.simulation.as_ref().map(|s| {
        if s.path_count == 0 {
            problems.push(Violation::new("simulation.path_count", "must be at least 1"));
        }
        let dt = s.euler_step_years;
        if !(dt > 0.0 && dt <= lattice.time_step + 1e-15) {
            problems.push(Violation::new(
                "simulation.euler_step_years",
                format!("{dt} must be positive and no larger than the lattice time step"),
            ));
        } else {
            let n = (game.horizon / dt).round();
            if (n * dt - game.horizon).abs() > insgame_core::montecarlo::STEP_DIVISION_TOL {
                problems.push(Violation::new(
                    "simulation.euler_step_years",
                    format!("{dt} does not divide the horizon {}", game.horizon),
                ));
            }
        }
        if s.initial_states.is_empty() {
            problems.push(Violation::new("simulation.initial_states", "at least one initial state required"));
        }
        let mut initial = Vec::new();
        for (n, st) in s.initial_states.iter().enumerate() {
            for (d, (name, x)) in [("x1", st.x1), ("x2", st.x2), ("z", st.z)].into_iter().enumerate() {
                if !in_bounds(x, d) {
                    problems.push(Violation::new(
                        format!("simulation.initial_states[{n}].{name}"),
                        format!("{x} lies outside the lattice bounds"),
                    ));
                }
            }
            if st.regime == 0 || st.regime > m {
                problems.push(Violation::new(
                    format!("simulation.initial_states[{n}].regime"),
                    format!("{} outside 1..={m}", st.regime),
                ));
            }
            initial.push((State::new(st.x1, st.x2, st.z), Regime(st.regime.saturating_sub(1))));
        }
        SimSettings {
            path_count: s.path_count,
            euler_step: dt,
            seed: s.seed,
            initial_states: initial,
            emit_paths: s.emit_paths,
        }
    });

    let consistency = raw
        .consistency
        .as_ref()
        .map(|c| ConsistencySettings { samples: c.samples, seed: c.seed })
        .unwrap_or(ConsistencySettings { samples: 1000, seed: 0 });
    if consistency.samples == 0 {
        problems.push(Violation::new("consistency.samples", "must be at least 1"));
    }
    let sweep = raw
        .sweep
        .as_ref()
        .map(|s| SweepPoint { x1: s.x1, x2: s.x2, z: s.z })
        .unwrap_or_default();

    let output = raw.output.clone().unwrap_or(RawOutput { directory: None, full_history: false });

    if !problems.is_empty() {
        for v in &mut problems {
            v.path = config_path(&v.path);
        }
        return Err(ConfigError::Invalid(problems));
    }
    Ok(RunConfig {
        game,
        lattice,
        search: match solver.nash_search.unwrap_or(Search::BestResponse) {
            Search::BestResponse => NashSearch::BestResponse,
            Search::Exhaustive => NashSearch::Exhaustive,
        },
        tolerance,
        max_rounds,
        cfl: match solver.cfl_policy.unwrap_or(Cfl::Strict) {
            Cfl::Strict => CflPolicy::Strict,
            Cfl::Signed => CflPolicy::Signed,
        },
        simulation,
        consistency,
        sweep,
        output_directory: output.directory.unwrap_or_else(|| PathBuf::from("out")),
        full_history: output.full_history,
    })
}

/// Fixed coordinates of a figure sweep must sit inside the lattice.
pub fn check_sweep(cfg: &RunConfig, varied: usize) -> Result<(), ConfigError> {
    let mut problems = Vec::new();
    let p = cfg.sweep;
    for (d, (name, x)) in [("x1", p.x1), ("x2", p.x2), ("z", p.z)].into_iter().enumerate() {
        let iv = cfg.lattice.bounds[d];
        if d != varied && !(iv.lower <= x && x <= iv.upper) {
            problems.push(Violation::new(
                format!("sweep.{name}"),
                format!("{x} lies outside [{}, {}]", iv.lower, iv.upper),
            ));
        }
    }
    if problems.is_empty() {
        Ok(())
    } else {
        Err(ConfigError::Invalid(problems))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const BUNDLED: &str = include_str!("../configs/paper_section5.cfg");

    #[test]
    fn bundled_config_loads_table_values() {
        let cfg = build(parse(BUNDLED).unwrap()).unwrap();
        let g = &cfg.game;
        assert_eq!(g.generator.rows(), &[vec![-0.5, 0.5], vec![0.5, -0.5]]);
        assert_eq!(g.insurers[0].risk_aversion, 17.0);
        assert_eq!(g.insurers[1].risk_aversion, 21.0);
        assert_eq!(g.insurers[0].sensitivity, 0.8);
        assert_eq!(g.insurers[1].sensitivity, 0.7);
        assert_eq!(g.insurers[0].severity_rate, 0.3);
        assert_eq!(g.insurers[1].severity_rate, 0.2);
        assert_eq!(g.insurers[0].loading, 1.1);
        assert_eq!(g.insurers[1].loading, 1.15);
        assert_eq!(g.market.risk_free_rate, vec![0.02, 0.03]);
        assert_eq!(g.insurers[0].premium_rate, vec![0.05, 0.10]);
        assert_eq!(g.insurers[1].premium_rate, vec![0.02, 0.20]);
        assert_eq!(g.insurers[0].claim_rate, vec![0.2, 0.8]);
        assert_eq!(g.insurers[1].claim_rate, vec![0.3, 0.7]);
        assert_eq!(g.horizon, 0.08);
        assert_eq!(g.tail_probability, 1e-6);
        assert_eq!(cfg.lattice.time_step, 0.04);
        assert_eq!(cfg.lattice.state_step, 0.2);
        assert_eq!(cfg.lattice.retention_levels, 6);
        let grid = cfg.lattice.control_grid();
        assert_eq!(grid.players[0].investment.len(), 31);
        assert_eq!(grid.players[0].investment[0], -3.0);
        assert!((grid.players[0].investment[30] - 3.0).abs() < 1e-12);
        assert_eq!(cfg.tolerance, 1e-12);
        assert_eq!(cfg.cfl, CflPolicy::Signed);
    }

    #[test]
    fn negative_claim_rate_names_the_field() {
        let mut raw = parse(BUNDLED).unwrap();
        raw.game.insurers[1].claim_rate_per_year[0] = -0.3;
        raw.lattice.retention_levels = 1;
        let err = build(raw).unwrap_err();
        let ConfigError::Invalid(v) = err else { panic!("{err}") };
        let paths: Vec<_> = v.iter().map(|v| v.path.as_str()).collect();
        assert!(paths.contains(&"game.insurers[1].claim_rate_per_year[0]"), "{paths:?}");
        assert!(paths.contains(&"lattice.retention_levels"), "{paths:?}");
    }

    #[test]
    fn parse_errors_carry_line_numbers() {
        let text = BUNDLED.replacen("\"horizon_years\"", "\"horizon_years\" 0.08,", 1);
        match parse(&text) {
            Err(ConfigError::Parse { line, .. }) => assert!(line > 1),
            other => panic!("{other:?}"),
        }
        let text = BUNDLED.replacen("\"horizon_years\"", "\"horizon_yrs\"", 1);
        assert!(matches!(parse(&text), Err(ConfigError::Parse { .. })));
    }

    #[test]
    fn simulation_section_is_optional() {
        let mut raw = parse(BUNDLED).unwrap();
        raw.simulation = None;
        assert!(build(raw).unwrap().simulation.is_none());
    }

    #[test]
    fn defaults_fill_documented_fields_only() {
        let mut raw = parse(BUNDLED).unwrap();
        raw.game.tail_probability = None;
        raw.solver = None;
        let cfg = build(raw).unwrap();
        assert_eq!(cfg.game.tail_probability, 1e-6);
        assert_eq!(cfg.tolerance, 1e-12);
        assert_eq!(cfg.cfl, CflPolicy::Strict);
    }

    #[test]
    fn round_trip_is_lossless() {
        let cfg = build(parse(BUNDLED).unwrap()).unwrap();
        let again = build(parse(&cfg.to_json()).unwrap()).unwrap();
        assert_eq!(cfg, again);
    }

    #[test]
    fn sweep_point_must_lie_inside() {
        let mut cfg = build(parse(BUNDLED).unwrap()).unwrap();
        assert!(check_sweep(&cfg, 0).is_ok());
        cfg.sweep.z = 5.0;
        assert!(check_sweep(&cfg, 0).is_err());
    }
}
