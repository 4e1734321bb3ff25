//! Truncated state grid, time discretization and control grids.

use crate::error::{domain, Result, Violation};
use crate::model::{JointControl, PlayerControl, Regime, State};

/// Relative tolerance for "is an integer multiple of the step".
const MULTIPLE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatticeSpec {
    /// Spatial step `h`, shared by all three coordinates.
    pub state_step: f64,
    /// Time step `delta`.
    pub time_step: f64,
    /// Bounds for `(x1, x2, z)`.
    pub bounds: [Interval; 3],
    pub retention_levels: usize,
    pub investment_min: f64,
    pub investment_max: f64,
    pub investment_step: f64,
}

const DIM_NAMES: [&str; 3] = ["x1_bounds", "x2_bounds", "z_bounds"];

fn steps_in(width: f64, step: f64) -> Option<usize> {
    let ratio = width / step;
    let n = ratio.round();
    if n >= 0.0 && (ratio - n).abs() <= MULTIPLE_TOL * n.max(1.0) {
        Some(n as usize)
    } else {
        None
    }
}

impl LatticeSpec {
    /// Number of time slices `N = floor(T / delta)`.
    pub fn time_steps(&self, horizon: f64) -> usize {
        (horizon / self.time_step + MULTIPLE_TOL).floor() as usize
    }

    pub fn validate(&self, horizon: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        let h = self.state_step;
        if !(h > 0.0 && h.is_finite()) {
            out.push(Violation::new("lattice.state_step", format!("{h} must be positive")));
        }
        let dt = self.time_step;
        if !(dt > 0.0 && dt.is_finite()) {
            out.push(Violation::new("lattice.time_step", format!("{dt} must be positive")));
        } else if horizon > 0.0 && self.time_steps(horizon) < 1 {
            out.push(Violation::new(
                "lattice.time_step",
                format!("time step {dt} exceeds the horizon {horizon}"),
            ));
        }
        for (d, iv) in self.bounds.iter().enumerate() {
            let path = format!("lattice.{}", DIM_NAMES[d]);
            if !(iv.lower.is_finite() && iv.upper.is_finite()) || iv.upper < iv.lower {
                out.push(Violation::new(
                    path,
                    format!("[{}, {}] is not a closed finite interval", iv.lower, iv.upper),
                ));
            } else if h > 0.0 && steps_in(iv.width(), h).is_none() {
                out.push(Violation::new(
                    path,
                    format!("width {} is not an integer multiple of the step {h}", iv.width()),
                ));
            }
        }
        if !(self.bounds[2].lower > 0.0) {
            out.push(Violation::new(
                "lattice.z_bounds",
                format!("lower bound {} must be positive", self.bounds[2].lower),
            ));
        }
        if self.retention_levels < 2 {
            out.push(Violation::new(
                "lattice.retention_levels",
                format!("{} levels; at least 2 required", self.retention_levels),
            ));
        }
        let bs = self.investment_step;
        if !(bs > 0.0 && bs.is_finite()) {
            out.push(Violation::new("lattice.investment_step", format!("{bs} must be positive")));
        } else if !(self.investment_max >= self.investment_min)
            || steps_in(self.investment_max - self.investment_min, bs).is_none()
        {
            out.push(Violation::new(
                "lattice.investment_max",
                format!(
                    "range [{}, {}] is not an integer multiple of the step {bs}",
                    self.investment_min, self.investment_max
                ),
            ));
        }
        out
    }

    /// Joint control list for both players sharing the configured grid.
    pub fn control_grid(&self) -> JointControlGrid {
        let g = ControlGrid::uniform(
            self.retention_levels,
            self.investment_min,
            self.investment_max,
            self.investment_step,
        );
        JointControlGrid::new(g.clone(), g)
    }
}

/// Integer coordinates of a lattice node together with its regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeIndex {
    pub j1: usize,
    pub j2: usize,
    pub jz: usize,
    pub regime: Regime,
}

impl NodeIndex {
    pub fn new(j1: usize, j2: usize, jz: usize, regime: Regime) -> Self {
        Self { j1, j2, jz, regime }
    }

    pub fn coord(&self, d: usize) -> usize {
        match d {
            0 => self.j1,
            1 => self.j2,
            _ => self.jz,
        }
    }

    pub fn with_coord(mut self, d: usize, j: usize) -> Self {
        match d {
            0 => self.j1 = j,
            1 => self.j2 = j,
            _ => self.jz = j,
        }
        self
    }
}

/// A validated lattice: grid extents, regime count and number of time slices.
#[derive(Debug, Clone, PartialEq)]
pub struct Lattice {
    spec: LatticeSpec,
    counts: [usize; 3],
    regimes: usize,
    steps: usize,
}

impl Lattice {
    pub fn new(spec: LatticeSpec, horizon: f64, regimes: usize) -> Result<Self> {
        let v = spec.validate(horizon);
        if !v.is_empty() {
            return Err(crate::Error::Invalid(v));
        }
        if regimes == 0 {
            return domain("lattice needs at least one regime");
        }
        let counts = [0, 1, 2].map(|d| steps_in(spec.bounds[d].width(), spec.state_step).unwrap() + 1);
        let steps = spec.time_steps(horizon);
        Ok(Self {
            spec,
            counts,
            regimes,
            steps,
        })
    }

    pub fn spec(&self) -> &LatticeSpec {
        &self.spec
    }

    pub fn step(&self) -> f64 {
        self.spec.state_step
    }

    pub fn time_step(&self) -> f64 {
        self.spec.time_step
    }

    /// Number of time steps `N`; slices run `0..=N`.
    pub fn time_steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, n: usize) -> f64 {
        n as f64 * self.spec.time_step
    }

    pub fn counts(&self) -> [usize; 3] {
        self.counts
    }

    pub fn regimes(&self) -> usize {
        self.regimes
    }

    pub fn nodes_per_regime(&self) -> usize {
        self.counts[0] * self.counts[1] * self.counts[2]
    }

    pub fn node_count(&self) -> usize {
        self.nodes_per_regime() * self.regimes
    }

    pub fn is_valid(&self, node: &NodeIndex) -> bool {
        node.j1 < self.counts[0]
            && node.j2 < self.counts[1]
            && node.jz < self.counts[2]
            && node.regime.0 < self.regimes
    }

    /// Row-major flat index: regime, then x1, x2, z.
    pub fn flat(&self, node: &NodeIndex) -> usize {
        ((node.regime.0 * self.counts[0] + node.j1) * self.counts[1] + node.j2) * self.counts[2] + node.jz
    }

    pub fn unflat(&self, mut idx: usize) -> NodeIndex {
        let jz = idx % self.counts[2];
        idx /= self.counts[2];
        let j2 = idx % self.counts[1];
        idx /= self.counts[1];
        let j1 = idx % self.counts[0];
        NodeIndex::new(j1, j2, jz, Regime(idx / self.counts[0]))
    }

    /// Flat offset of a unit move along dimension `d`.
    pub fn stride(&self, d: usize) -> usize {
        match d {
            0 => self.counts[1] * self.counts[2],
            1 => self.counts[2],
            _ => 1,
        }
    }

    pub fn regime_stride(&self) -> usize {
        self.nodes_per_regime()
    }

    pub fn nodes(&self) -> impl Iterator<Item = NodeIndex> + '_ {
        (0..self.node_count()).map(|i| self.unflat(i))
    }

    /// True when no coordinate sits on a bound, so no neighbour gets clamped.
    pub fn is_interior(&self, node: &NodeIndex) -> bool {
        (0..3).all(|d| {
            let j = node.coord(d);
            j > 0 && j + 1 < self.counts[d]
        })
    }

    pub fn coordinate(&self, d: usize, j: usize) -> f64 {
        self.spec.bounds[d].lower + j as f64 * self.spec.state_step
    }

    pub fn node_to_state(&self, node: &NodeIndex) -> Result<State> {
        if !self.is_valid(node) {
            return domain(format!("node {node:?} outside lattice with counts {:?}", self.counts));
        }
        Ok(self.state_of(node))
    }

    /// Coordinates of a node already known to be valid.
    pub fn state_of(&self, node: &NodeIndex) -> State {
        State::new(
            self.coordinate(0, node.j1),
            self.coordinate(1, node.j2),
            self.coordinate(2, node.jz),
        )
    }

    /// Nearest grid index along `d`, clamped to the bounds; ties go to the lower index.
    pub fn nearest_coord(&self, d: usize, x: f64) -> usize {
        let r = (x - self.spec.bounds[d].lower) / self.spec.state_step;
        let j = (r - 0.5).ceil();
        if j.is_nan() || j <= 0.0 {
            0
        } else {
            (j as usize).min(self.counts[d] - 1)
        }
    }

    /// Move `j` by `delta` steps along `d`, clamping at the bounds.
    pub fn shift(&self, d: usize, j: usize, delta: i64) -> usize {
        let t = j as i64 + delta;
        t.clamp(0, self.counts[d] as i64 - 1) as usize
    }

    pub fn state_to_nearest_node(&self, state: State, regime: Regime) -> NodeIndex {
        NodeIndex::new(
            self.nearest_coord(0, state.x1),
            self.nearest_coord(1, state.x2),
            self.nearest_coord(2, state.z),
            regime,
        )
    }
}

/// One player's control grid, ordered retention-major then investment.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlGrid {
    pub retention: Vec<f64>,
    pub investment: Vec<f64>,
}

impl ControlGrid {
    pub fn uniform(levels: usize, b_min: f64, b_max: f64, b_step: f64) -> Self {
        let levels = levels.max(2);
        let retention = (0..levels).map(|k| k as f64 / (levels - 1) as f64).collect();
        let nb = steps_in(b_max - b_min, b_step).unwrap_or(0) + 1;
        let investment = (0..nb).map(|k| b_min + k as f64 * b_step).collect();
        Self {
            retention,
            investment,
        }
    }

    /// A grid with a single admissible control.
    pub fn fixed(c: PlayerControl) -> Self {
        Self {
            retention: vec![c.retention],
            investment: vec![c.investment],
        }
    }

    pub fn len(&self) -> usize {
        self.retention.len() * self.investment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn retention_index(&self, idx: usize) -> usize {
        idx / self.investment.len()
    }

    pub fn control(&self, idx: usize) -> PlayerControl {
        let nb = self.investment.len();
        PlayerControl {
            retention: self.retention[idx / nb],
            investment: self.investment[idx % nb],
        }
    }

    /// Index of an exact grid member.
    pub fn index_of(&self, c: PlayerControl) -> Option<usize> {
        let ia = self.retention.iter().position(|&a| a == c.retention)?;
        let ib = self.investment.iter().position(|&b| b == c.investment)?;
        Some(ia * self.investment.len() + ib)
    }
}

/// Cartesian product of the two players' grids, ordered by `(a1, b1, a2, b2)`.
#[derive(Debug, Clone, PartialEq)]
pub struct JointControlGrid {
    pub players: [ControlGrid; 2],
}

impl JointControlGrid {
    pub fn new(p1: ControlGrid, p2: ControlGrid) -> Self {
        Self { players: [p1, p2] }
    }

    pub fn len(&self) -> usize {
        self.players[0].len() * self.players[1].len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn joint_index(&self, i1: usize, i2: usize) -> usize {
        i1 * self.players[1].len() + i2
    }

    pub fn split(&self, idx: usize) -> (usize, usize) {
        (idx / self.players[1].len(), idx % self.players[1].len())
    }

    pub fn control_of(&self, i1: usize, i2: usize) -> JointControl {
        JointControl::from_players(self.players[0].control(i1), self.players[1].control(i2))
    }

    pub fn control(&self, idx: usize) -> JointControl {
        let (i1, i2) = self.split(idx);
        self.control_of(i1, i2)
    }

    pub fn controls(&self) -> Vec<JointControl> {
        (0..self.len()).map(|i| self.control(i)).collect()
    }
}

#[cfg(test)]
pub(crate) mod fixtures {
    use super::*;

    pub fn published_lattice_spec() -> LatticeSpec {
        LatticeSpec {
            state_step: 0.2,
            time_step: 0.04,
            bounds: [
                Interval::new(-3.0, 3.0),
                Interval::new(-3.0, 3.0),
                Interval::new(0.41, 2.01),
            ],
            retention_levels: 6,
            investment_min: -3.0,
            investment_max: 3.0,
            investment_step: 0.2,
        }
    }

    pub fn small_spec() -> LatticeSpec {
        LatticeSpec {
            bounds: [
                Interval::new(-1.0, 1.0),
                Interval::new(-1.0, 1.0),
                Interval::new(0.5, 1.5),
            ],
            ..published_lattice_spec()
        }
    }
}
