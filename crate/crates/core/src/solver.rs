//! Backward dynamic programming over time slices with a discrete Nash
//! equilibrium search at every node.
//!
//! Player `k`'s one-step backup under joint control `u` is
//!
//! ```text
//! (1 - lambda dt) * sum_y p_D(x, y | u) V_k(n+1, y)
//!   + lambda_k dt * E[V_k(n+1, x_k - claim_k)]
//!   + lambda_l dt * E[V_k(n+1, x_k + kappa_k claim_l)]
//! ```
//!
//! where `p_D` is the diffusion-only stencil, so the three weights sum to one.

use rayon::prelude::*;
use smallvec::SmallVec;

use crate::error::{domain, Error, Result};
use crate::kernel::{
    check_cfl, diffusion_stencil, diffusion_stencil_signed, jump_mixture, jump_targets, scan_cfl,
    stencil_weights, CflScan, JumpTables,
};
use crate::lattice::{JointControlGrid, Lattice, LatticeSpec, NodeIndex};
use crate::model::{GameSpec, JointControl, Player, Regime, State};

/// Improvements below this many utility units do not count.
pub const DEFAULT_TOLERANCE: f64 = 1e-12;
pub const DEFAULT_MAX_ROUNDS: usize = 50;
/// One node in this many gets an a-posteriori regret scan.
pub const DEFAULT_REGRET_STRIDE: usize = 100;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum NashSearch {
    /// Alternating best responses from the smallest joint control, with an
    /// exhaustive fallback when they fail to settle.
    BestResponse,
    /// Scan every joint control; first one (lexicographically) with zero regret.
    Exhaustive,
}

/// What to do when a stencil's self-transition probability is negative.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CflPolicy {
    /// Refuse to solve, reporting the worst offender and the largest admissible step.
    Strict,
    /// Solve anyway with the signed weights (they still sum to one).
    Signed,
}

#[derive(Debug, Clone)]
pub struct SolverOptions {
    pub search: NashSearch,
    pub tolerance: f64,
    pub max_rounds: usize,
    pub cfl: CflPolicy,
    /// Keep every value slice rather than only `t = 0`.
    pub full_history: bool,
    /// Worker threads; `None` uses the rayon default.
    pub workers: Option<usize>,
    pub regret_stride: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            search: NashSearch::BestResponse,
            tolerance: DEFAULT_TOLERANCE,
            max_rounds: DEFAULT_MAX_ROUNDS,
            cfl: CflPolicy::Strict,
            full_history: false,
            workers: None,
            regret_stride: DEFAULT_REGRET_STRIDE,
        }
    }
}

/// Game, lattice and control grids with the precomputed claim shift tables.
#[derive(Debug, Clone)]
pub struct Problem {
    game: GameSpec,
    lattice: Lattice,
    grid: JointControlGrid,
    jumps: JumpTables,
}

impl Problem {
    pub fn new(game: GameSpec, lattice: LatticeSpec) -> Result<Self> {
        let grid = lattice.control_grid();
        Self::with_grid(game, lattice, grid)
    }

    /// Use explicit per-player control grids instead of the lattice's shared one.
    pub fn with_grid(game: GameSpec, lattice: LatticeSpec, grid: JointControlGrid) -> Result<Self> {
        let lattice = Lattice::new(lattice, game.horizon, game.regimes())?;
        let m = game.regimes();
        let mut problems = Vec::new();
        if game.market.risk_free_rate.len() != m {
            problems.push(crate::Violation::new("game.market.risk_free_rate", "one entry per regime required"));
        }
        for (k, ins) in game.insurers.iter().enumerate() {
            for (name, v) in [
                ("premium_rate", &ins.premium_rate),
                ("claim_rate", &ins.claim_rate),
                ("claim_scale", &ins.claim_scale),
            ] {
                if v.len() != m {
                    problems.push(crate::Violation::new(
                        format!("game.insurers[{k}].{name}"),
                        "one entry per regime required",
                    ));
                }
            }
        }
        if !problems.is_empty() {
            return Err(Error::Invalid(problems));
        }
        for i in game.generator.regimes() {
            let lam = game.total_claim_rate(i) * lattice.time_step();
            if !(0.0..1.0).contains(&lam) {
                problems.push(crate::Violation::new(
                    "lattice.time_step",
                    format!(
                        "lambda * dt = {lam} in regime {} must lie in [0, 1)",
                        i.number()
                    ),
                ));
            }
        }
        if grid.players.iter().any(|g| g.is_empty()) {
            problems.push(crate::Violation::new("lattice", "control grid is empty"));
        }
        for (k, g) in grid.players.iter().enumerate() {
            if g.retention.iter().any(|a| !(0.0..=1.0).contains(a)) {
                problems.push(crate::Violation::new(
                    format!("controls[{k}].retention"),
                    "retention levels must lie in [0, 1]",
                ));
            }
        }
        if !problems.is_empty() {
            return Err(Error::Invalid(problems));
        }
        let jumps = JumpTables::build(&game, lattice.step(), &grid)?;
        Ok(Self {
            game,
            lattice,
            grid,
            jumps,
        })
    }

    pub fn game(&self) -> &GameSpec {
        &self.game
    }

    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn grid(&self) -> &JointControlGrid {
        &self.grid
    }

    pub fn cfl_scan(&self) -> CflScan {
        scan_cfl(&self.game, &self.lattice, &self.grid)
    }
}

/// Both players' values over every (regime, node) of one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueSlice {
    nodes: usize,
    data: Vec<f64>,
}

impl ValueSlice {
    pub fn new(nodes: usize) -> Self {
        Self {
            nodes,
            data: vec![0.0; 2 * nodes],
        }
    }

    pub fn get(&self, k: Player, flat: usize) -> f64 {
        self.data[k.index() * self.nodes + flat]
    }

    pub fn set(&mut self, k: Player, flat: usize, v: f64) {
        self.data[k.index() * self.nodes + flat] = v;
    }

    pub fn player(&self, k: Player) -> &[f64] {
        &self.data[k.index() * self.nodes..(k.index() + 1) * self.nodes]
    }

    pub fn len(&self) -> usize {
        self.nodes
    }

    pub fn is_empty(&self) -> bool {
        self.nodes == 0
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    /// Add `c` to every entry.
    pub fn shifted(&self, c: f64) -> Self {
        Self {
            nodes: self.nodes,
            data: self.data.iter().map(|v| v + c).collect(),
        }
    }
}

/// Terminal slice: `V_k(T, x) = U_k(x_k)`.
pub fn terminal_values(problem: &Problem) -> ValueSlice {
    let l = &problem.lattice;
    let mut out = ValueSlice::new(l.node_count());
    for (flat, node) in l.nodes().enumerate() {
        let st = l.state_of(&node);
        for k in Player::BOTH {
            out.set(k, flat, problem.game.insurer(k).utility(st.surplus(k)));
        }
    }
    out
}

/// How the equilibrium at a node was established.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeDiagnostic {
    ConvergedBestResponse,
    VerifiedExhaustive,
    NoPureEquilibrium,
}

impl NodeDiagnostic {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeDiagnostic::ConvergedBestResponse => "converged-best-response",
            NodeDiagnostic::VerifiedExhaustive => "verified-exhaustive",
            NodeDiagnostic::NoPureEquilibrium => "no-pure-equilibrium",
        }
    }
}

/// Outcome of the equilibrium search at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NodeSolution {
    pub joint_index: usize,
    pub control: JointControl,
    pub values: [f64; 2],
    pub diagnostic: NodeDiagnostic,
    pub rounds: usize,
    /// Largest unilateral improvement left at the returned control, when computed.
    pub regret: Option<f64>,
}

/// Everything the backup at one node needs from slice `n + 1`.
struct NodeContext<'a> {
    problem: &'a Problem,
    node: NodeIndex,
    state: State,
    t: f64,
    dt: f64,
    h: f64,
    /// `[player] -> V(self), V(up), V(down), V(z up), V(z down)` along that player's axis.
    local: [[f64; 5]; 2],
    /// `[player] -> (q_ij dt, V at regime j)`.
    switches: [SmallVec<[(f64, f64); 4]>; 2],
    /// `[player][own retention index]` expected value after an own claim.
    own_jump: [SmallVec<[f64; 8]>; 2],
    /// `[player][opponent retention index]` expected value after an opponent claim.
    opp_jump: [SmallVec<[f64; 8]>; 2],
    no_jump_weight: f64,
    claim_weight: [f64; 2],
}

impl<'a> NodeContext<'a> {
    fn new(problem: &'a Problem, next: &ValueSlice, node: NodeIndex, t: f64) -> Self {
        let l = &problem.lattice;
        let g = &problem.game;
        let flat = l.flat(&node);
        let i = node.regime;
        let mut local = [[0.0; 5]; 2];
        let mut switches: [SmallVec<[(f64, f64); 4]>; 2] = Default::default();
        let mut own_jump: [SmallVec<[f64; 8]>; 2] = Default::default();
        let mut opp_jump: [SmallVec<[f64; 8]>; 2] = Default::default();
        let dt = l.time_step();
        let lambda = g.total_claim_rate(i);
        for k in Player::BOTH {
            let d = k.index();
            let jd = node.coord(d);
            let at = |n: NodeIndex| next.get(k, l.flat(&n));
            local[d] = [
                next.get(k, flat),
                at(node.with_coord(d, l.shift(d, jd, 1))),
                at(node.with_coord(d, l.shift(d, jd, -1))),
                at(node.with_coord(2, l.shift(2, node.jz, 1))),
                at(node.with_coord(2, l.shift(2, node.jz, -1))),
            ];
            for j in g.generator.regimes() {
                if j != i {
                    switches[d].push((g.generator.rate(i, j) * dt, at(NodeIndex { regime: j, ..node })));
                }
            }
            if lambda > 0.0 {
                let integrate = |law: &crate::kernel::ShiftLaw| {
                    law.iter()
                        .map(|&(s, p)| p * at(node.with_coord(d, l.shift(d, jd, s))))
                        .sum::<f64>()
                };
                own_jump[d] = problem.jumps.own[d][i.0].iter().map(integrate).collect();
                opp_jump[d] = problem.jumps.opponent[d][i.0].iter().map(integrate).collect();
            }
        }
        let claim_weight = [g.insurers[0].claim_rate[i.0] * dt, g.insurers[1].claim_rate[i.0] * dt];
        Self {
            problem,
            node,
            state: l.state_of(&node),
            t,
            dt,
            h: l.step(),
            local,
            switches,
            own_jump,
            opp_jump,
            no_jump_weight: 1.0 - lambda * dt,
            claim_weight,
        }
    }

    /// Player `k`'s backup at joint grid control `(i1, i2)`.
    fn value(&self, k: Player, i1: usize, i2: usize) -> f64 {
        let grid = &self.problem.grid;
        let u = grid.control_of(i1, i2);
        let d = k.index();
        let w = stencil_weights(&self.problem.game, self.h, self.dt, k, self.state, self.t, self.node.regime, &u);
        let v = &self.local[d];
        let mut diffusion = w.stay * v[0] + w.up * v[1] + w.down * v[2] + w.z_up * v[3] + w.z_down * v[4];
        for &(p, val) in &self.switches[d] {
            diffusion += p * val;
        }
        let mut total = self.no_jump_weight * diffusion;
        if !self.own_jump[d].is_empty() {
            let (own_idx, opp_idx) = match k {
                Player::One => (i1, i2),
                Player::Two => (i2, i1),
            };
            let ia_own = grid.players[d].retention_index(own_idx);
            let ia_opp = grid.players[1 - d].retention_index(opp_idx);
            total += self.claim_weight[d] * self.own_jump[d][ia_own]
                + self.claim_weight[1 - d] * self.opp_jump[d][ia_opp];
        }
        total
    }

    fn values(&self, i1: usize, i2: usize) -> [f64; 2] {
        [self.value(Player::One, i1, i2), self.value(Player::Two, i1, i2)]
    }

    /// Best reply of `k` to the opponent's index, keeping `current` unless beaten by more than `tol`.
    fn best_response(&self, k: Player, current: (usize, usize), tol: f64) -> (usize, f64) {
        let n = self.problem.grid.players[k.index()].len();
        let eval = |c: usize| match k {
            Player::One => self.value(k, c, current.1),
            Player::Two => self.value(k, current.0, c),
        };
        let mut best = match k {
            Player::One => current.0,
            Player::Two => current.1,
        };
        let mut best_v = eval(best);
        for c in 0..n {
            let v = eval(c);
            if v > best_v + tol {
                best = c;
                best_v = v;
            }
        }
        (best, best_v)
    }

    fn regret(&self, i1: usize, i2: usize) -> f64 {
        let [v1, v2] = self.values(i1, i2);
        let n1 = self.problem.grid.players[0].len();
        let n2 = self.problem.grid.players[1].len();
        let best1 = (0..n1).map(|c| self.value(Player::One, c, i2)).fold(f64::NEG_INFINITY, f64::max);
        let best2 = (0..n2).map(|c| self.value(Player::Two, i1, c)).fold(f64::NEG_INFINITY, f64::max);
        (best1 - v1).max(best2 - v2).max(0.0)
    }

    /// Full joint scan: first control with regret within `tol`, else the least-regret one.
    fn exhaustive(&self, tol: f64) -> (usize, usize, f64) {
        let n1 = self.problem.grid.players[0].len();
        let n2 = self.problem.grid.players[1].len();
        let mut j1 = vec![0.0; n1 * n2];
        let mut j2 = vec![0.0; n1 * n2];
        for a in 0..n1 {
            for b in 0..n2 {
                let [v1, v2] = self.values(a, b);
                j1[a * n2 + b] = v1;
                j2[a * n2 + b] = v2;
            }
        }
        let mut best1 = vec![f64::NEG_INFINITY; n2];
        let mut best2 = vec![f64::NEG_INFINITY; n1];
        for a in 0..n1 {
            for b in 0..n2 {
                best1[b] = best1[b].max(j1[a * n2 + b]);
                best2[a] = best2[a].max(j2[a * n2 + b]);
            }
        }
        let mut arg = (0, 0, f64::INFINITY);
        for a in 0..n1 {
            for b in 0..n2 {
                let r = (best1[b] - j1[a * n2 + b]).max(best2[a] - j2[a * n2 + b]).max(0.0);
                if r <= tol {
                    return (a, b, r);
                }
                if r < arg.2 {
                    arg = (a, b, r);
                }
            }
        }
        arg
    }

    fn solve(&self, search: NashSearch, tol: f64, max_rounds: usize) -> NodeSolution {
        let grid = &self.problem.grid;
        let finish = |i1: usize, i2: usize, diagnostic, rounds, regret| NodeSolution {
            joint_index: grid.joint_index(i1, i2),
            control: grid.control_of(i1, i2),
            values: self.values(i1, i2),
            diagnostic,
            rounds,
            regret,
        };
        if search == NashSearch::BestResponse {
            let mut cur = (0usize, 0usize);
            for round in 1..=max_rounds {
                let (b1, _) = self.best_response(Player::One, cur, tol);
                let moved1 = b1 != cur.0;
                cur.0 = b1;
                let (b2, _) = self.best_response(Player::Two, cur, tol);
                let moved2 = b2 != cur.1;
                cur.1 = b2;
                if !moved1 && !moved2 {
                    return finish(cur.0, cur.1, NodeDiagnostic::ConvergedBestResponse, round, None);
                }
            }
        }
        let (a, b, r) = self.exhaustive(tol);
        let diag = if r <= tol {
            NodeDiagnostic::VerifiedExhaustive
        } else {
            NodeDiagnostic::NoPureEquilibrium
        };
        let rounds = if search == NashSearch::BestResponse { max_rounds } else { 0 };
        finish(a, b, diag, rounds, Some(r))
    }
}

fn check_node(problem: &Problem, next: &ValueSlice, node: &NodeIndex) -> Result<()> {
    if !problem.lattice.is_valid(node) {
        return domain(format!("node {node:?} outside lattice"));
    }
    if next.len() != problem.lattice.node_count() {
        return domain(format!(
            "value slice has {} nodes, lattice has {}",
            next.len(),
            problem.lattice.node_count()
        ));
    }
    Ok(())
}

/// Player `k`'s one-step expectation under an arbitrary joint control.
///
/// Built from the public stencil and jump target lists rather than the
/// solver's cached tables.
pub fn node_backup(
    problem: &Problem,
    next: &ValueSlice,
    node: NodeIndex,
    t: f64,
    u: &JointControl,
    k: Player,
    cfl: CflPolicy,
) -> Result<f64> {
    check_node(problem, next, &node)?;
    let g = &problem.game;
    let l = &problem.lattice;
    let stencil = match cfl {
        CflPolicy::Strict => diffusion_stencil(g, l, node, t, u, k)?,
        CflPolicy::Signed => diffusion_stencil_signed(g, l, node, t, u, k)?,
    };
    let diffusion: f64 = stencil.iter().map(|(y, p)| p * next.get(k, l.flat(&y))).sum();
    let dt = l.time_step();
    let lambda = g.total_claim_rate(node.regime);
    if lambda <= 0.0 {
        return Ok(diffusion);
    }
    jump_mixture(g, node.regime)?;
    let jumps: f64 = jump_targets(g, l, node, u, k)?
        .iter()
        .map(|(y, p)| p * next.get(k, l.flat(y)))
        .sum();
    Ok((1.0 - lambda * dt) * diffusion + lambda * dt * jumps)
}

/// Discrete Nash equilibrium at one node given slice `n + 1`.
pub fn nash_at_node(
    problem: &Problem,
    next: &ValueSlice,
    node: NodeIndex,
    t: f64,
    options: &SolverOptions,
) -> Result<NodeSolution> {
    check_node(problem, next, &node)?;
    let ctx = NodeContext::new(problem, next, node, t);
    Ok(ctx.solve(options.search, options.tolerance, options.max_rounds))
}

/// Largest unilateral improvement available at joint grid control `(i1, i2)`.
pub fn node_regret(problem: &Problem, next: &ValueSlice, node: NodeIndex, t: f64, i1: usize, i2: usize) -> Result<f64> {
    check_node(problem, next, &node)?;
    Ok(NodeContext::new(problem, next, node, t).regret(i1, i2))
}

/// Equilibrium controls per node for one time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySlice {
    pub controls: Vec<u32>,
    pub diagnostics: Vec<NodeDiagnostic>,
}

/// Equilibrium feedback controls for slices `0..N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyField {
    lattice: Lattice,
    grid: JointControlGrid,
    slices: Vec<PolicySlice>,
}

impl PolicyField {
    pub fn lattice(&self) -> &Lattice {
        &self.lattice
    }

    pub fn grid(&self) -> &JointControlGrid {
        &self.grid
    }

    pub fn slices(&self) -> &[PolicySlice] {
        &self.slices
    }

    pub fn slice_of(&self, t: f64) -> Result<usize> {
        if self.slices.is_empty() {
            return Err(Error::State("no policy slices; solve first".into()));
        }
        let n = (t / self.lattice.time_step() + 1e-9).floor();
        let n = if n.is_nan() || n < 0.0 { 0 } else { n as usize };
        Ok(n.min(self.slices.len() - 1))
    }

    pub fn control(&self, n: usize, node: &NodeIndex) -> JointControl {
        let idx = self.slices[n].controls[self.lattice.flat(node)] as usize;
        self.grid.control(idx)
    }

    pub fn diagnostic(&self, n: usize, node: &NodeIndex) -> NodeDiagnostic {
        self.slices[n].diagnostics[self.lattice.flat(node)]
    }

    /// Stored control at slice `floor(t / dt)` and the nearest node.
    pub fn extract(&self, t: f64, state: State, regime: Regime) -> Result<JointControl> {
        let n = self.slice_of(t)?;
        if regime.0 >= self.lattice.regimes() {
            return domain(format!("regime {} outside lattice", regime.number()));
        }
        let node = self.lattice.state_to_nearest_node(state, regime);
        Ok(self.control(n, &node))
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NashDiagnostics {
    /// Most best-response rounds needed at any node.
    pub best_response_iterations: usize,
    pub total_best_response_rounds: u64,
    /// Largest unilateral improvement found by the regret scans at equilibrium nodes.
    pub max_regret: f64,
    pub nodes_without_pure_equilibrium: usize,
    pub nodes_verified_exhaustive: usize,
    pub regret_checked_nodes: usize,
    /// Worst self-transition probability over the grid (negative under signed weights).
    pub worst_self_probability: f64,
}

#[derive(Debug, Clone)]
pub struct Solution {
    /// Slice `n` at index `n`; `None` where history was not kept.
    pub values: Vec<Option<ValueSlice>>,
    pub policy: PolicyField,
    pub diagnostics: NashDiagnostics,
}

impl Solution {
    pub fn value(&self, n: usize, k: Player, node: &NodeIndex) -> Option<f64> {
        let l = self.policy.lattice();
        self.values.get(n)?.as_ref().map(|s| s.get(k, l.flat(node)))
    }

    pub fn initial(&self) -> &ValueSlice {
        self.values[0].as_ref().expect("slice 0 is always kept")
    }
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool> {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(w) = workers {
        b = b.num_threads(w.max(1));
    }
    b.build().map_err(|e| Error::State(format!("thread pool: {e}")))
}

/// Solve backward from the terminal utilities.
pub fn backward_solve(problem: &Problem, options: &SolverOptions) -> Result<Solution> {
    backward_solve_from(problem, options, terminal_values(problem))
}

/// Solve backward from an explicit terminal slice.
pub fn backward_solve_from(problem: &Problem, options: &SolverOptions, terminal: ValueSlice) -> Result<Solution> {
    let scan = match options.cfl {
        CflPolicy::Strict => check_cfl(&problem.game, &problem.lattice, &problem.grid)?,
        CflPolicy::Signed => problem.cfl_scan(),
    };
    let l = &problem.lattice;
    let steps = l.time_steps();
    let count = l.node_count();
    if terminal.len() != count {
        return domain(format!("terminal slice has {} nodes, lattice has {count}", terminal.len()));
    }
    let pool = pool(options.workers)?;
    let mut values: Vec<Option<ValueSlice>> = vec![None; steps + 1];
    let mut policy_slices: Vec<Option<PolicySlice>> = vec![None; steps];
    let mut diag = NashDiagnostics {
        worst_self_probability: scan.worst_self_probability,
        ..Default::default()
    };
    let stride = options.regret_stride.max(1);
    let mut next = terminal;
    for n in (0..steps).rev() {
        let t = l.time(n);
        let results: Vec<(NodeSolution, Option<f64>)> = pool.install(|| {
            (0..count)
                .into_par_iter()
                .map(|flat| {
                    let node = l.unflat(flat);
                    let ctx = NodeContext::new(problem, &next, node, t);
                    let sol = ctx.solve(options.search, options.tolerance, options.max_rounds);
                    let (i1, i2) = problem.grid.split(sol.joint_index);
                    let regret = match sol.regret {
                        Some(r) => Some(r),
                        None if flat % stride == 0 => Some(ctx.regret(i1, i2)),
                        None => None,
                    };
                    (sol, regret)
                })
                .collect()
        });
        let mut slice = ValueSlice::new(count);
        let mut controls = Vec::with_capacity(count);
        let mut diagnostics = Vec::with_capacity(count);
        for (flat, (sol, regret)) in results.iter().enumerate() {
            slice.set(Player::One, flat, sol.values[0]);
            slice.set(Player::Two, flat, sol.values[1]);
            controls.push(sol.joint_index as u32);
            diagnostics.push(sol.diagnostic);
            diag.best_response_iterations = diag.best_response_iterations.max(sol.rounds);
            diag.total_best_response_rounds += sol.rounds as u64;
            match sol.diagnostic {
                NodeDiagnostic::NoPureEquilibrium => diag.nodes_without_pure_equilibrium += 1,
                NodeDiagnostic::VerifiedExhaustive => diag.nodes_verified_exhaustive += 1,
                NodeDiagnostic::ConvergedBestResponse => {}
            }
            if let (Some(r), false) = (regret, sol.diagnostic == NodeDiagnostic::NoPureEquilibrium) {
                diag.regret_checked_nodes += 1;
                diag.max_regret = diag.max_regret.max(*r);
            }
        }
        policy_slices[n] = Some(PolicySlice { controls, diagnostics });
        let finished = std::mem::replace(&mut next, slice);
        if options.full_history {
            values[n + 1] = Some(finished);
        }
    }
    values[0] = Some(next);
    Ok(Solution {
        values,
        policy: PolicyField {
            lattice: problem.lattice.clone(),
            grid: problem.grid.clone(),
            slices: policy_slices.into_iter().map(|s| s.expect("every slice solved")).collect(),
        },
        diagnostics: diag,
    })
}
