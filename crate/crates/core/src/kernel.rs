//! One-step transition law of the approximating chain.
//!
//! Player `k`'s diffusion stencil moves `x_k` and `z` by one grid step
//! (upwinded drift plus central second differences) or switches regime;
//! the opponent's coordinate stays frozen. Claims move `x_k` by a rounded
//! number of grid steps. Targets beyond the bounds are clamped onto the
//! boundary node and their mass merged there.

use std::collections::BTreeMap;

use smallvec::SmallVec;

use crate::error::{domain, CflViolation, Error, Result};
use crate::lattice::{JointControlGrid, Lattice, NodeIndex};
use crate::model::{
    claim_retained, severity_atoms, surplus_drift, surplus_vol, GameSpec, JointControl, Player,
    Regime, State,
};

/// Tolerance on `sum(p) = 1` for a stencil.
pub const STENCIL_SUM_TOL: f64 = 1e-12;

/// Unclamped weights of player `k`'s diffusion-only law at one node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StencilWeights {
    pub up: f64,
    pub down: f64,
    pub z_up: f64,
    pub z_down: f64,
    /// Total probability of switching regime (split by `q_ij` among targets).
    pub switch_total: f64,
    pub stay: f64,
    pub drift: f64,
    pub vol: f64,
    pub index_drift: f64,
    pub index_vol: f64,
}

/// Weights of the upwind stencil; `stay` may be negative when the CFL condition fails.
pub fn stencil_weights(
    spec: &GameSpec,
    h: f64,
    dt: f64,
    k: Player,
    state: State,
    t: f64,
    i: Regime,
    u: &JointControl,
) -> StencilWeights {
    let drift = surplus_drift(spec, k, state.surplus(k), state.z, i, u);
    let vol = surplus_vol(spec, k, state.z, i, u);
    let index_drift = spec.market.index_drift(t, state.z);
    let index_vol = spec.market.index_vol(t, state.z);
    let r = dt / h;
    let d2 = dt / (2.0 * h * h);
    let var_x = vol * vol;
    let var_z = index_vol * index_vol;
    let exit = spec.generator.exit_rate(i);
    StencilWeights {
        up: r * drift.max(0.0) + d2 * var_x,
        down: r * (-drift).max(0.0) + d2 * var_x,
        z_up: r * index_drift.max(0.0) + d2 * var_z,
        z_down: r * (-index_drift).max(0.0) + d2 * var_z,
        switch_total: exit * dt,
        stay: 1.0 - exit * dt - r * (drift.abs() + index_drift.abs()) - 2.0 * d2 * (var_x + var_z),
        drift,
        vol,
        index_drift,
        index_vol,
    }
}

/// One-step transition law from a node: merged targets plus the self mass.
#[derive(Debug, Clone, PartialEq)]
pub struct Stencil {
    pub node: NodeIndex,
    /// Targets other than the node itself; each appears once.
    pub entries: SmallVec<[(NodeIndex, f64); 8]>,
    pub self_probability: f64,
}

impl Stencil {
    pub fn total(&self) -> f64 {
        self.self_probability + self.entries.iter().map(|e| e.1).sum::<f64>()
    }

    pub fn iter(&self) -> impl Iterator<Item = (NodeIndex, f64)> + '_ {
        std::iter::once((self.node, self.self_probability)).chain(self.entries.iter().copied())
    }

    fn push(&mut self, target: NodeIndex, p: f64) {
        if p == 0.0 {
            return;
        }
        if target == self.node {
            self.self_probability += p;
        } else if let Some(e) = self.entries.iter_mut().find(|e| e.0 == target) {
            e.1 += p;
        } else {
            self.entries.push((target, p));
        }
    }
}

/// Player `k`'s diffusion stencil, permitting a negative self probability.
pub fn diffusion_stencil_signed(
    spec: &GameSpec,
    lattice: &Lattice,
    node: NodeIndex,
    t: f64,
    u: &JointControl,
    k: Player,
) -> Result<Stencil> {
    let state = lattice.node_to_state(&node)?;
    let w = stencil_weights(spec, lattice.step(), lattice.time_step(), k, state, t, node.regime, u);
    let d = k.index();
    let mut s = Stencil {
        node,
        entries: SmallVec::new(),
        self_probability: w.stay,
    };
    let jd = node.coord(d);
    s.push(node.with_coord(d, lattice.shift(d, jd, 1)), w.up);
    s.push(node.with_coord(d, lattice.shift(d, jd, -1)), w.down);
    let jz = node.jz;
    s.push(node.with_coord(2, lattice.shift(2, jz, 1)), w.z_up);
    s.push(node.with_coord(2, lattice.shift(2, jz, -1)), w.z_down);
    let dt = lattice.time_step();
    for j in spec.generator.regimes() {
        if j != node.regime {
            let q = spec.generator.rate(node.regime, j);
            s.push(NodeIndex { regime: j, ..node }, q * dt);
        }
    }
    Ok(s)
}

/// Player `k`'s diffusion stencil; a negative self probability is a CFL error.
pub fn diffusion_stencil(
    spec: &GameSpec,
    lattice: &Lattice,
    node: NodeIndex,
    t: f64,
    u: &JointControl,
    k: Player,
) -> Result<Stencil> {
    let s = diffusion_stencil_signed(spec, lattice, node, t, u, k)?;
    if s.self_probability < 0.0 {
        let state = lattice.state_of(&node);
        let rate = outgoing_rate(spec, lattice.step(), k, state, t, node.regime, u);
        return Err(Error::Cfl(Box::new(CflViolation {
            node,
            control: *u,
            player: k.index(),
            self_probability: s.self_probability,
            max_admissible_time_step: 1.0 / rate,
        })));
    }
    Ok(s)
}

/// Outgoing probability per unit time; `stay = 1 - dt * rate`.
fn outgoing_rate(spec: &GameSpec, h: f64, k: Player, state: State, t: f64, i: Regime, u: &JointControl) -> f64 {
    let w = stencil_weights(spec, h, 1.0, k, state, t, i, u);
    1.0 - w.stay
}

/// Total claim intensity and the chance that a claim belongs to insurer 1.
pub fn jump_mixture(spec: &GameSpec, i: Regime) -> Result<(f64, f64)> {
    if i.0 >= spec.regimes() {
        return domain(format!("regime {} outside 1..={}", i.number(), spec.regimes()));
    }
    let l1 = spec.insurers[0].claim_rate[i.0];
    let total = spec.total_claim_rate(i);
    if !(total > 0.0) {
        return domain(format!("total claim rate {total} in regime {} is not positive", i.number()));
    }
    Ok((total, l1 / total))
}

/// Nearest multiple of `h` as a step count; ties go toward zero.
pub fn round_to_steps(v: f64, h: f64) -> i64 {
    let r = v / h;
    if r >= 0.0 {
        (r - 0.5).ceil() as i64
    } else {
        -((-r - 0.5).ceil() as i64)
    }
}

/// Distribution of the grid shift of `x_k` caused by one claim.
pub type ShiftLaw = Vec<(i64, f64)>;

fn merge(shifts: impl IntoIterator<Item = (i64, f64)>) -> ShiftLaw {
    let mut m: BTreeMap<i64, f64> = BTreeMap::new();
    for (s, p) in shifts {
        *m.entry(s).or_insert(0.0) += p;
    }
    m.into_iter().collect()
}

/// Claim shift laws for both players, per regime and retention level.
///
/// `own[k][i][a]` is the law of `-round(retained_k)` for player `k`'s own
/// claims at its retention index `a`; `opponent[k][i][a]` is the law of
/// `+round(kappa_k * retained_l)` at the opponent's retention index `a`.
#[derive(Debug, Clone)]
pub struct JumpTables {
    pub own: [Vec<Vec<ShiftLaw>>; 2],
    pub opponent: [Vec<Vec<ShiftLaw>>; 2],
}

impl JumpTables {
    pub fn build(spec: &GameSpec, h: f64, grid: &JointControlGrid) -> Result<Self> {
        let tail = spec.tail_probability;
        let mut retained: [Vec<Vec<Vec<(f64, f64)>>>; 2] = [Vec::new(), Vec::new()];
        // retained[k][i][a] = list of (retained amount, probability)
        for k in Player::BOTH {
            let ins = spec.insurer(k);
            let atoms = severity_atoms(ins, h, tail)?;
            let cap = spec.retention_cap(k);
            for i in spec.generator.regimes() {
                let mut per_a = Vec::new();
                for &a in &grid.players[k.index()].retention {
                    let mut v = Vec::with_capacity(atoms.len());
                    for at in &atoms {
                        let q = ins.claim_magnitude(i, at.magnitude);
                        v.push((claim_retained(spec.mode(), q, a, cap)?, at.probability));
                    }
                    per_a.push(v);
                }
                retained[k.index()].push(per_a);
            }
        }
        let mut own: [Vec<Vec<ShiftLaw>>; 2] = [Vec::new(), Vec::new()];
        let mut opponent: [Vec<Vec<ShiftLaw>>; 2] = [Vec::new(), Vec::new()];
        for k in Player::BOTH {
            let l = k.other();
            let kappa = spec.insurer(k).sensitivity;
            for i in 0..spec.regimes() {
                own[k.index()].push(
                    retained[k.index()][i]
                        .iter()
                        .map(|v| merge(v.iter().map(|&(q, p)| (-round_to_steps(q, h), p))))
                        .collect(),
                );
                opponent[k.index()].push(
                    retained[l.index()][i]
                        .iter()
                        .map(|v| merge(v.iter().map(|&(q, p)| (round_to_steps(kappa * q, h), p))))
                        .collect(),
                );
            }
        }
        Ok(Self { own, opponent })
    }
}

/// Post-claim targets for player `k`: own claims with weight `p_k w`,
/// opponent claims with weight `(1 - p_k) w`. The regime is unchanged.
pub fn jump_targets(
    spec: &GameSpec,
    lattice: &Lattice,
    node: NodeIndex,
    u: &JointControl,
    k: Player,
) -> Result<Vec<(NodeIndex, f64)>> {
    if !lattice.is_valid(&node) {
        return domain(format!("node {node:?} outside lattice"));
    }
    let (_, p1) = jump_mixture(spec, node.regime)?;
    let p_own = if k == Player::One { p1 } else { 1.0 - p1 };
    let h = lattice.step();
    let d = k.index();
    let l = k.other();
    let jd = node.coord(d);
    let mut out: BTreeMap<NodeIndex, f64> = BTreeMap::new();
    let own = spec.insurer(k);
    for at in severity_atoms(own, h, spec.tail_probability)? {
        let q = claim_retained(
            spec.mode(),
            own.claim_magnitude(node.regime, at.magnitude),
            u.player(k).retention,
            spec.retention_cap(k),
        )?;
        let target = node.with_coord(d, lattice.shift(d, jd, -round_to_steps(q, h)));
        *out.entry(target).or_insert(0.0) += p_own * at.probability;
    }
    let opp = spec.insurer(l);
    let kappa = own.sensitivity;
    for at in severity_atoms(opp, h, spec.tail_probability)? {
        let q = claim_retained(
            spec.mode(),
            opp.claim_magnitude(node.regime, at.magnitude),
            u.player(l).retention,
            spec.retention_cap(l),
        )?;
        let target = node.with_coord(d, lattice.shift(d, jd, round_to_steps(kappa * q, h)));
        *out.entry(target).or_insert(0.0) += (1.0 - p_own) * at.probability;
    }
    Ok(out.into_iter().collect())
}

/// Worst self-transition probability over every node, slice, control and player.
///
/// The outgoing rate is convex in each of `x`, `z`, `t` and in the two
/// control aggregates `s = b_k - kappa_k b_l` and `G = -g_k(a_k) + kappa_k g_l(a_l)`
/// separately, so its maximum over the grid sits at a vertex of that box.
#[derive(Debug, Clone)]
pub struct CflScan {
    pub worst_self_probability: f64,
    pub worst: Option<CflViolation>,
    pub max_admissible_time_step: f64,
}

pub fn scan_cfl(spec: &GameSpec, lattice: &Lattice, grid: &JointControlGrid) -> CflScan {
    let h = lattice.step();
    let dt = lattice.time_step();
    let counts = lattice.counts();
    let last_slice = lattice.time_steps().saturating_sub(1);
    let mut worst_stay = f64::INFINITY;
    let mut worst: Option<CflViolation> = None;
    let mut min_dt = f64::INFINITY;

    let extremes = |v: &[f64]| -> Vec<usize> {
        if v.is_empty() {
            return vec![];
        }
        let (mut lo, mut hi) = (0, 0);
        for (j, x) in v.iter().enumerate() {
            if *x < v[lo] {
                lo = j;
            }
            if *x > v[hi] {
                hi = j;
            }
        }
        if lo == hi {
            vec![lo]
        } else {
            vec![lo, hi]
        }
    };

    for k in Player::BOTH {
        let l = k.other();
        let kappa = spec.insurer(k).sensitivity;
        let own_grid = &grid.players[k.index()];
        let opp_grid = &grid.players[l.index()];
        for i in spec.generator.regimes() {
            // candidate (own b, opp b) pairs at the extremes of s
            let mut s_pairs: Vec<(usize, usize, f64)> = Vec::new();
            for (ib, &bk) in own_grid.investment.iter().enumerate() {
                for (jb, &bl) in opp_grid.investment.iter().enumerate() {
                    s_pairs.push((ib, jb, bk - kappa * bl));
                }
            }
            let s_vals: Vec<f64> = s_pairs.iter().map(|p| p.2).collect();
            let s_ext: Vec<(usize, usize)> = extremes(&s_vals).into_iter().map(|j| (s_pairs[j].0, s_pairs[j].1)).collect();
            let mut g_pairs: Vec<(usize, usize, f64)> = Vec::new();
            for (ia, &ak) in own_grid.retention.iter().enumerate() {
                for (ja, &al) in opp_grid.retention.iter().enumerate() {
                    g_pairs.push((ia, ja, -spec.premium(k, i, ak) + kappa * spec.premium(l, i, al)));
                }
            }
            let g_vals: Vec<f64> = g_pairs.iter().map(|p| p.2).collect();
            let g_ext: Vec<(usize, usize)> = extremes(&g_vals).into_iter().map(|j| (g_pairs[j].0, g_pairs[j].1)).collect();

            let d = k.index();
            let jx_ext = [0, counts[d] - 1];
            let jz_ext = [0, counts[2] - 1];
            for &n in &[0, last_slice] {
                let t = lattice.time(n);
                for &jx in &jx_ext {
                    for &jz in &jz_ext {
                        let node = NodeIndex::new(0, 0, jz, i).with_coord(d, jx);
                        let state = lattice.state_of(&node);
                        for &(ib, jb) in &s_ext {
                            for &(ia, ja) in &g_ext {
                                let pk = crate::model::PlayerControl {
                                    retention: own_grid.retention[ia],
                                    investment: own_grid.investment[ib],
                                };
                                let pl = crate::model::PlayerControl {
                                    retention: opp_grid.retention[ja],
                                    investment: opp_grid.investment[jb],
                                };
                                let u = match k {
                                    Player::One => JointControl::from_players(pk, pl),
                                    Player::Two => JointControl::from_players(pl, pk),
                                };
                                let w = stencil_weights(spec, h, dt, k, state, t, i, &u);
                                let rate = outgoing_rate(spec, h, k, state, t, i, &u);
                                if rate > 0.0 {
                                    min_dt = min_dt.min(1.0 / rate);
                                }
                                if w.stay < worst_stay {
                                    worst_stay = w.stay;
                                    worst = Some(CflViolation {
                                        node,
                                        control: u,
                                        player: k.index(),
                                        self_probability: w.stay,
                                        max_admissible_time_step: 0.0,
                                    });
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    if let Some(w) = worst.as_mut() {
        w.max_admissible_time_step = min_dt;
    }
    CflScan {
        worst_self_probability: worst_stay,
        worst,
        max_admissible_time_step: min_dt,
    }
}

/// Fail with the worst offender if any stencil on the grid has negative self mass.
pub fn check_cfl(spec: &GameSpec, lattice: &Lattice, grid: &JointControlGrid) -> Result<CflScan> {
    let scan = scan_cfl(spec, lattice, grid);
    if scan.worst_self_probability < 0.0 {
        return Err(Error::Cfl(Box::new(scan.worst.expect("worst offender recorded"))));
    }
    Ok(scan)
}

/// Largest `|drift|` over the grid, both players and the index.
pub fn drift_bound(spec: &GameSpec, lattice: &Lattice, grid: &JointControlGrid) -> f64 {
    let counts = lattice.counts();
    let last_slice = lattice.time_steps().saturating_sub(1);
    let mut bound: f64 = 0.0;
    for k in Player::BOTH {
        let own = &grid.players[k.index()];
        let opp = &grid.players[k.other().index()];
        let corners = |v: &[f64]| {
            let lo = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let hi = v.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            [lo, hi]
        };
        for i in spec.generator.regimes() {
            for &jx in &[0, counts[k.index()] - 1] {
                for &jz in &[0, counts[2] - 1] {
                    let node = NodeIndex::new(0, 0, jz, i).with_coord(k.index(), jx);
                    let st = lattice.state_of(&node);
                    for bk in corners(&own.investment) {
                        for bl in corners(&opp.investment) {
                            for ak in corners(&own.retention) {
                                for al in corners(&opp.retention) {
                                    let pk = crate::model::PlayerControl { retention: ak, investment: bk };
                                    let pl = crate::model::PlayerControl { retention: al, investment: bl };
                                    let u = match k {
                                        Player::One => JointControl::from_players(pk, pl),
                                        Player::Two => JointControl::from_players(pl, pk),
                                    };
                                    let d = surplus_drift(spec, k, st.surplus(k), st.z, i, &u);
                                    bound = bound.max(d.abs());
                                }
                            }
                        }
                    }
                    for n in [0, last_slice] {
                        bound = bound.max(spec.market.index_drift(lattice.time(n), st.z).abs());
                    }
                }
            }
        }
    }
    bound
}

/// Grid-wide constant `C` with `|Var error| <= C dt (h + dt)` for every stencil.
pub fn variance_constant(spec: &GameSpec, lattice: &Lattice, grid: &JointControlGrid) -> f64 {
    let d = drift_bound(spec, lattice, grid);
    d + d * d
}

/// One sample of the local consistency check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencySample {
    pub node: NodeIndex,
    pub t: f64,
    pub control: JointControl,
    pub player: Player,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConsistencyRow {
    pub sample: ConsistencySample,
    /// `E[dx_k] - mu_k dt` and `E[dz] - mu_Z dt`.
    pub mean_error: [f64; 2],
    /// Max-abs entry of the 2x2 covariance error on `(x_k, z)`.
    pub variance_error: f64,
    pub self_probability: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConsistencyReport {
    /// Max `|E[d xi] - mu dt|` per coordinate `(x1, x2, z)`.
    pub mean_error: [f64; 3],
    /// Max-abs entry of the covariance error over the sample.
    pub variance_error: f64,
    /// Smallest self-transition probability seen.
    pub cfl_margin: f64,
    /// `C dt (h + dt)` with `C` from [`variance_constant`].
    pub variance_bound: f64,
    pub rows: Vec<ConsistencyRow>,
    /// Samples dropped because they sat on the boundary.
    pub skipped_boundary: usize,
}

/// Exact one-step moments of the diffusion stencil against the SDE coefficients.
///
/// Moments are taken of the signed weights, so samples violating the CFL
/// condition are measured too; `cfl_margin` shows whether any were.
pub fn check_local_consistency(
    spec: &GameSpec,
    lattice: &Lattice,
    grid: &JointControlGrid,
    samples: &[ConsistencySample],
) -> Result<ConsistencyReport> {
    let h = lattice.step();
    let dt = lattice.time_step();
    let mut report = ConsistencyReport {
        mean_error: [0.0; 3],
        variance_error: 0.0,
        cfl_margin: f64::INFINITY,
        variance_bound: variance_constant(spec, lattice, grid) * dt * (h + dt),
        rows: Vec::with_capacity(samples.len()),
        skipped_boundary: 0,
    };
    for smp in samples {
        if !lattice.is_interior(&smp.node) {
            report.skipped_boundary += 1;
            continue;
        }
        let k = smp.player;
        let d = k.index();
        let st = diffusion_stencil_signed(spec, lattice, smp.node, smp.t, &smp.control, k)?;
        let origin = lattice.state_of(&smp.node);
        let (mut mx, mut mz, mut sxx, mut szz, mut sxz) = (0.0, 0.0, 0.0, 0.0, 0.0);
        for (target, p) in st.iter() {
            let y = lattice.state_of(&target);
            let dx = match k {
                Player::One => y.x1 - origin.x1,
                Player::Two => y.x2 - origin.x2,
            };
            let dz = y.z - origin.z;
            mx += p * dx;
            mz += p * dz;
            sxx += p * dx * dx;
            szz += p * dz * dz;
            sxz += p * dx * dz;
        }
        let w = stencil_weights(spec, h, dt, k, origin, smp.t, smp.node.regime, &smp.control);
        let mean_error = [mx - w.drift * dt, mz - w.index_drift * dt];
        let var_err = [
            (sxx - mx * mx) - w.vol * w.vol * dt,
            (szz - mz * mz) - w.index_vol * w.index_vol * dt,
            sxz - mx * mz,
        ];
        let variance_error = var_err.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        report.mean_error[d] = report.mean_error[d].max(mean_error[0].abs());
        report.mean_error[2] = report.mean_error[2].max(mean_error[1].abs());
        report.variance_error = report.variance_error.max(variance_error);
        report.cfl_margin = report.cfl_margin.min(st.self_probability);
        report.rows.push(ConsistencyRow {
            sample: *smp,
            mean_error,
            variance_error,
            self_probability: st.self_probability,
        });
    }
    Ok(report)
}

/// Draw `count` uniform random interior samples. With `feasible_only`, draws
/// whose stencil violates the CFL condition are rejected (at most
/// `100 * count` attempts). Returns the samples and the number of rejections.
pub fn consistency_samples(
    spec: &GameSpec,
    lattice: &Lattice,
    grid: &JointControlGrid,
    count: usize,
    seed: u64,
    feasible_only: bool,
) -> (Vec<ConsistencySample>, usize) {
    use rand::{Rng, SeedableRng};
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    let counts = lattice.counts();
    let mut out = Vec::with_capacity(count);
    let mut rejected = 0;
    if counts.iter().any(|&c| c < 3) || grid.is_empty() {
        return (out, 0);
    }
    let slices = lattice.time_steps().max(1);
    for _ in 0..count.saturating_mul(100) {
        if out.len() == count {
            break;
        }
        let node = NodeIndex::new(
            rng.random_range(1..counts[0] - 1),
            rng.random_range(1..counts[1] - 1),
            rng.random_range(1..counts[2] - 1),
            Regime(rng.random_range(0..lattice.regimes())),
        );
        let t = lattice.time(rng.random_range(0..slices));
        let control = grid.control(rng.random_range(0..grid.len()));
        let player = if rng.random::<bool>() { Player::One } else { Player::Two };
        let w = stencil_weights(
            spec,
            lattice.step(),
            lattice.time_step(),
            player,
            lattice.state_of(&node),
            t,
            node.regime,
            &control,
        );
        if feasible_only && w.stay < 0.0 {
            rejected += 1;
            continue;
        }
        out.push(ConsistencySample { node, t, control, player });
    }
    (out, rejected)
}
