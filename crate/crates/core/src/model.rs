//! Problem data and the model primitives: drift, diffusion, claim maps,
//! reinsurance premiums, utilities and the discretized claim severity law.
//!
//! State is the pair of relative surpluses `X_k = X~_k - kappa_k X~_l` plus
//! the market index `z`. Regimes are zero-based internally; the market
//! coefficient family multiplies by the one-based regime number.

use crate::error::{domain, Result, Violation};

/// Row sums of the generator must vanish to this tolerance.
pub const GENERATOR_ROW_TOL: f64 = 1e-12;

/// Exponent cap for `exp(-eta x)`; keeps deep-negative states finite.
pub const UTILITY_EXPONENT_CAP: f64 = 700.0;

/// Default tail probability cut from the severity law.
pub const DEFAULT_TAIL_PROBABILITY: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Regime(pub usize);

impl Regime {
    pub fn index(self) -> usize {
        self.0
    }

    /// One-based label used in configs, CSV output and the coefficient family.
    pub fn number(self) -> usize {
        self.0 + 1
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Player {
    One,
    Two,
}

impl Player {
    pub const BOTH: [Player; 2] = [Player::One, Player::Two];

    pub fn index(self) -> usize {
        match self {
            Player::One => 0,
            Player::Two => 1,
        }
    }

    pub fn other(self) -> Player {
        match self {
            Player::One => Player::Two,
            Player::Two => Player::One,
        }
    }

    pub fn from_index(k: usize) -> Player {
        if k == 0 {
            Player::One
        } else {
            Player::Two
        }
    }
}

/// Generator `Q` of the regime chain; rates per unit time.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimeGenerator {
    rates: Vec<Vec<f64>>,
}

impl RegimeGenerator {
    pub fn new(rates: Vec<Vec<f64>>) -> Result<Self> {
        let violations = Self::check(&rates, "generator");
        if !violations.is_empty() {
            return Err(crate::Error::Invalid(violations));
        }
        Ok(Self { rates })
    }

    /// A single absorbing regime.
    pub fn single() -> Self {
        Self {
            rates: vec![vec![0.0]],
        }
    }

    pub(crate) fn check(rates: &[Vec<f64>], path: &str) -> Vec<Violation> {
        let mut out = Vec::new();
        let m = rates.len();
        if m == 0 {
            out.push(Violation::new(path, "generator must have at least one regime"));
            return out;
        }
        for (i, row) in rates.iter().enumerate() {
            if row.len() != m {
                out.push(Violation::new(
                    format!("{path}[{i}]"),
                    format!("row has {} entries, expected {m}", row.len()),
                ));
                continue;
            }
            for (j, &q) in row.iter().enumerate() {
                if !q.is_finite() {
                    out.push(Violation::new(format!("{path}[{i}][{j}]"), "rate must be finite"));
                } else if i != j && q < 0.0 {
                    out.push(Violation::new(
                        format!("{path}[{i}][{j}]"),
                        format!("off-diagonal rate {q} is negative"),
                    ));
                }
            }
            let sum: f64 = row.iter().sum();
            if sum.abs() > GENERATOR_ROW_TOL {
                out.push(Violation::new(
                    format!("{path}[{i}]"),
                    format!("row sums to {sum:e}, expected 0"),
                ));
            }
        }
        out
    }

    pub fn size(&self) -> usize {
        self.rates.len()
    }

    pub fn rate(&self, from: Regime, to: Regime) -> f64 {
        self.rates[from.0][to.0]
    }

    /// Total rate of leaving `i`, i.e. `-q_ii`.
    pub fn exit_rate(&self, i: Regime) -> f64 {
        -self.rates[i.0][i.0]
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.rates
    }

    pub fn regimes(&self) -> impl Iterator<Item = Regime> {
        (0..self.size()).map(Regime)
    }
}

/// Market coefficients in the parametric family
/// `mu_S = drift_scale * i * z`, `sigma_S = vol_scale * i * z`,
/// `mu_Z = index_drift_scale * (t + 1) * z`, `sigma_Z = index_vol_scale * (t + 1) * z`.
#[derive(Debug, Clone, PartialEq)]
pub struct MarketCoefficients {
    pub risk_free_rate: Vec<f64>,
    pub risky_drift_scale: f64,
    pub risky_vol_scale: f64,
    pub index_drift_scale: f64,
    pub index_vol_scale: f64,
}

impl MarketCoefficients {
    pub fn risk_free(&self, i: Regime) -> f64 {
        self.risk_free_rate[i.0]
    }

    pub fn risky_drift(&self, i: Regime, z: f64) -> f64 {
        self.risky_drift_scale * i.number() as f64 * z
    }

    pub fn risky_vol(&self, i: Regime, z: f64) -> f64 {
        self.risky_vol_scale * i.number() as f64 * z
    }

    pub fn index_drift(&self, t: f64, z: f64) -> f64 {
        self.index_drift_scale * (t + 1.0) * z
    }

    pub fn index_vol(&self, t: f64, z: f64) -> f64 {
        self.index_vol_scale * (t + 1.0) * z
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReinsuranceMode {
    Proportional,
    ExcessOfLoss,
}

/// One insurer's economics. Severity is exponential with rate `severity_rate`.
#[derive(Debug, Clone, PartialEq)]
pub struct InsurerSpec {
    /// Premium income per unit time, per regime.
    pub premium_rate: Vec<f64>,
    /// Claim arrival intensity, per regime.
    pub claim_rate: Vec<f64>,
    pub severity_rate: f64,
    pub risk_aversion: f64,
    pub sensitivity: f64,
    pub loading: f64,
    pub mode: ReinsuranceMode,
    /// Per-regime multiplier on the severity draw, `q(i, z, rho) = scale[i] * rho`.
    pub claim_scale: Vec<f64>,
}

impl InsurerSpec {
    pub fn mean_severity(&self) -> f64 {
        1.0 / self.severity_rate
    }

    /// Severity quantile at `1 - tail`, the currency scale of an excess-of-loss retention.
    pub fn retention_cap(&self, tail: f64) -> f64 {
        -tail.ln() / self.severity_rate
    }

    /// Magnitude of a claim with severity draw `rho` in regime `i`.
    pub fn claim_magnitude(&self, i: Regime, rho: f64) -> f64 {
        self.claim_scale.get(i.0).copied().unwrap_or(1.0) * rho
    }

    /// Reinsurance premium rate `g(a)` under the expectation principle.
    pub fn reinsurance_premium(&self, i: Regime, retention: f64, tail: f64) -> f64 {
        let scale = self.claim_scale.get(i.0).copied().unwrap_or(1.0);
        let ceded_mean = match self.mode {
            ReinsuranceMode::Proportional => (1.0 - retention) * scale * self.mean_severity(),
            ReinsuranceMode::ExcessOfLoss => {
                // E[(s A - c)^+] for A ~ Exp(theta)
                let level = retention * self.retention_cap(tail);
                if scale <= 0.0 {
                    0.0
                } else {
                    scale * (-self.severity_rate * level / scale).exp() / self.severity_rate
                }
            }
        };
        (1.0 + self.loading) * ceded_mean
    }

    pub fn utility(&self, x: f64) -> f64 {
        utility(self.risk_aversion, x)
    }

    fn check(&self, path: &str, regimes: usize, out: &mut Vec<Violation>) {
        let per_regime = |name: &str, v: &[f64], out: &mut Vec<Violation>| {
            if v.len() != regimes {
                out.push(Violation::new(
                    format!("{path}.{name}"),
                    format!("has {} entries, expected one per regime ({regimes})", v.len()),
                ));
            }
            for (i, x) in v.iter().enumerate() {
                if !x.is_finite() {
                    out.push(Violation::new(format!("{path}.{name}[{i}]"), "must be finite"));
                }
            }
        };
        per_regime("premium_rate", &self.premium_rate, out);
        per_regime("claim_rate", &self.claim_rate, out);
        per_regime("claim_scale", &self.claim_scale, out);
        for (i, &l) in self.claim_rate.iter().enumerate() {
            if l <= 0.0 || l.is_nan() {
                out.push(Violation::new(
                    format!("{path}.claim_rate[{i}]"),
                    format!("claim rate {l} must be positive"),
                ));
            }
        }
        for (i, &s) in self.claim_scale.iter().enumerate() {
            if s <= 0.0 || s.is_nan() {
                out.push(Violation::new(
                    format!("{path}.claim_scale[{i}]"),
                    format!("claim scale {s} must be positive"),
                ));
            }
        }
        if !(self.severity_rate > 0.0 && self.severity_rate.is_finite()) {
            out.push(Violation::new(
                format!("{path}.severity_rate"),
                format!("{} must be positive and finite", self.severity_rate),
            ));
        }
        if !(self.risk_aversion > 0.0 && self.risk_aversion.is_finite()) {
            out.push(Violation::new(
                format!("{path}.risk_aversion"),
                format!("{} must be positive and finite", self.risk_aversion),
            ));
        }
        if !(0.0..=1.0).contains(&self.sensitivity) {
            out.push(Violation::new(
                format!("{path}.sensitivity"),
                format!("{} must lie in [0, 1]", self.sensitivity),
            ));
        }
        if !(self.loading >= 0.0 && self.loading.is_finite()) {
            out.push(Violation::new(
                format!("{path}.loading"),
                format!("{} must be nonnegative", self.loading),
            ));
        }
    }
}

/// Full game description.
#[derive(Debug, Clone, PartialEq)]
pub struct GameSpec {
    pub generator: RegimeGenerator,
    pub market: MarketCoefficients,
    pub insurers: [InsurerSpec; 2],
    pub horizon: f64,
    /// Probability mass cut from the severity tail when discretizing.
    pub tail_probability: f64,
}

impl GameSpec {
    pub fn regimes(&self) -> usize {
        self.generator.size()
    }

    pub fn insurer(&self, k: Player) -> &InsurerSpec {
        &self.insurers[k.index()]
    }

    pub fn mode(&self) -> ReinsuranceMode {
        self.insurers[0].mode
    }

    pub fn retention_cap(&self, k: Player) -> f64 {
        self.insurer(k).retention_cap(self.tail_probability)
    }

    pub fn premium(&self, k: Player, i: Regime, retention: f64) -> f64 {
        self.insurer(k)
            .reinsurance_premium(i, retention, self.tail_probability)
    }

    /// `lambda_1(i) + lambda_2(i)`.
    pub fn total_claim_rate(&self, i: Regime) -> f64 {
        self.insurers[0].claim_rate[i.0] + self.insurers[1].claim_rate[i.0]
    }

    /// Every invariant violation, addressed by field path. Empty means valid.
    pub fn validate(&self) -> Vec<Violation> {
        let mut out = RegimeGenerator::check(self.generator.rows(), "game.generator");
        let m = self.regimes();
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            out.push(Violation::new(
                "game.horizon",
                format!("horizon {} must be positive", self.horizon),
            ));
        }
        if !(self.tail_probability > 0.0 && self.tail_probability < 1.0) {
            out.push(Violation::new(
                "game.tail_probability",
                format!("{} must lie in (0, 1)", self.tail_probability),
            ));
        }
        let mk = &self.market;
        if mk.risk_free_rate.len() != m {
            out.push(Violation::new(
                "game.market.risk_free_rate",
                format!(
                    "has {} entries, expected one per regime ({m})",
                    mk.risk_free_rate.len()
                ),
            ));
        }
        for (name, v) in [
            ("risky_drift_scale", mk.risky_drift_scale),
            ("index_drift_scale", mk.index_drift_scale),
        ] {
            if !v.is_finite() {
                out.push(Violation::new(format!("game.market.{name}"), "must be finite"));
            }
        }
        for (name, v) in [
            ("risky_vol_scale", mk.risky_vol_scale),
            ("index_vol_scale", mk.index_vol_scale),
        ] {
            if !(v > 0.0 && v.is_finite()) {
                out.push(Violation::new(
                    format!("game.market.{name}"),
                    format!("{v} must be positive so that volatility is positive for z > 0"),
                ));
            }
        }
        for (k, ins) in self.insurers.iter().enumerate() {
            ins.check(&format!("game.insurers[{k}]"), m, &mut out);
        }
        if self.insurers[0].mode != self.insurers[1].mode {
            out.push(Violation::new(
                "game.insurers[1].mode",
                "both insurers must use the same reinsurance mode",
            ));
        }
        out
    }

    pub fn check_regime(&self, i: Regime) -> Result<()> {
        if i.0 >= self.regimes() {
            return domain(format!(
                "regime {} outside 1..={}",
                i.number(),
                self.regimes()
            ));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PlayerControl {
    pub retention: f64,
    pub investment: f64,
}

/// `(a1, b1, a2, b2)`: retention levels in `[0, 1]` and risky holdings.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct JointControl {
    pub a1: f64,
    pub b1: f64,
    pub a2: f64,
    pub b2: f64,
}

impl JointControl {
    pub fn new(a1: f64, b1: f64, a2: f64, b2: f64) -> Self {
        Self { a1, b1, a2, b2 }
    }

    pub fn from_players(p1: PlayerControl, p2: PlayerControl) -> Self {
        Self {
            a1: p1.retention,
            b1: p1.investment,
            a2: p2.retention,
            b2: p2.investment,
        }
    }

    pub fn player(&self, k: Player) -> PlayerControl {
        match k {
            Player::One => PlayerControl {
                retention: self.a1,
                investment: self.b1,
            },
            Player::Two => PlayerControl {
                retention: self.a2,
                investment: self.b2,
            },
        }
    }

    pub fn swapped(&self) -> Self {
        Self {
            a1: self.a2,
            b1: self.b2,
            a2: self.a1,
            b2: self.b1,
        }
    }
}

/// Point of the continuous state space.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct State {
    pub x1: f64,
    pub x2: f64,
    pub z: f64,
}

impl State {
    pub fn new(x1: f64, x2: f64, z: f64) -> Self {
        Self { x1, x2, z }
    }

    pub fn surplus(&self, k: Player) -> f64 {
        match k {
            Player::One => self.x1,
            Player::Two => self.x2,
        }
    }
}

/// Drift of `X_k` alone; the hot path of the stencil builders.
pub fn surplus_drift(
    spec: &GameSpec,
    k: Player,
    x_k: f64,
    z: f64,
    i: Regime,
    u: &JointControl,
) -> f64 {
    let l = k.other();
    let own = u.player(k);
    let opp = u.player(l);
    let kappa = spec.insurer(k).sensitivity;
    let r = spec.market.risk_free(i);
    let excess = spec.market.risky_drift(i, z) - r;
    r * x_k + (own.investment - kappa * opp.investment) * excess + spec.insurer(k).premium_rate[i.0]
        - kappa * spec.insurer(l).premium_rate[i.0]
        - spec.premium(k, i, own.retention)
        + kappa * spec.premium(l, i, opp.retention)
}

/// Diffusion coefficient of `X_k`: `(b_k - kappa_k b_l) sigma_S(i, z)`.
pub fn surplus_vol(spec: &GameSpec, k: Player, z: f64, i: Regime, u: &JointControl) -> f64 {
    let kappa = spec.insurer(k).sensitivity;
    (u.player(k).investment - kappa * u.player(k.other()).investment) * spec.market.risky_vol(i, z)
}

/// Drift `(mu_1, mu_2, mu_Z)` of the jump-free dynamics.
pub fn drift(spec: &GameSpec, state: State, t: f64, i: Regime, u: &JointControl) -> Result<[f64; 3]> {
    spec.check_regime(i)?;
    if !(state.z > 0.0) {
        return domain(format!("index level z = {} must be positive", state.z));
    }
    Ok([
        surplus_drift(spec, Player::One, state.x1, state.z, i, u),
        surplus_drift(spec, Player::Two, state.x2, state.z, i, u),
        spec.market.index_drift(t, state.z),
    ])
}

/// Diagonal of the diffusion matrix. Entries may be negative; only squares matter.
pub fn diffusion(spec: &GameSpec, state: State, t: f64, i: Regime, u: &JointControl) -> Result<[f64; 3]> {
    spec.check_regime(i)?;
    if !(state.z > 0.0) {
        return domain(format!("index level z = {} must be positive", state.z));
    }
    Ok([
        surplus_vol(spec, Player::One, state.z, i, u),
        surplus_vol(spec, Player::Two, state.z, i, u),
        spec.market.index_vol(t, state.z),
    ])
}

/// Part of a claim of size `claim` kept by the primary insurer.
///
/// `cap` converts an excess-of-loss retention in `[0, 1]` to currency.
pub fn claim_retained(mode: ReinsuranceMode, claim: f64, retention: f64, cap: f64) -> Result<f64> {
    if claim < 0.0 || claim.is_nan() {
        return domain(format!("claim size {claim} must be nonnegative"));
    }
    Ok(match mode {
        ReinsuranceMode::Proportional => retention * claim,
        ReinsuranceMode::ExcessOfLoss => claim.min(retention * cap),
    })
}

/// CARA utility `-(1/eta) exp(-eta x)` with the exponent capped.
pub fn utility(eta: f64, x: f64) -> f64 {
    -(-eta * x).min(UTILITY_EXPONENT_CAP).exp() / eta
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeverityAtom {
    /// Grid multiple `j` such that the atom sits at `j * h`.
    pub multiple: usize,
    pub magnitude: f64,
    pub probability: f64,
}

/// Discretize the exponential severity law onto multiples of `h`.
///
/// Atom `j` carries the mass of `((j - 1/2) h, (j + 1/2) h]`, the first one
/// everything from 0. The tail beyond the `1 - tail` quantile is cut and the
/// remaining masses renormalized.
pub fn severity_atoms(ins: &InsurerSpec, h: f64, tail: f64) -> Result<Vec<SeverityAtom>> {
    if !(tail > 0.0 && tail < 1.0) {
        return domain(format!("tail probability {tail} must lie in (0, 1)"));
    }
    if !(h > 0.0) {
        return domain(format!("grid step {h} must be positive"));
    }
    let theta = ins.severity_rate;
    let quantile = -tail.ln() / theta;
    let count = ((quantile / h).ceil() as usize).max(1);
    let survival = |y: f64| (-theta * y).exp();
    let mut atoms: Vec<SeverityAtom> = (1..=count)
        .map(|j| {
            let lo = if j == 1 { 0.0 } else { (j as f64 - 0.5) * h };
            let hi = (j as f64 + 0.5) * h;
            SeverityAtom {
                multiple: j,
                magnitude: j as f64 * h,
                probability: survival(lo) - survival(hi),
            }
        })
        .collect();
    let total: f64 = atoms.iter().map(|a| a.probability).sum();
    if !(total > 0.0) {
        // theta so large that every band underflows: point mass at h
        atoms.truncate(1);
        atoms[0].probability = 1.0;
        return Ok(atoms);
    }
    for a in &mut atoms {
        a.probability /= total;
    }
    Ok(atoms)
}


#[cfg(test)]
mod tests {
    use super::fixtures::*;
    use super::*;
    use proptest::prelude::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn generator_rejects_bad_rows() {
        assert!(RegimeGenerator::new(vec![vec![-0.5, 0.4], vec![0.5, -0.5]]).is_err());
        assert!(RegimeGenerator::new(vec![vec![0.5, -0.5], vec![0.5, -0.5]]).is_err());
        let err = RegimeGenerator::new(vec![vec![-1.0, 1.0, 0.0], vec![0.0, 0.0]]).unwrap_err();
        assert!(err.to_string().contains("generator[0]"), "{err}");
    }

    #[test]
    fn published_game_is_valid() {
        assert!(published_game().validate().is_empty());
    }

    #[test]
    fn validate_reports_every_violation() {
        let mut s = published_game();
        s.insurers[0].claim_rate[1] = -0.1;
        s.insurers[1].sensitivity = 1.5;
        s.horizon = 0.0;
        let v = s.validate();
        let paths: Vec<_> = v.iter().map(|v| v.path.as_str()).collect();
        assert!(paths.contains(&"game.insurers[0].claim_rate[1]"), "{paths:?}");
        assert!(paths.contains(&"game.insurers[1].sensitivity"), "{paths:?}");
        assert!(paths.contains(&"game.horizon"), "{paths:?}");
    }

    #[test]
    fn drift_vanishes_without_rates_or_holdings() {
        let mut s = published_game();
        s.market.risk_free_rate = vec![0.0, 0.0];
        for ins in &mut s.insurers {
            ins.premium_rate = vec![0.0, 0.0];
        }
        let u = JointControl::new(1.0, 0.0, 1.0, 0.0);
        let st = State::new(0.7, -0.4, 1.3);
        let d = drift(&s, st, 0.02, Regime(0), &u).unwrap();
        assert_eq!(d[0], 0.0);
        assert_eq!(d[1], 0.0);
        assert!(close(d[2], 0.4 * 1.02 * 1.3, 1e-15));
    }

    #[test]
    fn drift_hand_evaluation_regime_one() {
        // 0 + 1 * (0.2 - 0.02) + 0.05 - 0.8 * 0.02 = 0.214
        let s = published_game();
        let u = JointControl::new(1.0, 1.0, 1.0, 0.0);
        let d = drift(&s, State::new(0.0, 0.0, 1.0), 0.0, Regime(0), &u).unwrap();
        assert!(close(d[0], 0.214, 1e-15), "{}", d[0]);
    }

    #[test]
    fn drift_rejects_bad_regime() {
        let s = published_game();
        let u = JointControl::default();
        assert!(drift(&s, State::new(0.0, 0.0, 1.0), 0.0, Regime(2), &u).is_err());
        assert!(diffusion(&s, State::new(0.0, 0.0, 1.0), 0.0, Regime(5), &u).is_err());
    }

    #[test]
    fn symmetric_insurers_get_symmetric_drift() {
        let mut s = published_game();
        s.insurers[1] = s.insurers[0].clone();
        for ins in &mut s.insurers {
            ins.sensitivity = 0.0;
        }
        let u = JointControl::new(0.4, 1.2, 0.4, 1.2);
        let d = drift(&s, State::new(0.6, 0.6, 1.0), 0.0, Regime(1), &u).unwrap();
        assert_eq!(d[0], d[1]);
        let v = diffusion(&s, State::new(0.6, 0.6, 1.0), 0.0, Regime(1), &u).unwrap();
        assert_eq!(v[0], v[1]);
    }

    #[test]
    fn diffusion_examples() {
        let s = published_game();
        let st = State::new(0.0, 0.0, 1.0);
        let v = diffusion(&s, st, 0.0, Regime(0), &JointControl::new(1.0, 0.0, 1.0, 0.0)).unwrap();
        assert_eq!(&v[..2], &[0.0, 0.0]);
        assert!(close(v[2], 0.1, 1e-15));

        let v = diffusion(&s, st, 0.0, Regime(0), &JointControl::new(1.0, 1.0, 1.0, 0.0)).unwrap();
        assert!(close(v[0], 0.4, 1e-15));
        assert!(close(v[1], -0.28, 1e-15));
    }

    #[test]
    fn retained_claims() {
        use ReinsuranceMode::*;
        assert!(close(claim_retained(Proportional, 5.0, 0.4, 0.0).unwrap(), 2.0, 1e-15));
        assert_eq!(claim_retained(ExcessOfLoss, 5.0, 0.3, 10.0).unwrap(), 3.0);
        assert_eq!(claim_retained(Proportional, 5.0, 1.0, 0.0).unwrap(), 5.0);
        assert_eq!(claim_retained(ExcessOfLoss, 5.0, 0.9, 10.0).unwrap(), 5.0);
        assert!(claim_retained(Proportional, -1.0, 0.5, 0.0).is_err());
    }

    #[test]
    fn premium_examples() {
        let mut ins = published_game().insurers[0].clone();
        assert_eq!(ins.reinsurance_premium(Regime(0), 1.0, 1e-6), 0.0);
        // 2.1 / 0.3
        assert!(close(ins.reinsurance_premium(Regime(0), 0.0, 1e-6), 7.0, 1e-12));
        ins.mode = ReinsuranceMode::ExcessOfLoss;
        // full retention at the 1 - 1e-300 quantile cedes nothing measurable
        assert!(ins.reinsurance_premium(Regime(0), 1.0, 1e-300) < 1e-290);
        // no retention cedes the whole mean
        assert!(close(ins.reinsurance_premium(Regime(0), 0.0, 1e-6), 7.0, 1e-12));
    }

    #[test]
    fn utility_examples() {
        assert!(close(utility(17.0, 0.0), -1.0 / 17.0, 1e-16));
        assert!(close(utility(21.0, 0.1), -(-2.1f64).exp() / 21.0, 1e-16));
        assert!(close(utility(21.0, 0.1), -0.005830, 5e-6));
        let far = utility(17.0, 1e3);
        assert!(far <= 0.0 && far > -1e-300);
        let deep = utility(17.0, -1e6);
        assert!(deep.is_finite() && deep < 0.0);
    }

    #[test]
    fn utility_monotone_on_random_pairs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(17);
        for _ in 0..10_000 {
            let eta = rng.random_range(0.5..30.0);
            let a: f64 = rng.random_range(-3.0..3.0);
            let b: f64 = rng.random_range(-3.0..3.0);
            let (lo, hi) = if a < b { (a, b) } else { (b, a) };
            assert!(utility(eta, lo) <= utility(eta, hi));
        }
    }

    #[test]
    fn severity_atoms_for_first_insurer() {
        let ins = &published_game().insurers[0];
        let atoms = severity_atoms(ins, 0.2, 1e-6).unwrap();
        let total: f64 = atoms.iter().map(|a| a.probability).sum();
        assert!(close(total, 1.0, 1e-12));
        let mean: f64 = atoms.iter().map(|a| a.magnitude * a.probability).sum();
        assert!(close(mean, 1.0 / 0.3, 0.2), "{mean}");
        assert_eq!(atoms.len(), ((-(1e-6f64).ln() / 0.3) / 0.2).ceil() as usize);
        assert!(atoms.iter().all(|a| a.probability >= 0.0));
    }

    #[test]
    fn severity_atoms_degenerate_and_errors() {
        let mut ins = published_game().insurers[0].clone();
        ins.severity_rate = 1e300;
        let atoms = severity_atoms(&ins, 0.2, 1e-6).unwrap();
        assert_eq!(atoms.len(), 1);
        assert_eq!(atoms[0].magnitude, 0.2);
        assert_eq!(atoms[0].probability, 1.0);
        assert!(severity_atoms(&ins, 0.2, 0.0).is_err());
        assert!(severity_atoms(&ins, 0.2, 1.0).is_err());
    }

    proptest! {
        #[test]
        fn utility_is_monotone(x in -5.0f64..5.0, dx in 1e-6f64..5.0, eta in 0.1f64..30.0) {
            prop_assert!(utility(eta, x) < utility(eta, x + dx));
            prop_assert!(utility(eta, x) < 0.0);
        }

        #[test]
        fn premium_nonincreasing(a in 0.0f64..1.0, da in 0.0f64..1.0, eol in any::<bool>()) {
            let mut ins = published_game().insurers[1].clone();
            if eol { ins.mode = ReinsuranceMode::ExcessOfLoss; }
            let b = (a + da).min(1.0);
            prop_assert!(ins.reinsurance_premium(Regime(1), b, 1e-6) <= ins.reinsurance_premium(Regime(1), a, 1e-6));
        }

        #[test]
        fn drift_and_diffusion_affine_in_investment(
            b1 in -3.0f64..3.0, b2 in -3.0f64..3.0, c1 in -3.0f64..3.0, c2 in -3.0f64..3.0,
            x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, z in 0.4f64..2.0, reg in 0usize..2,
        ) {
            let s = published_game();
            let st = State::new(x1, x2, z);
            let u = JointControl::new(0.4, b1, 0.6, b2);
            let v = JointControl::new(0.4, c1, 0.6, c2);
            let mid = JointControl::new(0.4, 0.5 * (b1 + c1), 0.6, 0.5 * (b2 + c2));
            let (du, dv, dm) = (
                drift(&s, st, 0.04, Regime(reg), &u).unwrap(),
                drift(&s, st, 0.04, Regime(reg), &v).unwrap(),
                drift(&s, st, 0.04, Regime(reg), &mid).unwrap(),
            );
            let (su, sv, sm) = (
                diffusion(&s, st, 0.04, Regime(reg), &u).unwrap(),
                diffusion(&s, st, 0.04, Regime(reg), &v).unwrap(),
                diffusion(&s, st, 0.04, Regime(reg), &mid).unwrap(),
            );
            for d in 0..3 {
                prop_assert!((0.5 * (du[d] + dv[d]) - dm[d]).abs() <= 1e-12);
                prop_assert!((0.5 * (su[d] + sv[d]) - sm[d]).abs() <= 1e-12);
            }
        }

        #[test]
        fn swapping_insurers_swaps_outputs(
            b1 in -3.0f64..3.0, b2 in -3.0f64..3.0, a1 in 0.0f64..1.0, a2 in 0.0f64..1.0,
            x1 in -3.0f64..3.0, x2 in -3.0f64..3.0, z in 0.4f64..2.0, reg in 0usize..2,
        ) {
            let s = published_game();
            let w = swap_insurers(&s);
            let u = JointControl::new(a1, b1, a2, b2);
            let d = drift(&s, State::new(x1, x2, z), 0.0, Regime(reg), &u).unwrap();
            let e = drift(&w, State::new(x2, x1, z), 0.0, Regime(reg), &u.swapped()).unwrap();
            prop_assert_eq!(d[0], e[1]);
            prop_assert_eq!(d[1], e[0]);
            prop_assert_eq!(d[2], e[2]);
            let d = diffusion(&s, State::new(x1, x2, z), 0.0, Regime(reg), &u).unwrap();
            let e = diffusion(&w, State::new(x2, x1, z), 0.0, Regime(reg), &u.swapped()).unwrap();
            prop_assert_eq!(d[0], e[1]);
            prop_assert_eq!(d[1], e[0]);
        }
    }
}
