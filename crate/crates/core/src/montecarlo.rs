//! Euler–Maruyama simulation of the controlled jump diffusion under a
//! feedback policy, used to cross-check solved values.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use rayon::prelude::*;

use crate::error::{domain, Error, Result};
use crate::model::{
    claim_retained, surplus_drift, surplus_vol, GameSpec, JointControl, Player, Regime, RegimeGenerator, State,
};
use crate::solver::PolicyField;

/// How far `T / euler_step` may sit from an integer number of steps.
pub const STEP_DIVISION_TOL: f64 = 1e-12;

/// Control lookup during simulation.
pub trait FeedbackPolicy: Sync {
    fn control(&self, t: f64, state: State, regime: Regime) -> Result<JointControl>;
}

impl FeedbackPolicy for PolicyField {
    fn control(&self, t: f64, state: State, regime: Regime) -> Result<JointControl> {
        self.extract(t, state, regime)
    }
}

/// The same joint control everywhere.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstantPolicy(pub JointControl);

impl FeedbackPolicy for ConstantPolicy {
    fn control(&self, _t: f64, _state: State, _regime: Regime) -> Result<JointControl> {
        Ok(self.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    pub path_count: u64,
    pub euler_step: f64,
    pub seed: u64,
    /// Worker threads; `None` uses the rayon default. Results do not depend on it.
    pub workers: Option<usize>,
}

impl SimConfig {
    /// Number of Euler steps covering `[0, horizon]`.
    pub fn steps(&self, horizon: f64) -> Result<usize> {
        if self.path_count == 0 {
            return domain("path count must be at least 1");
        }
        if !(self.euler_step > 0.0) || !self.euler_step.is_finite() {
            return domain(format!("Euler step {} must be positive", self.euler_step));
        }
        let n = (horizon / self.euler_step).round();
        if n < 1.0 || (n * self.euler_step - horizon).abs() > STEP_DIVISION_TOL {
            return domain(format!(
                "Euler step {} does not divide the horizon {horizon}",
                self.euler_step
            ));
        }
        Ok(n as usize)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ValueEstimate {
    pub mean: f64,
    pub standard_error: f64,
    pub path_count: u64,
}

impl ValueEstimate {
    pub fn from_samples(samples: &[f64]) -> Self {
        let n = samples.len();
        let mean = samples.iter().sum::<f64>() / n as f64;
        let standard_error = if n < 2 {
            0.0
        } else {
            // scaled to survive utilities near the exponent cap
            let scale = samples.iter().map(|v| (v - mean).abs()).fold(0.0, f64::max);
            if scale == 0.0 || !scale.is_finite() {
                scale
            } else {
                let ss = samples.iter().map(|v| ((v - mean) / scale).powi(2)).sum::<f64>();
                scale * (ss / ((n - 1) * n) as f64).sqrt()
            }
        };
        Self {
            mean,
            standard_error,
            path_count: n as u64,
        }
    }
}

/// Piecewise-constant regime trajectory: `switches[m] = (time, regime)` from that time on.
#[derive(Debug, Clone, PartialEq)]
pub struct RegimePath {
    pub horizon: f64,
    pub switches: Vec<(f64, Regime)>,
}

impl RegimePath {
    pub fn constant(regime: Regime, horizon: f64) -> Self {
        Self {
            horizon,
            switches: vec![(0.0, regime)],
        }
    }

    pub fn regime_at(&self, t: f64) -> Regime {
        let pos = self.switches.partition_point(|&(s, _)| s <= t);
        self.switches[pos.saturating_sub(1)].1
    }

    /// Time spent in `regime` over `[0, horizon]`.
    pub fn occupation(&self, regime: Regime) -> f64 {
        self.switches
            .iter()
            .enumerate()
            .filter(|(_, (_, r))| *r == regime)
            .map(|(m, &(s, _))| {
                let end = self.switches.get(m + 1).map_or(self.horizon, |n| n.0);
                end - s
            })
            .sum()
    }
}

/// Sample a regime trajectory on `[0, horizon]` starting in `initial`.
pub fn simulate_regime_path<R: Rng + ?Sized>(
    generator: &RegimeGenerator,
    initial: Regime,
    horizon: f64,
    rng: &mut R,
) -> Result<RegimePath> {
    if initial.0 >= generator.size() {
        return domain(format!("regime {} outside generator", initial.number()));
    }
    let mut switches = vec![(0.0, initial)];
    let mut t = 0.0;
    let mut i = initial;
    loop {
        let exit = generator.exit_rate(i);
        if exit <= 0.0 {
            break;
        }
        t += Exp::new(exit).expect("positive rate").sample(rng);
        if t >= horizon {
            break;
        }
        let mut u = rng.random::<f64>() * exit;
        let mut next = i;
        for j in generator.regimes().filter(|&j| j != i) {
            next = j;
            u -= generator.rate(i, j);
            if u < 0.0 {
                break;
            }
        }
        i = next;
        switches.push((t, i));
    }
    Ok(RegimePath { horizon, switches })
}

/// Seeded variant of [`simulate_regime_path`].
pub fn simulate_regime_path_seeded(
    generator: &RegimeGenerator,
    initial: Regime,
    horizon: f64,
    seed: u64,
) -> Result<RegimePath> {
    simulate_regime_path(generator, initial, horizon, &mut ChaCha20Rng::seed_from_u64(seed))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathOutcome {
    pub terminal: State,
    pub terminal_regime: Regime,
    /// Accepted claims per insurer.
    pub claims: [u64; 2],
}

/// Claim arrival times of insurer `k` given the regime path, by thinning.
fn claim_times<R: Rng + ?Sized>(spec: &GameSpec, k: Player, regimes: &RegimePath, rng: &mut R) -> Vec<f64> {
    let rates = &spec.insurer(k).claim_rate;
    let lmax = rates.iter().copied().fold(0.0, f64::max);
    let mut out = Vec::new();
    if lmax <= 0.0 {
        return out;
    }
    let exp = Exp::new(lmax).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += exp.sample(rng);
        if t > regimes.horizon {
            return out;
        }
        let accept = rates[regimes.regime_at(t).0] / lmax;
        if rng.random::<f64>() < accept {
            out.push(t);
        }
    }
}

/// Simulate one path of `(X_1, X_2, Z)` along a given regime trajectory.
///
/// Errors carry the Euler step index at which the state became nonfinite;
/// the path field is left at 0 for the caller to fill in.
pub fn simulate_path<R: Rng + ?Sized>(
    spec: &GameSpec,
    policy: &dyn FeedbackPolicy,
    regimes: &RegimePath,
    initial: State,
    euler_step: f64,
    rng: &mut R,
) -> Result<PathOutcome> {
    let steps = (regimes.horizon / euler_step).round().max(1.0) as usize;
    let dt = regimes.horizon / steps as f64;
    let sqrt_dt = dt.sqrt();
    let claims = [
        claim_times(spec, Player::One, regimes, rng),
        claim_times(spec, Player::Two, regimes, rng),
    ];
    let severity = [
        Exp::new(spec.insurers[0].severity_rate).map_err(|e| Error::Domain(e.to_string()))?,
        Exp::new(spec.insurers[1].severity_rate).map_err(|e| Error::Domain(e.to_string()))?,
    ];
    let caps = [spec.retention_cap(Player::One), spec.retention_cap(Player::Two)];
    let mut next_claim = [0usize; 2];
    let mut x = initial;
    for n in 0..steps {
        let t = n as f64 * dt;
        let t_end = if n + 1 == steps { regimes.horizon } else { (n + 1) as f64 * dt };
        let i = regimes.regime_at(t);
        let u = policy.control(t, x, i)?;
        let dw_s: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        let dw_z: f64 = rng.sample::<f64, _>(StandardNormal) * sqrt_dt;
        let mu1 = surplus_drift(spec, Player::One, x.x1, x.z, i, &u);
        let mu2 = surplus_drift(spec, Player::Two, x.x2, x.z, i, &u);
        let s1 = surplus_vol(spec, Player::One, x.z, i, &u);
        let s2 = surplus_vol(spec, Player::Two, x.z, i, &u);
        let mz = spec.market.index_drift(t, x.z);
        let sz = spec.market.index_vol(t, x.z);
        let mut y = State::new(x.x1 + mu1 * dt + s1 * dw_s, x.x2 + mu2 * dt + s2 * dw_s, x.z + mz * dt + sz * dw_z);
        for k in Player::BOTH {
            let d = k.index();
            while next_claim[d] < claims[d].len() && claims[d][next_claim[d]] <= t_end {
                let at = regimes.regime_at(claims[d][next_claim[d]]);
                let size = spec.insurer(k).claim_magnitude(at, severity[d].sample(rng));
                let kept = claim_retained(spec.mode(), size, u.player(k).retention, caps[d])?;
                let kappa_other = spec.insurer(k.other()).sensitivity;
                match k {
                    Player::One => {
                        y.x1 -= kept;
                        y.x2 += kappa_other * kept;
                    }
                    Player::Two => {
                        y.x2 -= kept;
                        y.x1 += kappa_other * kept;
                    }
                }
                next_claim[d] += 1;
            }
        }
        if !(y.x1.is_finite() && y.x2.is_finite() && y.z.is_finite()) {
            return Err(Error::Simulation { path: 0, step: n });
        }
        x = y;
    }
    Ok(PathOutcome {
        terminal: x,
        terminal_regime: regimes.regime_at(regimes.horizon),
        claims: [claims[0].len() as u64, claims[1].len() as u64],
    })
}

/// Independent random stream for path `path` under `seed`.
pub fn path_rng(seed: u64, path: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(path);
    rng
}

/// Simulate `config.path_count` paths from `(initial, regime)`; output is ordered by path.
pub fn simulate_paths(
    spec: &GameSpec,
    policy: &dyn FeedbackPolicy,
    initial: State,
    regime: Regime,
    config: &SimConfig,
) -> Result<Vec<PathOutcome>> {
    config.steps(spec.horizon)?;
    spec.check_regime(regime)?;
    let run = |p: u64| -> Result<PathOutcome> {
        let mut rng = path_rng(config.seed, p);
        let regimes = simulate_regime_path(&spec.generator, regime, spec.horizon, &mut rng)?;
        simulate_path(spec, policy, &regimes, initial, config.euler_step, &mut rng).map_err(|e| match e {
            Error::Simulation { step, .. } => Error::Simulation { path: p, step },
            other => other,
        })
    };
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(w) = config.workers {
        builder = builder.num_threads(w.max(1));
    }
    let pool = builder.build().map_err(|e| Error::State(format!("thread pool: {e}")))?;
    pool.install(|| (0..config.path_count).into_par_iter().map(run).collect())
}

/// Monte Carlo estimate of `E[U_k(X_k(T))]` for both players.
pub fn estimate_value(
    spec: &GameSpec,
    policy: &dyn FeedbackPolicy,
    initial: State,
    regime: Regime,
    config: &SimConfig,
) -> Result<[ValueEstimate; 2]> {
    let paths = simulate_paths(spec, policy, initial, regime, config)?;
    Ok(Player::BOTH.map(|k| {
        let u: Vec<f64> = paths
            .iter()
            .map(|p| spec.insurer(k).utility(p.terminal.surplus(k)))
            .collect();
        ValueEstimate::from_samples(&u)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{fixtures::published_game, MarketCoefficients};

    fn quiet(spec: &mut GameSpec) {
        spec.market = MarketCoefficients {
            risk_free_rate: vec![0.0; spec.regimes()],
            risky_drift_scale: 0.0,
            risky_vol_scale: 0.0,
            index_drift_scale: 0.0,
            index_vol_scale: 0.0,
        };
        for ins in &mut spec.insurers {
            ins.claim_rate = vec![0.0; spec.generator.size()];
            ins.premium_rate = vec![0.0; spec.generator.size()];
            ins.loading = 0.0;
        }
    }

    fn full_retention() -> ConstantPolicy {
        ConstantPolicy(JointControl::new(1.0, 0.0, 1.0, 0.0))
    }

    #[test]
    fn zero_generator_gives_constant_regime() {
        let g = RegimeGenerator::new(vec![vec![0.0, 0.0], vec![0.0, 0.0]]).unwrap();
        let p = simulate_regime_path_seeded(&g, Regime(1), 10.0, 7).unwrap();
        assert_eq!(p.switches, vec![(0.0, Regime(1))]);
        assert_eq!(p.regime_at(9.9), Regime(1));
    }

    #[test]
    fn holding_time_mean_matches_exponential() {
        let g = published_game().generator;
        let n = 100_000u64;
        let times: Vec<f64> = (0..n)
            .map(|p| {
                let path = simulate_regime_path(&g, Regime(0), 100.0, &mut path_rng(11, p)).unwrap();
                path.switches[1].0
            })
            .collect();
        let est = ValueEstimate::from_samples(&times);
        assert!((est.mean - 2.0).abs() <= 3.0 * est.standard_error, "{est:?}");
        let second: Vec<f64> = (0..n)
            .map(|p| {
                let path = simulate_regime_path(&g, Regime(1), 100.0, &mut path_rng(12, p)).unwrap();
                path.switches[1].0
            })
            .collect();
        let est = ValueEstimate::from_samples(&second);
        assert!((est.mean - 2.0).abs() <= 3.0 * est.standard_error, "{est:?}");
    }

    #[test]
    fn long_run_occupation_is_one_half() {
        let g = RegimeGenerator::new(vec![vec![-1.0, 1.0], vec![1.0, -1.0]]).unwrap();
        let horizon = 200.0;
        let fractions: Vec<f64> = (0..5_000u64)
            .map(|p| {
                // alternate the start so the initial-state bias cancels
                let start = Regime((p % 2) as usize);
                let path = simulate_regime_path(&g, start, horizon, &mut path_rng(3, p)).unwrap();
                path.occupation(Regime(0)) / horizon
            })
            .collect();
        let est = ValueEstimate::from_samples(&fractions);
        assert!((est.mean - 0.5).abs() <= 3.0 * est.standard_error, "{est:?}");
    }

    #[test]
    fn claim_count_matches_poisson_mean() {
        let mut spec = published_game();
        quiet(&mut spec);
        spec.generator = RegimeGenerator::single();
        spec.market.risk_free_rate = vec![0.0];
        for ins in &mut spec.insurers {
            ins.premium_rate = vec![0.0];
            ins.claim_scale = vec![1.0];
        }
        spec.insurers[0].claim_rate = vec![2.0];
        spec.insurers[1].claim_rate = vec![0.0];
        spec.horizon = 1.0;
        let cfg = SimConfig { path_count: 100_000, euler_step: 0.5, seed: 5, workers: None };
        let paths = simulate_paths(&spec, &full_retention(), State::new(0.0, 0.0, 1.0), Regime(0), &cfg).unwrap();
        let counts: Vec<f64> = paths.iter().map(|p| p.claims[0] as f64).collect();
        let est = ValueEstimate::from_samples(&counts);
        assert!((est.mean - 2.0).abs() <= 3.0 * est.standard_error, "{est:?}");
        assert!(paths.iter().all(|p| p.claims[1] == 0));
    }

    #[test]
    fn regime_dependent_claim_rate_by_thinning() {
        // regime path frozen in regime 2; claims must arrive at lambda(2) only
        let mut spec = published_game();
        quiet(&mut spec);
        spec.insurers[0].claim_rate = vec![0.5, 3.0];
        spec.horizon = 1.0;
        let path = RegimePath::constant(Regime(1), 1.0);
        let counts: Vec<f64> = (0..50_000u64)
            .map(|p| {
                let out = simulate_path(
                    &spec,
                    &full_retention(),
                    &path,
                    State::new(0.0, 0.0, 1.0),
                    0.5,
                    &mut path_rng(9, p),
                )
                .unwrap();
                out.claims[0] as f64
            })
            .collect();
        let est = ValueEstimate::from_samples(&counts);
        assert!((est.mean - 3.0).abs() <= 3.0 * est.standard_error, "{est:?}");
    }

    #[test]
    fn zero_dynamics_keep_initial_state() {
        let mut spec = published_game();
        quiet(&mut spec);
        let x0 = State::new(0.3, -0.2, 1.1);
        let path = RegimePath::constant(Regime(0), spec.horizon);
        let out = simulate_path(&spec, &full_retention(), &path, x0, 0.01, &mut path_rng(1, 0)).unwrap();
        assert_eq!(out.terminal, x0);
    }

    #[test]
    fn deterministic_drift_is_integrated() {
        let mut spec = published_game();
        quiet(&mut spec);
        spec.insurers[0].premium_rate = vec![0.7, 0.7];
        spec.horizon = 1.0;
        let x0 = State::new(0.1, 0.0, 1.0);
        let path = RegimePath::constant(Regime(0), 1.0);
        let out = simulate_path(&spec, &full_retention(), &path, x0, 0.01, &mut path_rng(1, 0)).unwrap();
        assert!((out.terminal.x1 - 0.8).abs() < 1e-12);

        // x' = r x + c has Euler error O(dt)
        spec.market.risk_free_rate = vec![0.5, 0.5];
        let exact = (0.1 + 0.7 / 0.5) * 0.5f64.exp() - 0.7 / 0.5;
        let err = |h: f64| {
            let out = simulate_path(&spec, &full_retention(), &path, x0, h, &mut path_rng(1, 0)).unwrap();
            (out.terminal.x1 - exact).abs()
        };
        let (e1, e2) = (err(0.02), err(0.01));
        assert!(e1 < 0.02 && e2 < e1);
        assert!((e1 / e2 - 2.0).abs() < 0.1, "{}", e1 / e2);
    }

    #[test]
    fn standard_error_survives_huge_samples() {
        let e = ValueEstimate::from_samples(&[1.0, 2.0, 3.0, 4.0]);
        assert!((e.standard_error - (5.0f64 / 3.0 / 4.0).sqrt()).abs() < 1e-15);
        let e = ValueEstimate::from_samples(&[-1e300, 1e300]);
        assert_eq!(e.mean, 0.0);
        assert!((e.standard_error / 1e300 - 1.0).abs() < 1e-12);
    }

    #[test]
    fn degenerate_estimate_has_zero_error() {
        let mut spec = published_game();
        quiet(&mut spec);
        spec.insurers[1].premium_rate = vec![0.3, 0.3];
        let x0 = State::new(0.0, 0.1, 1.0);
        let cfg = SimConfig { path_count: 64, euler_step: 0.01, seed: 2, workers: Some(2) };
        let [v1, v2] = estimate_value(&spec, &full_retention(), x0, Regime(0), &cfg).unwrap();
        // the opponent's premium enters X_1 with weight -kappa_1
        let x1 = -0.8 * 0.3 * spec.horizon;
        let x2 = 0.1 + 0.3 * spec.horizon;
        for (v, x, k) in [(v1, x1, 0), (v2, x2, 1)] {
            assert!(v.standard_error < 1e-15, "{v:?}");
            assert!((v.mean - spec.insurers[k].utility(x)).abs() < 1e-15);
        }
    }

    #[test]
    fn estimates_are_seed_deterministic_and_worker_invariant() {
        let spec = published_game();
        let policy = ConstantPolicy(JointControl::new(0.6, 0.4, 0.8, -0.2));
        let x0 = State::new(0.0, 0.0, 1.01);
        let mk = |w| SimConfig { path_count: 2_000, euler_step: 0.004, seed: 42, workers: Some(w) };
        let a = estimate_value(&spec, &policy, x0, Regime(0), &mk(1)).unwrap();
        let b = estimate_value(&spec, &policy, x0, Regime(0), &mk(1)).unwrap();
        let c = estimate_value(&spec, &policy, x0, Regime(0), &mk(8)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a, c);
        assert!(a.iter().all(|v| v.mean <= 0.0 && v.standard_error >= 0.0));
        let other = estimate_value(&spec, &policy, x0, Regime(0), &SimConfig { seed: 43, ..mk(4) }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn config_checks_step_division() {
        let cfg = SimConfig { path_count: 1, euler_step: 0.03, seed: 0, workers: None };
        assert!(cfg.steps(0.08).is_err());
        assert_eq!(SimConfig { euler_step: 0.004, ..cfg.clone() }.steps(0.08).unwrap(), 20);
        assert!(SimConfig { path_count: 0, euler_step: 0.01, ..cfg }.steps(0.08).is_err());
    }

    #[test]
    fn nonfinite_state_reports_step() {
        let mut spec = published_game();
        quiet(&mut spec);
        spec.insurers[0].premium_rate = vec![f64::INFINITY; 2];
        let path = RegimePath::constant(Regime(0), spec.horizon);
        let err = simulate_path(&spec, &full_retention(), &path, State::new(0.0, 0.0, 1.0), 0.01, &mut path_rng(0, 0))
            .unwrap_err();
        assert!(matches!(err, Error::Simulation { step: 0, .. }));
    }
}
