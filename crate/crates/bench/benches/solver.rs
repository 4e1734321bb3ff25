use criterion::{criterion_group, criterion_main, Criterion};
use std::hint::black_box;

use insgame_core::solver::terminal_values;
use insgame_core::{
    backward_solve, nash_at_node, node_backup, CflPolicy, GameSpec, InsurerSpec, Interval, JointControl,
    LatticeSpec, MarketCoefficients, NodeIndex, Player, Problem, Regime, RegimeGenerator, ReinsuranceMode,
    SolverOptions,
};

fn insurer(eta: f64, kappa: f64, c: [f64; 2], lambda: [f64; 2], theta: f64, loading: f64) -> InsurerSpec {
    InsurerSpec {
        premium_rate: c.to_vec(),
        claim_rate: lambda.to_vec(),
        severity_rate: theta,
        risk_aversion: eta,
        sensitivity: kappa,
        loading,
        mode: ReinsuranceMode::Proportional,
        claim_scale: vec![1.0, 1.0],
    }
}

fn game() -> GameSpec {
    GameSpec {
        generator: RegimeGenerator::new(vec![vec![-0.5, 0.5], vec![0.5, -0.5]]).unwrap(),
        market: MarketCoefficients {
            risk_free_rate: vec![0.02, 0.03],
            risky_drift_scale: 0.2,
            risky_vol_scale: 0.4,
            index_drift_scale: 0.4,
            index_vol_scale: 0.1,
        },
        insurers: [
            insurer(17.0, 0.8, [0.05, 0.10], [0.2, 0.8], 0.3, 1.1),
            insurer(21.0, 0.7, [0.02, 0.20], [0.3, 0.7], 0.2, 1.15),
        ],
        horizon: 0.08,
        tail_probability: 1e-6,
    }
}

fn lattice(b: f64, bstep: f64) -> LatticeSpec {
    LatticeSpec {
        state_step: 0.2,
        time_step: 0.04,
        bounds: [Interval::new(-3.0, 3.0), Interval::new(-3.0, 3.0), Interval::new(0.41, 2.01)],
        retention_levels: 6,
        investment_min: -b,
        investment_max: b,
        investment_step: bstep,
    }
}

fn benches(c: &mut Criterion) {
    let problem = Problem::new(game(), lattice(3.0, 0.2)).unwrap();
    let next = terminal_values(&problem);
    let node = NodeIndex::new(15, 15, 3, Regime(0));
    let u = JointControl::new(0.6, 0.4, 0.2, 1.0);
    let signed = SolverOptions { cfl: CflPolicy::Signed, ..Default::default() };

    c.bench_function("node_backup", |b| {
        b.iter(|| node_backup(&problem, &next, black_box(node), 0.0, &u, Player::One, CflPolicy::Signed).unwrap())
    });
    c.bench_function("nash_at_node", |b| {
        b.iter(|| nash_at_node(&problem, &next, black_box(node), 0.0, &signed).unwrap())
    });

    let small = Problem::new(game(), lattice(0.4, 0.2)).unwrap();
    let mut group = c.benchmark_group("backward_solve");
    group.sample_size(10);
    group.bench_function("coarse_controls", |b| b.iter(|| backward_solve(&small, &signed).unwrap()));
    group.finish();
}

criterion_group!(solver, benches);
criterion_main!(solver);
