//! CSV and JSON artifacts. Numbers use 17 significant digits; lines end in `\n`.

use std::fmt::Write as _;

use insgame_core::solver::terminal_values;
use insgame_core::{
    ConsistencyReport, JointControl, Lattice, NodeIndex, Player, PolicyField, Problem, Regime, Solution, State,
    ValueEstimate, ValueSlice,
};

pub const SOLVE_HEADER: &str = "t,regime,x1,x2,z,V1,V2,a1,b1,a2,b2,diagnostic";
pub const SIMULATION_HEADER: &str = "x1,x2,z,regime,player,grid_value,mc_mean,standard_error,path_count";
pub const PATHS_HEADER: &str = "path,x1,x2,z,regime,claims1,claims2";
pub const CONSISTENCY_HEADER: &str =
    "t,regime,x1,x2,z,a1,b1,a2,b2,player,mean_error_x,mean_error_z,variance_error,self_probability";

/// Fixed-width scientific notation with 17 significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.16e}")
}

fn controls(out: &mut String, u: &JointControl) {
    let _ = write!(out, "{},{},{},{}", num(u.a1), num(u.b1), num(u.a2), num(u.b2));
}

fn state_cols(out: &mut String, s: &State) {
    let _ = write!(out, "{},{},{}", num(s.x1), num(s.x2), num(s.z));
}

/// One solved slice: values and equilibrium controls at every node.
pub fn slice_csv(lattice: &Lattice, policy: &PolicyField, values: &ValueSlice, n: usize) -> String {
    let mut out = String::with_capacity(lattice.node_count() * 256);
    out.push_str(SOLVE_HEADER);
    out.push('\n');
    let t = lattice.time(n);
    for (flat, node) in lattice.nodes().enumerate() {
        let _ = write!(out, "{},{},", num(t), node.regime.number());
        state_cols(&mut out, &lattice.state_of(&node));
        let _ = write!(out, ",{},{},", num(values.get(Player::One, flat)), num(values.get(Player::Two, flat)));
        controls(&mut out, &policy.control(n, &node));
        let _ = writeln!(out, ",{}", policy.diagnostic(n, &node).as_str());
    }
    out
}

/// Terminal utilities; control columns are empty.
pub fn terminal_csv(problem: &Problem) -> String {
    let lattice = problem.lattice();
    let values = terminal_values(problem);
    let mut out = String::new();
    out.push_str(SOLVE_HEADER);
    out.push('\n');
    let t = lattice.time(lattice.time_steps());
    for (flat, node) in lattice.nodes().enumerate() {
        let _ = write!(out, "{},{},", num(t), node.regime.number());
        state_cols(&mut out, &lattice.state_of(&node));
        let _ = writeln!(
            out,
            ",{},{},,,,,terminal",
            num(values.get(Player::One, flat)),
            num(values.get(Player::Two, flat))
        );
    }
    out
}

pub fn sweep_header(regimes: usize) -> String {
    let mut h = String::from("t,x1,x2,z");
    for r in 1..=regimes {
        let _ = write!(h, ",a1_r{r},b1_r{r},a2_r{r},b2_r{r}");
    }
    h
}

/// Slice-`n` controls along lattice dimension `varied`, others fixed at the nearest node to `point`.
pub fn sweep_csv(solution: &Solution, n: usize, varied: usize, point: State) -> String {
    let policy = &solution.policy;
    let lattice = policy.lattice();
    let mut out = sweep_header(lattice.regimes());
    out.push('\n');
    let base = lattice.state_to_nearest_node(point, Regime(0));
    for j in 0..lattice.counts()[varied] {
        let node = base.with_coord(varied, j);
        let _ = write!(out, "{},", num(lattice.time(n)));
        state_cols(&mut out, &lattice.state_of(&node));
        for r in 0..lattice.regimes() {
            out.push(',');
            controls(&mut out, &policy.control(n, &NodeIndex { regime: Regime(r), ..node }));
        }
        out.push('\n');
    }
    out
}

pub struct SimulationRow {
    pub state: State,
    pub regime: Regime,
    pub grid_value: [f64; 2],
    pub estimate: [ValueEstimate; 2],
}

pub fn simulation_csv(rows: &[SimulationRow]) -> String {
    let mut out = String::from(SIMULATION_HEADER);
    out.push('\n');
    for r in rows {
        for k in Player::BOTH {
            let e = r.estimate[k.index()];
            state_cols(&mut out, &r.state);
            let _ = writeln!(
                out,
                ",{},{},{},{},{},{}",
                r.regime.number(),
                k.index() + 1,
                num(r.grid_value[k.index()]),
                num(e.mean),
                num(e.standard_error),
                e.path_count
            );
        }
    }
    out
}

pub fn paths_csv(paths: &[insgame_core::montecarlo::PathOutcome]) -> String {
    let mut out = String::from(PATHS_HEADER);
    out.push('\n');
    for (p, o) in paths.iter().enumerate() {
        let _ = write!(out, "{p},");
        state_cols(&mut out, &o.terminal);
        let _ = writeln!(out, ",{},{},{}", o.terminal_regime.number(), o.claims[0], o.claims[1]);
    }
    out
}

pub fn consistency_csv(lattice: &Lattice, report: &ConsistencyReport) -> String {
    let mut out = String::from(CONSISTENCY_HEADER);
    out.push('\n');
    for row in &report.rows {
        let s = &row.sample;
        let _ = write!(out, "{},{},", num(s.t), s.node.regime.number());
        state_cols(&mut out, &lattice.state_of(&s.node));
        out.push(',');
        controls(&mut out, &s.control);
        let _ = writeln!(
            out,
            ",{},{},{},{},{}",
            s.player.index() + 1,
            num(row.mean_error[0]),
            num(row.mean_error[1]),
            num(row.variance_error),
            num(row.self_probability)
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn numbers_have_seventeen_significant_digits() {
        assert_eq!(num(0.1), "1.0000000000000001e-1");
        assert_eq!(num(-3.0), "-3.0000000000000000e0");
        assert_eq!(num(0.0), "0.0000000000000000e0");
        for x in [0.1, 1.0 / 3.0, -17.25e-9, 6.02e23] {
            assert_eq!(num(x).parse::<f64>().unwrap(), x);
        }
    }

    #[test]
    fn sweep_header_lists_each_regime() {
        assert_eq!(
            sweep_header(2),
            "t,x1,x2,z,a1_r1,b1_r1,a2_r1,b2_r1,a1_r2,b1_r2,a2_r2,b2_r2"
        );
    }
}
