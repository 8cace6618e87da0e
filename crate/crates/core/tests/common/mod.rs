//! Independent reference computations for the integration tests. Costs are
//! re-derived from the scenario rather than read from graph edge tables.

#![allow(dead_code)]

use railsched::model::{DeadlineSpec, DutyDecision, DutyModel, Picos, Scenario};
use railsched::statespace::LayeredStateGraph;

/// Operating plus transition energy (fJ) and latency (ps) of a path.
pub fn path_cost(scenario: &Scenario, g: &LayeredStateGraph, path: &[usize]) -> (i128, i128) {
    let mut e = 0i128;
    let mut t = 0i128;
    for (i, &s) in path.iter().enumerate() {
        let st = &g.layers[i].states[s];
        e += i128::from(st.energy());
        t += i128::from(st.latency());
        if i > 0 {
            let prev = &g.layers[i - 1].states[path[i - 1]];
            let (tt, te) = scenario.transition(&prev.settings, &st.settings);
            e += i128::from(te);
            t += i128::from(tt);
        }
    }
    (e, t)
}

/// Idle energy in 1e-6 fJ for a pass of `t` ps, or `None` when the duty
/// decision does not fit in the frame.
pub fn idle_exact(d: &DeadlineSpec, t: i128, z: DutyDecision) -> Option<i128> {
    let t_max = i128::from(d.t_max);
    match (z, d.duty_model) {
        (DutyDecision::Active, _) => (t <= t_max).then(|| i128::from(d.idle_power) * (t_max - t)),
        (
            DutyDecision::PowerDown,
            DutyModel::PowerDown {
                duty_wake_energy,
                duty_wake_latency,
            },
        ) => (t + i128::from(duty_wake_latency) <= t_max).then(|| i128::from(duty_wake_energy) * 1_000_000),
        (DutyDecision::PowerDown, DutyModel::AlwaysActive) => None,
    }
}

pub fn duty_options(d: &DeadlineSpec) -> Vec<DutyDecision> {
    match d.duty_model {
        DutyModel::AlwaysActive => vec![DutyDecision::Active],
        DutyModel::PowerDown { .. } => vec![DutyDecision::Active, DutyDecision::PowerDown],
    }
}

/// Visit every path of the graph.
pub fn for_each_path(g: &LayeredStateGraph, mut f: impl FnMut(&[usize])) {
    let sizes: Vec<usize> = g.layers.iter().map(|l| l.len()).collect();
    let mut p = vec![0usize; sizes.len()];
    loop {
        f(&p);
        let mut i = sizes.len();
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            p[i] += 1;
            if p[i] < sizes[i] {
                break;
            }
            p[i] = 0;
        }
    }
}

pub fn path_count(g: &LayeredStateGraph) -> u128 {
    g.layers.iter().map(|l| l.len() as u128).product()
}

/// Minimum exact energy (1e-6 fJ) over feasible paths and duty decisions,
/// with its latency.
pub fn brute_min_energy(scenario: &Scenario, g: &LayeredStateGraph, d: &DeadlineSpec) -> Option<(i128, Picos)> {
    let mut best: Option<(i128, i128)> = None;
    for_each_path(g, |p| {
        let (e, t) = path_cost(scenario, g, p);
        for z in duty_options(d) {
            if let Some(idle) = idle_exact(d, t, z) {
                let key = (e * 1_000_000 + idle, t);
                if best.is_none_or(|b| key < b) {
                    best = Some(key);
                }
            }
        }
    });
    best.map(|(e, t)| (e, t as Picos))
}

/// Least-squares slope of `ln y` against `ln x`.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
