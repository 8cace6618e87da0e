use crate::error::Result;
use crate::model::DeadlineSpec;
use crate::statespace::LayeredStateGraph;

use super::search::{Search, check_feasible};
use super::{LAMBDA_GRID, Lambda, Schedule, SearchPhase, SolveReport};

/// One single-layer state change and its effect on the whole schedule.
#[derive(Clone, Copy, Debug)]
struct Upgrade {
    layer: usize,
    state: usize,
    /// Energy change in fJ, including both adjacent transitions.
    d_energy: i128,
    /// Latency change in ps, including both adjacent transitions.
    d_time: i128,
}

fn delta(graph: &LayeredStateGraph, path: &[usize], layer: usize, state: usize) -> (i128, i128) {
    let cur = path[layer];
    let (a, b) = (graph.state(layer, cur), graph.state(layer, state));
    let mut de = i128::from(b.energy()) - i128::from(a.energy());
    let mut dt = i128::from(b.latency()) - i128::from(a.latency());
    if layer > 0 {
        let old = graph.edge(layer - 1, path[layer - 1], cur);
        let new = graph.edge(layer - 1, path[layer - 1], state);
        de += i128::from(new.energy) - i128::from(old.energy);
        dt += i128::from(new.time) - i128::from(old.time);
    }
    if layer + 1 < path.len() {
        let old = graph.edge(layer, cur, path[layer + 1]);
        let new = graph.edge(layer, state, path[layer + 1]);
        de += i128::from(new.energy) - i128::from(old.energy);
        dt += i128::from(new.time) - i128::from(old.time);
    }
    (de, dt)
}

/// Latency-reducing change with the best utility: anything that also saves
/// energy comes first (largest latency cut), then the largest latency cut
/// per unit of added energy.
fn best_upgrade(graph: &LayeredStateGraph, path: &[usize]) -> Option<Upgrade> {
    let mut best: Option<Upgrade> = None;
    let better = |u: &Upgrade, b: &Upgrade| -> bool {
        let u_free = u.d_energy <= 0;
        let b_free = b.d_energy <= 0;
        match (u_free, b_free) {
            (true, false) => true,
            (false, true) => false,
            (true, true) => (u.d_time, u.d_energy) < (b.d_time, b.d_energy),
            // -dt_u / de_u > -dt_b / de_b
            (false, false) => {
                let l = -u.d_time * b.d_energy;
                let r = -b.d_time * u.d_energy;
                l > r || (l == r && u.d_time < b.d_time)
            }
        }
    };
    for layer in 0..path.len() {
        for state in 0..graph.layers[layer].len() {
            if state == path[layer] {
                continue;
            }
            let (d_energy, d_time) = delta(graph, path, layer, state);
            if d_time >= 0 {
                continue;
            }
            let u = Upgrade {
                layer,
                state,
                d_energy,
                d_time,
            };
            if best.as_ref().is_none_or(|b| better(&u, b)) {
                best = Some(u);
            }
        }
    }
    best
}

/// Grid point at or above the crossover `dE / -dT`.
fn jump_point(u: &Upgrade) -> Option<u64> {
    if u.d_energy <= 0 {
        return None;
    }
    let num = u.d_energy * i128::from(LAMBDA_GRID);
    let den = -u.d_time;
    let k = (num + den - 1) / den;
    u64::try_from(k).ok()
}

/// λ search seeded by the crossover points of greedy single-layer upgrades.
///
/// Upgrades are applied to the λ = 0 schedule until it meets the deadline;
/// each records the λ at which it would pay off. The sorted points are
/// binary-searched for the first feasible one, which brackets the usual
/// bisection.
pub fn marginal_utility_jump_search(graph: &LayeredStateGraph, deadline: &DeadlineSpec) -> Result<(Schedule, SolveReport)> {
    let mut s = Search::new(graph, deadline);
    let init = s.run(SearchPhase::Initial, Lambda::ZERO);
    if init.schedule.feasible() {
        return Ok(s.finish());
    }
    check_feasible(&mut s)?;

    let mut path = init.schedule.path.clone();
    let mut t = i128::from(init.schedule.t_infer);
    let t_max = i128::from(deadline.t_max);
    let mut points: Vec<u64> = Vec::new();
    let limit = 4 * graph.state_count() as usize + 16;
    while t > t_max && (s.report.upgrades as usize) < limit {
        let Some(u) = best_upgrade(graph, &path) else { break };
        path[u.layer] = u.state;
        t += u.d_time;
        s.report.upgrades += 1;
        if let Some(k) = jump_point(&u) {
            points.push(k);
        }
    }
    points.sort_unstable();
    points.dedup();
    s.report.jump_points = points.iter().map(|&k| Lambda::grid(k)).collect();

    // first feasible jump point
    let (mut lo_i, mut hi_i) = (0usize, points.len());
    while lo_i < hi_i {
        let mid = (lo_i + hi_i) / 2;
        if s.probe(SearchPhase::Jump, points[mid]) {
            hi_i = mid;
        } else {
            lo_i = mid + 1;
        }
    }
    let lo = if lo_i == 0 { 0 } else { points[lo_i - 1] };
    if lo_i < points.len() {
        s.bisect(lo, points[lo_i]);
    } else if let Some((blo, bhi)) = s.bracket(if lo == 0 { LAMBDA_GRID } else { lo * 2 }) {
        s.bisect(blo.max(lo), bhi);
    }
    Ok(s.finish())
}
