use crate::error::{Error, Result};
use crate::model::{DeadlineSpec, DutyDecision, DutyModel, EXACT_PER_FJ, Picos};
use crate::statespace::LayeredStateGraph;

use super::Schedule;

/// Default bound on stored labels before the oracle gives up.
pub const DEFAULT_LABEL_CAP: u64 = 10_000_000;

/// A non-dominated partial path ending at one state.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
struct Label {
    time: Picos,
    /// `1e6 * E - c * T`, with `c` the idle power when staying active.
    adjusted: i128,
    prev_state: u32,
    prev_label: u32,
}

#[derive(Clone, Debug)]
pub struct OracleSolution {
    pub schedule: Schedule,
    /// Labels stored across all nodes and duty options.
    pub labels: u64,
}

/// Pre-run label estimate: each node holds at most as many labels as there
/// are paths into it, assumed no more than the square of the states seen
/// before it.
pub fn estimate_labels(graph: &LayeredStateGraph) -> u64 {
    let mut total: u128 = 0;
    let mut paths: u128 = 1;
    let mut seen: u128 = 0;
    for layer in &graph.layers {
        let n = layer.len() as u128;
        let per_node = if seen == 0 { 1 } else { paths.min(seen * seen) };
        total = total.saturating_add(n * per_node);
        paths = paths.saturating_mul(n);
        seen += n;
    }
    total.min(u128::from(u64::MAX)) as u64
}

struct Run {
    /// Per layer, per state: labels sorted by ascending time.
    labels: Vec<Vec<Vec<Label>>>,
    best: Option<(i128, Picos, usize, usize)>,
    stored: u64,
}

fn run(graph: &LayeredStateGraph, deadline: &DeadlineSpec, z: DutyDecision, cap: u64, used: u64) -> Result<Run> {
    let (c, t_limit, terminal) = match (z, deadline.duty_model) {
        (DutyDecision::Active, _) => (
            i128::from(deadline.idle_power),
            deadline.t_max,
            i128::from(deadline.idle_power) * i128::from(deadline.t_max),
        ),
        (DutyDecision::PowerDown, DutyModel::PowerDown { duty_wake_energy, duty_wake_latency }) => (
            0,
            deadline.t_max.saturating_sub(duty_wake_latency),
            i128::from(duty_wake_energy) * EXACT_PER_FJ,
        ),
        (DutyDecision::PowerDown, DutyModel::AlwaysActive) => unreachable!("duty option not offered"),
    };
    let adj = |e: u64, t: u64| EXACT_PER_FJ * i128::from(e) - c * i128::from(t);
    let mut stored = used;
    let mut labels: Vec<Vec<Vec<Label>>> = Vec::with_capacity(graph.num_layers());
    let first = graph.layers[0]
        .states
        .iter()
        .map(|s| {
            if s.latency() <= t_limit {
                vec![Label {
                    time: s.latency(),
                    adjusted: adj(s.energy(), s.latency()),
                    prev_state: u32::MAX,
                    prev_label: u32::MAX,
                }]
            } else {
                vec![]
            }
        })
        .collect::<Vec<_>>();
    stored += first.iter().map(|v| v.len() as u64).sum::<u64>();
    labels.push(first);
    let mut cand: Vec<Label> = Vec::new();
    for i in 1..graph.num_layers() {
        let prev = &labels[i - 1];
        let mut layer = Vec::with_capacity(graph.layers[i].len());
        for (b, s) in graph.layers[i].states.iter().enumerate() {
            cand.clear();
            for (a, pl) in prev.iter().enumerate() {
                if pl.is_empty() {
                    continue;
                }
                let e = graph.edge(i - 1, a, b);
                let dt = e.time + s.latency();
                let da = adj(e.energy + s.energy(), dt);
                for (k, l) in pl.iter().enumerate() {
                    let t = l.time + dt;
                    if t > t_limit {
                        // labels are sorted by time: the rest overrun too
                        break;
                    }
                    cand.push(Label {
                        time: t,
                        adjusted: l.adjusted + da,
                        prev_state: a as u32,
                        prev_label: k as u32,
                    });
                }
            }
            cand.sort_by_key(|l| (l.time, l.adjusted, l.prev_state, l.prev_label));
            let mut front: Vec<Label> = Vec::new();
            for l in &cand {
                if front.last().is_none_or(|f| l.adjusted < f.adjusted) {
                    front.push(*l);
                }
            }
            stored += front.len() as u64;
            if stored > cap {
                return Err(Error::OracleCapacity { labels: stored, cap });
            }
            layer.push(front);
        }
        labels.push(layer);
    }
    let last = graph.num_layers() - 1;
    let mut best: Option<(i128, Picos, usize, usize)> = None;
    for (s, ls) in labels[last].iter().enumerate() {
        for (k, l) in ls.iter().enumerate() {
            let key = (l.adjusted + terminal, l.time, s, k);
            if best.is_none_or(|b| (key.0, key.1) < (b.0, b.1)) {
                best = Some(key);
            }
        }
    }
    Ok(Run { labels, best, stored: stored - used })
}

fn trace(run: &Run, last_state: usize, last_label: usize) -> Vec<usize> {
    let n = run.labels.len();
    let mut path = vec![0; n];
    let (mut s, mut k) = (last_state, last_label);
    for i in (0..n).rev() {
        path[i] = s;
        let l = run.labels[i][s][k];
        s = l.prev_state as usize;
        k = l.prev_label as usize;
    }
    path
}

/// Exact minimum-energy feasible schedule by forward Pareto-label search on
/// (latency, energy), with the default label cap.
pub fn exact_oracle(graph: &LayeredStateGraph, deadline: &DeadlineSpec) -> Result<OracleSolution> {
    exact_oracle_with_cap(graph, deadline, DEFAULT_LABEL_CAP)
}

/// As [`exact_oracle`] with an explicit label cap. Returns
/// [`Error::Infeasible`] when no path meets the deadline.
pub fn exact_oracle_with_cap(graph: &LayeredStateGraph, deadline: &DeadlineSpec, cap: u64) -> Result<OracleSolution> {
    let estimate = estimate_labels(graph);
    if estimate > cap {
        return Err(Error::OracleCapacity { labels: estimate, cap });
    }
    let mut total = 0;
    let mut best: Option<((i128, Picos), Vec<usize>)> = None;
    for &z in deadline.duty_options() {
        let r = run(graph, deadline, z, cap, total)?;
        total += r.stored;
        if let Some((e, t, s, k)) = r.best {
            let path = trace(&r, s, k);
            if best.as_ref().is_none_or(|(bk, bp)| ((e, t), &path) < (*bk, bp)) {
                best = Some(((e, t), path));
            }
        }
    }
    match best {
        Some((_, path)) => Ok(OracleSolution {
            schedule: Schedule::from_graph(graph, &path, deadline),
            labels: total,
        }),
        None => {
            let fastest = super::dp_fixed_lambda(graph, super::Lambda::INFINITY, deadline);
            Err(Error::Infeasible {
                min_latency: fastest.schedule.t_infer,
                t_max: deadline.t_max,
            })
        }
    }
}
