use crate::model::{DeadlineSpec, DutyDecision, DutyModel, EXACT_PER_FJ};
use crate::statespace::LayeredStateGraph;

use super::{Lambda, Schedule};

/// Result of one fixed-λ pass.
#[derive(Clone, Debug)]
pub struct LambdaSolution {
    pub lambda: Lambda,
    pub schedule: Schedule,
    /// Weighted optimum as (primary, secondary).
    ///
    /// Finite λ = p/q: primary is `q * E_hat + p * 1e6 * T` with the idle
    /// term extended linearly in T, secondary is T. λ = ∞: primary is T,
    /// secondary the exact energy with the same extension.
    pub weighted: (i128, i128),
    pub duty: DutyDecision,
}

#[derive(Clone, Copy)]
struct Weights {
    /// Multipliers on (energy in fJ, time in ps) for both key components.
    primary: (i128, i128),
    secondary: (i128, i128),
    terminal: (i128, i128),
}

fn weights(lambda: Lambda, deadline: &DeadlineSpec, z: DutyDecision) -> Weights {
    let idle_c = match z {
        DutyDecision::Active => i128::from(deadline.idle_power),
        DutyDecision::PowerDown => 0,
    };
    let idle_const = match (z, deadline.duty_model) {
        (DutyDecision::Active, _) => i128::from(deadline.idle_power) * i128::from(deadline.t_max),
        (DutyDecision::PowerDown, DutyModel::PowerDown { duty_wake_energy, .. }) => {
            i128::from(duty_wake_energy) * EXACT_PER_FJ
        }
        (DutyDecision::PowerDown, DutyModel::AlwaysActive) => 0,
    };
    if lambda.is_infinite() {
        Weights {
            primary: (0, 1),
            secondary: (EXACT_PER_FJ, -idle_c),
            terminal: (0, idle_const),
        }
    } else {
        let p = i128::from(lambda.num);
        let q = i128::from(lambda.den);
        Weights {
            primary: (q * EXACT_PER_FJ, EXACT_PER_FJ * p - q * idle_c),
            secondary: (0, 1),
            terminal: (q * idle_const, 0),
        }
    }
}

type Key = (i128, i128);

#[inline]
fn key(w: &Weights, e: u64, t: u64) -> Key {
    let (e, t) = (i128::from(e), i128::from(t));
    (w.primary.0 * e + w.primary.1 * t, w.secondary.0 * e + w.secondary.1 * t)
}

#[inline]
fn add(a: Key, b: Key) -> Key {
    (a.0 + b.0, a.1 + b.1)
}

/// Backward pass: optimal cost-to-go from every state, then a forward walk
/// choosing the lowest-index optimal successor.
fn solve_one(graph: &LayeredStateGraph, w: &Weights) -> (Key, Vec<usize>) {
    let l = graph.num_layers();
    let node_keys: Vec<Vec<Key>> = graph
        .layers
        .iter()
        .map(|c| c.states.iter().map(|s| key(w, s.energy(), s.latency())).collect())
        .collect();
    let mut togo: Vec<Vec<Key>> = vec![Vec::new(); l];
    togo[l - 1] = node_keys[l - 1].clone();
    let mut scratch = Vec::new();
    for i in (0..l - 1).rev() {
        let next = &togo[i + 1];
        let mut cur = Vec::with_capacity(graph.layers[i].len());
        for (a, nk) in node_keys[i].iter().enumerate() {
            let row = graph.edge_row(i, a, &mut scratch);
            let best = row
                .iter()
                .zip(next)
                .map(|(e, v)| add(key(w, e.energy, e.time), *v))
                .min()
                .expect("non-empty layer");
            cur.push(add(*nk, best));
        }
        togo[i] = cur;
    }
    let best = *togo[0].iter().min().expect("non-empty layer");
    let mut path = Vec::with_capacity(l);
    path.push(togo[0].iter().position(|k| *k == best).unwrap());
    for i in 0..l - 1 {
        let a = path[i];
        let target = (togo[i].get(a).unwrap().0 - node_keys[i][a].0, togo[i][a].1 - node_keys[i][a].1);
        let row = graph.edge_row(i, a, &mut scratch);
        let b = row
            .iter()
            .zip(&togo[i + 1])
            .position(|(e, v)| add(key(w, e.energy, e.time), *v) == target)
            .expect("optimal successor exists");
        path.push(b);
    }
    (add(best, w.terminal), path)
}

/// Minimise the λ-weighted objective over every path and every allowed duty
/// decision, exactly in integers.
///
/// Ties go to lower latency, then to the lexicographically smallest state
/// index sequence, then to staying active.
pub fn dp_fixed_lambda(graph: &LayeredStateGraph, lambda: Lambda, deadline: &DeadlineSpec) -> LambdaSolution {
    assert!(graph.num_layers() > 0, "graph has no layers");
    let mut best: Option<(Key, Vec<usize>, DutyDecision)> = None;
    for &z in deadline.duty_options() {
        let (k, path) = solve_one(graph, &weights(lambda, deadline, z));
        let better = match &best {
            None => true,
            Some((bk, bp, _)) => (k, &path) < (*bk, bp),
        };
        if better {
            best = Some((k, path, z));
        }
    }
    let (weighted, path, duty) = best.unwrap();
    LambdaSolution {
        lambda,
        schedule: Schedule::from_graph(graph, &path, deadline),
        weighted,
        duty,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DutyModel, RailSet};
    use crate::solver::testutil::*;

    fn deadline(pd: bool) -> DeadlineSpec {
        let m = if pd {
            DutyModel::PowerDown {
                duty_wake_energy: 2_000_000,
                duty_wake_latency: 10_000,
            }
        } else {
            DutyModel::AlwaysActive
        };
        DeadlineSpec::from_t_max(2_000_000, 40_000, m).unwrap()
    }

    /// Weighted value of one path under one duty option, straight from the
    /// definition.
    fn brute_value(g: &LayeredStateGraph, p: &[usize], lambda: Lambda, d: &DeadlineSpec, z: DutyDecision) -> (i128, i128) {
        let mut e: i128 = 0;
        let mut t: i128 = 0;
        for (i, &s) in p.iter().enumerate() {
            e += i128::from(g.state(i, s).energy());
            t += i128::from(g.state(i, s).latency());
            if i > 0 {
                let c = g.edge(i - 1, p[i - 1], s);
                e += i128::from(c.energy);
                t += i128::from(c.time);
            }
        }
        let idle = match (z, d.duty_model) {
            (DutyDecision::Active, _) => i128::from(d.idle_power) * (i128::from(d.t_max) - t),
            (DutyDecision::PowerDown, DutyModel::PowerDown { duty_wake_energy, .. }) => {
                i128::from(duty_wake_energy) * 1_000_000
            }
            _ => unreachable!(),
        };
        let ehat = e * 1_000_000 + idle;
        if lambda.is_infinite() {
            (t, ehat)
        } else {
            (
                i128::from(lambda.den) * ehat + i128::from(lambda.num) * 1_000_000 * t,
                t,
            )
        }
    }

    #[test]
    fn matches_exhaustive_enumeration() {
        for pd in [false, true] {
            let d = deadline(pd);
            for sw in [0, 300_000, 5_000_000] {
                let s = small_scenario(3, sw);
                let r = RailSet::from_millivolts(&[900, 1200]).unwrap();
                let g = LayeredStateGraph::build(&s, &r, false).unwrap();
                let paths = all_paths(&g);
                assert_eq!(paths.len(), 64);
                for lam in [
                    Lambda::ZERO,
                    Lambda::from_fj_per_ps(1),
                    Lambda::from_fj_per_ps(10),
                    Lambda::new(3, 7),
                    Lambda::INFINITY,
                ] {
                    let sol = dp_fixed_lambda(&g, lam, &d);
                    let mut best = None;
                    for p in &paths {
                        for &z in d.duty_options() {
                            let v = brute_value(&g, p, lam, &d, z);
                            if best.as_ref().is_none_or(|(bv, _)| v < *bv) {
                                best = Some((v, p.clone()));
                            }
                        }
                    }
                    let (bv, bp) = best.unwrap();
                    assert_eq!(sol.weighted, bv, "lambda {lam} sw {sw}");
                    assert_eq!(sol.schedule.path, bp, "lambda {lam} sw {sw}");
                }
            }
        }
    }

    #[test]
    fn lambda_zero_without_transitions_is_per_layer_argmin() {
        let s = small_scenario(4, 0);
        let r = RailSet::from_millivolts(&[900, 1000, 1300]).unwrap();
        let g = LayeredStateGraph::build(&s, &r, false).unwrap();
        let d = DeadlineSpec::from_t_max(u64::MAX / 8, 0, DutyModel::AlwaysActive).unwrap();
        let sol = dp_fixed_lambda(&g, Lambda::ZERO, &d);
        for (i, &k) in sol.schedule.path.iter().enumerate() {
            let min_e = g.layers[i].states.iter().map(|s| s.energy()).min().unwrap();
            assert_eq!(g.state(i, k).energy(), min_e);
        }
    }

    #[test]
    fn infinite_lambda_gives_min_latency() {
        let s = small_scenario(4, 1_000_000);
        let r = RailSet::from_millivolts(&[900, 1000, 1300]).unwrap();
        let g = LayeredStateGraph::build(&s, &r, false).unwrap();
        let d = deadline(false);
        let sol = dp_fixed_lambda(&g, Lambda::INFINITY, &d);
        let min_t = all_paths(&g)
            .iter()
            .map(|p| Schedule::from_graph(&g, p, &d).t_infer)
            .min()
            .unwrap();
        assert_eq!(sol.schedule.t_infer, min_t);
    }
}
