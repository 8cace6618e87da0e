//! Comparison policies costed in the same model as the solvers.

use crate::error::{Error, Result};
use crate::model::{DeadlineSpec, DomainSetting, DutyDecision, PowerState, RailSet, Scenario};
use crate::solver::Schedule;
use crate::statespace::{LayerCandidates, enumerate_states};

fn nominal_rails(scenario: &Scenario) -> RailSet {
    RailSet::new(vec![scenario.workload.v_nom]).expect("single rail")
}

/// Every domain on the nominal rail in every layer, no gating, idle
/// powered on.
pub fn baseline_nominal(scenario: &Scenario, deadline: &DeadlineSpec) -> Result<Schedule> {
    let v = DomainSetting::Rail(scenario.workload.v_nom);
    let settings = vec![vec![v; scenario.workload.domains.len()]; scenario.num_layers()];
    let s = Schedule::assemble(scenario, nominal_rails(scenario), settings, deadline, Some(DutyDecision::Active))?;
    if !s.feasible() {
        return Err(Error::InfeasibleAtNominal {
            t_infer: s.t_infer,
            t_max: deadline.t_max,
        });
    }
    Ok(s)
}

/// Nominal voltages with every profitable bank-gating option taken. Whole-
/// layer gates are dropped again if their wake latency breaks the deadline.
pub fn baseline_gating(scenario: &Scenario, deadline: &DeadlineSpec) -> Result<Schedule> {
    let rails = nominal_rails(scenario);
    let layers = (0..scenario.num_layers())
        .map(|i| enumerate_states(scenario, &rails, i))
        .collect::<Result<Vec<_>>>()?;
    let pick = |allow_whole: bool| -> Vec<Vec<DomainSetting>> {
        layers
            .iter()
            .map(|c| {
                c.states
                    .iter()
                    .filter(|s| allow_whole || !s.settings.contains(&DomainSetting::Gated))
                    .min_by_key(|s| s.energy())
                    .expect("ungated state exists")
                    .settings
                    .clone()
            })
            .collect()
    };
    let mut s = Schedule::assemble(scenario, rails.clone(), pick(true), deadline, Some(DutyDecision::Active))?;
    if !s.feasible() {
        s = Schedule::assemble(scenario, rails, pick(false), deadline, Some(DutyDecision::Active))?;
    }
    if !s.feasible() {
        return Err(Error::InfeasibleAtNominal {
            t_infer: s.t_infer,
            t_max: deadline.t_max,
        });
    }
    Ok(s)
}

/// Per-layer (latency, energy) Pareto frontier, slowest last.
fn frontier(c: &LayerCandidates, allow_gating: bool) -> Vec<PowerState> {
    let mut states: Vec<&PowerState> = c
        .states
        .iter()
        .filter(|s| allow_gating || s.settings.iter().all(|x| matches!(x, DomainSetting::Rail(_))))
        .collect();
    states.sort_by_key(|s| (s.latency(), s.energy()));
    let mut out: Vec<PowerState> = Vec::new();
    for s in states {
        if out.last().is_none_or(|f| s.energy() < f.energy()) {
            out.push(s.clone());
        }
    }
    out
}

/// Transition-blind greedy DVFS over the full voltage menu.
///
/// Each layer starts at its minimum-energy state. While the schedule, costed
/// with real transitions, misses the deadline: if some single-layer move
/// along that layer's frontier makes it feasible, the cheapest such move is
/// taken; otherwise the move with the largest latency cut per added energy,
/// both measured without transitions.
pub fn baseline_greedy_dvfs(scenario: &Scenario, deadline: &DeadlineSpec, gating: bool) -> Result<Schedule> {
    let full = RailSet::new(scenario.model.menu.levels().to_vec())?;
    let fronts = (0..scenario.num_layers())
        .map(|i| Ok(frontier(&enumerate_states(scenario, &full, i)?, gating)))
        .collect::<Result<Vec<_>>>()?;
    let mut pos: Vec<usize> = fronts.iter().map(|f| f.len() - 1).collect();
    let trans = |a: &PowerState, b: &PowerState| scenario.transition(&a.settings, &b.settings).0;
    let t_of = |pos: &[usize]| -> u64 {
        let mut t = 0;
        for i in 0..pos.len() {
            t += fronts[i][pos[i]].latency();
            if i > 0 {
                t += trans(&fronts[i - 1][pos[i - 1]], &fronts[i][pos[i]]);
            }
        }
        t
    };
    let mut t = t_of(&pos);
    while t > deadline.t_max {
        let mut finish: Option<(u64, usize, usize)> = None;
        let mut ratio: Option<(u64, u64, usize, usize)> = None;
        for i in 0..pos.len() {
            let cur = &fronts[i][pos[i]];
            for k in 0..pos[i] {
                let cand = &fronts[i][k];
                let de = cand.energy() - cur.energy();
                let dt = cur.latency() - cand.latency();
                let mut t_new = t - dt;
                if i > 0 {
                    let p = &fronts[i - 1][pos[i - 1]];
                    t_new = t_new - trans(p, cur) + trans(p, cand);
                }
                if i + 1 < pos.len() {
                    let n = &fronts[i + 1][pos[i + 1]];
                    t_new = t_new - trans(cur, n) + trans(cand, n);
                }
                if t_new <= deadline.t_max {
                    if finish.is_none_or(|(fe, _, _)| de < fe) {
                        finish = Some((de, i, k));
                    }
                } else if ratio.is_none_or(|(re, rt, _, _)| u128::from(dt) * u128::from(re) > u128::from(rt) * u128::from(de)) {
                    ratio = Some((de, dt, i, k));
                }
            }
        }
        let (i, k) = match (finish, ratio) {
            (Some((_, i, k)), _) => (i, k),
            (None, Some((_, _, i, k))) => (i, k),
            (None, None) => {
                return Err(Error::GreedyFailed {
                    t_infer: t,
                    t_max: deadline.t_max,
                });
            }
        };
        pos[i] = k;
        t = t_of(&pos);
    }
    let settings: Vec<Vec<DomainSetting>> = pos
        .iter()
        .enumerate()
        .map(|(i, &k)| fronts[i][k].settings.clone())
        .collect();
    let mut used: Vec<_> = settings.iter().flatten().filter_map(|s| s.level()).collect();
    used.sort_unstable();
    used.dedup();
    let s = Schedule::assemble(scenario, RailSet::new(used)?, settings, deadline, None)?;
    debug_assert!(s.feasible());
    Ok(s)
}
