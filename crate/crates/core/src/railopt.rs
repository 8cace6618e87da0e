//! Outer loop over voltage-rail subsets.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::{DeadlineSpec, DomainSetting, DomainKind, RailSet, Scenario, VoltageLevel, VoltageMenu};
use crate::solver::{Schedule, exact_oracle, marginal_utility_jump_search, solve_lambda_search};
use crate::statespace::LayeredStateGraph;

/// Inner solver used per rail subset.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum SolverChoice {
    #[default]
    LambdaDp,
    Jump,
    Oracle,
}

/// Every non-empty subset of the menu with at most `n_max` levels, ordered
/// by size, then lexicographically by menu index.
pub fn enumerate_rail_sets(menu: &VoltageMenu, n_max: usize) -> Vec<RailSet> {
    let levels = menu.levels();
    let n = levels.len();
    let mut out = Vec::new();
    for k in 1..=n_max.min(n) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            out.push(RailSet::new(idx.iter().map(|&i| levels[i]).collect()).expect("distinct levels"));
            // next k-combination
            let Some(p) = (0..k).rev().find(|&p| idx[p] < n - k + p) else { break };
            idx[p] += 1;
            for q in p + 1..k {
                idx[q] = idx[q - 1] + 1;
            }
        }
    }
    out
}

/// `n` levels at menu indices `round(k * (|menu| - 1) / (n - 1))`; a single
/// rail is the top level.
pub fn evenly_spaced_rails(menu: &VoltageMenu, n: usize) -> Result<RailSet> {
    let levels = menu.levels();
    let m = levels.len();
    if n == 0 || n > m {
        return Err(Error::RailSet(format!("cannot pick {n} evenly spaced rails from {m} levels")));
    }
    if n == 1 {
        return RailSet::new(vec![menu.max()]);
    }
    let picked: Vec<VoltageLevel> = (0..n)
        .map(|k| levels[(2 * k * (m - 1) + (n - 1)) / (2 * (n - 1))])
        .collect();
    RailSet::new(picked)
}

/// Options for a rail-set solve.
#[derive(Clone, Copy, Debug)]
pub struct SolveOptions {
    pub solver: SolverChoice,
    pub prune: bool,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            solver: SolverChoice::LambdaDp,
            prune: true,
        }
    }
}

/// Solve one rail set.
pub fn solve_rail_set(
    scenario: &Scenario,
    rail_set: &RailSet,
    deadline: &DeadlineSpec,
    opts: SolveOptions,
) -> Result<Schedule> {
    let g = LayeredStateGraph::build(scenario, rail_set, opts.prune)?;
    Ok(match opts.solver {
        SolverChoice::LambdaDp => solve_lambda_search(&g, deadline)?.0,
        SolverChoice::Jump => marginal_utility_jump_search(&g, deadline)?.0,
        SolverChoice::Oracle => exact_oracle(&g, deadline)?.schedule,
    })
}

/// Latency of running every powered domain on the top rail with no
/// transitions: a lower bound on any schedule under the rail set.
pub fn max_voltage_latency(scenario: &Scenario, rail_set: &RailSet) -> Result<u64> {
    let top = rail_set.max();
    let bank = rail_set.bank_rail(scenario.workload.v_nom);
    let mut t = 0;
    for i in 0..scenario.num_layers() {
        let settings: Vec<DomainSetting> = scenario
            .workload
            .domains
            .iter()
            .map(|d| match d.kind {
                DomainKind::Dvfs => DomainSetting::Rail(top),
                DomainKind::GatedBank => DomainSetting::Rail(bank),
            })
            .collect();
        t += scenario.evaluate(i, &settings)?.latency;
    }
    Ok(t)
}

/// Best rail set of at most `n_max` levels and its schedule.
///
/// Subsets whose top-rail latency already misses the deadline are skipped.
/// Ties go to fewer rails, then the lexicographically lower set.
pub fn optimize_rails(
    scenario: &Scenario,
    deadline: &DeadlineSpec,
    n_max: usize,
    opts: SolveOptions,
) -> Result<(RailSet, Schedule)> {
    optimize_over(scenario, deadline, &enumerate_rail_sets(&scenario.model.menu, n_max), opts)
}

/// As [`optimize_rails`] over an explicit candidate list.
pub fn optimize_over(
    scenario: &Scenario,
    deadline: &DeadlineSpec,
    candidates: &[RailSet],
    opts: SolveOptions,
) -> Result<(RailSet, Schedule)> {
    let results: Vec<(usize, Result<Option<Schedule>>)> = candidates
        .par_iter()
        .enumerate()
        .map(|(i, r)| {
            let res = (|| {
                if max_voltage_latency(scenario, r)? > deadline.t_max {
                    return Ok(None);
                }
                match solve_rail_set(scenario, r, deadline, opts) {
                    Ok(s) => Ok(Some(s)),
                    Err(Error::Infeasible { .. }) => Ok(None),
                    Err(e) => Err(e),
                }
            })();
            (i, res)
        })
        .collect();
    let mut best: Option<(usize, Schedule)> = None;
    for (i, res) in results {
        let Some(s) = res? else { continue };
        let key = |s: &Schedule, i: usize| (s.rank(), candidates[i].len(), candidates[i].clone());
        if best.as_ref().is_none_or(|(bi, bs)| key(&s, i) < key(bs, *bi)) {
            best = Some((i, s));
        }
    }
    match best {
        Some((i, s)) => Ok((candidates[i].clone(), s)),
        None => {
            let top = RailSet::new(vec![scenario.model.menu.max()])?;
            Err(Error::NoFeasibleRailSet {
                min_latency: max_voltage_latency(scenario, &top)?,
                t_max: deadline.t_max,
            })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DutyModel, TransitionModel, CostModel};
    use crate::solver::testutil::small_scenario;

    fn mv(r: &RailSet) -> Vec<u32> {
        r.rails().iter().map(|v| v.millivolts()).collect()
    }

    #[test]
    fn subset_counts() {
        let menu = VoltageMenu::default();
        assert_eq!(menu.len(), 9);
        assert_eq!(enumerate_rail_sets(&menu, 3).len(), 129);
        assert_eq!(enumerate_rail_sets(&menu, 1).len(), 9);
        assert_eq!(enumerate_rail_sets(&menu, 9).len(), 511);
        let sets = enumerate_rail_sets(&menu, 2);
        assert_eq!(mv(&sets[0]), vec![900]);
        assert_eq!(mv(&sets[9]), vec![900, 950]);
        assert_eq!(mv(&sets[44]), vec![1250, 1300]);
        let mut dedup = sets.clone();
        dedup.sort();
        dedup.dedup();
        assert_eq!(dedup.len(), sets.len());
    }

    #[test]
    fn evenly_spaced_examples() {
        let menu = VoltageMenu::default();
        assert_eq!(mv(&evenly_spaced_rails(&menu, 3).unwrap()), vec![900, 1100, 1300]);
        assert_eq!(mv(&evenly_spaced_rails(&menu, 1).unwrap()), vec![1300]);
        assert_eq!(evenly_spaced_rails(&menu, 9).unwrap().rails(), menu.levels());
        // 8 * 1/3 = 2.67 -> 3, 8 * 2/3 = 5.33 -> 5
        assert_eq!(mv(&evenly_spaced_rails(&menu, 4).unwrap()), vec![900, 1050, 1150, 1300]);
        assert!(evenly_spaced_rails(&menu, 10).is_err());
    }

    #[test]
    fn optimized_is_monotone_and_beats_even_spacing() {
        let mut s = small_scenario(4, 2_000_000);
        s.model = CostModel::new(VoltageMenu::default(), TransitionModel::default(), 2);
        let top = RailSet::new(vec![s.model.menu.max()]).unwrap();
        let t_fast = max_voltage_latency(&s, &top).unwrap();
        let d = DeadlineSpec::from_t_max(t_fast * 13 / 10, 5_000, DutyModel::AlwaysActive).unwrap();
        let mut prev = u64::MAX;
        for n in 1..=3 {
            let (r, sch) = optimize_rails(&s, &d, n, SolveOptions::default()).unwrap();
            assert!(r.len() <= n);
            assert!(sch.e_tot <= prev);
            prev = sch.e_tot;
            let even = evenly_spaced_rails(&s.model.menu, n).unwrap();
            let e = solve_rail_set(&s, &even, &d, SolveOptions::default()).unwrap();
            assert!(sch.e_tot <= e.e_tot);
        }
        let tight = DeadlineSpec::from_t_max(t_fast - 1, 5_000, DutyModel::AlwaysActive).unwrap();
        assert!(matches!(
            optimize_rails(&s, &tight, 3, SolveOptions::default()),
            Err(Error::NoFeasibleRailSet { .. })
        ));
    }
}
