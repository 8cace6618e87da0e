//! Sweeps and reports behind the subcommands. Everything here is
//! deterministic; timing lives in the command layer.

use std::fmt;
use std::str::FromStr;

use rayon::prelude::*;
use serde::Serialize;

use crate::baselines::{baseline_gating, baseline_greedy_dvfs, baseline_nominal};
use crate::error::{Error, Result};
use crate::model::{DeadlineSpec, DomainSetting, Femtojoules, Picos, RailSet, Rate, Scenario};
use crate::railopt::{SolveOptions, evenly_spaced_rails, optimize_rails, solve_rail_set};
use crate::solver::{Lambda, Schedule, dp_fixed_lambda, exact_oracle, marginal_utility_jump_search, solve_lambda_search};
use crate::statespace::{LayeredStateGraph, enumerate_states};
use crate::workload::{GeneratorConfig, generate_random_instance};

/// Comparison policy for rate sweeps.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Policy {
    Nominal,
    Gating,
    Greedy,
    GreedyGating,
    Orchestrated,
}

impl Policy {
    pub const ALL: [Policy; 5] = [
        Policy::Nominal,
        Policy::Gating,
        Policy::Greedy,
        Policy::GreedyGating,
        Policy::Orchestrated,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Policy::Nominal => "nominal",
            Policy::Gating => "gating",
            Policy::Greedy => "greedy",
            Policy::GreedyGating => "greedy+gating",
            Policy::Orchestrated => "orchestrated",
        }
    }
}

impl fmt::Display for Policy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Policy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Policy::ALL.into_iter().find(|p| p.name() == s).ok_or_else(|| {
            Error::validation(format!(
                "unknown policy {s:?}; expected one of {}",
                Policy::ALL.map(Policy::name).join(", ")
            ))
        })
    }
}

/// Schedule for one policy. `n_max` and `opts` only affect the orchestrated
/// policy.
pub fn run_policy(
    scenario: &Scenario,
    deadline: &DeadlineSpec,
    policy: Policy,
    n_max: usize,
    opts: SolveOptions,
) -> Result<Schedule> {
    match policy {
        Policy::Nominal => baseline_nominal(scenario, deadline),
        Policy::Gating => baseline_gating(scenario, deadline),
        Policy::Greedy => baseline_greedy_dvfs(scenario, deadline, false),
        Policy::GreedyGating => baseline_greedy_dvfs(scenario, deadline, true),
        Policy::Orchestrated => optimize_rails(scenario, deadline, n_max, opts).map(|(_, s)| s),
    }
}

/// Latency of the all-nominal schedule; its reciprocal is the highest rate
/// every policy can meet.
pub fn nominal_latency(scenario: &Scenario) -> Result<Picos> {
    let v = DomainSetting::Rail(scenario.workload.v_nom);
    let settings = vec![vec![v; scenario.workload.domains.len()]; scenario.num_layers()];
    let rails = RailSet::new(vec![scenario.workload.v_nom])?;
    let probe = DeadlineSpec::from_t_max(u64::MAX / 4, 0, Default::default())?;
    Ok(Schedule::assemble(scenario, rails, settings, &probe, None)?.t_infer)
}

/// Highest rate the nominal schedule meets, as the exact rational
/// `1e12 / T_nominal`.
pub fn max_nominal_rate(scenario: &Scenario) -> Result<Rate> {
    Rate::new(1_000_000_000_000, nominal_latency(scenario)?)
}

/// Fastest and slowest single-pass latencies of a graph: the λ = ∞ and λ = 0
/// paths of the fixed-λ DP.
pub fn latency_range(graph: &LayeredStateGraph, deadline: &DeadlineSpec) -> (Picos, Picos) {
    let fast = dp_fixed_lambda(graph, Lambda::INFINITY, deadline).schedule.t_infer;
    let slow = dp_fixed_lambda(graph, Lambda::ZERO, deadline).schedule.t_infer;
    (fast, slow.max(fast))
}

/// `fast + (slow - fast) * frac_ppm / 1e6`.
pub fn interpolate_deadline(fast: Picos, slow: Picos, frac_ppm: u64) -> Picos {
    fast + ((u128::from(slow - fast) * u128::from(frac_ppm)) / 1_000_000) as u64
}

fn rails_label(r: &RailSet) -> String {
    r.rails().iter().map(|v| v.millivolts().to_string()).collect::<Vec<_>>().join(" ")
}

/// Decimal rendering of `num / den` with `digits` fractional digits,
/// truncated toward zero.
pub fn fixed_point(num: i128, den: i128, digits: u32) -> String {
    assert!(den > 0);
    let scale = 10i128.pow(digits);
    let v = num * scale / den;
    let sign = if v < 0 { "-" } else { "" };
    let v = v.abs();
    if digits == 0 {
        return format!("{sign}{v}");
    }
    format!("{sign}{}.{:0width$}", v / scale, v % scale, width = digits as usize)
}

/// Parse a non-negative decimal and scale it by `10^digits` exactly, e.g.
/// nanojoules to femtojoules with `digits = 6`.
pub fn parse_scaled(s: &str, digits: u32, what: &str) -> Result<u64> {
    let bad = || Error::Parse {
        context: what.into(),
        message: format!("expected a non-negative decimal with at most {digits} fractional digits, got {s:?}"),
    };
    let (int, frac) = s.trim().split_once('.').unwrap_or((s.trim(), ""));
    if (int.is_empty() && frac.is_empty())
        || frac.len() > digits as usize
        || !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit())
    {
        return Err(bad());
    }
    let int_v: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
    let frac_v: u64 = if frac.is_empty() {
        0
    } else {
        frac.parse::<u64>().map_err(|_| bad())? * 10u64.pow(digits - frac.len() as u32)
    };
    int_v
        .checked_mul(10u64.pow(digits))
        .and_then(|x| x.checked_add(frac_v))
        .ok_or_else(bad)
}

/// Energy and timing columns shared by the sweep rows. Empty when the point
/// is infeasible.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Outcome {
    pub status: &'static str,
    pub rail_set: String,
    pub e_tot: Option<Femtojoules>,
    pub t_infer: Option<Picos>,
    pub e_op: Option<Femtojoules>,
    pub e_trans: Option<Femtojoules>,
    pub e_idle: Option<Femtojoules>,
    pub e_dynamic: Option<Femtojoules>,
    pub e_static: Option<Femtojoules>,
    pub rail_switches: Option<u32>,
    pub wake_events: Option<u32>,
}

impl Outcome {
    const HEADER: [&'static str; 11] = [
        "status",
        "rail_set",
        "e_tot",
        "t_infer",
        "e_op",
        "e_trans",
        "e_idle",
        "e_dynamic",
        "e_static",
        "rail_switches",
        "wake_events",
    ];

    fn fields(&self) -> Vec<String> {
        fn opt<T: ToString>(v: Option<T>) -> String {
            v.map(|x| x.to_string()).unwrap_or_default()
        }
        vec![
            self.status.to_string(),
            self.rail_set.clone(),
            opt(self.e_tot),
            opt(self.t_infer),
            opt(self.e_op),
            opt(self.e_trans),
            opt(self.e_idle),
            opt(self.e_dynamic),
            opt(self.e_static),
            opt(self.rail_switches),
            opt(self.wake_events),
        ]
    }

    fn from_result(res: Result<Schedule>) -> Result<Outcome> {
        match res {
            Ok(s) => {
                let b = &s.breakdown;
                Ok(Outcome {
                    status: "ok",
                    rail_set: rails_label(&s.rail_set),
                    e_tot: Some(s.e_tot),
                    t_infer: Some(s.t_infer),
                    e_op: Some(b.e_op),
                    e_trans: Some(b.e_trans),
                    e_idle: Some(b.e_idle),
                    e_dynamic: Some(b.e_dynamic),
                    e_static: Some(b.e_static),
                    rail_switches: Some(b.rail_switches),
                    wake_events: Some(b.wake_events),
                })
            }
            Err(e) if is_infeasible(&e) => Ok(Outcome {
                status: "infeasible",
                ..Outcome::default()
            }),
            Err(e) => Err(e),
        }
    }
}

/// Errors that mean "no schedule meets this deadline".
pub fn is_infeasible(e: &Error) -> bool {
    matches!(
        e,
        Error::Infeasible { .. }
            | Error::InfeasibleAtNominal { .. }
            | Error::GreedyFailed { .. }
            | Error::NoFeasibleRailSet { .. }
            | Error::DeadlineViolated { .. }
    )
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RateRow {
    pub rate_fps: String,
    pub t_max: Picos,
    pub policy: &'static str,
    pub outcome: Outcome,
}

/// Rate label with three decimals; exact rates keep their own notation.
fn rate_label(r: Rate) -> String {
    if r.den == 1 || 1_000_000_000 % r.den == 0 {
        r.to_string()
    } else {
        fixed_point(i128::from(r.num), i128::from(r.den), 3)
    }
}

/// One row per (rate, policy), rates in the given order and policies in
/// [`Policy::ALL`] order.
pub fn sweep_rate(
    scenario: &Scenario,
    deadlines: &[DeadlineSpec],
    policies: &[Policy],
    n_max: usize,
    opts: SolveOptions,
) -> Result<Vec<RateRow>> {
    let mut policies = policies.to_vec();
    policies.sort();
    policies.dedup();
    let points: Vec<(usize, Policy)> = (0..deadlines.len())
        .flat_map(|i| policies.iter().map(move |&p| (i, p)))
        .collect();
    let mut rows: Vec<(usize, Policy, Result<RateRow>)> = points
        .par_iter()
        .map(|&(i, p)| {
            let d = &deadlines[i];
            let row = Outcome::from_result(run_policy(scenario, d, p, n_max, opts)).map(|outcome| RateRow {
                rate_fps: d.target_rate.map_or_else(
                    || fixed_point(1_000_000_000_000, i128::from(d.t_max), 3),
                    rate_label,
                ),
                t_max: d.t_max,
                policy: p.name(),
                outcome,
            });
            (i, p, row)
        })
        .collect();
    rows.sort_by_key(|(i, p, _)| (*i, *p));
    rows.into_iter().map(|(_, _, r)| r).collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord)]
pub enum RailMode {
    Evenly,
    Optimized,
}

impl RailMode {
    pub fn name(self) -> &'static str {
        match self {
            RailMode::Evenly => "evenly",
            RailMode::Optimized => "optimized",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RailRow {
    pub mode: &'static str,
    pub n_rails: usize,
    pub outcome: Outcome,
}

/// Orchestrated energy against the number of rails, for evenly spaced and
/// optimized rail sets.
pub fn sweep_rails(
    scenario: &Scenario,
    deadline: &DeadlineSpec,
    counts: &[usize],
    modes: &[RailMode],
    opts: SolveOptions,
) -> Result<Vec<RailRow>> {
    let mut points: Vec<(RailMode, usize)> = modes
        .iter()
        .flat_map(|&m| counts.iter().map(move |&n| (m, n)))
        .collect();
    points.sort();
    points.dedup();
    points
        .par_iter()
        .map(|&(mode, n)| {
            let res = match mode {
                RailMode::Evenly => evenly_spaced_rails(&scenario.model.menu, n)
                    .and_then(|r| solve_rail_set(scenario, &r, deadline, opts)),
                RailMode::Optimized => optimize_rails(scenario, deadline, n, opts).map(|(_, s)| s),
            };
            Ok(RailRow {
                mode: mode.name(),
                n_rails: n,
                outcome: Outcome::from_result(res)?,
            })
        })
        .collect()
}

/// `points_per_decade` log-spaced energies from 0.1 nJ to 1 µJ, in fJ.
pub fn transition_energy_grid(points_per_decade: u32) -> Vec<Femtojoules> {
    let ppd = points_per_decade.max(1);
    (0..=4 * ppd)
        .map(|k| (1e5 * 10f64.powf(f64::from(k) / f64::from(ppd))).round() as u64)
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TransitionRow {
    pub transition_energy_nj: String,
    /// Transition share of the total energy, ppm.
    pub e_trans_share_ppm: Option<u64>,
    pub outcome: Outcome,
}

/// Orchestrated schedules as the full-swing switch energy is scaled.
pub fn sweep_transition(
    scenario: &Scenario,
    deadline: &DeadlineSpec,
    energies: &[Femtojoules],
    n_max: usize,
    opts: SolveOptions,
) -> Result<Vec<TransitionRow>> {
    energies
        .par_iter()
        .map(|&e| {
            let s = scenario.with_switch_energy(e);
            let outcome = Outcome::from_result(optimize_rails(&s, deadline, n_max, opts).map(|(_, s)| s))?;
            let share = match (outcome.e_trans, outcome.e_tot) {
                (Some(t), Some(tot)) if tot > 0 => Some((u128::from(t) * 1_000_000 / u128::from(tot)) as u64),
                (Some(_), Some(_)) => Some(0),
                _ => None,
            };
            Ok(TransitionRow {
                transition_energy_nj: fixed_point(i128::from(e), 1_000_000, 6),
                e_trans_share_ppm: share,
                outcome,
            })
        })
        .collect()
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct UtilityRow {
    pub rank: usize,
    pub layer_id: u32,
    pub kind: String,
    /// Best energy saved per picosecond added, over the layer's slower
    /// states relative to its all-nominal state (fJ/ps).
    pub marginal_utility: String,
    pub e_nominal: Femtojoules,
    /// Scheduled operating energy plus the energy of the transition into
    /// the layer.
    pub e_scheduled: Femtojoules,
    pub e_reduction: i64,
    /// Running share of the total reduction, ppm; empty when the total is
    /// not positive.
    pub cumulative_share_ppm: Option<i64>,
}

/// Layers ranked by local marginal utility, with the per-layer reduction
/// achieved by `schedule` against the all-nominal operating point.
pub fn marginal_utility_table(scenario: &Scenario, schedule: &Schedule) -> Result<Vec<UtilityRow>> {
    let full = RailSet::new(scenario.model.menu.levels().to_vec())?;
    let nominal = vec![DomainSetting::Rail(scenario.workload.v_nom); scenario.workload.domains.len()];
    let mut rows = Vec::with_capacity(scenario.num_layers());
    // (numerator, denominator) of the utility, compared as rationals
    let mut keys = Vec::with_capacity(scenario.num_layers());
    for i in 0..scenario.num_layers() {
        let nom = scenario.evaluate(i, &nominal)?;
        let mut best = (0u128, 1u128);
        for s in enumerate_states(scenario, &full, i)?.states {
            if s.latency() > nom.latency && s.energy() < nom.energy {
                let cand = (u128::from(nom.energy - s.energy()), u128::from(s.latency() - nom.latency));
                if cand.0 * best.1 > best.0 * cand.1 {
                    best = cand;
                }
            }
        }
        let layer = &scenario.workload.layers[i];
        let scheduled = schedule.states[i].energy() + schedule.transitions[i].1;
        keys.push(best);
        rows.push(UtilityRow {
            rank: 0,
            layer_id: layer.layer_id,
            kind: layer.kind.clone().unwrap_or_default(),
            marginal_utility: fixed_point(best.0 as i128, best.1 as i128, 6),
            e_nominal: nom.energy,
            e_scheduled: scheduled,
            e_reduction: nom.energy as i64 - scheduled as i64,
            cumulative_share_ppm: None,
        });
    }
    let mut order: Vec<usize> = (0..rows.len()).collect();
    order.sort_by(|&a, &b| {
        let (ka, kb) = (keys[a], keys[b]);
        (kb.0 * ka.1).cmp(&(ka.0 * kb.1)).then(rows[a].layer_id.cmp(&rows[b].layer_id))
    });
    let total: i64 = rows.iter().map(|r| r.e_reduction).sum();
    let mut cum = 0i64;
    Ok(order
        .into_iter()
        .enumerate()
        .map(|(rank, i)| {
            let mut r = rows[i].clone();
            cum += r.e_reduction;
            r.rank = rank + 1;
            r.cumulative_share_ppm = (total > 0).then(|| (i128::from(cum) * 1_000_000 / i128::from(total)) as i64);
            r
        })
        .collect())
}

/// Random instance family used by `validate`: two DVFS domains and one
/// gated bank over a three-level menu, at most 18 states per layer.
pub fn validation_config(layers: usize, trap_rate: u32) -> GeneratorConfig {
    GeneratorConfig {
        layers,
        dvfs_domains: 2,
        gated_banks: 1,
        menu_levels: 3,
        trap_rate,
        ..GeneratorConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct ValidationRow {
    pub seed: u64,
    pub layers: usize,
    pub max_states: usize,
    pub t_max: Picos,
    pub oracle_e: Femtojoules,
    pub lambda_e: Femtojoules,
    pub lambda_gap_ppm: u64,
    pub jump_e: Femtojoules,
    pub jump_gap_ppm: u64,
    pub pruned_oracle_e: Femtojoules,
    pub prune_lossless: bool,
}

/// Compare the heuristics and pruning against the exact oracle on one
/// generated instance. The deadline sits `frac_ppm` of the way from the
/// fastest to the slowest schedule over the full menu.
pub fn validation_row(seed: u64, cfg: &GeneratorConfig, frac_ppm: u64) -> Result<ValidationRow> {
    let doc = generate_random_instance(seed, cfg);
    let scenario = doc.scenario()?;
    let rails = RailSet::new(scenario.model.menu.levels().to_vec())?;
    let full = LayeredStateGraph::build(&scenario, &rails, false)?;
    let pruned = LayeredStateGraph::build(&scenario, &rails, true)?;
    let probe = doc.deadline_for_t_max(u64::MAX / 4)?;
    let (fast, slow) = latency_range(&full, &probe);
    let deadline = doc.deadline_for_t_max(interpolate_deadline(fast, slow, frac_ppm))?;
    let oracle = exact_oracle(&full, &deadline)?.schedule;
    let pruned_oracle = exact_oracle(&pruned, &deadline)?.schedule;
    let lambda = solve_lambda_search(&pruned, &deadline)?.0;
    let jump = marginal_utility_jump_search(&pruned, &deadline)?.0;
    let gap = |e: Femtojoules| (u128::from(e.saturating_sub(oracle.e_tot)) * 1_000_000 / u128::from(oracle.e_tot.max(1))) as u64;
    Ok(ValidationRow {
        seed,
        layers: cfg.layers,
        max_states: full.layers.iter().map(|l| l.len()).max().unwrap_or(0),
        t_max: deadline.t_max,
        oracle_e: oracle.e_tot,
        lambda_e: lambda.e_tot,
        lambda_gap_ppm: gap(lambda.e_tot),
        jump_e: jump.e_tot,
        jump_gap_ppm: gap(jump.e_tot),
        pruned_oracle_e: pruned_oracle.e_tot,
        prune_lossless: pruned_oracle.e_tot == oracle.e_tot,
    })
}

/// Row type with an outcome block, written column by column.
pub trait SweepRow {
    fn leading_header() -> Vec<&'static str>;
    fn leading_fields(&self) -> Vec<String>;
    fn outcome(&self) -> &Outcome;
}

impl SweepRow for RateRow {
    fn leading_header() -> Vec<&'static str> {
        vec!["rate_fps", "t_max", "policy"]
    }
    fn leading_fields(&self) -> Vec<String> {
        vec![self.rate_fps.clone(), self.t_max.to_string(), self.policy.to_string()]
    }
    fn outcome(&self) -> &Outcome {
        &self.outcome
    }
}

impl SweepRow for RailRow {
    fn leading_header() -> Vec<&'static str> {
        vec!["mode", "n_rails"]
    }
    fn leading_fields(&self) -> Vec<String> {
        vec![self.mode.to_string(), self.n_rails.to_string()]
    }
    fn outcome(&self) -> &Outcome {
        &self.outcome
    }
}

impl SweepRow for TransitionRow {
    fn leading_header() -> Vec<&'static str> {
        vec!["transition_energy_nj", "e_trans_share_ppm"]
    }
    fn leading_fields(&self) -> Vec<String> {
        vec![
            self.transition_energy_nj.clone(),
            self.e_trans_share_ppm.map(|x| x.to_string()).unwrap_or_default(),
        ]
    }
    fn outcome(&self) -> &Outcome {
        &self.outcome
    }
}

/// Sweep rows as CSV with a header line.
pub fn sweep_csv<T: SweepRow>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = T::leading_header();
    header.extend(Outcome::HEADER);
    w.write_record(&header)?;
    for r in rows {
        let mut f = r.leading_fields();
        f.extend(r.outcome().fields());
        w.write_record(&f)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

/// Serialize rows as CSV with a header line.
pub fn to_csv<T: Serialize>(rows: &[T]) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Io(e.into_error()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}
