//! Schedule solvers over the layered state graph: the fixed-λ DP, the
//! parametric λ search, the marginal-utility jump variant and the exact
//! Pareto-label oracle.

mod dp;
mod jump;
mod oracle;
mod search;

use std::fmt;

use serde::Serialize;

use crate::model::{
    DeadlineSpec, DomainSetting, DutyDecision, EXACT_PER_FJ, Femtojoules, Picos, PowerState,
    RailSet, Scenario, idle_energy, idle_energy_exact,
};
use crate::statespace::LayeredStateGraph;

pub use dp::{LambdaSolution, dp_fixed_lambda};
pub use jump::marginal_utility_jump_search;
pub use oracle::{DEFAULT_LABEL_CAP, OracleSolution, estimate_labels, exact_oracle, exact_oracle_with_cap};
pub use search::solve_lambda_search;

/// Denominator of the dyadic grid the λ search walks.
pub const LAMBDA_GRID: u64 = 1 << 24;

/// Lagrange multiplier in fJ per ps, kept as an exact ratio. A zero
/// denominator encodes λ = ∞ (pure latency minimisation).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize)]
pub struct Lambda {
    pub num: u64,
    pub den: u64,
}

impl Lambda {
    pub const ZERO: Lambda = Lambda { num: 0, den: 1 };
    pub const INFINITY: Lambda = Lambda { num: 1, den: 0 };

    pub fn new(num: u64, den: u64) -> Self {
        assert!(num > 0 || den > 0, "0/0 is not a multiplier");
        Lambda { num, den }
    }

    pub fn from_fj_per_ps(v: u64) -> Self {
        Lambda { num: v, den: 1 }
    }

    /// `k / LAMBDA_GRID`.
    pub fn grid(k: u64) -> Self {
        Lambda { num: k, den: LAMBDA_GRID }
    }

    pub fn is_infinite(self) -> bool {
        self.den == 0
    }

    pub fn as_f64(self) -> f64 {
        if self.is_infinite() {
            f64::INFINITY
        } else {
            self.num as f64 / self.den as f64
        }
    }
}

impl fmt::Display for Lambda {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_infinite() {
            write!(f, "inf")
        } else {
            write!(f, "{}/{}", self.num, self.den)
        }
    }
}

/// Energy and latency decomposition of a schedule.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize)]
pub struct Breakdown {
    pub t_op: Picos,
    pub t_trans: Picos,
    pub e_op: Femtojoules,
    pub e_trans: Femtojoules,
    pub e_idle: Femtojoules,
    pub e_dynamic: Femtojoules,
    pub e_static: Femtojoules,
    pub rail_switches: u32,
    pub wake_events: u32,
}

/// A complete per-layer assignment plus the terminal duty decision.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Schedule {
    pub rail_set: RailSet,
    pub states: Vec<PowerState>,
    /// Incoming transition (latency, energy) per layer; the first is zero.
    pub transitions: Vec<(Picos, Femtojoules)>,
    pub duty: DutyDecision,
    pub t_max: Picos,
    pub t_infer: Picos,
    pub e_tot: Femtojoules,
    pub breakdown: Breakdown,
    /// Exact objective in 1e-6 fJ; `None` when infeasible.
    pub exact_energy: Option<i128>,
    /// Indices into the graph's candidate lists, when built from a graph.
    pub path: Vec<usize>,
}

impl Schedule {
    /// Cost out `states` with the given incoming transitions. The duty
    /// decision is the cheapest feasible one unless `duty` pins it.
    pub fn from_parts(
        rail_set: RailSet,
        states: Vec<PowerState>,
        transitions: Vec<(Picos, Femtojoules)>,
        deadline: &DeadlineSpec,
        duty: Option<DutyDecision>,
        path: Vec<usize>,
    ) -> Schedule {
        assert_eq!(states.len(), transitions.len());
        let mut b = Breakdown::default();
        for (s, &(t, e)) in states.iter().zip(&transitions) {
            b.t_op += s.latency();
            b.e_op += s.energy();
            b.e_dynamic += s.cost.dynamic_energy;
            b.e_static += s.cost.static_energy;
            b.wake_events += s.cost.wake_events;
            b.t_trans += t;
            b.e_trans += e;
        }
        for w in states.windows(2) {
            for (a, c) in w[0].settings.iter().zip(&w[1].settings) {
                match (a.level(), c.level()) {
                    (Some(x), Some(y)) if x != y => b.rail_switches += 1,
                    (None, Some(_)) => b.wake_events += 1,
                    _ => {}
                }
            }
        }
        let t_infer = b.t_op + b.t_trans;
        let body = EXACT_PER_FJ * i128::from(b.e_op + b.e_trans);
        let options: Vec<DutyDecision> = match duty {
            Some(z) => vec![z],
            None => deadline.duty_options().to_vec(),
        };
        let best = options
            .iter()
            .filter_map(|&z| idle_energy_exact(deadline, t_infer, z).map(|x| (body + x, z)))
            .min_by_key(|&(x, z)| (x, std::cmp::Reverse(z.z())));
        let (exact_energy, z) = match best {
            Some((x, z)) => (Some(x), z),
            None => (None, options[0]),
        };
        b.e_idle = match exact_energy {
            Some(_) => idle_energy(deadline, t_infer, z).expect("feasible duty option"),
            None => 0,
        };
        Schedule {
            rail_set,
            states,
            transitions,
            duty: z,
            t_max: deadline.t_max,
            t_infer,
            e_tot: b.e_op + b.e_trans + b.e_idle,
            breakdown: b,
            exact_energy,
            path,
        }
    }

    /// Cost out a path through `graph`.
    pub fn from_graph(graph: &LayeredStateGraph, path: &[usize], deadline: &DeadlineSpec) -> Schedule {
        let states: Vec<PowerState> = path
            .iter()
            .enumerate()
            .map(|(i, &s)| graph.state(i, s).clone())
            .collect();
        let transitions = (0..path.len())
            .map(|i| {
                if i == 0 {
                    (0, 0)
                } else {
                    let e = graph.edge(i - 1, path[i - 1], path[i]);
                    (e.time, e.energy)
                }
            })
            .collect();
        Schedule::from_parts(graph.rail_set.clone(), states, transitions, deadline, None, path.to_vec())
    }

    /// Cost out explicit per-layer settings, evaluating every state and edge
    /// against the scenario.
    pub fn assemble(
        scenario: &Scenario,
        rail_set: RailSet,
        settings: Vec<Vec<DomainSetting>>,
        deadline: &DeadlineSpec,
        duty: Option<DutyDecision>,
    ) -> crate::Result<Schedule> {
        let states = settings
            .into_iter()
            .enumerate()
            .map(|(i, s)| scenario.state(i, s))
            .collect::<crate::Result<Vec<_>>>()?;
        let transitions = (0..states.len())
            .map(|i| {
                if i == 0 {
                    (0, 0)
                } else {
                    scenario.transition(&states[i - 1].settings, &states[i].settings)
                }
            })
            .collect();
        Ok(Schedule::from_parts(rail_set, states, transitions, deadline, duty, vec![]))
    }

    pub fn feasible(&self) -> bool {
        self.exact_energy.is_some()
    }

    pub fn slack(&self) -> Picos {
        self.t_max.saturating_sub(self.t_infer)
    }

    pub fn num_layers(&self) -> usize {
        self.states.len()
    }

    /// Sum of operating and transition energy, excluding the idle term.
    pub fn active_energy(&self) -> Femtojoules {
        self.breakdown.e_op + self.breakdown.e_trans
    }

    /// Ordering key among feasible schedules: exact energy, then latency.
    pub(crate) fn rank(&self) -> (i128, Picos) {
        (self.exact_energy.unwrap_or(i128::MAX), self.t_infer)
    }
}

/// Which λ search step produced a DP call.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SearchPhase {
    Initial,
    Probe,
    Jump,
    Bracket,
    Bisect,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct LambdaStep {
    pub phase: SearchPhase,
    pub lambda: Lambda,
    pub t_infer: Picos,
    pub feasible: bool,
}

/// Search statistics returned alongside a schedule.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize)]
pub struct SolveReport {
    pub dp_calls: u32,
    pub trajectory: Vec<LambdaStep>,
    pub chosen_lambda: Option<Lambda>,
    /// Weighted optimum at the chosen λ, for the Lagrangian bound.
    pub chosen_weighted: Option<i128>,
    pub jump_points: Vec<Lambda>,
    pub upgrades: u32,
    pub labels: u64,
}

impl SolveReport {
    fn record(&mut self, phase: SearchPhase, sol: &LambdaSolution) {
        self.dp_calls += 1;
        self.trajectory.push(LambdaStep {
            phase,
            lambda: sol.lambda,
            t_infer: sol.schedule.t_infer,
            feasible: sol.schedule.feasible(),
        });
    }
}

/// Keep the better of two feasible candidates.
fn keep_best(best: &mut Option<(Schedule, Lambda, i128)>, sol: &LambdaSolution) {
    if !sol.schedule.feasible() {
        return;
    }
    let better = match best {
        None => true,
        Some((b, _, _)) => sol.schedule.rank() < b.rank(),
    };
    if better {
        *best = Some((sol.schedule.clone(), sol.lambda, sol.weighted.0));
    }
}
