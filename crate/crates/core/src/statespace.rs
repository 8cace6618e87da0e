//! Per-layer candidate states and the layered state graph the solvers walk.

use num_bigint::BigUint;

use crate::error::Result;
use crate::model::{
    DomainKind, DomainSetting, Femtojoules, Picos, PowerState, RailSet, Scenario,
    plan_bank_gating,
};

/// Feasible operating points of one layer under a rail set.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct LayerCandidates {
    pub layer_id: u32,
    pub states: Vec<PowerState>,
}

impl LayerCandidates {
    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }
}

/// Cross product of the per-domain option lists, first domain varying slowest.
fn cartesian(options: &[Vec<DomainSetting>]) -> Vec<Vec<DomainSetting>> {
    let mut out = vec![Vec::with_capacity(options.len())];
    for opts in options {
        let mut next = Vec::with_capacity(out.len() * opts.len());
        for prefix in &out {
            for &o in opts {
                let mut v = prefix.clone();
                v.push(o);
                next.push(v);
            }
        }
        out = next;
    }
    out
}

/// All valid states of one layer under `rail_set`.
///
/// DVFS domains with work range over every rail; idle DVFS domains park on
/// the lowest rail. Gated-bank domains sit on the bank rail and, when the
/// break-even plan gates at least one window, also get a gated variant (a
/// whole-layer window becomes a fully gated bank). States are ordered
/// lexicographically by domain: ascending voltage, gated variants last.
pub fn enumerate_states(
    scenario: &Scenario,
    rail_set: &RailSet,
    layer_idx: usize,
) -> Result<LayerCandidates> {
    let w = &scenario.workload;
    let layer = &w.layers[layer_idx];
    let bank_v = rail_set.bank_rail(w.v_nom);

    let dvfs_options: Vec<Vec<DomainSetting>> = w
        .domains
        .iter()
        .enumerate()
        .map(|(d, dom)| match dom.kind {
            DomainKind::Dvfs if layer.has_work(d) => {
                rail_set.rails().iter().map(|&v| DomainSetting::Rail(v)).collect()
            }
            DomainKind::Dvfs => vec![DomainSetting::Rail(rail_set.min())],
            DomainKind::GatedBank => vec![DomainSetting::Rail(bank_v)],
        })
        .collect();

    let mut states = Vec::new();
    for base in cartesian(&dvfs_options) {
        let base_cost = scenario.evaluate(layer_idx, &base)?;
        let mut options: Vec<Vec<DomainSetting>> = Vec::with_capacity(base.len());
        for (d, dom) in w.domains.iter().enumerate() {
            let mut opts = vec![base[d]];
            if dom.kind == DomainKind::GatedBank {
                let p = scenario.model.leak_power(d, dom, bank_v, w.v_nom)?;
                let plan = plan_bank_gating(layer, dom, p, base_cost.latency);
                if plan.whole_layer {
                    opts.push(DomainSetting::Gated);
                } else if !plan.is_empty() {
                    opts.push(DomainSetting::WindowGated(bank_v));
                }
            }
            options.push(opts);
        }
        for settings in cartesian(&options) {
            let cost = if settings == base {
                base_cost
            } else {
                scenario.evaluate(layer_idx, &settings)?
            };
            states.push(PowerState { settings, cost });
        }
    }
    states.sort_by(|a, b| {
        let ka = a.settings.iter().map(|s| s.order_key());
        let kb = b.settings.iter().map(|s| s.order_key());
        ka.cmp(kb)
    });
    Ok(LayerCandidates {
        layer_id: layer.layer_id,
        states,
    })
}

fn is_subset(small: &[u32], big: &[u32]) -> bool {
    small.iter().all(|v| big.binary_search(v).is_ok())
}

/// `b` dominates `a`: uses a subset of `a`'s voltages and is no worse in
/// energy, latency and leakage, strictly better in at least one.
pub fn dominates(b: &PowerState, a: &PowerState) -> bool {
    let (cb, ca) = (&b.cost, &a.cost);
    let no_worse = cb.energy <= ca.energy && cb.latency <= ca.latency && cb.leak_power <= ca.leak_power;
    let strict = cb.energy < ca.energy || cb.latency < ca.latency || cb.leak_power < ca.leak_power;
    if !(no_worse && strict) {
        return false;
    }
    let vb: Vec<u32> = b.voltage_set().iter().map(|v| v.millivolts()).collect();
    let va: Vec<u32> = a.voltage_set().iter().map(|v| v.millivolts()).collect();
    is_subset(&vb, &va)
}

/// Structure pruning: drop every state dominated by another state of the
/// same layer. Survivors keep their enumeration order.
pub fn structure_prune(candidates: &LayerCandidates) -> LayerCandidates {
    let sets: Vec<Vec<u32>> = candidates
        .states
        .iter()
        .map(|s| s.voltage_set().iter().map(|v| v.millivolts()).collect())
        .collect();
    let states = &candidates.states;
    let keep: Vec<PowerState> = states
        .iter()
        .enumerate()
        .filter(|&(i, a)| {
            !states.iter().enumerate().any(|(j, b)| {
                if i == j {
                    return false;
                }
                let (cb, ca) = (&b.cost, &a.cost);
                cb.energy <= ca.energy
                    && cb.latency <= ca.latency
                    && cb.leak_power <= ca.leak_power
                    && (cb.energy < ca.energy || cb.latency < ca.latency || cb.leak_power < ca.leak_power)
                    && is_subset(&sets[j], &sets[i])
            })
        })
        .map(|(_, s)| s.clone())
        .collect();
    LayerCandidates {
        layer_id: candidates.layer_id,
        states: keep,
    }
}

/// Cost of one edge between adjacent layers.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct EdgeCost {
    pub time: Picos,
    pub energy: Femtojoules,
}

const GATED_CODE: u8 = u8::MAX;

/// Compact per-domain transition data: switch energies indexed by menu
/// position, so edge costs need no voltage arithmetic.
#[derive(Clone, Debug)]
struct TransitionKernel {
    menu_len: usize,
    switch_latency: Picos,
    /// Per domain: `switch[a * menu_len + b]`.
    switch: Vec<Vec<Femtojoules>>,
    wake: Vec<(Picos, Femtojoules)>,
}

impl TransitionKernel {
    fn new(scenario: &Scenario) -> Self {
        let menu = scenario.model.menu.levels();
        let n = menu.len();
        let switch = scenario
            .workload
            .domains
            .iter()
            .map(|dom| {
                let mut t = vec![0; n * n];
                for (a, &va) in menu.iter().enumerate() {
                    for (b, &vb) in menu.iter().enumerate() {
                        t[a * n + b] = scenario.model.switch_energy(dom, va, vb);
                    }
                }
                t
            })
            .collect();
        let wake = scenario
            .workload
            .domains
            .iter()
            .map(|d| (d.wake_latency, d.wake_energy))
            .collect();
        TransitionKernel {
            menu_len: n,
            switch_latency: scenario.model.transition.dvfs_switch_latency,
            switch,
            wake,
        }
    }

    #[inline]
    fn cost(&self, a: &[u8], b: &[u8]) -> EdgeCost {
        let mut time = 0;
        let mut energy = 0;
        for (d, (&x, &y)) in a.iter().zip(b).enumerate() {
            if x == y {
                continue;
            }
            if y == GATED_CODE {
                continue;
            }
            if x == GATED_CODE {
                let (t, e) = self.wake[d];
                time = time.max(t);
                energy += e;
            } else {
                time = time.max(self.switch_latency);
                energy += self.switch[d][x as usize * self.menu_len + y as usize];
            }
        }
        EdgeCost { time, energy }
    }
}

/// Precompute edge tables up to this many edges in total.
const EDGE_TABLE_LIMIT: usize = 8 << 20;

/// Layers `1..=L` of candidate states with implicit complete bipartite edges
/// between consecutive layers. The terminal idle state is handled by the
/// solvers.
#[derive(Clone, Debug)]
pub struct LayeredStateGraph {
    pub rail_set: RailSet,
    pub layers: Vec<LayerCandidates>,
    codes: Vec<Vec<Vec<u8>>>,
    kernel: TransitionKernel,
    tables: Option<Vec<Vec<EdgeCost>>>,
}

impl LayeredStateGraph {
    /// Enumerate every layer (optionally structure-pruned) and index the edges.
    pub fn build(scenario: &Scenario, rail_set: &RailSet, prune: bool) -> Result<Self> {
        let layers = (0..scenario.num_layers())
            .map(|i| {
                let c = enumerate_states(scenario, rail_set, i)?;
                Ok(if prune { structure_prune(&c) } else { c })
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(LayeredStateGraph::from_layers(scenario, rail_set.clone(), layers))
    }

    /// Graph over explicitly supplied candidate lists.
    pub fn from_layers(scenario: &Scenario, rail_set: RailSet, layers: Vec<LayerCandidates>) -> Self {
        assert!(layers.iter().all(|l| !l.is_empty()), "every layer needs a candidate");
        let menu = &scenario.model.menu;
        let codes: Vec<Vec<Vec<u8>>> = layers
            .iter()
            .map(|l| {
                l.states
                    .iter()
                    .map(|s| {
                        s.settings
                            .iter()
                            .map(|st| match st.level() {
                                Some(v) => menu.index_of(v).expect("state voltage on menu") as u8,
                                None => GATED_CODE,
                            })
                            .collect()
                    })
                    .collect()
            })
            .collect();
        let kernel = TransitionKernel::new(scenario);
        let mut g = LayeredStateGraph {
            rail_set,
            layers,
            codes,
            kernel,
            tables: None,
        };
        if g.edge_count() <= EDGE_TABLE_LIMIT as u64 {
            let tables = (0..g.layers.len().saturating_sub(1))
                .map(|i| {
                    let mut t = Vec::with_capacity(g.layers[i].len() * g.layers[i + 1].len());
                    for a in &g.codes[i] {
                        for b in &g.codes[i + 1] {
                            t.push(g.kernel.cost(a, b));
                        }
                    }
                    t
                })
                .collect();
            g.tables = Some(tables);
        }
        g
    }

    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn state(&self, layer: usize, idx: usize) -> &PowerState {
        &self.layers[layer].states[idx]
    }

    /// `sum |S_i| * |S_{i+1}|` over consecutive layers.
    pub fn edge_count(&self) -> u64 {
        self.layers
            .windows(2)
            .map(|w| (w[0].len() * w[1].len()) as u64)
            .sum()
    }

    /// Candidate states plus source and terminal.
    pub fn node_count(&self) -> u64 {
        self.layers.iter().map(|l| l.len() as u64).sum::<u64>() + 2
    }

    pub fn state_count(&self) -> u64 {
        self.layers.iter().map(|l| l.len() as u64).sum()
    }

    /// Edge between state `a` of layer `layer` and state `b` of `layer + 1`.
    pub fn edge(&self, layer: usize, a: usize, b: usize) -> EdgeCost {
        match &self.tables {
            Some(t) => t[layer][a * self.layers[layer + 1].len() + b],
            None => self.kernel.cost(&self.codes[layer][a], &self.codes[layer + 1][b]),
        }
    }

    /// All edges leaving state `a` of `layer`, in successor order.
    pub fn edge_row<'a>(&'a self, layer: usize, a: usize, scratch: &'a mut Vec<EdgeCost>) -> &'a [EdgeCost] {
        let n = self.layers[layer + 1].len();
        match &self.tables {
            Some(t) => &t[layer][a * n..(a + 1) * n],
            None => {
                scratch.clear();
                let from = &self.codes[layer][a];
                scratch.extend(self.codes[layer + 1].iter().map(|b| self.kernel.cost(from, b)));
                scratch
            }
        }
    }
}

fn binomial(n: u64, k: u64) -> BigUint {
    let mut r = BigUint::from(1u32);
    for i in 0..k {
        r *= n - i;
        r /= i + 1;
    }
    r
}

/// Upper bound on the schedule space:
/// `sum_{k=1}^{n_max} C(|V|, k) * (k + 1)^(D * L)`.
pub fn schedule_space_bound(v_count: u64, n_max: u64, domains: u64, layers: u64) -> BigUint {
    let exp = u32::try_from(domains * layers).expect("exponent fits in u32");
    (1..=n_max.min(v_count))
        .map(|k| binomial(v_count, k) * BigUint::from(k + 1).pow(exp))
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{
        CostModel, DomainSpec, Fraction, IdleWindow, LayerProfile, TransitionModel, VoltageMenu,
        WorkloadProfile, VoltageLevel, PPM,
    };

    fn dvfs(id: u32) -> DomainSpec {
        DomainSpec {
            id,
            name: String::new(),
            kind: DomainKind::Dvfs,
            nominal_freq: 500_000,
            capacitance_scale: PPM,
            leak_power_nominal: 50_000,
            wake_energy: 0,
            wake_latency: 0,
        }
    }

    fn scenario(n_dvfs: usize, with_bank: bool) -> Scenario {
        let mut domains: Vec<DomainSpec> = (0..n_dvfs as u32).map(dvfs).collect();
        let mut windows = vec![];
        if with_bank {
            domains.push(DomainSpec {
                id: 9,
                name: "bank".into(),
                kind: DomainKind::GatedBank,
                nominal_freq: 0,
                capacitance_scale: PPM,
                leak_power_nominal: 200_000,
                wake_energy: 100,
                wake_latency: 5_000,
            });
            windows.push(IdleWindow {
                domain_id: 9,
                start_fraction: Fraction::from_ppm(500_000).unwrap(),
                end_fraction: Fraction::ONE,
            });
        }
        let n = domains.len();
        let mut cycles = vec![10_000; n];
        let mut dyn_e = vec![1_000_000; n];
        if with_bank {
            cycles[n - 1] = 0;
            dyn_e[n - 1] = 1000;
        }
        let layer = LayerProfile {
            layer_id: 1,
            kind: None,
            cycles: cycles.iter().enumerate().map(|(i, c)| c * (i as u64 + 1)).collect(),
            dynamic_energy_nominal: dyn_e,
            active_fraction: vec![Fraction::ONE; n],
            bank_idle_windows: windows,
        };
        let workload = WorkloadProfile {
            name: "t".into(),
            domains,
            layers: vec![layer],
            v_nom: VoltageLevel::from_millivolts(1200).unwrap(),
        };
        let model = CostModel::new(VoltageMenu::default(), TransitionModel::default(), n);
        Scenario::new(workload, model).unwrap()
    }

    #[test]
    fn enumeration_counts() {
        let r3 = RailSet::from_millivolts(&[900, 1100, 1300]).unwrap();
        assert_eq!(enumerate_states(&scenario(2, false), &r3, 0).unwrap().len(), 9);
        let r1 = RailSet::from_millivolts(&[1200]).unwrap();
        assert_eq!(enumerate_states(&scenario(1, false), &r1, 0).unwrap().len(), 1);
        let r2 = RailSet::from_millivolts(&[1000, 1200]).unwrap();
        assert_eq!(enumerate_states(&scenario(3, true), &r2, 0).unwrap().len(), 16);
    }

    #[test]
    fn enumeration_order_is_lexicographic() {
        let r2 = RailSet::from_millivolts(&[1000, 1200]).unwrap();
        let c = enumerate_states(&scenario(2, true), &r2, 0).unwrap();
        let keys: Vec<Vec<(u32, u8)>> = c
            .states
            .iter()
            .map(|s| s.settings.iter().map(|x| x.order_key()).collect())
            .collect();
        let mut sorted = keys.clone();
        sorted.sort();
        assert_eq!(keys, sorted);
        assert_eq!(c.states[1].settings[2], DomainSetting::WindowGated(VoltageLevel::from_millivolts(1200).unwrap()));
        let again = enumerate_states(&scenario(2, true), &r2, 0).unwrap();
        assert_eq!(c, again);
    }

    fn state(mvs: &[u32], latency: u64, energy: u64, leak: u64) -> PowerState {
        PowerState {
            settings: mvs
                .iter()
                .map(|&mv| DomainSetting::Rail(VoltageLevel::from_millivolts(mv).unwrap()))
                .collect(),
            cost: crate::model::StateCost {
                latency,
                energy,
                leak_power: leak,
                ..Default::default()
            },
        }
    }

    fn cands(states: Vec<PowerState>) -> LayerCandidates {
        LayerCandidates { layer_id: 1, states }
    }

    #[test]
    fn prune_examples() {
        // identical costs, identical sets: neither pruned
        let c = cands(vec![state(&[900, 900], 10, 10, 1), state(&[900, 900], 10, 10, 1)]);
        assert_eq!(structure_prune(&c).len(), 2);

        // {0.9} dominates {0.9, 1.2} at equal latency, lower energy
        let c = cands(vec![state(&[900, 1200], 10, 12, 1), state(&[900, 900], 10, 10, 1)]);
        let p = structure_prune(&c);
        assert_eq!(p.len(), 1);
        assert_eq!(p.states[0].cost.energy, 10);

        // incomparable
        let c = cands(vec![state(&[900, 900], 20, 5, 1), state(&[1200, 1200], 10, 10, 1)]);
        assert_eq!(structure_prune(&c).len(), 2);

        // cheaper but not a voltage subset: kept
        let c = cands(vec![state(&[900, 900], 10, 12, 1), state(&[1200, 1200], 10, 10, 1)]);
        assert_eq!(structure_prune(&c).len(), 2);
    }

    #[test]
    fn prune_is_idempotent_and_stable() {
        let r = RailSet::from_millivolts(&[900, 1000, 1100, 1300]).unwrap();
        let c = enumerate_states(&scenario(3, true), &r, 0).unwrap();
        let p = structure_prune(&c);
        assert!(p.len() <= c.len());
        assert_eq!(structure_prune(&p), p);
        // survivors appear in enumeration order
        let mut it = c.states.iter();
        for s in &p.states {
            assert!(it.any(|x| x == s));
        }
        for a in &p.states {
            assert!(!p.states.iter().any(|b| dominates(b, a)));
        }
    }

    #[test]
    fn graph_edges_match_transition_cost() {
        let r = RailSet::from_millivolts(&[900, 1050, 1300]).unwrap();
        let mut s = scenario(2, true);
        let l0 = s.workload.layers[0].clone();
        let mut l1 = l0.clone();
        l1.layer_id = 2;
        l1.bank_idle_windows[0].start_fraction = Fraction::ZERO;
        l1.cycles[2] = 0;
        l1.dynamic_energy_nominal[2] = 0;
        s.workload.layers = vec![l0.clone(), l1, l0];
        let g = LayeredStateGraph::build(&s, &r, false).unwrap();
        let mut scratch = vec![];
        for i in 0..2 {
            for a in 0..g.layers[i].len() {
                let row = g.edge_row(i, a, &mut scratch).to_vec();
                for b in 0..g.layers[i + 1].len() {
                    let (t, e) = s.transition(&g.state(i, a).settings, &g.state(i + 1, b).settings);
                    assert_eq!(row[b], EdgeCost { time: t, energy: e });
                    assert_eq!(g.edge(i, a, b), row[b]);
                }
            }
        }
        assert!(g.layers[1].states.iter().any(|st| st.settings[2] == DomainSetting::Gated));
    }

    #[test]
    fn bound_examples() {
        assert_eq!(schedule_space_bound(9, 1, 1, 1), BigUint::from(18u32));
        assert_eq!(schedule_space_bound(2, 2, 1, 2), BigUint::from(17u32));
    }
}
