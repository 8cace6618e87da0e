//! Domain types and the analytic latency / energy / transition model.
//!
//! Every public cost is an integer: latencies in picoseconds, energies in
//! femtojoules, powers in nanowatts, frequencies in kHz and voltages in mV.
//! A nanowatt held for a picosecond is 1e-6 fJ, so leakage energies are
//! `power * time / 1e6` rounded half-up.
//!
//! Scaling rules (all overridable per domain with a characterization table):
//!  - frequency is linear in voltage, `f = f_nom * V / V_nom` (floored),
//!  - dynamic energy is quadratic, `E = E_nom * (V / V_nom)^2` (half-up),
//!  - leakage power is linear, `P = P_nom * V / V_nom` (half-up).

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Picos = u64;
pub type Femtojoules = u64;
pub type Nanowatts = u64;

/// Parts-per-million denominator used by [`Fraction`] and scale factors.
pub const PPM: u64 = 1_000_000;

/// One femtojoule expressed in the exact solver energy unit (nW·ps).
pub const EXACT_PER_FJ: i128 = 1_000_000;

pub(crate) fn div_half_up(num: u128, den: u128) -> u128 {
    debug_assert!(den > 0);
    (2 * num + den) / (2 * den)
}

pub(crate) fn div_ceil(num: u128, den: u128) -> u128 {
    num.div_ceil(den)
}

/// `power * time / 1e6` rounded half-up: leakage energy in fJ.
pub fn leakage_energy(power: Nanowatts, time: Picos) -> Femtojoules {
    div_half_up(u128::from(power) * u128::from(time), u128::from(PPM)) as u64
}

/// A supply voltage in millivolts. Zero is reserved for the gated state and
/// never appears as a level.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct VoltageLevel(u32);

impl VoltageLevel {
    pub fn from_millivolts(mv: u32) -> Result<Self> {
        if mv == 0 {
            return Err(Error::validation("voltage 0 mV is reserved for the gated state"));
        }
        Ok(VoltageLevel(mv))
    }

    pub const fn millivolts(self) -> u32 {
        self.0
    }
}

impl TryFrom<u32> for VoltageLevel {
    type Error = Error;
    fn try_from(mv: u32) -> Result<Self> {
        VoltageLevel::from_millivolts(mv)
    }
}

impl From<VoltageLevel> for u32 {
    fn from(v: VoltageLevel) -> u32 {
        v.0
    }
}

impl fmt::Display for VoltageLevel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}mV", self.0)
    }
}

/// The discrete candidate voltage set, strictly ascending.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<VoltageLevel>", into = "Vec<VoltageLevel>")]
pub struct VoltageMenu {
    levels: Vec<VoltageLevel>,
}

impl VoltageMenu {
    pub fn new(levels: Vec<VoltageLevel>) -> Result<Self> {
        if levels.is_empty() {
            return Err(Error::validation("voltage menu must not be empty"));
        }
        if levels.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::validation("voltage menu must be sorted strictly ascending"));
        }
        if levels.len() > 64 {
            return Err(Error::validation("voltage menu supports at most 64 levels"));
        }
        Ok(VoltageMenu { levels })
    }

    /// `v_min + k * v_step` for every `k` with the level not above `v_max`.
    pub fn uniform(v_min: u32, v_max: u32, v_step: u32) -> Result<Self> {
        if v_min == 0 || v_step == 0 || v_max < v_min {
            return Err(Error::validation("uniform menu needs 0 < v_min <= v_max and v_step > 0"));
        }
        let levels = (0..)
            .map(|k| v_min + k * v_step)
            .take_while(|&mv| mv <= v_max)
            .map(VoltageLevel)
            .collect();
        VoltageMenu::new(levels)
    }

    pub fn levels(&self) -> &[VoltageLevel] {
        &self.levels
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    pub fn min(&self) -> VoltageLevel {
        self.levels[0]
    }

    pub fn max(&self) -> VoltageLevel {
        *self.levels.last().expect("menu is non-empty")
    }

    pub fn index_of(&self, v: VoltageLevel) -> Option<usize> {
        self.levels.binary_search(&v).ok()
    }

    pub fn contains(&self, v: VoltageLevel) -> bool {
        self.index_of(v).is_some()
    }
}

impl Default for VoltageMenu {
    /// 0.9 V to 1.3 V in 50 mV steps.
    fn default() -> Self {
        VoltageMenu::uniform(900, 1300, 50).expect("default menu is valid")
    }
}

impl TryFrom<Vec<VoltageLevel>> for VoltageMenu {
    type Error = Error;
    fn try_from(levels: Vec<VoltageLevel>) -> Result<Self> {
        VoltageMenu::new(levels)
    }
}

impl From<VoltageMenu> for Vec<VoltageLevel> {
    fn from(menu: VoltageMenu) -> Self {
        menu.levels
    }
}

/// The subset of the menu wired up as supply rails.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<VoltageLevel>", into = "Vec<VoltageLevel>")]
pub struct RailSet {
    rails: Vec<VoltageLevel>,
}

impl RailSet {
    /// Sorts and checks distinctness. Menu membership and the rail-count limit
    /// are checked by [`RailSet::validate`].
    pub fn new(mut rails: Vec<VoltageLevel>) -> Result<Self> {
        if rails.is_empty() {
            return Err(Error::RailSet("at least one rail is required".into()));
        }
        rails.sort_unstable();
        if rails.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::RailSet("rails must be distinct".into()));
        }
        Ok(RailSet { rails })
    }

    pub fn from_millivolts(mvs: &[u32]) -> Result<Self> {
        let rails = mvs
            .iter()
            .map(|&mv| VoltageLevel::from_millivolts(mv))
            .collect::<Result<Vec<_>>>()?;
        RailSet::new(rails)
    }

    pub fn validate(&self, menu: &VoltageMenu, n_max: usize) -> Result<()> {
        if self.rails.len() > n_max {
            return Err(Error::RailSet(format!(
                "{} rails exceed the limit of {n_max}",
                self.rails.len()
            )));
        }
        if let Some(v) = self.rails.iter().find(|v| !menu.contains(**v)) {
            return Err(Error::RailSet(format!("{v} is not on the voltage menu")));
        }
        Ok(())
    }

    pub fn rails(&self) -> &[VoltageLevel] {
        &self.rails
    }

    pub fn len(&self) -> usize {
        self.rails.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rails.is_empty()
    }

    pub fn min(&self) -> VoltageLevel {
        self.rails[0]
    }

    pub fn max(&self) -> VoltageLevel {
        *self.rails.last().expect("rail set is non-empty")
    }

    pub fn contains(&self, v: VoltageLevel) -> bool {
        self.rails.binary_search(&v).is_ok()
    }

    /// Supply used by gated-bank domains: the lowest rail at or above the
    /// nominal voltage, or the highest rail when every rail is below nominal.
    pub fn bank_rail(&self, v_nom: VoltageLevel) -> VoltageLevel {
        self.rails
            .iter()
            .copied()
            .find(|&v| v >= v_nom)
            .unwrap_or_else(|| self.max())
    }
}

impl TryFrom<Vec<VoltageLevel>> for RailSet {
    type Error = Error;
    fn try_from(rails: Vec<VoltageLevel>) -> Result<Self> {
        RailSet::new(rails)
    }
}

impl From<RailSet> for Vec<VoltageLevel> {
    fn from(set: RailSet) -> Self {
        set.rails
    }
}

impl fmt::Display for RailSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.rails.iter().map(|v| v.0.to_string()).collect();
        write!(f, "{{{}}}", parts.join(","))
    }
}

/// A fraction in `[0, 1]` stored as parts per million.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(try_from = "u32", into = "u32")]
pub struct Fraction(u32);

impl Fraction {
    pub const ZERO: Fraction = Fraction(0);
    pub const ONE: Fraction = Fraction(PPM as u32);

    pub fn from_ppm(ppm: u32) -> Result<Self> {
        if u64::from(ppm) > PPM {
            return Err(Error::validation(format!("fraction {ppm} ppm exceeds 1")));
        }
        Ok(Fraction(ppm))
    }

    pub const fn ppm(self) -> u32 {
        self.0
    }

    pub fn is_zero(self) -> bool {
        self.0 == 0
    }
}

impl TryFrom<u32> for Fraction {
    type Error = Error;
    fn try_from(ppm: u32) -> Result<Self> {
        Fraction::from_ppm(ppm)
    }
}

impl From<Fraction> for u32 {
    fn from(f: Fraction) -> u32 {
        f.0
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DomainKind {
    Dvfs,
    GatedBank,
}

/// A power-managed unit of the accelerator.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainSpec {
    pub id: u32,
    #[serde(default)]
    pub name: String,
    pub kind: DomainKind,
    /// kHz at the nominal voltage.
    pub nominal_freq: u64,
    /// Weight on the switch energy, parts per million (1_000_000 = 1.0).
    pub capacitance_scale: u64,
    /// nW at the nominal voltage.
    pub leak_power_nominal: Nanowatts,
    /// fJ per wake from the gated state.
    #[serde(default)]
    pub wake_energy: Femtojoules,
    /// ps per wake from the gated state.
    #[serde(default)]
    pub wake_latency: Picos,
}

/// An idle interval of a gated-bank domain, as fractions of the layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdleWindow {
    pub domain_id: u32,
    pub start_fraction: Fraction,
    pub end_fraction: Fraction,
}

impl IdleWindow {
    pub fn width(&self) -> u32 {
        self.end_fraction.0 - self.start_fraction.0
    }

    pub fn is_whole_layer(&self) -> bool {
        self.start_fraction == Fraction::ZERO && self.end_fraction == Fraction::ONE
    }
}

/// Per-layer characteristics. The per-domain vectors are indexed by the
/// position of the domain in [`WorkloadProfile::domains`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LayerProfile {
    pub layer_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kind: Option<String>,
    pub cycles: Vec<u64>,
    pub dynamic_energy_nominal: Vec<Femtojoules>,
    pub active_fraction: Vec<Fraction>,
    #[serde(default)]
    pub bank_idle_windows: Vec<IdleWindow>,
}

impl LayerProfile {
    /// Whether domain `d` has work in this layer.
    pub fn has_work(&self, d: usize) -> bool {
        self.cycles[d] > 0 || !self.active_fraction[d].is_zero()
    }

    pub fn windows_for(&self, domain_id: u32) -> impl Iterator<Item = &IdleWindow> {
        self.bank_idle_windows
            .iter()
            .filter(move |w| w.domain_id == domain_id)
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct WorkloadProfile {
    pub name: String,
    pub domains: Vec<DomainSpec>,
    pub layers: Vec<LayerProfile>,
    pub v_nom: VoltageLevel,
}

impl WorkloadProfile {
    pub fn num_layers(&self) -> usize {
        self.layers.len()
    }

    pub fn domain_index(&self, id: u32) -> Option<usize> {
        self.domains.iter().position(|d| d.id == id)
    }

    /// Structural invariants: at least one layer, consistent per-domain
    /// vectors, known domain references and well-formed idle windows.
    pub fn validate(&self) -> Result<()> {
        if self.layers.is_empty() {
            return Err(Error::validation("workload must have at least one layer (L >= 1)"));
        }
        if self.domains.is_empty() {
            return Err(Error::validation("workload must declare at least one domain"));
        }
        if self.domains.len() > 16 {
            return Err(Error::validation("at most 16 domains are supported"));
        }
        for (i, d) in self.domains.iter().enumerate() {
            if self.domains[..i].iter().any(|o| o.id == d.id) {
                return Err(Error::validation(format!("duplicate domain id {}", d.id)));
            }
            if d.kind == DomainKind::Dvfs && d.nominal_freq == 0 {
                return Err(Error::validation(format!(
                    "dvfs domain {} needs nominal_freq > 0",
                    d.id
                )));
            }
        }
        let n = self.domains.len();
        for (i, layer) in self.layers.iter().enumerate() {
            let ctx = format!("layer {} (index {i})", layer.layer_id);
            if layer.cycles.len() != n
                || layer.dynamic_energy_nominal.len() != n
                || layer.active_fraction.len() != n
            {
                return Err(Error::validation(format!(
                    "{ctx}: per-domain vectors must have one entry per declared domain ({n})"
                )));
            }
            for (d, dom) in self.domains.iter().enumerate() {
                if layer.cycles[d] > 0 && dom.nominal_freq == 0 {
                    return Err(Error::validation(format!(
                        "{ctx}: domain {} has cycles but no clock",
                        dom.id
                    )));
                }
            }
            let mut spans: Vec<(u32, u32, u32)> = Vec::new();
            for w in &layer.bank_idle_windows {
                let Some(d) = self.domain_index(w.domain_id) else {
                    return Err(Error::validation(format!(
                        "{ctx}: idle window references undeclared domain {}",
                        w.domain_id
                    )));
                };
                if self.domains[d].kind != DomainKind::GatedBank {
                    return Err(Error::validation(format!(
                        "{ctx}: idle windows are only allowed on gated_bank domains (domain {})",
                        w.domain_id
                    )));
                }
                if w.start_fraction >= w.end_fraction {
                    return Err(Error::validation(format!(
                        "{ctx}: idle window must satisfy start_fraction < end_fraction"
                    )));
                }
                if w.is_whole_layer()
                    && (layer.cycles[d] > 0 || layer.dynamic_energy_nominal[d] > 0)
                {
                    return Err(Error::validation(format!(
                        "{ctx}: whole-layer idle window on domain {} requires zero cycles and zero dynamic energy",
                        w.domain_id
                    )));
                }
                spans.push((w.domain_id, w.start_fraction.0, w.end_fraction.0));
            }
            spans.sort_unstable();
            if spans
                .windows(2)
                .any(|p| p[0].0 == p[1].0 && p[1].1 < p[0].2)
            {
                return Err(Error::validation(format!(
                    "{ctx}: idle windows of one domain must not overlap"
                )));
            }
        }
        Ok(())
    }
}

/// Latency and energy charged when consecutive layers use different states.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TransitionModel {
    /// ps per rail switch, any swing.
    pub dvfs_switch_latency: Picos,
    /// Default wake latency given to gated-bank domains that do not set one.
    pub wake_latency: Picos,
    /// fJ for a full-swing (`V_max^2 - V_min^2`) switch at capacitance scale 1.
    pub base_switch_energy: Femtojoules,
}

impl Default for TransitionModel {
    fn default() -> Self {
        TransitionModel {
            dvfs_switch_latency: 15_000,
            wake_latency: 5_000,
            base_switch_energy: 1_000_000,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VfPoint {
    pub mv: u32,
    pub khz: u64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LeakPoint {
    pub mv: u32,
    pub nw: Nanowatts,
}

/// Measured characterization that replaces the first-order curves for one
/// domain. Tables must cover every menu level they are used at.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DomainOverride {
    pub domain_id: u32,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vf_table: Option<Vec<VfPoint>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub leak_table: Option<Vec<LeakPoint>>,
}

/// Everything besides the workload that the cost functions need.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct CostModel {
    pub menu: VoltageMenu,
    pub transition: TransitionModel,
    /// Indexed by domain position; `None` means first-order scaling.
    pub overrides: Vec<Option<DomainOverride>>,
}

impl CostModel {
    pub fn new(menu: VoltageMenu, transition: TransitionModel, domains: usize) -> Self {
        CostModel {
            menu,
            transition,
            overrides: vec![None; domains],
        }
    }

    /// Domain frequency at `v`, honoring a characterization table if present.
    pub fn frequency(
        &self,
        d: usize,
        domain: &DomainSpec,
        v: Option<VoltageLevel>,
        v_nom: VoltageLevel,
    ) -> Result<u64> {
        let Some(level) = v else {
            return Err(Error::GatedFrequency { domain: domain.id });
        };
        if let Some(table) = self.overrides.get(d).and_then(|o| o.as_ref()?.vf_table.as_ref()) {
            return table
                .iter()
                .find(|p| p.mv == level.0)
                .map(|p| p.khz)
                .ok_or_else(|| {
                    Error::validation(format!("vf_table of domain {} lacks {level}", domain.id))
                });
        }
        scale_frequency(domain, v, v_nom)
    }

    pub fn leak_power(
        &self,
        d: usize,
        domain: &DomainSpec,
        v: VoltageLevel,
        v_nom: VoltageLevel,
    ) -> Result<Nanowatts> {
        if let Some(table) = self.overrides.get(d).and_then(|o| o.as_ref()?.leak_table.as_ref()) {
            return table
                .iter()
                .find(|p| p.mv == v.0)
                .map(|p| p.nw)
                .ok_or_else(|| {
                    Error::validation(format!("leak_table of domain {} lacks {v}", domain.id))
                });
        }
        Ok(scale_leak_power(domain.leak_power_nominal, v, v_nom))
    }

    /// Energy of switching one domain between two rails.
    pub fn switch_energy(&self, domain: &DomainSpec, a: VoltageLevel, b: VoltageLevel) -> Femtojoules {
        if a == b {
            return 0;
        }
        let (lo, hi) = if a < b { (a, b) } else { (b, a) };
        let sq = |v: VoltageLevel| u128::from(v.0) * u128::from(v.0);
        let full = sq(self.menu.max()) - sq(self.menu.min());
        if full == 0 {
            return 0;
        }
        let num = u128::from(self.transition.base_switch_energy)
            * u128::from(domain.capacitance_scale)
            * (sq(hi) - sq(lo));
        div_half_up(num, full * u128::from(PPM)) as u64
    }
}

/// A workload paired with the cost model it is evaluated under.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Scenario {
    pub workload: WorkloadProfile,
    pub model: CostModel,
}

impl Scenario {
    pub fn new(workload: WorkloadProfile, model: CostModel) -> Result<Self> {
        workload.validate()?;
        if !model.menu.contains(workload.v_nom) {
            return Err(Error::validation(format!(
                "nominal voltage {} is not on the voltage menu",
                workload.v_nom
            )));
        }
        if model.overrides.len() != workload.domains.len() {
            return Err(Error::validation("override list must have one slot per domain"));
        }
        Ok(Scenario { workload, model })
    }

    pub fn num_layers(&self) -> usize {
        self.workload.layers.len()
    }

    pub fn evaluate(&self, layer_idx: usize, settings: &[DomainSetting]) -> Result<StateCost> {
        evaluate_state(&self.workload, &self.model, layer_idx, settings)
    }

    pub fn state(&self, layer_idx: usize, settings: Vec<DomainSetting>) -> Result<PowerState> {
        make_state(&self.workload, &self.model, layer_idx, settings)
    }

    pub fn transition(&self, prev: &[DomainSetting], next: &[DomainSetting]) -> (Picos, Femtojoules) {
        transition_cost(prev, next, &self.workload.domains, &self.model)
    }

    /// Copy with a different full-swing switch energy.
    pub fn with_switch_energy(&self, base_switch_energy: Femtojoules) -> Scenario {
        let mut s = self.clone();
        s.model.transition.base_switch_energy = base_switch_energy;
        s
    }
}

/// First-order linear V-f scaling, floored to whole kHz.
pub fn scale_frequency(
    domain: &DomainSpec,
    v: Option<VoltageLevel>,
    v_nom: VoltageLevel,
) -> Result<u64> {
    let v = v.ok_or(Error::GatedFrequency { domain: domain.id })?;
    Ok((u128::from(domain.nominal_freq) * u128::from(v.0) / u128::from(v_nom.0)) as u64)
}

/// `e_nominal * (v / v_nom)^2`, rounded half-up.
pub fn scale_dynamic_energy(e_nominal: Femtojoules, v: VoltageLevel, v_nom: VoltageLevel) -> Femtojoules {
    let num = u128::from(e_nominal) * u128::from(v.0) * u128::from(v.0);
    let den = u128::from(v_nom.0) * u128::from(v_nom.0);
    div_half_up(num, den) as u64
}

/// `p_nominal * v / v_nom`, rounded half-up.
pub fn scale_leak_power(p_nominal: Nanowatts, v: VoltageLevel, v_nom: VoltageLevel) -> Nanowatts {
    div_half_up(u128::from(p_nominal) * u128::from(v.0), u128::from(v_nom.0)) as u64
}

/// Picoseconds to run `cycles` at `khz`, rounded up.
pub fn cycles_to_ps(cycles: u64, khz: u64) -> Option<Picos> {
    if cycles == 0 {
        return Some(0);
    }
    if khz == 0 {
        return None;
    }
    Some(div_ceil(u128::from(cycles) * 1_000_000_000, u128::from(khz)) as u64)
}

/// What one domain does during one layer.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "mode", content = "mv")]
pub enum DomainSetting {
    /// Powered on the given rail for the whole layer.
    Rail(VoltageLevel),
    /// Powered on the given rail, gated during the profitable idle windows.
    WindowGated(VoltageLevel),
    /// Off for the whole layer.
    Gated,
}

impl DomainSetting {
    pub fn level(self) -> Option<VoltageLevel> {
        match self {
            DomainSetting::Rail(v) | DomainSetting::WindowGated(v) => Some(v),
            DomainSetting::Gated => None,
        }
    }

    /// Sort key: ascending voltage, window-gated after plain, gated last.
    pub(crate) fn order_key(self) -> (u32, u8) {
        match self {
            DomainSetting::Rail(v) => (v.0, 0),
            DomainSetting::WindowGated(v) => (v.0, 1),
            DomainSetting::Gated => (u32::MAX, 2),
        }
    }
}

/// Derived cost of one (layer, assignment) pair.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash)]
pub struct StateCost {
    pub latency: Picos,
    pub energy: Femtojoules,
    pub dynamic_energy: Femtojoules,
    pub static_energy: Femtojoules,
    pub leak_power: Nanowatts,
    pub wake_events: u32,
}

/// One layer's domain-wise assignment together with its evaluated cost.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct PowerState {
    pub settings: Vec<DomainSetting>,
    pub cost: StateCost,
}

impl PowerState {
    pub fn latency(&self) -> Picos {
        self.cost.latency
    }

    pub fn energy(&self) -> Femtojoules {
        self.cost.energy
    }

    pub fn leak_power(&self) -> Nanowatts {
        self.cost.leak_power
    }

    /// Distinct non-gated levels used by the state, ascending.
    pub fn voltage_set(&self) -> Vec<VoltageLevel> {
        let mut set: Vec<VoltageLevel> = self.settings.iter().filter_map(|s| s.level()).collect();
        set.sort_unstable();
        set.dedup();
        set
    }
}

/// Result of the break-even analysis for one gated-bank domain in one layer.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct GatingPlan {
    /// Indices into the layer's `bank_idle_windows` that are gated.
    pub gated_windows: Vec<usize>,
    /// Sum of the gated window widths, ppm of the layer.
    pub gated_ppm: u32,
    /// Leakage avoided over the gated windows.
    pub leakage_saved: Femtojoules,
    /// In-layer re-activations; zero for a whole-layer gate, whose wake is
    /// charged by the next transition instead.
    pub wake_events: u32,
    pub wake_energy: Femtojoules,
    pub whole_layer: bool,
}

impl GatingPlan {
    pub fn is_empty(&self) -> bool {
        self.gated_windows.is_empty()
    }

    /// Leakage saved minus in-layer wake energy.
    pub fn net_saving(&self) -> i128 {
        i128::from(self.leakage_saved) - i128::from(self.wake_energy)
    }
}

/// Decide, window by window, whether gating a bank pays off.
///
/// A window of width `w` (fraction of `t_op`) is gated iff the window is
/// longer than the wake latency and the leakage it avoids, `P * w * t_op`,
/// exceeds the wake energy.
pub fn plan_bank_gating(
    layer: &LayerProfile,
    domain: &DomainSpec,
    leak_power: Nanowatts,
    t_op: Picos,
) -> GatingPlan {
    let mut plan = GatingPlan::default();
    if domain.kind != DomainKind::GatedBank {
        return plan;
    }
    let ppm = u128::from(PPM);
    for (idx, w) in layer.bank_idle_windows.iter().enumerate() {
        if w.domain_id != domain.id {
            continue;
        }
        let width_scaled = u128::from(w.width()) * u128::from(t_op); // ps * 1e6
        let long_enough = width_scaled > u128::from(domain.wake_latency) * ppm;
        let saved_scaled = u128::from(leak_power) * width_scaled; // fJ * 1e12
        let profitable = saved_scaled > u128::from(domain.wake_energy) * ppm * ppm;
        if !(long_enough && profitable) {
            continue;
        }
        plan.gated_windows.push(idx);
        plan.gated_ppm += w.width();
        if w.is_whole_layer() {
            plan.whole_layer = true;
        } else {
            plan.wake_events += 1;
            plan.wake_energy += domain.wake_energy;
        }
    }
    let full = leakage_energy(leak_power, t_op);
    let kept = div_half_up(
        u128::from(leak_power) * u128::from(PPM - u64::from(plan.gated_ppm)) * u128::from(t_op),
        ppm * ppm,
    ) as u64;
    plan.leakage_saved = full - kept;
    plan
}

/// Evaluate one layer under a domain-wise assignment.
///
/// Latency is the bottleneck over the powered domains that have cycles.
/// Energy is dynamic energy plus leakage over the layer, minus leakage of
/// gated windows, plus in-layer wake energy.
pub fn evaluate_state(
    workload: &WorkloadProfile,
    model: &CostModel,
    layer_idx: usize,
    settings: &[DomainSetting],
) -> Result<StateCost> {
    let layer = &workload.layers[layer_idx];
    let v_nom = workload.v_nom;
    if settings.len() != workload.domains.len() {
        return Err(Error::InfeasibleState {
            layer: layer.layer_id,
            reason: format!(
                "assignment has {} entries for {} domains",
                settings.len(),
                workload.domains.len()
            ),
        });
    }

    let mut latency = 0;
    for (d, dom) in workload.domains.iter().enumerate() {
        let cycles = layer.cycles[d];
        if cycles == 0 {
            continue;
        }
        let Some(v) = settings[d].level() else {
            return Err(Error::InfeasibleState {
                layer: layer.layer_id,
                reason: format!("domain {} is gated but has {cycles} cycles of work", dom.id),
            });
        };
        let khz = model.frequency(d, dom, Some(v), v_nom)?;
        let t = cycles_to_ps(cycles, khz).ok_or_else(|| Error::InfeasibleState {
            layer: layer.layer_id,
            reason: format!("domain {} has no clock at {v}", dom.id),
        })?;
        latency = latency.max(t);
    }

    let mut cost = StateCost {
        latency,
        ..StateCost::default()
    };
    for (d, dom) in workload.domains.iter().enumerate() {
        let setting = settings[d];
        if dom.kind == DomainKind::Dvfs && setting == DomainSetting::Gated && layer.has_work(d) {
            return Err(Error::InfeasibleState {
                layer: layer.layer_id,
                reason: format!("dvfs domain {} is gated while it has work", dom.id),
            });
        }
        let Some(v) = setting.level() else {
            continue;
        };
        cost.dynamic_energy += scale_dynamic_energy(layer.dynamic_energy_nominal[d], v, v_nom);
        let p = model.leak_power(d, dom, v, v_nom)?;
        cost.leak_power += p;
        let mut leak = leakage_energy(p, latency);
        if let DomainSetting::WindowGated(_) = setting {
            let plan = plan_bank_gating(layer, dom, p, latency);
            leak -= plan.leakage_saved;
            cost.dynamic_energy += plan.wake_energy;
            cost.wake_events += plan.wake_events;
        }
        cost.static_energy += leak;
    }
    cost.energy = cost.dynamic_energy + cost.static_energy;
    Ok(cost)
}

/// Build a [`PowerState`] by evaluating `settings` on a layer.
pub fn make_state(
    workload: &WorkloadProfile,
    model: &CostModel,
    layer_idx: usize,
    settings: Vec<DomainSetting>,
) -> Result<PowerState> {
    let cost = evaluate_state(workload, model, layer_idx, &settings)?;
    Ok(PowerState { settings, cost })
}

/// Latency and energy of moving from `prev` to `next` at a layer boundary.
///
/// Domains switch concurrently, so the latency is the slowest domain's; the
/// energies add up. A rail change costs the switch latency and
/// `C_dom * (V_high^2 - V_low^2)`; leaving the gated state costs the domain's
/// wake latency and energy.
pub fn transition_cost(
    prev: &[DomainSetting],
    next: &[DomainSetting],
    domains: &[DomainSpec],
    model: &CostModel,
) -> (Picos, Femtojoules) {
    debug_assert_eq!(prev.len(), next.len());
    let mut t = 0;
    let mut e = 0;
    for ((a, b), dom) in prev.iter().zip(next).zip(domains) {
        match (a.level(), b.level()) {
            (Some(va), Some(vb)) if va != vb => {
                t = t.max(model.transition.dvfs_switch_latency);
                e += model.switch_energy(dom, va, vb);
            }
            (None, Some(_)) => {
                t = t.max(dom.wake_latency);
                e += dom.wake_energy;
            }
            _ => {}
        }
    }
    (t, e)
}

/// Inference rate as an exact rational, frames per second.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Rate {
    pub num: u64,
    pub den: u64,
}

impl Rate {
    pub fn new(num: u64, den: u64) -> Result<Self> {
        if num == 0 || den == 0 {
            return Err(Error::validation("rate must be a positive rational"));
        }
        Ok(Rate { num, den })
    }

    pub fn fps(fps: u64) -> Result<Self> {
        Rate::new(fps, 1)
    }

    /// `floor(1e12 / rate)` picoseconds.
    pub fn period(self) -> Picos {
        (u128::from(self.den) * 1_000_000_000_000 / u128::from(self.num)) as u64
    }

    pub fn as_f64(self) -> f64 {
        self.num as f64 / self.den as f64
    }
}

impl std::str::FromStr for Rate {
    type Err = Error;

    /// Parses decimal notation exactly, e.g. `30`, `29.97`, `0.5`.
    fn from_str(s: &str) -> Result<Self> {
        let bad = || Error::Parse {
            context: "rate".into(),
            message: format!("expected a positive decimal number, got {s:?}"),
        };
        let s = s.trim();
        let (int, frac) = s.split_once('.').unwrap_or((s, ""));
        if (int.is_empty() && frac.is_empty())
            || !int.chars().all(|c| c.is_ascii_digit())
            || !frac.chars().all(|c| c.is_ascii_digit())
            || frac.len() > 9
        {
            return Err(bad());
        }
        let den = 10u64.pow(frac.len() as u32);
        let int_v: u64 = if int.is_empty() { 0 } else { int.parse().map_err(|_| bad())? };
        let frac_v: u64 = if frac.is_empty() { 0 } else { frac.parse().map_err(|_| bad())? };
        let num = int_v
            .checked_mul(den)
            .and_then(|x| x.checked_add(frac_v))
            .ok_or_else(bad)?;
        Rate::new(num, den).map_err(|_| bad())
    }
}

impl fmt::Display for Rate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.den == 1 {
            write!(f, "{}", self.num)
        } else {
            let digits = self.den.trailing_zeros_decimal();
            match digits {
                Some(k) => {
                    let int = self.num / self.den;
                    let frac = self.num % self.den;
                    write!(f, "{int}.{frac:0width$}", width = k as usize)
                }
                None => write!(f, "{}/{}", self.num, self.den),
            }
        }
    }
}

trait DecimalPower {
    fn trailing_zeros_decimal(self) -> Option<u32>;
}

impl DecimalPower for u64 {
    /// `Some(k)` when `self == 10^k`.
    fn trailing_zeros_decimal(self) -> Option<u32> {
        let mut k = 0;
        let mut x = self;
        while x > 1 && x.is_multiple_of(10) {
            x /= 10;
            k += 1;
        }
        (x == 1).then_some(k)
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", deny_unknown_fields)]
pub enum DutyModel {
    /// z = 1: the accelerator idles powered until the next frame.
    #[default]
    AlwaysActive,
    /// z may be 0: power down during slack and pay a wake at the frame boundary.
    PowerDown {
        duty_wake_energy: Femtojoules,
        duty_wake_latency: Picos,
    },
}

/// The duty-cycling decision `z` on the terminal idle state.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DutyDecision {
    /// z = 1
    Active,
    /// z = 0
    PowerDown,
}

impl DutyDecision {
    pub fn z(self) -> u8 {
        match self {
            DutyDecision::Active => 1,
            DutyDecision::PowerDown => 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct DeadlineSpec {
    pub t_max: Picos,
    pub target_rate: Option<Rate>,
    pub idle_power: Nanowatts,
    pub duty_model: DutyModel,
}

impl DeadlineSpec {
    pub fn from_rate(rate: Rate, idle_power: Nanowatts, duty_model: DutyModel) -> Result<Self> {
        let mut d = DeadlineSpec::from_t_max(rate.period(), idle_power, duty_model)?;
        d.target_rate = Some(rate);
        Ok(d)
    }

    pub fn from_t_max(t_max: Picos, idle_power: Nanowatts, duty_model: DutyModel) -> Result<Self> {
        if t_max == 0 {
            return Err(Error::validation("deadline t_max must be positive"));
        }
        Ok(DeadlineSpec {
            t_max,
            target_rate: None,
            idle_power,
            duty_model,
        })
    }

    /// The duty decisions this deadline allows, `Active` first.
    pub fn duty_options(&self) -> &'static [DutyDecision] {
        match self.duty_model {
            DutyModel::AlwaysActive => &[DutyDecision::Active],
            DutyModel::PowerDown { .. } => &[DutyDecision::Active, DutyDecision::PowerDown],
        }
    }
}

/// Energy of the terminal idle interval.
///
/// `Active` leaks `idle_power` over the slack; `PowerDown` pays a flat wake
/// charge and needs the wake latency to fit in the slack. Zero slack costs
/// nothing either way.
pub fn idle_energy(deadline: &DeadlineSpec, t_infer: Picos, z: DutyDecision) -> Result<Femtojoules> {
    if t_infer > deadline.t_max {
        return Err(Error::DeadlineViolated {
            t_infer,
            t_max: deadline.t_max,
        });
    }
    let slack = deadline.t_max - t_infer;
    if slack == 0 {
        return Ok(0);
    }
    match z {
        DutyDecision::Active => Ok(leakage_energy(deadline.idle_power, slack)),
        DutyDecision::PowerDown => match deadline.duty_model {
            DutyModel::AlwaysActive => Err(Error::validation(
                "power-down requested but the duty model is always_active",
            )),
            DutyModel::PowerDown {
                duty_wake_energy,
                duty_wake_latency,
            } => {
                if duty_wake_latency > slack {
                    Err(Error::PowerDownInfeasible {
                        needed: duty_wake_latency,
                        slack,
                    })
                } else {
                    Ok(duty_wake_energy)
                }
            }
        },
    }
}

/// Exact idle energy in nW·ps (1e-6 fJ); `None` when the option is infeasible.
pub(crate) fn idle_energy_exact(deadline: &DeadlineSpec, t_infer: Picos, z: DutyDecision) -> Option<i128> {
    if t_infer > deadline.t_max {
        return None;
    }
    let slack = deadline.t_max - t_infer;
    if slack == 0 {
        return Some(0);
    }
    match (z, deadline.duty_model) {
        (DutyDecision::Active, _) => Some(i128::from(deadline.idle_power) * i128::from(slack)),
        (DutyDecision::PowerDown, DutyModel::PowerDown { duty_wake_energy, duty_wake_latency }) => {
            (duty_wake_latency <= slack).then(|| i128::from(duty_wake_energy) * EXACT_PER_FJ)
        }
        (DutyDecision::PowerDown, DutyModel::AlwaysActive) => None,
    }
}
