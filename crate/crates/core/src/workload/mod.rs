//! Profile documents: loading, validation, synthetic generation, the bundled
//! example profiles and schedule tables.

mod bundled;
mod generate;
mod table;

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    CostModel, DeadlineSpec, DomainKind, DomainOverride, DutyModel, Nanowatts, Picos, Rate, Scenario,
    TransitionModel, VoltageMenu, WorkloadProfile,
};

pub use bundled::{BUNDLED_NAMES, bundled_profile, bundled_source, synthesize_bundled};
pub use generate::{GeneratorConfig, generate_random_instance};
pub use table::{
    IdleRow, LevelCell, SCHEDULE_SCHEMA_VERSION, ScheduleDocument, ScheduleRow, Totals, emit_schedule_table,
    reevaluate_schedule,
};

pub const PROFILE_SCHEMA_VERSION: u32 = 1;

/// Cost-model defaults carried by a profile.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelDefaults {
    pub voltage_menu: VoltageMenu,
    pub transition: TransitionModel,
    /// nW drawn while idling powered on between inferences.
    pub idle_power: Nanowatts,
    #[serde(default)]
    pub duty_model: DutyModel,
}

impl Default for ModelDefaults {
    fn default() -> Self {
        ModelDefaults {
            voltage_menu: VoltageMenu::default(),
            transition: TransitionModel::default(),
            idle_power: 0,
            duty_model: DutyModel::AlwaysActive,
        }
    }
}

/// A workload together with the model parameters it is meant to be solved
/// under.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProfileDocument {
    pub schema_version: u32,
    /// Set when the numbers are illustrative rather than measured.
    #[serde(default)]
    pub synthetic: bool,
    #[serde(default, skip_serializing_if = "String::is_empty")]
    pub notes: String,
    pub model: ModelDefaults,
    pub workload: WorkloadProfile,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub overrides: Vec<DomainOverride>,
}

impl ProfileDocument {
    /// Check every cross-reference and invariant; each failure names the
    /// violated rule.
    pub fn validate(&self) -> Result<()> {
        if self.schema_version != PROFILE_SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported schema_version {} (expected {PROFILE_SCHEMA_VERSION})",
                self.schema_version
            )));
        }
        self.scenario().map(|_| ())
    }

    /// Domains of kind `gated_bank` without their own wake latency take the
    /// transition model's default.
    fn resolved_workload(&self) -> WorkloadProfile {
        let mut w = self.workload.clone();
        for d in &mut w.domains {
            if d.kind == DomainKind::GatedBank && d.wake_latency == 0 {
                d.wake_latency = self.model.transition.wake_latency;
            }
        }
        w
    }

    pub fn cost_model(&self) -> Result<CostModel> {
        let w = &self.workload;
        let mut model = CostModel::new(self.model.voltage_menu.clone(), self.model.transition, w.domains.len());
        for o in &self.overrides {
            let Some(d) = w.domain_index(o.domain_id) else {
                return Err(Error::validation(format!(
                    "override references undeclared domain {}",
                    o.domain_id
                )));
            };
            if model.overrides[d].is_some() {
                return Err(Error::validation(format!("duplicate override for domain {}", o.domain_id)));
            }
            let menu = &self.model.voltage_menu;
            let covers = |mvs: Vec<u32>| menu.levels().iter().all(|v| mvs.contains(&v.millivolts()));
            if let Some(t) = &o.vf_table {
                if !covers(t.iter().map(|p| p.mv).collect()) {
                    return Err(Error::validation(format!(
                        "vf_table of domain {} must cover every menu level",
                        o.domain_id
                    )));
                }
                let mut sorted = t.clone();
                sorted.sort_by_key(|p| p.mv);
                if sorted.windows(2).any(|p| p[1].khz < p[0].khz) {
                    return Err(Error::validation(format!(
                        "vf_table of domain {} must be non-decreasing in voltage",
                        o.domain_id
                    )));
                }
            }
            if let Some(t) = &o.leak_table {
                if !covers(t.iter().map(|p| p.mv).collect()) {
                    return Err(Error::validation(format!(
                        "leak_table of domain {} must cover every menu level",
                        o.domain_id
                    )));
                }
            }
            model.overrides[d] = Some(o.clone());
        }
        Ok(model)
    }

    pub fn scenario(&self) -> Result<Scenario> {
        Scenario::new(self.resolved_workload(), self.cost_model()?)
    }

    pub fn deadline_for_rate(&self, rate: Rate) -> Result<DeadlineSpec> {
        DeadlineSpec::from_rate(rate, self.model.idle_power, self.model.duty_model)
    }

    pub fn deadline_for_t_max(&self, t_max: Picos) -> Result<DeadlineSpec> {
        DeadlineSpec::from_t_max(t_max, self.model.idle_power, self.model.duty_model)
    }

    /// Pretty JSON with a trailing newline.
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("profile serializes");
        s.push('\n');
        s
    }
}

/// Strictly parse and validate a profile document.
pub fn parse_profile(text: &str, context: &str) -> Result<ProfileDocument> {
    let doc: ProfileDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
        context: context.to_string(),
        message: e.to_string(),
    })?;
    doc.validate()?;
    Ok(doc)
}

/// Load a profile from a path, or a bundled profile named `bundled:<name>`.
pub fn load_profile(path: impl AsRef<Path>) -> Result<ProfileDocument> {
    let path = path.as_ref();
    if let Some(name) = path.to_str().and_then(|s| s.strip_prefix("bundled:")) {
        return bundled_profile(name);
    }
    let text = std::fs::read_to_string(path).map_err(|e| Error::Parse {
        context: path.display().to_string(),
        message: e.to_string(),
    })?;
    parse_profile(&text, &path.display().to_string())
}
