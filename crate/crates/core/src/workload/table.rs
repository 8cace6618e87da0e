use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{
    DeadlineSpec, DomainSetting, DutyDecision, DutyModel, Femtojoules, Nanowatts, Picos, RailSet, Scenario,
    VoltageLevel,
};
use crate::solver::Schedule;

pub const SCHEDULE_SCHEMA_VERSION: u32 = 1;

/// One domain's supply in a table row: millivolts, or the string `"GATED"`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum LevelCell {
    Mv(u32),
    Gated(GatedTag),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum GatedTag {
    #[serde(rename = "GATED")]
    Gated,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleRow {
    pub layer_id: u32,
    /// Per domain, in profile order.
    pub levels: Vec<LevelCell>,
    /// Domains gated during their idle windows within the layer.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub window_gated: Vec<u32>,
    pub t_op: Picos,
    pub e_op: Femtojoules,
    pub e_dynamic: Femtojoules,
    pub e_static: Femtojoules,
    pub trans_in_t: Picos,
    pub trans_in_e: Femtojoules,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IdleRow {
    pub z: u8,
    pub slack: Picos,
    pub e_idle: Femtojoules,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Totals {
    pub t_infer: Picos,
    pub t_op: Picos,
    pub t_trans: Picos,
    pub e_op: Femtojoules,
    pub e_trans: Femtojoules,
    pub e_idle: Femtojoules,
    pub e_tot: Femtojoules,
    pub rail_switches: u32,
    pub wake_events: u32,
}

/// Static per-layer schedule table.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScheduleDocument {
    pub schema_version: u32,
    pub workload: String,
    pub rail_set: Vec<u32>,
    pub t_max: Picos,
    pub idle_power: Nanowatts,
    pub duty_model: DutyModel,
    pub rows: Vec<ScheduleRow>,
    pub idle: IdleRow,
    pub totals: Totals,
}

impl ScheduleDocument {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("schedule serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: ScheduleDocument = serde_json::from_str(text).map_err(|e| Error::Parse {
            context: "schedule document".into(),
            message: e.to_string(),
        })?;
        if doc.schema_version != SCHEDULE_SCHEMA_VERSION {
            return Err(Error::validation(format!(
                "unsupported schedule schema_version {}",
                doc.schema_version
            )));
        }
        Ok(doc)
    }
}

/// Render a schedule as a table. Domain order follows the workload.
pub fn emit_schedule_table(scenario: &Scenario, schedule: &Schedule, deadline: &DeadlineSpec) -> ScheduleDocument {
    let domains = &scenario.workload.domains;
    let rows = schedule
        .states
        .iter()
        .zip(&schedule.transitions)
        .zip(&scenario.workload.layers)
        .map(|((st, &(tt, te)), layer)| ScheduleRow {
            layer_id: layer.layer_id,
            levels: st
                .settings
                .iter()
                .map(|s| match s.level() {
                    Some(v) => LevelCell::Mv(v.millivolts()),
                    None => LevelCell::Gated(GatedTag::Gated),
                })
                .collect(),
            window_gated: st
                .settings
                .iter()
                .zip(domains)
                .filter(|(s, _)| matches!(s, DomainSetting::WindowGated(_)))
                .map(|(_, d)| d.id)
                .collect(),
            t_op: st.latency(),
            e_op: st.energy(),
            e_dynamic: st.cost.dynamic_energy,
            e_static: st.cost.static_energy,
            trans_in_t: tt,
            trans_in_e: te,
        })
        .collect();
    let b = &schedule.breakdown;
    ScheduleDocument {
        schema_version: SCHEDULE_SCHEMA_VERSION,
        workload: scenario.workload.name.clone(),
        rail_set: schedule.rail_set.rails().iter().map(|v| v.millivolts()).collect(),
        t_max: deadline.t_max,
        idle_power: deadline.idle_power,
        duty_model: deadline.duty_model,
        rows,
        idle: IdleRow {
            z: schedule.duty.z(),
            slack: schedule.slack(),
            e_idle: b.e_idle,
        },
        totals: Totals {
            t_infer: schedule.t_infer,
            t_op: b.t_op,
            t_trans: b.t_trans,
            e_op: b.e_op,
            e_trans: b.e_trans,
            e_idle: b.e_idle,
            e_tot: schedule.e_tot,
            rail_switches: b.rail_switches,
            wake_events: b.wake_events,
        },
    }
}

/// Rebuild the schedule from a table by re-evaluating every layer and
/// transition against the scenario, and check the stored totals.
pub fn reevaluate_schedule(scenario: &Scenario, doc: &ScheduleDocument) -> Result<Schedule> {
    if doc.rows.len() != scenario.num_layers() {
        return Err(Error::validation(format!(
            "schedule has {} rows for {} layers",
            doc.rows.len(),
            scenario.num_layers()
        )));
    }
    let domains = &scenario.workload.domains;
    let mut settings = Vec::with_capacity(doc.rows.len());
    for (row, layer) in doc.rows.iter().zip(&scenario.workload.layers) {
        if row.layer_id != layer.layer_id || row.levels.len() != domains.len() {
            return Err(Error::validation(format!("row for layer {} does not match the profile", row.layer_id)));
        }
        let s = row
            .levels
            .iter()
            .zip(domains)
            .map(|(cell, d)| {
                Ok(match cell {
                    LevelCell::Gated(_) => DomainSetting::Gated,
                    LevelCell::Mv(mv) => {
                        let v = VoltageLevel::from_millivolts(*mv)?;
                        if row.window_gated.contains(&d.id) {
                            DomainSetting::WindowGated(v)
                        } else {
                            DomainSetting::Rail(v)
                        }
                    }
                })
            })
            .collect::<Result<Vec<_>>>()?;
        settings.push(s);
    }
    let rails = RailSet::from_millivolts(&doc.rail_set)?;
    let deadline = DeadlineSpec::from_t_max(doc.t_max, doc.idle_power, doc.duty_model)?;
    let z = if doc.idle.z == 1 {
        DutyDecision::Active
    } else {
        DutyDecision::PowerDown
    };
    let s = Schedule::assemble(scenario, rails, settings, &deadline, Some(z))?;
    if s.e_tot != doc.totals.e_tot || s.t_infer != doc.totals.t_infer {
        return Err(Error::validation(format!(
            "table totals (E {} fJ, T {} ps) differ from re-evaluation (E {} fJ, T {} ps)",
            doc.totals.e_tot, doc.totals.t_infer, s.e_tot, s.t_infer
        )));
    }
    Ok(s)
}
