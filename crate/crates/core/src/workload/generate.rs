use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::model::{
    DomainKind, DomainOverride, DomainSpec, DutyModel, Fraction, IdleWindow, LayerProfile, LeakPoint, PPM,
    TransitionModel, VoltageLevel, VoltageMenu, WorkloadProfile,
};

use super::{ModelDefaults, PROFILE_SCHEMA_VERSION, ProfileDocument};

/// Knobs for [`generate_random_instance`]. Fractions are in ppm.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GeneratorConfig {
    pub layers: usize,
    pub dvfs_domains: usize,
    pub gated_banks: usize,
    /// Menu size; levels are spread over 900..=1300 mV.
    pub menu_levels: usize,
    /// Mean share of leakage in a layer's nominal energy.
    pub leak_share: u32,
    /// Half-width of the per-layer spread around `leak_share`.
    pub leak_spread: u32,
    /// Chance that a bank has an idle window in a layer.
    pub window_density: u32,
    /// Chance that a layer is paired with its predecessor as a trap: one is
    /// leakage-dominated (cheapest fast), the other dynamic-dominated
    /// (cheapest slow).
    pub trap_rate: u32,
    /// Full-swing switch energy, fJ.
    pub switch_energy: u64,
    /// Offer power-down in the slack.
    pub power_down: bool,
}

impl Default for GeneratorConfig {
    fn default() -> Self {
        GeneratorConfig {
            layers: 6,
            dvfs_domains: 2,
            gated_banks: 0,
            menu_levels: 4,
            leak_share: 300_000,
            leak_spread: 200_000,
            window_density: 500_000,
            trap_rate: 0,
            switch_energy: 2_000_000,
            power_down: false,
        }
    }
}

fn chance(rng: &mut ChaCha8Rng, ppm: u32) -> bool {
    rng.gen_range(0..PPM as u32) < ppm
}

/// Menu of `m` levels from 900 mV to at most 1300 mV on a 10 mV grid.
fn menu(m: usize) -> VoltageMenu {
    assert!((1..=41).contains(&m), "menu size must be in 1..=41");
    if m == 1 {
        return VoltageMenu::uniform(1300, 1300, 10).unwrap();
    }
    let step = (400 / (m as u32 - 1)) / 10 * 10;
    VoltageMenu::uniform(900, 900 + step * (m as u32 - 1), step).unwrap()
}

/// A seeded random profile. The same seed and configuration always give the
/// same document.
pub fn generate_random_instance(seed: u64, cfg: &GeneratorConfig) -> ProfileDocument {
    assert!(cfg.layers >= 1 && cfg.dvfs_domains >= 1, "need at least one layer and one dvfs domain");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let menu = menu(cfg.menu_levels);
    let levels = menu.levels().to_vec();
    let v_nom = levels[(levels.len() - 1) * 3 / 4];

    let mut domains = Vec::new();
    for d in 0..cfg.dvfs_domains {
        domains.push(DomainSpec {
            id: d as u32,
            name: format!("dvfs{d}"),
            kind: DomainKind::Dvfs,
            nominal_freq: rng.gen_range(200_000..=800_000),
            capacitance_scale: rng.gen_range(500_000..=3_000_000),
            leak_power_nominal: rng.gen_range(20_000..=200_000),
            wake_energy: 0,
            wake_latency: 0,
        });
    }
    for b in 0..cfg.gated_banks {
        domains.push(DomainSpec {
            id: (cfg.dvfs_domains + b) as u32,
            name: format!("bank{b}"),
            kind: DomainKind::GatedBank,
            nominal_freq: 0,
            capacitance_scale: rng.gen_range(200_000..=1_000_000),
            leak_power_nominal: rng.gen_range(50_000..=400_000),
            wake_energy: rng.gen_range(1_000..=200_000),
            wake_latency: rng.gen_range(1_000..=20_000),
        });
    }

    // leakage that barely tracks voltage, so leakage-heavy layers favour
    // finishing fast
    let overrides: Vec<DomainOverride> = domains
        .iter()
        .filter(|d| d.kind == DomainKind::Dvfs)
        .map(|d| DomainOverride {
            domain_id: d.id,
            vf_table: None,
            leak_table: Some(
                levels
                    .iter()
                    .map(|v| LeakPoint {
                        mv: v.millivolts(),
                        nw: d.leak_power_nominal * (700 + 300 * u64::from(v.millivolts()) / u64::from(v_nom.millivolts()))
                            / 1000,
                    })
                    .collect(),
            ),
        })
        .collect();

    let n = domains.len();
    let mut layers: Vec<LayerProfile> = Vec::with_capacity(cfg.layers);
    let mut prev_leaky = false;
    for i in 0..cfg.layers {
        let trap = i > 0 && chance(&mut rng, cfg.trap_rate);
        let leaky = if trap { !prev_leaky } else { chance(&mut rng, 500_000) };
        prev_leaky = leaky;
        let mut cycles = vec![0u64; n];
        let mut dyn_e = vec![0u64; n];
        let mut active = vec![Fraction::ZERO; n];
        for d in 0..cfg.dvfs_domains {
            if d > 0 && chance(&mut rng, 100_000) {
                continue;
            }
            let c: u64 = rng.gen_range(20_000..=200_000);
            cycles[d] = c;
            active[d] = Fraction::ONE;
            // nominal leakage energy of this domain over its own busy time
            let t_ps = c * 1_000_000_000 / domains[d].nominal_freq;
            let leak_e = (u128::from(domains[d].leak_power_nominal) * u128::from(t_ps) / 1_000_000) as u64;
            let share = if trap {
                if leaky { 850_000 } else { 60_000 }
            } else {
                let lo = cfg.leak_share.saturating_sub(cfg.leak_spread).max(10_000);
                let hi = (cfg.leak_share + cfg.leak_spread).min(950_000).max(lo);
                rng.gen_range(lo..=hi)
            };
            dyn_e[d] = (u128::from(leak_e) * u128::from(PPM - u64::from(share)) / u128::from(share)) as u64;
        }
        let mut windows = Vec::new();
        for b in cfg.dvfs_domains..n {
            if !chance(&mut rng, cfg.window_density) {
                dyn_e[b] = rng.gen_range(1_000..=500_000);
                active[b] = Fraction::ONE;
                continue;
            }
            if chance(&mut rng, 250_000) {
                windows.push(IdleWindow {
                    domain_id: b as u32,
                    start_fraction: Fraction::ZERO,
                    end_fraction: Fraction::ONE,
                });
            } else {
                dyn_e[b] = rng.gen_range(1_000..=500_000);
                active[b] = Fraction::ONE;
                let start = rng.gen_range(0..800_000u32);
                let end = rng.gen_range(start + 50_000..=1_000_000u32).min(999_999);
                windows.push(IdleWindow {
                    domain_id: b as u32,
                    start_fraction: Fraction::from_ppm(start).unwrap(),
                    end_fraction: Fraction::from_ppm(end.max(start + 1)).unwrap(),
                });
            }
        }
        layers.push(LayerProfile {
            layer_id: i as u32 + 1,
            kind: Some(if leaky { "memory_bound" } else { "compute_bound" }.into()),
            cycles,
            dynamic_energy_nominal: dyn_e,
            active_fraction: active,
            bank_idle_windows: windows,
        });
    }

    let duty_model = if cfg.power_down {
        DutyModel::PowerDown {
            duty_wake_energy: rng.gen_range(100_000..=5_000_000),
            duty_wake_latency: rng.gen_range(10_000..=500_000),
        }
    } else {
        DutyModel::AlwaysActive
    };
    ProfileDocument {
        schema_version: PROFILE_SCHEMA_VERSION,
        synthetic: true,
        notes: format!("random instance, seed {seed}"),
        model: ModelDefaults {
            voltage_menu: menu,
            transition: TransitionModel {
                base_switch_energy: cfg.switch_energy,
                ..TransitionModel::default()
            },
            idle_power: rng.gen_range(1_000..=100_000),
            duty_model,
        },
        workload: WorkloadProfile {
            name: format!("random-{seed}"),
            domains,
            layers,
            v_nom: VoltageLevel::from_millivolts(v_nom.millivolts()).unwrap(),
        },
        overrides,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RailSet;
    use crate::solver::estimate_labels;
    use crate::statespace::LayeredStateGraph;

    #[test]
    fn deterministic_and_valid() {
        let cfg = GeneratorConfig {
            gated_banks: 2,
            trap_rate: 500_000,
            power_down: true,
            ..GeneratorConfig::default()
        };
        for seed in 0..30 {
            let a = generate_random_instance(seed, &cfg);
            let b = generate_random_instance(seed, &cfg);
            assert_eq!(a, b);
            a.validate().unwrap();
        }
        assert_ne!(generate_random_instance(1, &cfg), generate_random_instance(2, &cfg));
    }

    #[test]
    fn knob_extremes_are_valid() {
        for (layers, dvfs, banks, m, share, spread, dens, trap) in [
            (1, 1, 0, 1, 10_000, 0, 0, 0),
            (12, 3, 2, 9, 950_000, 950_000, 1_000_000, 1_000_000),
            (3, 4, 1, 2, 500_000, 0, 1_000_000, 0),
        ] {
            let cfg = GeneratorConfig {
                layers,
                dvfs_domains: dvfs,
                gated_banks: banks,
                menu_levels: m,
                leak_share: share,
                leak_spread: spread,
                window_density: dens,
                trap_rate: trap,
                ..GeneratorConfig::default()
            };
            for seed in 0..10 {
                generate_random_instance(seed, &cfg).validate().unwrap();
            }
        }
    }

    #[test]
    fn small_instance_fits_oracle_cap() {
        let cfg = GeneratorConfig {
            layers: 8,
            dvfs_domains: 2,
            menu_levels: 4,
            ..GeneratorConfig::default()
        };
        let doc = generate_random_instance(7, &cfg);
        let s = doc.scenario().unwrap();
        let rails = RailSet::new(doc.model.voltage_menu.levels().to_vec()).unwrap();
        let g = LayeredStateGraph::build(&s, &rails, false).unwrap();
        assert!(estimate_labels(&g) < crate::solver::DEFAULT_LABEL_CAP);
    }
}
