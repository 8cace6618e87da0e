//! Synthetic example profiles shaped like four common edge networks. Layer
//! counts and layer-type mix follow the networks; all magnitudes are
//! illustrative 40 nm-class values, not measurements.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{
    DomainKind, DomainSpec, Fraction, IdleWindow, LayerProfile, TransitionModel, VoltageLevel, VoltageMenu,
    WorkloadProfile,
};

use super::{ModelDefaults, PROFILE_SCHEMA_VERSION, ProfileDocument, parse_profile};

pub const BUNDLED_NAMES: [&str; 4] = [
    "squeezenet-like",
    "mobilenetv3-small-like",
    "resnet18-like",
    "mobilevit-xxs-like",
];

/// Committed JSON of a bundled profile.
pub fn bundled_source(name: &str) -> Option<&'static str> {
    Some(match canonical(name)? {
        "squeezenet-like" => include_str!("../../profiles/squeezenet-like.json"),
        "mobilenetv3-small-like" => include_str!("../../profiles/mobilenetv3-small-like.json"),
        "resnet18-like" => include_str!("../../profiles/resnet18-like.json"),
        "mobilevit-xxs-like" => include_str!("../../profiles/mobilevit-xxs-like.json"),
        _ => unreachable!(),
    })
}

fn canonical(name: &str) -> Option<&'static str> {
    let base = name
        .strip_suffix(".json")
        .or_else(|| name.strip_suffix(".profile"))
        .unwrap_or(name);
    let base = match base {
        "mobilevit-like" => "mobilevit-xxs-like",
        "mobilenet-like" | "mobilenetv3-like" => "mobilenetv3-small-like",
        other => other,
    };
    BUNDLED_NAMES.iter().copied().find(|n| *n == base)
}

/// Parse and validate a bundled profile.
pub fn bundled_profile(name: &str) -> Result<ProfileDocument> {
    let src = bundled_source(name).ok_or_else(|| {
        Error::validation(format!(
            "unknown bundled profile {name:?}; available: {}",
            BUNDLED_NAMES.join(", ")
        ))
    })?;
    parse_profile(src, &format!("bundled:{name}"))
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Kind {
    Conv3,
    Conv1,
    Depthwise,
    Squeeze,
    Pool,
    Fc,
    Attention,
    Ffn,
}

impl Kind {
    fn label(self) -> &'static str {
        match self {
            Kind::Conv3 => "conv3x3",
            Kind::Conv1 => "conv1x1",
            Kind::Depthwise => "depthwise",
            Kind::Squeeze => "squeeze",
            Kind::Pool => "pool",
            Kind::Fc => "fc",
            Kind::Attention => "attention",
            Kind::Ffn => "ffn",
        }
    }

    /// Thousands of cycles on (compute, feeder, rram) and per-cycle dynamic
    /// energy scale in fJ, plus the bank idle window in ppm (start, end).
    fn shape(self) -> ([u64; 3], [u64; 3], Option<(u32, u32)>) {
        match self {
            Kind::Conv3 => ([60, 30, 10], [400, 700, 3500], Some((600_000, 950_000))),
            Kind::Conv1 => ([20, 36, 7], [450, 700, 4000], Some((750_000, 1_000_000))),
            Kind::Depthwise => ([10, 34, 3], [500, 650, 4000], Some((150_000, 1_000_000))),
            Kind::Squeeze => ([14, 22, 4], [400, 650, 3300], Some((500_000, 1_000_000))),
            Kind::Pool => ([6, 24, 0], [300, 600, 0], Some((0, 1_000_000))),
            Kind::Fc => ([8, 20, 30], [400, 1500, 1400], None),
            Kind::Attention => ([48, 40, 0], [450, 700, 0], Some((0, 1_000_000))),
            Kind::Ffn => ([36, 26, 12], [450, 650, 3500], Some((850_000, 1_000_000))),
        }
    }
}

fn squeezenet() -> Vec<Kind> {
    let mut v = vec![Kind::Conv3];
    for _ in 0..8 {
        v.extend([Kind::Squeeze, Kind::Conv1, Kind::Conv3]);
    }
    v.push(Kind::Conv1);
    v
}

fn mobilenetv3_small() -> Vec<Kind> {
    let mut v = vec![Kind::Conv3];
    v.extend([Kind::Depthwise, Kind::Fc, Kind::Fc, Kind::Conv1]);
    for block in 2..=11 {
        v.extend([Kind::Conv1, Kind::Depthwise]);
        if block >= 4 {
            v.extend([Kind::Fc, Kind::Fc]);
        }
        v.push(Kind::Conv1);
    }
    v.push(Kind::Conv1);
    v
}

fn resnet18() -> Vec<Kind> {
    let mut v = vec![Kind::Conv3];
    for stage in 0..4 {
        if stage > 0 {
            v.push(Kind::Conv1);
        }
        v.extend([Kind::Conv3; 4]);
    }
    v
}

fn mobilevit_xxs() -> Vec<Kind> {
    let mut v = vec![Kind::Conv3];
    for _ in 0..4 {
        v.extend([Kind::Conv1, Kind::Depthwise, Kind::Conv1]);
    }
    for depth in [2, 4, 3] {
        v.extend([Kind::Conv3, Kind::Conv1]);
        for _ in 0..depth {
            v.extend([Kind::Conv1, Kind::Attention, Kind::Conv1, Kind::Ffn, Kind::Ffn]);
        }
        v.extend([Kind::Conv1, Kind::Conv3]);
    }
    v.extend([Kind::Conv1, Kind::Pool]);
    v
}

fn domains() -> Vec<DomainSpec> {
    let dvfs = |id: u32, name: &str, freq: u64, cap: u64, leak: u64| DomainSpec {
        id,
        name: name.into(),
        kind: DomainKind::Dvfs,
        nominal_freq: freq,
        capacitance_scale: cap,
        leak_power_nominal: leak,
        wake_energy: 0,
        wake_latency: 0,
    };
    vec![
        dvfs(0, "compute", 400_000, 6_000_000, 40000),
        dvfs(1, "feeder", 400_000, 3_000_000, 20000),
        dvfs(2, "rram", 250_000, 4_000_000, 30000),
        DomainSpec {
            id: 3,
            name: "weight_banks".into(),
            kind: DomainKind::GatedBank,
            nominal_freq: 0,
            capacitance_scale: 1_000_000,
            leak_power_nominal: 120000,
            wake_energy: 200_000,
            wake_latency: 0,
        },
    ]
}

/// Deterministically synthesize a bundled profile.
pub fn synthesize_bundled(name: &str) -> Result<ProfileDocument> {
    let name = canonical(name).ok_or_else(|| Error::validation(format!("unknown bundled profile {name:?}")))?;
    let (kinds, seed) = match name {
        "squeezenet-like" => (squeezenet(), 11),
        "mobilenetv3-small-like" => (mobilenetv3_small(), 13),
        "resnet18-like" => (resnet18(), 17),
        "mobilevit-xxs-like" => (mobilevit_xxs(), 19),
        _ => unreachable!(),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let layers = kinds
        .iter()
        .enumerate()
        .map(|(i, &k)| {
            let (kcycles, per_cycle, window) = k.shape();
            let mut cycles = vec![0u64; 4];
            let mut dyn_e = vec![0u64; 4];
            let mut active = vec![Fraction::ZERO; 4];
            for d in 0..3 {
                if kcycles[d] == 0 {
                    continue;
                }
                let jitter: u64 = rng.gen_range(70..=130);
                cycles[d] = kcycles[d] * 1000 * jitter / 100;
                dyn_e[d] = cycles[d] * per_cycle[d] * rng.gen_range(85..=115) / 100;
                active[d] = Fraction::ONE;
            }
            let mut windows = Vec::new();
            match window {
                Some((0, 1_000_000)) => windows.push(IdleWindow {
                    domain_id: 3,
                    start_fraction: Fraction::ZERO,
                    end_fraction: Fraction::ONE,
                }),
                other => {
                    dyn_e[3] = rng.gen_range(3_000_000..=8_000_000);
                    active[3] = Fraction::ONE;
                    if let Some((s, e)) = other {
                        windows.push(IdleWindow {
                            domain_id: 3,
                            start_fraction: Fraction::from_ppm(s).unwrap(),
                            end_fraction: Fraction::from_ppm(e).unwrap(),
                        });
                    }
                }
            }
            LayerProfile {
                layer_id: i as u32 + 1,
                kind: Some(k.label().into()),
                cycles,
                dynamic_energy_nominal: dyn_e,
                active_fraction: active,
                bank_idle_windows: windows,
            }
        })
        .collect();
    Ok(ProfileDocument {
        schema_version: PROFILE_SCHEMA_VERSION,
        synthetic: true,
        notes: "Synthetic profile: layer count and layer-type mix follow the named network; energies, \
                latencies and leakage are illustrative 40 nm-class values, not measurements."
            .into(),
        model: ModelDefaults {
            voltage_menu: VoltageMenu::default(),
            transition: TransitionModel {
                dvfs_switch_latency: 15000,
                base_switch_energy: 2000000,
                ..TransitionModel::default()
            },
            idle_power: 50_000,
            duty_model: Default::default(),
        },
        workload: WorkloadProfile {
            name: name.into(),
            domains: domains(),
            layers,
            v_nom: VoltageLevel::from_millivolts(1200).unwrap(),
        },
        overrides: vec![],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn layer_counts() {
        assert_eq!(squeezenet().len(), 26);
        assert_eq!(mobilenetv3_small().len(), 52);
        assert_eq!(resnet18().len(), 20);
        assert_eq!(mobilevit_xxs().len(), 72);
    }

    #[test]
    fn committed_files_match_synthesizer() {
        for name in BUNDLED_NAMES {
            let doc = synthesize_bundled(name).unwrap();
            doc.validate().unwrap();
            if std::env::var_os("RAILSCHED_BLESS").is_some() {
                let path = format!("{}/profiles/{name}.json", env!("CARGO_MANIFEST_DIR"));
                std::fs::write(path, doc.to_json()).unwrap();
                continue;
            }
            assert_eq!(bundled_source(name).unwrap(), doc.to_json(), "{name} is stale");
            assert_eq!(bundled_profile(name).unwrap(), doc);
        }
    }

    #[test]
    fn aliases_resolve() {
        assert_eq!(bundled_profile("squeezenet-like.profile").unwrap().workload.layers.len(), 26);
        assert_eq!(bundled_profile("mobilevit-like.profile").unwrap().workload.layers.len(), 72);
        assert!(bundled_profile("alexnet").is_err());
    }
}
