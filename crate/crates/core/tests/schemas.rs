//! The published JSON schemas accept what the crate writes and reject what
//! the parser rejects.

use railsched::workload::{BUNDLED_NAMES, GeneratorConfig, bundled_source, generate_random_instance};
use serde_json::{Value, json};

fn schema(name: &str) -> jsonschema::Validator {
    let path = format!("{}/../../docs/{name}", env!("CARGO_MANIFEST_DIR"));
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path}: {e}"));
    jsonschema::draft202012::new(&serde_json::from_str(&text).unwrap()).unwrap()
}

fn golden_schedules() -> Vec<Value> {
    let dir = format!("{}/tests/golden", env!("CARGO_MANIFEST_DIR"));
    let mut out = Vec::new();
    for entry in std::fs::read_dir(dir).unwrap() {
        let text = std::fs::read_to_string(entry.unwrap().path()).unwrap();
        out.push(serde_json::from_str(&text).unwrap());
    }
    assert!(!out.is_empty());
    out
}

#[test]
fn profiles_conform() {
    let v = schema("profile.schema.json");
    for name in BUNDLED_NAMES {
        let doc: Value = serde_json::from_str(bundled_source(name).unwrap()).unwrap();
        assert!(v.is_valid(&doc), "{name}");
    }
    let cfg = GeneratorConfig {
        gated_banks: 2,
        power_down: true,
        ..GeneratorConfig::default()
    };
    for seed in 0..20 {
        let doc: Value = serde_json::from_str(&generate_random_instance(seed, &cfg).to_json()).unwrap();
        assert!(v.is_valid(&doc), "seed {seed}");
    }
}

#[test]
fn schedules_conform() {
    let v = schema("schedule.schema.json");
    for doc in golden_schedules() {
        assert!(v.is_valid(&doc));
    }
}

#[test]
fn unknown_and_missing_fields_are_rejected() {
    let p = schema("profile.schema.json");
    let good: Value = serde_json::from_str(bundled_source(BUNDLED_NAMES[0]).unwrap()).unwrap();

    let mut extra = good.clone();
    extra["workload"]["colour"] = json!("red");
    assert!(!p.is_valid(&extra));
    assert!(railsched::workload::parse_profile(&extra.to_string(), "extra").is_err());

    let mut missing = good.clone();
    missing["model"].as_object_mut().unwrap().remove("transition");
    assert!(!p.is_valid(&missing));
    assert!(railsched::workload::parse_profile(&missing.to_string(), "missing").is_err());

    let mut version = good;
    version["schema_version"] = json!(2);
    assert!(!p.is_valid(&version));

    let s = schema("schedule.schema.json");
    let mut sched = golden_schedules().remove(0);
    sched["rows"][0]["levels"][0] = json!("OFF");
    assert!(!s.is_valid(&sched));
}
