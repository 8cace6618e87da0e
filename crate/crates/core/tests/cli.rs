//! End-to-end runs of the `railsched` binary.

use std::path::PathBuf;
use std::process::{Command, Output};

use railsched::workload::BUNDLED_NAMES;

fn railsched(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_railsched"))
        .args(args)
        .output()
        .expect("spawn railsched")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn stderr(o: &Output) -> String {
    String::from_utf8(o.stderr.clone()).unwrap()
}

/// Byte-compare against `tests/golden/<name>`; `RAILSCHED_BLESS=1` rewrites.
fn golden(name: &str, actual: &str) {
    let path: PathBuf = [env!("CARGO_MANIFEST_DIR"), "tests", "golden", name].iter().collect();
    if std::env::var_os("RAILSCHED_BLESS").is_some() {
        std::fs::create_dir_all(path.parent().unwrap()).unwrap();
        std::fs::write(&path, actual).unwrap();
        return;
    }
    let expected = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
    assert!(expected == actual, "{name} differs from the golden file; rerun with RAILSCHED_BLESS=1 if intended");
}

#[test]
fn version_line() {
    let o = railsched(&["--version"]);
    assert!(o.status.success());
    assert_eq!(stdout(&o).trim(), "railsched 0.1.0 (profile schema 1, schedule schema 1)");
}

#[test]
fn solve_bundled_matches_golden() {
    let o = railsched(&["solve", "--profile", "bundled:squeezenet-like", "--rate-fps", "30"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let json = stdout(&o);
    let v: serde_json::Value = serde_json::from_str(&json).unwrap();
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["rows"].as_array().unwrap().len(), 26);
    assert!(stderr(&o).contains("E_tot"));
    golden("squeezenet-like-30fps.json", &json);
}

#[test]
fn generated_profile_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let profile = dir.path().join("random.json");
    let p = profile.to_str().unwrap();
    let o = railsched(&["generate", "--seed", "3", "--layers", "5", "--out", p]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));

    let mut energies = Vec::new();
    for solver in ["oracle", "lambda-dp", "jump"] {
        let sched = dir.path().join(format!("{solver}.json"));
        let o = railsched(&[
            "solve", "--profile", p, "--rate-fps", "max", "--solver", solver, "--out",
            sched.to_str().unwrap(),
        ]);
        assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
        let text = std::fs::read_to_string(&sched).unwrap();
        let v: serde_json::Value = serde_json::from_str(&text).unwrap();
        let rows = v["rows"].as_array().unwrap();
        let e: u64 = rows
            .iter()
            .map(|r| r["e_op"].as_u64().unwrap() + r["trans_in_e"].as_u64().unwrap())
            .sum();
        energies.push(e);
        if solver == "oracle" {
            golden("random-3-oracle.json", &text);
        }
    }
    // the rate is the nominal one, so idle energy is tiny and the active part
    // orders the solvers
    assert!(energies[0] <= energies[1] && energies[0] <= energies[2], "{energies:?}");
}

#[test]
fn rate_above_reach_is_infeasible_with_hint() {
    let o = railsched(&["solve", "--profile", "bundled:squeezenet-like", "--rate-fps", "100000"]);
    assert_eq!(o.status.code(), Some(2));
    let err = stderr(&o);
    assert!(err.contains("infeasible"), "{err}");
    assert!(err.contains("hint: the highest achievable rate is"), "{err}");
    assert!(o.stdout.is_empty());
}

#[test]
fn input_errors_exit_3() {
    let missing = railsched(&["solve", "--profile", "/nonexistent/p.json", "--rate-fps", "3"]);
    assert_eq!(missing.status.code(), Some(3));
    assert!(stderr(&missing).contains("/nonexistent/p.json"));

    assert_eq!(railsched(&["solve", "--bogus"]).status.code(), Some(3));
    assert_eq!(
        railsched(&["solve", "--profile", "bundled:alexnet", "--rate-fps", "3"]).status.code(),
        Some(3)
    );
    assert_eq!(
        railsched(&["solve", "--profile", "bundled:squeezenet-like", "--rate-fps", "-4"]).status.code(),
        Some(3)
    );

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    std::fs::write(&bad, "{\"schema_version\": 1, \"workload\": ").unwrap();
    let o = railsched(&["solve", "--profile", bad.to_str().unwrap(), "--rate-fps", "3"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(stderr(&o).contains("parse error"), "{}", stderr(&o));
}

#[test]
fn oracle_over_capacity_exits_4() {
    let o = railsched(&[
        "solve", "--profile", "bundled:mobilevit-xxs-like", "--rate-fps", "30", "--solver", "oracle",
    ]);
    assert_eq!(o.status.code(), Some(4));
    assert!(stderr(&o).contains("lambda-DP"), "{}", stderr(&o));
}

#[test]
fn bound_prints_exact_value() {
    let o = railsched(&["bound", "--levels", "2", "--rails", "2", "--domains", "1", "--layers", "2"]);
    assert_eq!(stdout(&o).trim(), "17");
}

struct RateRecord {
    rate: String,
    policy: String,
    e_tot: u64,
}

fn parse_sweep(csv_text: &str) -> Vec<RateRecord> {
    let mut r = csv::Reader::from_reader(csv_text.as_bytes());
    let h = r.headers().unwrap().clone();
    let col = |name: &str| h.iter().position(|c| c == name).unwrap();
    let (rate, policy, status, e_tot) = (col("rate_fps"), col("policy"), col("status"), col("e_tot"));
    r.records()
        .map(|rec| {
            let rec = rec.unwrap();
            assert_eq!(&rec[status], "ok", "{rec:?}");
            RateRecord {
                rate: rec[rate].to_string(),
                policy: rec[policy].to_string(),
                e_tot: rec[e_tot].parse().unwrap(),
            }
        })
        .collect()
}

#[test]
fn rate_sweep_is_deterministic_and_ordered() {
    let rates = ["1", "10", "100", "max"];
    let joined = rates.join(",");
    std::thread::scope(|scope| {
        for name in BUNDLED_NAMES {
            let joined = joined.clone();
            scope.spawn(move || {
                let profile = format!("bundled:{name}");
                let args = ["sweep-rate", "--profile", profile.as_str(), "--rates-fps", joined.as_str()];
                let a = railsched(&args);
                assert_eq!(a.status.code(), Some(0), "{}", stderr(&a));
                if name == BUNDLED_NAMES[0] {
                    let b = railsched(&args);
                    assert_eq!(a.stdout, b.stdout, "sweep output is not byte-stable");
                }
                let rows = parse_sweep(&stdout(&a));
                assert_eq!(rows.len(), rates.len() * 5);
                let energy = |rate: &str, policy: &str| {
                    rows.iter()
                        .find(|r| r.rate == rate && r.policy == policy)
                        .map(|r| r.e_tot)
                        .unwrap()
                };
                for policy in ["nominal", "gating", "greedy", "greedy+gating", "orchestrated"] {
                    // per-frame energy includes the idle tail, so compare power
                    let per_second: Vec<f64> = rows
                        .iter()
                        .filter(|r| r.policy == policy)
                        .map(|r| r.e_tot as f64 * r.rate.parse::<f64>().unwrap())
                        .collect();
                    assert!(
                        per_second.windows(2).all(|w| w[0] <= w[1] * (1.0 + 1e-12)),
                        "{name} {policy}: {per_second:?}"
                    );
                }
                for rate in &rows {
                    let orchestrated = energy(&rate.rate, "orchestrated");
                    assert!(
                        orchestrated <= energy(&rate.rate, "greedy+gating"),
                        "{name} at {} FPS",
                        rate.rate
                    );
                }
            });
        }
    });
}
