mod common;

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use common::{pm_one, user};
use ppsv::scenario::{DeviationModel, PowerSlotPartition, Scenario, SubstationProfile};
use proptest::prelude::*;
use serde_json::Value;

fn ppsv(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_ppsv"))
        .args(args)
        .env_remove("PPSV_SEED")
        .output()
        .expect("binary runs")
}

fn write_scenario(dir: &Path, name: &str, s: &Scenario) -> String {
    let path = dir.join(name);
    fs::write(&path, s.to_json_pretty()).unwrap();
    path.to_str().unwrap().to_owned()
}

fn pm_one_scenario() -> Scenario {
    Scenario {
        time_slots: 1,
        substation: SubstationProfile::new(["v"]),
        slots: PowerSlotPartition::new(vec![4.0, 5.0, 6.0]),
        users: vec![user("u", vec![5.0], pm_one())],
    }
}

fn two_state() -> Scenario {
    Scenario {
        time_slots: 4,
        substation: SubstationProfile::new(["day", "night", "day", "night"]),
        slots: PowerSlotPartition::new(vec![0.0, 2.0, 4.0, 6.0, 10.0]),
        users: vec![
            user("a", vec![2.0, 1.0, 2.5, 1.0], pm_one()),
            user("b", vec![1.0, 0.5, 1.5, 0.5], DeviationModel::discrete(&[(0.0, 0.5), (1.0, 0.5)])),
        ],
    }
}

fn json_file(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn verify_writes_one_entry_per_cell() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "s.json", &two_state());
    let base = dir.path().join("out");
    let out = ppsv(&[
        "verify",
        &scen,
        "--epsilon",
        "0.2",
        "--delta",
        "0.1",
        "--workers",
        "2",
        "--format",
        "both",
        "-o",
        base.to_str().unwrap(),
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = json_file(&dir.path().join("out.json"));
    assert_eq!(report["schema_version"], "ppsv-report/1");
    assert_eq!(report["kind"], "verification");
    assert_eq!(report["deterministic"]["entries"].as_array().unwrap().len(), 2 * 4);
    assert_eq!(report["deterministic"]["deviation_composition"], "additive");
    let csv = fs::read_to_string(dir.path().join("out.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 8);
    assert!(csv.starts_with("state,slot_lo_kw,slot_hi_kw,verdict,mean,samples"));
}

#[test]
fn bad_mass_is_invalid_and_names_the_user() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = two_state();
    s.users[1].deviation = DeviationModel::Discrete {
        support_kw: vec![0.0, 1.0],
        probabilities: vec![0.5, 0.4],
    };
    let scen = write_scenario(dir.path(), "bad.json", &s);
    for cmd in ["verify", "validate", "oracle"] {
        let out = ppsv(&[cmd, &scen]);
        assert_eq!(out.status.code(), Some(2), "{cmd}");
        let err = String::from_utf8_lossy(&out.stderr);
        assert!(err.contains("id=b"), "{cmd}: {err}");
    }
}

#[test]
fn identical_runs_have_identical_deterministic_blocks() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "s.json", &two_state());
    let run = |workers: &str, batch: &str| {
        let out = ppsv(&["verify", &scen, "--seed", "17", "--workers", workers, "--batch-size", batch]);
        assert!(out.status.success());
        let v: Value = serde_json::from_slice(&out.stdout).unwrap();
        serde_json::to_string(&v["deterministic"]).unwrap()
    };
    let first = run("1", "4096");
    assert_eq!(first, run("1", "4096"));
    assert_eq!(first, run("3", "5"));
}

#[test]
fn seed_comes_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "s.json", &two_state());
    let out = Command::new(env!("CARGO_BIN_EXE_ppsv"))
        .args(["verify", &scen, "--workers", "1"])
        .env("PPSV_SEED", "99")
        .output()
        .unwrap();
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["deterministic"]["seed"], 99);

    // An explicit flag beats the environment.
    let out = Command::new(env!("CARGO_BIN_EXE_ppsv"))
        .args(["verify", &scen, "--workers", "1", "--seed", "5"])
        .env("PPSV_SEED", "99")
        .output()
        .unwrap();
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["deterministic"]["seed"], 5);
}

#[test]
fn oracle_gives_one_half_for_pm_one() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "pm.json", &pm_one_scenario());
    let out = ppsv(&["oracle", &scen]);
    assert!(out.status.success());
    let v: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["kind"], "oracle");
    let entries = v["deterministic"]["entries"].as_array().unwrap();
    assert_eq!(entries.len(), 2);
    for e in entries {
        assert_eq!(e["verdict"], "exact");
        assert_eq!(e["mean"].as_f64().unwrap(), 0.5);
    }
}

#[test]
fn oracle_refuses_continuous_models() {
    let dir = tempfile::tempdir().unwrap();
    let mut s = pm_one_scenario();
    s.users[0].deviation = DeviationModel::Uniform {
        lo_kw: -1.0,
        hi_kw: 1.0,
    };
    let scen = write_scenario(dir.path(), "c.json", &s);
    let out = ppsv(&["oracle", &scen]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&out.stderr).contains("oracle requires discrete deviation models"));
}

#[test]
fn gen_is_deterministic_and_valid() {
    let a = ppsv(&["gen", "--seed", "8", "--users", "3", "--time-slots", "6"]);
    let b = ppsv(&["gen", "--seed", "8", "--users", "3", "--time-slots", "6"]);
    let c = ppsv(&["gen", "--seed", "9", "--users", "3", "--time-slots", "6"]);
    assert!(a.status.success());
    assert_eq!(a.stdout, b.stdout);
    assert_ne!(a.stdout, c.stdout);
    let s = Scenario::from_json(std::str::from_utf8(&a.stdout).unwrap()).unwrap();
    assert_eq!(s.users.len(), 3);
    assert_eq!(s.time_slots, 6);

    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("g.json");
    let out = ppsv(&["gen", "--family", "truncated-gaussian", "-o", path.to_str().unwrap()]);
    assert!(out.status.success());
    let out = ppsv(&["validate", path.to_str().unwrap()]);
    assert!(out.status.success());
}

#[test]
fn oracle_and_verify_agree_through_files() {
    let dir = tempfile::tempdir().unwrap();
    let scen = write_scenario(dir.path(), "s.json", &two_state());
    let exact_base = dir.path().join("exact");
    let approx_base = dir.path().join("approx");
    assert!(ppsv(&["oracle", &scen, "-o", exact_base.to_str().unwrap()]).status.success());
    assert!(ppsv(&[
        "verify",
        &scen,
        "--epsilon",
        "0.1",
        "--delta",
        "0.01",
        "--seed",
        "4",
        "-o",
        approx_base.to_str().unwrap()
    ])
    .status
    .success());
    let exact = json_file(&dir.path().join("exact.json"));
    let approx = json_file(&dir.path().join("approx.json"));
    let ex = exact["deterministic"]["entries"].as_array().unwrap();
    let ap = approx["deterministic"]["entries"].as_array().unwrap();
    assert_eq!(ex.len(), ap.len());
    assert_eq!(exact["deterministic"]["scenario_digest"], approx["deterministic"]["scenario_digest"]);
    for (e, a) in ex.iter().zip(ap) {
        assert_eq!(e["state"], a["state"]);
        assert_eq!(e["slot"], a["slot"]);
        let psi = e["mean"].as_f64().unwrap();
        match a["verdict"].as_str().unwrap() {
            "estimate" => {
                let m = a["mean"].as_f64().unwrap();
                assert!((m - psi).abs() <= 0.1 * psi, "{e} vs {a}");
            }
            "bot" => assert!(psi < 0.1, "{e} vs {a}"),
            other => panic!("unexpected verdict {other}"),
        }
    }
}

#[test]
fn malformed_json_exit_code() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("m.json");
    fs::write(&path, "{\n  \"time_slots\": 1,\n  oops\n}").unwrap();
    let out = ppsv(&["verify", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("line 3"));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn scenario_json_round_trip(seed in any::<u64>(), users in 1usize..5, time_slots in 1usize..10, family in 0usize..3) {
        let family = [
            ppsv::generate::DeviationFamily::Discrete,
            ppsv::generate::DeviationFamily::Uniform,
            ppsv::generate::DeviationFamily::TruncatedGaussian,
        ][family];
        let s = ppsv::generate::generate(&ppsv::generate::GenParams {
            seed,
            users,
            time_slots,
            states: time_slots.min(3),
            family,
            ..Default::default()
        })
        .unwrap();
        prop_assert!(ppsv::scenario::validate(&s).is_empty());
        let back = Scenario::from_json(&s.to_json_pretty()).unwrap();
        prop_assert_eq!(&back, &s);
        prop_assert_eq!(back.digest(), s.digest());
    }
}
