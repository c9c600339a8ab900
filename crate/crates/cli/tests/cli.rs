use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use edp::gen::{cube_connected_cycles, grid, random_pairs, random_regular};
use edp::graph::demands_to_text;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn edp(args: &[&str], seed: Option<&str>) -> Output {
    let mut c = Command::new(env!("CARGO_BIN_EXE_edp"));
    c.args(args).env_remove("CR_SEED");
    if let Some(s) = seed {
        c.env("CR_SEED", s);
    }
    c.output().expect("binary runs")
}

fn write_instance(dir: &Path) -> (String, String) {
    let mut rng = ChaCha8Rng::seed_from_u64(7);
    let g = cube_connected_cycles(4);
    let pairs = random_pairs(&g, 32, &mut rng).unwrap();
    let (gp, dp) = (dir.join("g.txt"), dir.join("d.txt"));
    fs::write(&gp, g.to_text()).unwrap();
    fs::write(&dp, demands_to_text(&pairs)).unwrap();
    (gp.to_str().unwrap().to_owned(), dp.to_str().unwrap().to_owned())
}

#[test]
fn route_then_verify() {
    let dir = tempfile::tempdir().unwrap();
    let (g, d) = write_instance(dir.path());
    let rep = dir.path().join("r.json");
    let out = edp(&["route", &g, &d, "--profile", "desk", "--out", rep.to_str().unwrap()], Some("3"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();
    assert!(v["routed"].as_u64().unwrap() >= 1);
    assert_eq!(v["config"]["seed"], 3);

    let out = edp(&["verify", rep.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("ok:"));
}

#[test]
fn seed_fixes_report_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let (g, d) = write_instance(dir.path());
    let a = edp(&["route", &g, &d, "--profile", "desk"], Some("11"));
    let b = edp(&["route", &g, &d, "--profile", "desk", "--seed", "11"], None);
    assert!(a.status.success() && b.status.success());
    assert_eq!(a.stdout, b.stdout);
}

#[test]
fn tampered_report_fails_verification() {
    let dir = tempfile::tempdir().unwrap();
    let (g, d) = write_instance(dir.path());
    let rep = dir.path().join("r.json");
    assert!(edp(&["route", &g, &d, "--out", rep.to_str().unwrap()], None).status.success());
    let mut v: serde_json::Value = serde_json::from_str(&fs::read_to_string(&rep).unwrap()).unwrap();

    // Point the first path at the wrong pair.
    let pair = v["routing"][0]["pair"].as_u64().unwrap();
    v["routing"][0]["pair"] = serde_json::json!((pair + 1) % 32);
    let bad = dir.path().join("bad.json");
    fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(edp(&["verify", bad.to_str().unwrap()], None).status.code(), Some(2));

    // Duplicate a path: the pair is routed twice.
    v["routing"][0]["pair"] = serde_json::json!(pair);
    let first = v["routing"][0].clone();
    v["routing"].as_array_mut().unwrap().push(first);
    fs::write(&bad, serde_json::to_string(&v).unwrap()).unwrap();
    assert_eq!(edp(&["verify", bad.to_str().unwrap()], None).status.code(), Some(2));
}

#[test]
fn malformed_input_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    fs::write(&g, "p 3 1\ne 0 7\n").unwrap();
    let d = dir.path().join("d.txt");
    fs::write(&d, "d 0 1\n").unwrap();
    let out = edp(&["route", g.to_str().unwrap(), d.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(4));
    let out = edp(&["verify", d.to_str().unwrap()], None);
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn krv_game_reports_expansion() {
    let out = edp(&["krv-game", "-n", "8", "--player", "adversarial", "--games", "3"], Some("1"));
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["rounds"], 9);
    assert_eq!(v["games"].as_array().unwrap().len(), 3);
}

#[test]
fn decompose_covers_the_set() {
    let dir = tempfile::tempdir().unwrap();
    let g = dir.path().join("g.txt");
    fs::write(&g, grid(6, 6).to_text()).unwrap();
    let s = dir.path().join("s.txt");
    fs::write(&s, "# left half\n0 1 2\n6 7 8\n12 13 14 18 19 20\n").unwrap();
    let out = edp(&["decompose", g.to_str().unwrap(), "--set", s.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let covered: usize = v["clusters"].as_array().unwrap().iter().map(|c| c.as_array().unwrap().len()).sum();
    assert_eq!(covered, 12);
}

#[test]
fn route_expander_meets_greedy_bound() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let x = random_regular(256, 6, &mut rng).unwrap();
    let pairs = random_pairs(&x, 64, &mut rng).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("x.txt");
    fs::write(&f, x.to_text() + &demands_to_text(&pairs)).unwrap();
    let out = edp(&["route-expander", f.to_str().unwrap()], None);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(v["certified_expander"], true);
    let r = &v["result"];
    assert!(r["steps"].as_array().unwrap().len() as u64 >= r["lower_bound"].as_u64().unwrap());
}
