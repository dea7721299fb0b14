use std::path::Path;
use std::process::Command;

use cablequad::evaluation::scenarios::{EVENTS_HEADER, METRICS_HEADER, REFERENCE_HEADER};
use cablequad::evaluation::Config;
use cablequad::env::TRAJECTORY_HEADER;

fn cablequad(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_cablequad")).args(args).output().unwrap()
}

fn first_line(path: &Path) -> String {
    std::fs::read_to_string(path).unwrap().lines().next().unwrap_or("").to_string()
}

#[test]
fn shipped_hover_config_matches_the_builtin_one() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs/hover.toml");
    assert_eq!(Config::load(&path).unwrap(), Config::hover_training());
}

#[test]
fn config_round_trips_through_toml() {
    for cfg in [Config::default(), Config::hover_training()] {
        assert_eq!(Config::from_toml_str(&cfg.to_toml_string()).unwrap(), cfg);
    }
}

#[test]
fn simulate_writes_trajectory_events_and_metrics() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim");
    let status = cablequad(&["simulate", "--out", out.to_str().unwrap(), "--seed", "4"]);
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(first_line(&out.join("trajectory.csv")), TRAJECTORY_HEADER);
    assert_eq!(first_line(&out.join("events.csv")), EVENTS_HEADER);
    assert_eq!(first_line(&out.join("metrics.csv")), METRICS_HEADER);
}

#[test]
fn gen_ref_depends_on_the_seed() {
    let dir = tempfile::tempdir().unwrap();
    let p = |n: &str| dir.path().join(n).to_string_lossy().into_owned();
    for (name, seed) in [("a.csv", "1"), ("b.csv", "1"), ("c.csv", "2")] {
        assert!(cablequad(&["gen-ref", "--seed", seed, "--out", &p(name)]).status.success());
    }
    let read = |n: &str| std::fs::read(p(n)).unwrap();
    assert_eq!(read("a.csv"), read("b.csv"));
    assert_ne!(read("a.csv"), read("c.csv"));
    assert_eq!(first_line(Path::new(&p("a.csv"))), REFERENCE_HEADER);
}

#[test]
fn bad_input_exits_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    assert_eq!(cablequad(&["eval", "--scenario", "nope", "--out", out]).status.code(), Some(1));
    assert_eq!(cablequad(&["sweep", "--grid", "1:0:2,0:1:2", "--out", out]).status.code(), Some(1));
    assert_eq!(cablequad(&["simulate", "--config", "/no/such/file.toml", "--out", out]).status.code(), Some(1));
    assert_eq!(cablequad(&["--help"]).status.code(), Some(0));
}

#[test]
fn sweep_has_one_row_per_cell_and_seed() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().to_str().unwrap();
    let r = cablequad(&["sweep", "--grid", "0:0.2:2,0.5:1:3", "--seeds", "2", "--out", out]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep_metrics.csv")).unwrap();
    assert_eq!(text.lines().count(), 1 + 2 * 3 * 2);
}
